use std::io::Write;
use std::path::Path;

use lift3d_core::Pose;
use lift3d_refine::{accept_refinement, refine_layout, RefineConfig};
use lift3d_render::io::read_mask;
use lift3d_render::Camera;
use serde::Serialize;

use super::{at, load_mesh, read_json};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{versions, write_json, Versions};
use crate::EXIT_OK;

#[derive(Debug, Serialize)]
struct RefineReport<'a> {
    /// Pose after the acceptance check.
    pose: Pose,
    refined_pose: Pose,
    initial_iou: f64,
    refined_iou: f64,
    accepted: bool,
    evaluations: usize,
    config: &'a RefineConfig,
    versions: Versions,
}

pub fn refine(
    run: &RunConfig,
    mesh: &Path,
    init_pose: &Path,
    target: &Path,
    camera: &Path,
    trace: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mesh = load_mesh(mesh)?;
    let init: Pose = read_json(init_pose)?;
    let target = at(target, read_mask(target))?;
    let camera: Camera = read_json(camera)?;
    let config = run.refine();
    let result = refine_layout(&mesh, &init, &target, &camera, &config)?;
    let pose = accept_refinement(&init, &result.pose, &mesh, &target, &camera)?;

    let trace_path = trace.map(Path::to_path_buf).or_else(|| run.out.as_ref().map(|d| d.join("trace.csv")));
    if let Some(path) = trace_path {
        let mut w = csv::Writer::from_path(&path)?;
        for entry in &result.trace {
            w.serialize(entry)?;
        }
        w.flush().map_err(CliError::io(&path))?;
    }

    let report = RefineReport {
        pose,
        refined_pose: result.pose,
        initial_iou: result.initial_iou,
        refined_iou: result.iou,
        accepted: pose != init,
        evaluations: result.trace.len(),
        config: &config,
        versions: versions(),
    };
    write_json(run.out.as_deref(), "refine.json", &report, out)?;
    Ok(EXIT_OK)
}
