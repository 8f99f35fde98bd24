use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use lift3d_core::rng::derive;
use lift3d_core::Pose;
use lift3d_render::io::{read_mask, read_pointmap, read_rgb, write_mask, write_pointmap, write_rgb};
use lift3d_render::{
    fo_compose, fo_filter, osr_cue_check, osr_place, osr_rerender, rasterize_with, ObjectRender, OsrOutcome, RenderPasteSample,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_mesh, read_at, CameraRef, PoseRef};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{manifest_dir, read_manifest, resolve, write_json, JsonLines};
use crate::{PasteMode, EXIT_DATA, EXIT_OK};

#[derive(Debug, Deserialize)]
struct FoEntry {
    background: String,
    camera: CameraRef,
    target_mesh: String,
    target_pose: PoseRef,
    occluder_mesh: String,
    occluder_pose: PoseRef,
}

#[derive(Debug, Deserialize)]
struct OsrEntry {
    background: String,
    camera: CameraRef,
    pointmap: String,
    mask: String,
    mesh: String,
}

#[derive(Debug, Deserialize)]
struct OsaEntry {
    background: String,
    camera: CameraRef,
    pointmap: String,
    mesh: String,
    pose: PoseRef,
}

/// Result of one manifest line.
enum Processed {
    Accepted { sample: Box<RenderPasteSample>, extra: Extra },
    Rejected { reason: String },
}

#[derive(Debug, Clone, Default, Serialize)]
struct Extra {
    #[serde(skip_serializing_if = "Option::is_none")]
    target_is_occluder: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<(i64, i64)>,
    visible_pixels: usize,
    object_pixels: usize,
}

#[derive(Debug, Serialize)]
struct ManifestLine {
    id: String,
    mode: &'static str,
    image: String,
    m_vis: String,
    m_obj: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pointmap: Option<String>,
    mesh: Option<String>,
    pose: Pose,
    #[serde(flatten)]
    extra: Extra,
}

#[derive(Debug, Serialize)]
struct Rejection {
    id: String,
    reason: String,
}

#[derive(Debug, Serialize)]
struct Rejections {
    mode: &'static str,
    accepted: usize,
    counts: BTreeMap<String, usize>,
    rejected: Vec<Rejection>,
    errors: Vec<Rejection>,
}

fn mode_name(mode: PasteMode) -> &'static str {
    match mode {
        PasteMode::Fo => "fo",
        PasteMode::Osr => "osr",
        PasteMode::Osa => "osa",
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, line: usize) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Data(format!("manifest line {line}: {e}")))
}

fn line_id(text: &str, line: usize) -> String {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_string))
        .unwrap_or_else(|| format!("line {line}"))
}

fn process(run: &RunConfig, mode: PasteMode, base: &Path, index: usize, line: usize, text: &str) -> Result<Processed, CliError> {
    let mut rng = derive(run.seed, index as u64);
    let shading = &run.overrides.shading;
    match mode {
        PasteMode::Fo => {
            let e: FoEntry = parse(text, line)?;
            let background = read_at(resolve(base, &e.background), |p| read_rgb(p))?;
            let camera = e.camera.load(base)?;
            let object = |mesh: &str, pose: &PoseRef| -> Result<ObjectRender, CliError> {
                let pose = pose.load(base)?;
                let render = rasterize_with(&load_mesh(&resolve(base, mesh))?, &pose, &camera, shading);
                Ok(ObjectRender { render, pose })
            };
            let target = object(&e.target_mesh, &e.target_pose)?;
            let occluder = object(&e.occluder_mesh, &e.occluder_pose)?;
            let composite = fo_compose(&background, &target, &occluder, &mut rng, &run.overrides.fo)?;
            let mut sample = composite.sample;
            let area = background.width() * background.height();
            if let Err(reason) = fo_filter(&sample.m_vis, &sample.m_obj, area) {
                return Ok(Processed::Rejected { reason: reason.to_string() });
            }
            sample.mesh = Some(e.target_mesh);
            let extra = Extra {
                target_is_occluder: Some(composite.target_is_occluder),
                offset: Some(composite.offset),
                visible_pixels: sample.m_vis.count(),
                object_pixels: sample.m_obj.count(),
            };
            Ok(Processed::Accepted { sample: Box::new(sample), extra })
        }
        PasteMode::Osr | PasteMode::Osa => {
            let (background, camera, pointmap, mesh_path, pose) = if mode == PasteMode::Osr {
                let e: OsrEntry = parse(text, line)?;
                let pointmap = read_at(resolve(base, &e.pointmap), |p| read_pointmap(p))?;
                let mask = read_at(resolve(base, &e.mask), |p| read_mask(p))?;
                let cue = osr_cue_check(&mask, &pointmap, &run.overrides.cue)?;
                if !cue.accept {
                    let reason = if cue.physical_support { "no occlusion cue" } else { "no physical support" };
                    return Ok(Processed::Rejected { reason: reason.into() });
                }
                let mesh = load_mesh(&resolve(base, &e.mesh))?;
                let pose = osr_place(&mask, &pointmap, &mesh, &mut rng)?;
                (e.background, e.camera, pointmap, e.mesh, pose)
            } else {
                let e: OsaEntry = parse(text, line)?;
                let pointmap = read_at(resolve(base, &e.pointmap), |p| read_pointmap(p))?;
                let pose = e.pose.load(base)?;
                (e.background, e.camera, pointmap, e.mesh, pose)
            };
            let background = read_at(resolve(base, &background), |p| read_rgb(p))?;
            let camera = camera.load(base)?;
            let mesh = load_mesh(&resolve(base, &mesh_path))?;
            match osr_rerender(&background, &pointmap, &mesh, &pose, &camera, shading)? {
                OsrOutcome::Accepted(mut sample) => {
                    sample.mesh = Some(mesh_path);
                    let extra = Extra { visible_pixels: sample.m_vis.count(), object_pixels: sample.m_obj.count(), ..Default::default() };
                    Ok(Processed::Accepted { sample, extra })
                }
                OsrOutcome::Rejected { reason, .. } => Ok(Processed::Rejected { reason: reason.to_string() }),
            }
        }
    }
}

fn write_sample(dir: &Path, mode: PasteMode, id: &str, sample: RenderPasteSample, extra: Extra) -> Result<ManifestLine, CliError> {
    let name = |suffix: &str| format!("{id}_{suffix}");
    let image = name("image.png");
    let m_vis = name("vis.png");
    let m_obj = name("obj.png");
    write_rgb(dir.join(&image), &sample.image)?;
    write_mask(dir.join(&m_vis), &sample.m_vis)?;
    write_mask(dir.join(&m_obj), &sample.m_obj)?;
    let pointmap = match &sample.pointmap {
        Some(p) => {
            let file = name("pointmap.bin");
            write_pointmap(dir.join(&file), p)?;
            Some(file)
        }
        None => None,
    };
    Ok(ManifestLine {
        id: id.to_string(),
        mode: mode_name(mode),
        image,
        m_vis,
        m_obj,
        pointmap,
        mesh: sample.mesh,
        pose: sample.pose,
        extra,
    })
}

enum Written {
    Sample(Box<ManifestLine>),
    Rejected(String),
}

pub fn renderpaste(run: &RunConfig, mode: PasteMode, manifest: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let dir = run.out_dir()?;
    let base = manifest_dir(manifest);
    let results: Vec<(String, Result<Written, String>)> = read_manifest(manifest)?
        .par_iter()
        .enumerate()
        .map(|(index, (line, text))| {
            let id = line_id(text, *line);
            let r = process(run, mode, &base, index, *line, text).and_then(|p| match p {
                Processed::Accepted { sample, extra } => write_sample(dir, mode, &id, *sample, extra).map(|m| Written::Sample(Box::new(m))),
                Processed::Rejected { reason } => Ok(Written::Rejected(reason)),
            });
            (id, r.map_err(|e| e.to_string()))
        })
        .collect();

    let mut log = Rejections { mode: mode_name(mode), accepted: 0, counts: BTreeMap::new(), rejected: Vec::new(), errors: Vec::new() };
    let mut lines = JsonLines::new(Some(dir), "manifest.jsonl", out)?;
    for (id, r) in results {
        match r {
            Ok(Written::Sample(m)) => {
                log.accepted += 1;
                lines.write(&m)?;
            }
            Ok(Written::Rejected(reason)) => {
                *log.counts.entry(reason.clone()).or_default() += 1;
                log.rejected.push(Rejection { id, reason });
            }
            Err(e) => {
                let _ = writeln!(err, "{id}: {e}");
                log.errors.push(Rejection { id, reason: e });
            }
        }
    }
    lines.finish()?;
    let failed = !log.errors.is_empty();
    write_json(Some(dir), "rejections.json", &log, out)?;
    Ok(if failed { EXIT_DATA } else { EXIT_OK })
}
