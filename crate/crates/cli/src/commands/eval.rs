use std::io::Write;
use std::path::Path;

use lift3d_core::metrics::{self, LayoutEvalConfig, LayoutReport, ShapeEvalConfig, ShapeReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_mesh, PoseRef};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{manifest_dir, read_manifest, resolve, versions, write_json, JsonLines, Versions};
use crate::{EXIT_DATA, EXIT_OK};

#[derive(Debug, Clone, Deserialize)]
struct Entry {
    id: String,
    pred_mesh: String,
    gt_mesh: String,
    #[serde(default)]
    pred_pose: Option<PoseRef>,
    #[serde(default)]
    gt_pose: Option<PoseRef>,
}

#[derive(Debug, Clone, Serialize)]
struct SampleRecord<'a, R, C> {
    sample_id: String,
    #[serde(flatten)]
    result: SampleResult<R>,
    config: &'a C,
    versions: Versions,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
enum SampleResult<R> {
    Shape(R),
    Layout(R),
    Error(String),
}

#[derive(Debug, Clone, Serialize)]
struct ErrorEntry {
    sample_id: String,
    error: String,
}

#[derive(Debug, Clone, Serialize)]
struct Aggregate<M> {
    kind: &'static str,
    /// Successfully evaluated samples.
    n: usize,
    n_errors: usize,
    /// `null` when `n = 0`.
    means: Option<M>,
    errors: Vec<ErrorEntry>,
}

#[derive(Debug, Clone, Serialize)]
struct ShapeMeans {
    f1: f64,
    precision: f64,
    recall: f64,
    viou: f64,
    chamfer: f64,
    emd: f64,
}

#[derive(Debug, Clone, Serialize)]
struct LayoutMeans {
    iou3d: f64,
    icp_rot_deg: f64,
    add_s: f64,
    /// Fraction of samples passing.
    add_s_at_01: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// A sample id with its report or error message.
type Outcome<R> = (String, Result<R, String>);

/// A manifest entry, or the line id with its parse error.
type Parsed = Result<Entry, (String, String)>;

fn parse_entries(manifest: &Path) -> Result<Vec<Parsed>, CliError> {
    Ok(read_manifest(manifest)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str::<Entry>(&text).map_err(|e| (format!("line {line}"), format!("manifest line {line}: {e}")))
        })
        .collect())
}

/// Evaluates every entry in parallel, keeping manifest order.
fn evaluate<R: Send>(manifest: &Path, f: impl Fn(&Path, &Entry) -> Result<R, CliError> + Sync) -> Result<Vec<Outcome<R>>, CliError> {
    let base = manifest_dir(manifest);
    Ok(parse_entries(manifest)?
        .into_par_iter()
        .map(|e| match e {
            Ok(entry) => (entry.id.clone(), f(&base, &entry).map_err(|e| e.to_string())),
            Err((id, msg)) => (id, Err(msg)),
        })
        .collect())
}

/// How one evaluation kind labels, wraps and averages its reports.
struct Kind<R, M> {
    name: &'static str,
    wrap: fn(R) -> SampleResult<R>,
    means: fn(&[R]) -> M,
}

fn emit<R: Serialize + Clone, C: Serialize, M: Serialize>(
    run: &RunConfig,
    kind: Kind<R, M>,
    results: Vec<Outcome<R>>,
    config: &C,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    {
        let mut lines = JsonLines::new(run.out.as_deref(), "samples.jsonl", out)?;
        for (id, r) in results {
            let result = match r {
                Ok(report) => {
                    ok.push(report.clone());
                    (kind.wrap)(report)
                }
                Err(e) => {
                    errors.push(ErrorEntry { sample_id: id.clone(), error: e.clone() });
                    SampleResult::Error(e)
                }
            };
            lines.write(&SampleRecord { sample_id: id, result, config, versions: versions() })?;
        }
        lines.finish()?;
    }
    for e in &errors {
        let _ = writeln!(err, "{}: {}", e.sample_id, e.error);
    }
    let aggregate =
        Aggregate { kind: kind.name, n: ok.len(), n_errors: errors.len(), means: (!ok.is_empty()).then(|| (kind.means)(&ok)), errors };
    let failed = aggregate.n_errors > 0;
    write_json(run.out.as_deref(), "aggregate.json", &aggregate, out)?;
    Ok(if failed { EXIT_DATA } else { EXIT_OK })
}

pub fn eval_shape(run: &RunConfig, manifest: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let config: ShapeEvalConfig = run.shape();
    let results = evaluate(manifest, |base, e| {
        let pred = load_mesh(&resolve(base, &e.pred_mesh))?;
        let gt = load_mesh(&resolve(base, &e.gt_mesh))?;
        Ok(metrics::eval_shape(&pred, &gt, &config)?)
    })?;
    fn means(r: &[ShapeReport]) -> ShapeMeans {
        ShapeMeans {
            f1: mean(r.iter().map(|x| x.f1_at_threshold)),
            precision: mean(r.iter().map(|x| x.precision)),
            recall: mean(r.iter().map(|x| x.recall)),
            viou: mean(r.iter().map(|x| x.voxel_iou)),
            chamfer: mean(r.iter().map(|x| x.chamfer)),
            emd: mean(r.iter().map(|x| x.emd)),
        }
    }
    emit(run, Kind { name: "shape", wrap: SampleResult::Shape, means }, results, &config, out, err)
}

pub fn eval_layout(run: &RunConfig, manifest: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let config: LayoutEvalConfig = run.layout();
    let results = evaluate(manifest, |base, e| {
        let pose = |p: &Option<PoseRef>, which: &str| -> Result<_, CliError> {
            p.as_ref().ok_or_else(|| CliError::Data(format!("missing {which}"))).and_then(|p| p.load(base))
        };
        let pred_pose = pose(&e.pred_pose, "pred_pose")?;
        let gt_pose = pose(&e.gt_pose, "gt_pose")?;
        let pred = load_mesh(&resolve(base, &e.pred_mesh))?;
        let gt = load_mesh(&resolve(base, &e.gt_mesh))?;
        Ok(metrics::eval_layout(&pred, &pred_pose, &gt, &gt_pose, &config)?)
    })?;
    fn means(r: &[LayoutReport]) -> LayoutMeans {
        LayoutMeans {
            iou3d: mean(r.iter().map(|x| x.iou3d)),
            icp_rot_deg: mean(r.iter().map(|x| x.icp_rot_deg)),
            add_s: mean(r.iter().map(|x| x.add_s)),
            add_s_at_01: mean(r.iter().map(|x| if x.add_s_at { 1.0 } else { 0.0 })),
        }
    }
    emit(run, Kind { name: "layout", wrap: SampleResult::Layout, means }, results, &config, out, err)
}
