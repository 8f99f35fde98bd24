use std::io::Write;
use std::path::PathBuf;

use lift3d_core::rng::seeded;
use lift3d_engine::{run_engine, EngineConfig, RecoveryConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{versions, write_json, JsonLines, Versions};
use crate::EXIT_OK;

#[derive(Debug, Clone, Default)]
pub struct EngineFlags {
    pub iterations: Option<usize>,
    pub n: Option<usize>,
    pub curriculum: Option<String>,
    pub inputs: Option<usize>,
    pub temperature: Option<f64>,
    pub epsilon: Option<f64>,
    pub recover: Option<usize>,
    pub elo_csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    iterations: usize,
    final_current_model_mean: f64,
    total_records: usize,
    elo: &'a std::collections::BTreeMap<String, f64>,
    config: &'a EngineConfig,
    versions: Versions,
}

fn parse_curriculum(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("invalid curriculum value {v:?}: {e}")))).collect()
}

/// Applies command-line flags on top of the configured engine.
pub fn apply_flags(mut config: EngineConfig, flags: &EngineFlags) -> Result<EngineConfig, CliError> {
    if let Some(c) = &flags.curriculum {
        config.curriculum = parse_curriculum(c)?;
        if let Some(k) = flags.iterations.filter(|&k| k != config.curriculum.len()) {
            return Err(CliError::Usage(format!("--iterations {k} disagrees with a curriculum of {} values", config.curriculum.len())));
        }
    } else if let Some(k) = flags.iterations {
        let last = *config.curriculum.last().ok_or_else(|| CliError::Usage("curriculum is empty".into()))?;
        config.curriculum.resize(k, last);
    }
    if let Some(n) = flags.n {
        config.n = n;
    }
    if let Some(i) = flags.inputs {
        config.inputs_per_iteration = i;
    }
    if let Some(t) = flags.temperature {
        config.annotator.temperature = t;
    }
    if let Some(e) = flags.epsilon {
        config.annotator.equal_margin = e;
    }
    if let Some(n_recover) = flags.recover {
        config.recovery = Some(RecoveryConfig { n_recover, ..config.recovery.unwrap_or_default() });
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

pub fn engine_sim(run: &RunConfig, flags: &EngineFlags, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = apply_flags(run.overrides.engine.clone(), flags)?;
    let summary = run_engine(&config, &mut seeded(run.seed))?;

    let mut lines = JsonLines::new(run.out.as_deref(), "iterations.jsonl", out)?;
    for it in &summary.iterations {
        lines.write(it)?;
    }
    lines.finish()?;
    let report = Summary {
        iterations: summary.iterations.len(),
        final_current_model_mean: summary.final_current_model_mean,
        total_records: summary.total_records,
        elo: &summary.elo,
        config: &config,
        versions: versions(),
    };
    write_json(run.out.as_deref(), "summary.json", &report, out)?;

    if let Some(path) = &flags.elo_csv {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["model", "elo"])?;
        for (model, elo) in &summary.elo {
            w.write_record([model.as_str(), &elo.to_string()])?;
        }
        w.flush().map_err(CliError::io(path))?;
    }
    Ok(EXIT_OK)
}
