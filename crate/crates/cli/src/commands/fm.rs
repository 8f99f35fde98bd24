use std::io::Write;

use lift3d_fm::check::{run_checks, CheckResult};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{versions, write_json, Versions};
use crate::{TableFormat, EXIT_DATA, EXIT_OK};

#[derive(Debug, Serialize)]
struct CheckReport {
    passed: bool,
    checks: Vec<CheckResult>,
    versions: Versions,
}

fn table(checks: &[CheckResult]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
    let mut s = format!("{:<width$}  {:>14}  {:>14}  {:>9}  result\n", "check", "value", "expected", "tol");
    for c in checks {
        s += &format!(
            "{:<width$}  {:>14.6e}  {:>14.6e}  {:>9.1e}  {}\n",
            c.name,
            c.value,
            c.expected,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    s
}

pub fn fm_check(run: &RunConfig, format: TableFormat, out: &mut dyn Write) -> Result<i32, CliError> {
    let checks = run_checks(run.seed);
    let passed = checks.iter().all(|c| c.passed);
    match format {
        TableFormat::Table => write!(out, "{}", table(&checks)).map_err(CliError::io("stdout"))?,
        TableFormat::Json => write_json(run.out.as_deref(), "fm_check.json", &CheckReport { passed, checks, versions: versions() }, out)?,
    }
    Ok(if passed { EXIT_OK } else { EXIT_DATA })
}
