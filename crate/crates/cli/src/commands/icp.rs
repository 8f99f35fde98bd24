use std::io::Write;
use std::path::Path;

use lift3d_core::align::{icp as run_icp, IcpConfig, IcpResult};
use lift3d_core::io::load_cloud;
use serde::Serialize;

use super::at;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{versions, write_json, Versions};
use crate::EXIT_OK;

#[derive(Debug, Serialize)]
struct IcpReport<'a> {
    #[serde(flatten)]
    result: IcpResult,
    config: &'a IcpConfig,
    versions: Versions,
}

pub fn icp(run: &RunConfig, src: &Path, dst: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let src = at(src, load_cloud(src))?;
    let dst = at(dst, load_cloud(dst))?;
    let config = &run.overrides.icp;
    let result = run_icp(&src, &dst, config)?;
    write_json(run.out.as_deref(), "icp.json", &IcpReport { result, config, versions: versions() }, out)?;
    Ok(EXIT_OK)
}
