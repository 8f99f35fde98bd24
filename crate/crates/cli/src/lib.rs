//! `lift3d` command-line front end.
//!
//! Exit codes: 0 on success, 2 when any input could not be processed, 64
//! on usage errors. Every subcommand accepts `--seed` (falling back to
//! `LIFT3D_SEED`, then 0), `--threads` and `--config`, a JSON file of
//! per-module overrides.

mod commands;
mod config;
mod error;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{Overrides, RunConfig};
pub use error::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "lift3d", version, about = "Single-image 3D lifting toolkit: evaluation, data synthesis, refinement and simulation")]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, env = "LIFT3D_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file of per-module configuration overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if absent. Results go to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PasteMode {
    /// Flying occlusions: paste a target and an occluder.
    Fo,
    /// Object swap with random placement.
    Osr,
    /// Object swap with an annotated pose.
    Osa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Shape metrics for each `{id, pred_mesh, gt_mesh}` manifest line.
    EvalShape { manifest: PathBuf },
    /// Layout metrics for each `{id, pred_mesh, gt_mesh, pred_pose, gt_pose}` line.
    EvalLayout { manifest: PathBuf },
    /// Rigid ICP of a source cloud onto a target cloud.
    Icp { src: PathBuf, dst: PathBuf },
    /// Render-paste data synthesis; requires --out.
    Renderpaste {
        #[arg(long, value_enum)]
        mode: PasteMode,
        manifest: PathBuf,
    },
    /// Data-engine simulation.
    EngineSim {
        /// Iterations K; the curriculum is cut or padded with its last value.
        #[arg(long)]
        iterations: Option<usize>,
        /// Candidates per input.
        #[arg(long)]
        n: Option<usize>,
        /// Quality bars, comma separated.
        #[arg(long)]
        curriculum: Option<String>,
        #[arg(long)]
        inputs: Option<usize>,
        /// Annotator logistic temperature.
        #[arg(long)]
        temperature: Option<f64>,
        /// Annotator equal-quality margin.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Enable best-of-N recovery with this many candidates.
        #[arg(long)]
        recover: Option<usize>,
        /// Write the final Elo fit as CSV.
        #[arg(long)]
        elo_csv: Option<PathBuf>,
    },
    /// Render-and-compare layout refinement against a target mask.
    Refine {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        init_pose: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        /// Trace CSV path; defaults to `trace.csv` under --out.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Closed-form checks of the flow objectives.
    FmCheck {
        #[arg(long, value_enum, default_value = "table")]
        format: TableFormat,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let run = RunConfig::new(cli.seed, cli.threads, cli.config.as_deref(), cli.out.clone())?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = run.threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?
    };
    // commands run inside the pool on buffered sinks, which are Send
    let (mut out_buf, mut err_buf) = (Vec::new(), Vec::new());
    let result = pool.install(|| dispatch(cli.command, &run, &mut out_buf, &mut err_buf));
    out.write_all(&out_buf).map_err(CliError::io("stdout"))?;
    err.write_all(&err_buf).map_err(CliError::io("stderr"))?;
    result
}

fn dispatch(command: Command, run: &RunConfig, out: &mut Vec<u8>, err: &mut Vec<u8>) -> Result<i32, CliError> {
    match command {
        Command::EvalShape { manifest } => commands::eval::eval_shape(run, &manifest, out, err),
        Command::EvalLayout { manifest } => commands::eval::eval_layout(run, &manifest, out, err),
        Command::Icp { src, dst } => commands::icp::icp(run, &src, &dst, out),
        Command::Renderpaste { mode, manifest } => commands::renderpaste::renderpaste(run, mode, &manifest, out, err),
        Command::EngineSim { iterations, n, curriculum, inputs, temperature, epsilon, recover, elo_csv } => {
            let flags = commands::engine::EngineFlags { iterations, n, curriculum, inputs, temperature, epsilon, recover, elo_csv };
            commands::engine::engine_sim(run, &flags, out)
        }
        Command::Refine { mesh, init_pose, target, camera, trace } => {
            commands::refine::refine(run, &mesh, &init_pose, &target, &camera, trace.as_deref(), out)
        }
        Command::FmCheck { format } => commands::fm::fm_check(run, format, out),
    }
}
