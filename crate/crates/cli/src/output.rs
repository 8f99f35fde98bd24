use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub lift3d: &'static str,
}

pub fn versions() -> Versions {
    Versions { lift3d: VERSION }
}

/// Writes one JSON value per line, to a file under the output directory or
/// to stdout.
pub struct JsonLines<'a> {
    sink: Box<dyn Write + 'a>,
    path: Option<PathBuf>,
}

impl<'a> JsonLines<'a> {
    pub fn new(dir: Option<&Path>, name: &str, stdout: &'a mut dyn Write) -> Result<Self, CliError> {
        match dir {
            Some(d) => {
                let path = d.join(name);
                let file = File::create(&path).map_err(CliError::io(&path))?;
                Ok(Self { sink: Box::new(BufWriter::new(file)), path: Some(path) })
            }
            None => Ok(Self { sink: Box::new(stdout), path: None }),
        }
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        let line = serde_json::to_string(value)?;
        writeln!(self.sink, "{line}").map_err(|e| self.io_error(e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.sink.flush().map_err(|e| self.io_error(e))
    }

    fn io_error(&self, source: std::io::Error) -> CliError {
        let path = self.path.as_ref().map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
        CliError::Io { path, source }
    }
}

/// Writes a pretty-printed JSON document under the output directory, or a
/// single line to stdout.
pub fn write_json<T: Serialize>(dir: Option<&Path>, name: &str, value: &T, stdout: &mut dyn Write) -> Result<(), CliError> {
    match dir {
        Some(d) => {
            let path = d.join(name);
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            std::fs::write(&path, text).map_err(CliError::io(&path))
        }
        None => {
            let line = serde_json::to_string(value)?;
            writeln!(stdout, "{line}").map_err(CliError::io("stdout"))
        }
    }
}

/// Resolves `p` against the directory containing the manifest.
pub fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

pub fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Non-blank lines of a JSON-lines manifest with their 1-based line numbers.
pub fn read_manifest(manifest: &Path) -> Result<Vec<(usize, String)>, CliError> {
    let text = std::fs::read_to_string(manifest).map_err(CliError::io(manifest))?;
    Ok(text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l.to_string())).collect())
}
