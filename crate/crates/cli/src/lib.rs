//! Command-line front end for the `cascade-node` simulator.
//!
//! Every subcommand writes its files into `--out` and finishes with
//! `manifest.json`. Exit codes: 0 success, 1 invalid input, 2 numerical
//! failure, 3 I/O or malformed files.

pub mod commands;
pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cascade_node::{io::to_json, ErrorKind, Tolerances};
use clap::Parser;
use serde::Serialize;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cascade_node::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Malformed(String),
    #[error("{0}")]
    Usage(String),
    /// The run finished but some check failed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => EXIT_VALIDATION,
                ErrorKind::Numerical => EXIT_NUMERICAL,
                ErrorKind::Io => EXIT_IO,
            },
            CliError::File { .. } | CliError::Malformed(_) => EXIT_IO,
            CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Failed(_) => EXIT_NUMERICAL,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Files written by one run, in order.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::File {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::File { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<String> {
        let text = to_json(value)?;
        self.write(name, &text)?;
        Ok(text)
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: serde_json::Value,
    wall_clock_seconds: f64,
    outputs: Vec<String>,
    tolerances: Tolerances,
}

/// What a subcommand hands back for the manifest.
pub struct RunRecord {
    pub config: serde_json::Value,
    pub tolerances: Tolerances,
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match commands::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let start = Instant::now();
    let name = cli.command.name();
    let result = Outputs::new(&cli.out).and_then(|mut out| {
        let record = commands::dispatch(&cli.command, &mut out)?;
        let manifest = Manifest {
            command: name,
            version: env!("CARGO_PKG_VERSION"),
            config: record.config,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            outputs: out.files.clone(),
            tolerances: record.tolerances,
        };
        let path = out.dir.join("manifest.json");
        fs::write(&path, to_json(&manifest)?).map_err(|source| CliError::File { path, source })
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
