//! Scenario runner for `ricci-core`: parses scenario files, runs one
//! experiment per process into a run directory, replays runs bit for bit and
//! emits plot data.
//!
//! A run directory holds `scenario.cfg`, `events.jsonl`, the experiment's
//! CSV and JSON outputs and, written last, `manifest.json`. A directory
//! without a manifest is an incomplete run.

pub mod config;
mod experiments;
pub mod output;
pub mod plotdata;
pub mod replay;
pub mod surface;

use std::path::{Path, PathBuf};

pub use ricci_core;

pub use config::{Background, Kind, Scenario, SurfaceSpec};
pub use output::{Manifest, ManifestFile};
pub use plotdata::{emit_plotdata, PlotKind};
pub use replay::{replay, replay_check, ReplayOutcome, ReplayReport};

/// Environment variable capping the worker threads of a run.
pub const THREADS_ENV: &str = "RICCI_LAB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(ricci_core::Error),
    #[error("numerical failure: {0}")]
    Failure(String),
    #[error("incomplete or unreadable run directory: {0}")]
    Incomplete(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ricci_core::Error> for LabError {
    fn from(e: ricci_core::Error) -> Self {
        match e {
            ricci_core::Error::Io(io) => LabError::Io(io),
            other => LabError::Numerical(other),
        }
    }
}

impl LabError {
    /// Process exit code: 2 for validation errors, 3 for numerical failures
    /// and 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) => 2,
            LabError::Numerical(_) | LabError::Failure(_) => 3,
            LabError::Incomplete(_) | LabError::Io(_) => 1,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            LabError::Validation(_) => "validation",
            LabError::Numerical(_) | LabError::Failure(_) => "numerical",
            LabError::Incomplete(_) => "incomplete",
            LabError::Io(_) => "io",
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;

/// A finished run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Worker pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> LabResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| LabError::Validation(format!("{THREADS_ENV}={v:?} must be a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| LabError::Failure(format!("cannot start the worker pool: {e}")))
}

/// The initial surface, or `None` for `collar_order`, which works on the
/// series alone and so also accepts backgrounds that have no chart.
fn prepare(scenario: &Scenario) -> LabResult<Option<surface::Prepared>> {
    match scenario.kind {
        Kind::CollarOrder => Ok(None),
        _ => surface::prepare(scenario).map(Some),
    }
}

/// Runs `scenario` into a fresh timestamped directory under `out`.
pub fn run(scenario: &Scenario, out: &Path) -> LabResult<RunOutcome> {
    let prepared = prepare(scenario)?;
    experiments::precheck(scenario, prepared.as_ref())?;
    let pool = thread_pool()?;
    let dir = output::fresh_run_dir(out, &scenario.name)?;
    let manifest = experiments::execute(scenario, prepared.as_ref(), &dir, &pool)?;
    Ok(RunOutcome { dir, manifest })
}

/// Runs `scenario` into `dir`, which must not exist yet.
pub fn run_into(scenario: &Scenario, dir: &Path) -> LabResult<Manifest> {
    let prepared = prepare(scenario)?;
    experiments::precheck(scenario, prepared.as_ref())?;
    let pool = thread_pool()?;
    if dir.exists() {
        return Err(LabError::Validation(format!("{} already exists", dir.display())));
    }
    std::fs::create_dir_all(dir)?;
    experiments::execute(scenario, prepared.as_ref(), dir, &pool)
}
