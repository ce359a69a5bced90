//! Experiment harness: config parsing, dispatch, CSV output and sweeps.

pub mod config;
pub mod experiments;
pub mod output;

use std::fmt;
use std::path::PathBuf;

pub use config::{ConfigError, Experiment, ExperimentConfig, OUT_DIR_ENV};
pub use experiments::{dispatch, Check, Outcome};
pub use fbm_harnack::harnack::SE_THRESHOLD;
pub use output::{Cell, Record, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Library(fbm_harnack::Error),
    Io(std::io::Error),
    Threads(String),
}

impl RunError {
    /// Transfer-identity failures count as a violated verdict, everything
    /// else is an error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Library(e) if is_transfer_mismatch(e) => EXIT_VIOLATED,
            _ => EXIT_ERROR,
        }
    }
}

fn is_transfer_mismatch(e: &fbm_harnack::Error) -> bool {
    match e {
        fbm_harnack::Error::TransferMismatch { .. } => true,
        fbm_harnack::Error::Path { source, .. } => is_transfer_mismatch(source),
        _ => false,
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Library(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Threads(m) => write!(f, "thread pool: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<fbm_harnack::Error> for RunError {
    fn from(e: fbm_harnack::Error) -> Self {
        RunError::Library(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

pub(crate) fn config_error(key: &str, message: String) -> RunError {
    RunError::Config(ConfigError {
        key: Some(key.to_string()),
        message,
    })
}

/// Runs `f` on a pool with `threads` workers (0 keeps the global pool).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Threads(e.to_string()))?;
    Ok(pool.install(f))
}

/// Files written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub outcome: Outcome,
    pub detail_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs one experiment and writes `<experiment>_detail.csv` and
/// `<experiment>_summary.csv` into the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunArtifacts, RunError> {
    let exp = cfg.validate()?;
    let outcome = with_threads(cfg.threads, || dispatch(cfg))??;
    let dir = cfg.output_dir();
    let detail_path = dir.join(format!("{}_detail.csv", exp.name()));
    let summary_path = dir.join(format!("{}_summary.csv", exp.name()));
    outcome.detail.write(&detail_path)?;
    outcome.summary.to_table().write(&summary_path)?;
    Ok(RunArtifacts {
        outcome,
        detail_path,
        summary_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepArtifacts {
    pub table: Table,
    pub path: PathBuf,
    pub all_hold: bool,
}

/// One summary row per axis value; row `i` uses seed `seed + i`.
pub fn sweep_table(cfg: &ExperimentConfig, axis: &str, values: &[String]) -> Result<(Table, bool), RunError> {
    if !config::is_known_key(axis) {
        return Err(config_error(axis, "unknown key".to_string()));
    }
    if !config::is_numeric_key(axis) {
        return Err(config_error(axis, "sweep axis must be a numeric key".to_string()));
    }
    if values.is_empty() {
        return Err(config_error(axis, "sweep needs at least one value".to_string()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let mut row_cfg = cfg.clone();
        row_cfg.seed = cfg.seed.wrapping_add(i as u64);
        row_cfg.set(axis, v)?;
        row_cfg.validate()?;
        rows.push(row_cfg);
    }
    let mut table: Option<Table> = None;
    let mut all_hold = true;
    for (row_cfg, v) in rows.iter().zip(values) {
        let outcome = with_threads(cfg.threads, || dispatch(row_cfg))??;
        all_hold &= outcome.all_hold();
        let t = table.get_or_insert_with(|| {
            let mut names = vec![format!("axis_{axis}")];
            names.extend(outcome.summary.names().iter().map(|s| s.to_string()));
            Table {
                columns: names,
                rows: Vec::new(),
            }
        });
        let mut row = vec![Cell::text(v.trim())];
        row.extend(outcome.summary.fields.iter().map(|(_, c)| c.clone()));
        t.push(row);
    }
    Ok((table.expect("at least one sweep row"), all_hold))
}

/// Runs [`sweep_table`] and writes `<experiment>_sweep_<axis>.csv`.
pub fn sweep(cfg: &ExperimentConfig, axis: &str, values: &[String]) -> Result<SweepArtifacts, RunError> {
    let exp = cfg.experiment()?;
    let (table, all_hold) = sweep_table(cfg, axis, values)?;
    let path = cfg.output_dir().join(format!("{}_sweep_{axis}.csv", exp.name()));
    table.write(&path)?;
    Ok(SweepArtifacts { table, path, all_hold })
}
