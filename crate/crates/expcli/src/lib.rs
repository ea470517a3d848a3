//! Config-driven experiment runner for the `kdntk` library.
//!
//! A run reads a TOML config, executes one experiment and writes one row
//! per atomic measurement (CSV or JSON) plus a JSON manifest holding the
//! resolved config, root seed and seed derivation scheme.

pub mod config;
pub mod experiments;
pub mod record;

use std::path::{Path, PathBuf};
use std::time::Instant;

use config::{config_hash, ConfigError, ExperimentConfig, ExperimentKind};
use experiments::common::Seeds;
pub use experiments::RunError;
use record::{Manifest, OutputFormat, RecordContext, RunRecord, SEED_SCHEME};

/// Characters of the config hash written to every row.
pub const SHORT_HASH: usize = 16;

pub const DEFAULT_OUT_DIR: &str = "results";

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Experiment named on the command line, if any.
    pub kind: Option<ExperimentKind>,
    pub out_dir: Option<PathBuf>,
    /// Overrides the config's root seed.
    pub seed: Option<u64>,
    /// Worker threads; the global pool when absent.
    pub threads: Option<usize>,
    pub format: OutputFormat,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            kind: None,
            out_dir: None,
            seed: None,
            threads: None,
            format: OutputFormat::Csv,
        }
    }
}

/// Result of a run whose outputs were written.
#[derive(Debug)]
pub struct RunOutcome {
    pub kind: ExperimentKind,
    pub records: Vec<RunRecord>,
    pub records_path: PathBuf,
    pub manifest_path: PathBuf,
    /// The failure that cut the run short; completed rows were still written.
    pub error: Option<RunError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, RunError::exit_code)
    }
}

/// Outcome of `validate`.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub kind: ExperimentKind,
    pub solve_cost: f64,
    pub warnings: Vec<String>,
}

pub fn validate(cfg: &ExperimentConfig, requested: Option<ExperimentKind>) -> Result<ValidationReport, ConfigError> {
    let kind = cfg.resolve_kind(requested)?;
    cfg.validate(kind)?;
    Ok(ValidationReport {
        kind,
        solve_cost: cfg.solve_cost(),
        warnings: cfg.warnings(),
    })
}

pub fn validate_file(path: &Path, requested: Option<ExperimentKind>) -> Result<ValidationReport, ConfigError> {
    validate(&ExperimentConfig::load(path)?, requested)
}

/// Validates and executes `cfg`, writing records and manifest under the output directory.
///
/// Config errors return `Err` before anything is written. Numerical failures
/// during the run keep the completed rows and are reported in the outcome.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let kind = cfg.resolve_kind(opts.kind)?;
    cfg.validate(kind)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let resolved = cfg.resolved(kind, seed);
    let hash = config_hash(&resolved);
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    std::fs::create_dir_all(&out_dir).map_err(|e| RunError::Output(format!("{}: {e}", out_dir.display())))?;

    let env = experiments::Env {
        cfg,
        ctx: RecordContext {
            experiment: kind,
            config_hash: hash[..SHORT_HASH].to_string(),
            seed,
        },
        seeds: Seeds::new(seed, kind),
    };
    let start = Instant::now();
    let mut records = Vec::new();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| ConfigError::new("threads", e.to_string()))?;
    let threads = pool.current_num_threads();
    let result = pool.install(|| experiments::run(&env, &mut records));
    let error = result.err();

    let records_path = out_dir.join(format!("{}.{}", kind.name(), opts.format.extension()));
    let manifest_path = out_dir.join(format!("{}.manifest.json", kind.name()));
    record::write_records(&records_path, opts.format, &records).map_err(anyhow_io)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: format!("{} (kdntk {})", env!("CARGO_PKG_VERSION"), kdntk::VERSION),
        experiment: kind,
        config_hash: hash,
        root_seed: seed,
        seed_scheme: SEED_SCHEME.to_string(),
        config: resolved,
        format: opts.format,
        threads,
        rows: records.len(),
        complete: error.is_none(),
        error: error.as_ref().map(|e| e.to_string()),
        outputs: vec![records_path.clone()],
        wall_ms: start.elapsed().as_millis() as u64,
    };
    manifest.write(&manifest_path).map_err(anyhow_io)?;
    Ok(RunOutcome {
        kind,
        records,
        records_path,
        manifest_path,
        error,
    })
}

fn anyhow_io(e: anyhow::Error) -> RunError {
    RunError::Output(e.to_string())
}

/// Loads `path` and runs it.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    run(&ExperimentConfig::load(path)?, opts)
}
