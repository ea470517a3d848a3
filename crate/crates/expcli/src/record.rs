//! Output rows and run manifests.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentKind;

/// Column order of the CSV output.
pub const COLUMNS: [&str; 14] = [
    "experiment",
    "config_hash",
    "seed",
    "n",
    "rho",
    "T",
    "epoch",
    "q",
    "p_flip",
    "beta",
    "value_name",
    "value",
    "flag",
    "wall_ms",
];

/// One atomic measurement.
///
/// Coordinates without a column of their own are appended to `value_name`
/// as `name@key=value,key=value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub n: Option<usize>,
    pub rho: Option<f64>,
    #[serde(rename = "T")]
    pub temperature: Option<f64>,
    pub epoch: Option<usize>,
    pub q: Option<usize>,
    pub p_flip: Option<f64>,
    pub beta: Option<f64>,
    pub value_name: String,
    pub value: f64,
    pub flag: String,
    pub wall_ms: u64,
}

impl RunRecord {
    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = Some(t);
        self
    }

    pub fn epoch(mut self, e: usize) -> Self {
        self.epoch = Some(e);
        self
    }

    pub fn q(mut self, q: usize) -> Self {
        self.q = Some(q);
        self
    }

    pub fn p_flip(mut self, p: f64) -> Self {
        self.p_flip = Some(p);
        self
    }

    pub fn beta(mut self, b: f64) -> Self {
        self.beta = Some(b);
        self
    }

    /// Adds a flag; several flags are joined with `;`.
    pub fn flag(mut self, flag: &str) -> Self {
        if !self.flag.is_empty() {
            self.flag.push(';');
        }
        self.flag.push_str(flag);
        self
    }

    pub fn flag_if(self, cond: bool, flag: &str) -> Self {
        if cond {
            self.flag(flag)
        } else {
            self
        }
    }

    pub fn wall_ms(mut self, ms: u64) -> Self {
        self.wall_ms = ms;
        self
    }

    /// Base name without `@` qualifiers.
    pub fn base_name(&self) -> &str {
        self.value_name.split('@').next().unwrap_or("")
    }

    /// Value of qualifier `key`, if present.
    pub fn qualifier(&self, key: &str) -> Option<&str> {
        let (_, quals) = self.value_name.split_once('@')?;
        quals.split(',').find_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            (k == key).then_some(v)
        })
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flag.split(';').any(|f| f == flag)
    }
}

/// Builds a `name@k=v,…` value name.
pub fn qualified(name: &str, quals: &[(&str, String)]) -> String {
    if quals.is_empty() {
        return name.to_string();
    }
    let mut s = format!("{name}@");
    for (i, (k, v)) in quals.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{k}={v}");
    }
    s
}

/// Shared fields of every row of one run.
#[derive(Debug, Clone)]
pub struct RecordContext {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
}

impl RecordContext {
    pub fn record(&self, value_name: impl Into<String>, value: f64) -> RunRecord {
        RunRecord {
            experiment: self.experiment.name().to_string(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            n: None,
            rho: None,
            temperature: None,
            epoch: None,
            q: None,
            p_flip: None,
            beta: None,
            value_name: value_name.into(),
            value,
            flag: String::new(),
            wall_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

pub fn write_csv<W: Write>(w: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(COLUMNS)?;
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> csv::Result<Vec<RunRecord>> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

pub fn write_records(path: &Path, format: OutputFormat, records: &[RunRecord]) -> anyhow::Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(file, records)?,
        OutputFormat::Json => {
            let mut file = file;
            serde_json::to_writer_pretty(&mut file, records)?;
            file.write_all(b"\n")?;
            file.flush()?;
        }
    }
    Ok(())
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub root_seed: u64,
    pub seed_scheme: String,
    pub config: Value,
    pub format: OutputFormat,
    pub threads: usize,
    pub rows: usize,
    pub complete: bool,
    pub error: Option<String>,
    pub outputs: Vec<PathBuf>,
    pub wall_ms: u64,
}

pub const SEED_SCHEME: &str = "stream(root, path) = ChaCha8(seed), seed = fold over path of \
splitmix64(state ^ splitmix64(label + 0x9E3779B97F4A7C15)); string labels hashed with FNV-1a 64; \
paths start with the experiment name followed by the unit's role and grid coordinates";

impl Manifest {
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
