//! Command-line front end: `synth`, `ingest`, `train`, `evaluate`, `report`.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 data or
//! integrity error, 4 internal failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use labrisk::bundle::{self, ReportBundle, REPORT_FILE};
use labrisk::config::StudyConfig;
use labrisk::dataio::{write_clean_csv, DataError};
use labrisk::interpret::AnalyteMap;
use labrisk::metrics;
use labrisk::synth::{self, SynthConfig, SynthError};
use labrisk::Error;

/// Environment variable consulted for the worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "LABRISK_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "labrisk", version, about = "Leakage-safe risk-prediction studies on longitudinal laboratory data")]
pub struct Cli {
    /// Worker threads (default: all cores, or LABRISK_WORKERS).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Suppress progress messages.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort, its ground-truth manifest and a matching study config.
    Synth {
        /// Synthetic cohort config (TOML); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and clean a raw export into a cohort CSV plus schema and exclusion log.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        /// Raw CSV; overrides `data.input`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full study and write a report bundle.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Bundle directory; overrides `data.output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `protocol.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute the held-out metrics from a bundle on its recorded test rows.
    Evaluate {
        #[arg(long)]
        bundle: PathBuf,
        /// The raw CSV the bundle was trained on.
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `<bundle>/reevaluation`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the Markdown report from a bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        /// Defaults to `<bundle>/report.md`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        Error::Data(DataError::MissingLabelColumn(_)) => 2,
        Error::Synth(SynthError::InvalidConfig(_)) => 2,
        Error::Model(_) | Error::Metric(_) | Error::Internal(_) => 4,
        _ => 3,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: exit_code(&e), message: e.to_string() }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializes");
    out.push(b'\n');
    out
}

/// Loads a study config; a missing or unreadable file is a config error.
fn load_config(path: &Path) -> Result<StudyConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    StudyConfig::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn input_path(config_path: &Path, config: &StudyConfig, flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
    match (flag, &config.data.input) {
        (Some(p), _) => Ok(p),
        (None, Some(p)) => Ok(relative_to(config_path, p)),
        (None, None) => Err(Failure::config("no input: pass --input or set data.input")),
    }
}

fn load_synth_config(path: Option<&Path>, seed: Option<u64>) -> Result<SynthConfig, Failure> {
    let mut cfg = match path {
        None => SynthConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {}", p.display(), e.to_string().trim_end())))?
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

fn cmd_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<String, Failure> {
    let cfg = load_synth_config(config, seed)?;
    let (csv, manifest) = synth::generate(&cfg).map_err(Error::from)?;
    write(&out.join("cohort.csv"), &csv)?;
    write(&out.join("manifest.json"), json(&manifest))?;
    write(&out.join("study.toml"), StudyConfig::for_synthetic(&manifest).to_toml())?;
    Ok(format!(
        "wrote {} rows ({} cases, {} features) to {}",
        manifest.n,
        manifest.cases,
        manifest.features.len(),
        out.display()
    ))
}

fn cmd_ingest(config_path: &Path, input: Option<PathBuf>, out: &Path) -> Result<String, Failure> {
    let config = load_config(config_path)?;
    let input = input_path(config_path, &config, input)?;
    let bytes = read(&input)?;
    let ingested = bundle::ingest_with(&config, &bytes)?;
    let label = &config.data.label_column;
    write(&out.join("cohort.csv"), write_clean_csv(&ingested.cohort, label))?;
    write(&out.join("schema.json"), json(&ingested.schema))?;
    write(&out.join("exclusions.json"), json(&ingested.schema.exclusions))?;
    if let Some(d) = &ingested.descriptive {
        let schema = labrisk::dataio::CohortSchema {
            label_column: label.clone(),
            columns: d.columns().to_vec(),
            exclusions: Vec::new(),
            warnings: Vec::new(),
            rejected_rows: ingested.schema.rejected_rows,
        };
        write(&out.join("descriptive.csv"), write_clean_csv(d, label))?;
        write(&out.join("descriptive.schema.json"), json(&schema))?;
    }
    let c = &ingested.cohort;
    Ok(format!(
        "{} rows ({} cases), {} predictor columns, {} excluded, {} ragged rows rejected",
        c.n(),
        c.positives(),
        c.p(),
        ingested.schema.exclusions.len(),
        ingested.schema.rejected_rows
    ))
}

fn analyte_map(config_path: &Path, config: &StudyConfig) -> Result<AnalyteMap, Failure> {
    match &config.report.analyte_map {
        None => Ok(AnalyteMap::bundled()),
        Some(p) => {
            let path = relative_to(config_path, p);
            let text = fs::read_to_string(&path).map_err(|e| Failure::config(format!("cannot read analyte map {}: {e}", path.display())))?;
            AnalyteMap::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
        }
    }
}

fn cmd_train(config_path: &Path, input: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>) -> Result<String, Failure> {
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.protocol.seed = s;
    }
    let input = input_path(config_path, &config, input)?;
    let out = match (out, &config.data.output) {
        (Some(o), _) => o,
        (None, Some(o)) => relative_to(config_path, o),
        (None, None) => return Err(Failure::config("no output directory: pass --out or set data.output")),
    };
    let map = analyte_map(config_path, &config)?;
    let bytes = read(&input)?;
    let b = bundle::train_bundle(&config, &bytes, &map)?;
    b.write(&out)?;
    let auroc = b.evaluation.value(metrics::MetricKind::Auroc).map_or("undefined".into(), |v| format!("{v:.3}"));
    Ok(format!(
        "selected {} (CV AUROC {:.3}); held-out AUROC {auroc}; bundle written to {}",
        b.summary.selected,
        b.summary.candidates.iter().find(|c| c.family == b.summary.selected).map_or(f64::NAN, |c| c.mean_auroc),
        out.display()
    ))
}

fn cmd_evaluate(bundle_dir: &Path, input: &Path, out: Option<PathBuf>) -> Result<String, Failure> {
    let b = ReportBundle::load(bundle_dir)?;
    let bytes = read(input)?;
    let e = bundle::reevaluate(&b, &bytes)?;
    let out = out.unwrap_or_else(|| bundle_dir.join("reevaluation"));
    let level = b.config.metrics.confidence_level;
    let table = json(&e);
    write(&out.join("metrics.json"), &table)?;
    write(&out.join("metrics.txt"), metrics::format_table(&e.table, level))?;
    write(&out.join("roc.csv"), metrics::roc_csv(&e.roc))?;
    write(&out.join("pr.csv"), metrics::pr_csv(&e.pr))?;
    write(&out.join("calibration.csv"), metrics::calibration_csv(&e.calibration))?;
    write(&out.join("dca.csv"), metrics::decision_curve_csv(&e.decision_curve))?;
    if table != json(&b.evaluation) {
        return Err(Error::Internal("re-evaluation differs from the stored metric table".into()).into());
    }
    Ok(format!("re-evaluated {} test rows; metric table matches the stored one\n{}", b.split.test_rows.len(), metrics::format_table(&e.table, level)))
}

fn cmd_report(bundle_dir: &Path, out: Option<PathBuf>) -> Result<String, Failure> {
    let b = ReportBundle::load(bundle_dir)?;
    let out = out.unwrap_or_else(|| bundle_dir.join(REPORT_FILE));
    write(&out, bundle::render_report(&b))?;
    Ok(format!("report written to {}", out.display()))
}

fn dispatch(command: Command) -> Result<String, Failure> {
    match command {
        Command::Synth { config, out, seed } => cmd_synth(config.as_deref(), &out, seed),
        Command::Ingest { config, input, out } => cmd_ingest(&config, input, &out),
        Command::Train { config, input, out, seed } => cmd_train(&config, input, out, seed),
        Command::Evaluate { bundle, input, out } => cmd_evaluate(&bundle, &input, out),
        Command::Report { bundle, out } => cmd_report(&bundle, out),
    }
}

fn worker_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if let Some(n) = flag {
        return if n == 0 { Err(Failure::config("--workers must be at least 1")) } else { Ok(Some(n)) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs a parsed command on a pool of the requested size.
pub fn run(cli: Cli) -> Result<String, Failure> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(cli.workers)? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure { code: 4, message: format!("cannot start worker pool: {e}") })?;
    pool.install(|| dispatch(cli.command))
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let quiet = cli.quiet;
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(msg)) => {
            if !quiet {
                println!("{msg}");
            }
            0
        }
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            f.code
        }
        Err(_) => {
            eprintln!("error: internal failure (panic); this is a bug");
            4
        }
    }
}
