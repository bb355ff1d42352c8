//! Command-line harness: synthetic data, experiment runs and comparisons.

pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bgdeep_core::cgm::parse_cgm_csv_detailed;
use bgdeep_core::pipeline::{run_experiment, ExperimentResult, Method, PreparedData};
use bgdeep_core::pred_ega::{ZoneTables, DEFAULT_ZONES_JSON};
use bgdeep_core::synth::{synth_generate, SynthProfile};
use bgdeep_core::ExperimentConfig;
use clap::{Args, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use report::{
    trials_csv, CompareTable, DataInfo, MethodReport, RunReport, ZonesInfo, REPORT_FORMAT,
};

#[derive(Debug, Parser)]
#[command(
    name = "bgdeep",
    version,
    about = "Blood glucose prediction experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic CGM data set as CSV.
    Synth(SynthArgs),
    /// Run the two-layer predictor over seeded patient splits.
    Run(RunArgs),
    /// Run the predictor and the kernel baseline on identical splits.
    Compare(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV file, or a directory to write `synth.csv` into.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 25)]
    pub patients: usize,
    #[arg(long, default_value_t = 160)]
    pub points: usize,
    /// `noiseless` or `noisy`.
    #[arg(long, default_value = "noisy")]
    pub profile: SynthProfile,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML or JSON experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CGM CSV with header `patient_id,minutes,glucose_mgdl`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub train_percent: Option<f64>,
    /// Enable Butterworth smoothing of the input windows.
    #[arg(long)]
    pub smooth: bool,
    /// Zone tables JSON replacing the shipped defaults.
    #[arg(long)]
    pub zones: Option<PathBuf>,
    /// Also write every final prediction to `predictions.csv`.
    #[arg(long)]
    pub dump_predictions: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads a configuration file; `.json` files are JSON, anything else TOML.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let cfg: ExperimentConfig = if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    Ok(cfg)
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(m) = args.train_percent {
        cfg.train_percent = m;
    }
    if args.smooth {
        cfg.smoothing.enabled = true;
    }
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn load_zones(
    path: Option<&Path>,
    cfg: &ExperimentConfig,
) -> Result<(ZoneTables, ZonesInfo), CliError> {
    let (text, source) = match path {
        Some(p) => (
            fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        ),
        None => (DEFAULT_ZONES_JSON.to_string(), "default".to_string()),
    };
    let mut tables = ZoneTables::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(f) = cfg.rate.denominator_factor {
        tables = tables
            .with_rate_denominator_factor(f)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let info = ZonesInfo {
        source,
        version: tables.version.clone(),
        sha256: sha256_hex(text.as_bytes()),
        rate_denominator_factor: tables.rate_denominator_factor,
    };
    Ok((tables, info))
}

/// Everything a `run` or `compare` invocation computes, before any file is
/// written.
#[derive(Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub results: Vec<ExperimentResult>,
    pub data: PreparedData,
}

impl Outcome {
    pub fn result(&self, method: Method) -> Option<&ExperimentResult> {
        self.results.iter().find(|r| r.method == method)
    }

    pub fn table(&self) -> CompareTable {
        CompareTable::new(&self.results.iter().collect::<Vec<_>>())
    }

    pub fn trials_csv(&self) -> String {
        trials_csv(&self.results.iter().collect::<Vec<_>>())
    }

    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("method,seed,patient_id,j,t_last,target,prediction\n");
        for r in &self.results {
            for t in &r.trials {
                for (w, p) in self.data.windows.iter().zip(&t.predictions) {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        r.method.as_str(),
                        t.seed,
                        w.patient_id,
                        w.j,
                        w.t_last,
                        w.y,
                        p
                    ));
                }
            }
        }
        out
    }
}

/// Runs the experiment for each method on the same data, zones and seeds.
pub fn execute(args: &RunArgs, command: &str, methods: &[Method]) -> Result<Outcome, CliError> {
    let cfg = resolve_config(args)?;
    let (tables, zones) = load_zones(args.zones.as_deref(), &cfg)?;
    let bytes = fs::read(&args.data).map_err(|e| {
        CliError::Runtime(format!(
            "cannot read data file {}: {e}",
            args.data.display()
        ))
    })?;
    let import = parse_cgm_csv_detailed(&bytes)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.data.display())))?;
    let start = Instant::now();
    let data = PreparedData::prepare(&import.series, &cfg).map_err(runtime)?;
    let mut results = Vec::with_capacity(methods.len());
    for &m in methods {
        results.push(run_experiment(&data, &cfg, &tables, m).map_err(runtime)?);
    }
    info!("{command} finished in {:.2?}", start.elapsed());
    let report = RunReport {
        format: REPORT_FORMAT.into(),
        command: command.into(),
        data: DataInfo {
            sha256: sha256_hex(&bytes),
            patients: data.patients.len(),
            windows: data.len(),
            rejected_rows: import.rejected.len(),
        },
        zones,
        population: if cfg.eval.test_only {
            "test_only"
        } else {
            "all"
        }
        .into(),
        seeds: results[0].trials.iter().map(|t| t.seed).collect(),
        methods: results.iter().map(MethodReport::from).collect(),
        config: cfg,
    };
    Ok(Outcome {
        report,
        results,
        data,
    })
}

/// Writes `files` into `dir`; on any failure removes what was written (and
/// `dir` itself if this call created it).
pub fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), CliError> {
    let created = !dir.exists();
    let fail = |written: &[PathBuf], e: String| {
        for p in written {
            let _ = fs::remove_file(p);
        }
        if created {
            let _ = fs::remove_dir_all(dir);
        }
        CliError::Runtime(e)
    };
    if let Err(e) = fs::create_dir_all(dir) {
        return Err(fail(&[], format!("cannot create {}: {e}", dir.display())));
    }
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, content) {
            return Err(fail(
                &written,
                format!("cannot write {}: {e}", path.display()),
            ));
        }
        written.push(path);
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let seed = match (args.seed, &args.config) {
        (Some(s), _) => s,
        (None, Some(p)) => load_config(p)?.seed,
        (None, None) => 0,
    };
    let bytes = synth_generate(args.patients, args.points, seed, args.profile)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let path = if args.out.is_dir() {
        args.out.join("synth.csv")
    } else {
        args.out.clone()
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(&path, bytes)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_run(args: &RunArgs, compare: bool) -> Result<(), CliError> {
    let (command, methods): (&str, &[Method]) = if compare {
        ("compare", &[Method::Deep, Method::Tikhonov])
    } else {
        ("run", &[Method::Deep])
    };
    let outcome = execute(args, command, methods)?;
    let table = outcome.table();
    let mut files = vec![
        ("report.json", outcome.report.to_json()),
        ("trials.csv", outcome.trials_csv()),
    ];
    if compare {
        files.push(("compare.csv", table.to_csv()));
    }
    if args.dump_predictions {
        files.push(("predictions.csv", outcome.predictions_csv()));
    }
    write_outputs(&args.out, &files)?;
    print!("{}", table.to_text());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a, false),
        Command::Compare(a) => cmd_run(a, true),
    }
}
