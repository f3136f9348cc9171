//! `qlink`: runs the link experiments and drift tools from a config file.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on bad arguments,
//! a missing config file or a config that fails validation.

mod drift_cmd;
mod presets;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qlink_core::config::{echo_architecture, RunConfig};
use qlink_core::experiments::fits::NamedFit;
use qlink_core::experiments::output::{
    resolve_output_dir, write_outputs, DimensionTable, Experiment, Format, RunContext, OUTPUT_DIR_ENV,
};
use qlink_core::experiments::{
    run_dimension_table, run_interference_sweep, run_loss_sweep, run_matrix_experiment, LossSweepSpec, SweepSpec,
    DEFAULT_GATES_PER_CELL, DEFAULT_GATES_PER_POINT,
};
use qlink_core::protocol::{ArchitectureConfig, Basis, GainAccounting};

/// Failure classes, mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: missing or invalid config, unreadable input file (exit 2).
    Input(String),
    /// Anything that goes wrong once the run has started (exit 1).
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<qlink_core::Error> for Failure {
    fn from(e: qlink_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "qlink", version, about = "Phase-encoded quantum link simulator")]
struct Cli {
    /// Link configuration file, or one of the shipped preset names
    /// (paper_500m.cfg, paper_b2b.cfg, ideal.cfg). Defaults to paper_500m.cfg.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for output files.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Named parameter set applied on top of the config.
    #[arg(long, global = true, value_enum)]
    fit: Option<FitArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitArg {
    Custom,
    Ideal,
    #[value(name = "paper_b2b")]
    PaperB2b,
    #[value(name = "paper_500m")]
    Paper500m,
    #[value(name = "fit_dark_share")]
    FitDarkShare,
    #[value(name = "fit_qber11")]
    FitQber11,
}

impl From<FitArg> for NamedFit {
    fn from(f: FitArg) -> Self {
        match f {
            FitArg::Custom => NamedFit::Custom,
            FitArg::Ideal => NamedFit::Ideal,
            FitArg::PaperB2b => NamedFit::PaperB2b,
            FitArg::Paper500m => NamedFit::Paper500m,
            FitArg::FitDarkShare => NamedFit::FitDarkShare,
            FitArg::FitQber11 => NamedFit::FitQber11,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BasisArg {
    Mub1,
    Mub2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AccountingArg {
    /// Charge only Bob's demultiplexing lantern.
    Bob,
    /// Charge both lanterns.
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Interference fringe: sweep Alice's phase at a fixed Bob basis.
    Sweep(SweepArgs),
    /// BB84 probability matrix over the four states and both bases.
    Matrix(MatrixArgs),
    /// QBER and secret fraction against added loss, with the 11% threshold.
    Losssweep(LossArgs),
    /// Detection gain of the lantern link over time-bin post-selection per dimension.
    Dimtable(DimArgs),
    /// Phase-drift traces and spectra.
    #[command(subcommand)]
    Drift(drift_cmd::DriftCommand),
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value_t = BasisArg::Mub1)]
    basis: BasisArg,
    /// Points over one up-and-down phase ramp.
    #[arg(long, default_value_t = 65)]
    points: usize,
    #[arg(long, default_value_t = DEFAULT_GATES_PER_POINT)]
    gates: u64,
    /// Ramp start, radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    start: f64,
    /// Ramp turning point, radians.
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI, allow_negative_numbers = true)]
    stop: f64,
}

#[derive(Debug, Args)]
struct MatrixArgs {
    /// Gates per (state, basis) cell.
    #[arg(long, default_value_t = DEFAULT_GATES_PER_CELL)]
    gates: u64,
}

#[derive(Debug, Args)]
struct LossArgs {
    #[arg(long, default_value_t = 40.0)]
    max_db: f64,
    #[arg(long, default_value_t = 0.25)]
    step_db: f64,
    #[arg(long, default_value_t = 0.11)]
    qber_limit: f64,
}

#[derive(Debug, Args)]
struct DimArgs {
    #[arg(long, default_value_t = 8)]
    dmax: usize,
    /// Insertion loss of one lantern, dB.
    #[arg(long, default_value_t = 0.7)]
    lantern_db: f64,
    #[arg(long, value_enum, default_value_t = AccountingArg::Bob)]
    accounting: AccountingArg,
}

pub fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map_or_else(String::new, |p| p.get_name().to_string())
}

/// Settings shared by every subcommand once flags and config are merged.
pub struct Session {
    pub seed: u64,
    pub dir: PathBuf,
    pub format: Format,
    pub timestamp: u64,
}

impl Session {
    fn context(&self, config_echo: String) -> RunContext {
        RunContext {
            seed: self.seed,
            timestamp: self.timestamp,
            dir: self.dir.clone(),
            format: self.format,
            config_echo,
        }
    }
}

/// `SOURCE_DATE_EPOCH` when set, for reproducible file names; the clock otherwise.
fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return RunConfig::parse(presets::DEFAULT).map_err(|e| Failure::Input(e.to_string()));
    };
    let text = if path.exists() {
        std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?
    } else if let Some(text) = presets::lookup(path) {
        text.to_string()
    } else {
        return Err(Failure::Input(format!("config file {} not found", path.display())));
    };
    RunConfig::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// The resolved link plus the text echoed into manifests.
fn resolve(cli: &Cli, rc: &RunConfig) -> Result<(ArchitectureConfig, String), Failure> {
    let fit = cli.fit.map(NamedFit::from).unwrap_or(rc.fit);
    let cfg = rc
        .resolve_with(fit)
        .map_err(|e| Failure::Input(format!("cannot apply fit `{fit}`: {e}")))?;
    let echo = format!("fit = {fit}\n{}", echo_architecture(&cfg));
    Ok((cfg, echo))
}

fn emit<E: Experiment>(exp: &E, session: &Session, echo: String) -> Result<(), Failure> {
    let files = write_outputs(exp, &session.context(echo)).context("writing outputs")?;
    for (k, v) in exp.summary() {
        println!("{k} = {v}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let rc = load_config(cli.config.as_deref())?;
    let session = Session {
        seed: cli.seed.or(rc.seed).unwrap_or(0),
        dir: cli
            .output_dir
            .clone()
            .or_else(|| rc.output_dir.clone())
            .unwrap_or_else(|| resolve_output_dir(None)),
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        timestamp: timestamp(),
    };
    match &cli.command {
        Command::Sweep(a) => {
            let (cfg, echo) = resolve(&cli, &rc)?;
            let spec = SweepSpec {
                start_rad: a.start,
                stop_rad: a.stop,
                points: a.points,
                gates_per_point: a.gates,
                basis: match a.basis {
                    BasisArg::Mub1 => Basis::Mub1,
                    BasisArg::Mub2 => Basis::Mub2,
                },
            };
            let echo = format!(
                "{echo}sweep.basis = {}\nsweep.points = {}\nsweep.gates_per_point = {}\nsweep.start_rad = {}\nsweep.stop_rad = {}\n",
                value_name(&a.basis),
                a.points,
                a.gates,
                a.start,
                a.stop
            );
            let result = run_interference_sweep(&cfg, &spec, session.seed)?;
            emit(&result, &session, echo)
        }
        Command::Matrix(a) => {
            let (cfg, echo) = resolve(&cli, &rc)?;
            let result = run_matrix_experiment(&cfg, a.gates, session.seed)?;
            emit(&result, &session, format!("{echo}matrix.gates_per_cell = {}\n", a.gates))
        }
        Command::Losssweep(a) => {
            let (cfg, echo) = resolve(&cli, &rc)?;
            let spec = LossSweepSpec {
                max_db: a.max_db,
                step_db: a.step_db,
                qber_limit: a.qber_limit,
            };
            let result = run_loss_sweep(&cfg, &spec)?;
            emit(&result, &session, echo)
        }
        Command::Dimtable(a) => {
            let accounting = match a.accounting {
                AccountingArg::Bob => GainAccounting::BobLantern,
                AccountingArg::Both => GainAccounting::BothLanterns,
            };
            let table = DimensionTable {
                lantern_loss_db: a.lantern_db,
                rows: run_dimension_table(a.dmax, a.lantern_db, accounting)
                    .map_err(|e| Failure::Input(e.to_string()))?,
            };
            print!("{}", table.table().to_csv());
            let echo = format!(
                "dimtable.dmax = {}\ndimtable.lantern_db = {}\ndimtable.accounting = {}\n",
                a.dmax,
                a.lantern_db,
                value_name(&a.accounting)
            );
            emit(&table, &session, echo)
        }
        Command::Drift(cmd) => drift_cmd::run(cmd, &session),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("qlink: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("qlink: {e:#}");
            ExitCode::from(1)
        }
    }
}
