use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Subcommand, ValueEnum};

use qlink_core::drift::{
    compare_band_power, fourier_spectrum, synthesize_drift_trace, DriftModel, Spectrum, TimeSeries, TraceParams,
    Window, LOW_BAND_HZ,
};
use qlink_core::experiments::output::Format;

use crate::{value_name, Failure, Session};

#[derive(Debug, Subcommand)]
pub enum DriftCommand {
    /// Synthesize a modulated photodiode trace with optional phase drift.
    Synth(SynthArgs),
    /// One-sided magnitude spectrum of a trace file.
    Spectrum(SpectrumArgs),
    /// Compare the low-band power of two traces or spectra.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    None,
    /// Wiener phase walk, step size set by --sigma.
    RandomWalk,
    /// Stationary mean-reverting phase, set by --rms and --tau.
    MeanReverting,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WindowArg {
    Rectangular,
    Hann,
}

impl From<WindowArg> for Window {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Rectangular => Window::Rectangular,
            WindowArg::Hann => Window::Hann,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50.0)]
    minutes: f64,
    #[arg(long, default_value_t = 1000.0)]
    sample_rate: f64,
    #[arg(long, default_value_t = 100.0)]
    mod_hz: f64,
    /// Peak phase excursion of the drive, radians.
    #[arg(long, default_value_t = PI / 2.0)]
    depth: f64,
    /// Static operating-point phase, radians.
    #[arg(long, default_value_t = PI / 2.0, allow_negative_numbers = true)]
    bias: f64,
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::None)]
    model: ModelArg,
    /// Random-walk step, rad per sqrt(s).
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Mean-reverting RMS phase, rad.
    #[arg(long, default_value_t = 0.1)]
    rms: f64,
    /// Mean-reverting correlation time, s.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Output file; defaults to `drift-synth_<timestamp>_<seed>.csv` in the output directory.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Trace CSV written by `drift synth` (or any file in that format).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = WindowArg::Rectangular)]
    window: WindowArg,
    /// Output file; defaults to `drift-spectrum_<timestamp>_<seed>.csv` in the output directory.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First trace or spectrum CSV.
    #[arg(long, value_name = "PATH")]
    a: PathBuf,
    /// Second trace or spectrum CSV.
    #[arg(long, value_name = "PATH")]
    b: PathBuf,
    /// Band is (lo, hi] in Hz.
    #[arg(long, default_value_t = LOW_BAND_HZ.0)]
    band_lo: f64,
    #[arg(long, default_value_t = LOW_BAND_HZ.1)]
    band_hi: f64,
    /// Ratios inside [1/tolerance, tolerance] count as indistinguishable.
    #[arg(long, default_value_t = 2.0)]
    tolerance: f64,
    /// Window applied when an input is a trace.
    #[arg(long, value_enum, default_value_t = WindowArg::Rectangular)]
    window: WindowArg,
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

/// A spectrum file as is, or the spectrum of a trace file.
fn load_spectrum(path: &Path, window: Window) -> Result<Spectrum, Failure> {
    let text = read_input(path)?;
    let bad = |e: qlink_core::Error| Failure::Input(format!("{}: {e}", path.display()));
    if text.lines().any(|l| l.trim() == "freq_hz,magnitude") {
        Spectrum::from_csv(&text).map_err(bad)
    } else {
        let ts = TimeSeries::from_csv(&text).map_err(bad)?;
        fourier_spectrum(&ts, window).map_err(bad)
    }
}

fn output_path(session: &Session, name: &str, out: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
    match out {
        Some(p) => Ok(p.clone()),
        None => {
            std::fs::create_dir_all(&session.dir)
                .with_context(|| format!("creating {}", session.dir.display()))?;
            Ok(session.dir.join(format!("{name}_{}_{}.csv", session.timestamp, session.seed)))
        }
    }
}

fn write(path: &Path, body: &str) -> anyhow::Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn run(cmd: &DriftCommand, session: &Session) -> Result<(), Failure> {
    match cmd {
        DriftCommand::Synth(a) => {
            let drift = match a.model {
                ModelArg::None => DriftModel::None,
                ModelArg::RandomWalk => DriftModel::RandomWalk {
                    sigma_rad_per_sqrt_s: a.sigma,
                },
                ModelArg::MeanReverting => DriftModel::MeanReverting {
                    rms_rad: a.rms,
                    correlation_time_s: a.tau,
                },
            };
            let params = TraceParams {
                duration_s: a.minutes * 60.0,
                sample_rate_hz: a.sample_rate,
                mod_freq_hz: a.mod_hz,
                modulation_depth_rad: a.depth,
                bias_rad: a.bias,
                visibility: a.visibility,
                drift,
            };
            let ts = synthesize_drift_trace(&params, session.seed).map_err(|e| Failure::Input(e.to_string()))?;
            let path = output_path(session, "drift-synth", &a.out)?;
            write(&path, &ts.to_csv())?;
            let mut manifest = String::new();
            let _ = writeln!(manifest, "runner = drift-synth\nseed = {}", session.seed);
            let _ = writeln!(manifest, "qlink_version = {}", env!("CARGO_PKG_VERSION"));
            let _ = writeln!(
                manifest,
                "minutes = {}\nsample_rate_hz = {}\nmod_freq_hz = {}\ndepth_rad = {}\nbias_rad = {}\nvisibility = {}\nmodel = {}",
                a.minutes,
                a.sample_rate,
                a.mod_hz,
                a.depth,
                a.bias,
                a.visibility,
                value_name(&a.model)
            );
            let _ = writeln!(manifest, "drift = {drift:?}");
            write(&path.with_extension("manifest.txt"), &manifest)?;
            println!("samples = {}", ts.len());
            Ok(())
        }
        DriftCommand::Spectrum(a) => {
            let text = read_input(&a.input)?;
            let ts = TimeSeries::from_csv(&text).map_err(|e| Failure::Input(format!("{}: {e}", a.input.display())))?;
            let s = fourier_spectrum(&ts, a.window.into()).map_err(|e| Failure::Input(e.to_string()))?;
            let path = output_path(session, "drift-spectrum", &a.out)?;
            write(&path, &s.to_csv())?;
            println!("resolution_hz = {}", s.resolution_hz());
            if let Some(peak) = s.peak_frequency() {
                println!("peak_hz = {peak}");
            }
            println!("low_band_power = {}", s.band_power(LOW_BAND_HZ));
            Ok(())
        }
        DriftCommand::Compare(a) => {
            let sa = load_spectrum(&a.a, a.window.into())?;
            let sb = load_spectrum(&a.b, a.window.into())?;
            let c = compare_band_power(&sa, &sb, (a.band_lo, a.band_hi), a.tolerance)
                .map_err(|e| Failure::Input(e.to_string()))?;
            match session.format {
                Format::Json => {
                    println!("{}", serde_json::to_string_pretty(&c).context("serializing comparison")?);
                }
                Format::Csv => {
                    println!("band_hz = ({}, {}]", c.band_hz.0, c.band_hz.1);
                    println!("power_a = {}", c.power_a);
                    println!("power_b = {}", c.power_b);
                    println!("ratio = {}", c.ratio);
                    let verdict = if c.indistinguishable { "indistinguishable" } else { "distinguishable" };
                    println!("decision = {verdict}");
                }
            }
            Ok(())
        }
    }
}
