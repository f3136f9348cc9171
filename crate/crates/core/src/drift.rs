//! Interferometer phase-drift traces and their Fourier spectra.
//!
//! A trace is the photodiode signal at one interferometer output while Alice's
//! modulator is driven sinusoidally:
//!
//! `I(t) = 1/2 (1 + V cos(A sin(2 pi f t) + bias + phi_drift(t)))`
//!
//! The bias sets the static operating point; at quadrature (pi/2) the drive
//! shows up at the fundamental and slow drift shows up linearly in the
//! low-frequency band.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::seed::rng_for;
use crate::{Error, Result};

/// Minimum number of samples for a spectrum.
pub const MIN_SPECTRUM_SAMPLES: usize = 16;

/// Default comparison band, `(lo, hi]` in Hz.
pub const LOW_BAND_HZ: (f64, f64) = (0.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DriftModel {
    None,
    /// Wiener process: phase increments `N(0, sigma^2 dt)`.
    RandomWalk { sigma_rad_per_sqrt_s: f64 },
    /// Stationary Ornstein-Uhlenbeck phase with the given RMS and correlation time.
    MeanReverting { rms_rad: f64, correlation_time_s: f64 },
}

impl DriftModel {
    /// The same process with every phase excursion multiplied by `k`.
    pub fn scaled(self, k: f64) -> Self {
        match self {
            DriftModel::None => DriftModel::None,
            DriftModel::RandomWalk { sigma_rad_per_sqrt_s } => DriftModel::RandomWalk {
                sigma_rad_per_sqrt_s: k * sigma_rad_per_sqrt_s,
            },
            DriftModel::MeanReverting {
                rms_rad,
                correlation_time_s,
            } => DriftModel::MeanReverting {
                rms_rad: k * rms_rad,
                correlation_time_s,
            },
        }
    }

    fn validate(self) -> Result<()> {
        let ok = match self {
            DriftModel::None => true,
            DriftModel::RandomWalk { sigma_rad_per_sqrt_s } => sigma_rad_per_sqrt_s >= 0.0,
            DriftModel::MeanReverting {
                rms_rad,
                correlation_time_s,
            } => rms_rad >= 0.0 && correlation_time_s > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid drift model {self:?}")))
        }
    }
}

/// Parameters of a synthetic drift trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceParams {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub mod_freq_hz: f64,
    /// Peak phase excursion `A` of the drive, radians.
    pub modulation_depth_rad: f64,
    pub bias_rad: f64,
    pub visibility: f64,
    pub drift: DriftModel,
}

impl Default for TraceParams {
    /// 50 minutes at 1 kHz with a 100 Hz drive, quadrature bias, no drift.
    fn default() -> Self {
        Self {
            duration_s: 50.0 * 60.0,
            sample_rate_hz: 1000.0,
            mod_freq_hz: 100.0,
            modulation_depth_rad: PI / 2.0,
            bias_rad: PI / 2.0,
            visibility: 1.0,
            drift: DriftModel::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    sample_rate_hz: f64,
    samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate_hz: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "sample rate {sample_rate_hz} must be positive"
            )));
        }
        Ok(Self {
            sample_rate_hz,
            samples,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean of the squared samples.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len().max(1) as f64
    }

    /// `# sample_rate_hz=<r>` header, one sample per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 20);
        let _ = writeln!(out, "# sample_rate_hz={}", self.sample_rate_hz);
        for s in &self.samples {
            let _ = writeln!(out, "{s}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rate = None;
        let mut samples = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("sample_rate_hz=") {
                    rate = Some(v.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: idx + 1,
                        message: format!("bad sample rate: {e}"),
                    })?);
                }
                continue;
            }
            samples.push(line.parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad sample `{line}`: {e}"),
            })?);
        }
        let rate = rate.ok_or(Error::Parse {
            line: 1,
            message: "missing `# sample_rate_hz=<r>` header".into(),
        })?;
        Self::new(rate, samples)
    }
}

/// Synthesizes the photodiode signal for `params`. The drift path draws from
/// child stream 0 of `seed`.
pub fn synthesize_drift_trace(params: &TraceParams, seed: u64) -> Result<TimeSeries> {
    let fs = params.sample_rate_hz;
    if !(fs > 0.0 && params.duration_s > 0.0) {
        return Err(Error::invalid("duration and sample rate must be positive"));
    }
    if !(fs > 2.0 * params.mod_freq_hz) {
        return Err(Error::invalid(format!(
            "sample rate {fs} Hz does not exceed twice the modulation frequency {} Hz",
            params.mod_freq_hz
        )));
    }
    if !(0.0..=1.0).contains(&params.visibility) {
        return Err(Error::invalid("visibility outside [0, 1]"));
    }
    params.drift.validate()?;

    let n = (fs * params.duration_s).round() as usize;
    let dt = 1.0 / fs;
    let drift = drift_path(params.drift, n, dt, seed);
    let w = 2.0 * PI * params.mod_freq_hz;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let phase = params.modulation_depth_rad * (w * t).sin() + params.bias_rad + drift[i];
            0.5 * (1.0 + params.visibility * phase.cos())
        })
        .collect();
    TimeSeries::new(fs, samples)
}

fn drift_path(model: DriftModel, n: usize, dt: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 0);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    match model {
        DriftModel::None => vec![0.0; n],
        DriftModel::RandomWalk { sigma_rad_per_sqrt_s } => {
            let step = sigma_rad_per_sqrt_s * dt.sqrt();
            let mut phi = 0.0;
            (0..n)
                .map(|_| {
                    let current = phi;
                    phi += step * unit.sample(&mut rng);
                    current
                })
                .collect()
        }
        DriftModel::MeanReverting {
            rms_rad,
            correlation_time_s,
        } => {
            // exact AR(1) discretization, started in the stationary law
            let a = (-dt / correlation_time_s).exp();
            let kick = rms_rad * (1.0 - a * a).sqrt();
            let mut x = rms_rad * unit.sample(&mut rng);
            (0..n)
                .map(|_| {
                    let current = x;
                    x = a * x + kick * unit.sample(&mut rng);
                    current
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Window {
    Rectangular,
    Hann,
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" | "none" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            _ => Err(Error::invalid(format!("unknown window `{s}`"))),
        }
    }
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }

    /// Window weights, scaled to unit mean square.
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => {
                let raw: Vec<f64> = (0..n)
                    .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                    .collect();
                let rms = (raw.iter().map(|w| w * w).sum::<f64>() / n as f64).sqrt();
                raw.into_iter().map(|w| w / rms).collect()
            }
        }
    }
}

/// One-sided magnitude spectrum.
///
/// Magnitudes are RMS amplitudes per bin, normalized so that for the
/// rectangular window their squares sum to the mean-square of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub window: Window,
}

impl Spectrum {
    pub fn resolution_hz(&self) -> f64 {
        self.frequencies_hz.get(1).copied().unwrap_or(0.0)
    }

    /// `sum |m_k|^2` over `lo < f <= hi`.
    pub fn band_power(&self, (lo, hi): (f64, f64)) -> f64 {
        self.frequencies_hz
            .iter()
            .zip(&self.magnitudes)
            .filter(|(&f, _)| f > lo && f <= hi)
            .map(|(_, m)| m * m)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.magnitudes.iter().map(|m| m * m).sum()
    }

    /// Frequency of the largest non-DC bin.
    pub fn peak_frequency(&self) -> Option<f64> {
        self.frequencies_hz
            .iter()
            .zip(&self.magnitudes)
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&f, _)| f)
    }

    /// `freq_hz,magnitude` rows after a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.magnitudes.len() * 32);
        let _ = writeln!(out, "# window={}", self.window.name());
        out.push_str("freq_hz,magnitude\n");
        for (f, m) in self.frequencies_hz.iter().zip(&self.magnitudes) {
            let _ = writeln!(out, "{f},{m}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut window = Window::Rectangular;
        let mut frequencies_hz = Vec::new();
        let mut magnitudes = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line == "freq_hz,magnitude" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(w) = rest.trim().strip_prefix("window=") {
                    window = w.trim().parse()?;
                }
                continue;
            }
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        line: idx + 1,
                        message: format!("expected `freq_hz,magnitude`, found `{line}`"),
                    })
            };
            let mut parts = line.split(',');
            frequencies_hz.push(parse(parts.next())?);
            magnitudes.push(parse(parts.next())?);
        }
        Ok(Self {
            frequencies_hz,
            magnitudes,
            window,
        })
    }
}

/// Unnormalized two-sided DFT of the windowed trace.
pub fn two_sided_coefficients(ts: &TimeSeries, window: Window) -> Result<Vec<Complex64>> {
    let n = ts.len();
    if n < MIN_SPECTRUM_SAMPLES {
        return Err(Error::invalid(format!(
            "{n} samples; a spectrum needs at least {MIN_SPECTRUM_SAMPLES}"
        )));
    }
    let weights = window.weights(n);
    let mut buf: Vec<Complex64> = ts
        .samples()
        .iter()
        .zip(&weights)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf)
}

pub fn fourier_spectrum(ts: &TimeSeries, window: Window) -> Result<Spectrum> {
    let coeffs = two_sided_coefficients(ts, window)?;
    let n = coeffs.len();
    let nf = n as f64;
    let half = n / 2;
    let df = ts.sample_rate_hz() / nf;
    let mut frequencies_hz = Vec::with_capacity(half + 1);
    let mut magnitudes = Vec::with_capacity(half + 1);
    for (k, c) in coeffs.iter().enumerate().take(half + 1) {
        let paired = k != 0 && !(n % 2 == 0 && k == half);
        let scale = if paired { 2f64.sqrt() } else { 1.0 };
        frequencies_hz.push(k as f64 * df);
        magnitudes.push(scale * c.norm() / nf);
    }
    Ok(Spectrum {
        frequencies_hz,
        magnitudes,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandComparison {
    pub band_hz: (f64, f64),
    pub power_a: f64,
    pub power_b: f64,
    /// `power_a / power_b`.
    pub ratio: f64,
    pub tolerance: f64,
    pub indistinguishable: bool,
}

/// Compares in-band power of two spectra on the same frequency grid.
/// They are indistinguishable when the ratio lies in `[1/tolerance, tolerance]`.
pub fn compare_band_power(a: &Spectrum, b: &Spectrum, band_hz: (f64, f64), tolerance: f64) -> Result<BandComparison> {
    if !(tolerance >= 1.0) {
        return Err(Error::invalid(format!("tolerance {tolerance} must be >= 1")));
    }
    let same_grid = a.frequencies_hz.len() == b.frequencies_hz.len()
        && a
            .frequencies_hz
            .iter()
            .zip(&b.frequencies_hz)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0));
    if !same_grid {
        return Err(Error::shape(
            format!("{} frequency bins", a.frequencies_hz.len()),
            format!("{} bins or different spacing", b.frequencies_hz.len()),
        ));
    }
    let power_a = a.band_power(band_hz);
    let power_b = b.band_power(band_hz);
    let ratio = if power_a == power_b {
        1.0
    } else {
        power_a / power_b
    };
    Ok(BandComparison {
        band_hz,
        power_a,
        power_b,
        ratio,
        tolerance,
        indistinguishable: ratio >= 1.0 / tolerance && ratio <= tolerance,
    })
}

/// Outcome of the back-to-back versus long-span drift comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullTest {
    /// Per-seed low-band ratio between two independently drawn traces with identical parameters.
    pub ratios: Vec<f64>,
    pub indistinguishable: usize,
    /// Ratio of a trace with `control_scale` times the drift excursion to a reference trace.
    pub control_ratio: f64,
    pub control_scale: f64,
}

/// Draws `seeds` pairs of traces sharing `params` and compares their low band,
/// plus one positive control with the drift scaled by `control_scale`.
/// Pair `s` uses children `2s` and `2s + 1` of `seed`; the control uses the
/// next two children.
pub fn drift_null_test(
    params: &TraceParams,
    seeds: usize,
    seed: u64,
    band_hz: (f64, f64),
    tolerance: f64,
    control_scale: f64,
) -> Result<NullTest> {
    use rayon::prelude::*;
    use crate::seed::sub_seed;

    let band = |p: &TraceParams, child: u64| -> Result<Spectrum> {
        fourier_spectrum(&synthesize_drift_trace(p, sub_seed(seed, child))?, Window::Rectangular)
    };
    let ratios: Vec<f64> = (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            let a = band(params, 2 * s)?;
            let b = band(params, 2 * s + 1)?;
            Ok(compare_band_power(&a, &b, band_hz, tolerance)?.ratio)
        })
        .collect::<Result<_>>()?;
    let indistinguishable = ratios
        .iter()
        .filter(|&&r| r >= 1.0 / tolerance && r <= tolerance)
        .count();
    let k = 2 * seeds as u64;
    let control = TraceParams {
        drift: params.drift.scaled(control_scale),
        ..*params
    };
    let control_ratio =
        compare_band_power(&band(&control, k)?, &band(params, k + 1)?, band_hz, tolerance)?.ratio;
    Ok(NullTest {
        ratios,
        indistinguishable,
        control_ratio,
        control_scale,
    })
}
