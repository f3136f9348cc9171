//! Interference fringes: Alice sweeps her phase while Bob holds his basis.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::protocol::{channel_clicks, prepare_qudit, realizations, simulate_gates, ArchitectureConfig, Basis};
use crate::seed::rng_for;
use crate::{Error, Result};

/// Gates per sweep point; 14 ms at the 1 MHz trigger rate.
pub const DEFAULT_GATES_PER_POINT: u64 = 14_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub start_rad: f64,
    pub stop_rad: f64,
    /// Points over one up-and-down ramp.
    pub points: usize,
    pub gates_per_point: u64,
    pub basis: Basis,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            start_rad: 0.0,
            stop_rad: 2.0 * PI,
            points: 65,
            gates_per_point: DEFAULT_GATES_PER_POINT,
            basis: Basis::Mub1,
        }
    }
}

impl SweepSpec {
    /// Alice's phase at each point: a triangular ramp from `start` up to
    /// `stop` and back.
    pub fn phases(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start_rad];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let u = k as f64 / last;
                let tri = 1.0 - (2.0 * u - 1.0).abs();
                self.start_rad + (self.stop_rad - self.start_rad) * tri
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.points == 0 || self.gates_per_point == 0 {
            return Err(Error::invalid("sweep needs at least one point and one gate"));
        }
        if !(self.start_rad.is_finite() && self.stop_rad.is_finite()) {
            return Err(Error::invalid("sweep range must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringePoint {
    pub alice_phase_rad: f64,
    pub counts: Vec<u64>,
    /// Poissonian `sqrt(counts)`.
    pub sigma: Vec<f64>,
}

/// `y = offset + amplitude cos(phi - phase)` fitted to one detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
    pub visibility: f64,
    pub visibility_sigma: f64,
}

impl FringeFit {
    pub fn eval(&self, phi: f64) -> f64 {
        self.offset + self.amplitude * (phi - self.phase_rad).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceSweep {
    pub spec: SweepSpec,
    pub points: Vec<FringePoint>,
    /// Per detector; `None` where no clicks were recorded.
    pub fits: Vec<Option<FringeFit>>,
    /// Per detector, from the noise-free model.
    pub analytic_visibility: Vec<f64>,
    pub no_counts: bool,
}

impl InterferenceSweep {
    /// Phase difference between the fitted fringes of detectors 0 and 1,
    /// wrapped to `[0, pi]`.
    pub fn detector_phase_offset(&self) -> Option<f64> {
        let a = self.fits.first()?.as_ref()?;
        let b = self.fits.get(1)?.as_ref()?;
        let d = (a.phase_rad - b.phase_rad).rem_euclid(2.0 * PI);
        Some(d.min(2.0 * PI - d))
    }
}

/// Weighted linear least squares of `y = a + b cos(phi) + c sin(phi)`.
///
/// Returns `None` when the normal matrix is singular or the offset is not positive.
pub fn fit_fringe(phi: &[f64], y: &[f64], weights: &[f64]) -> Option<FringeFit> {
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for ((&p, &v), &w) in phi.iter().zip(y).zip(weights) {
        let x = Vector3::new(1.0, p.cos(), p.sin());
        normal += w * x * x.transpose();
        rhs += w * v * x;
    }
    let cov = normal.try_inverse()?;
    let beta = cov * rhs;
    let (a, b, c) = (beta[0], beta[1], beta[2]);
    let amplitude = b.hypot(c);
    if !(a > 0.0) {
        return None;
    }
    let visibility = amplitude / a;
    let grad = if amplitude > 0.0 {
        Vector3::new(-visibility / a, b / (a * amplitude), c / (a * amplitude))
    } else {
        Vector3::new(0.0, 0.0, 0.0)
    };
    Some(FringeFit {
        offset: a,
        amplitude,
        phase_rad: c.atan2(b),
        visibility,
        visibility_sigma: (grad.transpose() * cov * grad)[0].max(0.0).sqrt(),
    })
}

/// Inverts the click model: `-ln((1 - f) / (1 - p_dc))` is the detected mean
/// photon number, linear in the optical power.
fn linearize(clicks: u64, gates: u64, p_dc: f64) -> f64 {
    let n = gates as f64;
    let f = (clicks as f64 / n).min(1.0 - 0.5 / n);
    -((1.0 - f) / (1.0 - p_dc)).ln()
}

/// Delta-method variance of the linearized value when the true click
/// probability is `f`, floored at one click.
fn linearized_variance(f: f64, gates: u64) -> f64 {
    let n = gates as f64;
    let f = f.clamp(1.0 / n, 1.0 - 0.5 / n);
    f / (n * (1.0 - f))
}

/// Fits one detector's counts, reweighting from the fitted curve so that
/// downward fluctuations do not pull the fringe low.
fn fit_counts(phi: &[f64], counts: &[u64], gates: u64, p_dc: f64) -> Option<FringeFit> {
    const REWEIGHTS: usize = 4;
    let y: Vec<f64> = counts.iter().map(|&c| linearize(c, gates, p_dc)).collect();
    let mut w: Vec<f64> = counts
        .iter()
        .map(|&c| 1.0 / linearized_variance(c as f64 / gates as f64, gates))
        .collect();
    let mut fit = fit_fringe(phi, &y, &w)?;
    for _ in 0..REWEIGHTS {
        for (wi, &p) in w.iter_mut().zip(phi) {
            let f = 1.0 - (1.0 - p_dc) * (-fit.eval(p).max(0.0)).exp();
            *wi = 1.0 / linearized_variance(f, gates);
        }
        fit = fit_fringe(phi, &y, &w)?;
    }
    Some(fit)
}

/// Noise-free fringe visibility of each detector, in the same linearized
/// domain as the fit.
pub fn analytic_fringe_visibility(cfg: &ArchitectureConfig, basis: Basis) -> Result<Vec<f64>> {
    const GRID: usize = 64;
    let phi: Vec<f64> = (0..GRID).map(|k| 2.0 * PI * k as f64 / GRID as f64).collect();
    let mut curves = vec![Vec::with_capacity(GRID); cfg.dim];
    for &p in &phi {
        let reals = realizations(cfg, &prepare_qudit(2, &[0.0, p])?, &basis.bob_phases())?;
        let mut mean_photons = vec![0.0; cfg.dim];
        for o in &reals {
            for (k, m) in mean_photons.iter_mut().enumerate() {
                let mu: f64 = (0..o.bins()).filter(|&b| o.sift_mask[b]).map(|b| o.mean_photons(k, b)).sum();
                *m += mu * cfg.detectors[k].efficiency() / reals.len() as f64;
            }
        }
        for (k, c) in curves.iter_mut().enumerate() {
            c.push(mean_photons[k]);
        }
    }
    let ones = vec![1.0; GRID];
    Ok(curves
        .iter()
        .map(|y| fit_fringe(&phi, y, &ones).map_or(0.0, |f| f.visibility))
        .collect())
}

/// Counts clicks at each sweep point, then fits a fringe per detector.
///
/// Point `k` draws from child stream `k` of `seed`.
pub fn run_interference_sweep(cfg: &ArchitectureConfig, spec: &SweepSpec, seed: u64) -> Result<InterferenceSweep> {
    spec.validate()?;
    if cfg.dim != 2 {
        return Err(Error::invalid(format!(
            "interference sweep needs dimension 2, got {}",
            cfg.dim
        )));
    }
    let phases = spec.phases();
    let points: Vec<FringePoint> = phases
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            let reals = realizations(cfg, &prepare_qudit(2, &[0.0, phi])?, &spec.basis.bob_phases())?;
            let (probs, detector_of) = channel_clicks(cfg, &reals);
            let counts = simulate_gates(&probs, &detector_of, cfg.dim, spec.gates_per_point, &mut rng_for(seed, k as u64));
            Ok(FringePoint {
                alice_phase_rad: phi,
                sigma: counts.iter().map(|&c| (c as f64).sqrt()).collect(),
                counts,
            })
        })
        .collect::<Result<_>>()?;

    let no_counts = points.iter().all(|p| p.counts.iter().all(|&c| c == 0));
    let fits = (0..cfg.dim)
        .map(|k| {
            if points.iter().all(|p| p.counts[k] == 0) {
                return None;
            }
            let counts: Vec<u64> = points.iter().map(|p| p.counts[k]).collect();
            fit_counts(&phases, &counts, spec.gates_per_point, cfg.detectors[k].dark_count_prob())
        })
        .collect();
    Ok(InterferenceSweep {
        spec: *spec,
        points,
        fits,
        analytic_visibility: analytic_fringe_visibility(cfg, spec.basis)?,
        no_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::fits::{ideal_devices, paper_500m};
    use crate::protocol::Scheme;

    /// Expected counts of a saturating detector on a fringe of visibility `v`.
    fn synthetic_counts(v: f64, mu_eta: f64, gates: u64, phi: &[f64]) -> Vec<u64> {
        use crate::components::{click_probability, DetectorModel};
        let det = DetectorModel::new(1.0, 0.0, 2.5, 1e6).unwrap();
        phi.iter()
            .map(|&p| {
                let mu = mu_eta * 0.5 * (1.0 + v * p.cos());
                (click_probability(mu, &det) * gates as f64).round() as u64
            })
            .collect()
    }

    #[test]
    fn ramp_is_triangular() {
        let s = SweepSpec::default();
        let p = s.phases();
        assert_eq!(p.len(), 65);
        assert_eq!(p[0], 0.0);
        assert!((p[32] - 2.0 * PI).abs() < 1e-12);
        assert!((p[16] - PI).abs() < 1e-12);
        assert_eq!(p[64], 0.0);
        for k in 0..65 {
            assert!((p[k] - p[64 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_exact_sinusoid() {
        let phi: Vec<f64> = (0..40).map(|k| 0.3 + 0.17 * k as f64).collect();
        let y: Vec<f64> = phi.iter().map(|p| 5.0 + 3.0 * (p - 1.1).cos()).collect();
        let f = fit_fringe(&phi, &y, &vec![1.0; 40]).unwrap();
        assert!((f.offset - 5.0).abs() < 1e-12);
        assert!((f.amplitude - 3.0).abs() < 1e-12);
        assert!((f.phase_rad - 1.1).abs() < 1e-12);
        assert!((f.visibility - 0.6).abs() < 1e-12);
        assert!((f.eval(1.1) - 8.0).abs() < 1e-12);
        assert!(fit_fringe(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &[1.0; 3]).is_none());
    }

    #[test]
    fn linearized_fit_undoes_saturation() {
        let phi: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
        let gates = 1_000_000_000;
        let counts = synthetic_counts(0.8, 2.0, gates, &phi);
        assert!((fit_counts(&phi, &counts, gates, 0.0).unwrap().visibility - 0.8).abs() < 1e-6);
    }

    #[test]
    fn ideal_sweep_has_unit_visibility() {
        let cfg = ideal_devices(&paper_500m()).unwrap();
        let s = run_interference_sweep(&cfg, &SweepSpec::default(), 7).unwrap();
        for f in s.fits.iter().flatten() {
            assert!((f.visibility - 1.0).abs() < 1e-3, "{}", f.visibility);
        }
        assert!((s.detector_phase_offset().unwrap() - PI).abs() < 0.05);
        assert_eq!(s.analytic_visibility.len(), 2);
        for v in &s.analytic_visibility {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dark_only_link_reports_no_fringe() {
        let mut cfg = paper_500m();
        cfg.source = crate::components::SourceModel::new(0.0).unwrap();
        let s = run_interference_sweep(&cfg, &SweepSpec { gates_per_point: 1000, ..SweepSpec::default() }, 1).unwrap();
        assert!(s.no_counts);
        assert!(s.fits.iter().all(Option::is_none));
        assert!(run_interference_sweep(&ArchitectureConfig::ideal(Scheme::LongMzi, 3), &SweepSpec::default(), 0).is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = paper_500m();
        let spec = SweepSpec { gates_per_point: 2000, points: 9, ..SweepSpec::default() };
        assert_eq!(run_interference_sweep(&cfg, &spec, 3).unwrap(), run_interference_sweep(&cfg, &spec, 3).unwrap());
    }
}
