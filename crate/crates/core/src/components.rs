//! Device models: photonic lantern, few-mode fiber span, weak coherent source,
//! gated single-photon detector.
//!
//! Defaults mirror the experimental link: graded-index FMF at 0.22 dB/km,
//! lanterns with 6.5 dB insertion loss for the pair and -14.6/-16.2 dB
//! extinction, InGaAs detectors gated at 1 MHz with 2.5 ns gates, 10%
//! efficiency and 2.4e-6 dark counts per gate.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::modes::{max_singular_value, ComplexMatrix, TransferElement};
use crate::seed::rng_for;
use crate::{Error, Result};

/// Decibels to linear power ratio; `-inf` maps to 0.
pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {p} is not a probability in [0, 1]")))
    }
}

fn check_loss(name: &str, db: f64) -> Result<()> {
    if db >= 0.0 && db.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {db} dB must be a finite loss >= 0")))
    }
}

/// Phase of the coherent crosstalk amplitude inside a lantern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrosstalkPhase {
    Fixed(f64),
    /// Uniform in `[0, 2 pi)`, redrawn for every trial (gate).
    RandomPerTrial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanternModel {
    dim: usize,
    insertion_loss_db: f64,
    extinction_db: Vec<f64>,
    crosstalk_phase: CrosstalkPhase,
}

impl LanternModel {
    pub fn new(
        insertion_loss_db: f64,
        extinction_db: Vec<f64>,
        crosstalk_phase: CrosstalkPhase,
    ) -> Result<Self> {
        let dim = extinction_db.len();
        if dim < 2 {
            return Err(Error::invalid(format!("lantern needs >= 2 modes, got {dim}")));
        }
        check_loss("lantern insertion loss", insertion_loss_db)?;
        for (k, &e) in extinction_db.iter().enumerate() {
            if !(e <= 0.0) || e == f64::INFINITY {
                return Err(Error::invalid(format!(
                    "extinction[{k}] = {e} dB must be <= 0"
                )));
            }
        }
        if let CrosstalkPhase::Fixed(theta) = crosstalk_phase {
            if !theta.is_finite() {
                return Err(Error::invalid("crosstalk phase must be finite"));
            }
        }
        Ok(Self {
            dim,
            insertion_loss_db,
            extinction_db,
            crosstalk_phase,
        })
    }

    /// Lossless, crosstalk-free lantern.
    pub fn ideal(dim: usize) -> Self {
        Self {
            dim,
            insertion_loss_db: 0.0,
            extinction_db: vec![f64::NEG_INFINITY; dim],
            crosstalk_phase: CrosstalkPhase::Fixed(0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insertion_loss_db(&self) -> f64 {
        self.insertion_loss_db
    }

    pub fn extinction_db(&self) -> &[f64] {
        &self.extinction_db
    }

    pub fn crosstalk_phase(&self) -> CrosstalkPhase {
        self.crosstalk_phase
    }

    pub fn with_insertion_loss_db(mut self, db: f64) -> Result<Self> {
        check_loss("lantern insertion loss", db)?;
        self.insertion_loss_db = db;
        Ok(self)
    }

    /// Linear crosstalk power fraction per output.
    pub fn crosstalk_fractions(&self) -> Vec<f64> {
        self.extinction_db.iter().map(|&e| db_to_power(e)).collect()
    }

    pub fn has_crosstalk(&self) -> bool {
        self.extinction_db.iter().any(|&e| e > f64::NEG_INFINITY)
    }

    /// Transfer matrix with crosstalk phase `theta`.
    ///
    /// Row `k` carries `sqrt(t (1 - eps_k))` on the diagonal and splits
    /// `t eps_k` evenly over the other inputs. Entries above the diagonal take
    /// `e^{i theta}`, those below `-e^{-i theta}`; for two modes with equal
    /// extinctions this makes the lossless part exactly unitary. Otherwise the
    /// matrix can have a singular value above one, which is removed by a
    /// uniform rescale so the device stays passive.
    pub fn transfer_with_phase(&self, theta: f64) -> TransferElement {
        let d = self.dim;
        let t = db_to_power(-self.insertion_loss_db);
        let eps = self.crosstalk_fractions();
        let upper = Complex64::from_polar(1.0, theta);
        let lower = -upper.conj();
        let mut m = ComplexMatrix::from_fn(d, d, |k, j| {
            if k == j {
                Complex64::new((t * (1.0 - eps[k])).sqrt(), 0.0)
            } else {
                let a = (t * eps[k] / (d - 1) as f64).sqrt();
                if j > k {
                    upper * a
                } else {
                    lower * a
                }
            }
        });
        if self.has_crosstalk() {
            let sigma = max_singular_value(&m);
            if sigma > 1.0 {
                m /= Complex64::new(sigma, 0.0);
            }
        }
        TransferElement::new_unchecked(m, format!("lantern({} dB)", self.insertion_loss_db))
    }
}

/// Transfer element of a lantern for one trial.
///
/// A fixed-phase lantern ignores the seed. A random-phase lantern draws its
/// phase from `seed`, or uses phase 0 as a reference realization without one.
pub fn lantern_transfer(model: &LanternModel, trial_rng_seed: Option<u64>) -> TransferElement {
    let theta = match (model.crosstalk_phase, trial_rng_seed) {
        (CrosstalkPhase::Fixed(theta), _) => theta,
        (CrosstalkPhase::RandomPerTrial, Some(seed)) => rng_for(seed, 0).random_range(0.0..2.0 * PI),
        (CrosstalkPhase::RandomPerTrial, None) => 0.0,
    };
    model.transfer_with_phase(theta)
}

/// Common (mode-independent) phase as a function of time in seconds.
pub type PhaseDrift = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A few-mode fiber span. All guided modes share one core, so the span acts
/// as the same scalar on every mode.
#[derive(Clone)]
pub struct FiberSpan {
    length_km: f64,
    loss_coeff_db_per_km: f64,
    excess_loss_db: f64,
    common_phase_drift: Option<PhaseDrift>,
}

impl fmt::Debug for FiberSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiberSpan")
            .field("length_km", &self.length_km)
            .field("loss_coeff_db_per_km", &self.loss_coeff_db_per_km)
            .field("excess_loss_db", &self.excess_loss_db)
            .field("common_phase_drift", &self.common_phase_drift.is_some())
            .finish()
    }
}

impl PartialEq for FiberSpan {
    fn eq(&self, other: &Self) -> bool {
        self.length_km == other.length_km
            && self.loss_coeff_db_per_km == other.loss_coeff_db_per_km
            && self.excess_loss_db == other.excess_loss_db
            && self.common_phase_drift.is_some() == other.common_phase_drift.is_some()
    }
}

impl FiberSpan {
    pub fn new(length_km: f64, loss_coeff_db_per_km: f64, excess_loss_db: f64) -> Result<Self> {
        check_loss("fiber length", length_km)?;
        check_loss("fiber loss coefficient", loss_coeff_db_per_km)?;
        check_loss("fiber excess loss", excess_loss_db)?;
        Ok(Self {
            length_km,
            loss_coeff_db_per_km,
            excess_loss_db,
            common_phase_drift: None,
        })
    }

    pub fn lossless() -> Self {
        Self {
            length_km: 0.0,
            loss_coeff_db_per_km: 0.0,
            excess_loss_db: 0.0,
            common_phase_drift: None,
        }
    }

    pub fn with_drift(mut self, drift: PhaseDrift) -> Self {
        self.common_phase_drift = Some(drift);
        self
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn loss_coeff_db_per_km(&self) -> f64 {
        self.loss_coeff_db_per_km
    }

    pub fn excess_loss_db(&self) -> f64 {
        self.excess_loss_db
    }

    pub fn total_loss_db(&self) -> f64 {
        self.length_km * self.loss_coeff_db_per_km + self.excess_loss_db
    }

    pub fn power_transmission(&self) -> f64 {
        db_to_power(-self.total_loss_db())
    }

    pub fn phase_at(&self, time_s: f64) -> f64 {
        self.common_phase_drift.as_ref().map_or(0.0, |f| f(time_s))
    }
}

/// `a e^{i phi(t)} I` over `dim` modes.
pub fn fiber_transfer(span: &FiberSpan, dim: usize, time_s: f64) -> TransferElement {
    let a = span.power_transmission().sqrt();
    let factor = Complex64::from_polar(a, span.phase_at(time_s));
    TransferElement::new_unchecked(
        ComplexMatrix::identity(dim, dim) * factor,
        format!("fiber({:.3} dB)", span.total_loss_db()),
    )
}

/// Weak coherent source: Poissonian photon number with mean `mu` per gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    mean_photon_number: f64,
}

impl SourceModel {
    pub fn new(mean_photon_number: f64) -> Result<Self> {
        if !(mean_photon_number >= 0.0 && mean_photon_number.is_finite()) {
            return Err(Error::invalid(format!(
                "mean photon number {mean_photon_number} must be >= 0"
            )));
        }
        Ok(Self { mean_photon_number })
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.mean_photon_number
    }
}

/// Gated threshold detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    efficiency: f64,
    dark_count_prob: f64,
    gate_width_ns: f64,
    trigger_rate_hz: f64,
}

impl DetectorModel {
    pub fn new(
        efficiency: f64,
        dark_count_prob: f64,
        gate_width_ns: f64,
        trigger_rate_hz: f64,
    ) -> Result<Self> {
        check_probability("detector efficiency", efficiency)?;
        check_probability("dark count probability", dark_count_prob)?;
        for (name, v) in [("gate width", gate_width_ns), ("trigger rate", trigger_rate_hz)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be positive")));
            }
        }
        Ok(Self {
            efficiency,
            dark_count_prob,
            gate_width_ns,
            trigger_rate_hz,
        })
    }

    /// InGaAs gated module: 10% efficiency, 2.4e-6 darks per 2.5 ns gate, 1 MHz.
    pub fn ingaas_gated() -> Self {
        Self {
            efficiency: 0.10,
            dark_count_prob: 2.4e-6,
            gate_width_ns: 2.5,
            trigger_rate_hz: 1.0e6,
        }
    }

    /// Unit efficiency, no dark counts.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_count_prob: 0.0,
            gate_width_ns: 2.5,
            trigger_rate_hz: 1.0e6,
        }
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn dark_count_prob(&self) -> f64 {
        self.dark_count_prob
    }

    pub fn gate_width_ns(&self) -> f64 {
        self.gate_width_ns
    }

    pub fn trigger_rate_hz(&self) -> f64 {
        self.trigger_rate_hz
    }

    pub fn with_dark_count_prob(mut self, p: f64) -> Result<Self> {
        check_probability("dark count probability", p)?;
        self.dark_count_prob = p;
        Ok(self)
    }
}

/// `1 - (1 - p_dc) exp(-mu eta)`.
pub fn click_probability(mu_at_detector: f64, det: &DetectorModel) -> f64 {
    let signal = -(-mu_at_detector.max(0.0) * det.efficiency).exp_m1();
    det.dark_count_prob + (1.0 - det.dark_count_prob) * signal
}

/// Bernoulli click counts over `n_gates` for each detector.
///
/// Detector `k` draws from child stream `k` of `seed`.
pub fn sample_clicks(per_detector_mu: &[f64], det: &DetectorModel, n_gates: u64, seed: u64) -> Vec<u64> {
    per_detector_mu
        .iter()
        .enumerate()
        .map(|(k, &mu)| {
            let p = click_probability(mu, det);
            let mut rng = rng_for(seed, k as u64);
            (0..n_gates).filter(|_| rng.random_bool(p)).count() as u64
        })
        .collect()
}
