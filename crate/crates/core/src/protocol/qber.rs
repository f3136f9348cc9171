use serde::Serialize;

use super::link::{detection_probabilities, intrinsic_sift_transmission, matched_detector, ArchitectureConfig};
use super::states::{dft_state_phases, prepare_bb84, prepare_qudit, Bb84Label};
use crate::components::db_to_power;
use crate::modes::ModeState;
use crate::Result;

/// Error budget of one link configuration at one added loss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QberReport {
    pub added_loss_db: f64,
    /// Click probability per gate per detector (sifted bins, signal and darks),
    /// averaged over the transmitted states.
    pub click_probabilities: Vec<f64>,
    /// Fraction of gates kept after basis reconciliation and temporal post-selection.
    pub sifting_factor: f64,
    /// Matched-basis optical error from finite visibility and crosstalk.
    pub optical_error: f64,
    /// Sifted signal click probability per gate.
    pub signal_per_gate: f64,
    /// Summed dark-click probability over sifted detectors and bins.
    pub dark_per_gate: f64,
    pub qber: f64,
    /// Percentage points of the QBER contributed by dark counts.
    pub dark_share_points: f64,
}

/// Transmitted states with Bob's matching setting and the port that should click.
pub(crate) fn signal_states(cfg: &ArchitectureConfig) -> Vec<(ModeState, Vec<f64>, usize)> {
    if cfg.dim == 2 {
        Bb84Label::ALL
            .iter()
            .map(|&l| {
                let expected = matched_detector(cfg.scheme, 2, l.detector());
                (prepare_bb84(l), l.basis().bob_phases().to_vec(), expected)
            })
            .collect()
    } else {
        (0..cfg.dim)
            .map(|j| {
                let s = prepare_qudit(cfg.dim, &dft_state_phases(cfg.dim, j)).expect("valid phases");
                (s, vec![0.0; cfg.dim], matched_detector(cfg.scheme, cfg.dim, j))
            })
            .collect()
    }
}

/// QBER with the signal attenuated by `added_loss_db`.
///
/// `QBER = (e_opt S + w P) / (S + P)` with `S` the sifted signal click
/// probability, `P` the summed dark-click probability of the sifted
/// detector/bin channels and `w = (d-1)/d` (one half for qubits). Both bases
/// are pooled.
pub fn qber_from_link(cfg: &ArchitectureConfig, added_loss_db: f64) -> Result<QberReport> {
    let alpha = db_to_power(-added_loss_db.max(0.0));
    let states = signal_states(cfg);
    let n_states = states.len() as f64;
    let mut right_power = 0.0;
    let mut wrong_power = 0.0;
    let mut signal = 0.0;
    let mut clicks = vec![0.0; cfg.dim];
    let mut dark = 0.0;
    for (state, bob, expected) in &states {
        let o = detection_probabilities(cfg, state, bob, None)?;
        dark = 0.0;
        for (k, det) in cfg.detectors.iter().enumerate() {
            for (b, &keep) in o.sift_mask.iter().enumerate() {
                if !keep {
                    continue;
                }
                let p = o.power[k][b];
                if k == *expected {
                    right_power += p;
                } else {
                    wrong_power += p;
                }
                let mu = o.mean_photon_number * alpha * p;
                let s = -(-mu * det.efficiency()).exp_m1();
                signal += s;
                clicks[k] += det.dark_count_prob() + (1.0 - det.dark_count_prob()) * s;
                dark += det.dark_count_prob();
            }
        }
    }
    signal /= n_states;
    clicks.iter_mut().for_each(|c| *c /= n_states);
    let optical_error = if right_power + wrong_power > 0.0 {
        wrong_power / (right_power + wrong_power)
    } else {
        0.0
    };
    let dark_weight = (cfg.dim - 1) as f64 / cfg.dim as f64;
    let denom = signal + dark;
    let (qber, dark_share) = if denom > 0.0 {
        (
            (optical_error * signal + dark_weight * dark) / denom,
            dark_weight * dark / denom,
        )
    } else {
        (optical_error, 0.0)
    };
    Ok(QberReport {
        added_loss_db,
        click_probabilities: clicks,
        sifting_factor: 0.5 * intrinsic_sift_transmission(cfg.scheme, cfg.dim),
        optical_error,
        signal_per_gate: signal,
        dark_per_gate: dark,
        qber,
        dark_share_points: 100.0 * dark_share,
    })
}

/// `h2(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Asymptotic BB84 secret fraction `max(0, 1 - 2 h2(q))`.
pub fn key_fraction(qber: f64) -> f64 {
    (1.0 - 2.0 * binary_entropy(qber.clamp(0.0, 0.5))).max(0.0)
}

/// Which lantern losses are charged to the few-mode-fiber detection stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainAccounting {
    /// Bob's demultiplexing lantern only.
    #[default]
    BobLantern,
    /// Both lanterns.
    BothLanterns,
}

/// Fractional detection gain of the lantern link over time-bin post-selection.
///
/// The time-bin detection stage loses `10 log10(d)` dB to sifting; the lantern
/// link loses one lantern insertion loss.
pub fn detection_gain_vs_timebin(d: usize, lantern_loss_db: f64) -> f64 {
    detection_gain_with(d, lantern_loss_db, GainAccounting::BobLantern)
}

pub fn detection_gain_with(d: usize, lantern_loss_db: f64, accounting: GainAccounting) -> f64 {
    let lanterns = match accounting {
        GainAccounting::BobLantern => 1.0,
        GainAccounting::BothLanterns => 2.0,
    };
    let sift_db = 10.0 * (d as f64).log10();
    db_to_power(sift_db - lanterns * lantern_loss_db) - 1.0
}
