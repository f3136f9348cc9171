use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::link::{realizations, ArchitectureConfig, DetectionOutcome};
use super::states::{prepare_bb84, Basis, Bb84Label};
use crate::components::click_probability;
use crate::seed::rng_for;
use crate::{Error, Result};

/// Below this many expected clicks per measured (state, basis) pair the
/// estimate is flagged as unresolved.
pub const MIN_EXPECTED_CLICKS: f64 = 100.0;

/// Monte Carlo estimate of `P(projected i | sent j)` for the four BB84 states.
///
/// Rows are sent states and columns projected states, both in
/// [`Bb84Label::ALL`] order. Each row is normalized within each measurement
/// basis, so a row sums to 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityMatrix {
    pub probabilities: [[f64; 4]; 4],
    /// Poissonian standard error of each cell.
    pub sigma: [[f64; 4]; 4],
    pub counts: [[u64; 4]; 4],
    pub gates_per_cell: u64,
    pub low_statistics: bool,
}

impl ProbabilityMatrix {
    pub fn diagonal(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.probabilities[i][i])
    }

    pub fn mean_diagonal(&self) -> f64 {
        self.diagonal().iter().sum::<f64>() / 4.0
    }

    /// Sample standard deviation of the four diagonal cells.
    pub fn diagonal_sd(&self) -> f64 {
        let m = self.mean_diagonal();
        (self.diagonal().iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0).sqrt()
    }

    /// Cells where the projection basis differs from the preparation basis.
    pub fn cross_basis_cells(&self) -> Vec<f64> {
        cells_where(&self.probabilities, |sent, proj| sent.basis() != proj.basis())
    }

    /// Same basis, different state.
    pub fn matched_off_diagonal(&self) -> Vec<f64> {
        cells_where(&self.probabilities, |sent, proj| {
            sent.basis() == proj.basis() && sent != proj
        })
    }
}

fn cells_where(m: &[[f64; 4]; 4], keep: impl Fn(Bb84Label, Bb84Label) -> bool) -> Vec<f64> {
    let mut out = Vec::new();
    for sent in Bb84Label::ALL {
        for proj in Bb84Label::ALL {
            if keep(sent, proj) {
                out.push(m[sent.index()][proj.index()]);
            }
        }
    }
    out
}

/// Click probability per sifted channel, for each crosstalk realization, and
/// the detector each channel belongs to.
pub(crate) fn channel_clicks(cfg: &ArchitectureConfig, reals: &[DetectionOutcome]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let channels = reals[0].channels();
    let probs = reals
        .iter()
        .map(|o| {
            channels
                .iter()
                .map(|c| click_probability(o.mean_photons(c.detector, c.bin), &cfg.detectors[c.detector]))
                .collect()
        })
        .collect();
    (probs, channels.iter().map(|c| c.detector).collect())
}

/// Click counts per detector over `n_gates`. Each gate picks one crosstalk
/// realization uniformly, then every channel clicks independently.
pub(crate) fn simulate_gates(
    probs: &[Vec<f64>],
    detector_of: &[usize],
    detectors: usize,
    n_gates: u64,
    rng: &mut impl Rng,
) -> Vec<u64> {
    let mut counts = vec![0u64; detectors];
    for _ in 0..n_gates {
        let row = if probs.len() > 1 {
            &probs[rng.random_range(0..probs.len())]
        } else {
            &probs[0]
        };
        for (&p, &k) in row.iter().zip(detector_of) {
            if rng.random_bool(p) {
                counts[k] += 1;
            }
        }
    }
    counts
}

fn measurement_runs() -> Vec<(Bb84Label, Basis)> {
    Bb84Label::ALL
        .iter()
        .flat_map(|&l| Basis::BOTH.iter().map(move |&b| (l, b)))
        .collect()
}

fn check_qubit(cfg: &ArchitectureConfig) -> Result<()> {
    if cfg.dim != 2 {
        return Err(Error::invalid(format!(
            "BB84 probability matrix needs dimension 2, got {}",
            cfg.dim
        )));
    }
    Ok(())
}

/// Expected-value counterpart of [`probability_matrix`].
pub fn analytic_probability_matrix(cfg: &ArchitectureConfig) -> Result<[[f64; 4]; 4]> {
    check_qubit(cfg)?;
    let mut m = [[0.0; 4]; 4];
    for (sent, basis) in measurement_runs() {
        let reals = realizations(cfg, &prepare_bb84(sent), &basis.bob_phases())?;
        let (probs, detector_of) = channel_clicks(cfg, &reals);
        let mut expected = [0.0; 2];
        for row in &probs {
            for (p, &k) in row.iter().zip(&detector_of) {
                expected[k] += p / probs.len() as f64;
            }
        }
        let total = expected[0] + expected[1];
        for k in 0..2 {
            let proj = Bb84Label::projected_by(basis, k);
            m[sent.index()][proj.index()] = if total > 0.0 { expected[k] / total } else { 0.0 };
        }
    }
    Ok(m)
}

/// Gate-by-gate simulation of every (sent state, Bob basis) pair.
///
/// Pair `r` (state-major, basis-minor) draws from child stream `r` of `seed`,
/// so the result does not depend on how the pairs are scheduled.
pub fn probability_matrix(cfg: &ArchitectureConfig, n_gates_per_cell: u64, seed: u64) -> Result<ProbabilityMatrix> {
    check_qubit(cfg)?;
    if n_gates_per_cell == 0 {
        return Err(Error::invalid("need at least one gate per cell"));
    }
    let runs = measurement_runs();
    let results: Vec<([u64; 2], f64)> = runs
        .par_iter()
        .enumerate()
        .map(|(r, &(sent, basis))| {
            let reals = realizations(cfg, &prepare_bb84(sent), &basis.bob_phases())?;
            let (probs, detector_of) = channel_clicks(cfg, &reals);
            let expected: f64 = probs.iter().flatten().sum::<f64>() / probs.len() as f64
                * n_gates_per_cell as f64;
            let c = simulate_gates(&probs, &detector_of, 2, n_gates_per_cell, &mut rng_for(seed, r as u64));
            Ok(([c[0], c[1]], expected))
        })
        .collect::<Result<_>>()?;

    let mut probabilities = [[0.0; 4]; 4];
    let mut sigma = [[0.0; 4]; 4];
    let mut counts = [[0u64; 4]; 4];
    let mut low_statistics = false;
    for (&(sent, basis), &(c, expected)) in runs.iter().zip(&results) {
        low_statistics |= expected < MIN_EXPECTED_CLICKS;
        let total = (c[0] + c[1]) as f64;
        for k in 0..2 {
            let proj = Bb84Label::projected_by(basis, k).index();
            let (p, s) = if total > 0.0 {
                let p = c[k] as f64 / total;
                (p, (p * (1.0 - p) / total).sqrt())
            } else {
                (0.0, 0.0)
            };
            probabilities[sent.index()][proj] = p;
            sigma[sent.index()][proj] = s;
            counts[sent.index()][proj] = c[k];
        }
    }
    Ok(ProbabilityMatrix {
        probabilities,
        sigma,
        counts,
        gates_per_cell: n_gates_per_cell,
        low_statistics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Scheme;

    #[test]
    fn ideal_matrix() {
        let cfg = ArchitectureConfig::ideal(Scheme::FmfLantern, 2);
        let a = analytic_probability_matrix(&cfg).unwrap();
        for sent in Bb84Label::ALL {
            for proj in Bb84Label::ALL {
                let expected = if sent.basis() != proj.basis() {
                    0.5
                } else if sent == proj {
                    1.0
                } else {
                    0.0
                };
                assert!((a[sent.index()][proj.index()] - expected).abs() < 1e-12);
            }
        }
        let m = probability_matrix(&cfg, 4000, 3).unwrap();
        assert_eq!(m.diagonal(), [1.0; 4]);
        assert!(m.matched_off_diagonal().iter().all(|&p| p == 0.0));
        for p in m.cross_basis_cells() {
            // 4000 clicks split binomially
            assert!((p - 0.5).abs() < 5.0 * (0.25f64 / 4000.0).sqrt());
        }
        assert!(!m.low_statistics);
    }

    #[test]
    fn rows_sum_to_one_per_basis() {
        let cfg = ArchitectureConfig {
            visibility: 0.8,
            ..ArchitectureConfig::ideal(Scheme::TimeBin, 2)
        };
        let m = probability_matrix(&cfg, 2000, 1).unwrap();
        for row in m.probabilities {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
            assert!((row[2] + row[3] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_flags_low_statistics() {
        let mut cfg = ArchitectureConfig::ideal(Scheme::FmfLantern, 2);
        cfg.source = crate::components::SourceModel::new(1e-3).unwrap();
        let a = probability_matrix(&cfg, 1000, 9).unwrap();
        assert!(a.low_statistics);
        assert_eq!(a, probability_matrix(&cfg, 1000, 9).unwrap());
        assert!(probability_matrix(&ArchitectureConfig::ideal(Scheme::FmfLantern, 3), 10, 0).is_err());
    }
}
