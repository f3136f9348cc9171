use serde::Serialize;

use super::fits::{bisect, FMF_LOSS_DB_PER_KM, QBER_LIMIT};
use crate::components::db_to_power;
use crate::protocol::{
    analytic_probability_matrix, detection_gain_with, intrinsic_sift_transmission, key_fraction,
    probability_matrix, qber_from_link, ArchitectureConfig, GainAccounting, ProbabilityMatrix, Scheme,
};
use crate::{Error, Result};

/// 100 ms of gates per (state, basis) cell at 1 MHz.
pub const DEFAULT_GATES_PER_CELL: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixExperiment {
    pub matrix: ProbabilityMatrix,
    pub analytic: [[f64; 4]; 4],
    pub mean_diagonal: f64,
    pub diagonal_sd: f64,
    /// Fringe visibility implied by the mean diagonal, `2 p - 1`.
    pub implied_visibility: f64,
}

pub fn run_matrix_experiment(cfg: &ArchitectureConfig, gates_per_cell: u64, seed: u64) -> Result<MatrixExperiment> {
    let matrix = probability_matrix(cfg, gates_per_cell, seed)?;
    let mean_diagonal = matrix.mean_diagonal();
    Ok(MatrixExperiment {
        analytic: analytic_probability_matrix(cfg)?,
        diagonal_sd: matrix.diagonal_sd(),
        implied_visibility: 2.0 * mean_diagonal - 1.0,
        mean_diagonal,
        matrix,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossSweepSpec {
    pub max_db: f64,
    pub step_db: f64,
    pub qber_limit: f64,
}

impl Default for LossSweepSpec {
    fn default() -> Self {
        Self {
            max_db: 40.0,
            step_db: 0.25,
            qber_limit: QBER_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRow {
    pub added_loss_db: f64,
    /// Few-mode fiber length with the same loss.
    pub equivalent_km: f64,
    pub qber: f64,
    pub key_fraction: f64,
    pub dark_share_points: f64,
    pub signal_per_gate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossSweep {
    pub spec: LossSweepSpec,
    pub rows: Vec<LossRow>,
    /// Added loss at which QBER reaches the limit; `None` if it stays below
    /// the limit over the whole range.
    pub threshold_db: Option<f64>,
    pub threshold_km: Option<f64>,
}

pub fn equivalent_fmf_km(loss_db: f64) -> f64 {
    loss_db / FMF_LOSS_DB_PER_KM
}

/// Added loss at which QBER first reaches `qber_limit`, searched over
/// `[0, max_db]`. Zero if the link starts at or above the limit.
pub fn loss_threshold(cfg: &ArchitectureConfig, qber_limit: f64, max_db: f64) -> Result<Option<f64>> {
    let q0 = qber_from_link(cfg, 0.0)?.qber;
    if q0 >= qber_limit {
        return Ok(Some(0.0));
    }
    let f = |db: f64| qber_from_link(cfg, db).map_or(f64::NAN, |r| r.qber - qber_limit);
    Ok(bisect(f, 0.0, max_db))
}

pub fn run_loss_sweep(cfg: &ArchitectureConfig, spec: &LossSweepSpec) -> Result<LossSweep> {
    if !(spec.max_db >= 0.0 && spec.step_db > 0.0 && spec.max_db.is_finite()) {
        return Err(Error::invalid("loss sweep needs max_db >= 0 and step_db > 0"));
    }
    let steps = (spec.max_db / spec.step_db + 1e-9).floor() as usize;
    let rows = (0..=steps)
        .map(|k| {
            let db = k as f64 * spec.step_db;
            let r = qber_from_link(cfg, db)?;
            Ok(LossRow {
                added_loss_db: db,
                equivalent_km: equivalent_fmf_km(db),
                qber: r.qber,
                key_fraction: key_fraction(r.qber),
                dark_share_points: r.dark_share_points,
                signal_per_gate: r.signal_per_gate,
            })
        })
        .collect::<Result<_>>()?;
    let threshold_db = loss_threshold(cfg, spec.qber_limit, spec.max_db)?;
    Ok(LossSweep {
        spec: *spec,
        rows,
        threshold_db,
        threshold_km: threshold_db.map(equivalent_fmf_km),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionRow {
    pub dimension: usize,
    /// Fraction of time-bin detections surviving central-bin post-selection.
    pub time_bin_sift: f64,
    /// Power transmission of the charged lantern losses.
    pub lantern_transmission: f64,
    pub detection_gain: f64,
}

pub fn run_dimension_table(d_max: usize, lantern_loss_db: f64, accounting: GainAccounting) -> Result<Vec<DimensionRow>> {
    if d_max < 2 {
        return Err(Error::invalid(format!("largest dimension {d_max} < 2")));
    }
    if !(lantern_loss_db >= 0.0 && lantern_loss_db.is_finite()) {
        return Err(Error::invalid(format!("lantern loss {lantern_loss_db} dB must be >= 0")));
    }
    let lanterns = match accounting {
        GainAccounting::BobLantern => 1.0,
        GainAccounting::BothLanterns => 2.0,
    };
    Ok((2..=d_max)
        .map(|d| DimensionRow {
            dimension: d,
            time_bin_sift: intrinsic_sift_transmission(Scheme::TimeBin, d),
            lantern_transmission: db_to_power(-lanterns * lantern_loss_db),
            detection_gain: detection_gain_with(d, lantern_loss_db, accounting),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::fits::{fit_qber11, paper_500m, THRESHOLD_DB};

    #[test]
    fn threshold_of_the_fitted_link() {
        let cfg = fit_qber11();
        let t = loss_threshold(&cfg, QBER_LIMIT, 40.0).unwrap().unwrap();
        assert!((t - THRESHOLD_DB).abs() < 1e-9);
        assert!((equivalent_fmf_km(t) - 17.5).abs() < 0.01);
    }

    #[test]
    fn sweep_rows_and_unreachable_limit() {
        let cfg = paper_500m();
        let s = run_loss_sweep(&cfg, &LossSweepSpec { max_db: 5.0, step_db: 0.5, ..Default::default() }).unwrap();
        assert_eq!(s.rows.len(), 11);
        assert_eq!(s.rows[10].added_loss_db, 5.0);
        assert!(s.threshold_db.is_none());
        assert!(s.rows.windows(2).all(|w| w[1].qber >= w[0].qber));
        assert!(run_loss_sweep(&cfg, &LossSweepSpec { step_db: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn link_above_limit_has_zero_threshold() {
        let cfg = ArchitectureConfig { visibility: 0.5, ..paper_500m() };
        assert_eq!(loss_threshold(&cfg, QBER_LIMIT, 10.0).unwrap(), Some(0.0));
    }

    #[test]
    fn dimension_table() {
        let rows = run_dimension_table(4, 0.7, GainAccounting::BobLantern).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].dimension, 2);
        assert_eq!(rows[0].time_bin_sift, 0.5);
        assert!((rows[0].detection_gain - 0.702).abs() < 1e-3);
        assert!((rows[2].detection_gain - 2.40).abs() < 0.01);
        assert!(run_dimension_table(1, 0.7, GainAccounting::BobLantern).is_err());
    }

    #[test]
    fn matrix_experiment_summary() {
        let m = run_matrix_experiment(&paper_500m(), 20_000, 2).unwrap();
        assert!((m.implied_visibility - (2.0 * m.mean_diagonal - 1.0)).abs() < 1e-15);
        assert!((m.mean_diagonal - 0.951).abs() < 0.02);
    }
}
