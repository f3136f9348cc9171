use std::f64::consts::PI;

use serde::Serialize;

use crate::modes::{ModeState, TransferElement};
use crate::{Error, Result};

/// Measurement basis. `Mub1` is Bob's phase 0, `Mub2` is pi/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Mub1,
    Mub2,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Mub1, Basis::Mub2];

    pub fn bob_phase(self) -> f64 {
        match self {
            Basis::Mub1 => 0.0,
            Basis::Mub2 => PI / 2.0,
        }
    }

    /// Bob's phase bank over (LP11a, LP11b).
    pub fn bob_phases(self) -> [f64; 2] {
        [0.0, self.bob_phase()]
    }
}

/// The four BB84 states as LP11 superpositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Bb84Label {
    LpPlus,
    LpMinus,
    OamPlus,
    OamMinus,
}

impl Bb84Label {
    pub const ALL: [Bb84Label; 4] = [
        Bb84Label::LpPlus,
        Bb84Label::LpMinus,
        Bb84Label::OamPlus,
        Bb84Label::OamMinus,
    ];

    pub fn basis(self) -> Basis {
        match self {
            Bb84Label::LpPlus | Bb84Label::LpMinus => Basis::Mub1,
            Bb84Label::OamPlus | Bb84Label::OamMinus => Basis::Mub2,
        }
    }

    pub fn alice_phase(self) -> f64 {
        match self {
            Bb84Label::LpPlus => 0.0,
            Bb84Label::LpMinus => PI,
            Bb84Label::OamPlus => PI / 2.0,
            Bb84Label::OamMinus => 3.0 * PI / 2.0,
        }
    }

    /// Output port that clicks for this state when Bob measures in its basis.
    pub fn detector(self) -> usize {
        match self {
            Bb84Label::LpPlus | Bb84Label::OamPlus => 0,
            Bb84Label::LpMinus | Bb84Label::OamMinus => 1,
        }
    }

    /// Index in [`Bb84Label::ALL`], also the row/column order of probability matrices.
    pub fn index(self) -> usize {
        self as usize
    }

    /// The state Bob's port `detector` projects onto in `basis`.
    pub fn projected_by(basis: Basis, detector: usize) -> Bb84Label {
        match (basis, detector) {
            (Basis::Mub1, 0) => Bb84Label::LpPlus,
            (Basis::Mub1, _) => Bb84Label::LpMinus,
            (Basis::Mub2, 0) => Bb84Label::OamPlus,
            (Basis::Mub2, _) => Bb84Label::OamMinus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bb84Label::LpPlus => "LP+",
            Bb84Label::LpMinus => "LP-",
            Bb84Label::OamPlus => "OAM+",
            Bb84Label::OamMinus => "OAM-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bb84State {
    pub label: Bb84Label,
    pub basis: Basis,
    pub alice_phase: f64,
}

impl From<Bb84Label> for Bb84State {
    fn from(label: Bb84Label) -> Self {
        Self {
            label,
            basis: label.basis(),
            alice_phase: label.alice_phase(),
        }
    }
}

/// `(1/sqrt 2)(|LP11a> + e^{i phi_A} |LP11b>)`.
pub fn prepare_bb84(label: Bb84Label) -> ModeState {
    ModeState::equal_superposition(&[0.0, label.alice_phase()])
        .expect("two-mode superposition is always valid")
}

/// `(1/sqrt d) sum_n e^{i phi_n} |n>`.
pub fn prepare_qudit(d: usize, phases: &[f64]) -> Result<ModeState> {
    if d < 2 {
        return Err(Error::invalid(format!("qudit dimension {d} < 2")));
    }
    if phases.len() != d {
        return Err(Error::shape(format!("{d} phases"), phases.len()));
    }
    ModeState::equal_superposition(phases)
}

/// Phases `2 pi j n / d` of the `j`-th Fourier-basis state.
pub fn dft_state_phases(d: usize, j: usize) -> Vec<f64> {
    (0..d)
        .map(|n| 2.0 * PI * ((j * n) % d) as f64 / d as f64)
        .collect()
}

/// Alice's station as one element acting on the source mode `|0>`.
///
/// The splitter (50:50 coupler for `d = 2`, DFT multiport above) is followed by
/// the phase bank; each modulator also cancels the splitter's own output
/// phase, so the source photon leaves as `prepare_qudit(d, phases)`.
pub fn alice_preparation(d: usize, phases: &[f64]) -> Result<TransferElement> {
    if phases.len() != d {
        return Err(Error::shape(format!("{d} phases"), phases.len()));
    }
    let splitter = super::link::splitter(d)?;
    let corrected: Vec<f64> = phases
        .iter()
        .enumerate()
        .map(|(n, &p)| p - splitter.matrix()[(n, 0)].arg())
        .collect();
    TransferElement::compose(&[splitter, TransferElement::phase_bank(&corrected)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn bb84_coefficients() {
        let lp = prepare_bb84(Bb84Label::LpPlus);
        assert!((lp.amplitudes()[1] - Complex64::new(S, 0.0)).norm() < 1e-15);
        let oam = prepare_bb84(Bb84Label::OamPlus);
        assert!((oam.amplitudes()[1] - Complex64::new(0.0, S)).norm() < 1e-15);
        let lpm = prepare_bb84(Bb84Label::LpMinus);
        assert!(lp.overlap(&lpm).unwrap() < 1e-30);
        assert!((lp.overlap(&oam).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mub_structure() {
        for a in Bb84Label::ALL {
            for b in Bb84Label::ALL {
                let o = prepare_bb84(a).overlap(&prepare_bb84(b)).unwrap();
                let expected = if a.basis() != b.basis() {
                    0.5
                } else if a == b {
                    1.0
                } else {
                    0.0
                };
                assert!((o - expected).abs() < 1e-12, "{a:?} {b:?}: {o}");
            }
        }
    }

    #[test]
    fn projector_table_is_consistent() {
        for l in Bb84Label::ALL {
            assert_eq!(Bb84Label::projected_by(l.basis(), l.detector()), l);
            assert_eq!(Bb84Label::ALL[l.index()], l);
        }
    }

    #[test]
    fn qudit_examples() {
        let s = prepare_qudit(2, &[0.0, 0.0]).unwrap();
        assert_eq!(s, prepare_bb84(Bb84Label::LpPlus));
        for d in 2..10 {
            let s = prepare_qudit(d, &dft_state_phases(d, 1)).unwrap();
            assert!((s.norm_tracked() - 1.0).abs() < 1e-12);
        }
        let a = prepare_qudit(4, &[0.0, PI / 2.0, PI, 3.0 * PI / 2.0]).unwrap();
        let b = prepare_qudit(4, &[0.0; 4]).unwrap();
        // |sum_n e^{i n pi/2}|^2 / 16 = 0
        assert!(a.overlap(&b).unwrap() < 1e-30);
        assert!(prepare_qudit(1, &[0.0]).is_err());
        assert!(prepare_qudit(3, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn alice_station_prepares_the_target_state() {
        for d in 2..7 {
            let phases: Vec<f64> = (0..d).map(|n| 0.37 * n as f64 + 0.1).collect();
            let out = alice_preparation(d, &phases)
                .unwrap()
                .apply(&ModeState::basis(d, 0).unwrap())
                .unwrap();
            let target = prepare_qudit(d, &phases).unwrap();
            assert!((out.overlap(&target).unwrap() - 1.0).abs() < 1e-12);
            for (a, b) in out.amplitudes().iter().zip(target.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
