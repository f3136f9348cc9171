//! Linear-optical mode calculus.
//!
//! A [`ModeState`] holds the complex amplitudes of one optical pulse spread
//! over `d` spatial (or path, or time-bin) modes. Components act on it through
//! [`TransferElement`]s, which are passive: their largest singular value never
//! exceeds one, so loss is carried in the squared norm of the state rather than
//! in a side-channel scalar.
//!
//! Beamsplitters use the symmetric convention, with a factor `i` on the cross
//! port.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Tolerance for algebraic identities (norms, matrix equalities).
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for spectral checks (singular values).
pub const SPECTRAL_TOL: f64 = 1e-9;

pub type ComplexMatrix = DMatrix<Complex64>;

/// Amplitudes of one pulse over `dim >= 2` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    amplitudes: DVector<Complex64>,
    norm: f64,
}

impl ModeState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::shape("at least 2 modes", amplitudes.len()));
        }
        Self::from_vector(DVector::from_vec(amplitudes))
    }

    fn from_vector(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::shape("at least 2 modes", amplitudes.len()));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::invalid("non-finite amplitude"));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if norm > 1.0 + SPECTRAL_TOL {
            return Err(Error::invalid(format!(
                "squared norm {norm} exceeds one; states carry at most one photon's worth of amplitude"
            )));
        }
        Ok(Self { amplitudes, norm })
    }

    /// The unit vector `|k>` in `dim` modes.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::shape(format!("mode index < {dim}"), k));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[k] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    /// Equal-weight superposition `(1/sqrt d) sum e^{i phi_n} |n>`.
    pub fn equal_superposition(phases: &[f64]) -> Result<Self> {
        let amp = 1.0 / (phases.len() as f64).sqrt();
        Self::new(
            phases
                .iter()
                .map(|&p| Complex64::from_polar(amp, p))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amplitudes.as_slice()
    }

    /// Squared norm; values below one record accumulated loss.
    pub fn norm_tracked(&self) -> f64 {
        self.norm
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &ModeState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::shape(self.dim(), other.dim()));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &ModeState) -> Result<f64> {
        self.inner(other).map(|c| c.norm_sqr())
    }

    pub(crate) fn vector(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }
}

/// A `rows x cols` passive linear-optical element.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferElement {
    matrix: ComplexMatrix,
    label: String,
}

impl TransferElement {
    /// Wraps a matrix after checking it has no gain.
    pub fn new(matrix: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::shape("non-empty matrix", "0 dimension"));
        }
        let sigma = max_singular_value(&matrix);
        if !(sigma <= 1.0 + SPECTRAL_TOL) {
            return Err(Error::Gain { label, sigma });
        }
        Ok(Self { matrix, label })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix, label: impl Into<String>) -> Self {
        Self {
            matrix,
            label: label.into(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new_unchecked(ComplexMatrix::identity(dim, dim), "identity")
    }

    /// Phase `phi` on a single mode, identity elsewhere.
    pub fn phase_shifter(dim: usize, mode: usize, phi: f64) -> Result<Self> {
        if mode >= dim {
            return Err(Error::shape(format!("mode index < {dim}"), mode));
        }
        let mut m = ComplexMatrix::identity(dim, dim);
        m[(mode, mode)] = Complex64::from_polar(1.0, phi);
        Ok(Self::new_unchecked(m, format!("phase[{mode}]={phi}")))
    }

    /// Mode-independent amplitude transmission `amplitude` in `[0, 1]`.
    pub fn attenuator(dim: usize, amplitude: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::invalid(format!(
                "attenuator amplitude {amplitude} outside [0, 1]"
            )));
        }
        let m = ComplexMatrix::identity(dim, dim) * Complex64::new(amplitude, 0.0);
        Ok(Self::new_unchecked(m, format!("attenuator({amplitude})")))
    }

    /// Symmetric 50:50 fiber coupler `(1/sqrt 2) [[1, i], [i, 1]]`.
    pub fn coupler_50_50() -> Self {
        let s = 1.0 / 2f64.sqrt();
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(s, 0.0),
                Complex64::new(0.0, s),
                Complex64::new(0.0, s),
                Complex64::new(s, 0.0),
            ],
        );
        Self::new_unchecked(m, "coupler_50_50")
    }

    /// `d`-port multiport splitter with DFT entries `(1/sqrt d) exp(2 pi i j k / d)`.
    pub fn multiport_dft(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("multiport needs d >= 2, got {d}")));
        }
        let s = 1.0 / (d as f64).sqrt();
        let m = ComplexMatrix::from_fn(d, d, |j, k| {
            // reduce j*k mod d first so the angle stays small and exact for large d
            let jk = (j * k) % d;
            Complex64::from_polar(s, 2.0 * PI * jk as f64 / d as f64)
        });
        Ok(Self::new_unchecked(m, format!("dft({d})")))
    }

    /// Diagonal bank of phase modulators.
    pub fn phase_bank(phases: &[f64]) -> Self {
        let diag = DVector::from_iterator(
            phases.len(),
            phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
        );
        Self::new_unchecked(ComplexMatrix::from_diagonal(&diag), "phase_bank")
    }

    /// Single element equivalent to applying `elements` in order.
    pub fn compose(elements: &[TransferElement]) -> Result<Self> {
        let (first, rest) = elements
            .split_first()
            .ok_or_else(|| Error::invalid("cannot compose an empty chain"))?;
        let mut matrix = first.matrix.clone();
        let mut label = first.label.clone();
        for e in rest {
            if e.cols() != matrix.nrows() {
                return Err(Error::shape(
                    format!("{} input modes for `{}`", matrix.nrows(), e.label),
                    e.cols(),
                ));
            }
            matrix = &e.matrix * matrix;
            label.push_str(" -> ");
            label.push_str(&e.label);
        }
        Self::new(matrix, label)
    }

    pub fn apply(&self, state: &ModeState) -> Result<ModeState> {
        if self.cols() != state.dim() {
            return Err(Error::shape(
                format!("{} modes for `{}`", self.cols(), self.label),
                state.dim(),
            ));
        }
        ModeState::from_vector(&self.matrix * state.vector())
    }

    /// Hermitian conjugate (the inverse, for unitary elements).
    pub fn adjoint(&self) -> Self {
        Self::new_unchecked(self.matrix.adjoint(), format!("{}^H", self.label))
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.matrix.clone().singular_values().iter().copied().collect()
    }

    pub fn max_singular_value(&self) -> f64 {
        max_singular_value(&self.matrix)
    }

    /// All singular values equal to one within [`SPECTRAL_TOL`].
    pub fn is_unitary(&self) -> bool {
        self.rows() == self.cols()
            && self
                .singular_values()
                .iter()
                .all(|s| (s - 1.0).abs() <= SPECTRAL_TOL)
    }
}

pub(crate) fn max_singular_value(m: &ComplexMatrix) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Max-normalized `N x N` intensity map over `[-extent, extent]^2` (units of the mode waist).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid {
    resolution: usize,
    extent: f64,
    /// Row-major; row `i` is `y_i`, column `j` is `x_j`.
    values: Vec<f64>,
}

impl IntensityGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Intensity at row `i` (y) and column `j` (x).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.resolution + j]
    }

    /// Grid coordinate of index `k`. Symmetric about zero bit-for-bit.
    pub fn coordinate(&self, k: usize) -> f64 {
        grid_coordinate(k, self.resolution, self.extent)
    }

    /// The grid rotated by 90 degrees counter-clockwise.
    pub fn rotated_90(&self) -> IntensityGrid {
        let n = self.resolution;
        let mut values = vec![0.0; n * n];
        // (x, y) -> (-y, x)
        for i in 0..n {
            for j in 0..n {
                values[j * n + (n - 1 - i)] = self.get(i, j);
            }
        }
        IntensityGrid {
            resolution: n,
            extent: self.extent,
            values,
        }
    }

    /// Plain-text matrix: a `# resolution=<N> extent=<E>` header then one row per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# resolution={} extent={}\n", self.resolution, self.extent);
        for row in self.values.chunks(self.resolution) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty intensity file".into(),
        })?;
        let mut resolution = None;
        let mut extent = None;
        for token in header.trim_start_matches('#').split_whitespace() {
            match token.split_once('=') {
                Some(("resolution", v)) => resolution = v.parse::<usize>().ok(),
                Some(("extent", v)) => extent = v.parse::<f64>().ok(),
                _ => {}
            }
        }
        let (resolution, extent) = match (resolution, extent) {
            (Some(r), Some(e)) => (r, e),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "header must be `# resolution=<N> extent=<E>`".into(),
                })
            }
        };
        let mut values = Vec::with_capacity(resolution * resolution);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            if row.len() != resolution {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected {resolution} values, found {}", row.len()),
                });
            }
            values.extend(row);
        }
        if values.len() != resolution * resolution {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("expected {resolution} rows"),
            });
        }
        Ok(Self {
            resolution,
            extent,
            values,
        })
    }
}

fn grid_coordinate(k: usize, n: usize, extent: f64) -> f64 {
    (2.0 * k as f64 - (n - 1) as f64) * extent / (n - 1) as f64
}

/// Complex field of `a0 |LP11a> + a1 |LP11b>` at `(x, y)`, unit waist.
///
/// LP11a ~ x exp(-r^2), LP11b ~ y exp(-r^2) (first-order Hermite-Gaussian approximants).
pub fn lp11_field(state: &ModeState, x: f64, y: f64) -> Result<Complex64> {
    if state.dim() != 2 {
        return Err(Error::shape("2 modes (LP11a, LP11b)", state.dim()));
    }
    let a = state.amplitudes();
    let envelope = (-(x * x + y * y)).exp();
    Ok((a[0] * x + a[1] * y) * envelope)
}

/// Transverse intensity of an LP11 superposition, max-normalized to one.
pub fn render_intensity(state: &ModeState, resolution: usize, extent: f64) -> Result<IntensityGrid> {
    if state.dim() != 2 {
        return Err(Error::shape("2 modes (LP11a, LP11b)", state.dim()));
    }
    if resolution < 16 {
        return Err(Error::invalid(format!("resolution {resolution} < 16")));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::invalid(format!("extent {extent} must be positive")));
    }
    if state.norm_tracked() == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let n = resolution;
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        let y = grid_coordinate(i, n, extent);
        for j in 0..n {
            let x = grid_coordinate(j, n, extent);
            values.push(lp11_field(state, x, y)?.norm_sqr());
        }
    }
    let peak = values.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(IntensityGrid {
        resolution,
        extent,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    fn assert_unitary(m: &ComplexMatrix) {
        let p = m.adjoint() * m;
        let id = ComplexMatrix::identity(m.nrows(), m.ncols());
        assert!((p - id).iter().all(|z| z.norm() <= ALGEBRAIC_TOL));
    }

    #[test]
    fn identity_attenuator_and_phase() {
        let s = ModeState::basis(2, 0).unwrap();
        let out = TransferElement::identity(2).apply(&s).unwrap();
        assert_eq!(out.amplitudes(), s.amplitudes());
        assert_eq!(out.norm_tracked(), 1.0);

        let plus = ModeState::new(vec![c(S, 0.0), c(S, 0.0)]).unwrap();
        let out = TransferElement::phase_shifter(2, 1, PI)
            .unwrap()
            .apply(&plus)
            .unwrap();
        assert!(close(out.amplitudes(), &[c(S, 0.0), c(-S, 0.0)], ALGEBRAIC_TOL));

        let out = TransferElement::attenuator(2, 0.5).unwrap().apply(&s).unwrap();
        assert!(close(out.amplitudes(), &[c(0.5, 0.0), c(0.0, 0.0)], 0.0));
        assert_eq!(out.norm_tracked(), 0.25);
    }

    #[test]
    fn apply_rejects_shape_mismatch() {
        let s = ModeState::basis(3, 0).unwrap();
        assert!(matches!(
            TransferElement::coupler_50_50().apply(&s),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn state_rejects_single_mode_and_excess_norm() {
        assert!(ModeState::new(vec![c(1.0, 0.0)]).is_err());
        assert!(ModeState::new(vec![c(1.0, 0.0), c(0.5, 0.0)]).is_err());
    }

    #[test]
    fn coupler_splits_and_transfers() {
        let bs = TransferElement::coupler_50_50();
        assert_unitary(bs.matrix());
        let once = bs.apply(&ModeState::basis(2, 0).unwrap()).unwrap();
        assert!(close(once.amplitudes(), &[c(S, 0.0), c(0.0, S)], ALGEBRAIC_TOL));
        assert_eq!(once.probabilities().len(), 2);
        assert!(once.probabilities().iter().all(|p| (p - 0.5).abs() < 1e-15));

        // [[1,i],[i,1]]^2 / 2 = [[0,i],[i,0]]
        let twice = bs.apply(&once).unwrap();
        assert!(close(twice.amplitudes(), &[c(0.0, 0.0), c(0.0, 1.0)], ALGEBRAIC_TOL));
        let composed = TransferElement::compose(&[bs.clone(), bs]).unwrap();
        let via = composed.apply(&ModeState::basis(2, 0).unwrap()).unwrap();
        assert!(close(via.amplitudes(), twice.amplitudes(), ALGEBRAIC_TOL));
    }

    #[test]
    fn dft_examples() {
        let out = TransferElement::multiport_dft(2)
            .unwrap()
            .apply(&ModeState::basis(2, 0).unwrap())
            .unwrap();
        assert!(close(out.amplitudes(), &[c(S, 0.0), c(S, 0.0)], ALGEBRAIC_TOL));
        let out = TransferElement::multiport_dft(4)
            .unwrap()
            .apply(&ModeState::basis(4, 0).unwrap())
            .unwrap();
        assert!(out.probabilities().iter().all(|p| (p - 0.25).abs() < 1e-15));
        for d in 2..=16 {
            let m = TransferElement::multiport_dft(d).unwrap();
            assert_unitary(m.matrix());
            assert!(m.is_unitary());
        }
        assert!(TransferElement::multiport_dft(1).is_err());
    }

    #[test]
    fn phase_bank_prepares_bb84_coefficients() {
        let plus = ModeState::new(vec![c(S, 0.0), c(S, 0.0)]).unwrap();
        let oam = TransferElement::phase_bank(&[0.0, PI / 2.0]).apply(&plus).unwrap();
        assert!(close(oam.amplitudes(), &[c(S, 0.0), c(0.0, S)], ALGEBRAIC_TOL));
        let lpm = TransferElement::phase_bank(&[0.0, PI]).apply(&plus).unwrap();
        assert!(close(lpm.amplitudes(), &[c(S, 0.0), c(-S, 0.0)], ALGEBRAIC_TOL));
        let zero = TransferElement::phase_bank(&[0.0; 3]);
        assert_eq!(zero.matrix(), &ComplexMatrix::identity(3, 3));
    }

    #[test]
    fn compose_checks_chain_shapes() {
        let a = TransferElement::identity(2);
        let b = TransferElement::identity(3);
        assert!(TransferElement::compose(&[a, b]).is_err());
        assert!(TransferElement::compose(&[]).is_err());
    }

    #[test]
    fn gain_is_rejected() {
        let m = ComplexMatrix::identity(2, 2) * c(1.01, 0.0);
        assert!(matches!(TransferElement::new(m, "amp"), Err(Error::Gain { .. })));
    }

    #[test]
    fn lp11a_has_nodal_line_on_y_axis() {
        let g = render_intensity(&ModeState::basis(2, 0).unwrap(), 65, 2.5).unwrap();
        let mid = 32;
        assert_eq!(g.coordinate(mid), 0.0);
        for i in 0..65 {
            assert_eq!(g.get(i, mid), 0.0);
        }
        assert!(g.values().iter().any(|&v| v == 1.0));
        assert!(g.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn lp_plus_has_antidiagonal_nodal_line() {
        let plus = ModeState::new(vec![c(S, 0.0), c(S, 0.0)]).unwrap();
        let g = render_intensity(&plus, 64, 2.0).unwrap();
        for i in 0..64 {
            assert_eq!(g.get(i, 63 - i), 0.0, "x + y = 0 at row {i}");
        }
        // lobes sit on the x = y diagonal
        let on_diag = (0..64).map(|i| g.get(i, i)).fold(0.0, f64::max);
        assert!(on_diag > 0.99);
    }

    #[test]
    fn oam_is_a_ring() {
        let oam = ModeState::new(vec![c(S, 0.0), c(0.0, S)]).unwrap();
        let g = render_intensity(&oam, 64, 2.0).unwrap();
        assert_eq!(g.rotated_90(), g);
        let ring: Vec<f64> = (0..720)
            .map(|k| {
                let t = k as f64 * PI / 360.0;
                lp11_field(&oam, 0.8 * t.cos(), 0.8 * t.sin()).unwrap().norm_sqr()
            })
            .collect();
        let mean = ring.iter().sum::<f64>() / ring.len() as f64;
        assert!(ring.iter().all(|v| ((v - mean) / mean).abs() < 1e-9));
    }

    #[test]
    fn render_rejects_bad_input() {
        let zero = ModeState::new(vec![c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(render_intensity(&zero, 32, 2.0), Err(Error::ZeroNorm)));
        let s = ModeState::basis(2, 0).unwrap();
        assert!(render_intensity(&s, 8, 2.0).is_err());
        assert!(render_intensity(&ModeState::basis(3, 0).unwrap(), 32, 2.0).is_err());
    }

    #[test]
    fn intensity_text_round_trip() {
        let s = ModeState::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let g = render_intensity(&s, 16, 3.0).unwrap();
        let text = g.to_text();
        assert!(text.starts_with("# resolution=16 extent=3\n"));
        assert_eq!(text.lines().count(), 17);
        assert_eq!(IntensityGrid::from_text(&text).unwrap(), g);
        assert!(IntensityGrid::from_text("# resolution=2\n1 2\n").is_err());
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = ModeState> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim).prop_filter_map(
            "nonzero",
            |v| {
                let n: f64 = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
                (n > 1e-6).then(|| {
                    ModeState::new(v.iter().map(|(a, b)| c(a / n, b / n)).collect()).unwrap()
                })
            },
        )
    }

    fn arb_element(dim: usize) -> impl Strategy<Value = TransferElement> {
        (
            proptest::collection::vec(-PI..PI, dim),
            proptest::collection::vec(-PI..PI, dim),
            0.0f64..=1.0,
        )
            .prop_map(move |(p, q, t)| {
                TransferElement::compose(&[
                    TransferElement::phase_bank(&p),
                    TransferElement::multiport_dft(dim).unwrap(),
                    TransferElement::phase_bank(&q),
                    TransferElement::attenuator(dim, t).unwrap(),
                ])
                .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn unitary_preserves_norm(s in arb_state(3), p in proptest::collection::vec(-PI..PI, 3)) {
            let u = TransferElement::compose(&[
                TransferElement::phase_bank(&p),
                TransferElement::multiport_dft(3).unwrap(),
            ]).unwrap();
            prop_assert!(u.is_unitary());
            let out = u.apply(&s).unwrap();
            prop_assert!((out.norm_tracked() - s.norm_tracked()).abs() <= ALGEBRAIC_TOL);
        }

        #[test]
        fn passive_never_gains(s in arb_state(4), e in arb_element(4)) {
            let out = e.apply(&s).unwrap();
            prop_assert!(out.norm_tracked() <= s.norm_tracked() + SPECTRAL_TOL);
        }

        #[test]
        fn composition_is_associative(a in arb_element(3), b in arb_element(3), c3 in arb_element(3)) {
            let left = TransferElement::compose(&[a.clone(), TransferElement::compose(&[b.clone(), c3.clone()]).unwrap()]).unwrap();
            let right = TransferElement::compose(&[TransferElement::compose(&[a, b]).unwrap(), c3]).unwrap();
            let diff = left.matrix() - right.matrix();
            prop_assert!(diff.iter().all(|z| z.norm() <= ALGEBRAIC_TOL));
        }

        #[test]
        fn composition_is_submultiplicative(a in arb_element(3), b in arb_element(3)) {
            let ab = TransferElement::compose(&[a.clone(), b.clone()]).unwrap();
            prop_assert!(ab.max_singular_value() <= a.max_singular_value() * b.max_singular_value() + SPECTRAL_TOL);
        }

        #[test]
        fn identity_is_neutral(a in arb_element(2)) {
            let c2 = TransferElement::compose(&[TransferElement::identity(2), a.clone()]).unwrap();
            prop_assert!((c2.matrix() - a.matrix()).iter().all(|z| z.norm() <= ALGEBRAIC_TOL));
        }

        #[test]
        fn oam_render_is_rotation_invariant(n in 16usize..48, e in 0.5f64..4.0, sign in prop::bool::ANY) {
            let im = if sign { S } else { -S };
            let g = render_intensity(&ModeState::new(vec![c(S, 0.0), c(0.0, im)]).unwrap(), n, e).unwrap();
            prop_assert_eq!(g.rotated_90(), g);
        }
    }
}
