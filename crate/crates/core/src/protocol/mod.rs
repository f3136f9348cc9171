//! BB84 and qudit phase encoding over the three link architectures.
//!
//! Alice prepares an equal-weight path superposition; Bob applies his own
//! phase bank and interferes the paths on a splitter whose output ports are
//! the detectors. The long interferometer and the few-mode-fiber link keep all
//! paths in one arrival window. The time-bin link sends the paths as
//! successive time bins and only the central arrival bin interferes, so the
//! other bins are discarded.

mod link;
mod matrix;
mod qber;
mod states;

pub use link::{
    detection_probabilities, intrinsic_sift_transmission, matched_detector, ArchitectureConfig,
    DetectionOutcome, LanternPair, Scheme, CROSSTALK_PHASE_GRID,
};
pub(crate) use link::realizations;
pub(crate) use matrix::{channel_clicks, simulate_gates};
pub use matrix::{
    analytic_probability_matrix, probability_matrix, ProbabilityMatrix, MIN_EXPECTED_CLICKS,
};
pub use qber::{
    binary_entropy, detection_gain_vs_timebin, detection_gain_with, key_fraction, qber_from_link,
    GainAccounting, QberReport,
};
pub use states::{
    alice_preparation, dft_state_phases, prepare_bb84, prepare_qudit, Basis, Bb84Label, Bb84State,
};
