//! Runners that reproduce the link measurements, plus the named parameter
//! sets they run on and writers for their results.

pub mod fits;
mod fringe;
pub mod output;
mod runners;

pub use fringe::{
    analytic_fringe_visibility, fit_fringe, run_interference_sweep, FringeFit, FringePoint, InterferenceSweep,
    SweepSpec, DEFAULT_GATES_PER_POINT,
};
pub use runners::{
    equivalent_fmf_km, loss_threshold, run_dimension_table, run_loss_sweep, run_matrix_experiment, DimensionRow,
    LossRow, LossSweep, LossSweepSpec, MatrixExperiment, DEFAULT_GATES_PER_CELL,
};
