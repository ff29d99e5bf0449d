//! Monte-Carlo Poisson suspension over a finite window `X_K`.
//!
//! Points carry an exact address (stage, level, binary offset) so that
//! iterating `T` never rounds. Counting statistics are checked against the
//! exact correlations from [`crate::tower`].

mod experiment;
mod point;

pub use experiment::{
    covariance_experiment, escaping_mass, intensity_experiment, required_window, sample_configuration,
    sample_indexed, select_window, suspension_rigidity_experiment, write_sample_csv, Configuration,
    ExperimentOptions, ExperimentResult, SampleCounts,
};
pub use point::{Point, Simulator, DEFAULT_BITS, GUARD_BITS};
