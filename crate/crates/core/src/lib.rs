//! Identification of linearly parameterized nonlinear systems
//! `x_{t+1} = Ā φ(x_t) + w_t` from a single trajectory, with least-squares,
//! ℓ1 and Huber estimators.

pub mod basis;
pub mod cli;
pub mod disturbance;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod simulate;

pub use basis::{BasisLibrary, BasisTerm};
pub use disturbance::{derive_stream, draw_disturbance, AttackLaw, AttackValue, DisturbanceSpec, NoiseLaw, RngStream};
pub use error::{Error, Result};
pub use estimators::{fit, fit_rowwise, EstimatorConfig, FitResult, RowFit};
pub use experiments::{
    bounded_error_check, fit_slope, run_sweep, stability_study, SlopeFit, StabilityReport, SweepConfig, SweepReport,
    SweepRow,
};
pub use linalg::Mat;
pub use loss::{huber_deriv, huber_value, inner_v, lasso_form_objective, objective, optimal_v, Method, RegressionData};
pub use model::{benchmark_system, SystemModel, BENCHMARK_X0};
pub use simulate::{
    check_assumptions, empirical_excitation, reconstruct, simulate, AssumptionReport, ExcitationReport, Trajectory,
};
