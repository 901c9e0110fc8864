//! Parameter estimation from resonant phase-extreme data.
//!
//! A dataset holds, for each compensator gain `η_K`, the resonant power
//! ratio at the positive-feedback (max) and negative-feedback (min)
//! phases. The plant decay rate is measured separately and held fixed;
//! `η_γ`, `μ`, `k1`, `k4` are fitted by bounded least squares.
//!
//! At `s = 0` the data depend on the four parameters only through three
//! combinations, so an unconstrained fit has a null direction and is
//! reported as rank deficient. Constraining `k1 = k4` removes it.

mod dataset;
mod fit;
pub mod levmar;
mod report;

pub use dataset::{ParametricDataset, ParametricPoint};
pub use fit::{
    fit_parameters, predict_parametric_point, residual_rms, residuals, FitBounds, FitOptions,
    FitParameters, FitResult, Sensitivities,
};
pub use report::{consistency_report, Check, ConsistencyReport, Measurements, ReportTolerances};
