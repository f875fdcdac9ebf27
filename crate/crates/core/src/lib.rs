//! Estimators for prevalence and regression with LLM-produced labels, and a
//! Monte Carlo harness that measures how codebook completeness and LLM error
//! propagate into downstream estimates.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the harness and
//! simulator run in `f64`. The `*64` / `*32` aliases below name the concrete
//! instantiations.

pub mod annotation;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod stream;

pub use annotation::{annotate, expert_label, llm_label, AnnotatedPopulation};
pub use dgp::{generate_population, true_prevalence, PopulationUnit, SimulationConfig};
pub use error::{Error, Result};
pub use estimators::{
    dsl_coefficients, dsl_regress, label_regression, label_regression_coefficients, ols,
    optimist_mean, pessimist_mean, ppi_mean, LabelSource, MomentSystem, RegressionSpec, Regressor,
};
pub use harness::{
    aggregate, run_cell, run_grid, Aggregate, CellEstimator, ExperimentGrid, ExperimentSummary,
};
pub use linalg::Matrix;
pub use model::{
    validate_dataset, AnnotationCondition, Codebook, Dataset, EstimateResult, EstimatorKind,
    ExpertCodebook, LabeledRecord, Label, Violation, ViolationKind,
};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Record64 = LabeledRecord<f64>;
pub type Record32 = LabeledRecord<f32>;
pub type Estimate64 = EstimateResult<f64>;
pub type Estimate32 = EstimateResult<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Moments64 = MomentSystem<f64>;
