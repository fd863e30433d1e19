//! Statistical error budgets and experiment–theory comparison for precision
//! force and pressure measurements.
//!
//! Given repeated measurement sets of a strongly separation-dependent
//! quantity, the crate determines the total experimental error as a function
//! of separation — random scatter via variance-of-the-mean estimates, pooled
//! over neighboring separations and scaled by Student-t quantiles, plus
//! uniformly distributed systematic errors composed with tabulated
//! coefficients — and, independently, the total theoretical error of the
//! model predictions. The two totals combine into a confidence band for the
//! theory-minus-experiment difference, from which per-model consistency or
//! exclusion verdicts follow. Everything is conservative by construction:
//! variance pooling takes the worse of two weightings and the combination
//! coefficients guard against underestimating either side.
//!
//! # Modules
//!
//! - [`data`] — domain records, CSV/JSON ingestion, theory-curve interpolation
//! - [`binning`] — separation subintervals, means, variances of the mean
//! - [`random_error`] — variance smoothing, Student-t quantiles, random error
//! - [`composition`] — systematic-error composition and the r-ratio rule
//! - [`theory`] — theoretical error budget
//! - [`comparison`] — difference band and per-model verdicts
//! - [`report`] — CSV/JSON emission with provenance metadata
//! - [`synth`] — synthetic experiments and Monte Carlo coverage studies
//! - [`analysis`] — the end-to-end pipeline
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --example binned_statistics
//! cargo run --example variance_smoothing
//! cargo run --example confidence_intervals
//! cargo run --example systematic_budget
//! cargo run --example theory_budget
//! cargo run --example model_comparison
//! cargo run --example error_budget_table
//! cargo run --example coverage_study
//! cargo run --example full_pipeline
//! ```
//!
//! The same pipeline is scriptable through the `measurand` binary
//! (`measurand analyze`, `measurand mc`); see the repository README for the
//! file formats.

pub mod analysis;
pub mod binning;
pub mod comparison;
pub mod composition;
pub mod data;
pub mod error;
pub mod random_error;
pub mod report;
pub mod synth;
pub mod theory;

pub use analysis::{run_analysis, write_reports, Analysis, BudgetRow};
pub use binning::{
    bin_mean_and_variance, partition_into_subintervals, pointwise_mean_and_variance,
    SubintervalGroup,
};
pub use comparison::{
    difference_error, mean_difference, verdict, BandStatus, ComparisonVerdict,
};
pub use composition::{
    combine_random_systematic, combine_systematic, evaluate_systematic_sources,
    CoefficientTables, Regime, SystematicSource,
};
pub use data::{
    load_measurement_sets, load_theory_curve, load_theory_curves, ExperimentConfig,
    MeasurementCollection, MeasurementMeta, MeasurementRecord, QuantityKind, TheoryCurve,
};
pub use error::{Error, Result};
pub use random_error::{
    build_windows, random_error, random_errors, smooth_variance, student_t_quantile,
};
pub use report::RunMeta;
pub use synth::{
    coverage_study, generate_synthetic_experiment, CoverageReport, SyntheticScenario,
};
pub use theory::{
    base_theory_error, pfa_error, separation_uncertainty_error, total_theory_error,
};
