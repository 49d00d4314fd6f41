//! Simulation study, lower-bound fixture and baselines.

pub mod baseline;
pub mod hockey;
pub mod lower_bound;
pub mod metrics;
pub mod study;

pub use baseline::{linear_ot_baseline, LinearOtMap};
pub use hockey::{gen_pushforward_data, uniform_sample, HockeyStickMap};
pub use lower_bound::{lower_bound_fixture, LowerBoundReport};
pub use metrics::{l2_error, l2_error_on, loglog_regression, ErrorEstimate, LogLogFit};
pub use study::{convergence_study, EstimatorKind, ExperimentReport, StudyConfig, Task};
