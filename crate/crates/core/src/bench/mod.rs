//! Benchmark harness: synthetic oracles, offline data generation, the OOD
//! gradient-error experiment, gap-bound checks and rank scoring.

pub mod bounds;
pub mod ood;
pub mod oracle;
pub mod scoring;

pub use bounds::{
    check_bound_thm1, check_condition_thm1b, measure_gap, BoundCheckConfig, GapMeasurement, Thm1Report,
    Thm1bReport, Verdict,
};
pub use ood::{gen_offline_dataset, ood_gradient_error, InputDistribution, OodCurve, OodReport};
pub use oracle::{builtin_oracle, shekel, shekel_grad, shekel_maximizer, Oracle, OracleFunction, OracleRegistry, PerturbedObjective};
pub use scoring::{mnr, percentile_scores, MnrResult, PercentileReport, RankTable};
