//! Psychometric fitting and cohort statistics for 2-IFC data.
//!
//! The fitted model is `ψ(a) = 0.5 + 0.5·Φ((a − μ)/σ)`: guess rate fixed at
//! chance, no lapse, two free parameters.

mod fit;
mod normal;
mod optim;
mod stats;

pub use fit::{fit, fit_with, nll, psychometric, threshold, MIN_THRESHOLD_P, FitOptions, PsychometricFit, ResponseRow, ResponseTable};
pub use normal::{normal_cdf, normal_pdf, normal_quantile};
pub use optim::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use stats::{
    cohort_stats, exclude_unfittable, ln_gamma, mean_and_sd, paired_t_test, regularized_incomplete_beta,
    student_t_cdf, student_t_sf, CohortStats, ConditionSummary, Exclusion, ParticipantFit, Tail, TTest,
};
