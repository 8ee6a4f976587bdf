//! Reproducible Monte Carlo estimators built on per-sample ChaCha streams.

mod coupled;
mod harness;
mod scaling;
mod stats;
mod tail;
mod theta;

pub use coupled::{
    cluster_size_sample, coupled_increment_histogram, coupled_run, fresh_map, hausdorff_survey,
    histogram_test, ClusterSizeSample, IncrementHistogram,
};
pub use harness::{
    derive_seed, parallel_mc, run_indexed, run_sequential, sample_stream, EstimateResult, McError,
    RunConfig,
};
pub use scaling::{
    conditioned_ensemble, scaling_selfconsistency, ScaleEnsemble, ScaledSample, ScalingReport,
    CENSOR_FACTOR,
};
pub use stats::{
    chi_square_gof, ks_two_sample, linear_fit, survival_at, ChiSquareResult, KsResult, LinearFit,
};
pub use tail::{
    fit_survival_points, fit_tail, lin_spaced, log_spaced, TailAxis, TailFit, MIN_TAIL_SAMPLES,
};
pub use theta::{
    absorption_height, estimate_theta_walk, hitting_time_sample, near_critical_theta_scan,
    ratio_spread, ScanRow, ThetaEstimate, ThetaOptions,
};
