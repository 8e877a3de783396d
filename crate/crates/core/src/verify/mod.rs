//! Verification support: synthetic data, exhaustive oracles, randomized
//! property drivers and the re-labeling proxy.

pub mod oracle;
pub mod proxy;
pub mod synth;
pub mod trends;

pub use oracle::{
    brute_force_optimum, check_approximation_bound, check_class_balance, check_degenerate,
    check_lazy_matches_eager, check_monotone_submodular, objective_direct, random_instance,
    CheckSummary, RandomInstance, BRUTE_FORCE_LIMIT, PROPERTY_TOL,
};
pub use proxy::{correlation_report, relabel_proxy, spearman, Bin, CorrelationReport, DEFAULT_BINS};
pub use synth::{generate_synthetic, measure_expansion_separation, BetaParams, NoiseModel, SynthConfig};
pub use trends::{
    correlation_study, loglog_slope, noise_ratio_curve, trend_synth_config, CorrelationStudy, TREND_TAU,
};
