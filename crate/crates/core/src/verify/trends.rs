//! Qualitative trend studies on synthetic data: how neighborhood confidence
//! relates to neighbor-vote correction, and how much label noise survives
//! selection at different budgets.

use serde::Serialize;

use crate::dataset::{compute_confidence, ConfidenceMetric, Dataset};
use crate::error::{Error, Result};
use crate::selectors::{greedy, noise_ratio, Budget, GreedyOptions};
use crate::similarity::build_graph;
use crate::verify::proxy::{correlation_report, relabel_proxy, CorrelationReport};
use crate::verify::synth::{measure_expansion_separation, SynthConfig};

/// Threshold that keeps neighborhoods local for [`trend_synth_config`].
pub const TREND_TAU: f64 = 0.99;

/// Ten tight classes of 500 points in 32 dimensions with 20% next-class
/// noise.
pub fn trend_synth_config(seed: u64) -> SynthConfig {
    SynthConfig {
        num_classes: 10,
        points_per_class: 500,
        embedding_dim: 32,
        within_class_concentration: 50.0,
        noise_rate: 0.2,
        seed,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationStudy {
    pub tau: f64,
    pub ratio: f64,
    pub alpha: f64,
    pub beta: f64,
    pub corrected_fraction: f64,
    pub mean_nbr_conf_corrected: f64,
    pub mean_nbr_conf_uncorrected: f64,
    pub report: CorrelationReport,
}

fn max_prob_confidence(dataset: &Dataset) -> Result<crate::dataset::ConfidenceVector> {
    let probs = dataset
        .probabilities()
        .ok_or_else(|| Error::InvalidArgument("trend studies need class probabilities".into()))?;
    compute_confidence(probs, ConfidenceMetric::MaxProb)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Selects a `ratio` budget with the default greedy, then bins every
/// example's reduced neighborhood confidence against whether the selected
/// neighbors vote it back to its true class.
pub fn correlation_study(dataset: &Dataset, tau: f64, ratio: f64, num_bins: usize) -> Result<CorrelationStudy> {
    let graph = build_graph(dataset.embeddings(), tau)?;
    let conf = max_prob_confidence(dataset)?;
    let s = Budget::Ratio(ratio).resolve(dataset.len())?;
    let state = greedy(&graph, conf.values(), s, GreedyOptions::default())?;
    let corrected = relabel_proxy(dataset, &graph, &conf, state.selected())?;
    let nbr = state.nbr_conf();
    let report = correlation_report(nbr, &corrected, num_bins)?;
    let (alpha, beta) = measure_expansion_separation(dataset, &graph)?;
    let pick = |want: bool| mean(nbr.iter().zip(&corrected).filter(|(_, &c)| c == want).map(|(&v, _)| v));
    Ok(CorrelationStudy {
        tau,
        ratio,
        alpha,
        beta,
        corrected_fraction: corrected.iter().filter(|&&c| c).count() as f64 / corrected.len() as f64,
        mean_nbr_conf_corrected: pick(true),
        mean_nbr_conf_uncorrected: pick(false),
        report,
    })
}

/// Noise ratio of the default greedy's subset at each budget ratio.
pub fn noise_ratio_curve(dataset: &Dataset, tau: f64, ratios: &[f64]) -> Result<Vec<(f64, f64)>> {
    let (noisy, truth) = match (dataset.noisy_labels(), dataset.ground_truth_labels()) {
        (Some(n), Some(t)) => (n, t),
        _ => return Err(Error::MissingGroundTruth("noise-ratio curves")),
    };
    let graph = build_graph(dataset.embeddings(), tau)?;
    let conf = max_prob_confidence(dataset)?;
    ratios
        .iter()
        .map(|&r| {
            let s = Budget::Ratio(r).resolve(dataset.len())?;
            let state = greedy(&graph, conf.values(), s, GreedyOptions::default())?;
            let ratio = noise_ratio(state.selected(), noisy, truth).unwrap_or(0.0);
            Ok((r, ratio))
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = mean(lx.iter().copied());
    let my = mean(ly.iter().copied());
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn small_study_runs() {
        let cfg = SynthConfig {
            points_per_class: 40,
            ..trend_synth_config(1)
        };
        let ds = crate::verify::synth::generate_synthetic(&cfg).unwrap();
        let study = correlation_study(&ds, 0.95, 0.2, 15).unwrap();
        assert_eq!(study.report.bins.len(), 15);
        let curve = noise_ratio_curve(&ds, 0.95, &[0.2, 0.6]).unwrap();
        assert_eq!(curve.len(), 2);
    }
}
