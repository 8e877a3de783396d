//! A neighborhood-vote stand-in for model re-labeling, and the binned
//! correlation between neighborhood confidence and successful correction.

use std::fmt::Write as _;

use serde::Serialize;

use crate::dataset::{ConfidenceVector, Dataset};
use crate::error::{Error, Result};
use crate::similarity::NeighborGraph;

pub const DEFAULT_BINS: usize = 15;

/// For every example, let the selected neighbors vote for their noisy label
/// with weight `similarity * confidence`; the example counts as corrected
/// when the winning label equals its ground truth. No votes means no
/// correction.
pub fn relabel_proxy(
    dataset: &Dataset,
    graph: &NeighborGraph,
    confidence: &ConfidenceVector,
    selected: &[usize],
) -> Result<Vec<bool>> {
    let truth = dataset
        .ground_truth_labels()
        .ok_or(Error::MissingGroundTruth("the re-labeling proxy"))?;
    let noisy = dataset
        .noisy_labels()
        .expect("ground truth implies noisy labels");
    let m = dataset.len();
    if graph.len() != m || confidence.len() != m {
        return Err(Error::LengthMismatch {
            what: "graph/confidence".into(),
            expected: m,
            found: if graph.len() != m { graph.len() } else { confidence.len() },
        });
    }
    let mut in_set = vec![false; m];
    for &i in selected {
        if i >= m {
            return Err(Error::IndexOutOfRange { index: i, len: m });
        }
        in_set[i] = true;
    }
    let c = dataset.num_classes();
    let conf = confidence.values();
    let mut votes = vec![0.0f64; c];
    Ok((0..m)
        .map(|i| {
            votes.iter_mut().for_each(|v| *v = 0.0);
            for (k, w) in graph.neighbors(i) {
                if in_set[k] {
                    votes[noisy[k]] += w as f64 * conf[k];
                }
            }
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in votes.iter().enumerate() {
                if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            best.is_some_and(|(j, _)| j == truth[i])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub correction_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub bins: Vec<Bin>,
    pub spearman: f64,
}

impl CorrelationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,correction_rate\n");
        for b in &self.bins {
            let rate = b.correction_rate.map(|r| r.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", b.lo, b.hi, b.count, rate).unwrap();
        }
        out
    }

    /// True when correction rates never drop across the first `k`
    /// non-empty bins.
    pub fn non_decreasing_prefix(&self, k: usize) -> bool {
        let rates: Vec<f64> = self.bins[..k.min(self.bins.len())]
            .iter()
            .filter_map(|b| b.correction_rate)
            .collect();
        rates.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Ranks starting at 1, with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Equal-width bins over the observed range of `nbr_conf` with the share
/// of corrected examples in each, plus the rank correlation.
pub fn correlation_report(nbr_conf: &[f64], corrected: &[bool], num_bins: usize) -> Result<CorrelationReport> {
    if nbr_conf.is_empty() {
        return Err(Error::InvalidArgument("correlation needs at least one example".into()));
    }
    if nbr_conf.len() != corrected.len() {
        return Err(Error::LengthMismatch {
            what: "corrected flags".into(),
            expected: nbr_conf.len(),
            found: corrected.len(),
        });
    }
    if num_bins == 0 {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    let lo = nbr_conf.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nbr_conf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / num_bins as f64;
    let mut counts = vec![0usize; num_bins];
    let mut hits = vec![0usize; num_bins];
    for (&v, &ok) in nbr_conf.iter().zip(corrected) {
        let b = if width > 0.0 {
            (((v - lo) / width) as usize).min(num_bins - 1)
        } else {
            0
        };
        counts[b] += 1;
        hits[b] += ok as usize;
    }
    let bins = (0..num_bins)
        .map(|b| Bin {
            lo: lo + width * b as f64,
            hi: if b + 1 == num_bins { hi } else { lo + width * (b + 1) as f64 },
            count: counts[b],
            correction_rate: (counts[b] > 0).then(|| hits[b] as f64 / counts[b] as f64),
        })
        .collect();
    let flags: Vec<f64> = corrected.iter().map(|&c| c as u8 as f64).collect();
    Ok(CorrelationReport {
        bins,
        spearman: spearman(nbr_conf, &flags),
    })
}
