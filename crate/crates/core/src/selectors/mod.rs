//! Subset selection: the neighborhood-confidence greedy, its class-balanced
//! variant, and the baseline selectors, all behind one configuration type.

pub mod baselines;
pub mod greedy;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{AuxScores, ConfidenceVector, Dataset};
use crate::error::{Error, Result};
use crate::objective::{objective_of, GainMode, Utility};
use crate::similarity::NeighborGraph;

pub use baselines::{
    kcenter_greedy_from, rank_by, select_forgetting, select_grand, select_kcenter_greedy,
    select_margin, select_moderate, select_small_loss, select_ssp, select_uniform, Direction,
};
pub use greedy::{greedy, greedy_balanced, GreedyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Prune4rel,
    Prune4relBalanced,
    Uniform,
    SmallLoss,
    Margin,
    KcenterGreedy,
    Forgetting,
    Grand,
    Moderate,
    Ssp,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Prune4rel,
        Method::Prune4relBalanced,
        Method::Uniform,
        Method::SmallLoss,
        Method::Margin,
        Method::KcenterGreedy,
        Method::Forgetting,
        Method::Grand,
        Method::Moderate,
        Method::Ssp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Prune4rel => "prune4rel",
            Method::Prune4relBalanced => "prune4rel_balanced",
            Method::Uniform => "uniform",
            Method::SmallLoss => "small_loss",
            Method::Margin => "margin",
            Method::KcenterGreedy => "kcenter_greedy",
            Method::Forgetting => "forgetting",
            Method::Grand => "grand",
            Method::Moderate => "moderate",
            Method::Ssp => "ssp",
        }
    }

    /// Whether the method needs the similarity graph and confidences.
    pub fn uses_graph(self) -> bool {
        matches!(self, Method::Prune4rel | Method::Prune4relBalanced)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown method {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Subset size, either absolute or as a fraction of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Size(usize),
    Ratio(f64),
}

impl Budget {
    /// Resolves to a size in `1..=m`; ratios round half up.
    pub fn resolve(self, m: usize) -> Result<usize> {
        let s = match self {
            Budget::Size(s) => s,
            Budget::Ratio(r) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::Budget(format!("ratio {r} must lie in (0, 1]")));
                }
                (r * m as f64 + 0.5).floor() as usize
            }
        };
        if s == 0 {
            return Err(Error::Budget(format!("{self:?} resolves to an empty subset of {m} examples")));
        }
        if s > m {
            return Err(Error::Budget(format!("subset size {s} exceeds {m} examples")));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub method: Method,
    pub budget: Budget,
    pub tau: Option<f64>,
    pub utility: Utility,
    pub gain_mode: GainMode,
    pub lazy: bool,
    pub seed: u64,
    pub tie_break: TieBreak,
}

impl SelectorConfig {
    pub fn new(method: Method, budget: Budget) -> Self {
        Self {
            method,
            budget,
            tau: None,
            utility: Utility::Tanh,
            gain_mode: GainMode::PaperFaithful,
            lazy: true,
            seed: 0,
            tie_break: TieBreak::LowestIndex,
        }
    }

    pub fn greedy_options(&self) -> GreedyOptions {
        GreedyOptions {
            gain_mode: self.gain_mode,
            utility: self.utility,
            lazy: self.lazy,
        }
    }
}

/// Named thresholds tuned for specific benchmark datasets.
pub fn tau_preset(name: &str) -> Option<f64> {
    match name {
        "cifar10n" => Some(0.975),
        "cifar100n" | "webvision" | "imagenet_n" => Some(0.95),
        "clothing1m" => Some(0.8),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub graph_build_s: f64,
    pub selection_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub selected: Vec<usize>,
    /// Objective of the selected subset; present when a graph and
    /// confidences were available.
    pub objective_value: Option<f64>,
    pub per_class_counts: Vec<usize>,
    pub noise_ratio: Option<f64>,
    pub timings: Timings,
    pub config: SelectorConfig,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    selected_count: usize,
    objective_value: Option<f64>,
    per_class_counts: &'a [usize],
    noise_ratio: Option<f64>,
    timings: Timings,
    config: &'a SelectorConfig,
}

impl PruneReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ReportJson {
            selected_count: self.selected.len(),
            objective_value: self.objective_value,
            per_class_counts: &self.per_class_counts,
            noise_ratio: self.noise_ratio,
            timings: self.timings,
            config: &self.config,
        })
        .expect("report is always serializable")
    }
}

/// Selected count per class.
pub fn class_counts(selected: &[usize], labels: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &i in selected {
        counts[labels[i]] += 1;
    }
    counts
}

/// Fraction of selected examples whose noisy label disagrees with the
/// ground truth; `None` for an empty selection.
pub fn noise_ratio(selected: &[usize], noisy: &[usize], truth: &[usize]) -> Option<f64> {
    if selected.is_empty() {
        return None;
    }
    let wrong = selected.iter().filter(|&&i| noisy[i] != truth[i]).count();
    Some(wrong as f64 / selected.len() as f64)
}

/// Everything a selector may draw on; which parts are required depends on
/// the method.
#[derive(Debug, Clone, Copy)]
pub struct SelectionInputs<'a> {
    pub dataset: &'a Dataset,
    pub graph: Option<&'a NeighborGraph>,
    pub confidence: Option<&'a ConfidenceVector>,
    pub scores: Option<&'a AuxScores>,
}

impl<'a> SelectionInputs<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        Self {
            dataset,
            graph: None,
            confidence: None,
            scores: None,
        }
    }

    pub fn graph(mut self, graph: &'a NeighborGraph) -> Self {
        self.graph = Some(graph);
        self
    }

    pub fn confidence(mut self, confidence: &'a ConfidenceVector) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn scores(mut self, scores: &'a AuxScores) -> Self {
        self.scores = Some(scores);
        self
    }
}

fn graph_inputs<'a>(
    config: &SelectorConfig,
    inputs: &SelectionInputs<'a>,
) -> Result<(&'a NeighborGraph, &'a ConfidenceVector)> {
    let m = inputs.dataset.len();
    let graph = inputs
        .graph
        .ok_or_else(|| Error::InvalidArgument(format!("{} needs a neighbor graph", config.method)))?;
    let confidence = inputs
        .confidence
        .ok_or_else(|| Error::InvalidArgument(format!("{} needs confidences", config.method)))?;
    if graph.len() != m {
        return Err(Error::LengthMismatch {
            what: "graph".into(),
            expected: m,
            found: graph.len(),
        });
    }
    if confidence.len() != m {
        return Err(Error::LengthMismatch {
            what: "confidence".into(),
            expected: m,
            found: confidence.len(),
        });
    }
    match config.tau {
        Some(t) if t == graph.tau() => Ok((graph, confidence)),
        Some(t) => Err(Error::InvalidArgument(format!(
            "graph was built with tau={} but the configuration asks for {t}",
            graph.tau()
        ))),
        None => Err(Error::InvalidArgument(format!("{} needs tau", config.method))),
    }
}

fn required_scores<'a>(inputs: &SelectionInputs<'a>, method: Method) -> Result<&'a AuxScores> {
    inputs
        .scores
        .ok_or_else(|| Error::InvalidArgument(format!("{method} needs a score file")))
}

fn required_labels(dataset: &Dataset, method: Method) -> Result<&[usize]> {
    dataset
        .noisy_labels()
        .ok_or_else(|| Error::InvalidArgument(format!("{method} needs noisy labels")))
}

/// Index list chosen by `config.method`, in selection order.
pub fn select_indices(config: &SelectorConfig, inputs: &SelectionInputs<'_>) -> Result<Vec<usize>> {
    let dataset = inputs.dataset;
    let m = dataset.len();
    let s = config.budget.resolve(m)?;
    match config.method {
        Method::Prune4rel => {
            let (graph, conf) = graph_inputs(config, inputs)?;
            Ok(greedy(graph, conf.values(), s, config.greedy_options())?
                .selected()
                .to_vec())
        }
        Method::Prune4relBalanced => {
            let (graph, conf) = graph_inputs(config, inputs)?;
            let labels = required_labels(dataset, config.method)?;
            Ok(greedy_balanced(
                graph,
                conf.values(),
                labels,
                dataset.num_classes(),
                s,
                config.greedy_options(),
            )?
            .selected()
            .to_vec())
        }
        Method::Uniform => select_uniform(m, s, config.seed),
        Method::SmallLoss => select_small_loss(required_scores(inputs, config.method)?, m, s),
        Method::Grand => select_grand(required_scores(inputs, config.method)?, m, s),
        Method::Forgetting => select_forgetting(required_scores(inputs, config.method)?, m, s),
        Method::Ssp => select_ssp(required_scores(inputs, config.method)?, m, s),
        Method::Margin => {
            let probs = dataset
                .probabilities()
                .ok_or_else(|| Error::InvalidArgument("margin needs class probabilities".into()))?;
            select_margin(probs, s)
        }
        Method::KcenterGreedy => select_kcenter_greedy(dataset.embeddings(), s, config.seed),
        Method::Moderate => {
            let labels = required_labels(dataset, config.method)?;
            select_moderate(dataset.embeddings(), labels, dataset.num_classes(), s)
        }
    }
}

/// Runs the configured selector and summarizes the result.
pub fn run_selector(config: &SelectorConfig, inputs: &SelectionInputs<'_>) -> Result<PruneReport> {
    let start = Instant::now();
    let selected = select_indices(config, inputs)?;
    let selection_s = start.elapsed().as_secs_f64();
    Ok(summarize(config, inputs, selected, selection_s))
}

fn summarize(
    config: &SelectorConfig,
    inputs: &SelectionInputs<'_>,
    selected: Vec<usize>,
    selection_s: f64,
) -> PruneReport {
    let dataset = inputs.dataset;
    let objective_value = match (inputs.graph, inputs.confidence) {
        (Some(g), Some(c)) if g.len() == dataset.len() && c.len() == dataset.len() => {
            objective_of(g, c.values(), &selected, config.utility).ok()
        }
        _ => None,
    };
    let per_class_counts = dataset
        .noisy_labels()
        .map(|l| class_counts(&selected, l, dataset.num_classes()))
        .unwrap_or_default();
    let noise_ratio = match (dataset.noisy_labels(), dataset.ground_truth_labels()) {
        (Some(n), Some(t)) => noise_ratio(&selected, n, t),
        _ => None,
    };
    PruneReport {
        selected,
        objective_value,
        per_class_counts,
        noise_ratio,
        timings: Timings {
            graph_build_s: 0.0,
            selection_s,
        },
        config: config.clone(),
    }
}

fn check_graph_method(config: &SelectorConfig, expected: Method) -> Result<()> {
    if config.method != expected {
        return Err(Error::InvalidArgument(format!(
            "configuration names {} but {} was called",
            config.method, expected
        )));
    }
    Ok(())
}

/// Neighborhood-confidence greedy over the whole dataset.
pub fn select_prune4rel(
    dataset: &Dataset,
    graph: &NeighborGraph,
    confidence: &ConfidenceVector,
    config: &SelectorConfig,
) -> Result<PruneReport> {
    check_graph_method(config, Method::Prune4rel)?;
    run_selector(config, &SelectionInputs::new(dataset).graph(graph).confidence(confidence))
}

/// Class-balanced neighborhood-confidence greedy.
pub fn select_prune4rel_balanced(
    dataset: &Dataset,
    graph: &NeighborGraph,
    confidence: &ConfidenceVector,
    config: &SelectorConfig,
) -> Result<PruneReport> {
    check_graph_method(config, Method::Prune4relBalanced)?;
    run_selector(config, &SelectionInputs::new(dataset).graph(graph).confidence(confidence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Matrix;
    use crate::similarity::build_graph;

    #[test]
    fn budget_resolution() {
        assert_eq!(Budget::Ratio(0.2).resolve(10).unwrap(), 2);
        assert_eq!(Budget::Ratio(0.25).resolve(10).unwrap(), 3); // 2.5 rounds up
        assert_eq!(Budget::Ratio(1.0).resolve(7).unwrap(), 7);
        assert!(Budget::Ratio(0.01).resolve(10).is_err());
        assert!(Budget::Ratio(0.0).resolve(10).is_err());
        assert!(Budget::Ratio(1.5).resolve(10).is_err());
        assert!(Budget::Size(11).resolve(10).is_err());
        assert!(Budget::Size(0).resolve(10).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.name());
        }
        assert!("glister".parse::<Method>().is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(tau_preset("cifar10n"), Some(0.975));
        assert_eq!(tau_preset("cifar100n"), Some(0.95));
        assert_eq!(tau_preset("clothing1m"), Some(0.8));
        assert_eq!(tau_preset("mnist"), None);
    }

    #[test]
    fn report_json_keys() {
        let e = Matrix::from_rows(&[[1.0f32, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let ds = Dataset::new(e, Some(vec![0, 0, 1]), None, None, Some(vec![0, 1, 1])).unwrap();
        let g = build_graph(ds.embeddings(), 0.5).unwrap();
        let c = ConfidenceVector::external(vec![0.9, 0.8, 0.7]).unwrap();
        let mut cfg = SelectorConfig::new(Method::Prune4rel, Budget::Size(2));
        cfg.tau = Some(0.5);
        let r = select_prune4rel(&ds, &g, &c, &cfg).unwrap();
        assert_eq!(r.selected, vec![0, 2]);
        assert_eq!(r.per_class_counts, vec![1, 1]);
        assert_eq!(r.noise_ratio, Some(0.0));
        let j = r.to_json();
        let keys: Vec<&str> = j.as_object().unwrap().keys().map(String::as_str).collect();
        for k in ["selected_count", "objective_value", "per_class_counts", "noise_ratio", "timings", "config"] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(j["selected_count"], 2);
        assert!(j["timings"]["graph_build_s"].is_number());
        assert!(j["timings"]["selection_s"].is_number());
        let expected = 2.0 * 0.9f64.tanh() + 0.7f64.tanh();
        assert!((j["objective_value"].as_f64().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn tau_mismatch_and_missing_inputs() {
        let e = Matrix::from_rows(&[[1.0f32, 0.0], [0.0, 1.0]]).unwrap();
        let ds = Dataset::new(e, None, None, None, None).unwrap();
        let g = build_graph(ds.embeddings(), 0.5).unwrap();
        let c = ConfidenceVector::external(vec![0.9, 0.8]).unwrap();
        let mut cfg = SelectorConfig::new(Method::Prune4rel, Budget::Size(1));
        cfg.tau = Some(0.7);
        assert!(select_prune4rel(&ds, &g, &c, &cfg).is_err());
        cfg.tau = None;
        assert!(select_prune4rel(&ds, &g, &c, &cfg).is_err());
        let cfg = SelectorConfig::new(Method::Moderate, Budget::Size(1));
        assert!(run_selector(&cfg, &SelectionInputs::new(&ds)).is_err());
        let cfg = SelectorConfig::new(Method::Grand, Budget::Size(1));
        assert!(run_selector(&cfg, &SelectionInputs::new(&ds)).is_err());
    }

    #[test]
    fn noise_ratio_examples() {
        assert_eq!(noise_ratio(&[0, 1], &[0, 1, 1], &[0, 1, 0]), Some(0.0));
        assert_eq!(noise_ratio(&[2], &[0, 1, 1], &[0, 1, 0]), Some(1.0));
        assert_eq!(noise_ratio(&[], &[0], &[0]), None);
    }
}
