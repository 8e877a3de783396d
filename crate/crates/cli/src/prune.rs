use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args};
use nbprune::dataset::{compute_confidence, compute_small_loss_scores, load_labels, load_matrix, load_scores, write_lines};
use nbprune::selectors::{run_selector, tau_preset, SelectionInputs};
use nbprune::similarity::{load_graph, save_graph, DEFAULT_EDGE_CAP};
use nbprune::{
    AuxScoreKind, AuxScores, Budget, ConfidenceMetric, ConfidenceVector, Dataset, GainMode, GraphBuilder,
    Matrix, MatrixFormat, Method, NeighborGraph, SelectorConfig, Utility,
};
use serde_json::json;

use crate::fail::{parse_flag, CliResult, Context, Failure};
use crate::manifest::{write_json, RunManifest};

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("budget").required(true).args(["size", "ratio"])))]
pub struct PruneArgs {
    /// Embedding matrix (binary, or CSV when the name ends in .csv).
    #[arg(long, value_name = "PATH")]
    embeddings: PathBuf,
    #[arg(long, value_name = "NAME")]
    method: String,
    /// Number of examples to keep.
    #[arg(long, value_name = "N")]
    size: Option<usize>,
    /// Fraction of examples to keep, rounded half up.
    #[arg(long, value_name = "R")]
    ratio: Option<f64>,
    /// Class-probability matrix.
    #[arg(long, value_name = "PATH")]
    probs: Option<PathBuf>,
    /// Noisy labels, one per line.
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,
    /// Ground-truth labels, used only for the report's noise ratio.
    #[arg(long, value_name = "PATH")]
    true_labels: Option<PathBuf>,
    /// Per-example scores for score-ranking baselines.
    #[arg(long, value_name = "PATH")]
    scores: Option<PathBuf>,
    /// Per-example confidences, for --confidence-metric external.
    #[arg(long, value_name = "PATH")]
    confidence: Option<PathBuf>,
    /// Similarity threshold.
    #[arg(long, value_name = "F", conflicts_with = "preset")]
    tau: Option<f64>,
    /// Named threshold: cifar10n, cifar100n or clothing1m.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long, value_name = "NAME", default_value = "max_prob")]
    confidence_metric: String,
    #[arg(long, value_name = "NAME", default_value = "tanh")]
    utility: String,
    /// paper or exact.
    #[arg(long, value_name = "NAME", default_value = "paper")]
    gain_mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Rescan every candidate at each step instead of using the lazy queue.
    #[arg(long)]
    eager: bool,
    /// Reuse (or create) a neighbor-graph cache file.
    #[arg(long, value_name = "PATH")]
    graph_cache: Option<PathBuf>,
    /// Refuse to build graphs with more stored edges than this.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_EDGE_CAP)]
    max_edges: u64,
    /// Number of classes, when labels do not mention the last one.
    #[arg(long, value_name = "N")]
    classes: Option<usize>,
}

fn load_matrix_flag(flag: &str, path: &Path, manifest: &mut RunManifest) -> CliResult<Matrix> {
    let m = load_matrix(path, MatrixFormat::from_path(path)).context(flag)?;
    manifest.add_input(flag, path)?;
    Ok(m)
}

fn load_labels_flag(flag: &str, path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<usize>> {
    let l = load_labels(path).context(flag)?;
    manifest.add_input(flag, path)?;
    Ok(l)
}

fn load_scores_flag(flag: &str, path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<f64>> {
    let s = load_scores(path).context(flag)?;
    manifest.add_input(flag, path)?;
    Ok(s)
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, method: Method) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Failure::arg(format!("{flag} is required for method {method}")))
}

fn score_kind(method: Method) -> Option<AuxScoreKind> {
    match method {
        Method::SmallLoss => Some(AuxScoreKind::Loss),
        Method::Forgetting => Some(AuxScoreKind::ForgettingEvents),
        Method::Grand => Some(AuxScoreKind::GradNorm),
        Method::Ssp => Some(AuxScoreKind::SspPrototypicality),
        _ => None,
    }
}

fn resolve_tau(args: &PruneArgs, method: Method) -> CliResult<Option<f64>> {
    let tau = match (&args.tau, &args.preset) {
        (Some(t), _) => Some(*t),
        (None, Some(name)) => Some(tau_preset(name).ok_or_else(|| {
            Failure::arg(format!(
                "--preset: unknown preset {name:?} (expected cifar10n, cifar100n or clothing1m)"
            ))
        })?),
        (None, None) => None,
    };
    if method.uses_graph() && tau.is_none() {
        return Err(Failure::arg(format!("--tau (or --preset) is required for method {method}")));
    }
    Ok(if method.uses_graph() { tau } else { None })
}

fn obtain_graph(args: &PruneArgs, embeddings: &Matrix, tau: f64) -> CliResult<NeighborGraph> {
    if let Some(cache) = &args.graph_cache {
        if cache.exists() {
            let g = load_graph(cache).context("--graph-cache")?;
            if g.len() == embeddings.rows() && g.tau() == tau {
                return Ok(g);
            }
        }
    }
    let g = GraphBuilder::default()
        .edge_cap(args.max_edges)
        .build(embeddings, tau)
        .context("--tau")?;
    if let Some(cache) = &args.graph_cache {
        save_graph(cache, &g).context("--graph-cache")?;
    }
    Ok(g)
}

fn confidence_for(
    args: &PruneArgs,
    method: Method,
    metric: ConfidenceMetric,
    probs: Option<&Matrix>,
    manifest: &mut RunManifest,
) -> CliResult<ConfidenceVector> {
    if metric == ConfidenceMetric::External {
        let path = require(&args.confidence, "--confidence", method)?;
        let values = load_scores_flag("--confidence", path, manifest)?;
        return ConfidenceVector::external(values).context("--confidence");
    }
    let probs = probs.ok_or_else(|| {
        Failure::arg(format!(
            "--probs is required for method {method} with --confidence-metric {}",
            args.confidence_metric
        ))
    })?;
    compute_confidence(probs, metric).context("--probs")
}

pub fn run(args: PruneArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("prune");
    let method: Method = parse_flag("--method", &args.method)?;
    let metric: ConfidenceMetric = parse_flag("--confidence-metric", &args.confidence_metric)?;
    let utility: Utility = parse_flag("--utility", &args.utility)?;
    let gain_mode: GainMode = parse_flag("--gain-mode", &args.gain_mode)?;
    let budget = match (args.size, args.ratio) {
        (Some(n), _) => Budget::Size(n),
        (_, Some(r)) => Budget::Ratio(r),
        _ => unreachable!("clap enforces the budget group"),
    };
    let tau = resolve_tau(&args, method)?;

    let embeddings = load_matrix_flag("--embeddings", &args.embeddings, &mut manifest)?;
    let probs = match &args.probs {
        Some(p) => Some(load_matrix_flag("--probs", p, &mut manifest)?),
        None => None,
    };
    let labels = match &args.labels {
        Some(p) => Some(load_labels_flag("--labels", p, &mut manifest)?),
        None => None,
    };
    let truth = match &args.true_labels {
        Some(p) => Some(load_labels_flag("--true-labels", p, &mut manifest)?),
        None => None,
    };
    if matches!(method, Method::Prune4relBalanced | Method::Moderate) {
        require(&labels, "--labels", method)?;
    }
    if method == Method::Margin {
        require(&probs, "--probs", method)?;
    }
    let dataset = Dataset::new(embeddings, labels, args.classes, probs, truth).context("inputs")?;
    let m = dataset.len();
    let s = budget
        .resolve(m)
        .context(if args.size.is_some() { "--size" } else { "--ratio" })?;

    let scores = match score_kind(method) {
        None => None,
        Some(kind) => Some(match &args.scores {
            Some(path) => {
                let values = load_scores_flag("--scores", path, &mut manifest)?;
                AuxScores::new(values, kind).context("--scores")?
            }
            None if method == Method::SmallLoss => {
                let (Some(p), Some(l)) = (dataset.probabilities(), dataset.noisy_labels()) else {
                    return Err(Failure::arg(
                        "--scores (or both --probs and --labels) is required for method small_loss",
                    ));
                };
                compute_small_loss_scores(p, l).context("--probs")?
            }
            None => return Err(Failure::arg(format!("--scores is required for method {method}"))),
        }),
    };
    if let Some(sc) = &scores {
        if sc.len() != m {
            return Err(Failure::format(format!("--scores: {} values for {m} examples", sc.len())));
        }
    }

    let mut graph_build_s = 0.0;
    let (graph, confidence) = match tau {
        Some(t) => {
            let confidence = confidence_for(&args, method, metric, dataset.probabilities(), &mut manifest)?;
            if confidence.len() != m {
                return Err(Failure::format(format!(
                    "confidence: {} values for {m} examples",
                    confidence.len()
                )));
            }
            let start = Instant::now();
            let g = obtain_graph(&args, dataset.embeddings(), t)?;
            graph_build_s = start.elapsed().as_secs_f64();
            (Some(g), Some(confidence))
        }
        None => (None, None),
    };

    let mut config = SelectorConfig::new(method, Budget::Size(s));
    config.tau = tau;
    config.utility = utility;
    config.gain_mode = gain_mode;
    config.lazy = !args.eager;
    config.seed = args.seed;

    let mut inputs = SelectionInputs::new(&dataset);
    if let (Some(g), Some(c)) = (&graph, &confidence) {
        inputs = inputs.graph(g).confidence(c);
    }
    if let Some(sc) = &scores {
        inputs = inputs.scores(sc);
    }
    let mut report = run_selector(&config, &inputs).context("selection")?;
    report.timings.graph_build_s = graph_build_s;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::arg(format!("--out: {}: {e}", args.out.display())))?;
    let selected_path = args.out.join("selected.txt");
    let report_path = args.out.join("report.json");
    let manifest_path = args.out.join("manifest.json");
    write_lines(&selected_path, &report.selected).context("--out")?;
    let mut report_json = report.to_json();
    report_json["budget"] = json!({ "requested": budget, "resolved": s });
    if let Some(c) = &confidence {
        report_json["config"]["confidence_metric"] = json!(c.metric());
    }
    write_json(&report_path, &report_json)?;

    manifest.config = report_json["config"].clone();
    manifest.timings = json!(report.timings);
    manifest.outputs = vec![selected_path, report_path, manifest_path.clone()];
    write_json(&manifest_path, &manifest)
}
