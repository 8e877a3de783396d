use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use nbprune::dataset::{compute_confidence, compute_small_loss_scores};
use nbprune::selectors::{select_indices, SelectionInputs};
use nbprune::verify::{generate_synthetic, SynthConfig};
use nbprune::{build_graph, AuxScores, Budget, ConfidenceMetric, Method, SelectorConfig};

use crate::fail::{parse_flag, CliResult, Context, Failure};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated dataset sizes.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "1000,2000,4000")]
    m_list: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    d: usize,
    /// Timed runs per (size, method); the median is reported.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 0.975)]
    tau: f64,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Comma-separated methods (default: all).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    methods: Vec<String>,
    /// Use the full-scan greedy instead of the lazy queue.
    #[arg(long)]
    eager: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn run(args: BenchArgs) -> CliResult<()> {
    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.methods
            .iter()
            .map(|m| parse_flag("--methods", m))
            .collect::<CliResult<_>>()?
    };
    if args.repeat == 0 {
        return Err(Failure::arg("--repeat must be at least 1"));
    }
    if args.classes == 0 {
        return Err(Failure::arg("--classes must be at least 1"));
    }
    let mut csv = String::from("m,method,seconds\n");
    for &m in &args.m_list {
        if m == 0 || m % args.classes != 0 {
            return Err(Failure::arg(format!(
                "--m-list: {m} is not a positive multiple of --classes {}",
                args.classes
            )));
        }
        let cfg = SynthConfig {
            num_classes: args.classes,
            points_per_class: m / args.classes,
            embedding_dim: args.d,
            seed: args.seed,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg).context("--d")?;
        let probs = ds.probabilities().expect("generated");
        let conf = compute_confidence(probs, ConfidenceMetric::MaxProb).context("bench")?;
        // every score baseline sorts the same way, so the loss stands in for all of them
        let scores: AuxScores = compute_small_loss_scores(probs, ds.noisy_labels().expect("generated")).context("bench")?;
        let graph = if methods.iter().any(|m| m.uses_graph()) {
            Some(build_graph(ds.embeddings(), args.tau).context("--tau")?)
        } else {
            None
        };
        for &method in &methods {
            let mut config = SelectorConfig::new(method, Budget::Ratio(args.ratio));
            config.seed = args.seed;
            config.lazy = !args.eager;
            let mut inputs = SelectionInputs::new(&ds).scores(&scores);
            if let Some(g) = &graph {
                config.tau = Some(args.tau);
                inputs = inputs.graph(g).confidence(&conf);
            }
            let mut times = Vec::with_capacity(args.repeat);
            for _ in 0..args.repeat {
                let start = Instant::now();
                select_indices(&config, &inputs).context("--ratio")?;
                times.push(start.elapsed().as_secs_f64());
            }
            csv.push_str(&format!("{m},{method},{:.6}\n", median(times)));
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Failure::arg(format!("--out: {}: {e}", path.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
