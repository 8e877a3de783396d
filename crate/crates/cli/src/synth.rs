use std::path::PathBuf;

use clap::{Args, ValueEnum};
use nbprune::dataset::{write_lines, write_matrix};
use nbprune::verify::{generate_synthetic, BetaParams, NoiseModel, SynthConfig};
use nbprune::MatrixFormat;
use serde_json::json;

use crate::fail::{CliResult, Context, Failure};
use crate::manifest::{write_json, RunManifest};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    Asymmetric,
    Symmetric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Bin,
    Csv,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Within-class concentration; larger is tighter.
    #[arg(long, default_value_t = 20.0)]
    concentration: f64,
    /// Between-class separation; 0 puts every center on one direction.
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    /// Fraction of each class whose label is flipped.
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, value_enum, default_value = "asymmetric")]
    noise_model: NoiseArg,
    /// Mean of the clean-example confidence distribution.
    #[arg(long, default_value_t = 0.8)]
    clean_mean: f64,
    /// Mean of the mislabeled-example confidence distribution.
    #[arg(long, default_value_t = 0.3)]
    noisy_mean: f64,
    #[arg(long, default_value_t = 10.0)]
    confidence_concentration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "bin")]
    format: FormatArg,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        num_classes: args.classes,
        points_per_class: args.per_class,
        embedding_dim: args.dim,
        within_class_concentration: args.concentration,
        between_class_separation: args.separation,
        noise_rate: args.noise,
        noise_model: match args.noise_model {
            NoiseArg::Asymmetric => NoiseModel::AsymmetricNextClass,
            NoiseArg::Symmetric => NoiseModel::Symmetric,
        },
        clean_confidence: BetaParams {
            mean: args.clean_mean,
            concentration: args.confidence_concentration,
        },
        noisy_confidence: BetaParams {
            mean: args.noisy_mean,
            concentration: args.confidence_concentration,
        },
        seed: args.seed,
    };
    let ds = generate_synthetic(&cfg).context("synth")?;
    let (format, ext) = match args.format {
        FormatArg::Bin => (MatrixFormat::Binary, "bin"),
        FormatArg::Csv => (MatrixFormat::Csv, "csv"),
    };
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::arg(format!("--out: {}: {e}", args.out.display())))?;
    let emb = args.out.join(format!("embeddings.{ext}"));
    let probs = args.out.join(format!("probs.{ext}"));
    let labels = args.out.join("labels.txt");
    let truth = args.out.join("true_labels.txt");
    let manifest_path = args.out.join("manifest.json");
    write_matrix(&emb, format, ds.embeddings()).context("--out")?;
    write_matrix(&probs, format, ds.probabilities().expect("generated")).context("--out")?;
    write_lines(&labels, ds.noisy_labels().expect("generated")).context("--out")?;
    write_lines(&truth, ds.ground_truth_labels().expect("generated")).context("--out")?;

    let flips = ds.noisy_indices().expect("generated").len();
    let mut manifest = RunManifest::new("synth");
    manifest.config = json!({ "synth": cfg, "examples": ds.len(), "flipped": flips });
    manifest.outputs = vec![emb, probs, labels, truth, manifest_path.clone()];
    write_json(&manifest_path, &manifest)?;
    println!("{} examples, {flips} flipped labels", ds.len());
    Ok(())
}
