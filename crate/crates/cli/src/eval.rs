use std::path::PathBuf;

use clap::Args;
use nbprune::dataset::load_labels;
use nbprune::selectors::{class_counts, noise_ratio};
use serde_json::json;

use crate::fail::{CliResult, Context, Failure};
use crate::manifest::write_json;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Selected indices, one per line.
    #[arg(long, value_name = "PATH")]
    selected: PathBuf,
    #[arg(long, value_name = "PATH")]
    noisy_labels: PathBuf,
    #[arg(long, value_name = "PATH")]
    true_labels: Option<PathBuf>,
    /// Number of classes, when labels do not mention the last one.
    #[arg(long, value_name = "N")]
    classes: Option<usize>,
    /// Write the JSON here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> CliResult<()> {
    let selected = load_labels(&args.selected).context("--selected")?;
    let noisy = load_labels(&args.noisy_labels).context("--noisy-labels")?;
    let truth = match &args.true_labels {
        Some(p) => Some(load_labels(p).context("--true-labels")?),
        None => None,
    };
    let m = noisy.len();
    if let Some(t) = &truth {
        if t.len() != m {
            return Err(Failure::format(format!(
                "--true-labels: {} labels but --noisy-labels has {m}",
                t.len()
            )));
        }
    }
    let mut seen = vec![false; m];
    for (line, &i) in selected.iter().enumerate() {
        if i >= m {
            return Err(Failure::format(format!(
                "--selected: line {}: index {i} is out of range for {m} examples",
                line + 1
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Failure::format(format!("--selected: line {}: index {i} repeated", line + 1)));
        }
    }
    let inferred = noisy
        .iter()
        .chain(truth.iter().flatten())
        .map(|&l| l + 1)
        .max()
        .unwrap_or(0);
    let classes = args.classes.unwrap_or(inferred);
    if classes < inferred {
        return Err(Failure::format(format!(
            "--noisy-labels: label {} is out of range for --classes {classes}",
            inferred - 1
        )));
    }
    let out = json!({
        "selected_count": selected.len(),
        "per_class_counts": class_counts(&selected, &noisy, classes),
        "noise_ratio": truth.as_ref().and_then(|t| noise_ratio(&selected, &noisy, t)),
    });
    match &args.out {
        Some(path) => write_json(path, &out),
        None => {
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
            Ok(())
        }
    }
}
