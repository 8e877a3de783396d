use std::path::PathBuf;

use clap::{Args, ValueEnum};
use nbprune::verify::{
    check_approximation_bound, check_class_balance, check_degenerate, check_lazy_matches_eager,
    check_monotone_submodular, correlation_study, generate_synthetic, noise_ratio_curve, trend_synth_config,
    CheckSummary, SynthConfig, DEFAULT_BINS, TREND_TAU,
};
use serde_json::json;

use crate::fail::{CliResult, Context, Failure};
use crate::manifest::{write_json, RunManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Reduced trial counts for a fast smoke check.
    Quick,
    /// Full trial counts.
    Exhaustive,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "exhaustive")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the JSON summary and trend CSVs.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

struct Counts {
    approx: usize,
    probes: usize,
    lazy: usize,
    lazy_max_m: usize,
    degenerate: usize,
    balance: usize,
    per_class: usize,
}

const TREND_RATIOS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

fn report(summary: &CheckSummary) {
    println!(
        "{} {}: trials={} violations={} worst={:e} {}",
        if summary.passed() { "PASS" } else { "FAIL" },
        summary.name,
        summary.trials,
        summary.violations,
        summary.worst,
        summary.detail
    );
}

pub fn run(args: VerifyArgs) -> CliResult<()> {
    let counts = match args.preset {
        Preset::Exhaustive => Counts {
            approx: 200,
            probes: 500,
            lazy: 100,
            lazy_max_m: 2000,
            degenerate: 100,
            balance: 50,
            per_class: 500,
        },
        Preset::Quick => Counts {
            approx: 30,
            probes: 100,
            lazy: 10,
            lazy_max_m: 300,
            degenerate: 20,
            balance: 10,
            per_class: 100,
        },
    };
    let seed = args.seed;
    let mut checks = vec![check_approximation_bound(counts.approx, seed).context("verify")?];
    let (mono, sub) = check_monotone_submodular(counts.probes, seed).context("verify")?;
    checks.push(mono);
    checks.push(sub);
    checks.push(check_lazy_matches_eager(counts.lazy, counts.lazy_max_m, seed).context("verify")?);
    checks.push(check_degenerate(counts.degenerate, seed).context("verify")?);
    checks.push(check_class_balance(counts.balance, seed).context("verify")?);

    let synth = SynthConfig {
        points_per_class: counts.per_class,
        ..trend_synth_config(seed)
    };
    let ds = generate_synthetic(&synth).context("verify")?;
    let study = correlation_study(&ds, TREND_TAU, 0.2, DEFAULT_BINS).context("verify")?;
    let mut corr = CheckSummary {
        name: "correlation_trend".into(),
        trials: 1,
        detail: format!(
            "spearman={:.4} mean_nbr_conf corrected={:.4} uncorrected={:.4}",
            study.report.spearman, study.mean_nbr_conf_corrected, study.mean_nbr_conf_uncorrected
        ),
        ..Default::default()
    };
    if !(study.report.spearman > 0.5
        && study.report.non_decreasing_prefix(10)
        && study.mean_nbr_conf_corrected > study.mean_nbr_conf_uncorrected)
    {
        corr.violations = 1;
    }
    checks.push(corr);

    let curve = noise_ratio_curve(&ds, TREND_TAU, &TREND_RATIOS).context("verify")?;
    let mut noise = CheckSummary {
        name: "noise_ratio_trend".into(),
        trials: 1,
        detail: curve
            .iter()
            .map(|(r, n)| format!("{r}:{n:.4}"))
            .collect::<Vec<_>>()
            .join(" "),
        ..Default::default()
    };
    let rising = curve.windows(2).all(|w| w[1].1 >= w[0].1);
    if !(rising && curve[0].1 < synth.noise_rate) {
        noise.violations = 1;
    }
    checks.push(noise);

    for c in &checks {
        report(c);
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::arg(format!("--out: {}: {e}", dir.display())))?;
        let csv = dir.join("correlation.csv");
        std::fs::write(&csv, study.report.to_csv())
            .map_err(|e| Failure::arg(format!("--out: {}: {e}", csv.display())))?;
        let curve_csv = dir.join("noise_ratio.csv");
        let mut text = String::from("ratio,noise_ratio\n");
        for (r, n) in &curve {
            text.push_str(&format!("{r},{n}\n"));
        }
        std::fs::write(&curve_csv, text)
            .map_err(|e| Failure::arg(format!("--out: {}: {e}", curve_csv.display())))?;
        let summary = dir.join("verify.json");
        write_json(&summary, &json!({ "checks": checks, "correlation": study }))?;
        let mut manifest = RunManifest::new("verify");
        manifest.config = json!({ "preset": format!("{:?}", args.preset).to_lowercase(), "seed": seed });
        let manifest_path = dir.join("manifest.json");
        manifest.outputs = vec![csv, curve_csv, summary, manifest_path.clone()];
        write_json(&manifest_path, &manifest)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::check(format!("failed checks: {}", failed.join(", "))))
    }
}
