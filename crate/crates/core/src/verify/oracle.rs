//! Exhaustive optimum and randomized property checks for the greedy
//! selectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::objective::{GainMode, SelectionState, Utility};
use crate::selectors::baselines::rng_from_seed;
use crate::selectors::{greedy, greedy_balanced, rank_by, Direction, GreedyOptions};
use crate::similarity::{build_graph, NeighborGraph};

/// Largest number of subsets the exhaustive search will visit.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Violations smaller than this are float noise.
pub const PROPERTY_TOL: f64 = 1e-9;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Objective of `subset` by direct summation: for every example, add up
/// `weight * confidence` over the subset members adjacent to it.
pub fn objective_direct(
    graph: &NeighborGraph,
    confidence: &[f64],
    subset: &[usize],
    utility: Utility,
) -> f64 {
    (0..graph.len())
        .map(|i| {
            let c: f64 = subset
                .iter()
                .filter_map(|&j| graph.weight(i, j).map(|w| w as f64 * confidence[j]))
                .sum();
            utility.eval(c)
        })
        .sum()
}

/// Advances `combo` to the next size-k combination of `0..n` in
/// lexicographic order; false when exhausted.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Best size-`s` subset by exhaustive search; ties go to the
/// lexicographically smallest subset.
pub fn brute_force_optimum(
    graph: &NeighborGraph,
    confidence: &[f64],
    s: usize,
    utility: Utility,
) -> Result<(Vec<usize>, f64)> {
    let m = graph.len();
    if confidence.len() != m {
        return Err(Error::LengthMismatch {
            what: "confidence".into(),
            expected: m,
            found: confidence.len(),
        });
    }
    if s == 0 || s > m {
        return Err(Error::Budget(format!("subset size {s} must lie in 1..={m}")));
    }
    let count = binomial(m, s);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::Guard(format!(
            "{count} subsets of size {s} from {m} exceeds the exhaustive limit of {BRUTE_FORCE_LIMIT}"
        )));
    }

    // one task per leading element; each enumerates its own tail
    let best = (0..=m - s)
        .into_par_iter()
        .map(|first| {
            let mut tail: Vec<usize> = (first + 1..first + s).collect();
            let mut best: Option<(Vec<usize>, f64)> = None;
            loop {
                let mut subset = Vec::with_capacity(s);
                subset.push(first);
                subset.extend_from_slice(&tail);
                let v = objective_direct(graph, confidence, &subset, utility);
                if best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((subset, v));
                }
                if tail.is_empty() || !next_tail(&mut tail, first + 1, m) {
                    break;
                }
            }
            best.expect("at least one subset")
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("at least one leading element");
    Ok(best)
}

/// Next combination of the tail drawn from `lo..n`.
fn next_tail(tail: &mut [usize], lo: usize, n: usize) -> bool {
    let mut shifted: Vec<usize> = tail.iter().map(|&v| v - lo).collect();
    let more = next_combination(&mut shifted, n - lo);
    if more {
        for (t, s) in tail.iter_mut().zip(shifted) {
            *t = s + lo;
        }
    }
    more
}

/// A random instance for property checks.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub embeddings: Matrix,
    pub graph: NeighborGraph,
    pub confidence: Vec<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

/// Gaussian embeddings in `dim` dimensions, uniform confidences and labels.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    m: usize,
    dim: usize,
    tau: f64,
    num_classes: usize,
) -> Result<RandomInstance> {
    let mut data = Vec::with_capacity(m * dim);
    while data.len() < m * dim {
        let row: Vec<f32> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z as f32
            })
            .collect();
        if row.iter().any(|&v| v != 0.0) {
            data.extend(row);
        }
    }
    let embeddings = Matrix::new(m, dim, data)?;
    let graph = build_graph(&embeddings, tau)?;
    let confidence = (0..m).map(|_| rng.random::<f64>()).collect();
    let labels = (0..m).map(|_| rng.random_range(0..num_classes.max(1))).collect();
    Ok(RandomInstance {
        embeddings,
        graph,
        confidence,
        labels,
        num_classes: num_classes.max(1),
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest violation observed (0 when none).
    pub worst: f64,
    pub detail: String,
}

impl CheckSummary {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    fn record(&mut self, excess: f64) {
        self.trials += 1;
        if excess > 0.0 {
            self.violations += 1;
            self.worst = self.worst.max(excess);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.trials > 0
    }
}

const TAUS: [f64; 3] = [0.3, 0.7, 0.95];

/// Greedy with exact marginal gains reaches `(1 - 1/e)` of the exhaustive
/// optimum on random small instances.
pub fn check_approximation_bound(instances: usize, seed: u64) -> Result<CheckSummary> {
    let mut rng = rng_from_seed(seed);
    let mut out = CheckSummary::new("approximation_bound");
    let factor = 1.0 - (-1.0f64).exp();
    let mut min_ratio = f64::INFINITY;
    for k in 0..instances {
        let m = rng.random_range(2..=14);
        let s = rng.random_range(1..=m.min(7));
        let dim = rng.random_range(2..=4);
        let tau = TAUS[k % TAUS.len()];
        let inst = random_instance(&mut rng, m, dim, tau, 1)?;
        let opts = GreedyOptions {
            gain_mode: GainMode::ExactMarginal,
            utility: Utility::Tanh,
            lazy: false,
        };
        let state = greedy(&inst.graph, &inst.confidence, s, opts)?;
        let got = objective_direct(&inst.graph, &inst.confidence, state.selected(), Utility::Tanh);
        let (_, best) = brute_force_optimum(&inst.graph, &inst.confidence, s, Utility::Tanh)?;
        if best > 0.0 {
            min_ratio = min_ratio.min(got / best);
        }
        out.record(factor * best - PROPERTY_TOL - got);
    }
    out.detail = format!("min greedy/optimum ratio {min_ratio:.6}");
    Ok(out)
}

/// Random `S ⊂ S'` and `x ∉ S'`: adding `x` never lowers the objective, and
/// its marginal gain at `S` is at least its gain at `S'`.
pub fn check_monotone_submodular(probes: usize, seed: u64) -> Result<(CheckSummary, CheckSummary)> {
    let mut rng = rng_from_seed(seed);
    let mut mono = CheckSummary::new("monotonicity");
    let mut sub = CheckSummary::new("submodularity");
    let utilities = [Utility::Tanh, Utility::Log1p, Utility::Identity];
    for k in 0..probes {
        let m = rng.random_range(3..=30);
        let dim = rng.random_range(2..=4);
        let tau = TAUS[k % TAUS.len()];
        let utility = utilities[k % utilities.len()];
        let inst = random_instance(&mut rng, m, dim, tau, 1)?;
        let order: Vec<usize> = rand::seq::index::sample(&mut rng, m, m).into_vec();
        let big_len = rng.random_range(0..m);
        let small_len = rng.random_range(0..=big_len);
        let x = order[big_len];
        let small = &order[..small_len];
        let big = &order[..big_len];

        let s_small = SelectionState::with_selection(&inst.graph, &inst.confidence, small)?;
        let s_big = SelectionState::with_selection(&inst.graph, &inst.confidence, big)?;

        let mut with_x = big.to_vec();
        with_x.push(x);
        let before = objective_direct(&inst.graph, &inst.confidence, big, utility);
        let after = objective_direct(&inst.graph, &inst.confidence, &with_x, utility);
        mono.record(before - after - PROPERTY_TOL);

        let g_small = s_small.marginal_gain_exact(x, utility)?;
        let g_big = s_big.marginal_gain_exact(x, utility)?;
        sub.record(g_big - g_small - PROPERTY_TOL);
    }
    Ok((mono, sub))
}

/// Lazy and eager greedy select identical sequences, in both gain modes.
pub fn check_lazy_matches_eager(instances: usize, max_m: usize, seed: u64) -> Result<CheckSummary> {
    let mut rng = rng_from_seed(seed);
    let mut out = CheckSummary::new("lazy_equals_eager");
    let top = (max_m.max(2) as f64).ln();
    for k in 0..instances {
        // log-uniform sizes: mostly small instances, a few at the cap
        let m = (rng.random_range(2f64.ln()..=top).exp().round() as usize).clamp(2, max_m.max(2));
        let dim = rng.random_range(4..=32);
        let tau = [0.5, 0.8, 0.95][k % 3];
        let inst = if rng.random_bool(0.3) {
            tied_instance(&mut rng, m, dim, tau)?
        } else {
            random_instance(&mut rng, m, dim, tau, 1)?
        };
        let s = rng.random_range(1..=m);
        for gain_mode in [GainMode::PaperFaithful, GainMode::ExactMarginal] {
            let opts = |lazy| GreedyOptions {
                gain_mode,
                utility: Utility::Tanh,
                lazy,
            };
            let eager = greedy(&inst.graph, &inst.confidence, s, opts(false))?;
            let lazy = greedy(&inst.graph, &inst.confidence, s, opts(true))?;
            out.record(if eager.selected() == lazy.selected() { 0.0 } else { 1.0 });
        }
    }
    Ok(out)
}

/// Every embedding appears twice and confidences take four values, so many
/// candidates tie exactly.
fn tied_instance(rng: &mut ChaCha8Rng, m: usize, dim: usize, tau: f64) -> Result<RandomInstance> {
    let base = random_instance(rng, m.div_ceil(2), dim, tau, 1)?;
    let order: Vec<usize> = (0..m).map(|i| i / 2).collect();
    let embeddings = base.embeddings.select_rows(&order);
    let graph = build_graph(&embeddings, tau)?;
    let confidence = (0..m).map(|_| rng.random_range(1..=4) as f64 / 4.0).collect();
    Ok(RandomInstance {
        embeddings,
        graph,
        confidence,
        labels: vec![0; m],
        num_classes: 1,
    })
}

/// With only self edges the greedy reduces to top-`s` by confidence, and
/// the first pick is always the most confident example.
pub fn check_degenerate(instances: usize, seed: u64) -> Result<CheckSummary> {
    let mut rng = rng_from_seed(seed);
    let mut out = CheckSummary::new("degenerate_equivalences");
    for _ in 0..instances {
        let m = rng.random_range(2..=200);
        let s = rng.random_range(1..=m);
        let dim = rng.random_range(2..=16);
        let inst = random_instance(&mut rng, m, dim, 1.0, 1)?;
        let top = rank_by(&inst.confidence, s, Direction::Descending)?;
        let picked = greedy(&inst.graph, &inst.confidence, s, GreedyOptions::default())?;
        let mut a = top.clone();
        let mut b = picked.selected().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        out.record(if a == b { 0.0 } else { 1.0 });

        let tau = rng.random_range(0.0..0.99);
        let inst = random_instance(&mut rng, m, dim, tau, 1)?;
        let first = rank_by(&inst.confidence, 1, Direction::Descending)?[0];
        let picked = greedy(&inst.graph, &inst.confidence, 1, GreedyOptions::default())?;
        out.record(if picked.selected() == [first] { 0.0 } else { 1.0 });
    }
    Ok(out)
}

/// Balanced greedy keeps class counts within one of each other when every
/// class can supply its share, and stops at exactly `s`.
pub fn check_class_balance(instances: usize, seed: u64) -> Result<CheckSummary> {
    let mut rng = rng_from_seed(seed);
    let mut out = CheckSummary::new("class_balance");
    for _ in 0..instances {
        let c = rng.random_range(2..=6);
        let m = rng.random_range(c * 2..=c * 40);
        let dim = rng.random_range(2..=8);
        let tau = rng.random_range(0.3..0.99);
        let mut inst = random_instance(&mut rng, m, dim, tau, c)?;
        // make sure every class is present
        for (j, l) in inst.labels.iter_mut().take(c).enumerate() {
            *l = j;
        }
        let mut sizes = vec![0usize; c];
        for &l in &inst.labels {
            sizes[l] += 1;
        }
        let smallest = *sizes.iter().min().unwrap();
        let s = rng.random_range(1..=m);
        let lazy = rng.random_bool(0.5);
        let state = greedy_balanced(
            &inst.graph,
            &inst.confidence,
            &inst.labels,
            c,
            s,
            GreedyOptions {
                lazy,
                ..Default::default()
            },
        )?;
        let mut counts = vec![0usize; c];
        for &i in state.selected() {
            counts[inst.labels[i]] += 1;
        }
        let mut bad = state.selected().len() != s;
        if smallest >= s.div_ceil(c) {
            let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
            bad |= spread > 1;
        }
        out.record(if bad { 1.0 } else { 0.0 });
    }
    Ok(out)
}
