//! Reference selectors the greedy method is compared against.

use std::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{top_two, validate_probabilities, AuxScores, Matrix};
use crate::error::{Error, Result};

/// Rows per parallel chunk in the k-center distance update.
const KCENTER_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascending,
    Descending,
}

pub(crate) fn check_budget(m: usize, s: usize) -> Result<()> {
    if s > m {
        return Err(Error::Budget(format!("subset size {s} exceeds {m} examples")));
    }
    Ok(())
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn select_uniform(m: usize, s: usize, seed: u64) -> Result<Vec<usize>> {
    check_budget(m, s)?;
    let mut rng = rng_from_seed(seed);
    Ok(index::sample(&mut rng, m, s).into_vec())
}

/// First `s` indices after a stable sort of `values`; equal values keep
/// ascending index order.
pub fn rank_by(values: &[f64], s: usize, direction: Direction) -> Result<Vec<usize>> {
    check_budget(values.len(), s)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        match direction {
            Direction::Ascending => ord,
            Direction::Descending => ord.reverse(),
        }
    });
    order.truncate(s);
    Ok(order)
}

fn ranked_scores(scores: &AuxScores, m: usize, s: usize, direction: Direction) -> Result<Vec<usize>> {
    if scores.len() != m {
        return Err(Error::LengthMismatch {
            what: "scores".into(),
            expected: m,
            found: scores.len(),
        });
    }
    rank_by(&scores.values, s, direction)
}

/// Lowest loss first.
pub fn select_small_loss(scores: &AuxScores, m: usize, s: usize) -> Result<Vec<usize>> {
    ranked_scores(scores, m, s, Direction::Ascending)
}

/// Largest gradient norm first.
pub fn select_grand(scores: &AuxScores, m: usize, s: usize) -> Result<Vec<usize>> {
    ranked_scores(scores, m, s, Direction::Descending)
}

/// Most forgetting events first.
pub fn select_forgetting(scores: &AuxScores, m: usize, s: usize) -> Result<Vec<usize>> {
    ranked_scores(scores, m, s, Direction::Descending)
}

/// Most prototypical first, from externally computed scores.
pub fn select_ssp(scores: &AuxScores, m: usize, s: usize) -> Result<Vec<usize>> {
    ranked_scores(scores, m, s, Direction::Descending)
}

/// Smallest gap between the two most probable classes first.
pub fn select_margin(probabilities: &Matrix, s: usize) -> Result<Vec<usize>> {
    if probabilities.cols() < 2 {
        return Err(Error::InvalidArgument("margin selection needs at least two classes".into()));
    }
    validate_probabilities(probabilities)?;
    let margins: Vec<f64> = probabilities
        .iter_rows()
        .map(|r| {
            let (a, b) = top_two(r);
            a - b
        })
        .collect();
    rank_by(&margins, s, Direction::Ascending)
}

fn sq_dist(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum()
}

/// Farthest-point traversal starting from a seeded random center.
pub fn select_kcenter_greedy(embeddings: &Matrix, s: usize, seed: u64) -> Result<Vec<usize>> {
    let m = embeddings.rows();
    check_budget(m, s)?;
    if s == 0 {
        return Ok(Vec::new());
    }
    let first = rng_from_seed(seed).random_range(0..m);
    kcenter_greedy_from(embeddings, s, first)
}

/// Farthest-point traversal from a given first center. Each step adds the
/// point farthest from its nearest chosen center (lowest index on ties).
pub fn kcenter_greedy_from(embeddings: &Matrix, s: usize, first: usize) -> Result<Vec<usize>> {
    let m = embeddings.rows();
    check_budget(m, s)?;
    if first >= m {
        return Err(Error::IndexOutOfRange { index: first, len: m });
    }
    if s == 0 {
        return Ok(Vec::new());
    }
    let mut min_dist = vec![f64::INFINITY; m];
    let mut chosen = vec![false; m];
    let mut centers = Vec::with_capacity(s);
    let mut next = first;
    loop {
        centers.push(next);
        chosen[next] = true;
        if centers.len() == s {
            return Ok(centers);
        }
        let c = embeddings.row(next);
        let best = min_dist
            .par_chunks_mut(KCENTER_CHUNK)
            .enumerate()
            .map(|(k, chunk)| {
                let base = k * KCENTER_CHUNK;
                let mut best: Option<(f64, usize)> = None;
                for (off, d) in chunk.iter_mut().enumerate() {
                    let i = base + off;
                    let nd = sq_dist(embeddings.row(i), c);
                    if nd < *d {
                        *d = nd;
                    }
                    if !chosen[i] && best.is_none_or(|(bd, _)| *d > bd) {
                        best = Some((*d, i));
                    }
                }
                best
            })
            .reduce(
                || None,
                |a, b| match (a, b) {
                    (Some(x), Some(y)) => Some(if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x }),
                    (x, None) => x,
                    (None, y) => y,
                },
            );
        next = best.expect("fewer than m centers chosen").1;
    }
}

/// Examples whose distance to their class centroid is closest to the class
/// median distance come first.
pub fn select_moderate(
    embeddings: &Matrix,
    noisy_labels: &[usize],
    num_classes: usize,
    s: usize,
) -> Result<Vec<usize>> {
    let m = embeddings.rows();
    check_budget(m, s)?;
    if noisy_labels.len() != m {
        return Err(Error::LengthMismatch {
            what: "noisy labels".into(),
            expected: m,
            found: noisy_labels.len(),
        });
    }
    let d = embeddings.cols();
    let mut sums = vec![vec![0.0f64; d]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (i, &y) in noisy_labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange { index: i, label: y, num_classes });
        }
        counts[y] += 1;
        for (acc, &x) in sums[y].iter_mut().zip(embeddings.row(i)) {
            *acc += x as f64;
        }
    }
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(empty));
    }
    let centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| s.into_iter().map(|v| v / n as f64).collect())
        .collect();

    let dist: Vec<f64> = (0..m)
        .map(|i| {
            embeddings
                .row(i)
                .iter()
                .zip(&centroids[noisy_labels[i]])
                .map(|(&x, &c)| (x as f64 - c).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();

    let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); num_classes];
    for (i, &y) in noisy_labels.iter().enumerate() {
        per_class[y].push(dist[i]);
    }
    let medians: Vec<f64> = per_class
        .into_iter()
        .map(|mut v| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        })
        .collect();

    let deviation: Vec<f64> = (0..m)
        .map(|i| (dist[i] - medians[noisy_labels[i]]).abs())
        .collect();
    rank_by(&deviation, s, Direction::Ascending)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AuxScoreKind;

    fn scores(v: &[f64]) -> AuxScores {
        AuxScores::new(v.to_vec(), AuxScoreKind::Loss).unwrap()
    }

    #[test]
    fn uniform_examples() {
        let mut all = select_uniform(10, 10, 3).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(select_uniform(100, 7, 42).unwrap(), select_uniform(100, 7, 42).unwrap());
        assert_eq!(select_uniform(1, 1, 0).unwrap(), vec![0]);
        assert!(select_uniform(3, 4, 0).is_err());
    }

    #[test]
    fn uniform_indices_distinct() {
        let mut v = select_uniform(50, 30, 9).unwrap();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), 30);
    }

    #[test]
    fn score_ranking_examples() {
        assert_eq!(select_small_loss(&scores(&[3.0, 1.0, 2.0]), 3, 2).unwrap(), vec![1, 2]);
        assert_eq!(select_grand(&scores(&[3.0, 1.0, 2.0]), 3, 2).unwrap(), vec![0, 2]);
        assert_eq!(select_forgetting(&scores(&[1.0; 5]), 5, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(select_ssp(&scores(&[0.2, 0.9, 0.9]), 3, 3).unwrap(), vec![1, 2, 0]);
        assert!(matches!(
            select_small_loss(&scores(&[1.0]), 2, 1),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn margin_examples() {
        let p = Matrix::from_rows(&[[0.9f32, 0.1], [0.6, 0.4]]).unwrap();
        assert_eq!(select_margin(&p, 1).unwrap(), vec![1]);
        assert_eq!(select_margin(&p, 2).unwrap(), vec![1, 0]);
        let u = Matrix::from_rows(&[[0.5f32, 0.5], [0.5, 0.5], [0.5, 0.5]]).unwrap();
        assert_eq!(select_margin(&u, 2).unwrap(), vec![0, 1]);
        let single = Matrix::from_rows(&[[1.0f32]]).unwrap();
        assert!(select_margin(&single, 1).is_err());
    }

    #[test]
    fn kcenter_on_a_line() {
        let e = Matrix::from_rows(&[[0.0f32], [1.0], [10.0]]).unwrap();
        assert_eq!(kcenter_greedy_from(&e, 3, 0).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn kcenter_skips_duplicates_of_centers() {
        let e = Matrix::from_rows(&[[0.0f32, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]).unwrap();
        let picks = kcenter_greedy_from(&e, 3, 0).unwrap();
        assert_eq!(picks, vec![0, 3, 2]);
        let mut all = select_kcenter_greedy(&e, 4, 5).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn moderate_examples() {
        // points 0, 1, 3: centroid 4/3, distances 4/3, 1/3, 5/3, median 4/3
        let e = Matrix::from_rows(&[[0.0f32], [1.0], [3.0]]).unwrap();
        assert_eq!(select_moderate(&e, &[0, 0, 0], 1, 3).unwrap(), vec![0, 2, 1]);
        let same = Matrix::from_rows(&[[1.0f32, 1.0]; 4]).unwrap();
        assert_eq!(select_moderate(&same, &[0, 1, 0, 1], 2, 3).unwrap(), vec![0, 1, 2]);
        assert!(matches!(
            select_moderate(&same, &[0, 0, 0, 0], 2, 2),
            Err(Error::EmptyClass(1))
        ));
    }
}
