//! Synthetic clustered datasets with controlled neighborhood structure and
//! injected label noise.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::selectors::baselines::rng_from_seed;
use crate::similarity::NeighborGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Class `j` flips to `(j + 1) mod c`.
    AsymmetricNextClass,
    /// Class `j` flips to a uniformly chosen different class.
    Symmetric,
}

/// Beta distribution given by its mean and concentration `a + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub mean: f64,
    pub concentration: f64,
}

impl BetaParams {
    fn distribution(self) -> Result<Beta<f64>> {
        let a = self.mean * self.concentration;
        let b = (1.0 - self.mean) * self.concentration;
        Beta::new(a, b).map_err(|e| {
            Error::InvalidArgument(format!(
                "confidence distribution (mean {}, concentration {}): {e}",
                self.mean, self.concentration
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub points_per_class: usize,
    pub embedding_dim: usize,
    /// Larger values pull points closer to their class center.
    pub within_class_concentration: f64,
    /// Zero puts every class center on the same direction; larger values
    /// spread centers apart (pairwise cosine `1 / (1 + sep^2)`).
    pub between_class_separation: f64,
    pub noise_rate: f64,
    pub noise_model: NoiseModel,
    pub clean_confidence: BetaParams,
    pub noisy_confidence: BetaParams,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            points_per_class: 100,
            embedding_dim: 32,
            within_class_concentration: 20.0,
            between_class_separation: 2.0,
            noise_rate: 0.2,
            noise_model: NoiseModel::AsymmetricNextClass,
            clean_confidence: BetaParams {
                mean: 0.8,
                concentration: 10.0,
            },
            noisy_confidence: BetaParams {
                mean: 0.3,
                concentration: 10.0,
            },
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.num_classes == 0 || self.points_per_class == 0 || self.embedding_dim == 0 {
            return bad("classes, points per class and dimension must be positive".into());
        }
        if self.noise_rate.is_nan() || !(0.0..1.0).contains(&self.noise_rate) {
            return bad(format!("noise rate {} must lie in [0, 1)", self.noise_rate));
        }
        if !self.within_class_concentration.is_finite() || self.within_class_concentration <= 0.0 {
            return bad("within-class concentration must be positive".into());
        }
        if !self.between_class_separation.is_finite() || self.between_class_separation < 0.0 {
            return bad("between-class separation must be non-negative".into());
        }
        if self.between_class_separation > 0.0 && self.num_classes + 1 > self.embedding_dim {
            return bad(format!(
                "{} separated class centers need at least {} dimensions, got {}",
                self.num_classes,
                self.num_classes + 1,
                self.embedding_dim
            ));
        }
        if self.noise_model == NoiseModel::Symmetric && self.num_classes < 2 && self.noise_rate > 0.0 {
            return bad("symmetric noise needs at least two classes".into());
        }
        Ok(())
    }

    pub fn num_examples(&self) -> usize {
        self.num_classes * self.points_per_class
    }

    /// Label flips per class.
    pub fn flips_per_class(&self) -> usize {
        (self.noise_rate * self.points_per_class as f64).floor() as usize
    }
}

fn class_centers(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    let d = cfg.embedding_dim;
    (0..cfg.num_classes)
        .map(|j| {
            let mut c = vec![0.0; d];
            c[0] = 1.0;
            if cfg.between_class_separation > 0.0 {
                c[1 + j] = cfg.between_class_separation;
            }
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            c.iter().map(|v| v / n).collect()
        })
        .collect()
}

/// Generates a labeled dataset. Examples are laid out class by class;
/// probabilities put the ground-truth class on top, with a low top
/// probability for mislabeled examples.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let c = cfg.num_classes;
    let d = cfg.embedding_dim;
    let m = cfg.num_examples();
    let clean_conf = cfg.clean_confidence.distribution()?;
    let noisy_conf = cfg.noisy_confidence.distribution()?;
    let mut rng = rng_from_seed(cfg.seed);

    let centers = class_centers(cfg);
    let spread = 1.0 / (cfg.within_class_concentration * d as f64).sqrt();
    let mut emb = Vec::with_capacity(m * d);
    let mut truth = Vec::with_capacity(m);
    for (j, center) in centers.iter().enumerate() {
        for _ in 0..cfg.points_per_class {
            let p: Vec<f64> = center
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x + spread * z
                })
                .collect();
            let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            emb.extend(p.iter().map(|v| (v / n) as f32));
            truth.push(j);
        }
    }

    let mut noisy = truth.clone();
    let flips = cfg.flips_per_class();
    for j in 0..c {
        let base = j * cfg.points_per_class;
        for k in index::sample(&mut rng, cfg.points_per_class, flips) {
            noisy[base + k] = match cfg.noise_model {
                NoiseModel::AsymmetricNextClass => (j + 1) % c,
                NoiseModel::Symmetric => {
                    let r = rng.random_range(0..c - 1);
                    if r >= j {
                        r + 1
                    } else {
                        r
                    }
                }
            };
        }
    }

    let mut probs = Vec::with_capacity(m * c);
    for i in 0..m {
        let u = if noisy[i] == truth[i] {
            clean_conf.sample(&mut rng)
        } else {
            noisy_conf.sample(&mut rng)
        };
        let floor = 1.0 / c as f64;
        let top = floor + (1.0 - floor) * u;
        let rest = if c > 1 { (1.0 - top) / (c - 1) as f64 } else { 0.0 };
        probs.extend((0..c).map(|k| if k == truth[i] { top as f32 } else { rest as f32 }));
    }

    Dataset::new(
        Matrix::new(m, d, emb)?,
        Some(noisy),
        Some(c),
        Some(Matrix::new(m, c, probs)?),
        Some(truth),
    )
}

/// Mean neighbor count (self excluded) and mean fraction of neighbors from a
/// different ground-truth class.
pub fn measure_expansion_separation(dataset: &Dataset, graph: &NeighborGraph) -> Result<(f64, f64)> {
    let truth = dataset
        .ground_truth_labels()
        .ok_or(Error::MissingGroundTruth("expansion/separation measurement"))?;
    let m = dataset.len();
    if graph.len() != m {
        return Err(Error::LengthMismatch {
            what: "graph".into(),
            expected: m,
            found: graph.len(),
        });
    }
    if m == 0 {
        return Ok((0.0, 0.0));
    }
    let mut alpha = 0.0;
    let mut beta = 0.0;
    for i in 0..m {
        let others: Vec<usize> = graph
            .neighbor_indices(i)
            .iter()
            .map(|&j| j as usize)
            .filter(|&j| j != i)
            .collect();
        alpha += others.len() as f64;
        if !others.is_empty() {
            let cross = others.iter().filter(|&&j| truth[j] != truth[i]).count();
            beta += cross as f64 / others.len() as f64;
        }
    }
    Ok((alpha / m as f64, beta / m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::build_graph;

    #[test]
    fn no_noise_keeps_labels() {
        let cfg = SynthConfig {
            noise_rate: 0.0,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.noisy_labels(), ds.ground_truth_labels());
    }

    #[test]
    fn asymmetric_flips_per_class() {
        let cfg = SynthConfig::default();
        let ds = generate_synthetic(&cfg).unwrap();
        let noisy = ds.noisy_labels().unwrap();
        let truth = ds.ground_truth_labels().unwrap();
        assert_eq!(ds.len(), 1000);
        let mut per_class = [0usize; 10];
        for (n, t) in noisy.iter().zip(truth) {
            if n != t {
                assert_eq!(*n, (t + 1) % 10);
                per_class[*t] += 1;
            }
        }
        assert!(per_class.iter().all(|&k| k == 20));
    }

    #[test]
    fn symmetric_flips_never_keep_the_class() {
        let cfg = SynthConfig {
            noise_model: NoiseModel::Symmetric,
            noise_rate: 0.4,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.noisy_indices().unwrap().len(), 400);
    }

    #[test]
    fn collapse_limit() {
        let cfg = SynthConfig {
            between_class_separation: 0.0,
            within_class_concentration: 1e12,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let e = ds.embeddings();
        let cos = crate::similarity::cosine_similarity(e.row(0), e.row(999)).unwrap();
        assert!(cos > 0.9999);
    }

    #[test]
    fn infeasible_geometry() {
        let cfg = SynthConfig {
            num_classes: 10,
            embedding_dim: 8,
            ..Default::default()
        };
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate_synthetic(&SynthConfig::default()).unwrap();
        let b = generate_synthetic(&SynthConfig::default()).unwrap();
        assert_eq!(a.embeddings(), b.embeddings());
        assert_eq!(a.noisy_labels(), b.noisy_labels());
    }

    #[test]
    fn expansion_separation_examples() {
        let e = Matrix::from_rows(&[[1.0f32, 0.0], [0.0, 1.0]]).unwrap();
        let ds = Dataset::new(e.clone(), Some(vec![0, 0]), None, None, Some(vec![0, 0])).unwrap();
        let g = build_graph(&e, 1.0).unwrap();
        assert_eq!(measure_expansion_separation(&ds, &g).unwrap(), (0.0, 0.0));

        let same = Matrix::from_rows(&[[1.0f32, 0.0], [1.0, 0.0]]).unwrap();
        let g = build_graph(&same, 0.5).unwrap();
        let ds = Dataset::new(same.clone(), Some(vec![0, 0]), None, None, Some(vec![0, 0])).unwrap();
        assert_eq!(measure_expansion_separation(&ds, &g).unwrap(), (1.0, 0.0));
        let ds = Dataset::new(same, Some(vec![0, 1]), None, None, Some(vec![0, 1])).unwrap();
        assert_eq!(measure_expansion_separation(&ds, &g).unwrap(), (1.0, 1.0));

        let ds = Dataset::new(e.clone(), None, None, None, None).unwrap();
        let g = build_graph(&e, 0.5).unwrap();
        assert!(matches!(
            measure_expansion_separation(&ds, &g),
            Err(Error::MissingGroundTruth(_))
        ));
    }
}
