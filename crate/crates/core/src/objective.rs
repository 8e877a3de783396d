//! Reduced neighborhood confidence and the total-utility objective.
//!
//! For a selected subset `S`, the reduced neighborhood confidence of example
//! `i` is `sum_{j in S, j ~ i} w(i, j) * C(j)`, where `~` and `w` come from the
//! thresholded similarity graph. The objective is `sum_i sigma(conf_i)` for a
//! concave, non-decreasing utility `sigma` with `sigma(0) = 0`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::NeighborGraph;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Utility {
    #[default]
    Tanh,
    Identity,
    Log1p,
}

impl Utility {
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Utility::Tanh => z.tanh(),
            Utility::Identity => z,
            Utility::Log1p => z.ln_1p(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Utility::Tanh => "tanh",
            Utility::Identity => "identity",
            Utility::Log1p => "log1p",
        }
    }
}

impl FromStr for Utility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Utility::Tanh),
            "identity" => Ok(Utility::Identity),
            "log1p" => Ok(Utility::Log1p),
            other => Err(Error::InvalidArgument(format!(
                "unknown utility {other:?} (expected tanh, identity or log1p)"
            ))),
        }
    }
}

/// How a candidate is scored during greedy selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// The candidate's own term only: `sigma(conf_x + C(x)) - sigma(conf_x)`.
    #[default]
    PaperFaithful,
    /// The full objective increment over every neighbor of the candidate.
    ExactMarginal,
}

impl FromStr for GainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_faithful" => Ok(GainMode::PaperFaithful),
            "exact" | "exact_marginal" => Ok(GainMode::ExactMarginal),
            other => Err(Error::InvalidArgument(format!(
                "unknown gain mode {other:?} (expected paper or exact)"
            ))),
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of values.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Compensated::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Selected examples plus the running reduced neighborhood confidence of
/// every example in the universe.
#[derive(Debug, Clone)]
pub struct SelectionState<'a> {
    graph: &'a NeighborGraph,
    confidence: &'a [f64],
    selected: Vec<usize>,
    in_set: Vec<bool>,
    acc: Vec<Compensated>,
    nbr_conf: Vec<f64>,
}

impl<'a> SelectionState<'a> {
    pub fn new(graph: &'a NeighborGraph, confidence: &'a [f64]) -> Result<Self> {
        let m = graph.len();
        if confidence.len() != m {
            return Err(Error::LengthMismatch {
                what: "confidence".into(),
                expected: m,
                found: confidence.len(),
            });
        }
        Ok(Self {
            graph,
            confidence,
            selected: Vec::new(),
            in_set: vec![false; m],
            acc: vec![Compensated::default(); m],
            nbr_conf: vec![0.0; m],
        })
    }

    /// State after adding `selected` in order.
    pub fn with_selection(
        graph: &'a NeighborGraph,
        confidence: &'a [f64],
        selected: &[usize],
    ) -> Result<Self> {
        let mut state = Self::new(graph, confidence)?;
        for &x in selected {
            state.add(x)?;
        }
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.in_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_set.is_empty()
    }

    pub fn graph(&self) -> &'a NeighborGraph {
        self.graph
    }

    pub fn confidence(&self) -> &'a [f64] {
        self.confidence
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.in_set[i]
    }

    /// Running reduced neighborhood confidence of every example.
    pub fn nbr_conf(&self) -> &[f64] {
        &self.nbr_conf
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            })
        }
    }

    fn check_candidate(&self, x: usize) -> Result<()> {
        self.check_index(x)?;
        if self.in_set[x] {
            Err(Error::AlreadySelected(x))
        } else {
            Ok(())
        }
    }

    /// Adds `x` and pushes its weighted confidence to all of its neighbors.
    pub fn add(&mut self, x: usize) -> Result<()> {
        self.check_candidate(x)?;
        self.add_unchecked(x);
        Ok(())
    }

    pub(crate) fn add_unchecked(&mut self, x: usize) {
        self.in_set[x] = true;
        self.selected.push(x);
        let cx = self.confidence[x];
        for (v, w) in self.graph.neighbors(x) {
            let a = &mut self.acc[v];
            a.add(w as f64 * cx);
            self.nbr_conf[v] = a.value();
        }
    }

    pub fn neighborhood_confidence(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.nbr_conf[i])
    }

    pub fn total_objective(&self, utility: Utility) -> f64 {
        compensated_sum(self.nbr_conf.iter().map(|&c| utility.eval(c)))
    }

    #[inline]
    pub(crate) fn paper_gain(&self, x: usize, utility: Utility) -> f64 {
        let a = self.nbr_conf[x];
        (utility.eval(a + self.confidence[x]) - utility.eval(a)).max(0.0)
    }

    #[inline]
    pub(crate) fn exact_gain(&self, x: usize, utility: Utility) -> f64 {
        let cx = self.confidence[x];
        let mut acc = Compensated::default();
        for (v, w) in self.graph.neighbors(x) {
            let a = self.nbr_conf[v];
            acc.add(utility.eval(a + w as f64 * cx) - utility.eval(a));
        }
        acc.value().max(0.0)
    }

    #[inline]
    pub(crate) fn gain_unchecked(&self, x: usize, mode: GainMode, utility: Utility) -> f64 {
        match mode {
            GainMode::PaperFaithful => self.paper_gain(x, utility),
            GainMode::ExactMarginal => self.exact_gain(x, utility),
        }
    }

    /// Objective increment from adding `x`, summed over the neighbors of `x`.
    pub fn marginal_gain_exact(&self, x: usize, utility: Utility) -> Result<f64> {
        self.check_candidate(x)?;
        Ok(self.exact_gain(x, utility))
    }

    /// Greedy score of the candidate's own term only.
    pub fn marginal_gain_paper(&self, x: usize, utility: Utility) -> Result<f64> {
        self.check_candidate(x)?;
        Ok(self.paper_gain(x, utility))
    }

    pub fn marginal_gain(&self, x: usize, mode: GainMode, utility: Utility) -> Result<f64> {
        self.check_candidate(x)?;
        Ok(self.gain_unchecked(x, mode, utility))
    }

    /// Reduced neighborhood confidence recomputed directly from the graph,
    /// without the running sums.
    pub fn recompute_nbr_conf(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                compensated_sum(
                    self.graph
                        .neighbors(i)
                        .filter(|&(j, _)| self.in_set[j])
                        .map(|(j, w)| w as f64 * self.confidence[j]),
                )
            })
            .collect()
    }
}

/// Negative thresholds admit negative weights, which can push a running
/// confidence below -1 where `log1p` is undefined.
pub fn check_utility_domain(graph: &NeighborGraph, utility: Utility) -> Result<()> {
    if utility == Utility::Log1p && graph.tau() < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "log1p utility needs tau >= 0, graph has tau={}",
            graph.tau()
        )));
    }
    Ok(())
}

/// Objective value of an arbitrary subset, evaluated from scratch.
pub fn objective_of(
    graph: &NeighborGraph,
    confidence: &[f64],
    subset: &[usize],
    utility: Utility,
) -> Result<f64> {
    check_utility_domain(graph, utility)?;
    Ok(SelectionState::with_selection(graph, confidence, subset)?.total_objective(utility))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Matrix;
    use crate::similarity::build_graph;

    fn tiny() -> (NeighborGraph, Vec<f64>) {
        let e = Matrix::from_rows(&[[1.0f32, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        (build_graph(&e, 0.5).unwrap(), vec![0.9, 0.8, 0.7])
    }

    #[test]
    fn utility_basics() {
        for u in [Utility::Tanh, Utility::Identity, Utility::Log1p] {
            assert_eq!(u.eval(0.0), 0.0);
            assert_eq!(u.name().parse::<Utility>().unwrap(), u);
        }
        assert!("relu".parse::<Utility>().is_err());
    }

    #[test]
    fn utility_concave_non_decreasing_on_grid() {
        let h = 0.01;
        for u in [Utility::Tanh, Utility::Identity, Utility::Log1p] {
            let vals: Vec<f64> = (0..=1000).map(|k| u.eval(k as f64 * h)).collect();
            for w in vals.windows(3) {
                assert!(w[1] >= w[0]);
                // second difference
                assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-12);
            }
        }
    }

    #[test]
    fn neighborhood_confidence_examples() {
        let (g, c) = tiny();
        let s = SelectionState::with_selection(&g, &c, &[1, 2]).unwrap();
        assert!((s.neighborhood_confidence(0).unwrap() - 0.8).abs() < 1e-12);
        let empty = SelectionState::new(&g, &c).unwrap();
        assert!((0..3).all(|i| empty.neighborhood_confidence(i).unwrap() == 0.0));
        // 2 has only its self edge
        assert!((s.neighborhood_confidence(2).unwrap() - 0.7).abs() < 1e-12);
        assert!(matches!(
            s.neighborhood_confidence(3),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn total_objective_examples() {
        let (g, c) = tiny();
        let s = SelectionState::with_selection(&g, &c, &[0]).unwrap();
        assert!((s.total_objective(Utility::Tanh) - 1.432_595_74).abs() < 1e-8);
        assert!((s.total_objective(Utility::Tanh) - 2.0 * 0.9f64.tanh()).abs() < 1e-12);
        assert_eq!(SelectionState::new(&g, &c).unwrap().total_objective(Utility::Tanh), 0.0);

        let e = Matrix::from_rows(&[[1.0f32, 0.0], [0.6, 0.8], [0.0, 1.0]]).unwrap();
        let g1 = build_graph(&e, 1.0).unwrap();
        let s = SelectionState::with_selection(&g1, &c, &[0, 2]).unwrap();
        assert!((s.total_objective(Utility::Identity) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn own_term_gain_examples() {
        let (g, c) = tiny();
        let s = SelectionState::new(&g, &c).unwrap();
        assert!((s.marginal_gain_paper(2, Utility::Tanh).unwrap() - 0.7f64.tanh()).abs() < 1e-15);

        // nbr_conf[x] = 0.8 and C(x) = 0.8
        let e = Matrix::from_rows(&[[1.0f32, 0.0], [1.0, 0.0]]).unwrap();
        let g2 = build_graph(&e, 0.5).unwrap();
        let c2 = [0.8, 0.8];
        let s = SelectionState::with_selection(&g2, &c2, &[0]).unwrap();
        let gain = s.marginal_gain_paper(1, Utility::Tanh).unwrap();
        assert!((gain - 0.25763).abs() < 1e-5);
        assert!((gain - (1.6f64.tanh() - 0.8f64.tanh())).abs() < 1e-12);
    }

    #[test]
    fn own_term_gain_decreases_with_neighborhood_confidence() {
        let u = Utility::Tanh;
        let c = 0.6;
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let a = k as f64 * 0.1;
            let g = u.eval(a + c) - u.eval(a);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn exact_gain_isolated_and_duplicates() {
        let e = Matrix::from_rows(&[[1.0f32, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let g = build_graph(&e, 0.5).unwrap();
        let c = [0.5, 0.5, 0.3];
        let s = SelectionState::with_selection(&g, &c, &[0]).unwrap();
        // isolated example
        assert!((s.marginal_gain_exact(2, Utility::Tanh).unwrap() - 0.3f64.tanh()).abs() < 1e-12);
        // duplicate: second copy is worth less than the first was
        let first = SelectionState::new(&g, &c).unwrap().marginal_gain_exact(0, Utility::Tanh).unwrap();
        let second = s.marginal_gain_exact(1, Utility::Tanh).unwrap();
        assert!(second <= first);
        assert!(matches!(s.marginal_gain_exact(0, Utility::Tanh), Err(Error::AlreadySelected(0))));
        assert!(matches!(s.marginal_gain_paper(0, Utility::Tanh), Err(Error::AlreadySelected(0))));
    }

    #[test]
    fn confidence_length_checked() {
        let (g, _) = tiny();
        assert!(matches!(
            SelectionState::new(&g, &[0.5]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn gain_mode_parse() {
        assert_eq!("paper".parse::<GainMode>().unwrap(), GainMode::PaperFaithful);
        assert_eq!("exact".parse::<GainMode>().unwrap(), GainMode::ExactMarginal);
        assert!("fast".parse::<GainMode>().is_err());
    }
}
