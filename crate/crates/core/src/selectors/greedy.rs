//! Greedy maximization of the neighborhood-confidence objective.
//!
//! Candidates are split into groups: one group holding everything for the
//! plain greedy, one group per noisy class for the balanced variant. Each
//! group answers "which unselected member has the largest gain right now",
//! either by a full scan (eager) or from a max-heap of possibly stale gains
//! (lazy). Both answer identically, including the lowest-index tie-break.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objective::{check_utility_domain, GainMode, SelectionState, Utility};
use crate::similarity::NeighborGraph;

/// Scans below this many candidates stay on the calling thread.
const PAR_SCAN_MIN: usize = 4096;

/// Relative slack for floating-point drift in supposedly non-increasing gains.
const STALE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyOptions {
    pub gain_mode: GainMode,
    pub utility: Utility,
    pub lazy: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            gain_mode: GainMode::PaperFaithful,
            utility: Utility::Tanh,
            lazy: true,
        }
    }
}

/// `(gain, index)` ordered by gain, then by *lower* index.
#[inline]
fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => a,
        Ordering::Less => b,
        Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    gain: f64,
    index: usize,
    /// Selection count when the gain was computed.
    stamp: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

enum Group {
    Eager { members: Vec<usize> },
    Lazy { heap: BinaryHeap<Entry> },
}

struct Picker {
    opts: GreedyOptions,
    groups: Vec<Group>,
    /// Selection count at which each example's running confidence last changed.
    touched: Vec<usize>,
}

impl Picker {
    fn new(state: &SelectionState<'_>, groups: Vec<Vec<usize>>, opts: GreedyOptions) -> Self {
        let groups = groups
            .into_iter()
            .map(|members| {
                if opts.lazy {
                    let stamp = state.selected().len();
                    let entries: Vec<Entry> = members
                        .par_iter()
                        .map(|&i| Entry {
                            gain: state.gain_unchecked(i, opts.gain_mode, opts.utility),
                            index: i,
                            stamp,
                        })
                        .collect();
                    Group::Lazy {
                        heap: BinaryHeap::from(entries),
                    }
                } else {
                    Group::Eager { members }
                }
            })
            .collect();
        Self {
            opts,
            groups,
            touched: vec![0; state.len()],
        }
    }

    fn is_fresh(&self, state: &SelectionState<'_>, e: &Entry) -> bool {
        match self.opts.gain_mode {
            // the own-term gain depends on the candidate's running confidence only
            GainMode::PaperFaithful => e.stamp >= self.touched[e.index],
            GainMode::ExactMarginal => e.stamp == state.selected().len(),
        }
    }

    fn has_candidates(&self, group: usize) -> bool {
        match &self.groups[group] {
            Group::Eager { members } => !members.is_empty(),
            Group::Lazy { heap } => !heap.is_empty(),
        }
    }

    /// Removes and returns the best unselected member of `group`.
    fn pop_best(&mut self, state: &SelectionState<'_>, group: usize) -> Option<usize> {
        let GreedyOptions {
            gain_mode, utility, ..
        } = self.opts;
        match &mut self.groups[group] {
            Group::Eager { members } => {
                if members.is_empty() {
                    return None;
                }
                let score = |&i: &usize| (state.gain_unchecked(i, gain_mode, utility), i);
                let start = (f64::NEG_INFINITY, usize::MAX);
                let best = if members.len() >= PAR_SCAN_MIN {
                    members.par_iter().map(score).reduce(|| start, better)
                } else {
                    members.iter().map(score).fold(start, better)
                };
                let pos = members.binary_search(&best.1).expect("member list is sorted");
                members.remove(pos);
                Some(best.1)
            }
            Group::Lazy { .. } => self.pop_best_lazy(state, group),
        }
    }

    fn pop_best_lazy(&mut self, state: &SelectionState<'_>, group: usize) -> Option<usize> {
        let GreedyOptions {
            gain_mode, utility, ..
        } = self.opts;
        let stamp = state.selected().len();
        loop {
            let top = {
                let Group::Lazy { heap } = &mut self.groups[group] else {
                    unreachable!()
                };
                *heap.peek()?
            };
            let fresh = self.is_fresh(state, &top);
            let Group::Lazy { heap } = &mut self.groups[group] else {
                unreachable!()
            };
            if !fresh {
                heap.pop();
                heap.push(Entry {
                    gain: state.gain_unchecked(top.index, gain_mode, utility),
                    index: top.index,
                    stamp,
                });
                continue;
            }

            // A stale bound within float slack of the winner could still beat
            // it once recomputed; refresh those before committing.
            let cand = heap.pop().expect("peeked");
            let floor = cand.gain - STALE_SLACK * cand.gain.abs().max(1.0);
            let mut near = Vec::new();
            while let Some(e) = heap.peek() {
                if e.gain < floor {
                    break;
                }
                near.push(heap.pop().expect("peeked"));
            }
            let touched = &self.touched;
            let stale: Vec<bool> = near
                .iter()
                .map(|e| match gain_mode {
                    GainMode::PaperFaithful => e.stamp < touched[e.index],
                    GainMode::ExactMarginal => e.stamp != stamp,
                })
                .collect();
            if !stale.iter().any(|&s| s) {
                heap.extend(near);
                return Some(cand.index);
            }
            heap.push(cand);
            for (e, is_stale) in near.into_iter().zip(stale) {
                if is_stale {
                    heap.push(Entry {
                        gain: state.gain_unchecked(e.index, gain_mode, utility),
                        index: e.index,
                        stamp,
                    });
                } else {
                    heap.push(e);
                }
            }
        }
    }

    fn commit(&mut self, state: &mut SelectionState<'_>, x: usize) {
        state.add_unchecked(x);
        let step = state.selected().len();
        for &v in state.graph().neighbor_indices(x) {
            self.touched[v as usize] = step;
        }
    }
}

fn check_budget(m: usize, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::Budget("subset size must be at least 1".into()));
    }
    if s > m {
        return Err(Error::Budget(format!("subset size {s} exceeds {m} examples")));
    }
    Ok(())
}

/// Plain greedy: repeatedly add the highest-gain unselected example until
/// `s` are chosen.
pub fn greedy<'a>(
    graph: &'a NeighborGraph,
    confidence: &'a [f64],
    s: usize,
    opts: GreedyOptions,
) -> Result<SelectionState<'a>> {
    check_utility_domain(graph, opts.utility)?;
    let mut state = SelectionState::new(graph, confidence)?;
    check_budget(state.len(), s)?;
    let mut picker = Picker::new(&state, vec![(0..state.len()).collect()], opts);
    while state.selected().len() < s {
        let x = picker.pop_best(&state, 0).expect("budget checked against m");
        picker.commit(&mut state, x);
    }
    Ok(state)
}

/// Class-balanced greedy: visit classes round-robin, adding the best
/// member of each in turn, and stop the moment `s` are chosen. Classes that
/// run out of members are skipped.
pub fn greedy_balanced<'a>(
    graph: &'a NeighborGraph,
    confidence: &'a [f64],
    labels: &[usize],
    num_classes: usize,
    s: usize,
    opts: GreedyOptions,
) -> Result<SelectionState<'a>> {
    check_utility_domain(graph, opts.utility)?;
    let mut state = SelectionState::new(graph, confidence)?;
    let m = state.len();
    check_budget(m, s)?;
    if labels.len() != m {
        return Err(Error::LengthMismatch {
            what: "noisy labels".into(),
            expected: m,
            found: labels.len(),
        });
    }
    let mut groups = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                index: i,
                label: y,
                num_classes,
            });
        }
        groups[y].push(i);
    }
    let mut picker = Picker::new(&state, groups, opts);
    while state.selected().len() < s {
        for class in 0..num_classes {
            if !picker.has_candidates(class) {
                continue;
            }
            let x = picker.pop_best(&state, class).expect("class has candidates");
            picker.commit(&mut state, x);
            if state.selected().len() == s {
                return Ok(state);
            }
        }
    }
    Ok(state)
}
