//! Identifiability by ordering: within every stored draw, components with
//! non-negligible weight come first, sorted by their mean at a reference
//! covariate row.

use serde::{Deserialize, Serialize};

use crate::sampler::{Draw, Trace};

/// Weight below which a component is ordered after all others.
pub const DEFAULT_MIN_WEIGHT: f64 = 0.01;

/// A trace whose draws were relabeled; `permutations[t][j]` is the original
/// label of new component `j` in draw `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabeledTrace {
    pub chain_id: usize,
    pub seed: u64,
    pub draws: Vec<Draw>,
    pub permutations: Vec<Vec<usize>>,
}

impl RelabeledTrace {
    /// True when applying the recorded permutations to `original` reproduces `self`.
    pub fn reproduces_from(&self, original: &Trace) -> bool {
        original.draws.len() == self.draws.len()
            && original
                .draws
                .iter()
                .zip(&self.permutations)
                .zip(&self.draws)
                .all(|((o, p), r)| o.permuted(p) == *r)
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn k(&self) -> usize {
        self.draws.first().map_or(0, |d| d.params.k())
    }
}

/// Ordering permutation for a single draw.
///
/// Sort key: count-generating weight `c_k (1 - pi_k)` below `min_weight`
/// last, then ascending `mu_k(reference_x)`, then ascending `psi_k`, then
/// original index. A component that only holds structural zeros has an
/// unconstrained mean, so it goes to the back with the empty ones.
pub fn ordering(draw: &Draw, reference_x: &[f64], min_weight: f64) -> Vec<usize> {
    let p = &draw.params;
    let keys: Vec<(bool, f64, f64)> = (0..p.k())
        .map(|k| (p.c[k] * (1.0 - p.pi_k(k)) < min_weight, p.mean_at(k, reference_x), p.psi[k]))
        .collect();
    let mut perm: Vec<usize> = (0..p.k()).collect();
    perm.sort_by(|&a, &b| {
        let (ka, kb) = (&keys[a], &keys[b]);
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(a.cmp(&b))
    });
    perm
}

/// Relabels every draw of every trace with the default weight cutoff.
pub fn relabel(traces: &[Trace], reference_x: &[f64]) -> Vec<RelabeledTrace> {
    relabel_with(traces, reference_x, DEFAULT_MIN_WEIGHT)
}

pub fn relabel_with(traces: &[Trace], reference_x: &[f64], min_weight: f64) -> Vec<RelabeledTrace> {
    traces
        .iter()
        .map(|t| {
            let permutations: Vec<Vec<usize>> = t
                .draws
                .iter()
                .map(|d| ordering(d, reference_x, min_weight))
                .collect();
            let draws = t
                .draws
                .iter()
                .zip(&permutations)
                .map(|(d, p)| d.permuted(p))
                .collect();
            RelabeledTrace {
                chain_id: t.chain_id,
                seed: t.seed,
                draws,
                permutations,
            }
        })
        .collect()
}

/// Views relabeled output as plain traces, e.g. to relabel again.
pub fn as_traces(relabeled: &[RelabeledTrace]) -> Vec<Trace> {
    relabeled
        .iter()
        .map(|r| Trace {
            chain_id: r.chain_id,
            seed: r.seed,
            draws: r.draws.clone(),
            acceptance: Default::default(),
            clamped_predictors: 0,
            nonfinite_rejections: 0,
        })
        .collect()
}
