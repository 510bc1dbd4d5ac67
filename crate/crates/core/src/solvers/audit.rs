//! Checks of the GH/mGH comparison bounds on concrete inputs.

use serde::{Deserialize, Serialize};

use crate::mappings::Mapping;
use crate::spaces::{greedy_epsilon_net, FiniteMetricSpace};

use super::{exact_gh, exact_mgh, SolverBudget, SolverError, VALUE_TOLERANCE};

/// Nested image sequences built from an optimal mGH certificate `(f, g)`:
/// `X_0 = X`, `X_1 = g(Y)`, `X_k = (g∘f)(X_{k-2})`, and symmetrically for `Y`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedSequenceReport {
    pub x_sequence: Vec<Vec<usize>>,
    pub y_sequence: Vec<Vec<usize>>,
    /// first `k` with `X_k = X_{k+1}`
    pub x_stable_at: usize,
    /// first `k` with `Y_k = Y_{k+1}`
    pub y_stable_at: usize,
    pub k_star: usize,
    pub mgh: f64,
    pub gh: f64,
    /// `(2k* + 1) · d̂_GH`
    pub stabilization_bound: f64,
    /// `(2n − 1) · d̂_GH` with `n = min{|X|, |Y|}`
    pub size_bound: f64,
    pub stabilization_bound_holds: bool,
    pub size_bound_holds: bool,
    pub exact: bool,
}

fn apply(map: &Mapping, set: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = set.iter().map(|&i| map.apply(i)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Members `S_0, S_1, ...` of the nested sequence starting at the space
/// `own` (mapped by `there`) with the other side mapped back by `back`,
/// up to and including the first repeat.
fn nested_sequence(own_n: usize, other_n: usize, there: &Mapping, back: &Mapping) -> (Vec<Vec<usize>>, usize) {
    let all: Vec<usize> = (0..own_n).collect();
    let others: Vec<usize> = (0..other_n).collect();
    let mut seq = vec![all, apply(back, &others)];
    loop {
        let k = seq.len() - 2;
        if seq[k] == seq[k + 1] {
            return (seq, k);
        }
        let next = apply(back, &apply(there, &seq[seq.len() - 2]));
        seq.push(next);
    }
}

/// Builds the nested sequences from the exact mGH certificate, finds where
/// they stabilize, and compares the exact GH distance against
/// `(2k* + 1)·d̂_GH` and `(2n − 1)·d̂_GH`.
pub fn nested_sequence_audit(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: &SolverBudget,
) -> Result<NestedSequenceReport, SolverError> {
    let mgh = exact_mgh(x, y, budget)?;
    let gh = exact_gh(x, y, budget)?;
    let (f, g) = (&mgh.certificate.f, &mgh.certificate.g);
    let (x_sequence, x_stable_at) = nested_sequence(x.len(), y.len(), f, g);
    let (y_sequence, y_stable_at) = nested_sequence(y.len(), x.len(), g, f);
    let k_star = x_stable_at.min(y_stable_at);
    let n = x.len().min(y.len());
    let stabilization_bound = (2 * k_star + 1) as f64 * mgh.value;
    let size_bound = (2 * n - 1) as f64 * mgh.value;
    Ok(NestedSequenceReport {
        stabilization_bound_holds: gh.value <= stabilization_bound + VALUE_TOLERANCE,
        size_bound_holds: gh.value <= size_bound + VALUE_TOLERANCE,
        x_sequence,
        y_sequence,
        x_stable_at,
        y_stable_at,
        k_star,
        mgh: mgh.value,
        gh: gh.value,
        stabilization_bound,
        size_bound,
        exact: mgh.exact && gh.exact,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonNetReport {
    pub epsilon: f64,
    pub x_net: Vec<usize>,
    pub y_net: Vec<usize>,
    pub gh_full: f64,
    pub gh_net: f64,
    pub mgh_full: f64,
    pub mgh_net: f64,
    pub gh_discrepancy: f64,
    pub mgh_discrepancy: f64,
    pub holds: bool,
    pub exact: bool,
}

/// Compares both distances on the full spaces and on their greedy ε-nets.
pub fn epsilon_net_audit(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    epsilon: f64,
    budget: &SolverBudget,
) -> Result<EpsilonNetReport, SolverError> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(SolverError::InvalidInput(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let x_net = greedy_epsilon_net(x, epsilon);
    let y_net = greedy_epsilon_net(y, epsilon);
    let (xs, ys) = (x_net.to_space(), y_net.to_space());
    let gh_full = exact_gh(x, y, budget)?;
    let gh_net = exact_gh(&xs, &ys, budget)?;
    let mgh_full = exact_mgh(x, y, budget)?;
    let mgh_net = exact_mgh(&xs, &ys, budget)?;
    let gh_discrepancy = (gh_full.value - gh_net.value).abs();
    let mgh_discrepancy = (mgh_full.value - mgh_net.value).abs();
    Ok(EpsilonNetReport {
        epsilon,
        x_net: x_net.indices().to_vec(),
        y_net: y_net.indices().to_vec(),
        gh_full: gh_full.value,
        gh_net: gh_net.value,
        mgh_full: mgh_full.value,
        mgh_net: mgh_net.value,
        gh_discrepancy,
        mgh_discrepancy,
        holds: gh_discrepancy <= epsilon + VALUE_TOLERANCE && mgh_discrepancy <= epsilon + VALUE_TOLERANCE,
        exact: gh_full.exact && gh_net.exact && mgh_full.exact && mgh_net.exact,
    })
}
