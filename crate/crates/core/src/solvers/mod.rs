//! Exact Gromov–Hausdorff (GH) and modified Gromov–Hausdorff (mGH) distances.
//!
//! For finite `X` and `Y`,
//!
//! ```text
//! d_GH(X, Y)  = ½ min_{f, g} max{dis f, dis g, codis(f, g)}
//! d̂_GH(X, Y) = ½ max{min_f dis f, min_g dis g}
//! ```
//!
//! Both minima are found by branch and bound (see [`search`]) and every
//! result carries the maps that attain it.

mod audit;
mod search;
mod simplex;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mappings::{distortion, pair_objective, Mapping, MappingError, MappingPair};
use crate::spaces::FiniteMetricSpace;

pub use audit::{epsilon_net_audit, nested_sequence_audit, EpsilonNetReport, NestedSequenceReport};
pub use simplex::{gh_to_simplex, mgh_to_simplex, simplex_distortion_formula};

use search::BottleneckSearch;

/// Absolute tolerance for comparing non-integer distances.
pub const VALUE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    #[serde(rename = "gh")]
    Gh,
    #[serde(rename = "mgh")]
    Mgh,
}

/// Node and wall-clock limits for a search. Unset fields mean unlimited.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverBudget {
    pub max_nodes: Option<u64>,
    pub time_limit: Option<Duration>,
    started: Option<Instant>,
}

impl SolverBudget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn nodes(max_nodes: u64) -> Self {
        SolverBudget { max_nodes: Some(max_nodes), ..Self::default() }
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }

    pub(crate) fn deadline(&self) -> Option<Instant> {
        self.time_limit.map(|t| self.started.unwrap_or_else(Instant::now) + t)
    }

    /// Pins the wall-clock start so nested searches share one deadline.
    pub(crate) fn started(mut self) -> Self {
        if self.started.is_none() {
            self.started = Some(Instant::now());
        }
        self
    }

    pub(crate) fn validate(&self) -> Result<(), SolverError> {
        if self.max_nodes == Some(0) {
            return Err(SolverError::InvalidInput("node budget must be positive".into()));
        }
        if self.time_limit.is_some_and(|t| t.is_zero()) {
            return Err(SolverError::InvalidInput("time limit must be positive".into()));
        }
        Ok(())
    }
}

/// A distance value with the maps attaining it and the bracket that was
/// proven around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: f64,
    pub kind: DistanceKind,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub certificate: MappingPair,
    pub nodes_explored: u64,
    pub exact: bool,
}

impl DistanceResult {
    /// Recomputes the value from the certificate.
    pub fn certified_value(&self, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64, MappingError> {
        Ok(match self.kind {
            DistanceKind::Gh => 0.5 * pair_objective(&self.certificate, x, y)?,
            DistanceKind::Mgh => {
                0.5 * distortion(&self.certificate.f, x, y)?.max(distortion(&self.certificate.g, y, x)?)
            }
        })
    }
}

/// `(½|diam X − diam Y|, ½ max{diam X, diam Y})`, which brackets both
/// distances.
pub fn analytic_bounds(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> (f64, f64) {
    let (dx, dy) = (x.diameter(), y.diameter());
    (0.5 * (dx - dy).abs(), 0.5 * dx.max(dy))
}

/// Minimal distortion of a map `X -> Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalMinimum {
    pub distortion: f64,
    pub mapping: Mapping,
    pub nodes_explored: u64,
    pub exact: bool,
}

/// Exact `min_f dis(f)` over all `f: X -> Y`.
pub fn min_distortion(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: &SolverBudget,
) -> Result<DirectionalMinimum, SolverError> {
    budget.validate()?;
    let budget = budget.started();
    directional(x, y, &budget, 0)
}

fn directional(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: &SolverBudget,
    spent: u64,
) -> Result<DirectionalMinimum, SolverError> {
    // the best constant map has distortion diam X
    let seed = Mapping::constant(x.len(), y.len(), 0)?;
    let seed_dis = distortion(&seed, x, y)?;
    let lower = (x.diameter() - y.diameter()).max(0.0);
    let out = BottleneckSearch::new(x, y, true, false)
        .incumbent(seed_dis)
        .stop_at(lower)
        .budget(budget, spent)
        .run();
    let mapping = match out.f {
        Some(image) => Mapping::new(image, y.len())?,
        None => seed,
    };
    Ok(DirectionalMinimum {
        distortion: distortion(&mapping, x, y)?,
        mapping,
        nodes_explored: out.nodes,
        exact: out.complete,
    })
}

/// Exact modified GH distance. On budget exhaustion the result is bracketed
/// and `exact` is false.
pub fn exact_mgh(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: &SolverBudget,
) -> Result<DistanceResult, SolverError> {
    budget.validate()?;
    let budget = budget.started();
    let (lower, _) = analytic_bounds(x, y);
    let forward = directional(x, y, &budget, 0)?;
    let backward = directional(y, x, &budget, forward.nodes_explored)?;
    let exact = forward.exact && backward.exact;
    let value = 0.5 * forward.distortion.max(backward.distortion);
    let mut lower_bound = lower;
    if forward.exact {
        lower_bound = lower_bound.max(0.5 * forward.distortion);
    }
    if backward.exact {
        lower_bound = lower_bound.max(0.5 * backward.distortion);
    }
    Ok(DistanceResult {
        value,
        kind: DistanceKind::Mgh,
        lower_bound: if exact { value } else { lower_bound.min(value) },
        upper_bound: value,
        certificate: MappingPair::new(forward.mapping, backward.mapping)?,
        nodes_explored: forward.nodes_explored + backward.nodes_explored,
        exact,
    })
}

/// Exact GH distance, searching `f` first and then `g` for each complete
/// `f`. The search starts from the better of the constant pair and the mGH
/// certificate, and stops once it meets the mGH lower bound.
pub fn exact_gh(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: &SolverBudget,
) -> Result<DistanceResult, SolverError> {
    exact_gh_with(x, y, budget, true)
}

/// [`exact_gh`] with the variable order exposed: `nested = false` lets the
/// search interleave points of `X` and `Y`.
pub fn exact_gh_with(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: &SolverBudget,
    nested: bool,
) -> Result<DistanceResult, SolverError> {
    budget.validate()?;
    let budget = budget.started();
    let (analytic_lower, _) = analytic_bounds(x, y);
    let mgh = exact_mgh(x, y, &budget)?;
    let mut nodes = mgh.nodes_explored;

    let constant = MappingPair::new(Mapping::constant(x.len(), y.len(), 0)?, Mapping::constant(y.len(), x.len(), 0)?)?;
    let mut best_pair = constant;
    let mut best = pair_objective(&best_pair, x, y)?;
    let seeded = pair_objective(&mgh.certificate, x, y)?;
    if seeded < best {
        best = seeded;
        best_pair = mgh.certificate.clone();
    }

    // doubled units
    let lower = 2.0 * analytic_lower.max(mgh.lower_bound);
    // reaching a valid lower bound is itself a proof of optimality
    let mut complete = true;
    if best > lower {
        let out = BottleneckSearch::new(x, y, true, true)
            .nested(nested)
            .incumbent(best)
            .stop_at(lower)
            .budget(&budget, nodes)
            .run();
        nodes += out.nodes;
        complete = out.complete;
        if let (Some(f), Some(g)) = (out.f, out.g) {
            best_pair = MappingPair::new(Mapping::new(f, y.len())?, Mapping::new(g, x.len())?)?;
            best = out.objective;
        }
    }
    let value = 0.5 * best;
    debug_assert_eq!(value, 0.5 * pair_objective(&best_pair, x, y)?);
    let exact = complete;
    Ok(DistanceResult {
        value,
        kind: DistanceKind::Gh,
        lower_bound: if exact { value } else { (0.5 * lower).min(value) },
        upper_bound: value,
        certificate: best_pair,
        nodes_explored: nodes,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{counterexample_pair, random_metric, regular_simplex, u_space};

    #[test]
    fn bounds_examples() {
        let x = u_space(4).unwrap();
        assert_eq!(analytic_bounds(&x, &x), (0.0, 2.0));
        let (a, b) = counterexample_pair(3).unwrap();
        assert_eq!(analytic_bounds(&a, &b), (0.5, 2.5));
    }

    #[test]
    fn isometric_relabeling_is_zero() {
        let x = random_metric(5, 3, 2.0).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let y = x.subspace(&perm);
        let gh = exact_gh(&x, &y, &SolverBudget::unlimited()).unwrap();
        let mgh = exact_mgh(&x, &y, &SolverBudget::unlimited()).unwrap();
        assert_eq!((gh.value, mgh.value), (0.0, 0.0));
        assert!(gh.exact && mgh.exact);
    }

    #[test]
    fn two_point_spaces() {
        let x = regular_simplex(2, 3.0).unwrap();
        let y = regular_simplex(2, 8.0).unwrap();
        let gh = exact_gh(&x, &y, &SolverBudget::unlimited()).unwrap();
        let mgh = exact_mgh(&x, &y, &SolverBudget::unlimited()).unwrap();
        assert_eq!(gh.value, 2.5);
        assert_eq!(mgh.value, 2.5);
    }

    #[test]
    fn counterexample_mgh_is_half() {
        for k in 1..=4 {
            let (x, y) = counterexample_pair(k).unwrap();
            let r = exact_mgh(&x, &y, &SolverBudget::unlimited()).unwrap();
            assert_eq!(r.value, 0.5, "k={k}");
            assert_eq!(r.certified_value(&x, &y).unwrap(), 0.5);
        }
    }

    #[test]
    fn budget_exhaustion_brackets() {
        let x = random_metric(7, 1, 1.0).unwrap();
        let y = random_metric(7, 2, 1.0).unwrap();
        let r = exact_gh(&x, &y, &SolverBudget::nodes(5)).unwrap();
        assert!(!r.exact);
        assert!(r.lower_bound <= r.value && r.value <= r.upper_bound);
        assert_eq!(r.value, r.certified_value(&x, &y).unwrap());
        assert!(exact_gh(&x, &y, &SolverBudget::nodes(0)).is_err());
    }

    #[test]
    fn gh_certificate_matches_value() {
        for seed in 0..10 {
            let x = random_metric(4, seed, 1.0).unwrap();
            let y = random_metric(5, seed + 100, 1.5).unwrap();
            let r = exact_gh(&x, &y, &SolverBudget::unlimited()).unwrap();
            assert_eq!(r.value, r.certified_value(&x, &y).unwrap());
        }
    }
}
