//! Distances from a finite space to a regular simplex.
//!
//! A map `f: X -> Δ` into a regular simplex of diameter `λ` is a partition of
//! `X` into blocks (the fibres of `f`), and its distortion depends only on the
//! largest block diameter and the smallest distance `δ(f)` between points in
//! different blocks:
//!
//! ```text
//! dis f = max{max_block diam(block), diam X − λ, λ − δ(f)}
//! ```
//!
//! so both distances reduce to searches over set partitions instead of maps.

use std::time::Instant;

use crate::constructions::regular_simplex;
use crate::mappings::{distortion, pseudoinverse, Mapping, MappingPair};
use crate::spaces::FiniteMetricSpace;

use super::{DistanceKind, DistanceResult, SolverBudget, SolverError};

/// Distortion of `f: X -> Δ` evaluated through block diameters and `δ(f)`.
pub fn simplex_distortion_formula(f: &Mapping, x: &FiniteMetricSpace, lambda: f64) -> f64 {
    let n = x.len();
    let diam_delta = if f.target_n() >= 2 { lambda } else { 0.0 };
    let mut worst = (x.diameter() - diam_delta).max(0.0);
    let mut delta = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let d = x.dist(i, j);
            if f.apply(i) == f.apply(j) {
                worst = worst.max(d);
            } else {
                delta = delta.min(d);
            }
        }
    }
    worst.max(diam_delta - delta)
}

fn check_simplex(m: usize, lambda: f64) -> Result<(), SolverError> {
    if m == 0 {
        return Err(SolverError::InvalidInput("simplex needs at least one point".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SolverError::InvalidInput(format!("simplex diameter must be positive, got {lambda}")));
    }
    Ok(())
}

/// Branch and bound over set partitions of `X` with a bounded block count.
struct PartitionSearch<'a> {
    x: &'a FiniteMetricSpace,
    order: Vec<usize>,
    diam_delta: f64,
    base: f64,
    min_blocks: usize,
    max_blocks: usize,
    block_of: Vec<usize>,
    block_diam: Vec<f64>,
    best: f64,
    best_blocks: Option<Vec<usize>>,
    stop_at: f64,
    nodes: u64,
    max_nodes: u64,
    deadline: Option<Instant>,
    aborted: bool,
    done: bool,
}

impl<'a> PartitionSearch<'a> {
    fn new(x: &'a FiniteMetricSpace, diam_delta: f64, min_blocks: usize, max_blocks: usize) -> Self {
        let n = x.len();
        // farthest-first order starting from the most eccentric point
        let start = (0..n)
            .max_by(|&a, &b| {
                let ea = x.row(a).iter().copied().fold(0.0, f64::max);
                let eb = x.row(b).iter().copied().fold(0.0, f64::max);
                ea.total_cmp(&eb).then(b.cmp(&a))
            })
            .unwrap_or(0);
        let mut order = vec![start];
        let mut gap: Vec<f64> = x.row(start).to_vec();
        while order.len() < n {
            let next = (0..n)
                .filter(|i| !order.contains(i))
                .max_by(|&a, &b| gap[a].total_cmp(&gap[b]).then(b.cmp(&a)))
                .unwrap();
            order.push(next);
            for (g, &v) in gap.iter_mut().zip(x.row(next)) {
                *g = g.min(v);
            }
        }
        PartitionSearch {
            x,
            order,
            diam_delta,
            base: x.diameter() - diam_delta,
            min_blocks,
            max_blocks: max_blocks.min(n),
            block_of: vec![usize::MAX; n],
            block_diam: Vec::new(),
            best: f64::INFINITY,
            best_blocks: None,
            stop_at: f64::NEG_INFINITY,
            nodes: 0,
            max_nodes: u64::MAX,
            deadline: None,
            aborted: false,
            done: false,
        }
    }

    fn run(&mut self, budget: &SolverBudget, spent: u64) {
        self.max_nodes = budget.max_nodes.map_or(u64::MAX, |m| m.saturating_sub(spent));
        self.deadline = budget.deadline();
        if self.min_blocks <= self.max_blocks {
            self.dfs(0, f64::INFINITY);
        }
    }

    fn objective(&self, max_diam: f64, delta: f64) -> f64 {
        max_diam.max(self.base).max(self.diam_delta - delta)
    }

    fn dfs(&mut self, t: usize, delta: f64) {
        let n = self.order.len();
        let blocks = self.block_diam.len();
        if t == n {
            let max_diam = self.block_diam.iter().copied().fold(0.0, f64::max);
            let value = self.objective(max_diam, delta);
            if blocks >= self.min_blocks && value < self.best {
                self.best = value;
                self.best_blocks = Some(self.block_of.clone());
                if value <= self.stop_at {
                    self.done = true;
                }
            }
            return;
        }
        let p = self.order[t];
        let remaining = n - t - 1;
        let max_diam = self.block_diam.iter().copied().fold(0.0, f64::max);
        // existing blocks first, then a new one
        for b in 0..=blocks {
            if self.done || self.aborted {
                return;
            }
            let opening = b == blocks;
            if opening && blocks == self.max_blocks {
                break;
            }
            let after = blocks + usize::from(opening);
            if after + remaining < self.min_blocks {
                continue;
            }
            let mut diam_b = if opening { 0.0 } else { self.block_diam[b] };
            let mut new_delta = delta;
            for &q in &self.order[..t] {
                let d = self.x.dist(p, q);
                if self.block_of[q] == b {
                    diam_b = diam_b.max(d);
                } else {
                    new_delta = new_delta.min(d);
                }
            }
            let bound = self.objective(max_diam.max(diam_b), new_delta);
            if bound >= self.best {
                continue;
            }
            if self.nodes >= self.max_nodes
                || (self.nodes.is_multiple_of(1024) && self.deadline.is_some_and(|d| Instant::now() >= d))
            {
                self.aborted = true;
                return;
            }
            self.nodes += 1;
            self.block_of[p] = b;
            if opening {
                self.block_diam.push(diam_b);
                self.dfs(t + 1, new_delta);
                self.block_diam.pop();
            } else {
                let old = std::mem::replace(&mut self.block_diam[b], diam_b);
                self.dfs(t + 1, new_delta);
                self.block_diam[b] = old;
            }
            self.block_of[p] = usize::MAX;
        }
    }
}

/// Best map `X -> Δ` using between `min_blocks` and `max_blocks` fibres.
fn best_partition(
    x: &FiniteMetricSpace,
    m: usize,
    lambda: f64,
    min_blocks: usize,
    max_blocks: usize,
    budget: &SolverBudget,
    spent: u64,
) -> Result<(Mapping, u64, bool), SolverError> {
    let diam_delta = if m >= 2 { lambda } else { 0.0 };
    let mut search = PartitionSearch::new(x, diam_delta, min_blocks, max_blocks);
    search.stop_at = search.base.max(0.0);
    search.run(budget, spent);
    let image = match search.best_blocks {
        Some(blocks) => blocks,
        None => {
            // budget ran out before any complete partition: fall back to the
            // first feasible one (block i for the first min_blocks - 1 points)
            let mut image = vec![min_blocks.saturating_sub(1); x.len()];
            for (i, &p) in search.order.iter().take(min_blocks.saturating_sub(1)).enumerate() {
                image[p] = i;
            }
            image
        }
    };
    Ok((Mapping::new(image, m)?, search.nodes, !search.aborted))
}

/// GH distance from `X` to the regular simplex of `m` points at mutual
/// distance `lambda`.
///
/// With more simplex points than `|X|` the value is
/// `½ max{λ, diam X − λ}`; otherwise it is half the least distortion of a
/// surjection `X -> Δ`, found by searching partitions of `X` into `m` blocks.
pub fn gh_to_simplex(
    x: &FiniteMetricSpace,
    m: usize,
    lambda: f64,
    budget: &SolverBudget,
) -> Result<DistanceResult, SolverError> {
    check_simplex(m, lambda)?;
    budget.validate()?;
    let budget = budget.started();
    let delta = regular_simplex(m, lambda).map_err(|e| SolverError::InvalidInput(e.to_string()))?;
    let n = x.len();

    let (certificate, nodes, exact) = if m > n {
        // injective f, g its left inverse with the spare vertices on x_0
        let f = Mapping::new((0..n).collect(), m)?;
        let g = Mapping::new((0..m).map(|i| if i < n { i } else { 0 }).collect(), n)?;
        (MappingPair::new(f, g)?, 0, true)
    } else {
        let (f, nodes, exact) = best_partition(x, m, lambda, m, m, &budget, 0)?;
        let g = pseudoinverse(&f, x, &delta)?;
        (MappingPair::new(f, g)?, nodes, exact)
    };
    let mut result = DistanceResult {
        value: 0.0,
        kind: DistanceKind::Gh,
        lower_bound: 0.0,
        upper_bound: 0.0,
        certificate,
        nodes_explored: nodes,
        exact,
    };
    result.value = result.certified_value(x, &delta)?;
    result.upper_bound = result.value;
    result.lower_bound = if exact { result.value } else { super::analytic_bounds(x, &delta).0.min(result.value) };
    Ok(result)
}

/// Modified GH distance from `X` to a regular simplex.
///
/// `φ` (least distortion into `Δ`) is found over partitions with at most `m`
/// blocks. `γ` (least distortion out of `Δ`) is `λ` when `Δ` has more points
/// than `X`, and otherwise the better of collapsing `Δ` (cost `λ`) and the
/// best `m`-subset of `X`.
pub fn mgh_to_simplex(
    x: &FiniteMetricSpace,
    m: usize,
    lambda: f64,
    budget: &SolverBudget,
) -> Result<DistanceResult, SolverError> {
    check_simplex(m, lambda)?;
    budget.validate()?;
    let budget = budget.started();
    let delta = regular_simplex(m, lambda).map_err(|e| SolverError::InvalidInput(e.to_string()))?;
    let n = x.len();

    let (f, f_nodes, f_exact) = best_partition(x, m, lambda, 1, m, &budget, 0)?;
    let (g, g_nodes, g_exact) = if m == 1 || m > n {
        (Mapping::constant(m, n, 0)?, 0, true)
    } else {
        best_subset(x, m, lambda, &budget, f_nodes)?
    };
    let exact = f_exact && g_exact;
    let phi = distortion(&f, x, &delta)?;
    let gamma = distortion(&g, &delta, x)?;
    let value = 0.5 * phi.max(gamma);
    let lower = if exact { value } else { super::analytic_bounds(x, &delta).0.min(value) };
    Ok(DistanceResult {
        value,
        kind: DistanceKind::Mgh,
        lower_bound: lower,
        upper_bound: value,
        certificate: MappingPair::new(f, g)?,
        nodes_explored: f_nodes + g_nodes,
        exact,
    })
}

/// Least distortion of an injection `Δ -> X` (an `m`-subset of `X`), or of
/// the collapse onto `x_0` (distortion `λ`) when that is no worse.
fn best_subset(
    x: &FiniteMetricSpace,
    m: usize,
    lambda: f64,
    budget: &SolverBudget,
    spent: u64,
) -> Result<(Mapping, u64, bool), SolverError> {
    struct State<'a> {
        x: &'a FiniteMetricSpace,
        m: usize,
        lambda: f64,
        chosen: Vec<usize>,
        best: f64,
        best_set: Option<Vec<usize>>,
        nodes: u64,
        max_nodes: u64,
        deadline: Option<Instant>,
        aborted: bool,
    }

    fn dfs(s: &mut State<'_>, next: usize, cur: f64) {
        if s.chosen.len() == s.m {
            if cur < s.best {
                s.best = cur;
                s.best_set = Some(s.chosen.clone());
            }
            return;
        }
        let n = s.x.len();
        let need = s.m - s.chosen.len();
        for p in next..=n - need {
            if s.aborted {
                return;
            }
            let worst = s
                .chosen
                .iter()
                .map(|&q| (s.lambda - s.x.dist(p, q)).abs())
                .fold(cur, f64::max);
            if worst >= s.best {
                continue;
            }
            if s.nodes >= s.max_nodes || (s.nodes.is_multiple_of(1024) && s.deadline.is_some_and(|d| Instant::now() >= d)) {
                s.aborted = true;
                return;
            }
            s.nodes += 1;
            s.chosen.push(p);
            dfs(s, p + 1, worst);
            s.chosen.pop();
        }
    }

    let mut s = State {
        x,
        m,
        lambda,
        chosen: Vec::with_capacity(m),
        best: lambda,
        best_set: None,
        nodes: 0,
        max_nodes: budget.max_nodes.map_or(u64::MAX, |b| b.saturating_sub(spent)),
        deadline: budget.deadline(),
        aborted: false,
    };
    dfs(&mut s, 0, 0.0);
    let g = match s.best_set {
        Some(set) => Mapping::new(set, x.len())?,
        None => Mapping::constant(m, x.len(), 0)?,
    };
    Ok((g, s.nodes, !s.aborted))
}
