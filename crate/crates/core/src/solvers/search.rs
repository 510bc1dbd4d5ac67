//! Depth-first branch and bound for bottleneck assignment between two finite
//! metric spaces.
//!
//! Variables are points of `X` (valued in `Y`, the map `f`) and points of `Y`
//! (valued in `X`, the map `g`). Every term of `dis f`, `dis g` and
//! `codis(f, g)` couples exactly two variables, so the search keeps, for each
//! unassigned variable and each candidate value, the worst pairwise term
//! against the variables assigned so far. That table drives forward checking
//! (a variable with no candidate below the incumbent prunes the node), the
//! choice of the next variable, and the candidate order.

use std::time::Instant;

use crate::spaces::FiniteMetricSpace;

use super::SolverBudget;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    /// a point of `X`, valued in `Y`
    X,
    /// a point of `Y`, valued in `X`
    Y,
}

#[derive(Debug, Clone)]
struct Var {
    side: Side,
    point: usize,
    domain: usize,
    offset: usize,
    spread: f64,
}

/// Outcome of a search: the best objective found (the maximum of the active
/// distortion terms) and the images of `f` and `g` realizing it.
#[derive(Debug, Clone)]
pub(crate) struct SearchOutcome {
    pub objective: f64,
    pub f: Option<Vec<usize>>,
    pub g: Option<Vec<usize>>,
    pub complete: bool,
    pub nodes: u64,
}

pub(crate) struct BottleneckSearch<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    vars: Vec<Var>,
    /// finish all `X` variables before any `Y` variable
    nested: bool,
    table_len: usize,
    tables: Vec<Vec<f64>>,
    value: Vec<usize>,
    free: Vec<bool>,
    best: f64,
    best_value: Option<Vec<usize>>,
    stop_at: f64,
    nodes: u64,
    max_nodes: u64,
    deadline: Option<Instant>,
    aborted: bool,
    done: bool,
}

const UNSET: usize = usize::MAX;

impl<'a> BottleneckSearch<'a> {
    /// `with_f` / `with_g` select which maps are searched. Searching only `f`
    /// minimizes `dis f`; searching both minimizes
    /// `max{dis f, dis g, codis(f, g)}`.
    pub fn new(x: &'a FiniteMetricSpace, y: &'a FiniteMetricSpace, with_f: bool, with_g: bool) -> Self {
        let mut vars = Vec::new();
        let mut offset = 0;
        let mut push = |side: Side, space: &FiniteMetricSpace, domain: usize| {
            for point in 0..space.len() {
                let spread = space.row(point).iter().copied().fold(0.0, f64::max);
                vars.push(Var { side, point, domain, offset, spread });
                offset += domain;
            }
        };
        if with_f {
            push(Side::X, x, y.len());
        }
        if with_g {
            push(Side::Y, y, x.len());
        }
        let nvars = vars.len();
        BottleneckSearch {
            x,
            y,
            table_len: offset,
            tables: vec![vec![0.0; offset]; nvars + 1],
            value: vec![UNSET; nvars],
            free: vec![true; nvars],
            vars,
            nested: true,
            best: f64::INFINITY,
            best_value: None,
            stop_at: f64::NEG_INFINITY,
            nodes: 0,
            max_nodes: u64::MAX,
            deadline: None,
            aborted: false,
            done: false,
        }
    }

    pub fn nested(mut self, nested: bool) -> Self {
        self.nested = nested;
        self
    }

    /// Only solutions strictly below `objective` are reported.
    pub fn incumbent(mut self, objective: f64) -> Self {
        self.best = objective;
        self
    }

    /// Stop as soon as a solution at or below `lower` is found.
    pub fn stop_at(mut self, lower: f64) -> Self {
        self.stop_at = lower;
        self
    }

    pub fn budget(mut self, budget: &SolverBudget, already_spent: u64) -> Self {
        self.max_nodes = budget.max_nodes.map_or(u64::MAX, |m| m.saturating_sub(already_spent));
        self.deadline = budget.deadline();
        self
    }

    pub fn run(mut self) -> SearchOutcome {
        if self.best > self.stop_at && !self.vars.is_empty() {
            self.dfs(0, 0.0);
        }
        let (f, g) = match &self.best_value {
            Some(v) => self.split(v),
            None => (None, None),
        };
        SearchOutcome {
            objective: self.best,
            f,
            g,
            complete: !self.aborted,
            nodes: self.nodes,
        }
    }

    fn split(&self, values: &[usize]) -> (Option<Vec<usize>>, Option<Vec<usize>>) {
        let mut f = vec![UNSET; self.x.len()];
        let mut g = vec![UNSET; self.y.len()];
        let (mut has_f, mut has_g) = (false, false);
        for (var, &v) in self.vars.iter().zip(values) {
            match var.side {
                Side::X => {
                    f[var.point] = v;
                    has_f = true;
                }
                Side::Y => {
                    g[var.point] = v;
                    has_g = true;
                }
            }
        }
        (has_f.then_some(f), has_g.then_some(g))
    }

    /// Picks the free variable with the largest lower bound, then the fewest
    /// candidates below the incumbent, then the largest eccentricity.
    fn select(&self, depth: usize) -> Option<usize> {
        let table = &self.tables[depth];
        let nested_x_left = self.nested
            && self
                .vars
                .iter()
                .zip(&self.free)
                .any(|(v, &free)| free && v.side == Side::X);
        let mut pick: Option<(usize, f64, usize)> = None;
        for (i, var) in self.vars.iter().enumerate() {
            if !self.free[i] || (nested_x_left && var.side == Side::Y) {
                continue;
            }
            let row = &table[var.offset..var.offset + var.domain];
            let lower = row.iter().copied().fold(f64::INFINITY, f64::min);
            let feasible = row.iter().filter(|&&c| c < self.best).count();
            let better = match pick {
                None => true,
                Some((j, plo, pfeas)) => {
                    lower > plo
                        || (lower == plo && feasible < pfeas)
                        || (lower == plo && feasible == pfeas && var.spread > self.vars[j].spread)
                }
            };
            if better {
                pick = Some((i, lower, feasible));
            }
        }
        pick.map(|p| p.0)
    }

    fn over_budget(&mut self) -> bool {
        if self.nodes >= self.max_nodes {
            return true;
        }
        if let Some(deadline) = self.deadline {
            if self.nodes.is_multiple_of(1024) && Instant::now() >= deadline {
                return true;
            }
        }
        false
    }

    fn dfs(&mut self, depth: usize, cur: f64) {
        let Some(vi) = self.select(depth) else {
            if cur < self.best {
                self.best = cur;
                self.best_value = Some(self.value.clone());
                if self.best <= self.stop_at {
                    self.done = true;
                }
            }
            return;
        };
        let (offset, domain) = (self.vars[vi].offset, self.vars[vi].domain);
        let mut candidates: Vec<(f64, usize)> = self.tables[depth][offset..offset + domain]
            .iter()
            .enumerate()
            .filter(|(_, &c)| c < self.best)
            .map(|(a, &c)| (c, a))
            .collect();
        candidates.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));

        self.free[vi] = false;
        for (cost, a) in candidates {
            if self.done || self.aborted || cost >= self.best {
                break;
            }
            if self.over_budget() {
                self.aborted = true;
                break;
            }
            self.nodes += 1;
            self.value[vi] = a;
            if self.propagate(depth, vi, a) {
                self.dfs(depth + 1, cur.max(cost));
            }
        }
        self.value[vi] = UNSET;
        self.free[vi] = true;
    }

    /// Fills the table at `depth + 1` from the one at `depth` after fixing
    /// `vi = a`. Returns false when some free variable has no candidate left.
    fn propagate(&mut self, depth: usize, vi: usize, a: usize) -> bool {
        let (lo, hi) = self.tables.split_at_mut(depth + 1);
        let src = &lo[depth];
        let dst = &mut hi[0];
        debug_assert_eq!(dst.len(), self.table_len);
        let x = self.x;
        let y = self.y;
        let fixed = &self.vars[vi];
        for (wi, w) in self.vars.iter().enumerate() {
            if !self.free[wi] {
                continue;
            }
            let from = &src[w.offset..w.offset + w.domain];
            let to = &mut dst[w.offset..w.offset + w.domain];
            // pair term between w (candidate value b) and the fixed variable
            match (w.side, fixed.side) {
                (Side::X, Side::X) => {
                    let dx = x.dist(w.point, fixed.point);
                    let yr = y.row(a);
                    for ((t, &s), &dy) in to.iter_mut().zip(from).zip(yr) {
                        *t = s.max((dx - dy).abs());
                    }
                }
                (Side::Y, Side::Y) => {
                    let dy = y.dist(w.point, fixed.point);
                    let xr = x.row(a);
                    for ((t, &s), &dx) in to.iter_mut().zip(from).zip(xr) {
                        *t = s.max((dy - dx).abs());
                    }
                }
                (Side::X, Side::Y) => {
                    // f(w) = b, g(fixed) = a: |d_X(w, a) - d_Y(b, fixed)|
                    let dx = x.dist(w.point, a);
                    let yr = y.row(fixed.point);
                    for ((t, &s), &dy) in to.iter_mut().zip(from).zip(yr) {
                        *t = s.max((dx - dy).abs());
                    }
                }
                (Side::Y, Side::X) => {
                    // f(fixed) = a, g(w) = b: |d_X(fixed, b) - d_Y(a, w)|
                    let dy = y.dist(a, w.point);
                    let xr = x.row(fixed.point);
                    for ((t, &s), &dx) in to.iter_mut().zip(from).zip(xr) {
                        *t = s.max((dx - dy).abs());
                    }
                }
            }
            if to.iter().all(|&c| c >= self.best) {
                return false;
            }
        }
        true
    }
}
