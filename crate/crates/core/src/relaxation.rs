//! Continuous relaxation of the directional distortion minimization.
//!
//! A map `f: X -> Y` is a binary row-stochastic matrix `P` and
//! `dis f = max |D_X − P·D_Y·Pᵀ|` entrywise. Relaxing `P` to the whole
//! row-stochastic polytope gives a continuous problem; we minimize the smooth
//! surrogate `Σ |D_X − P·D_Y·Pᵀ|^p` by projected gradient descent from
//! several starts and round each row to its argmax.
//!
//! Only the distortion of the rounded map is certified (it is the distortion
//! of a feasible map, so it bounds the directional minimum from above). The
//! continuous objective is a heuristic signal.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mappings::{distortion, Mapping, MappingError};
use crate::spaces::FiniteMetricSpace;

#[derive(Debug, Error)]
pub enum RelaxationError {
    #[error("matrix is {rows}x{cols}, expected {source_n}x{target_n}")]
    Shape { rows: usize, cols: usize, source_n: usize, target_n: usize },
    #[error("row {0} is not a probability vector")]
    NotStochastic(usize),
    #[error("invalid relaxation setting: {0}")]
    Config(String),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

/// A row-stochastic `source_n × target_n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMapping {
    p: Array2<f64>,
}

const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl SoftMapping {
    pub fn new(p: Array2<f64>) -> Result<Self, RelaxationError> {
        for (i, row) in p.axis_iter(Axis(0)).enumerate() {
            let sum: f64 = row.sum();
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(RelaxationError::NotStochastic(i));
            }
        }
        Ok(SoftMapping { p })
    }

    /// The binary matrix of `f`.
    pub fn from_mapping(f: &Mapping) -> Self {
        let mut p = Array2::zeros((f.source_n(), f.target_n()));
        for (i, &j) in f.image().iter().enumerate() {
            p[[i, j]] = 1.0;
        }
        SoftMapping { p }
    }

    pub fn uniform(source_n: usize, target_n: usize) -> Self {
        SoftMapping { p: Array2::from_elem((source_n, target_n), 1.0 / target_n as f64) }
    }

    pub fn source_n(&self) -> usize {
        self.p.nrows()
    }

    pub fn target_n(&self) -> usize {
        self.p.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.p.outer_iter().map(|r| r.to_vec()).collect()
    }

    /// Rounds every row to its largest entry (ties to the smallest column).
    pub fn round(&self) -> Mapping {
        let image = self
            .p
            .outer_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                    .0
            })
            .collect();
        Mapping::new(image, self.target_n()).expect("argmax is in range")
    }
}

fn distance_matrix(x: &FiniteMetricSpace) -> Array2<f64> {
    Array2::from_shape_vec((x.len(), x.len()), x.as_flat().to_vec()).expect("square buffer")
}

/// `max |D_X − P·D_Y·Pᵀ|` over all entries.
pub fn soft_distortion(p: &SoftMapping, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64, RelaxationError> {
    check_shape(p, x, y)?;
    let dx = distance_matrix(x);
    let dy = distance_matrix(y);
    Ok(discrepancy(&p.p, &dx, &dy).iter().fold(0.0, |m, v| m.max(v.abs())))
}

fn check_shape(p: &SoftMapping, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<(), RelaxationError> {
    if p.source_n() != x.len() || p.target_n() != y.len() {
        return Err(RelaxationError::Shape {
            rows: p.source_n(),
            cols: p.target_n(),
            source_n: x.len(),
            target_n: y.len(),
        });
    }
    Ok(())
}

fn discrepancy(p: &Array2<f64>, dx: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    dx - &p.dot(dy).dot(&p.t())
}

/// Settings for [`relax_mgh_direction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelaxConfig {
    /// exponent of the smooth surrogate
    pub p: u32,
    pub restarts: usize,
    pub max_iters: usize,
    /// initial step, in matrix-entry units along the max-normalized gradient
    pub step_size: f64,
    pub seed: u64,
    /// optional warm start used as the first restart
    #[serde(skip)]
    pub initial: Option<Mapping>,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig { p: 8, restarts: 16, max_iters: 500, step_size: 0.5, seed: 0, initial: None }
    }
}

impl RelaxConfig {
    fn validate(&self) -> Result<(), RelaxationError> {
        if self.p < 2 {
            return Err(RelaxationError::Config(format!("p must be at least 2, got {}", self.p)));
        }
        if self.restarts == 0 {
            return Err(RelaxationError::Config("at least one restart is required".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(RelaxationError::Config(format!("step size must be positive, got {}", self.step_size)));
        }
        Ok(())
    }
}

/// Result of [`relax_mgh_direction`] for the best restart.
#[derive(Debug, Clone)]
pub struct RelaxOutcome {
    pub soft: SoftMapping,
    /// best argmax rounding over the accepted iterates of the winning restart
    pub rounded: Mapping,
    /// `max |D_X − P·D_Y·Pᵀ|` at the continuous point (heuristic only)
    pub continuous_objective: f64,
    /// distortion of the rounded map (a certified upper bound)
    pub rounded_distortion: f64,
    /// surrogate values at every accepted step, in distance units
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
}

impl RelaxOutcome {
    /// `[heuristic lower signal, certified upper bound]`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.continuous_objective, self.rounded_distortion)
    }
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_to_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

struct Problem {
    dx: Array2<f64>,
    dy: Array2<f64>,
    scale: f64,
    p: i32,
}

impl Problem {
    fn surrogate(&self, pm: &Array2<f64>, p: i32) -> f64 {
        discrepancy(pm, &self.dx, &self.dy).iter().map(|e| e.abs().powi(p)).sum()
    }

    fn gradient(&self, pm: &Array2<f64>, p: i32) -> Array2<f64> {
        let e = discrepancy(pm, &self.dx, &self.dy);
        let g = e.mapv(|v| p as f64 * v.abs().powi(p - 2) * v);
        // E is symmetric, so d/dP Σ|E|^p = −2·G·P·D_Y
        g.dot(pm).dot(&self.dy) * -2.0
    }

    /// `‖E‖_p` in distance units. Non-increasing in `p` at a fixed point.
    fn to_units(&self, s: f64, p: i32) -> f64 {
        s.powf(1.0 / p as f64) * self.scale
    }

    /// Exponents visited by the continuation: 2, 4, ... doubling up to `p`.
    fn schedule(&self) -> Vec<i32> {
        let mut out = Vec::new();
        let mut q = 2;
        while q < self.p {
            out.push(q);
            q *= 2;
        }
        out.push(self.p);
        out
    }
}

struct RunOutcome {
    p: Array2<f64>,
    /// best argmax rounding over all accepted iterates
    rounded: Mapping,
    rounded_distortion: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn round_rows(pm: &Array2<f64>, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> (Mapping, f64) {
    let f = SoftMapping { p: pm.clone() }.round();
    let d = distortion(&f, x, y).expect("shapes match");
    (f, d)
}

/// Projected gradient descent on the `ℓ_q` surrogate for each `q` of the
/// continuation schedule in turn, finishing at the configured `p`.
fn descend(
    problem: &Problem,
    mut pm: Array2<f64>,
    cfg: &RelaxConfig,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
) -> RunOutcome {
    let (mut rounded, mut rounded_distortion) = round_rows(&pm, x, y);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for q in problem.schedule() {
        let mut value = problem.surrogate(&pm, q);
        trace.push(problem.to_units(value, q));
        let mut step = cfg.step_size;
        converged = false;
        let mut stage_iters = 0;
        while stage_iters < cfg.max_iters {
            stage_iters += 1;
            let grad = problem.gradient(&pm, q);
            let norm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm == 0.0 {
                converged = true;
                break;
            }
            let mut accepted = false;
            while step > 1e-12 {
                let mut trial = &pm - &(&grad * (step / norm));
                for mut row in trial.outer_iter_mut() {
                    project_to_simplex(row.as_slice_mut().expect("rows are contiguous"));
                }
                let trial_value = problem.surrogate(&trial, q);
                if trial_value < value {
                    let gain = value - trial_value;
                    pm = trial;
                    value = trial_value;
                    let (f, d) = round_rows(&pm, x, y);
                    if d < rounded_distortion {
                        rounded = f;
                        rounded_distortion = d;
                    }
                    trace.push(problem.to_units(value, q));
                    step *= 1.5;
                    accepted = true;
                    if gain <= 1e-14 * value.max(1e-300) {
                        converged = true;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted || converged {
                converged = true;
                break;
            }
        }
        iterations += stage_iters;
    }
    RunOutcome { p: pm, rounded, rounded_distortion, trace, iterations, converged }
}

fn start_point(restart: usize, x_n: usize, y_n: usize, cfg: &RelaxConfig) -> Array2<f64> {
    let offset = usize::from(cfg.initial.is_some());
    if let (0, Some(f)) = (restart, &cfg.initial) {
        return SoftMapping::from_mapping(f).p;
    }
    if restart == offset {
        return SoftMapping::uniform(x_n, y_n).p;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
    let image: Vec<usize> = (0..x_n).map(|_| rng.gen_range(0..y_n)).collect();
    SoftMapping::from_mapping(&Mapping::new(image, y_n).expect("in range")).p
}

/// Relaxed minimization of `dis f` over maps `X -> Y`, with argmax rounding.
pub fn relax_mgh_direction(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    cfg: &RelaxConfig,
) -> Result<RelaxOutcome, RelaxationError> {
    cfg.validate()?;
    if let Some(f) = &cfg.initial {
        if f.source_n() != x.len() || f.target_n() != y.len() {
            return Err(RelaxationError::Config("initial mapping has the wrong shape".into()));
        }
    }
    let scale = x.diameter().max(y.diameter()).max(f64::MIN_POSITIVE);
    let problem = Problem {
        dx: distance_matrix(x) / scale,
        dy: distance_matrix(y) / scale,
        scale,
        p: cfg.p as i32,
    };
    let runs = cfg.restarts + usize::from(cfg.initial.is_some());
    let outcomes: Vec<RelaxOutcome> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let run = descend(&problem, start_point(r, x.len(), y.len(), cfg), cfg, x, y);
            let soft = SoftMapping { p: run.p };
            let continuous_objective = soft_distortion(&soft, x, y)?;
            Ok(RelaxOutcome {
                soft,
                rounded: run.rounded,
                continuous_objective,
                rounded_distortion: run.rounded_distortion,
                trace: run.trace,
                iterations: run.iterations,
                converged: run.converged,
                restart: r,
            })
        })
        .collect::<Result<_, RelaxationError>>()?;
    Ok(outcomes
        .into_iter()
        .min_by(|a, b| {
            a.rounded_distortion
                .total_cmp(&b.rounded_distortion)
                .then(a.continuous_objective.total_cmp(&b.continuous_objective))
                .then(a.restart.cmp(&b.restart))
        })
        .expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{random_metric, regular_simplex};
    use crate::mappings::all_mappings;

    #[test]
    fn projection_lands_on_simplex() {
        let mut v = vec![0.9, 0.8, -0.3, 0.1];
        project_to_simplex(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|&a| a >= 0.0));
        assert!((v[0] - 0.55).abs() < 1e-12 && (v[1] - 0.45).abs() < 1e-12);
        let mut w = vec![0.2, 0.3, 0.5];
        project_to_simplex(&mut w);
        assert_eq!(w, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn binary_matrix_matches_distortion() {
        let x = random_metric(3, 4, 1.0).unwrap();
        let y = random_metric(3, 5, 2.0).unwrap();
        for f in all_mappings(3, 3) {
            let soft = SoftMapping::from_mapping(&f);
            let a = soft_distortion(&soft, &x, &y).unwrap();
            let b = distortion(&f, &x, &y).unwrap();
            assert!((a - b).abs() <= 1e-12, "{f:?}: {a} vs {b}");
            assert_eq!(soft.round(), f);
        }
    }

    #[test]
    fn uniform_plan_into_simplex() {
        // P·D·Pᵀ is constant (m−1)λ/m everywhere for the uniform plan
        let (m, lambda) = (4, 2.0);
        let x = random_metric(3, 8, 1.0).unwrap();
        let d = regular_simplex(m, lambda).unwrap();
        let soft = SoftMapping::uniform(3, m);
        let c = (m as f64 - 1.0) * lambda / m as f64;
        let expected = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (x.dist(i, j) - c).abs())
            .fold(0.0, f64::max);
        assert!((soft_distortion(&soft, &x, &d).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn warm_start_on_isometry() {
        let x = random_metric(5, 1, 1.0).unwrap();
        let perm = [4, 2, 0, 1, 3];
        let y = x.subspace(&perm);
        // f(i) = position of i in perm
        let mut image = vec![0; 5];
        for (k, &i) in perm.iter().enumerate() {
            image[i] = k;
        }
        let cfg = RelaxConfig { initial: Some(Mapping::new(image, 5).unwrap()), ..RelaxConfig::default() };
        let out = relax_mgh_direction(&x, &y, &cfg).unwrap();
        assert_eq!(out.rounded_distortion, 0.0);
    }

    #[test]
    fn trace_is_non_increasing() {
        let x = random_metric(5, 10, 1.0).unwrap();
        let y = random_metric(4, 11, 1.0).unwrap();
        let out = relax_mgh_direction(&x, &y, &RelaxConfig::default()).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        let soft = &out.soft;
        for row in soft.matrix().outer_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let x = random_metric(3, 1, 1.0).unwrap();
        let bad = Array2::from_elem((3, 2), 0.4);
        assert!(SoftMapping::new(bad).is_err());
        let cfg = RelaxConfig { p: 1, ..RelaxConfig::default() };
        assert!(relax_mgh_direction(&x, &x, &cfg).is_err());
        assert!(soft_distortion(&SoftMapping::uniform(2, 3), &x, &x).is_err());
    }

    #[test]
    fn recovers_counterexample_direction() {
        let (x, y) = crate::constructions::counterexample_pair(2).unwrap();
        let out = relax_mgh_direction(&x, &y, &RelaxConfig::default()).unwrap();
        assert_eq!(out.rounded_distortion, 1.0);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
