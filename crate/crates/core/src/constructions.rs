//! Generators for the metric-space families used throughout the crate:
//! regular simplices, the ultrametric sequence `U_k`, disjoint-union sums,
//! the ultrametric counterexample pairs, the simplex tightness family, and
//! seeded random metrics for property testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spaces::{FiniteMetricSpace, MetricError, DEFAULT_METRIC_TOLERANCE};

/// Largest `k` accepted by [`u_space`]; `|U_20| = 1024`.
pub const U_SPACE_MAX_K: u32 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("k = {0} exceeds the cap of {U_SPACE_MAX_K}")]
    OverCap(u32),
    #[error("disjoint-union sum is not a metric: {0}")]
    ResultNotMetric(MetricError),
    #[error("disjoint-union sum is not ultrametric (need a >= max diameter)")]
    NotUltrametric,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// `m` points with every non-trivial distance equal to `lambda`.
pub fn regular_simplex(m: usize, lambda: f64) -> Result<FiniteMetricSpace, ConstructionError> {
    if m == 0 {
        return Err(ConstructionError::InvalidParameter("simplex needs m >= 1".into()));
    }
    if m >= 2 && !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ConstructionError::InvalidParameter(format!(
            "simplex diameter must be positive, got {lambda}"
        )));
    }
    let mut d = vec![lambda; m * m];
    for i in 0..m {
        d[i * m + i] = 0.0;
    }
    Ok(FiniteMetricSpace::from_flat_unchecked(m, d))
}

/// The disjoint union of `x` and `y` with every cross distance set to `a`.
///
/// Points of `x` come first. The result is validated as a metric, which
/// requires `2a >= max{diam X, diam Y}`; ultrametricity needs the stronger
/// `a >= max{diam X, diam Y}` and is checked separately by callers.
pub fn disjoint_union_sum(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    a: f64,
) -> Result<FiniteMetricSpace, ConstructionError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(ConstructionError::InvalidParameter(format!(
            "union-sum distance must be positive, got {a}"
        )));
    }
    let (nx, ny) = (x.len(), y.len());
    let n = nx + ny;
    let mut d = vec![a; n * n];
    for i in 0..nx {
        d[i * n..i * n + nx].copy_from_slice(x.row(i));
    }
    for j in 0..ny {
        let r = nx + j;
        d[r * n + nx..r * n + n].copy_from_slice(y.row(j));
    }
    FiniteMetricSpace::from_flat(n, d, 0.0).map_err(ConstructionError::ResultNotMetric)
}

/// Like [`disjoint_union_sum`] but also rejects a non-ultrametric result.
pub fn ultrametric_union_sum(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    a: f64,
) -> Result<FiniteMetricSpace, ConstructionError> {
    let z = disjoint_union_sum(x, y, a)?;
    if z.is_ultrametric(0.0) {
        Ok(z)
    } else {
        Err(ConstructionError::NotUltrametric)
    }
}

/// `U_0` is a point, `U_1` a pair at distance 1, and
/// `U_k = U_{k-2} ⊔_k U_{k-2}` (left block first).
pub fn u_space(k: u32) -> Result<FiniteMetricSpace, ConstructionError> {
    if k > U_SPACE_MAX_K {
        return Err(ConstructionError::OverCap(k));
    }
    let mut cur = if k.is_multiple_of(2) {
        FiniteMetricSpace::singleton()
    } else {
        regular_simplex(2, 1.0)?
    };
    let mut level = k % 2;
    while level < k {
        level += 2;
        cur = disjoint_union_sum(&cur, &cur, level as f64)?;
    }
    Ok(cur)
}

/// `(X_k, Y_k) = (U_{k+1}, U_k ⊔_{k+2} U_0)`.
pub fn counterexample_pair(k: u32) -> Result<(FiniteMetricSpace, FiniteMetricSpace), ConstructionError> {
    if k == 0 {
        return Err(ConstructionError::InvalidParameter("counterexample pair needs k >= 1".into()));
    }
    if k + 1 > U_SPACE_MAX_K {
        return Err(ConstructionError::OverCap(k + 1));
    }
    let x = u_space(k + 1)?;
    let y = disjoint_union_sum(&u_space(k)?, &FiniteMetricSpace::singleton(), (k + 2) as f64)?;
    Ok((x, y))
}

/// Path metric on `n + 1` points and the 2-point simplex of diameter `2n`.
pub fn tight_pair(n: u32) -> Result<(FiniteMetricSpace, FiniteMetricSpace), ConstructionError> {
    if n == 0 {
        return Err(ConstructionError::InvalidParameter("tight pair needs n >= 1".into()));
    }
    let m = n as usize + 1;
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            d[i * m + j] = (i as f64 - j as f64).abs();
        }
    }
    let x = FiniteMetricSpace::from_flat(m, d, 0.0)?;
    let simplex = regular_simplex(2, 2.0 * n as f64)?;
    Ok((x, simplex))
}

fn check_random_params(n: usize, diam_target: f64) -> Result<(), ConstructionError> {
    if n == 0 {
        return Err(ConstructionError::InvalidParameter("random space needs n >= 1".into()));
    }
    if n >= 2 && !(diam_target > 0.0 && diam_target.is_finite()) {
        return Err(ConstructionError::InvalidParameter(format!(
            "diameter target must be positive, got {diam_target}"
        )));
    }
    Ok(())
}

/// Seeded random metric: points drawn uniformly in a unit box of random
/// dimension (1 to 4), Euclidean distances, rescaled to `diam_target`.
pub fn random_metric(n: usize, seed: u64, diam_target: f64) -> Result<FiniteMetricSpace, ConstructionError> {
    check_random_params(n, diam_target)?;
    if n == 1 {
        return Ok(FiniteMetricSpace::singleton());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(1..=4usize);
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
    let mut d = vec![0.0; n * n];
    let mut diam: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let v = crate::spaces::euclidean(&points[i], &points[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
            diam = diam.max(v);
        }
    }
    let scale = diam_target / diam;
    for v in &mut d {
        *v *= scale;
    }
    Ok(FiniteMetricSpace::from_flat(n, d, DEFAULT_METRIC_TOLERANCE)?)
}

/// Seeded random ultrametric built by merging random clusters with
/// non-decreasing union-sum heights; the last merge happens at `diam_target`.
pub fn random_ultrametric(n: usize, seed: u64, diam_target: f64) -> Result<FiniteMetricSpace, ConstructionError> {
    check_random_params(n, diam_target)?;
    if n == 1 {
        return Ok(FiniteMetricSpace::singleton());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // heights in (0, 1], sorted, last one pinned to 1
    let mut heights: Vec<f64> = (0..n - 1).map(|_| 1.0 - rng.gen::<f64>()).collect();
    heights.sort_by(f64::total_cmp);
    let top = heights[n - 2];
    let heights: Vec<f64> = heights
        .iter()
        .enumerate()
        .map(|(i, h)| if i == n - 2 { diam_target } else { h / top * diam_target })
        .collect();

    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut d = vec![0.0; n * n];
    for &h in &heights {
        let a = rng.gen_range(0..clusters.len());
        let left = clusters.swap_remove(a);
        let b = rng.gen_range(0..clusters.len());
        let right = clusters.swap_remove(b);
        for &i in &left {
            for &j in &right {
                d[i * n + j] = h;
                d[j * n + i] = h;
            }
        }
        clusters.push(left.into_iter().chain(right).collect());
    }
    Ok(FiniteMetricSpace::from_flat(n, d, 0.0)?)
}

/// Declarative generator parameters, serialized as
/// `{"kind": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SpaceSpec {
    Simplex { m: usize, diam: f64 },
    USequence { k: u32 },
    UnionSum { left: Box<SpaceSpec>, right: Box<SpaceSpec>, a: f64 },
    CounterexamplePair { k: u32 },
    TightPair { n: u32 },
    RandomMetric { n: usize, seed: u64, #[serde(default = "unit")] diam: f64 },
    RandomUltrametric { n: usize, seed: u64, #[serde(default = "unit")] diam: f64 },
}

fn unit() -> f64 {
    1.0
}

impl SpaceSpec {
    /// Number of spaces the spec produces (pairs produce two).
    pub fn arity(&self) -> usize {
        match self {
            SpaceSpec::CounterexamplePair { .. } | SpaceSpec::TightPair { .. } => 2,
            _ => 1,
        }
    }

    pub fn generate(&self) -> Result<Vec<FiniteMetricSpace>, ConstructionError> {
        Ok(match self {
            SpaceSpec::Simplex { m, diam } => vec![regular_simplex(*m, *diam)?],
            SpaceSpec::USequence { k } => vec![u_space(*k)?],
            SpaceSpec::UnionSum { left, right, a } => {
                let l = left.generate_single()?;
                let r = right.generate_single()?;
                vec![disjoint_union_sum(&l, &r, *a)?]
            }
            SpaceSpec::CounterexamplePair { k } => {
                let (x, y) = counterexample_pair(*k)?;
                vec![x, y]
            }
            SpaceSpec::TightPair { n } => {
                let (x, y) = tight_pair(*n)?;
                vec![x, y]
            }
            SpaceSpec::RandomMetric { n, seed, diam } => vec![random_metric(*n, *seed, *diam)?],
            SpaceSpec::RandomUltrametric { n, seed, diam } => vec![random_ultrametric(*n, *seed, *diam)?],
        })
    }

    pub fn generate_single(&self) -> Result<FiniteMetricSpace, ConstructionError> {
        if self.arity() != 1 {
            return Err(ConstructionError::InvalidParameter(
                "expected a spec producing a single space".into(),
            ));
        }
        Ok(self.generate()?.remove(0))
    }
}
