//! Finite metric spaces stored as dense distance matrices.
//!
//! A [`FiniteMetricSpace`] is immutable once validated. All solvers in this
//! crate read distances through [`FiniteMetricSpace::dist`] or whole rows via
//! [`FiniteMetricSpace::row`].

use thiserror::Error;

/// Default metric tolerance, relative to the diameter of the input matrix.
pub const DEFAULT_METRIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("distance matrix is empty")]
    Empty,
    #[error("distance matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("tolerance must be a finite non-negative number, got {0}")]
    InvalidTolerance(f64),
    #[error("non-finite distance at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("nonzero diagonal entry at ({0}, {0})")]
    NonzeroDiagonal(usize),
    #[error("negative distance at ({0}, {1})")]
    NegativeDistance(usize, usize),
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("distinct points {0} and {1} are at distance zero")]
    ZeroOffDiagonal(usize, usize),
    #[error("triangle inequality violated: d({0}, {1}) > d({0}, {2}) + d({2}, {1})")]
    TriangleViolation(usize, usize, usize),
    #[error("label count {labels} does not match point count {n}")]
    LabelCount { labels: usize, n: usize },
    #[error("point index {index} out of range for a space of {n} points")]
    IndexOutOfRange { index: usize, n: usize },
}

/// A finite metric space given by its full distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    n: usize,
    d: Vec<f64>,
    labels: Option<Vec<String>>,
}

/// Validates `d` against the metric axioms.
///
/// `tolerance` is relative to the largest entry of `d`; pass `0.0` for exact
/// checks on integer or dyadic distances. The first violated axiom is
/// reported, scanning pairs in row-major order.
pub fn validate_metric(d: Vec<Vec<f64>>, tolerance: f64) -> Result<FiniteMetricSpace, MetricError> {
    FiniteMetricSpace::from_rows(d, tolerance)
}

impl FiniteMetricSpace {
    pub fn from_rows(rows: Vec<Vec<f64>>, tolerance: f64) -> Result<Self, MetricError> {
        let n = rows.len();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare { row, len: r.len(), n });
            }
        }
        let d: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(n, d, tolerance)
    }

    /// Builds a space from a row-major `n * n` buffer.
    pub fn from_flat(n: usize, d: Vec<f64>, tolerance: f64) -> Result<Self, MetricError> {
        if n == 0 {
            return Err(MetricError::Empty);
        }
        if d.len() != n * n {
            return Err(MetricError::NotSquare { row: 0, len: d.len(), n: n * n });
        }
        if !tolerance.is_finite() || tolerance < 0.0 {
            return Err(MetricError::InvalidTolerance(tolerance));
        }
        let space = FiniteMetricSpace { n, d, labels: None };
        space.check_axioms(tolerance)?;
        Ok(space)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, MetricError> {
        if labels.len() != self.n {
            return Err(MetricError::LabelCount { labels: labels.len(), n: self.n });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// The one-point space.
    pub fn singleton() -> Self {
        FiniteMetricSpace { n: 1, d: vec![0.0], labels: None }
    }

    fn check_axioms(&self, tolerance: f64) -> Result<(), MetricError> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                if !self.dist(i, j).is_finite() {
                    return Err(MetricError::NonFinite(i, j));
                }
            }
        }
        let slack = tolerance * self.diameter();
        for i in 0..n {
            if self.dist(i, i) != 0.0 {
                return Err(MetricError::NonzeroDiagonal(i));
            }
            for j in 0..n {
                let dij = self.dist(i, j);
                if dij < 0.0 {
                    return Err(MetricError::NegativeDistance(i, j));
                }
                if (dij - self.dist(j, i)).abs() > slack {
                    return Err(MetricError::NotSymmetric(i, j));
                }
                if i != j && dij == 0.0 {
                    return Err(MetricError::ZeroOffDiagonal(i, j));
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let dij = self.dist(i, j);
                for k in 0..n {
                    if dij > self.dist(i, k) + self.dist(k, j) + slack {
                        return Err(MetricError::TriangleViolation(i, j, k));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false: a metric space here has at least one point.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Distance matrix as nested rows.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.d.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.d
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest distance between distinct points, `None` for a singleton.
    pub fn separation(&self) -> Option<f64> {
        let n = self.n;
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.dist(i, j))
            .reduce(f64::min)
    }

    /// Checks the strong triangle inequality, returning a violating triple
    /// `(i, j, k)` with `d(i, j) > max{d(i, k), d(k, j)}` if there is one.
    pub fn ultrametric_violation(&self, tolerance: f64) -> Option<(usize, usize, usize)> {
        let n = self.n;
        let slack = tolerance * self.diameter();
        for i in 0..n {
            for j in i + 1..n {
                let dij = self.dist(i, j);
                for k in 0..n {
                    if dij > self.dist(i, k).max(self.dist(k, j)) + slack {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    pub fn is_ultrametric(&self, tolerance: f64) -> bool {
        self.ultrametric_violation(tolerance).is_none()
    }

    /// Sorted distances from point `i` to every other point.
    pub fn distance_multiset(&self, i: usize) -> Result<Vec<f64>, MetricError> {
        if i >= self.n {
            return Err(MetricError::IndexOutOfRange { index: i, n: self.n });
        }
        let mut out: Vec<f64> = self
            .row(i)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect();
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    /// The subspace induced on `indices`, in the given order.
    ///
    /// Panics if an index is out of range or repeated.
    pub fn subspace(&self, indices: &[usize]) -> FiniteMetricSpace {
        assert!(!indices.is_empty(), "subspace needs at least one point");
        let m = indices.len();
        let mut d = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                d.push(self.dist(i, j));
            }
        }
        for (a, &i) in indices.iter().enumerate() {
            assert!(!indices[..a].contains(&i), "repeated index {i} in subspace");
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        FiniteMetricSpace { n: m, d, labels }
    }

    /// Euclidean distance matrix of a point cloud (one point per row).
    pub fn from_coordinates(points: &[Vec<f64>], tolerance: f64) -> Result<Self, MetricError> {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = euclidean(&points[i], &points[j]);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self::from_flat(n, d, tolerance)
    }

    /// Wraps a buffer the caller has already shown to be a metric.
    pub(crate) fn from_flat_unchecked(n: usize, d: Vec<f64>) -> Self {
        debug_assert_eq!(d.len(), n * n);
        FiniteMetricSpace { n, d, labels: None }
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Diameter of `X`.
pub fn diameter(x: &FiniteMetricSpace) -> f64 {
    x.diameter()
}

/// Strong triangle inequality check with an optional witness triple.
pub fn is_ultrametric(x: &FiniteMetricSpace, tolerance: f64) -> (bool, Option<(usize, usize, usize)>) {
    let w = x.ultrametric_violation(tolerance);
    (w.is_none(), w)
}

/// A subset of a parent space whose closed `epsilon`-balls cover the parent.
#[derive(Debug, Clone)]
pub struct EpsilonNet<'a> {
    parent: &'a FiniteMetricSpace,
    indices: Vec<usize>,
    epsilon: f64,
}

impl<'a> EpsilonNet<'a> {
    pub fn parent(&self) -> &'a FiniteMetricSpace {
        self.parent
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest distance from a parent point to its nearest net point.
    pub fn covering_radius(&self) -> f64 {
        (0..self.parent.len())
            .map(|p| {
                self.indices
                    .iter()
                    .map(|&q| self.parent.dist(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    pub fn covers(&self) -> bool {
        self.covering_radius() <= self.epsilon
    }

    pub fn to_space(&self) -> FiniteMetricSpace {
        self.parent.subspace(&self.indices)
    }
}

/// Farthest-point greedy ε-net starting from point 0.
///
/// Ties in the farthest point go to the smallest index, so the output depends
/// only on the matrix.
pub fn greedy_epsilon_net(x: &FiniteMetricSpace, epsilon: f64) -> EpsilonNet<'_> {
    let n = x.len();
    let mut indices = vec![0];
    let mut gap: Vec<f64> = x.row(0).to_vec();
    loop {
        let (far, &radius) = gap
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if *cur.1 > *best.1 { cur } else { best });
        if radius <= epsilon || indices.len() == n {
            break;
        }
        indices.push(far);
        for (g, &v) in gap.iter_mut().zip(x.row(far)) {
            *g = g.min(v);
        }
    }
    EpsilonNet { parent: x, indices, epsilon }
}
