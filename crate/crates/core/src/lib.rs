//! Exact and approximate Gromov–Hausdorff distances between finite metric
//! spaces.
//!
//! - [`spaces`]: validated distance matrices, diameters, ε-nets.
//! - [`constructions`]: simplices, the ultrametric sequence `U_k`,
//!   disjoint-union sums, counterexample and tightness families, random
//!   spaces.
//! - [`mappings`]: maps between point sets, distortion and codistortion.
//! - [`solvers`]: exact GH and mGH by branch and bound, simplex
//!   specializations, and bound audits.
//! - [`relaxation`]: row-stochastic relaxation of the directional problem.
//! - [`io`] and [`experiment`]: file formats and the experiment runner used by
//!   the `gh-metric` binary.

pub mod constructions;
pub mod experiment;
pub mod io;
pub mod mappings;
pub mod relaxation;
pub mod solvers;
pub mod spaces;

pub use mappings::{Mapping, MappingPair};
pub use solvers::{DistanceKind, DistanceResult, SolverBudget};
pub use spaces::FiniteMetricSpace;
