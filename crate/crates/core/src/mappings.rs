//! Total maps between point sets and the distortion calculus on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spaces::FiniteMetricSpace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("image entry {value} at position {index} is out of range for a target of {target_n} points")]
    OutOfRange { index: usize, value: usize, target_n: usize },
    #[error("image has {len} entries but source has {source_n} points")]
    Length { len: usize, source_n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// A total function from `0..source_n` into `0..target_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MappingRepr")]
pub struct Mapping {
    source_n: usize,
    target_n: usize,
    image: Vec<usize>,
}

#[derive(Deserialize)]
struct MappingRepr {
    source_n: usize,
    target_n: usize,
    image: Vec<usize>,
}

impl TryFrom<MappingRepr> for Mapping {
    type Error = MappingError;

    fn try_from(r: MappingRepr) -> Result<Self, Self::Error> {
        if r.image.len() != r.source_n {
            return Err(MappingError::Length { len: r.image.len(), source_n: r.source_n });
        }
        Mapping::new(r.image, r.target_n)
    }
}

impl Mapping {
    pub fn new(image: Vec<usize>, target_n: usize) -> Result<Self, MappingError> {
        if let Some((index, &value)) = image.iter().enumerate().find(|(_, &v)| v >= target_n) {
            return Err(MappingError::OutOfRange { index, value, target_n });
        }
        Ok(Mapping { source_n: image.len(), target_n, image })
    }

    pub fn identity(n: usize) -> Self {
        Mapping { source_n: n, target_n: n, image: (0..n).collect() }
    }

    pub fn constant(source_n: usize, target_n: usize, value: usize) -> Result<Self, MappingError> {
        Mapping::new(vec![value; source_n], target_n)
    }

    #[inline]
    pub fn source_n(&self) -> usize {
        self.source_n
    }

    #[inline]
    pub fn target_n(&self) -> usize {
        self.target_n
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// Sorted, deduplicated image set.
    pub fn range(&self) -> Vec<usize> {
        let mut r = self.image.clone();
        r.sort_unstable();
        r.dedup();
        r
    }

    pub fn is_injective(&self) -> bool {
        self.range().len() == self.source_n
    }

    pub fn is_surjective(&self) -> bool {
        self.range().len() == self.target_n
    }

    /// Inverse of a bijection.
    pub fn inverse(&self) -> Option<Mapping> {
        if self.source_n != self.target_n || !self.is_injective() {
            return None;
        }
        let mut inv = vec![0; self.target_n];
        for (i, &y) in self.image.iter().enumerate() {
            inv[y] = i;
        }
        Some(Mapping { source_n: self.target_n, target_n: self.source_n, image: inv })
    }

    fn check_spaces(&self, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<(), MappingError> {
        if self.source_n != x.len() || self.target_n != y.len() {
            return Err(MappingError::Dimension(format!(
                "mapping {}->{} against spaces of sizes {} and {}",
                self.source_n,
                self.target_n,
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }
}

/// A map `f: X -> Y` together with a map `g: Y -> X`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingPair {
    pub f: Mapping,
    pub g: Mapping,
}

impl MappingPair {
    pub fn new(f: Mapping, g: Mapping) -> Result<Self, MappingError> {
        if f.source_n != g.target_n || f.target_n != g.source_n {
            return Err(MappingError::Dimension(format!(
                "f is {}->{} but g is {}->{}",
                f.source_n, f.target_n, g.source_n, g.target_n
            )));
        }
        Ok(MappingPair { f, g })
    }
}

/// `max |d_X(x, x') - d_Y(f(x), f(x'))|` over all pairs, diagonal included.
pub fn distortion(f: &Mapping, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64, MappingError> {
    f.check_spaces(x, y)?;
    Ok(distortion_unchecked(f.image(), x, y))
}

pub(crate) fn distortion_unchecked(image: &[usize], x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &fi) in image.iter().enumerate() {
        let xr = x.row(i);
        let yr = y.row(fi);
        for (j, &fj) in image.iter().enumerate().skip(i + 1) {
            worst = worst.max((xr[j] - yr[fj]).abs());
        }
    }
    worst
}

/// `max |d_X(x, g(y)) - d_Y(f(x), y)|` over all `(x, y)`.
pub fn codistortion(pair: &MappingPair, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64, MappingError> {
    pair.f.check_spaces(x, y)?;
    pair.g.check_spaces(y, x)?;
    Ok(codistortion_unchecked(pair.f.image(), pair.g.image(), x, y))
}

pub(crate) fn codistortion_unchecked(f: &[usize], g: &[usize], x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        let xr = x.row(i);
        let yr = y.row(fi);
        for (j, &gj) in g.iter().enumerate() {
            worst = worst.max((xr[gj] - yr[j]).abs());
        }
    }
    worst
}

/// `max{dis f, dis g, codis(f, g)}`; half of it bounds `d_GH` from above.
pub fn pair_objective(pair: &MappingPair, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64, MappingError> {
    let df = distortion(&pair.f, x, y)?;
    let dg = distortion(&pair.g, y, x)?;
    let cd = codistortion(pair, x, y)?;
    Ok(df.max(dg).max(cd))
}

/// A right inverse of `f` on its image, extended to all of `Y`.
///
/// Image points go to their smallest-index preimage. Points outside the image
/// follow the nearest image point (ties to the smallest index).
pub fn pseudoinverse(f: &Mapping, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<Mapping, MappingError> {
    f.check_spaces(x, y)?;
    let mut pre: Vec<Option<usize>> = vec![None; y.len()];
    for (i, &fi) in f.image().iter().enumerate() {
        pre[fi].get_or_insert(i);
    }
    let range = f.range();
    let image = (0..y.len())
        .map(|p| match pre[p] {
            Some(i) => i,
            None => {
                let nearest = range
                    .iter()
                    .copied()
                    .min_by(|&a, &b| y.dist(p, a).total_cmp(&y.dist(p, b)).then(a.cmp(&b)))
                    .expect("image of a map from a non-empty space is non-empty");
                pre[nearest].unwrap()
            }
        })
        .collect();
    Ok(Mapping { source_n: y.len(), target_n: x.len(), image })
}

/// `g ∘ f`: apply `f` first, then `g`.
pub fn compose(f: &Mapping, g: &Mapping) -> Result<Mapping, MappingError> {
    if f.target_n != g.source_n {
        return Err(MappingError::Dimension(format!(
            "cannot compose {}->{} with {}->{}",
            f.source_n, f.target_n, g.source_n, g.target_n
        )));
    }
    Ok(Mapping {
        source_n: f.source_n,
        target_n: g.target_n,
        image: f.image.iter().map(|&i| g.image[i]).collect(),
    })
}

/// The subspace `f(X)` of `Y`.
#[derive(Debug, Clone)]
pub struct ImageSpace {
    pub space: FiniteMetricSpace,
    /// Indices in `Y` of the image points, ascending; point `k` of `space` is
    /// `Y`'s point `indices[k]`.
    pub indices: Vec<usize>,
    /// `f` corestricted onto `space`.
    pub surjection: Mapping,
}

pub fn image_space(f: &Mapping, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<ImageSpace, MappingError> {
    f.check_spaces(x, y)?;
    let indices = f.range();
    let mut pos = vec![usize::MAX; y.len()];
    for (k, &i) in indices.iter().enumerate() {
        pos[i] = k;
    }
    let surjection = Mapping {
        source_n: f.source_n,
        target_n: indices.len(),
        image: f.image.iter().map(|&i| pos[i]).collect(),
    };
    Ok(ImageSpace { space: y.subspace(&indices), indices, surjection })
}

/// Every map from `0..source_n` into `0..target_n`, in odometer order.
pub fn all_mappings(source_n: usize, target_n: usize) -> impl Iterator<Item = Mapping> {
    let total = (target_n as u128).checked_pow(source_n as u32).unwrap_or(u128::MAX);
    let mut image = vec![0usize; source_n];
    let mut first = target_n > 0 || source_n == 0;
    let mut emitted: u128 = 0;
    std::iter::from_fn(move || {
        if emitted >= total {
            return None;
        }
        if !first {
            for slot in image.iter_mut() {
                *slot += 1;
                if *slot < target_n {
                    break;
                }
                *slot = 0;
            }
        }
        first = false;
        emitted += 1;
        Some(Mapping { source_n, target_n, image: image.clone() })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{regular_simplex, u_space};
    use crate::spaces::validate_metric;

    fn line(n: usize) -> FiniteMetricSpace {
        let rows = (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect()).collect();
        validate_metric(rows, 0.0).unwrap()
    }

    #[test]
    fn identity_and_constant() {
        let x = line(4);
        assert_eq!(distortion(&Mapping::identity(4), &x, &x).unwrap(), 0.0);
        let c = Mapping::constant(4, 4, 2).unwrap();
        assert_eq!(distortion(&c, &x, &x).unwrap(), x.diameter());
    }

    #[test]
    fn two_point_bijection_codistortion() {
        let x = regular_simplex(2, 3.0).unwrap();
        let y = regular_simplex(2, 7.0).unwrap();
        let f = Mapping::new(vec![1, 0], 2).unwrap();
        let pair = MappingPair::new(f.clone(), f.inverse().unwrap()).unwrap();
        assert_eq!(codistortion(&pair, &x, &y).unwrap(), 4.0);
        assert_eq!(distortion(&f, &x, &y).unwrap(), 4.0);
        let id = MappingPair::new(Mapping::identity(2), Mapping::identity(2)).unwrap();
        assert_eq!(codistortion(&id, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn u_space_step_map_has_distortion_one() {
        // exhaustive minimum over all U_{k+1} -> U_k maps
        for k in 0..=3u32 {
            let big = u_space(k + 1).unwrap();
            let small = u_space(k).unwrap();
            let best = all_mappings(big.len(), small.len())
                .map(|f| distortion(&f, &big, &small).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(best, 1.0, "k={k}");
        }
    }

    #[test]
    fn pseudoinverse_rules() {
        let x = line(4);
        let y = line(5);
        let f = Mapping::new(vec![0, 0, 3, 3], 5).unwrap();
        let g = pseudoinverse(&f, &x, &y).unwrap();
        // 1 and 2 follow their nearest image points 0 and 3; 4 follows 3
        assert_eq!(g.image(), &[0, 0, 2, 2, 2]);
        for y_pt in f.range() {
            assert_eq!(f.apply(g.apply(y_pt)), y_pt);
        }
        let inj = Mapping::new(vec![4, 2, 0, 1], 5).unwrap();
        let g = pseudoinverse(&inj, &x, &y).unwrap();
        assert_eq!(compose(&inj, &g).unwrap(), Mapping::identity(4));
        let c = Mapping::constant(4, 5, 2).unwrap();
        let g = pseudoinverse(&c, &x, &y).unwrap();
        assert!(g.image().iter().all(|&i| i == 0));
    }

    #[test]
    fn compose_and_image() {
        let f = Mapping::new(vec![2, 0, 1], 3).unwrap();
        assert_eq!(compose(&f, &Mapping::identity(3)).unwrap(), f);
        assert!(compose(&f, &Mapping::identity(4)).is_err());
        let x = line(3);
        let y = line(4);
        let f = Mapping::constant(3, 4, 1).unwrap();
        assert_eq!(image_space(&f, &x, &y).unwrap().space.len(), 1);
        let s = Mapping::new(vec![3, 1, 0], 4).unwrap();
        let im = image_space(&s, &x, &y).unwrap();
        assert_eq!(im.indices, vec![0, 1, 3]);
        assert_eq!(im.surjection.image(), &[2, 1, 0]);
    }

    #[test]
    fn dimension_errors() {
        let x = line(3);
        let f = Mapping::identity(2);
        assert!(matches!(distortion(&f, &x, &x), Err(MappingError::Dimension(_))));
        assert!(Mapping::new(vec![0, 5], 3).is_err());
        assert!(MappingPair::new(Mapping::identity(2), Mapping::identity(3)).is_err());
        let bad: Result<Mapping, _> = serde_json::from_str(r#"{"source_n":3,"target_n":2,"image":[0,1]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn enumerates_all_maps() {
        assert_eq!(all_mappings(3, 2).count(), 8);
        assert_eq!(all_mappings(0, 5).count(), 1);
        assert_eq!(all_mappings(2, 3).last().unwrap().image(), &[2, 2]);
    }
}
