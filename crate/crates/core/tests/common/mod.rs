//! Brute-force reference values, computed straight from the distance
//! matrices without going through the crate's mapping or solver code.

#![allow(dead_code)]

use gh_metric::FiniteMetricSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every map `{0..n} -> {0..m}` as an image vector.
pub fn every_map(n: usize, m: usize) -> Vec<Vec<usize>> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let v = code % m;
                    code /= m;
                    v
                })
                .collect()
        })
        .collect()
}

pub fn dis(f: &[usize], x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        for j in 0..x.len() {
            worst = worst.max((x.dist(i, j) - y.dist(f[i], f[j])).abs());
        }
    }
    worst
}

pub fn codis(f: &[usize], g: &[usize], x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        for j in 0..y.len() {
            worst = worst.max((x.dist(i, g[j]) - y.dist(f[i], j)).abs());
        }
    }
    worst
}

pub fn min_dis(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    every_map(x.len(), y.len()).iter().map(|f| dis(f, x, y)).fold(f64::INFINITY, f64::min)
}

pub fn mgh(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    0.5 * min_dis(x, y).max(min_dis(y, x))
}

/// `½ min max{dis f, dis g, codis(f, g)}` over all pairs. Maps are visited in
/// order of distortion so the scan can stop once no pair can do better.
pub fn gh(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let sorted = |maps: Vec<Vec<usize>>, a: &FiniteMetricSpace, b: &FiniteMetricSpace| {
        let mut v: Vec<(f64, Vec<usize>)> = maps.into_iter().map(|m| (dis(&m, a, b), m)).collect();
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        v
    };
    let fs = sorted(every_map(x.len(), y.len()), x, y);
    let gs = sorted(every_map(y.len(), x.len()), y, x);
    let mut best = f64::INFINITY;
    for (df, f) in &fs {
        if *df >= best {
            break;
        }
        for (dg, g) in &gs {
            let base = df.max(*dg);
            if base >= best {
                break;
            }
            best = best.min(base.max(codis(f, g, x, y)));
        }
    }
    0.5 * best
}

/// Random metric with small integer distances: shortest paths over random
/// integer edge weights in `1..=max_w`.
pub fn integer_metric(n: usize, max_w: u32, rng: &mut ChaCha8Rng) -> FiniteMetricSpace {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.gen_range(1..=max_w) as f64;
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    FiniteMetricSpace::from_rows(d, 0.0).expect("shortest-path closure is a metric")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
