mod common;

use gh_metric::constructions::{counterexample_pair, random_metric, regular_simplex, tight_pair, u_space};
use gh_metric::mappings::{codistortion, compose, distortion, image_space, pseudoinverse, Mapping, MappingPair};
use gh_metric::solvers::{
    analytic_bounds, exact_gh, exact_gh_with, exact_mgh, gh_to_simplex, mgh_to_simplex, simplex_distortion_formula,
};
use gh_metric::{FiniteMetricSpace, SolverBudget};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-9;

fn unlimited() -> SolverBudget {
    SolverBudget::unlimited()
}

fn random_map(n: usize, m: usize, seed: u64) -> Mapping {
    let mut rng = common::rng(seed);
    Mapping::new((0..n).map(|_| rng.gen_range(0..m)).collect(), m).unwrap()
}

fn space(n: usize, seed: u64) -> FiniteMetricSpace {
    random_metric(n, seed, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn composition_distortion_is_subadditive(nx in 1usize..6, ny in 1usize..6, nz in 1usize..6, seed in any::<u64>()) {
        let (x, y, z) = (space(nx, seed), space(ny, seed ^ 1), space(nz, seed ^ 2));
        let f = random_map(nx, ny, seed);
        let g = random_map(ny, nz, seed.wrapping_add(7));
        let gf = compose(&f, &g).unwrap();
        let lhs = distortion(&gf, &x, &z).unwrap();
        let rhs = distortion(&f, &x, &y).unwrap() + distortion(&g, &y, &z).unwrap();
        prop_assert!(lhs <= rhs + TOL);
    }

    #[test]
    fn pseudoinverse_is_a_right_inverse_with_smaller_distortion(nx in 1usize..7, ny in 1usize..7, seed in any::<u64>()) {
        let (x, y) = (space(nx, seed), space(ny, seed ^ 3));
        let f = random_map(nx, ny, seed);
        let g = pseudoinverse(&f, &x, &y).unwrap();
        for p in f.range() {
            prop_assert_eq!(f.apply(g.apply(p)), p);
        }
        let img = image_space(&f, &x, &y).unwrap();
        let g_on_image = Mapping::new(img.indices.iter().map(|&p| g.apply(p)).collect(), nx).unwrap();
        prop_assert!(distortion(&g_on_image, &img.space, &x).unwrap() <= distortion(&f, &x, &y).unwrap() + TOL);
        if f.is_injective() {
            prop_assert_eq!(compose(&f, &g).unwrap(), Mapping::identity(nx));
        }
    }

    #[test]
    fn codistortion_two_sided_bounds(nx in 1usize..6, ny in 1usize..6, seed in any::<u64>()) {
        let (x, y) = (space(nx, seed), space(ny, seed ^ 5));
        let f = random_map(nx, ny, seed);
        let g = random_map(ny, nx, seed.wrapping_mul(31));
        let c = codistortion(&MappingPair::new(f.clone(), g.clone()).unwrap(), &x, &y).unwrap();
        let back_x = (0..nx).map(|i| x.dist(i, g.apply(f.apply(i)))).fold(0.0, f64::max);
        let back_y = (0..ny).map(|j| y.dist(j, f.apply(g.apply(j)))).fold(0.0, f64::max);
        prop_assert!(back_x.max(back_y) <= c + TOL);
        let upper = (distortion(&f, &x, &y).unwrap() + back_y).min(distortion(&g, &y, &x).unwrap() + back_x);
        prop_assert!(c <= upper + TOL);
    }

    #[test]
    fn simplex_formula_matches_direct_distortion(n in 1usize..6, m in 1usize..5, lambda in 0.05f64..2.0, seed in any::<u64>()) {
        let x = space(n, seed);
        let delta = regular_simplex(m, lambda).unwrap();
        let lambda = delta.diameter();
        for img in common::every_map(n, m) {
            let f = Mapping::new(img, m).unwrap();
            let direct = distortion(&f, &x, &delta).unwrap();
            prop_assert!((simplex_distortion_formula(&f, &x, lambda) - direct).abs() <= TOL);
        }
    }
}

#[test]
fn zero_codistortion_forces_isometry() {
    for seed in 0..20u64 {
        let x = space(4, seed);
        let y = x.subspace(&[3, 1, 0, 2]);
        let mut zero_pairs = 0;
        for f in common::every_map(4, 4) {
            for g in common::every_map(4, 4) {
                if common::codis(&f, &g, &x, &y) != 0.0 {
                    continue;
                }
                zero_pairs += 1;
                let (fm, gm) = (Mapping::new(f.clone(), 4).unwrap(), Mapping::new(g.clone(), 4).unwrap());
                assert_eq!(fm.inverse().as_ref(), Some(&gm));
                assert_eq!(distortion(&fm, &x, &y).unwrap(), 0.0);
                assert_eq!(distortion(&gm, &y, &x).unwrap(), 0.0);
            }
        }
        assert!(zero_pairs >= 1, "seed {seed}: the relabeling itself has codistortion 0");
    }
}

#[test]
fn bijection_between_two_point_spaces() {
    let x = regular_simplex(2, 3.0).unwrap();
    let y = regular_simplex(2, 7.0).unwrap();
    let pair = MappingPair::new(Mapping::identity(2), Mapping::identity(2)).unwrap();
    assert_eq!(codistortion(&pair, &x, &y).unwrap(), 4.0);
    assert_eq!(distortion(&pair.f, &x, &y).unwrap(), 4.0);
}

#[test]
fn solvers_agree_with_enumeration() {
    let mut checked = 0;
    for seed in 0..30u64 {
        let mut rng = common::rng(seed);
        let (nx, ny) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let (x, y) = if seed % 2 == 0 {
            (common::integer_metric(nx, 4, &mut rng), common::integer_metric(ny, 4, &mut rng))
        } else {
            (space(nx, seed), space(ny, seed + 1000))
        };
        let gh = exact_gh(&x, &y, &unlimited()).unwrap();
        let mgh = exact_mgh(&x, &y, &unlimited()).unwrap();
        assert!(gh.exact && mgh.exact);
        assert_eq!(gh.value, common::gh(&x, &y), "seed {seed}");
        assert_eq!(mgh.value, common::mgh(&x, &y), "seed {seed}");
        assert_eq!(gh.certified_value(&x, &y).unwrap(), gh.value);
        assert_eq!(mgh.certified_value(&x, &y).unwrap(), mgh.value);
        let interleaved = exact_gh_with(&x, &y, &unlimited(), false).unwrap();
        assert_eq!(interleaved.value, gh.value);
        checked += 1;
    }
    assert_eq!(checked, 30);
}

#[test]
fn distances_are_symmetric_and_bracketed() {
    for seed in 0..25u64 {
        let x = space(2 + (seed % 4) as usize, seed);
        let y = space(2 + (seed % 3) as usize, seed + 500);
        let xy = exact_gh(&x, &y, &unlimited()).unwrap().value;
        let yx = exact_gh(&y, &x, &unlimited()).unwrap().value;
        assert!((xy - yx).abs() <= TOL);
        let m_xy = exact_mgh(&x, &y, &unlimited()).unwrap().value;
        let m_yx = exact_mgh(&y, &x, &unlimited()).unwrap().value;
        assert!((m_xy - m_yx).abs() <= TOL);
        let (lo, hi) = analytic_bounds(&x, &y);
        assert!(lo <= m_xy + TOL && m_xy <= xy + TOL && xy <= hi + TOL);
    }
}

#[test]
fn triangle_inequality() {
    for seed in 0..20u64 {
        let a = space(2 + (seed % 3) as usize, seed);
        let b = space(3, seed + 100);
        let c = space(2 + (seed % 2) as usize, seed + 200);
        let d = |p: &FiniteMetricSpace, q: &FiniteMetricSpace| exact_gh(p, q, &unlimited()).unwrap().value;
        let m = |p: &FiniteMetricSpace, q: &FiniteMetricSpace| exact_mgh(p, q, &unlimited()).unwrap().value;
        assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + TOL, "seed {seed}");
        assert!(m(&a, &c) <= m(&a, &b) + m(&b, &c) + TOL, "seed {seed}");
    }
}

#[test]
fn zero_distance_exactly_for_isometric_spaces() {
    // all 2-point spaces of the same diameter are isometric, so start at 3
    for seed in 0..15u64 {
        let n = 3 + (seed % 4) as usize;
        let x = space(n, seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(seed as usize % n);
        let y = x.subspace(&perm);
        assert_eq!(exact_gh(&x, &y, &unlimited()).unwrap().value, 0.0);
        assert_eq!(exact_mgh(&x, &y, &unlimited()).unwrap().value, 0.0);
        let other = space(n, seed + 77);
        assert!(exact_gh(&x, &other, &unlimited()).unwrap().value > 0.0);
        assert!(exact_mgh(&x, &other, &unlimited()).unwrap().value > 0.0);
    }
}

#[test]
fn simplex_solvers_match_general_solvers() {
    for seed in 0..30u64 {
        let n = 1 + (seed % 5) as usize;
        let x = space(n, seed);
        let m = 1 + (seed % 4) as usize;
        let lambda = [0.3, 0.5, 1.0, 1.7][(seed / 4 % 4) as usize];
        let delta = regular_simplex(m, lambda).unwrap();
        let gh = gh_to_simplex(&x, m, lambda, &unlimited()).unwrap();
        let mgh = mgh_to_simplex(&x, m, lambda, &unlimited()).unwrap();
        let gh_ref = exact_gh(&x, &delta, &unlimited()).unwrap();
        let mgh_ref = exact_mgh(&x, &delta, &unlimited()).unwrap();
        assert!((gh.value - gh_ref.value).abs() <= TOL, "seed {seed}: {} vs {}", gh.value, gh_ref.value);
        assert!((mgh.value - mgh_ref.value).abs() <= TOL, "seed {seed}");
        assert!((gh.certified_value(&x, &delta).unwrap() - gh.value).abs() <= TOL);
        assert!((mgh.certified_value(&x, &delta).unwrap() - mgh.value).abs() <= TOL);
    }
}

#[test]
fn counterexample_values_match_enumeration() {
    // frozen from `common::gh` / `common::mgh`
    let expected = [(1, 0.5, 0.5), (2, 0.5, 0.5), (3, 1.0, 0.5)];
    for (k, gh_ref, mgh_ref) in expected {
        let (x, y) = counterexample_pair(k).unwrap();
        assert_eq!(common::gh(&x, &y), gh_ref);
        assert_eq!(common::mgh(&x, &y), mgh_ref);
        assert_eq!(exact_gh(&x, &y, &unlimited()).unwrap().value, gh_ref);
        assert_eq!(exact_mgh(&x, &y, &unlimited()).unwrap().value, mgh_ref);
    }
}

#[test]
fn largest_counterexample_agrees_across_search_orders() {
    let (x, y) = counterexample_pair(4).unwrap();
    let nested = exact_gh(&x, &y, &SolverBudget::nodes(100_000_000)).unwrap();
    let interleaved = exact_gh_with(&x, &y, &SolverBudget::nodes(100_000_000), false).unwrap();
    assert!(nested.exact && interleaved.exact);
    assert_eq!(nested.value, 1.5);
    assert_eq!(interleaved.value, 1.5);
    assert_eq!(nested.certified_value(&x, &y).unwrap(), 1.5);
}

#[test]
fn tight_pair_values() {
    for n in 1..=6u32 {
        let (x, delta) = tight_pair(n).unwrap();
        let gh = gh_to_simplex(&x, 2, delta.diameter(), &unlimited()).unwrap();
        let mgh = mgh_to_simplex(&x, 2, delta.diameter(), &unlimited()).unwrap();
        assert_eq!(gh.value, n as f64 - 0.5);
        assert_eq!(mgh.value, n as f64 / 2.0);
        if n <= 4 {
            assert_eq!(common::gh(&x, &delta), gh.value);
            assert_eq!(common::mgh(&x, &delta), mgh.value);
        }
    }
}

#[test]
fn exhausted_budget_brackets_the_true_value() {
    let x = u_space(4).unwrap();
    let y = space(6, 9);
    let full = exact_gh(&x, &y, &unlimited()).unwrap();
    assert!(full.exact);
    let cut = exact_gh(&x, &y, &SolverBudget::nodes(3)).unwrap();
    assert!(!cut.exact);
    assert!(cut.lower_bound <= full.value + TOL && full.value <= cut.upper_bound + TOL);
    assert!((cut.certified_value(&x, &y).unwrap() - cut.value).abs() <= TOL);
    assert!(exact_gh(&x, &y, &SolverBudget::nodes(0)).is_err());
}
