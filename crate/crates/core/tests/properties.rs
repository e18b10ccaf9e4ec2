use proptest::prelude::*;

use stieltjes::cantor::{cantor_derivator, cantor_iterate, Triadic};
use stieltjes::fixtures;
use stieltjes::gdiff::derivative_value;
use stieltjes::gexp::{exp_g_map, g_exponential};
use stieltjes::measure::{indefinite, integrate, mu, GInterval, DEFAULT_QUAD_TOL};
use stieltjes::metric::{chordal, gamma, PairGrid};
use stieltjes::piecewise::uniform_grid;
use stieltjes::suite::{random_ac, random_bd1, random_derivator, random_integrand, seeded};
use stieltjes::{Derivator, PiecewiseMap};

fn finite() -> impl Strategy<Value = f64> {
    (-1.0f64..1.0, -4.0f64..4.0).prop_map(|(m, e)| m * 10f64.powf(e))
}

fn random_g(seed: u64) -> Derivator {
    random_derivator(&mut seeded(seed))
}

fn small_pairs() -> PairGrid {
    PairGrid { uniform: 48, ..PairGrid::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chordal_is_a_bounded_symmetric_metric(x in finite(), y in finite(), z in finite()) {
        let d = chordal(x, y);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, chordal(y, x));
        prop_assert_eq!(chordal(x, x), 0.0);
        prop_assert!(chordal(x, z) <= d + chordal(y, z) + 1e-12);
    }

    #[test]
    fn chordal_matches_sine_of_direction_angle(x in finite(), y in finite()) {
        let angle = (y.atan() - x.atan()).abs();
        prop_assert!((chordal(x, y) - angle.sin()).abs() <= 1e-12);
    }

    #[test]
    fn mu_is_additive(seed in 0u64..10_000, s in 0.0f64..1.0, u in 0.0f64..1.0) {
        let g = random_g(seed);
        let (a, b) = g.domain();
        let (lo, hi) = (a + s.min(u) * (b - a), a + s.max(u) * (b - a));
        let whole = mu(&g, GInterval { lo: a, hi: b }).unwrap();
        let parts = mu(&g, GInterval { lo: a, hi: lo }).unwrap()
            + mu(&g, GInterval { lo, hi }).unwrap()
            + mu(&g, GInterval { lo: hi, hi: b }).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole.abs()));
    }

    #[test]
    fn indefinite_agrees_with_integrate(seed in 0u64..10_000, s in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let g = random_derivator(&mut rng);
        let phi = random_integrand(&mut rng, &g);
        let (a, b) = g.domain();
        let t = a + s * (b - a);
        let big = indefinite(&phi, &g, DEFAULT_QUAD_TOL).unwrap();
        let direct = integrate(&phi, &g, GInterval { lo: a, hi: t }, DEFAULT_QUAD_TOL).unwrap().value;
        prop_assert!((big.at(t) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn g_differentiates_to_one(seed in 0u64..10_000, s in 0.0f64..1.0) {
        let g = random_g(seed);
        let (a, b) = g.domain();
        let t = a + s * (b - a);
        let d = derivative_value(&g.as_map(), &g, t, 1e-9).unwrap();
        prop_assert!((d - 1.0).abs() <= 1e-9, "derivative {} at {}", d, t);
    }

    #[test]
    fn exponential_of_zero_is_one(seed in 0u64..10_000, s in 0.0f64..=1.0) {
        let g = random_g(seed);
        let (a, b) = g.domain();
        let zero = PiecewiseMap::constant(a, b, 0.0);
        prop_assert_eq!(g_exponential(&zero, &g, a + s * (b - a)).unwrap(), 1.0);
    }

    #[test]
    fn exponential_jump_factor(seed in 0u64..10_000, p in -0.5f64..1.0) {
        let g = random_g(seed);
        let (a, b) = g.domain();
        let beta = PiecewiseMap::constant(a, b, p);
        let e = exp_g_map(&beta, &g).unwrap();
        for (t, dg) in g.jump_points() {
            let expected = e.at(t) * (1.0 + p * dg);
            prop_assert!((e.rl(t) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gamma_is_symmetric_and_shift_invariant(seed in 0u64..10_000, c in -3.0f64..3.0) {
        let mut rng = seeded(seed);
        let g = random_derivator(&mut rng);
        let f = random_bd1(&mut rng, &g).unwrap();
        let h = random_bd1(&mut rng, &g).unwrap();
        let pairs = small_pairs();
        let fh = gamma(&f, &h, &g, &pairs).unwrap();
        prop_assert_eq!(fh, gamma(&h, &f, &g, &pairs).unwrap());
        // shifting changes rounding in the finest near-diagonal quotients
        let shifted = gamma(&f.add_constant(c), &h.add_constant(c), &g, &pairs).unwrap();
        prop_assert!((fh - shifted).abs() <= 1e-6);
    }

    #[test]
    fn gamma_below_derivative_gap_for_smooth_pairs(seed in 0u64..10_000) {
        let g = Derivator::identity(0.0, 2.0).unwrap();
        let mut rng = seeded(seed);
        let f = random_ac(&mut rng, &g).unwrap();
        let h = random_ac(&mut rng, &g).unwrap();
        let grid = uniform_grid(0.0, 2.0, 257);
        let mut gap = 0.0f64;
        for &t in &grid {
            let df = derivative_value(&f, &g, t, 1e-9).unwrap();
            let dh = derivative_value(&h, &g, t, 1e-9).unwrap();
            gap = gap.max((df - dh).abs());
        }
        prop_assert!(gamma(&f, &h, &g, &small_pairs()).unwrap() <= gap + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cantor_iterates_within_uniform_gap(n in 1u32..8, k in 0u64..=2187) {
        // |F_n - F_m| <= 2^-n for m >= n
        let x = Triadic::new(k, 7).to_f64();
        let fine = cantor_iterate(9).unwrap();
        let coarse = cantor_iterate(n).unwrap();
        prop_assert!((coarse.at(x) - fine.at(x)).abs() <= 0.5f64.powi(n as i32) + 1e-15);
    }

    #[test]
    fn cantor_iterates_vanish_under_the_cantor_derivator(m in 1u32..5, k in 0u64..=243) {
        let g = cantor_derivator(8).unwrap();
        let x = Triadic::new(k, 5).to_f64();
        let d = derivative_value(&cantor_iterate(m).unwrap(), &g, x, 1e-9).unwrap();
        prop_assert!(d.abs() <= 1e-9);
    }
}

#[test]
fn example_jump_factors_are_exact() {
    let g = fixtures::example1_g(1.0, 1.0);
    let beta = PiecewiseMap::constant(0.0, 3.0, 1.0);
    let e = 1f64.exp();
    assert_eq!(g_exponential(&beta, &g, 0.0).unwrap(), 1.0);
    assert!((g_exponential(&beta, &g, 1.5).unwrap() - 2.0 * 1.5f64.exp()).abs() <= 1e-12);
    assert!((g_exponential(&beta, &g, 3.0).unwrap() - 4.0 * e.powi(3)).abs() <= 1e-11);
}
