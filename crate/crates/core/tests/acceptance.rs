//! One test per acceptance criterion. Each prints a single verdict line to the
//! unbuffered stderr handle so the line survives output capture.

use std::io::Write;
use std::time::Instant;

use rand::Rng;

use stieltjes::cantor::{cantor_derivator, cantor_iterate, Triadic};
use stieltjes::families::{family_i1, family_i2, mvt_dominance_check, FamilyKind, Member};
use stieltjes::fixtures;
use stieltjes::gdiff::{chain_rule_check, derivative_value, product_rule, quotient_rule};
use stieltjes::gexp::{exp_g_map, g_exponential, g_exponential_right, residual_check, solve_homogeneous_ac, LinearProblem};
use stieltjes::kernel::{additive_decompose, example1_h, is_kernel_member, multiplicative_decompose, step_kernel};
use stieltjes::measure::{self, ftc_roundtrip_check, ftc_roundtrip_error};
use stieltjes::metric::{bd1_distance, chordal, gamma, metric_axioms_check, PairGrid};
use stieltjes::piecewise::uniform_grid;
use stieltjes::suite::{random_ac, random_bd1, random_derivator, random_dominated_pair, random_integrand, random_step, seeded};
use stieltjes::{Derivator, PiecewiseMap, PointClass, ScalarFn};

fn verdict(id: &str, pass: bool, detail: String) {
    let line = format!("criterion {id}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn near(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol
}

fn rel_near(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * (1.0 + y.abs())
}

fn with_breakpoints(mut grid: Vec<f64>, g: &Derivator, maps: &[&PiecewiseMap]) -> Vec<f64> {
    grid.extend_from_slice(g.breakpoints());
    for m in maps {
        grid.extend_from_slice(m.breakpoints());
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn beta_one() -> PiecewiseMap {
    PiecewiseMap::constant(0.0, 3.0, 1.0)
}

#[test]
fn criterion_01_figure_values() {
    let start = Instant::now();
    let g = fixtures::example1_g(1.0, 1.0);
    let beta = beta_one();
    let problem = LinearProblem::homogeneous(beta.clone(), 1.0, g.clone());
    let v = solve_homogeneous_ac(&problem).unwrap();
    let map = exp_g_map(&beta, &g).unwrap();
    let figure = [
        (1.0, 2.718281828459045, 5.436563656918090),
        (2.0, 14.778112197861301, 29.556224395722602),
    ];
    let mut worst = 0.0f64;
    for (t, left, right) in figure {
        for (x, y) in [
            (v.at(t), left),
            (v.rl(t), right),
            (map.at(t), left),
            (map.rl(t), right),
            (g_exponential(&beta, &g, t).unwrap(), left),
            (g_exponential_right(&beta, &g, t).unwrap(), right),
        ] {
            worst = worst.max((x - y).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict("1", worst <= 1e-12 && elapsed < 1.0, format!("max figure error {worst:.2e}, {elapsed:.3}s"));
}

#[test]
fn criterion_02_non_unique_solution() {
    let g = fixtures::example1_g(1.0, 1.0);
    let problem = LinearProblem::homogeneous(beta_one(), 1.0, g.clone());
    let v = solve_homogeneous_ac(&problem).unwrap();
    let h = example1_h(&beta_one(), &g).unwrap();
    let vt = h.map.multiply(&v).unwrap();
    let e = 1f64.exp();
    let grid = uniform_grid(0.0, 3.0, 1024);
    let residual = residual_check(&vt, &problem, &grid).unwrap();
    let v_rt = ftc_roundtrip_error(&v, &g, &grid, 1e-9).unwrap();
    let vt_rt = ftc_roundtrip_error(&vt, &g, &grid, 1e-9).unwrap();
    let ok = near(vt.at(0.0), 1.0, 1e-12)
        && near(vt.at(1.0), 1.359140914229523, 1e-12)
        && near(vt.at(2.0), e * e / 2.0, 1e-12)
        && residual <= 1e-8
        && (vt.at(1.0) - v.at(1.0)).abs() > 1.0
        && v_rt <= 1e-7
        && vt_rt > 1e-3;
    verdict(
        "2",
        ok,
        format!(
            "vtilde(1) = {:.15}, vtilde(2) = {:.15}, residual {residual:.2e}, roundtrip v {v_rt:.1e} vs vtilde {vt_rt:.3}",
            vt.at(1.0),
            vt.at(2.0)
        ),
    );
}

#[test]
fn criterion_03_kernel_suite() {
    let mut rng = seeded(301);
    let mut checked = 0;
    let mut ok = true;
    for _ in 0..20 {
        let g = random_derivator(&mut rng);
        let (a, b) = g.domain();
        let s = random_step(&mut rng, &g).unwrap();
        let grid = with_breakpoints(uniform_grid(a, b, 1024), &g, &[&s]);
        ok &= is_kernel_member(&s, &g, &grid, 1e-9);
        checked += 1;
    }
    for (d1, d2) in [(1.0, 1.0), (0.5, 2.0)] {
        let g = fixtures::example1_g(d1, d2);
        for beta in [1.0, 0.5, -0.25, 2.0] {
            let h = example1_h(&PiecewiseMap::constant(0.0, 3.0, beta), &g).unwrap();
            let grid = with_breakpoints(uniform_grid(0.0, 3.0, 1024), &g, &[&h.map]);
            ok &= is_kernel_member(&h.map, &g, &grid, 1e-9);
            checked += 1;
        }
    }
    let cg = cantor_derivator(10).unwrap();
    let triadic: Vec<f64> = (0..=729).map(|k| Triadic::new(k, 6).to_f64()).collect();
    for m in 1..=5 {
        ok &= is_kernel_member(&cantor_iterate(m).unwrap(), &cg, &triadic, 1e-9);
        checked += 1;
    }
    let mut g_fails = true;
    for (g, grid) in [
        (fixtures::example1_g(1.0, 1.0), uniform_grid(0.0, 3.0, 1024)),
        (cg.clone(), triadic.clone()),
    ] {
        let gm = g.as_map();
        g_fails &= !is_kernel_member(&gm, &g, &grid, 1e-9);
        for &t in &grid {
            g_fails &= near(derivative_value(&gm, &g, t, 1e-9).unwrap(), 1.0, 1e-9);
        }
    }
    verdict("3", ok && g_fails, format!("{checked} kernel elements, g excluded with unit derivative: {g_fails}"));
}

#[test]
fn criterion_04_gamma_witnesses() {
    let start = Instant::now();
    let pairs = PairGrid::default();
    let cg = cantor_derivator(10).unwrap();
    let iterates: Vec<PiecewiseMap> = (1..=5).map(|m| cantor_iterate(m).unwrap()).collect();
    let mut min_cantor = f64::INFINITY;
    for n in 0..5 {
        for m in n + 1..5 {
            min_cantor = min_cantor.min(gamma(&iterates[n], &iterates[m], &cg, &pairs).unwrap());
        }
    }

    let g = fixtures::nontvs_g();
    let f = fixtures::nontvs_f();
    let h = f.scale(-1.0);
    let sum = f.add(&h).unwrap();
    let mut min_sum = f64::INFINITY;
    let mut bounds_ok = true;
    for k in 1..=10 {
        let k = k as f64;
        let fk = f.scale(1.0 - 1.0 / k);
        let hk = f.scale(-(1.0 + 1.0 / k));
        min_sum = min_sum.min(gamma(&sum, &fk.add(&hk).unwrap(), &g, &pairs).unwrap());
        bounds_ok &= bd1_distance(&f, &fk, &g, &pairs).unwrap().d <= 2.0 / k;
        bounds_ok &= bd1_distance(&h, &hk, &g, &pairs).unwrap().d <= 3.0 / k;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = min_cantor >= 1.0 - 1e-6 && min_sum >= 1.0 - 1e-6 && bounds_ok && elapsed < 10.0;
    verdict(
        "4",
        ok,
        format!("min gamma Cantor {min_cantor:.9}, non-TVS sums {min_sum:.9}, distance bounds {bounds_ok}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_05_ftc_roundtrip() {
    let mut rng = seeded(501);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let g = random_derivator(&mut rng);
        let (a, b) = g.domain();
        let f = random_ac(&mut rng, &g).unwrap();
        let grid = uniform_grid(a, b, 257);
        worst = worst.max(ftc_roundtrip_error(&f, &g, &grid, 1e-9).unwrap());
    }
    let cg = cantor_derivator(10).unwrap();
    let f3 = cantor_iterate(3).unwrap();
    let triadic: Vec<f64> = (0..=729).map(|k| Triadic::new(k, 6).to_f64()).collect();
    let cantor_err = ftc_roundtrip_error(&f3, &cg, &triadic, 1e-9).unwrap();
    let cantor_passes = ftc_roundtrip_check(&f3, &cg, 1e-7, &triadic).unwrap();
    // F3 runs from 1/8 to 1 with zero derivative, so the reconstruction misses by 7/8.
    let ok = worst <= 1e-7 && !cantor_passes && near(cantor_err, 0.875, 1e-12);
    verdict("5", ok, format!("max AC roundtrip {worst:.2e}; F3 roundtrip error {cantor_err} (detected failure)"));
}

fn jump_quotient(before: f64, after: f64, dg: f64) -> f64 {
    (after - before) / dg
}

fn centered(p: impl Fn(f64) -> f64, g: &Derivator, t: f64) -> f64 {
    let s = 1e-5;
    (p(t + s) - p(t - s)) / (g.at(t + s) - g.at(t - s))
}

fn regular_point(rng: &mut impl Rng, g: &Derivator) -> f64 {
    let (a, b) = g.domain();
    loop {
        let t = rng.gen_range(a..b);
        let clear = g.breakpoints().iter().all(|&x| (x - t).abs() > 1e-3);
        if clear && g.classify(t).unwrap().class == PointClass::Regular {
            return t;
        }
    }
}

#[test]
fn criterion_06_calculus_rules() {
    let mut rng = seeded(601);
    let sine = ScalarFn::new("sin", f64::sin, f64::cos);
    let (mut jumps, mut regular) = (0, 0);
    let (mut worst_jump, mut worst_regular) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let g = random_derivator(&mut rng);
        let f1 = random_bd1(&mut rng, &g).unwrap();
        let psi = random_integrand(&mut rng, &g);
        let psi = psi.multiply(&psi).unwrap().add_constant(1.0);
        let f2 = measure::indefinite(&psi, &g, measure::DEFAULT_QUAD_TOL)
            .unwrap()
            .add(&random_step(&mut rng, &g).unwrap())
            .unwrap()
            .add_constant(3.0);

        for (t, dg) in g.jump_points() {
            let (x1, r1, x2, r2) = (f1.at(t), f1.rl(t), f2.at(t), f2.rl(t));
            let cases = [
                (product_rule(&f1, &f2, &g, t, 1e-9).unwrap(), jump_quotient(x1 * x2, r1 * r2, dg)),
                (quotient_rule(&f1, &f2, &g, t, 1e-9).unwrap(), jump_quotient(x1 / x2, r1 / r2, dg)),
                (chain_rule_check(&sine, &f1, &g, t, 1e-9).unwrap().formula, jump_quotient(x1.sin(), r1.sin(), dg)),
            ];
            for (rule, oracle) in cases {
                worst_jump = worst_jump.max((rule - oracle).abs() / (1.0 + oracle.abs()));
            }
            jumps += 1;
        }
        for _ in 0..50 {
            let t = regular_point(&mut rng, &g);
            let cases = [
                (product_rule(&f1, &f2, &g, t, 1e-9).unwrap(), centered(|s| f1.at(s) * f2.at(s), &g, t)),
                (quotient_rule(&f1, &f2, &g, t, 1e-9).unwrap(), centered(|s| f1.at(s) / f2.at(s), &g, t)),
                (chain_rule_check(&sine, &f1, &g, t, 1e-9).unwrap().formula, centered(|s| f1.at(s).sin(), &g, t)),
            ];
            for (rule, oracle) in cases {
                worst_regular = worst_regular.max((rule - oracle).abs());
            }
            regular += 1;
        }
    }
    let ok = worst_jump <= 1e-12 && worst_regular <= 1e-6 && regular >= 1000;
    verdict(
        "6",
        ok,
        format!("{jumps} jumps (worst rel {worst_jump:.1e}), {regular} regular points (worst {worst_regular:.1e})"),
    );
}

/// Brute-force family membership on the 1/64 lattice and the cell midpoints.
struct GridOracle<'a> {
    g: &'a Derivator,
}

impl GridOracle<'_> {
    fn in_c(&self, x: f64) -> bool {
        let (a, b) = self.g.domain();
        let e = 1.0 / 256.0;
        a < x && x < b && self.g.at(x - e) == self.g.at(x + e)
    }

    fn in_d(&self, x: f64) -> bool {
        x < self.g.domain().1 && self.g.at(x + 1e-9) - self.g.at(x) > 1e-3
    }

    fn in_n_plus(&self, x: f64) -> bool {
        x > self.g.domain().0 && !self.in_c(x) && !self.in_d(x) && self.g.at(x - 1.0 / 64.0) == self.g.at(x)
    }

    /// Runs of consecutive items (lattice point or midpoint) satisfying `keep`.
    fn runs(&self, keep: impl Fn(f64, bool) -> bool) -> Vec<Member> {
        let (a, b) = self.g.domain();
        let n = ((b - a) * 64.0).round() as usize;
        let mut items = Vec::new();
        for k in 0..=n {
            items.push((k, true));
            if k < n {
                items.push((k, false));
            }
        }
        let x = |k: usize| a + k as f64 / 64.0;
        let mut out = Vec::new();
        let mut open: Option<Member> = None;
        for (k, lattice) in items {
            let pt = if lattice { x(k) } else { x(k) + 1.0 / 128.0 };
            if keep(pt, lattice) {
                let m = open.get_or_insert(if lattice {
                    Member { lo: x(k), hi: x(k), lo_closed: true, hi_closed: true }
                } else {
                    Member { lo: x(k), hi: x(k), lo_closed: false, hi_closed: true }
                });
                if lattice {
                    m.hi = x(k);
                    m.hi_closed = true;
                } else {
                    m.hi = x(k + 1);
                    m.hi_closed = false;
                }
            } else if let Some(m) = open.take() {
                out.push(m);
            }
        }
        out.extend(open);
        out
    }

    fn i1(&self) -> Vec<Member> {
        self.runs(|x, _| !self.in_c(x))
    }

    fn i2(&self) -> Vec<Member> {
        self.runs(|x, lattice| !self.in_c(x) && !(lattice && (self.in_d(x) || self.in_n_plus(x))))
    }
}

#[test]
fn criterion_07_interval_families() {
    let mut rng = seeded(701);
    let mut mismatches = 0;
    for _ in 0..50 {
        let g = random_derivator(&mut rng);
        let oracle = GridOracle { g: &g };
        if family_i1(&g).members != oracle.i1() || family_i2(&g).members != oracle.i2() {
            mismatches += 1;
        }
    }
    let g = fixtures::gder_g();
    let i1 = family_i1(&g).members;
    let i2 = family_i2(&g).members;
    let closed = |lo, hi| Member { lo, hi, lo_closed: true, hi_closed: true };
    let worked = i1 == vec![closed(0.0, 1.0), closed(2.0, 3.0)]
        && i2 == vec![closed(0.0, 1.0), Member { lo: 2.0, hi: 3.0, lo_closed: false, hi_closed: true }];
    verdict("7", mismatches == 0 && worked, format!("{mismatches} oracle mismatches over 50 derivators; worked example families {worked}"));
}

#[test]
fn criterion_08_mvt() {
    let mut rng = seeded(801);
    let mut held = 0;
    for _ in 0..100 {
        let g = random_derivator(&mut rng);
        let (a, b) = g.domain();
        let (f, h) = random_dominated_pair(&mut rng, &g).unwrap();
        let grid = uniform_grid(a, b, 65);
        if mvt_dominance_check(&f, &h, &g, FamilyKind::I2, &grid, 1e-8).unwrap().holds {
            held += 1;
        }
    }
    let g = fixtures::example1_g(1.0, 1.0);
    let step = step_kernel(&g, &[0.0, 1.0, 2.0]).unwrap().map;
    let zero = PiecewiseMap::constant(0.0, 3.0, 0.0);
    let grid = uniform_grid(0.0, 3.0, 97);
    let whole = mvt_dominance_check(&step, &zero, &g, FamilyKind::Whole, &grid, 1e-8).unwrap();
    let per_member = mvt_dominance_check(&step, &zero, &g, FamilyKind::I2, &grid, 1e-8).unwrap();
    let ok = held == 100 && !whole.holds && per_member.holds;
    verdict(
        "8",
        ok,
        format!("{held}/100 dominated pairs; kernel step: whole interval {}, per I2 member {}", whole.holds, per_member.holds),
    );
}

#[test]
fn criterion_09_metric_axioms() {
    let mut rng = seeded(901);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-3.0..3.0));
    let mut symmetric = true;
    let mut slack = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let (x, y, z) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        symmetric &= chordal(x, y) == chordal(y, x);
        slack = slack.max(chordal(x, z) - chordal(x, y) - chordal(y, z));
    }
    let pairs = PairGrid { uniform: 64, ..PairGrid::default() };
    let mut d_ok = 0;
    let mut d_slack = f64::NEG_INFINITY;
    for _ in 0..100 {
        let g = random_derivator(&mut rng);
        let fs: Vec<PiecewiseMap> = (0..3).map(|_| random_bd1(&mut rng, &g).unwrap()).collect();
        let r = metric_axioms_check([&fs[0], &fs[1], &fs[2]], &g, &pairs).unwrap();
        d_slack = d_slack.max(r.triangle_slack);
        if r.holds {
            d_ok += 1;
        }
    }
    let ok = symmetric && slack <= 1e-12 && d_ok == 100;
    verdict("9", ok, format!("chordal slack {slack:.1e}, symmetric {symmetric}; d axioms {d_ok}/100, slack {d_slack:.1e}"));
}

fn vtilde_setup() -> (Derivator, PiecewiseMap, PiecewiseMap, Vec<f64>) {
    let g = fixtures::example1_g(1.0, 1.0);
    let v = fixtures::example1_v();
    let vt = fixtures::example1_vtilde();
    let grid = with_breakpoints(uniform_grid(0.0, 3.0, 1024), &g, &[]);
    (g, v, vt, grid)
}

#[test]
fn criterion_10a_additive_decomposition_parts() {
    let (g, v, vt, grid) = vtilde_setup();
    let (h, rho) = additive_decompose(&vt, &g, &grid, 1e-9).unwrap();
    let expected_rho = vt.sub(&v).unwrap();
    let mut worst = 0.0f64;
    for &t in &grid {
        worst = worst.max((h.at(t) - v.at(t)).abs()).max((h.rl(t) - v.rl(t)).abs());
        worst = worst.max((rho.at(t) - expected_rho.at(t)).abs());
    }
    let e = 1f64.exp();
    verdict(
        "10a",
        worst <= 1e-8,
        format!(
            "h(1+) = {:.12} (3e/2 = {:.12}) against v(1+) = 2e = {:.12}; max gap to (v, vtilde - v) {worst:.4}",
            h.rl(1.0),
            1.5 * e,
            v.rl(1.0)
        ),
    );
}

#[test]
fn criterion_10b_additive_decomposition_kernel() {
    let (g, _, vt, grid) = vtilde_setup();
    let (h, rho) = additive_decompose(&vt, &g, &grid, 1e-9).unwrap();
    let member = is_kernel_member(&rho, &g, &grid, 1e-9);
    let exact = grid.iter().all(|&t| rel_near(h.at(t) + rho.at(t), vt.at(t), 1e-12));
    verdict("10b", member && exact && rho.at(0.0) == 0.0, format!("remainder in kernel {member}, reconstruction exact {exact}"));
}

#[test]
fn criterion_10c_multiplicative_decomposition() {
    let (g, v, vt, grid) = vtilde_setup();
    let (rho, u) = multiplicative_decompose(&vt, &g, &grid, 1e-9).unwrap();
    let h = example1_h(&beta_one(), &g).unwrap().map;
    let mut worst = 0.0f64;
    for &t in &grid {
        worst = worst
            .max((rho.at(t) - h.at(t)).abs())
            .max((u.at(t) - v.at(t)).abs() / v.at(t))
            .max((rho.at(t) * u.at(t) - vt.at(t)).abs());
    }
    verdict("10c", worst <= 1e-8, format!("max gap to (h, v) and of rho*u to vtilde {worst:.1e}"));
}
