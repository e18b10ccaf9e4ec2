//! Worked examples used by tests, the CLI and the acceptance suite.

use crate::derivator::{DeclaredLimit, Derivator, SegmentForm};
use crate::expr::{ExpPoly, Expr};
use crate::piecewise::PiecewiseMap;

fn affine(slope: f64, intercept: f64) -> SegmentForm {
    SegmentForm::Affine { slope, intercept }
}

/// `x` on [0,1], `1` on (1,2), `x - 1` on [2,3].
pub fn gder_g() -> Derivator {
    Derivator::build(
        (0.0, 3.0),
        vec![0.0, 1.0, 2.0, 3.0],
        vec![affine(1.0, 0.0), SegmentForm::Constant { level: 1.0 }, affine(1.0, -1.0)],
        vec![],
    )
    .expect("plateau example is a derivator")
}

/// `x` on [0,1], `x + 1` on (1,3].
pub fn gder_f() -> PiecewiseMap {
    PiecewiseMap::new(vec![0.0, 1.0, 3.0], vec![Expr::affine(1.0, 0.0), Expr::affine(1.0, 1.0)], &[], &[])
        .expect("valid map")
}

/// `x` on [0,2), `2x + 1` on [2,3].
pub fn fder_f() -> PiecewiseMap {
    PiecewiseMap::new(vec![0.0, 2.0, 3.0], vec![Expr::affine(1.0, 0.0), Expr::affine(2.0, 1.0)], &[(2.0, 5.0)], &[])
        .expect("valid map")
}

/// `t` on [0,1], `t + δ₁` on (1,2], `t + δ₁ + δ₂` on (2,3].
pub fn example1_g(delta1: f64, delta2: f64) -> Derivator {
    Derivator::build(
        (0.0, 3.0),
        vec![0.0, 1.0, 2.0, 3.0],
        vec![affine(1.0, 0.0), affine(1.0, delta1), affine(1.0, delta1 + delta2)],
        vec![(1.0, delta1), (2.0, delta2)],
    )
    .expect("jump example is a derivator")
}

/// The absolutely continuous solution of `v' = v`, `v(0) = 1` over `example1_g(1, 1)`:
/// `e^t`, `2e^t`, `4e^t` on the three pieces.
pub fn example1_v() -> PiecewiseMap {
    PiecewiseMap::new(
        vec![0.0, 1.0, 2.0, 3.0],
        vec![ExpPoly::exp(1.0, 1.0).into(), ExpPoly::exp(2.0, 1.0).into(), ExpPoly::exp(4.0, 1.0).into()],
        &[],
        &[],
    )
    .expect("valid map")
}

/// The kernel-perturbed solution: `e^t` off the jumps, `e/2` at 1 and `e²/2` at 2.
pub fn example1_vtilde() -> PiecewiseMap {
    let e: Expr = ExpPoly::exp(1.0, 1.0).into();
    PiecewiseMap::new(
        vec![0.0, 1.0, 2.0, 3.0],
        vec![e.clone(), e.clone(), e],
        &[(1.0, 1f64.exp() / 2.0), (2.0, 2f64.exp() / 2.0)],
        &[],
    )
    .expect("valid map")
}

/// `x` on [-1,0], `x + 1` on (0,1].
pub fn nontvs_g() -> Derivator {
    Derivator::build((-1.0, 1.0), vec![-1.0, 0.0, 1.0], vec![affine(1.0, 0.0), affine(1.0, 1.0)], vec![(0.0, 1.0)])
        .expect("unit-jump derivator")
}

/// Right-continuous unit step at 0 on [-1,1].
pub fn nontvs_f() -> PiecewiseMap {
    PiecewiseMap::new(vec![-1.0, 0.0, 1.0], vec![Expr::constant(0.0), Expr::constant(1.0)], &[(0.0, 1.0)], &[])
        .expect("valid map")
}

/// Derivator with jumps of mass `2^-|n|` at `1/n` for `2 <= |n| <= depth`, slope 1
/// in between, and the function `1/ceil(1/t)` (equal to `t` on [-1/depth, 1/depth)).
/// The g-derivative of the function vanishes everywhere except at 0, where it is 1.
pub fn ae_zero_witness(depth: u32) -> (Derivator, PiecewiseMap) {
    let depth = depth.max(2);
    let neg: Vec<u32> = (2..=depth).collect();
    let pos: Vec<u32> = (2..=depth).rev().collect();
    let mut bps = vec![-1.0];
    bps.extend(neg.iter().map(|&n| -1.0 / n as f64));
    bps.extend(pos.iter().map(|&n| 1.0 / n as f64));
    bps.push(1.0);
    let mass = |n: u32| 0.5f64.powi(n as i32);

    // Intercepts are chosen so that g(0) = 0.
    let neg_total: f64 = neg.iter().map(|&n| mass(n)).sum();
    let mut jumps = Vec::new();
    let mut forms = Vec::new();
    let mut offset = -neg_total;
    forms.push(affine(1.0, offset));
    for &n in &neg {
        offset += mass(n);
        jumps.push((-1.0 / n as f64, mass(n)));
        forms.push(affine(1.0, offset));
    }
    for &n in &pos {
        offset += mass(n);
        jumps.push((1.0 / n as f64, mass(n)));
        forms.push(affine(1.0, offset));
    }
    let g = Derivator::build((-1.0, 1.0), bps.clone(), forms, jumps)
        .expect("witness is a derivator")
        .with_declared_limit(Some(DeclaredLimit::AccumulatingJumps))
        .with_truncation_depth(Some(depth));

    let mut segs = Vec::new();
    let mut vals = Vec::new();
    for (k, &x) in bps.iter().enumerate() {
        let step = |x: f64| -> f64 {
            if x < 0.0 {
                let n = (-1.0 / x).round();
                -1.0 / n
            } else {
                1.0 / (1.0 / x).round()
            }
        };
        // The right end keeps the value of the last step so f stays left-continuous at b.
        let v = if x == -1.0 { -1.0 } else if x == 1.0 { 0.5 } else { step(x) };
        vals.push(v);
        if k + 1 < bps.len() {
            let inner = k == neg.len();
            segs.push(if inner { Expr::affine(1.0, 0.0) } else { Expr::constant(v) });
        }
    }
    let rights: Vec<f64> = (0..bps.len()).map(|i| if i + 1 < bps.len() { segs[i].eval(bps[i]) } else { vals[i] }).collect();
    let f = PiecewiseMap::with_values(bps, segs, vals, rights).expect("valid map");
    (g, f)
}
