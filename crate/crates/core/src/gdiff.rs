//! The Stieltjes derivative with respect to a derivator, and the product,
//! quotient and chain rules.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::derivator::{Derivator, GPiece, PointClass};
use crate::error::{Error, Result};
use crate::expr::{Custom, Expr, RealFn, ScalarFn};
use crate::piecewise::PiecewiseMap;

pub const DEFAULT_TOL: f64 = 1e-8;

const MAX_HALVINGS: i32 = 40;
const RICHARDSON_ORDER: usize = 4;
const CONTINUITY_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    TwoSided,
    RightAtJump,
    RightAtBn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Failure {
    LeftRightMismatch { left: f64, right: f64 },
    Diverges,
    Undefined,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::LeftRightMismatch { left, right } => write!(f, "one-sided limits differ ({left} vs {right})"),
            Failure::Diverges => write!(f, "difference quotients diverge"),
            Failure::Undefined => write!(f, "difference quotients do not settle"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GDerivReport {
    pub t: f64,
    pub value: Option<f64>,
    pub mode: Mode,
    pub failure: Option<Failure>,
}

impl GDerivReport {
    fn from(t: f64, mode: Mode, r: std::result::Result<f64, Failure>) -> Self {
        match r {
            Ok(v) => GDerivReport { t, value: Some(v), mode, failure: None },
            Err(e) => GDerivReport { t, value: None, mode, failure: Some(e) },
        }
    }

    pub fn ok(&self) -> Result<f64> {
        match (self.value, self.failure) {
            (Some(v), _) => Ok(v),
            (None, Some(failure)) => Err(Error::DerivativeFailure { at: self.t, failure }),
            (None, None) => Err(Error::DerivativeFailure { at: self.t, failure: Failure::Undefined }),
        }
    }
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= CONTINUITY_EPS * (1.0 + x.abs().max(y.abs()))
}

/// Limit of `q(h)` as `h -> 0+` along `h0 * 2^-k`, with Richardson extrapolation
/// and a three-term stabilization test.
fn limit_estimate(q: impl Fn(f64) -> f64, h0: f64, tol: f64) -> std::result::Result<f64, Failure> {
    let mut prev_row: Vec<f64> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut raw: Vec<f64> = Vec::new();
    for k in 0..=MAX_HALVINGS {
        let h = h0 * 0.5f64.powi(k);
        let d = q(h);
        if !d.is_finite() {
            continue;
        }
        raw.push(d);
        let mut row = vec![d];
        for j in 1..=prev_row.len().min(RICHARDSON_ORDER) {
            let factor = (1u64 << j) as f64;
            row.push(row[j - 1] + (row[j - 1] - prev_row[j - 1]) / (factor - 1.0));
        }
        let est = *row.last().unwrap();
        prev_row = row;
        history.push(est);
        let n = history.len();
        if n >= 3 {
            let w = &history[n - 3..];
            let hi = w.iter().copied().fold(f64::MIN, f64::max);
            let lo = w.iter().copied().fold(f64::MAX, f64::min);
            if hi - lo <= tol * (1.0 + est.abs()) {
                return Ok(est);
            }
        }
        let m = raw.len();
        if m >= 6 && (m - 5..m).all(|i| raw[i].abs() >= 1.8 * raw[i - 1].abs()) && raw[m - 1].abs() > 1.0 / tol {
            return Err(Failure::Diverges);
        }
    }
    Err(Failure::Undefined)
}

/// One-sided derivative of the segment `fe` against the piece `gp` at `p`, where
/// `fp`, `gp0` are the values at `p` and `width` bounds the usable offset.
fn side_derivative(
    fe: &Expr,
    gp: &GPiece,
    p: f64,
    fp: f64,
    gp0: f64,
    right: bool,
    width: f64,
    tol: f64,
) -> std::result::Result<f64, Failure> {
    if gp.is_flat() {
        return Err(Failure::Undefined);
    }
    if let (Some(d), Some(slope)) = (fe.derivative(), gp.slope_at(p)) {
        if slope > 0.0 && slope.is_finite() {
            let v = d.eval(p) / slope;
            if v.is_finite() {
                return Ok(v);
            }
        }
    }
    let sign = if right { 1.0 } else { -1.0 };
    let h0 = (width / 2.0).min(1e-2);
    limit_estimate(
        |h| {
            let s = p + sign * h;
            let dg = gp.eval(s) - gp0;
            if dg == 0.0 {
                f64::NAN
            } else {
                (fe.eval(s) - fp) / dg
            }
        },
        h0,
        tol,
    )
}

fn one_sided(f: &PiecewiseMap, g: &Derivator, p: f64, right: bool, tol: f64) -> std::result::Result<f64, Failure> {
    let fp = f.at(p);
    let limit = if right { f.rl(p) } else { f.ll(p) };
    if !close(limit, fp) {
        return Err(Failure::Diverges);
    }
    let (gk, fe) = if right { (g.piece_right(p), f.seg_right(p)) } else { (g.piece_left(p), f.seg_left(p)) };
    let bps = g.breakpoints();
    let gwidth = bps[gk + 1] - bps[gk];
    let (flo, fhi) = f.seg_bounds(p, !right);
    side_derivative(fe, &g.pieces()[gk], p, fp, g.at(p), right, gwidth.min(fhi - flo), tol)
}

fn jump_quotient(f: &PiecewiseMap, g: &Derivator, t: f64) -> f64 {
    (f.rl(t) - f.at(t)) / g.jump_at(t)
}

fn mismatch(l: f64, r: f64, tol: f64) -> bool {
    (l - r).abs() > 10.0 * tol * (1.0f64).max(l.abs()).max(r.abs())
}

/// The g-derivative of f at t.
pub fn g_derivative(f: &PiecewiseMap, g: &Derivator, t: f64, tol: f64) -> Result<GDerivReport> {
    let c = g.classify(t)?;
    f.eval(t)?;
    let (a, b) = g.domain();
    let report = match c.class {
        PointClass::Jump => GDerivReport::from(t, Mode::RightAtJump, Ok(jump_quotient(f, g, t))),
        PointClass::ConstancyInterior => {
            let p = c.t_star;
            let r = if g.jump_at(p) > 0.0 { Ok(jump_quotient(f, g, p)) } else { one_sided(f, g, p, true, tol) };
            GDerivReport::from(t, Mode::RightAtBn, r)
        }
        PointClass::NgMinus => GDerivReport::from(t, Mode::TwoSided, one_sided(f, g, t, false, tol)),
        PointClass::NgPlus => GDerivReport::from(t, Mode::TwoSided, one_sided(f, g, t, true, tol)),
        PointClass::Regular => {
            let r = if t == a {
                one_sided(f, g, t, true, tol)
            } else if t == b {
                one_sided(f, g, t, false, tol)
            } else {
                match (one_sided(f, g, t, false, tol), one_sided(f, g, t, true, tol)) {
                    (Ok(l), Ok(r)) if mismatch(l, r, tol) => Err(Failure::LeftRightMismatch { left: l, right: r }),
                    (Ok(l), Ok(r)) => Ok(if l == r { l } else { 0.5 * (l + r) }),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            };
            GDerivReport::from(t, Mode::TwoSided, r)
        }
    };
    Ok(report)
}

/// Derivative value or a `DerivativeFailure` error.
pub fn derivative_value(f: &PiecewiseMap, g: &Derivator, t: f64, tol: f64) -> Result<f64> {
    g_derivative(f, g, t, tol)?.ok()
}

/// The g-derivative as a piecewise map, plus the points where it failed to exist.
#[derive(Clone, Debug)]
pub struct DerivativeMap {
    pub map: PiecewiseMap,
    pub failures: Vec<(f64, Failure)>,
}

fn segment_derivative(fe: &Expr, gp: &GPiece, tol: f64) -> Expr {
    match (fe.derivative(), gp) {
        (Some(d), GPiece::Linear { slope, .. }) => return d.scale(1.0 / slope),
        (Some(d), GPiece::Monotone { func }) if func.df.is_some() => {
            let dg = Expr::Custom(Custom { label: "dg".into(), f: func.df.clone().unwrap(), df: None });
            return d.mul(&dg.recip());
        }
        _ => {}
    }
    let fe = fe.clone();
    let gp = gp.clone();
    let f: RealFn = Arc::new(move |t: f64| {
        let (fp, g0) = (fe.eval(t), gp.eval(t));
        limit_estimate(|h| (fe.eval(t + h) - fp) / (gp.eval(t + h) - g0), 1e-4, tol.max(1e-10)).unwrap_or(f64::NAN)
    });
    Expr::Custom(Custom { label: "numeric g-derivative".into(), f, df: None })
}

/// Maps `g_derivative` over the breakpoints of f and g and the grid.
pub fn g_derivative_fn(f: &PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> Result<DerivativeMap> {
    if f.domain() != g.domain() {
        let ((a0, b0), (a1, b1)) = (f.domain(), g.domain());
        return Err(Error::DomainMismatch { a0, b0, a1, b1 });
    }
    let mut bps: Vec<f64> = f.breakpoints().iter().chain(g.breakpoints()).copied().collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mut failures = Vec::new();
    let mut value_at = |t: f64| -> Result<f64> {
        let r = g_derivative(f, g, t, tol)?;
        Ok(match (r.value, r.failure) {
            (Some(v), _) => v,
            (None, fail) => {
                failures.push((t, fail.unwrap_or(Failure::Undefined)));
                f64::NAN
            }
        })
    };
    let mut segs = Vec::with_capacity(bps.len() - 1);
    for w in bps.windows(2) {
        let gp = &g.pieces()[g.piece_right(w[0])];
        let seg = if gp.is_flat() {
            Expr::constant(value_at(0.5 * (w[0] + w[1]))?)
        } else {
            segment_derivative(f.seg_right(w[0]), gp, tol)
        };
        segs.push(seg);
    }
    let mut vals = Vec::with_capacity(bps.len());
    for &t in &bps {
        vals.push(value_at(t)?);
    }
    for &t in grid {
        if !bps.contains(&t) {
            value_at(t)?;
        }
    }
    let n = segs.len();
    let rights: Vec<f64> = (0..=n).map(|i| if i < n { segs[i].eval(bps[i]) } else { vals[n] }).collect();
    failures.sort_by(|x, y| x.0.total_cmp(&y.0));
    failures.dedup_by(|x, y| x.0 == y.0);
    Ok(DerivativeMap { map: PiecewiseMap::with_values(bps, segs, vals, rights)?, failures })
}

/// `(f₁f₂)'_g(t)` from the derivatives of the factors.
pub fn product_rule(f1: &PiecewiseMap, f2: &PiecewiseMap, g: &Derivator, t: f64, tol: f64) -> Result<f64> {
    let d1 = derivative_value(f1, g, t, tol)?;
    let d2 = derivative_value(f2, g, t, tol)?;
    let ts = g.t_star(t);
    let dg = g.jump_at(ts);
    Ok(d1 * f2.at(ts) + d2 * f1.at(ts) + d1 * d2 * dg)
}

/// `(f₁/f₂)'_g(t)` from the derivatives of numerator and denominator.
pub fn quotient_rule(f1: &PiecewiseMap, f2: &PiecewiseMap, g: &Derivator, t: f64, tol: f64) -> Result<f64> {
    let d1 = derivative_value(f1, g, t, tol)?;
    let d2 = derivative_value(f2, g, t, tol)?;
    let ts = g.t_star(t);
    let dg = g.jump_at(ts);
    let (n, d) = (f1.at(ts), f2.at(ts));
    let den = d * (d + d2 * dg);
    if den == 0.0 || !den.is_finite() {
        return Err(Error::DenominatorVanishes { at: t });
    }
    Ok((d1 * d - n * d2) / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainRuleOutcome {
    pub case: u8,
    pub formula: f64,
    pub direct: f64,
    pub holds: bool,
}

/// Chain-rule value at a jump `x0` of g.
fn chain_at_jump(h: &ScalarFn, dh: &RealFn, f: &PiecewiseMap, g: &Derivator, x0: f64, tol: f64) -> Result<(u8, f64)> {
    let fd = derivative_value(f, g, x0, tol)?;
    let (fx, fr) = (f.at(x0), f.rl(x0));
    if !close(fx, fr) {
        return Ok((4, ((h.f)(fr) - (h.f)(fx)) / (fr - fx) * fd));
    }
    let seg = f.seg_right(x0);
    match seg.as_constant() {
        Some(_) => Ok((3, 0.0)),
        None if seg.as_exppoly().is_some() => Ok((4, dh(fx) * fd)),
        None => Err(Error::CaseUndetermined { at: x0 }),
    }
}

/// Checks the chain rule for `h ∘ f` at t against the directly computed derivative.
pub fn chain_rule_check(h: &ScalarFn, f: &PiecewiseMap, g: &Derivator, t: f64, tol: f64) -> Result<ChainRuleOutcome> {
    let dh = h.df.clone().ok_or_else(|| Error::InvalidInput(format!("{} has no declared derivative", h.label)))?;
    let c = g.classify(t)?;
    let (case, formula) = match c.class {
        PointClass::Jump => chain_at_jump(h, &dh, f, g, t, tol)?,
        PointClass::ConstancyInterior if g.jump_at(c.t_star) > 0.0 => {
            let (_, v) = chain_at_jump(h, &dh, f, g, c.t_star, tol)?;
            (2, v)
        }
        PointClass::ConstancyInterior => (2, dh(f.at(c.t_star)) * derivative_value(f, g, t, tol)?),
        _ => (1, dh(f.at(t)) * derivative_value(f, g, t, tol)?),
    };
    let direct = derivative_value(&f.compose(h), g, t, tol)?;
    let holds = (formula - direct).abs() <= tol.max(1e-12) * (1.0 + direct.abs());
    Ok(ChainRuleOutcome { case, formula, direct, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::piecewise::uniform_grid;

    #[test]
    fn plateau_example_derivatives() {
        let g = fixtures::gder_g();
        let f = fixtures::fder_f();
        for (t, v) in [(0.5, 1.0), (1.0, 1.0), (2.0, 2.0), (1.5, 2.0), (2.5, 2.0), (0.0, 1.0), (3.0, 2.0)] {
            let r = g_derivative(&f, &g, t, DEFAULT_TOL).unwrap();
            assert!((r.value.unwrap() - v).abs() < 1e-12, "t = {t}: {r:?}");
        }
        assert_eq!(g_derivative(&f, &g, 1.5, DEFAULT_TOL).unwrap().mode, Mode::RightAtBn);
        let f = fixtures::gder_f();
        assert_eq!(g_derivative(&f, &g, 1.0, DEFAULT_TOL).unwrap().value, Some(1.0));
    }

    #[test]
    fn derivator_against_itself_is_one() {
        for g in [fixtures::gder_g(), fixtures::example1_g(1.0, 1.0), crate::cantor::cantor_derivator(3).unwrap()] {
            let gm = g.as_map();
            let (a, b) = g.domain();
            for t in uniform_grid(a, b, 41).into_iter().chain(g.breakpoints().iter().copied()) {
                let v = g_derivative(&gm, &g, t, DEFAULT_TOL).unwrap().value.unwrap();
                assert!((v - 1.0).abs() < 1e-9, "t = {t}: {v}");
            }
        }
    }

    #[test]
    fn cantor_iterate_has_zero_derivative() {
        let g = crate::cantor::cantor_derivator(6).unwrap();
        let f3 = crate::cantor::cantor_iterate(3).unwrap();
        for j in 0..=81u64 {
            let t = crate::cantor::Triadic::new(j, 4).to_f64();
            let v = g_derivative(&f3, &g, t, DEFAULT_TOL).unwrap();
            assert_eq!(v.value, Some(0.0), "t = {j}/81: {v:?}");
        }
    }

    #[test]
    fn jump_quotient_and_failures() {
        let g = fixtures::example1_g(1.0, 1.0);
        let gm = g.as_map();
        let sq = gm.multiply(&gm).unwrap();
        assert_eq!(g_derivative(&sq, &g, 1.0, DEFAULT_TOL).unwrap().value, Some(3.0));
        assert_eq!(product_rule(&gm, &gm, &g, 1.0, DEFAULT_TOL).unwrap(), 3.0);

        let id = Derivator::identity(-1.0, 1.0).unwrap();
        let kink = PiecewiseMap::new(vec![-1.0, 0.0, 1.0], vec![Expr::affine(-1.0, 0.0), Expr::affine(1.0, 0.0)], &[], &[]).unwrap();
        assert!(matches!(
            g_derivative(&kink, &id, 0.0, DEFAULT_TOL).unwrap().failure,
            Some(Failure::LeftRightMismatch { .. })
        ));
        let step = PiecewiseMap::new(vec![-1.0, 0.0, 1.0], vec![Expr::constant(0.0), Expr::constant(1.0)], &[], &[]).unwrap();
        assert_eq!(g_derivative(&step, &id, 0.0, DEFAULT_TOL).unwrap().failure, Some(Failure::Diverges));
        let sqrt = Custom::new("sqrt|t|", |t: f64| t.abs().sqrt());
        let cusp = PiecewiseMap::from_expr(-1.0, 1.0, Expr::custom(sqrt)).unwrap();
        assert!(g_derivative(&cusp, &id, 0.0, DEFAULT_TOL).unwrap().failure.is_some());
    }

    #[test]
    fn numeric_path_agrees_with_closed_form() {
        let g = fixtures::example1_g(1.0, 1.0);
        let opaque = PiecewiseMap::from_expr(0.0, 3.0, Expr::custom(Custom::new("sin", f64::sin))).unwrap();
        for t in [0.3, 1.7, 2.9] {
            let v = g_derivative(&opaque, &g, t, DEFAULT_TOL).unwrap().value.unwrap();
            assert!((v - t.cos()).abs() < 1e-7, "t = {t}: {v}");
        }
    }

    #[test]
    fn derivative_map_of_exponential_solution() {
        let g = fixtures::example1_g(1.0, 1.0);
        let v = fixtures::example1_v();
        let d = g_derivative_fn(&v, &g, &uniform_grid(0.0, 3.0, 31), DEFAULT_TOL).unwrap();
        assert!(d.failures.is_empty());
        for t in uniform_grid(0.0, 3.0, 31) {
            assert!((d.map.at(t) - v.at(t)).abs() < 1e-12 * (1.0 + v.at(t)));
        }
        let c = g_derivative_fn(&PiecewiseMap::constant(0.0, 3.0, 7.0), &g, &[], DEFAULT_TOL).unwrap();
        assert!(c.map.point_values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn quotient_and_chain_rules() {
        let g = fixtures::example1_g(1.0, 1.0);
        let gm = g.as_map().add_constant(1.0);
        assert_eq!(quotient_rule(&gm, &gm, &g, 1.0, DEFAULT_TOL).unwrap(), 0.0);
        let out = chain_rule_check(&ScalarFn::square(), &g.as_map(), &g, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!((out.case, out.formula), (4, 3.0));
        assert!(out.holds);
        let out = chain_rule_check(&ScalarFn::square(), &g.as_map(), &g, 0.5, DEFAULT_TOL).unwrap();
        assert_eq!(out.case, 1);
        assert!(out.holds);
        let flat_after = PiecewiseMap::new(vec![0.0, 1.0, 3.0], vec![Expr::affine(1.0, 0.0), Expr::constant(1.0)], &[], &[]).unwrap();
        let out = chain_rule_check(&ScalarFn::square(), &flat_after, &g, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!((out.case, out.formula, out.direct), (3, 0.0, 0.0));
    }
}
