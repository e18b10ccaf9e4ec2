//! The Lebesgue–Stieltjes measure of a derivator, integrals against it,
//! indefinite integrals and the fundamental-theorem round trip.

use std::sync::Arc;

use serde::Serialize;

use crate::derivator::{Derivator, GPiece};
use crate::error::{Error, Result};
use crate::expr::{Custom, Expr, RealFn};
use crate::gdiff;
use crate::piecewise::PiecewiseMap;
use crate::quad;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GInterval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

fn check_interval(g: &Derivator, lo: f64, hi: f64) -> Result<()> {
    let (a, b) = g.domain();
    for t in [lo, hi] {
        if !(a <= t && t <= b) {
            return Err(Error::OutOfDomain { t, lo: a, hi: b });
        }
    }
    if lo > hi {
        return Err(Error::InvalidInput(format!("empty interval [{lo}, {hi})")));
    }
    Ok(())
}

/// `μ_g([lo, hi)) = g(hi) - g(lo)`.
pub fn mu(g: &Derivator, interval: GInterval) -> Result<f64> {
    check_interval(g, interval.lo, interval.hi)?;
    Ok(g.at(interval.hi) - g.at(interval.lo))
}

fn check_domains(f: &PiecewiseMap, g: &Derivator) -> Result<()> {
    let (a0, b0) = f.domain();
    let (a1, b1) = g.domain();
    if (a0, b0) != (a1, b1) {
        return Err(Error::DomainMismatch { a0, b0, a1, b1 });
    }
    Ok(())
}

fn cut_points(f: &PiecewiseMap, g: &Derivator, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = f
        .breakpoints()
        .iter()
        .chain(g.breakpoints())
        .copied()
        .filter(|&x| lo < x && x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Continuous-part integral of f on `[u, v]`, a sub-interval of one f segment and one g piece.
fn continuous_part(fe: &Expr, gp: &GPiece, u: f64, v: f64, tol: f64) -> (f64, f64) {
    match gp {
        GPiece::Flat { .. } => (0.0, 0.0),
        GPiece::Linear { slope, .. } => match fe.antiderivative() {
            Some(a) => (slope * (a.eval(v) - a.eval(u)), 0.0),
            None => {
                let (val, err) = quad::integrate(&|t| fe.eval(t), u, v, tol);
                (slope * val, slope * err)
            }
        },
        GPiece::Monotone { func } => match &func.df {
            Some(df) => quad::integrate(&|t| fe.eval(t) * df(t), u, v, tol),
            None => quad::integrate_stieltjes(&|t| fe.eval(t), &|t| (func.f)(t), u, v, tol),
        },
    }
}

struct Walk {
    /// Cut points, value of the running integral at each, and right limits.
    points: Vec<f64>,
    at: Vec<f64>,
    right: Vec<f64>,
    error: f64,
}

fn walk(f: &PiecewiseMap, g: &Derivator, lo: f64, hi: f64, tol: f64) -> Result<Walk> {
    let points = cut_points(f, g, lo, hi);
    let mut at = Vec::with_capacity(points.len());
    let mut right = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    let mut error = 0.0;
    for (k, &u) in points.iter().enumerate() {
        at.push(acc);
        if k + 1 == points.len() {
            right.push(acc);
            break;
        }
        let v = points[k + 1];
        let d = g.jump_at(u);
        if d > 0.0 {
            let fu = f.at(u);
            if !fu.is_finite() {
                return Err(Error::UnboundedIntegrand { at: u });
            }
            acc += fu * d;
        }
        right.push(acc);
        let (c, e) = continuous_part(f.seg_right(u), &g.pieces()[g.piece_right(u)], u, v, tol);
        if !c.is_finite() {
            return Err(Error::UnboundedIntegrand { at: 0.5 * (u + v) });
        }
        acc += c;
        error += e;
    }
    Ok(Walk { points, at, right, error })
}

/// `∫_{[lo, hi)} f dμ_g`: jump atoms plus the continuous part.
pub fn integrate(f: &PiecewiseMap, g: &Derivator, interval: GInterval, tol: f64) -> Result<Integral> {
    check_domains(f, g)?;
    check_interval(g, interval.lo, interval.hi)?;
    let w = walk(f, g, interval.lo, interval.hi, tol)?;
    Ok(Integral { value: *w.at.last().unwrap(), error_estimate: w.error })
}

/// The integral with the jump atoms removed: `∫_{[lo, hi) \ D_g} f dμ_g`.
pub fn integrate_minus_jumps(f: &PiecewiseMap, g: &Derivator, interval: GInterval, tol: f64) -> Result<Integral> {
    let full = integrate(f, g, interval, tol)?;
    let atoms: f64 = g
        .jump_points()
        .iter()
        .filter(|(t, _)| interval.lo <= *t && *t < interval.hi)
        .map(|(t, d)| f.at(*t) * d)
        .sum();
    Ok(Integral { value: full.value - atoms, error_estimate: full.error_estimate })
}

/// `H(x) = ∫_{[a, x)} f dμ_g` as a left-continuous piecewise map.
pub fn indefinite(f: &PiecewiseMap, g: &Derivator, tol: f64) -> Result<PiecewiseMap> {
    check_domains(f, g)?;
    let (a, b) = g.domain();
    let w = walk(f, g, a, b, tol)?;
    let mut segs = Vec::with_capacity(w.points.len() - 1);
    for k in 0..w.points.len() - 1 {
        let u = w.points[k];
        let base = w.right[k];
        let fe = f.seg_right(u).clone();
        let gp = g.pieces()[g.piece_right(u)].clone();
        let seg = match &gp {
            GPiece::Flat { .. } => Expr::constant(base),
            GPiece::Linear { slope, .. } => match fe.antiderivative() {
                Some(anti) => anti.scale(*slope).add(&Expr::constant(base - slope * anti.eval(u))),
                None => {
                    let slope = *slope;
                    let df = fe.scale(slope);
                    let fe2 = fe.clone();
                    Expr::Custom(Custom {
                        label: "indefinite".into(),
                        f: Arc::new(move |t| base + slope * quad::integrate(&|s| fe2.eval(s), u, t, tol).0),
                        df: Some(Arc::new(move |t| df.eval(t)) as RealFn),
                    })
                }
            },
            GPiece::Monotone { func } => {
                let func = func.clone();
                let fe2 = fe.clone();
                let df = func.df.clone().map(|d| {
                    let fe3 = fe.clone();
                    Arc::new(move |t: f64| fe3.eval(t) * d(t)) as RealFn
                });
                let gp2 = gp.clone();
                Expr::Custom(Custom {
                    label: "indefinite".into(),
                    f: Arc::new(move |t| base + continuous_part(&fe2, &gp2, u, t, tol).0),
                    df,
                })
            }
        };
        segs.push(seg);
    }
    PiecewiseMap::with_values(w.points, segs, w.at, w.right)
}

/// Largest `|F(x) - F(a) - ∫_{[a,x)} F'_g dμ_g|` over the grid.
pub fn ftc_roundtrip_error(big_f: &PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> Result<f64> {
    check_domains(big_f, g)?;
    let d = gdiff::g_derivative_fn(big_f, g, grid, tol)?;
    let atoms: Vec<f64> = g.jump_points().iter().map(|p| p.0).collect();
    if let Some((at, failure)) = d
        .failures
        .iter()
        .find(|(t, _)| grid.contains(t) || atoms.contains(t))
    {
        return Err(Error::DerivativeFailure { at: *at, failure: *failure });
    }
    let h = indefinite(&d.map, g, DEFAULT_QUAD_TOL)?;
    let (a, _) = g.domain();
    let fa = big_f.at(a);
    Ok(grid.iter().map(|&x| (big_f.at(x) - fa - h.at(x)).abs()).fold(0.0, f64::max))
}

pub fn ftc_roundtrip_check(big_f: &PiecewiseMap, g: &Derivator, tol: f64, grid: &[f64]) -> Result<bool> {
    Ok(ftc_roundtrip_error(big_f, g, grid, gdiff::DEFAULT_TOL)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::piecewise::uniform_grid;

    fn iv(lo: f64, hi: f64) -> GInterval {
        GInterval { lo, hi }
    }

    #[test]
    fn measure_examples() {
        assert_eq!(mu(&fixtures::gder_g(), iv(0.0, 3.0)).unwrap(), 2.0);
        let g = fixtures::example1_g(1.0, 1.0);
        assert_eq!(mu(&g, iv(0.0, 2.0)).unwrap(), 3.0);
        assert_eq!(mu(&g, iv(1.3, 1.3)).unwrap(), 0.0);
        assert!(mu(&g, iv(-1.0, 1.0)).is_err());
    }

    #[test]
    fn integral_examples() {
        let g = fixtures::example1_g(1.0, 1.0);
        let one = PiecewiseMap::constant(0.0, 3.0, 1.0);
        assert_eq!(integrate(&one, &g, iv(0.0, 3.0), 1e-10).unwrap().value, 5.0);
        assert_eq!(integrate_minus_jumps(&one, &g, iv(0.0, 3.0), 1e-10).unwrap().value, 3.0);
        let zero = PiecewiseMap::constant(0.0, 3.0, 0.0);
        assert_eq!(integrate(&zero, &g, iv(0.0, 3.0), 1e-10).unwrap().value, 0.0);
        let id = Derivator::identity(0.0, 1.0).unwrap();
        let s = PiecewiseMap::from_expr(0.0, 1.0, Expr::affine(1.0, 0.0)).unwrap();
        assert!((integrate(&s, &id, iv(0.0, 1.0), 1e-10).unwrap().value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadrature_path_matches_closed_form() {
        let g = fixtures::example1_g(1.0, 1.0);
        let c = Custom::new("exp", f64::exp).with_derivative(f64::exp);
        let opaque = PiecewiseMap::from_expr(0.0, 3.0, Expr::custom(c)).unwrap();
        let closed = PiecewiseMap::from_expr(0.0, 3.0, crate::expr::ExpPoly::exp(1.0, 1.0).into()).unwrap();
        let x = integrate(&opaque, &g, iv(0.2, 2.5), 1e-12).unwrap().value;
        let y = integrate(&closed, &g, iv(0.2, 2.5), 1e-12).unwrap().value;
        assert!((x - y).abs() < 1e-11);
    }

    #[test]
    fn indefinite_has_jumps_and_matches_integral() {
        let g = fixtures::example1_g(1.0, 1.0);
        let one = PiecewiseMap::constant(0.0, 3.0, 1.0);
        let h = indefinite(&one, &g, 1e-10).unwrap();
        assert_eq!(h.rl(1.0) - h.at(1.0), 1.0);
        let gm = g.as_map();
        for t in uniform_grid(0.0, 3.0, 31) {
            assert!((h.at(t) - (gm.at(t) - gm.at(0.0))).abs() < 1e-14);
        }
        let f = fixtures::fder_f().refine(&[]);
        let gg = fixtures::gder_g();
        let hh = indefinite(&f, &gg, 1e-10).unwrap();
        assert_eq!(hh.at(3.0), integrate(&f, &gg, iv(0.0, 3.0), 1e-10).unwrap().value);
    }

    #[test]
    fn ftc_on_exponential_and_constant() {
        let g = fixtures::example1_g(1.0, 1.0);
        let grid = uniform_grid(0.0, 3.0, 97);
        let v = fixtures::example1_v();
        assert!(ftc_roundtrip_check(&v, &g, 1e-8, &grid).unwrap());
        assert!(ftc_roundtrip_check(&PiecewiseMap::constant(0.0, 3.0, 2.5), &g, 1e-12, &grid).unwrap());
    }
}
