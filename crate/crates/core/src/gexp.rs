//! The g-exponential and first-order linear Stieltjes equations.

use std::sync::Arc;

use crate::derivator::{Derivator, GPiece, PointClass};
use crate::error::{Error, Result};
use crate::expr::{Custom, Expr};
use crate::gdiff::{self, derivative_value};
use crate::kernel::{self, KernelElement};
use crate::measure::{self, GInterval};
use crate::piecewise::PiecewiseMap;
use crate::quad;

/// `v'_g = β v + forcing`, `v(a) = v0`.
#[derive(Clone, Debug)]
pub struct LinearProblem {
    pub beta: PiecewiseMap,
    pub forcing: Option<PiecewiseMap>,
    pub v0: f64,
    pub g: Derivator,
}

impl LinearProblem {
    pub fn homogeneous(beta: PiecewiseMap, v0: f64, g: Derivator) -> Self {
        LinearProblem { beta, forcing: None, v0, g }
    }

    fn forcing_at(&self, t: f64) -> f64 {
        self.forcing.as_ref().map_or(0.0, |f| f.at(t))
    }
}

fn check_regressive(p: &PiecewiseMap, g: &Derivator) -> Result<()> {
    if p.domain() != g.domain() {
        let ((a0, b0), (a1, b1)) = (p.domain(), g.domain());
        return Err(Error::DomainMismatch { a0, b0, a1, b1 });
    }
    for (t, dg) in g.jump_points() {
        if 1.0 + p.at(t) * dg == 0.0 {
            return Err(Error::RegressivityViolation { at: t });
        }
    }
    Ok(())
}

/// `exp_g(p; t) = ∏_{s ∈ [a,t) ∩ D_g} (1 + p(s)Δg(s)) · exp(∫_{[a,t) \ D_g} p dμ_g)`.
pub fn g_exponential(p: &PiecewiseMap, g: &Derivator, t: f64) -> Result<f64> {
    check_regressive(p, g)?;
    let (a, _) = g.domain();
    let interval = GInterval { lo: a, hi: t };
    let smooth = measure::integrate_minus_jumps(p, g, interval, measure::DEFAULT_QUAD_TOL)?.value;
    let prod: f64 = g.jump_points().iter().filter(|(s, _)| *s < t).map(|(s, d)| 1.0 + p.at(*s) * d).product();
    Ok(prod * smooth.exp())
}

/// Right limit `exp_g(p; t⁺)`.
pub fn g_exponential_right(p: &PiecewiseMap, g: &Derivator, t: f64) -> Result<f64> {
    Ok(g_exponential(p, g, t)? * (1.0 + p.eval(t)? * g.delta(t)?))
}

/// Exponent increment on `[u, t]` for one piece: `∫_u^t p dg` as an expression in t.
fn exponent(pe: &Expr, gp: &GPiece, u: f64) -> Option<Expr> {
    match gp {
        GPiece::Flat { .. } => Some(Expr::constant(0.0)),
        GPiece::Linear { slope, .. } => {
            let anti = pe.antiderivative()?;
            Some(anti.scale(*slope).add(&Expr::constant(-slope * anti.eval(u))))
        }
        GPiece::Monotone { .. } => None,
    }
}

/// `exp_g(p; ·)` as a piecewise map built segment by segment:
/// `E(x⁺) = (1 + p(x)Δg(x)) E(x)` at breakpoints and `E(x⁺) exp(∫_x^t p dg)` in between.
pub fn exp_g_map(p: &PiecewiseMap, g: &Derivator) -> Result<PiecewiseMap> {
    check_regressive(p, g)?;
    let mut bps: Vec<f64> = p.breakpoints().iter().chain(g.breakpoints()).copied().collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let n = bps.len() - 1;
    let mut vals = Vec::with_capacity(n + 1);
    let mut rights = Vec::with_capacity(n + 1);
    let mut segs = Vec::with_capacity(n);
    let mut current = 1.0;
    for k in 0..=n {
        let x = bps[k];
        vals.push(current);
        let right = current * (1.0 + p.at(x) * g.jump_at(x));
        if k == n {
            rights.push(current);
            break;
        }
        rights.push(right);
        let u = x;
        let pe = p.seg_right(u).clone();
        let gp = g.pieces()[g.piece_right(u)].clone();
        let seg = match exponent(&pe, &gp, u) {
            Some(e) => Expr::exp(&e).scale(right),
            None => {
                let f = move |t: f64| {
                    let inc = match &gp {
                        GPiece::Monotone { func } => match &func.df {
                            Some(df) => quad::integrate(&|s| pe.eval(s) * df(s), u, t, measure::DEFAULT_QUAD_TOL).0,
                            None => quad::integrate_stieltjes(&|s| pe.eval(s), &|s| (func.f)(s), u, t, measure::DEFAULT_QUAD_TOL).0,
                        },
                        _ => 0.0,
                    };
                    right * inc.exp()
                };
                Expr::Custom(Custom { label: "g-exponential".into(), f: Arc::new(f), df: None })
            }
        };
        current = seg.eval(bps[k + 1]);
        segs.push(seg);
    }
    PiecewiseMap::with_values(bps, segs, vals, rights)
}

/// `v = v0 · exp_g(β; ·)`, the absolutely continuous solution of the homogeneous problem.
pub fn solve_homogeneous_ac(problem: &LinearProblem) -> Result<PiecewiseMap> {
    if let Some(f) = &problem.forcing {
        if f.point_values().iter().chain(f.right_limits()).any(|&x| x != 0.0) || f.segments().iter().any(|e| e.as_constant() != Some(0.0)) {
            return Err(Error::InvalidInput("homogeneous solver called with nonzero forcing".into()));
        }
    }
    Ok(exp_g_map(&problem.beta, &problem.g)?.scale(problem.v0))
}

/// `h · v` for a kernel element h with `h(a) = 1`.
pub fn nonunique_solutions(problem: &LinearProblem, h: &KernelElement, grid: &[f64], tol: f64) -> Result<PiecewiseMap> {
    let r = kernel::kernel_report(&h.map, &problem.g, grid, tol)?;
    if !r.is_member {
        return Err(Error::KernelViolation { at: r.first_failure });
    }
    let (a, _) = problem.g.domain();
    let ha = h.map.at(a);
    if ha != 1.0 {
        return Err(Error::InitialValueMismatch { expected: 1.0, found: ha });
    }
    h.map.multiply(&solve_homogeneous_ac(problem)?)
}

/// Variation of constants:
/// `v(t) = E(t) (v0 + ∫_{[a,t)} f(s) / (E(s)(1 + β(s)Δg(s))) dμ_g(s))`,
/// accepted only if its residual on the grid stays within `tol`.
pub fn solve_forced(problem: &LinearProblem, grid: &[f64], tol: f64) -> Result<PiecewiseMap> {
    let e = exp_g_map(&problem.beta, &problem.g)?;
    let v = match &problem.forcing {
        None => e.scale(problem.v0),
        Some(f) => {
            let q = f.divide(&e)?;
            let mut vals = q.point_values().to_vec();
            for (i, &x) in q.breakpoints().iter().enumerate() {
                let dg = problem.g.jump_at(x);
                if dg > 0.0 {
                    vals[i] = f.at(x) / (e.at(x) * (1.0 + problem.beta.at(x) * dg));
                }
            }
            let q = PiecewiseMap::with_values(q.breakpoints().to_vec(), q.segments().to_vec(), vals, q.right_limits().to_vec())?;
            let big_v = measure::indefinite(&q, &problem.g, measure::DEFAULT_QUAD_TOL)?.add_constant(problem.v0);
            e.multiply(&big_v)?
        }
    };
    let residual = residual_check(&v, problem, grid)?;
    if residual > tol {
        return Err(Error::ResidualTooLarge { residual, tol });
    }
    Ok(v)
}

/// `max |v'_g(t) - β(t) v(t) - f(t)|` over grid points outside the constancy components.
pub fn residual_check(v: &PiecewiseMap, problem: &LinearProblem, grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &t in grid {
        if problem.g.classify(t)?.class == PointClass::ConstancyInterior {
            continue;
        }
        let d = derivative_value(v, &problem.g, t, gdiff::DEFAULT_TOL)?;
        let r = (d - problem.beta.at(t) * v.at(t) - problem.forcing_at(t)).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}
