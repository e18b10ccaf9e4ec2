//! Elements of the kernel of the g-derivative and the additive and
//! multiplicative decompositions built from them.

use serde::Serialize;

use crate::derivator::{Derivator, PointClass};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::gdiff::{self, g_derivative, g_derivative_fn};
use crate::gexp;
use crate::measure;
use crate::piecewise::{bd_membership, PiecewiseMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Construction {
    StepOverDg,
    Example1Inverse,
    UserSupplied,
}

#[derive(Clone, Debug)]
pub struct KernelElement {
    pub map: PiecewiseMap,
    pub construction: Construction,
}

/// Step function over the jumps of g: constant on each connected component of
/// `[a,b] \ D_g`, right-continuous at every jump.
fn step_map(g: &Derivator, values: &[f64]) -> Result<PiecewiseMap> {
    let (a, b) = g.domain();
    let jumps: Vec<f64> = g.jump_points().into_iter().map(|p| p.0).collect();
    let a_jumps = jumps.first() == Some(&a);
    let expected = jumps.len() + usize::from(!a_jumps);
    if values.len() != expected {
        return Err(Error::InvalidInput(format!(
            "need {expected} values, one per component of [a,b] minus the jumps; got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("step values must be finite".into()));
    }
    let mut bps = vec![a];
    bps.extend(jumps.iter().copied().filter(|&t| t > a));
    bps.push(b);
    let segs: Vec<Expr> = values.iter().map(|&v| Expr::constant(v)).collect();
    let n = segs.len();
    let vals: Vec<f64> = (0..=n).map(|i| values[i.min(n - 1)]).collect();
    PiecewiseMap::with_values(bps, segs, vals.clone(), vals)
}

/// A kernel element taking `values[k]` on the k-th component of `[a,b] \ D_g`.
pub fn step_kernel(g: &Derivator, values: &[f64]) -> Result<KernelElement> {
    if !g.closure_conditions().dg_accum_ok {
        return Err(Error::ClosureConditionFailed);
    }
    Ok(KernelElement { map: step_map(g, values)?, construction: Construction::StepOverDg })
}

/// Wraps a user-supplied map after checking right-continuity at the jumps of g
/// and kernel membership on the grid.
pub fn kernel_from_map(f: PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> Result<KernelElement> {
    for (t, _) in g.jump_points() {
        if (f.rl(t) - f.at(t)).abs() > tol * (1.0 + f.at(t).abs()) {
            return Err(Error::RightContinuityViolation { at: t });
        }
    }
    let r = kernel_report(&f, g, grid, tol)?;
    if !r.is_member {
        return Err(Error::KernelViolation { at: r.first_failure });
    }
    Ok(KernelElement { map: f, construction: Construction::UserSupplied })
}

/// `h(t) = [∏_{s ∈ [a,t] ∩ D_g} (1 + β(s)Δg(s))]^{-1}`.
pub fn example1_h(beta: &PiecewiseMap, g: &Derivator) -> Result<KernelElement> {
    let (a, _) = g.domain();
    let mut values = Vec::new();
    let mut prod = 1.0;
    let jumps = g.jump_points();
    if jumps.first().map(|p| p.0) != Some(a) {
        values.push(1.0);
    }
    for (t, dg) in jumps {
        let factor = 1.0 + beta.eval(t)? * dg;
        if factor == 0.0 {
            return Err(Error::RegressivityViolation { at: t });
        }
        prod *= factor;
        values.push(1.0 / prod);
    }
    Ok(KernelElement { map: step_map(g, &values)?, construction: Construction::Example1Inverse })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelReport {
    pub is_member: bool,
    pub max_abs_derivative: f64,
    pub first_failure: Option<f64>,
    /// Largest `|(f g)'_g - f*|` on the grid.
    pub product_gap: f64,
}

fn kernel_points(f: &PiecewiseMap, g: &Derivator, grid: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = grid.iter().chain(g.breakpoints()).chain(f.breakpoints()).copied().filter(|&t| g.contains(t)).collect();
    pts.extend(g.components().iter().map(|c| 0.5 * (c.lo + c.hi)));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Derivative check at the grid, every jump, every endpoint of a constancy
/// component and one point inside each component, cross-checked through the
/// product with g.
pub fn kernel_report(f: &PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> Result<KernelReport> {
    if f.domain() != g.domain() {
        let ((a0, b0), (a1, b1)) = (f.domain(), g.domain());
        return Err(Error::DomainMismatch { a0, b0, a1, b1 });
    }
    let mut report = KernelReport { is_member: true, max_abs_derivative: 0.0, first_failure: None, product_gap: 0.0 };
    let fail = |r: &mut KernelReport, t: f64| {
        r.is_member = false;
        if r.first_failure.is_none() {
            r.first_failure = Some(t);
        }
    };
    for t in kernel_points(f, g, grid) {
        match g_derivative(f, g, t, gdiff::DEFAULT_TOL.min(tol))?.value {
            Some(v) => {
                report.max_abs_derivative = report.max_abs_derivative.max(v.abs());
                if v.abs() > tol {
                    fail(&mut report, t);
                }
            }
            None => fail(&mut report, t),
        }
    }
    let fg = f.multiply(&g.as_map())?;
    for &t in grid {
        let fs = f.at(g.t_star(t));
        match g_derivative(&fg, g, t, gdiff::DEFAULT_TOL.min(tol))?.value {
            Some(v) => {
                let gap = (v - fs).abs();
                report.product_gap = report.product_gap.max(gap);
                if gap > tol * (1.0 + fs.abs()) {
                    fail(&mut report, t);
                }
            }
            None => fail(&mut report, t),
        }
    }
    Ok(report)
}

pub fn is_kernel_member(f: &PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> bool {
    kernel_report(f, g, grid, tol).map(|r| r.is_member).unwrap_or(false)
}

fn derivative_map(f: &PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> Result<PiecewiseMap> {
    let d = g_derivative_fn(f, g, grid, tol)?;
    if let Some(&(at, failure)) = d.failures.first() {
        return Err(Error::DerivativeFailure { at, failure });
    }
    Ok(d.map)
}

/// `f = h + ρ` with `h(t) = f(a) + ∫_{[a,t)} f'_g dμ_g` and `ρ = f - h`, so `ρ(a) = 0`.
pub fn additive_decompose(f: &PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> Result<(PiecewiseMap, PiecewiseMap)> {
    let d = derivative_map(f, g, grid, tol)?;
    let (a, _) = g.domain();
    let h = measure::indefinite(&d, g, measure::DEFAULT_QUAD_TOL)?.add_constant(f.at(a));
    let rho = f.sub(&h)?;
    Ok((h, rho))
}

/// Two-level decomposition `f = h + ρ₁ + ρ₂` with `ρ₁'_g = 0` and `(ρ₂)''_g = 0`,
/// from the one-level decomposition of `f'_g`.
pub fn additive_decompose2(
    f: &PiecewiseMap,
    g: &Derivator,
    grid: &[f64],
    tol: f64,
) -> Result<(PiecewiseMap, PiecewiseMap, PiecewiseMap)> {
    let d = derivative_map(f, g, grid, tol)?;
    let (h1, r1) = additive_decompose(&d, g, grid, tol)?;
    let (a, _) = g.domain();
    let h = measure::indefinite(&h1, g, measure::DEFAULT_QUAD_TOL)?.add_constant(f.at(a));
    let rho2 = measure::indefinite(&r1, g, measure::DEFAULT_QUAD_TOL)?;
    let rho1 = f.sub(&h)?.sub(&rho2)?;
    Ok((h, rho1, rho2))
}

/// `f = ρ · u` where `u` solves `u'_g = (f'_g / f*) u`, `u(a) = 1`, and `ρ = f / u`.
pub fn multiplicative_decompose(
    f: &PiecewiseMap,
    g: &Derivator,
    grid: &[f64],
    tol: f64,
) -> Result<(PiecewiseMap, PiecewiseMap)> {
    let d = derivative_map(f, g, grid, tol)?;
    let fs = f.star(g)?;
    let mut check: Vec<f64> = grid.iter().chain(fs.breakpoints()).copied().collect();
    check.sort_by(f64::total_cmp);
    for &t in &check {
        if fs.at(t) == 0.0 || fs.rl(t) == 0.0 || fs.ll(t) == 0.0 {
            return Err(Error::ZeroDenominator { at: t });
        }
    }
    let p = d.divide(&fs)?;
    let u = gexp::exp_g_map(&p, g)?;
    let rho = f.divide(&u)?;
    Ok((rho, u))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AeZeroOutcome {
    /// False when f is not in BD_g; the implication is then vacuous.
    pub applicable: bool,
    /// Whether f vanishes at every atom and on the μ_g-dense sample.
    pub vanishes_ae: bool,
    pub max_abs: f64,
    pub holds: bool,
}

/// If f ∈ BD_g vanishes at all atoms and on the sample cells carrying μ_g-mass,
/// f must vanish on the whole grid.
pub fn ae_zero_forces_zero_check(f: &PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> AeZeroOutcome {
    let applicable = bd_membership(f, g, 1e-9, grid).verdict;
    let max_abs = grid.iter().map(|&t| f.at(t).abs()).fold(0.0, f64::max);
    let atoms_zero = g.jump_points().iter().all(|&(t, _)| f.at(t).abs() <= tol);
    let cells_zero = grid.windows(2).all(|w| {
        let carries_mass = g.at(w[1]) - g.rl(w[0]) > 0.0;
        !carries_mass || f.at(0.5 * (w[0] + w[1])).abs() <= tol
    });
    let vanishes_ae = atoms_zero && cells_zero;
    let holds = !applicable || !vanishes_ae || max_abs <= tol;
    AeZeroOutcome { applicable, vanishes_ae, max_abs, holds }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeOutcome {
    /// Largest ratio of `|q(t) - 1|` to its analytic bound over the samples.
    pub worst_ratio: f64,
    pub samples: usize,
    pub holds: bool,
}

/// Checks the difference quotients of the a.e.-zero witness at 0 against
/// `|q(t) - 1| <= |t|/(1-|t|) + 2^{1 - 1/|t|}/|t|`, the second term bounding the
/// truncated jump tail.
pub fn ae_zero_witness_envelope(g: &Derivator, f: &PiecewiseMap, samples: usize) -> EnvelopeOutcome {
    let (f0, g0) = (f.at(0.0), g.at(0.0));
    let mut worst = 0.0f64;
    let mut count = 0;
    for k in 1..=samples {
        for sign in [-1.0, 1.0] {
            let t = sign * 0.45 * k as f64 / samples as f64;
            let q = (f.at(t) - f0) / (g.at(t) - g0);
            let at = t.abs();
            let bound = at / (1.0 - at) + 2f64.powf(1.0 - 1.0 / at) / at;
            worst = worst.max((q - 1.0).abs() / bound);
            count += 1;
        }
    }
    EnvelopeOutcome { worst_ratio: worst, samples: count, holds: worst <= 1.0 }
}

/// Points of g where a kernel element may change value: the jumps.
pub fn admissible_change_points(g: &Derivator) -> Vec<f64> {
    g.breakpoints().iter().copied().filter(|&t| g.class_of(t).class == PointClass::Jump).collect()
}
