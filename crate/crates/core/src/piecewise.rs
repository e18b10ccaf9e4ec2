//! Candidate functions: segment expressions with explicit values and right
//! limits at every breakpoint, pointwise algebra, and BD_g membership checks.

use serde::Serialize;

use crate::derivator::{locate, Derivator, Loc, PointClass};
use crate::error::{Error, Result};
use crate::expr::{Expr, ScalarFn};

#[derive(Clone, Debug)]
pub struct PiecewiseMap {
    bps: Vec<f64>,
    segs: Vec<Expr>,
    vals: Vec<f64>,
    rights: Vec<f64>,
}

fn merge_points(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().chain(y).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

impl PiecewiseMap {
    /// Map with default one-sided data: the value at an interior breakpoint is the
    /// left segment's limit and the right limit is the next segment's limit.
    /// `point_values` and `right_limits` override those defaults at listed breakpoints.
    pub fn new(
        bps: Vec<f64>,
        segs: Vec<Expr>,
        point_values: &[(f64, f64)],
        right_limits: &[(f64, f64)],
    ) -> Result<PiecewiseMap> {
        Self::check_shape(&bps, &segs)?;
        let n = segs.len();
        let mut vals: Vec<f64> = (0..=n).map(|i| if i == 0 { segs[0].eval(bps[0]) } else { segs[i - 1].eval(bps[i]) }).collect();
        for &(t, v) in point_values {
            let i = bps.iter().position(|&x| x == t).ok_or_else(|| {
                Error::InvalidInput(format!("point value at {t} is not at a breakpoint"))
            })?;
            vals[i] = v;
        }
        let mut rights: Vec<f64> = (0..=n).map(|i| if i < n { segs[i].eval(bps[i]) } else { vals[n] }).collect();
        for &(t, v) in right_limits {
            let i = bps.iter().position(|&x| x == t).ok_or_else(|| {
                Error::InvalidInput(format!("right limit at {t} is not at a breakpoint"))
            })?;
            if i == n {
                return Err(Error::InvalidInput("no right limit at the right endpoint".into()));
            }
            rights[i] = v;
        }
        rights[n] = vals[n];
        Ok(PiecewiseMap { bps, segs, vals, rights })
    }

    /// Map with every breakpoint value and right limit given explicitly.
    pub fn with_values(bps: Vec<f64>, segs: Vec<Expr>, vals: Vec<f64>, rights: Vec<f64>) -> Result<PiecewiseMap> {
        Self::check_shape(&bps, &segs)?;
        if vals.len() != bps.len() || rights.len() != bps.len() {
            return Err(Error::InvalidInput("one value and one right limit per breakpoint".into()));
        }
        Ok(PiecewiseMap { bps, segs, vals, rights })
    }

    fn check_shape(bps: &[f64], segs: &[Expr]) -> Result<()> {
        if bps.len() < 2 || segs.len() + 1 != bps.len() {
            return Err(Error::InvalidInput("need one segment per breakpoint pair".into()));
        }
        if bps.iter().any(|x| !x.is_finite()) || bps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("breakpoints must be finite and strictly increasing".into()));
        }
        Ok(())
    }

    pub fn from_expr(a: f64, b: f64, e: Expr) -> Result<PiecewiseMap> {
        PiecewiseMap::new(vec![a, b], vec![e], &[], &[])
    }

    pub fn constant(a: f64, b: f64, c: f64) -> PiecewiseMap {
        PiecewiseMap::from_expr(a, b, Expr::constant(c)).expect("valid constant map")
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.bps[0], *self.bps.last().unwrap())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.bps
    }

    pub fn segments(&self) -> &[Expr] {
        &self.segs
    }

    pub fn point_values(&self) -> &[f64] {
        &self.vals
    }

    pub fn right_limits(&self) -> &[f64] {
        &self.rights
    }

    fn check(&self, t: f64) -> Result<()> {
        let (a, b) = self.domain();
        if a <= t && t <= b {
            Ok(())
        } else {
            Err(Error::OutOfDomain { t, lo: a, hi: b })
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.at(t))
    }

    /// Unchecked evaluation; callers guarantee `t` lies in the domain.
    pub fn at(&self, t: f64) -> f64 {
        match locate(&self.bps, t) {
            Loc::At(i) => self.vals[i],
            Loc::Inside(k) => self.segs[k].eval(t),
        }
    }

    pub fn right_limit(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.rl(t))
    }

    pub fn rl(&self, t: f64) -> f64 {
        match locate(&self.bps, t) {
            Loc::At(i) => self.rights[i],
            Loc::Inside(k) => self.segs[k].eval(t),
        }
    }

    pub fn left_limit(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.ll(t))
    }

    pub fn ll(&self, t: f64) -> f64 {
        match locate(&self.bps, t) {
            Loc::At(0) => self.vals[0],
            Loc::At(i) => self.segs[i - 1].eval(t),
            Loc::Inside(k) => self.segs[k].eval(t),
        }
    }

    /// Segment governing `t⁺`.
    pub(crate) fn seg_right(&self, t: f64) -> &Expr {
        match locate(&self.bps, t) {
            Loc::At(i) => &self.segs[i.min(self.segs.len() - 1)],
            Loc::Inside(k) => &self.segs[k],
        }
    }

    /// Segment governing `t⁻`.
    pub(crate) fn seg_left(&self, t: f64) -> &Expr {
        match locate(&self.bps, t) {
            Loc::At(i) => &self.segs[i.saturating_sub(1)],
            Loc::Inside(k) => &self.segs[k],
        }
    }

    /// Extent of the segment governing `t⁺` (or `t⁻` when `left`).
    pub(crate) fn seg_bounds(&self, t: f64, left: bool) -> (f64, f64) {
        let k = match locate(&self.bps, t) {
            Loc::At(i) if left => i.saturating_sub(1),
            Loc::At(i) => i.min(self.segs.len() - 1),
            Loc::Inside(k) => k,
        };
        (self.bps[k], self.bps[k + 1])
    }

    pub fn star_eval(&self, g: &Derivator, t: f64) -> Result<f64> {
        let c = g.classify(t)?;
        self.eval(c.t_star)
    }

    fn same_domain(&self, other: &PiecewiseMap) -> Result<()> {
        let (a0, b0) = self.domain();
        let (a1, b1) = other.domain();
        if a0 == a1 && b0 == b1 {
            Ok(())
        } else {
            Err(Error::DomainMismatch { a0, b0, a1, b1 })
        }
    }

    fn combine(
        &self,
        other: &PiecewiseMap,
        seg_op: impl Fn(&Expr, &Expr) -> Expr,
        val_op: impl Fn(f64, f64) -> f64,
    ) -> Result<PiecewiseMap> {
        self.same_domain(other)?;
        let bps = merge_points(&self.bps, &other.bps);
        let segs = bps.windows(2).map(|w| seg_op(self.seg_right(w[0]), other.seg_right(w[0]))).collect();
        let vals = bps.iter().map(|&x| val_op(self.at(x), other.at(x))).collect();
        let rights = bps.iter().map(|&x| val_op(self.rl(x), other.rl(x))).collect();
        PiecewiseMap::with_values(bps, segs, vals, rights)
    }

    pub fn add(&self, other: &PiecewiseMap) -> Result<PiecewiseMap> {
        self.combine(other, Expr::add, |x, y| x + y)
    }

    pub fn sub(&self, other: &PiecewiseMap) -> Result<PiecewiseMap> {
        self.combine(other, |x, y| x.add(&y.scale(-1.0)), |x, y| x - y)
    }

    pub fn multiply(&self, other: &PiecewiseMap) -> Result<PiecewiseMap> {
        self.combine(other, Expr::mul, |x, y| x * y)
    }

    pub fn scale(&self, c: f64) -> PiecewiseMap {
        PiecewiseMap {
            bps: self.bps.clone(),
            segs: self.segs.iter().map(|e| e.scale(c)).collect(),
            vals: self.vals.iter().map(|v| c * v).collect(),
            rights: self.rights.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> PiecewiseMap {
        PiecewiseMap {
            bps: self.bps.clone(),
            segs: self.segs.iter().map(|e| e.add(&Expr::constant(c))).collect(),
            vals: self.vals.iter().map(|v| v + c).collect(),
            rights: self.rights.iter().map(|v| v + c).collect(),
        }
    }

    /// Pointwise reciprocal; the caller guarantees the map does not vanish.
    pub fn recip(&self) -> PiecewiseMap {
        PiecewiseMap {
            bps: self.bps.clone(),
            segs: self.segs.iter().map(Expr::recip).collect(),
            vals: self.vals.iter().map(|v| 1.0 / v).collect(),
            rights: self.rights.iter().map(|v| 1.0 / v).collect(),
        }
    }

    pub fn divide(&self, other: &PiecewiseMap) -> Result<PiecewiseMap> {
        self.multiply(&other.recip())
    }

    /// `h ∘ self`.
    pub fn compose(&self, h: &ScalarFn) -> PiecewiseMap {
        PiecewiseMap {
            bps: self.bps.clone(),
            segs: self.segs.iter().map(|e| e.compose(h)).collect(),
            vals: self.vals.iter().map(|&v| (h.f)(v)).collect(),
            rights: self.rights.iter().map(|&v| (h.f)(v)).collect(),
        }
    }

    /// Inserts extra breakpoints without changing the function.
    pub fn refine(&self, points: &[f64]) -> PiecewiseMap {
        let (a, b) = self.domain();
        let inner: Vec<f64> = points.iter().copied().filter(|&x| a < x && x < b).collect();
        let bps = merge_points(&self.bps, &inner);
        let segs = bps.windows(2).map(|w| self.seg_right(w[0]).clone()).collect();
        let vals = bps.iter().map(|&x| self.at(x)).collect();
        let rights = bps.iter().map(|&x| self.rl(x)).collect();
        PiecewiseMap { bps, segs, vals, rights }
    }

    /// `f*`: f composed with the projection onto right ends of constancy components.
    pub fn star(&self, g: &Derivator) -> Result<PiecewiseMap> {
        let (a, b) = self.domain();
        if g.domain() != (a, b) {
            let (a1, b1) = g.domain();
            return Err(Error::DomainMismatch { a0: a, b0: b, a1, b1 });
        }
        let ends: Vec<f64> = g.components().iter().flat_map(|c| [c.lo, c.hi]).collect();
        let bps = merge_points(&self.bps, &ends);
        let inside = |u: f64, v: f64| g.components().iter().find(|c| c.lo <= u && v <= c.hi).copied();
        let segs = bps
            .windows(2)
            .map(|w| match inside(w[0], w[1]) {
                Some(c) => Expr::constant(self.at(c.hi)),
                None => self.seg_right(w[0]).clone(),
            })
            .collect();
        let vals = bps.iter().map(|&x| self.at(g.t_star(x))).collect();
        let rights = bps
            .iter()
            .map(|&x| match g.components().iter().find(|c| c.lo <= x && x < c.hi) {
                Some(c) => self.at(c.hi),
                None => self.rl(x),
            })
            .collect();
        PiecewiseMap::with_values(bps, segs, vals, rights)
    }

    /// Sampled sup norm over `grid` plus every breakpoint value and both one-sided limits.
    pub fn sup_norm(&self, grid: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for &t in grid {
            m = m.max(self.at(t).abs());
        }
        for (i, &x) in self.bps.iter().enumerate() {
            m = m.max(self.vals[i].abs()).max(self.rights[i].abs()).max(self.ll(x).abs());
        }
        m
    }

    /// Uniform grid of `n` points over the domain (n >= 2).
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let (a, b) = self.domain();
        uniform_grid(a, b, n)
    }
}

pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Both,
    Left,
    Right,
}

const CONTINUITY_OFFSETS: usize = 64;

fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * (1.0 + y.abs())
}

/// Whether f equals `value` on the interval between `lo` and `hi`, with the
/// endpoints included as flagged.
fn constant_on(f: &PiecewiseMap, lo: f64, hi: f64, lo_incl: bool, hi_incl: bool, value: f64, tol: f64) -> bool {
    if lo_incl && !close(f.at(lo), value, tol) {
        return false;
    }
    if hi_incl && !close(f.at(hi), value, tol) {
        return false;
    }
    if !(lo < hi) {
        return true;
    }
    if !close(f.rl(lo), value, tol) || !close(f.ll(hi), value, tol) {
        return false;
    }
    let bps = f.breakpoints();
    for (i, &x) in bps.iter().enumerate() {
        if lo < x && x < hi && !(close(f.vals[i], value, tol) && close(f.rights[i], value, tol) && close(f.ll(x), value, tol)) {
            return false;
        }
    }
    let mut u = lo;
    loop {
        let e = f.seg_right(u);
        let (_, end) = f.seg_bounds(u, false);
        let v = end.min(hi);
        let ok = match e.as_constant() {
            Some(c) => close(c, value, tol),
            None => (1..CONTINUITY_OFFSETS).all(|k| close(e.eval(u + (v - u) * k as f64 / CONTINUITY_OFFSETS as f64), value, tol)),
        };
        if !ok {
            return false;
        }
        if v >= hi {
            return true;
        }
        u = v;
    }
}

/// Samples `|f(s) - f(t)|` at geometric offsets approaching `p` from one side and
/// requires it to vanish in the limit.
fn sampled_approach(f: &PiecewiseMap, p: f64, toward_right: bool, reference: f64, tol: f64) -> bool {
    let limit = if toward_right { f.rl(p) } else { f.ll(p) };
    if !close(limit, reference, tol) {
        return false;
    }
    let (lo, hi) = f.seg_bounds(p, !toward_right);
    let h0 = ((hi - lo) / 2.0).min(1e-2);
    let e = if toward_right { f.seg_right(p) } else { f.seg_left(p) };
    let mut tail = Vec::new();
    for k in 0..CONTINUITY_OFFSETS {
        let h = h0 * 0.5f64.powi(k as i32);
        let s = if toward_right { p + h } else { p - h };
        if s == p {
            break;
        }
        tail.push((e.eval(s) - reference).abs());
    }
    let n = tail.len();
    n == 0 || tail[n.saturating_sub(3)..].iter().all(|d| *d <= tol * (1.0 + reference.abs()))
}

/// Sampled semi-decision of (one-sided) g-continuity of f at t.
pub fn is_g_continuous_at(f: &PiecewiseMap, g: &Derivator, t: f64, tol: f64, side: Side) -> bool {
    let (a, b) = g.domain();
    if !(a <= t && t <= b) {
        return false;
    }
    let ft = f.at(t);
    let right_ok = || {
        if t >= b || g.jump_at(t) > 0.0 {
            return true;
        }
        match g.components().iter().find(|c| c.lo <= t && t < c.hi) {
            Some(c) => {
                if !constant_on(f, t, c.hi, false, true, ft, tol) {
                    return false;
                }
                g.jump_at(c.hi) > 0.0 || c.hi >= b || sampled_approach(f, c.hi, true, ft, tol)
            }
            None => sampled_approach(f, t, true, ft, tol),
        }
    };
    let left_ok = || {
        if t <= a {
            return true;
        }
        match g.components().iter().find(|c| c.lo < t && t <= c.hi) {
            Some(c) => {
                let lo_jumps = g.jump_at(c.lo) > 0.0;
                if !constant_on(f, c.lo, t, !lo_jumps, false, ft, tol) {
                    return false;
                }
                lo_jumps || c.lo <= a || sampled_approach(f, c.lo, false, ft, tol)
            }
            None => sampled_approach(f, t, false, ft, tol),
        }
    };
    match side {
        Side::Both => left_ok() && right_ok(),
        Side::Left => left_ok(),
        Side::Right => right_ok(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BDReport {
    pub is_bounded: bool,
    pub g_continuous_off_exceptional: bool,
    pub left_g_continuous_on_ng_minus: bool,
    pub right_g_continuous_on_ng_plus: bool,
    pub verdict: bool,
}

/// Sampled BD_g membership over `grid` plus all breakpoints of f and g.
pub fn bd_membership(f: &PiecewiseMap, g: &Derivator, tol: f64, grid: &[f64]) -> BDReport {
    let mut points: Vec<f64> = grid.iter().chain(f.breakpoints()).chain(g.breakpoints()).copied().filter(|&t| g.contains(t)).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let is_bounded = f.sup_norm(&points).is_finite();
    let (mut off, mut left, mut right) = (true, true, true);
    for &t in &points {
        match g.class_of(t).class {
            PointClass::Regular => off &= is_g_continuous_at(f, g, t, tol, Side::Both),
            PointClass::NgMinus => left &= is_g_continuous_at(f, g, t, tol, Side::Left),
            PointClass::NgPlus => right &= is_g_continuous_at(f, g, t, tol, Side::Right),
            _ => {}
        }
    }
    BDReport {
        is_bounded,
        g_continuous_off_exceptional: off,
        left_g_continuous_on_ng_minus: left,
        right_g_continuous_on_ng_plus: right,
        verdict: is_bounded && off && left && right,
    }
}
