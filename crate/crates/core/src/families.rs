//! The interval families I₁ and I₂ and mean value inequalities checked on them.

use serde::Serialize;

use crate::cantor;
use crate::derivator::{DeclaredLimit, Derivator, PointClass, SegmentForm};
use crate::error::{Error, Result};
use crate::gdiff::derivative_value;
use crate::piecewise::PiecewiseMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Member {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Member {
    pub fn contains(&self, t: f64) -> bool {
        (self.lo < t || (self.lo_closed && self.lo == t)) && (t < self.hi || (self.hi_closed && self.hi == t))
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }
}

/// Which Cantor-type set a totally disconnected family stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LimitSet {
    Cantor,
    CantorHat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalFamily {
    pub members: Vec<Member>,
    /// Set when g stands in for the Cantor function: the family of the limit
    /// object consists of singletons of `limit_set`.
    pub totally_disconnected: bool,
    pub limit_set: Option<LimitSet>,
    #[serde(skip)]
    depth: u32,
}

impl IntervalFamily {
    /// Membership in the union of the family; for totally disconnected families
    /// this is the Cantor-type set test at the representation's depth.
    pub fn contains(&self, t: f64) -> bool {
        match self.limit_set {
            Some(set) => match cantor::cantor_membership(t, self.depth) {
                Ok(m) => match set {
                    LimitSet::Cantor => m.in_c,
                    LimitSet::CantorHat => m.in_c_hat,
                },
                Err(_) => false,
            },
            None => self.members.iter().any(|m| m.contains(t)),
        }
    }

    pub fn member_of(&self, t: f64) -> Option<&Member> {
        self.members.iter().find(|m| m.contains(t))
    }
}

fn cantor_depth(g: &Derivator) -> Option<u32> {
    if g.declared_limit() != Some(DeclaredLimit::CantorFunction) {
        return None;
    }
    g.segment_specs().iter().find_map(|s| match s.form {
        SegmentForm::CantorIterate { depth, .. } => Some(depth),
        _ => None,
    })
}

fn family(g: &Derivator, members: Vec<Member>, set: LimitSet) -> IntervalFamily {
    let depth = cantor_depth(g);
    IntervalFamily {
        members,
        totally_disconnected: depth.is_some(),
        limit_set: depth.map(|_| set),
        depth: depth.unwrap_or(0),
    }
}

fn i1_members(g: &Derivator) -> Vec<Member> {
    let (a, b) = g.domain();
    let mut out = Vec::new();
    let mut start = a;
    for c in g.components() {
        out.push(Member { lo: start, hi: c.lo, lo_closed: true, hi_closed: true });
        start = c.hi;
    }
    out.push(Member { lo: start, hi: b, lo_closed: true, hi_closed: true });
    out
}

/// Connected components of `[a,b] \ C_g`.
pub fn family_i1(g: &Derivator) -> IntervalFamily {
    family(g, i1_members(g), LimitSet::Cantor)
}

/// Connected components of `[a,b] \ (C_g ∪ N_g⁺ ∪ D_g)`.
pub fn family_i2(g: &Derivator) -> IntervalFamily {
    let mut out = Vec::new();
    for m in i1_members(g) {
        let mut cuts: Vec<f64> = g.jump_points().into_iter().map(|p| p.0).filter(|&t| m.lo <= t && t <= m.hi).collect();
        if g.class_of(m.lo).class == PointClass::NgPlus {
            cuts.push(m.lo);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut edges = vec![m.lo];
        edges.extend(cuts.iter().copied().filter(|&t| m.lo < t && t < m.hi));
        edges.push(m.hi);
        for w in edges.windows(2) {
            let lo_closed = !cuts.contains(&w[0]);
            let hi_closed = !cuts.contains(&w[1]);
            if w[0] == w[1] && !(lo_closed && hi_closed) {
                continue;
            }
            out.push(Member { lo: w[0], hi: w[1], lo_closed, hi_closed });
        }
    }
    out.dedup();
    family(g, out, LimitSet::CantorHat)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    I1,
    I2,
    Whole,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorstPair {
    pub s: f64,
    pub t: f64,
    /// `|f(s) - f(t)| - |h(s) - h(t)|`.
    pub excess: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DominanceOutcome {
    pub holds: bool,
    pub worst: Option<WorstPair>,
}

fn sample_points(g: &Derivator, maps: &[&PiecewiseMap], grid: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = grid
        .iter()
        .chain(g.breakpoints())
        .chain(maps.iter().flat_map(|m| m.breakpoints()))
        .copied()
        .filter(|&t| g.contains(t))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn members_for(g: &Derivator, kind: FamilyKind) -> Vec<Member> {
    match kind {
        FamilyKind::I1 => family_i1(g).members,
        FamilyKind::I2 => family_i2(g).members,
        FamilyKind::Whole => {
            let (a, b) = g.domain();
            vec![Member { lo: a, hi: b, lo_closed: true, hi_closed: true }]
        }
    }
}

/// Checks `|f(s) - f(t)| <= |h(s) - h(t)| + tol` for sampled pairs inside each
/// family member, after checking `|f'_g| <= h'_g` on the samples.
pub fn mvt_dominance_check(
    f: &PiecewiseMap,
    h: &PiecewiseMap,
    g: &Derivator,
    kind: FamilyKind,
    grid: &[f64],
    tol: f64,
) -> Result<DominanceOutcome> {
    let pts = sample_points(g, &[f, h], grid);
    for &t in &pts {
        let df = derivative_value(f, g, t, tol)?;
        let dh = derivative_value(h, g, t, tol)?;
        if df.abs() > dh + tol * (1.0 + dh.abs()) {
            return Err(Error::HypothesisFailed { at: t, f_deriv: df.abs(), h_deriv: dh });
        }
    }
    let mut worst: Option<WorstPair> = None;
    for m in members_for(g, kind) {
        let inside: Vec<(f64, f64, f64)> = pts.iter().filter(|&&t| m.contains(t)).map(|&t| (t, f.at(t), h.at(t))).collect();
        for (i, &(s, fs, hs)) in inside.iter().enumerate() {
            for &(t, ft, ht) in &inside[i + 1..] {
                let excess = (fs - ft).abs() - (hs - ht).abs();
                if worst.map_or(true, |w| excess > w.excess) {
                    worst = Some(WorstPair { s, t, excess });
                }
            }
        }
    }
    Ok(DominanceOutcome { holds: worst.map_or(true, |w| w.excess <= tol), worst })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundedOutcome {
    pub holds: bool,
    /// Largest `lhs - rhs` over the members, with the member attaining it.
    pub worst_excess: f64,
    pub worst_member: Option<Member>,
}

/// For every I₂ member with closure `[c,d]`:
/// `|f(d⁻) - f(c⁺)| <= sup |f'_g| * (g(d⁻) - g(c⁺)) + tol`, the sup taken over samples.
/// A sampled sup can only undershoot, so a pass is not a proof.
pub fn mvt_bounded_check(f: &PiecewiseMap, g: &Derivator, grid: &[f64], tol: f64) -> Result<BoundedOutcome> {
    let pts = sample_points(g, &[f], grid);
    let mut out = BoundedOutcome { holds: true, worst_excess: f64::NEG_INFINITY, worst_member: None };
    for m in family_i2(g).members {
        if m.is_singleton() {
            continue;
        }
        let (c, d) = (m.lo, m.hi);
        let fc = if m.lo_closed { f.at(c) } else { f.rl(c) };
        let fd = if m.hi_closed { f.at(d) } else { f.ll(d) };
        let gc = if m.lo_closed { g.at(c) } else { g.rl(c) };
        let gd = g.at(d);
        let mut sup = 0.0f64;
        for &t in pts.iter().filter(|&&t| m.contains(t)) {
            sup = sup.max(derivative_value(f, g, t, tol)?.abs());
        }
        let excess = (fd - fc).abs() - sup * (gd - gc);
        if excess > out.worst_excess {
            out.worst_excess = excess;
            out.worst_member = Some(m);
        }
    }
    out.holds = out.worst_excess <= tol;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanSlopeMasses {
    pub slope: f64,
    pub above_mass: f64,
    pub below_mass: f64,
}

/// μ_g-mass of `{f'_g >= slope}` and `{f'_g <= slope}` with
/// `slope = (f(b) - f(a)) / (g(b) - g(a))`, estimated on `samples` cells plus atoms.
pub fn ac_mean_slope_check(f: &PiecewiseMap, g: &Derivator, samples: usize) -> Result<MeanSlopeMasses> {
    let (a, b) = g.domain();
    let total = g.at(b) - g.at(a);
    if total == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let slope = (f.at(b) - f.at(a)) / total;
    let eps = 1e-9 * (1.0 + slope.abs());
    let tol = crate::gdiff::DEFAULT_TOL;
    let mut cuts = sample_points(g, &[f], &crate::piecewise::uniform_grid(a, b, samples.max(2) + 1));
    cuts.dedup();
    let (mut above, mut below) = (0.0, 0.0);
    let mut tally = |d: f64, mass: f64| {
        if d >= slope - eps {
            above += mass;
        }
        if d <= slope + eps {
            below += mass;
        }
    };
    for (t, dg) in g.jump_points() {
        tally(derivative_value(f, g, t, tol)?, dg);
    }
    for w in cuts.windows(2) {
        let mass = g.at(w[1]) - g.rl(w[0]);
        if mass > 0.0 {
            tally(derivative_value(f, g, 0.5 * (w[0] + w[1]), tol)?, mass);
        }
    }
    Ok(MeanSlopeMasses { slope, above_mass: above, below_mass: below })
}
