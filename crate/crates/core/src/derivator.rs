//! Derivators: left-continuous non-decreasing piecewise functions with their
//! jump set, constancy components and the endpoint sets derived from them.

use serde::Serialize;

use crate::cantor::{self, Piece as CantorPiece};
use crate::error::{Error, Result};
use crate::expr::{Custom, Expr};
use crate::piecewise::PiecewiseMap;

/// Shape of a derivator on one segment `[lo, hi]`.
#[derive(Clone, Debug)]
pub enum SegmentForm {
    Affine { slope: f64, intercept: f64 },
    Constant { level: f64 },
    /// Continuous Cantor approximant of the given depth, rescaled to the segment
    /// and rising from `from` to `to`.
    CantorIterate { depth: u32, from: f64, to: f64 },
    CustomMonotone { func: Custom, strictly_increasing: bool },
}

#[derive(Clone, Debug)]
pub struct SegmentSpec {
    pub lo: f64,
    pub hi: f64,
    pub form: SegmentForm,
}

/// Analytic object a finite derivator stands in for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DeclaredLimit {
    /// The Cantor function: constancy endpoints accumulate outside the (empty) jump set.
    CantorFunction,
    /// Jumps accumulating at a point that is not itself a jump.
    AccumulatingJumps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PointClass {
    Regular,
    Jump,
    ConstancyInterior,
    NgMinus,
    NgPlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointClassification {
    pub class: PointClass,
    pub t_star: f64,
    pub delta_g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClosureConditions {
    pub ng_accum_ok: bool,
    pub dg_accum_ok: bool,
}

#[derive(Clone, Debug)]
pub(crate) enum GPiece {
    Linear { x0: f64, y0: f64, x1: f64, y1: f64, slope: f64 },
    Flat { level: f64 },
    Monotone { func: Custom },
}

impl GPiece {
    pub(crate) fn eval(&self, t: f64) -> f64 {
        match self {
            GPiece::Linear { x0, y0, x1, y1, slope } => {
                if t <= *x0 {
                    *y0
                } else if t >= *x1 {
                    *y1
                } else {
                    (y0 + (t - x0) * slope).clamp(*y0, *y1)
                }
            }
            GPiece::Flat { level } => *level,
            GPiece::Monotone { func } => (func.f)(t),
        }
    }

    /// Derivative of the piece at `t` when known in closed form.
    pub(crate) fn slope_at(&self, t: f64) -> Option<f64> {
        match self {
            GPiece::Linear { slope, .. } => Some(*slope),
            GPiece::Flat { .. } => Some(0.0),
            GPiece::Monotone { func } => func.df.as_ref().map(|d| d(t)),
        }
    }

    pub(crate) fn is_flat(&self) -> bool {
        matches!(self, GPiece::Flat { .. })
    }

    pub(crate) fn expr(&self) -> Expr {
        match self {
            GPiece::Linear { x0, y0, slope, .. } => Expr::affine(*slope, y0 - slope * x0),
            GPiece::Flat { level } => Expr::constant(*level),
            GPiece::Monotone { func } => Expr::Custom(func.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Component {
    pub lo: f64,
    pub hi: f64,
    #[serde(skip)]
    pub(crate) lo_idx: usize,
    #[serde(skip)]
    pub(crate) hi_idx: usize,
}

#[derive(Clone, Debug)]
pub struct Derivator {
    a: f64,
    b: f64,
    bps: Vec<f64>,
    pieces: Vec<GPiece>,
    jump: Vec<f64>,
    val: Vec<f64>,
    right: Vec<f64>,
    piece_comp: Vec<Option<usize>>,
    comps: Vec<Component>,
    bp_class: Vec<PointClassification>,
    specs: Vec<SegmentSpec>,
    declared_jumps: Vec<(f64, f64)>,
    declared_limit: Option<DeclaredLimit>,
    truncation_depth: Option<u32>,
}

const SAMPLES_PER_CUSTOM_SEGMENT: usize = 1024;

fn consistency_eps(x: f64, y: f64) -> f64 {
    1e-12 * (1.0 + x.abs().max(y.abs()))
}

pub(crate) enum Loc {
    At(usize),
    Inside(usize),
}

pub(crate) fn locate(bps: &[f64], t: f64) -> Loc {
    match bps.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(i) => Loc::At(i),
        Err(k) => Loc::Inside(k - 1),
    }
}

impl Derivator {
    pub fn build(
        domain: (f64, f64),
        breakpoints: Vec<f64>,
        segments: Vec<SegmentForm>,
        jumps: Vec<(f64, f64)>,
    ) -> Result<Derivator> {
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!("bad domain [{a}, {b}]")));
        }
        if breakpoints.len() < 2 || breakpoints[0] != a || *breakpoints.last().unwrap() != b {
            return Err(Error::InvalidInput("breakpoints must start at a and end at b".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
        }
        if segments.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidInput("need exactly one segment per breakpoint pair".into()));
        }
        for &(t, d) in &jumps {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidInput(format!("jump at {t} must be positive, got {d}")));
            }
            if t == b {
                return Err(Error::EndpointHypothesisViolation(format!("b = {b} is a jump point")));
            }
            if !breakpoints.contains(&t) {
                return Err(Error::InvalidInput(format!("jump at {t} is not a breakpoint")));
            }
        }
        let mut declared_jumps = jumps.clone();
        declared_jumps.sort_by(|x, y| x.0.total_cmp(&y.0));
        if declared_jumps.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("duplicate jump".into()));
        }

        let specs: Vec<SegmentSpec> = segments
            .iter()
            .enumerate()
            .map(|(i, form)| SegmentSpec { lo: breakpoints[i], hi: breakpoints[i + 1], form: form.clone() })
            .collect();

        let mut bps = vec![a];
        let mut pieces = Vec::new();
        for spec in &specs {
            let (lo, hi) = (spec.lo, spec.hi);
            match &spec.form {
                SegmentForm::Affine { slope, intercept } => {
                    if !(slope.is_finite() && intercept.is_finite()) {
                        return Err(Error::InvalidInput("non-finite affine segment".into()));
                    }
                    if *slope < 0.0 {
                        return Err(Error::MonotonicityViolation { at: lo, detail: format!("slope {slope} < 0") });
                    }
                    if *slope == 0.0 {
                        pieces.push(GPiece::Flat { level: *intercept });
                    } else {
                        let (y0, y1) = (slope * lo + intercept, slope * hi + intercept);
                        pieces.push(GPiece::Linear { x0: lo, y0, x1: hi, y1, slope: (y1 - y0) / (hi - lo) });
                    }
                    bps.push(hi);
                }
                SegmentForm::Constant { level } => {
                    if !level.is_finite() {
                        return Err(Error::InvalidInput("non-finite constant segment".into()));
                    }
                    pieces.push(GPiece::Flat { level: *level });
                    bps.push(hi);
                }
                SegmentForm::CantorIterate { depth, from, to } => {
                    if *depth > cantor::MAX_DEPTH {
                        return Err(Error::InvalidInput(format!("Cantor depth {depth} too large")));
                    }
                    if !(from.is_finite() && to.is_finite()) || to < from {
                        return Err(Error::MonotonicityViolation { at: lo, detail: format!("Cantor segment {from} -> {to}") });
                    }
                    if to == from {
                        pieces.push(GPiece::Flat { level: *from });
                        bps.push(hi);
                        continue;
                    }
                    let (sub, sub_pieces) = cantor::approximant_pieces(*depth, lo, hi, *from, *to);
                    for (k, p) in sub_pieces.into_iter().enumerate() {
                        pieces.push(match p {
                            CantorPiece::Rise { x0, y0, x1, y1 } => {
                                GPiece::Linear { x0, y0, x1, y1, slope: (y1 - y0) / (x1 - x0) }
                            }
                            CantorPiece::Flat(level) => GPiece::Flat { level },
                        });
                        bps.push(sub[k + 1]);
                    }
                }
                SegmentForm::CustomMonotone { func, strictly_increasing } => {
                    if !strictly_increasing {
                        return Err(Error::InvalidInput(
                            "custom segments must be strictly increasing; declare plateaus as constant segments".into(),
                        ));
                    }
                    let n = SAMPLES_PER_CUSTOM_SEGMENT;
                    let mut prev = (func.f)(lo);
                    for k in 1..=n {
                        let t = lo + (hi - lo) * k as f64 / n as f64;
                        let v = (func.f)(t);
                        if !v.is_finite() || !prev.is_finite() {
                            return Err(Error::InvalidInput(format!("custom segment not finite near {t}")));
                        }
                        if v < prev {
                            return Err(Error::MonotonicityViolation { at: t, detail: "custom segment decreases".into() });
                        }
                        prev = v;
                    }
                    pieces.push(GPiece::Monotone { func: func.clone() });
                    bps.push(hi);
                }
            }
        }
        if bps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("segment too short to resolve".into()));
        }

        let n = bps.len() - 1;
        let mut jump = vec![0.0; n + 1];
        for &(t, d) in &declared_jumps {
            let i = bps.iter().position(|&x| x == t).expect("jump located at original breakpoint");
            jump[i] = d;
        }

        for i in 1..n {
            let x = bps[i];
            let prev = pieces[i - 1].eval(x);
            let start = pieces[i].eval(x);
            let expected = prev + jump[i];
            if (start - expected).abs() > consistency_eps(start, expected) {
                if start < prev - consistency_eps(start, prev) {
                    return Err(Error::MonotonicityViolation {
                        at: x,
                        detail: format!("drops from {prev} to {start}"),
                    });
                }
                return Err(Error::LeftContinuityViolation { at: x, expected, found: start });
            }
        }

        let mut val = vec![0.0; n + 1];
        val[0] = pieces[0].eval(a) - jump[0];
        for i in 1..=n {
            val[i] = pieces[i - 1].eval(bps[i]);
        }
        let right: Vec<f64> = (0..=n).map(|i| val[i] + jump[i]).collect();

        let mut comps = Vec::new();
        let mut piece_comp = vec![None; n];
        let mut k = 0;
        while k < n {
            if let GPiece::Flat { level } = pieces[k] {
                let mut e = k + 1;
                while e < n && jump[e] == 0.0 && matches!(pieces[e], GPiece::Flat { level: l } if l == level) {
                    e += 1;
                }
                for slot in piece_comp.iter_mut().take(e).skip(k) {
                    *slot = Some(comps.len());
                }
                comps.push(Component { lo: bps[k], hi: bps[e], lo_idx: k, hi_idx: e });
                k = e;
            } else {
                k += 1;
            }
        }
        for c in &comps {
            if c.lo_idx == 0 && jump[0] == 0.0 {
                return Err(Error::EndpointHypothesisViolation(format!(
                    "a = {a} is the left end of a constancy interval and not a jump"
                )));
            }
            if c.hi_idx == n {
                return Err(Error::EndpointHypothesisViolation(format!("g is constant up to b = {b}")));
            }
        }

        let bp_class = (0..=n)
            .map(|i| {
                let t = bps[i];
                if jump[i] > 0.0 {
                    return PointClassification { class: PointClass::Jump, t_star: t, delta_g: jump[i] };
                }
                for c in &comps {
                    if c.lo_idx < i && i < c.hi_idx {
                        return PointClassification { class: PointClass::ConstancyInterior, t_star: c.hi, delta_g: 0.0 };
                    }
                    if c.lo_idx == i {
                        return PointClassification { class: PointClass::NgMinus, t_star: t, delta_g: 0.0 };
                    }
                    if c.hi_idx == i {
                        return PointClassification { class: PointClass::NgPlus, t_star: t, delta_g: 0.0 };
                    }
                }
                PointClassification { class: PointClass::Regular, t_star: t, delta_g: 0.0 }
            })
            .collect();

        Ok(Derivator {
            a,
            b,
            bps,
            pieces,
            jump,
            val,
            right,
            piece_comp,
            comps,
            bp_class,
            specs,
            declared_jumps,
            declared_limit: None,
            truncation_depth: None,
        })
    }

    /// Identity derivator `g(t) = t` on `[a, b]`.
    pub fn identity(a: f64, b: f64) -> Result<Derivator> {
        Derivator::build((a, b), vec![a, b], vec![SegmentForm::Affine { slope: 1.0, intercept: 0.0 }], Vec::new())
    }

    pub fn with_declared_limit(mut self, limit: Option<DeclaredLimit>) -> Self {
        self.declared_limit = limit;
        self
    }

    pub fn with_truncation_depth(mut self, depth: Option<u32>) -> Self {
        self.truncation_depth = depth;
        self
    }

    pub fn declared_limit(&self) -> Option<DeclaredLimit> {
        self.declared_limit
    }

    pub fn truncation_depth(&self) -> Option<u32> {
        self.truncation_depth
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.bps
    }

    pub fn segment_specs(&self) -> &[SegmentSpec] {
        &self.specs
    }

    pub fn declared_jumps(&self) -> &[(f64, f64)] {
        &self.declared_jumps
    }

    pub fn components(&self) -> &[Component] {
        &self.comps
    }

    pub fn contains(&self, t: f64) -> bool {
        self.a <= t && t <= self.b
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { t, lo: self.a, hi: self.b })
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.at(t))
    }

    /// Unchecked evaluation; callers guarantee `t` lies in the domain.
    pub fn at(&self, t: f64) -> f64 {
        match locate(&self.bps, t) {
            Loc::At(i) => self.val[i],
            Loc::Inside(k) => self.pieces[k].eval(t),
        }
    }

    pub fn right_limit(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.rl(t))
    }

    pub fn rl(&self, t: f64) -> f64 {
        match locate(&self.bps, t) {
            Loc::At(i) => self.right[i],
            Loc::Inside(k) => self.pieces[k].eval(t),
        }
    }

    pub fn delta(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.jump_at(t))
    }

    pub fn jump_at(&self, t: f64) -> f64 {
        match locate(&self.bps, t) {
            Loc::At(i) => self.jump[i],
            Loc::Inside(_) => 0.0,
        }
    }

    /// Jump points in increasing order with their masses.
    pub fn jump_points(&self) -> Vec<(f64, f64)> {
        self.bps.iter().zip(&self.jump).filter(|(_, d)| **d > 0.0).map(|(t, d)| (*t, *d)).collect()
    }

    pub fn ng_minus(&self) -> Vec<f64> {
        self.points_of(PointClass::NgMinus)
    }

    pub fn ng_plus(&self) -> Vec<f64> {
        self.points_of(PointClass::NgPlus)
    }

    fn points_of(&self, class: PointClass) -> Vec<f64> {
        self.bps.iter().zip(&self.bp_class).filter(|(_, c)| c.class == class).map(|(t, _)| *t).collect()
    }

    pub fn classify(&self, t: f64) -> Result<PointClassification> {
        self.check(t)?;
        Ok(self.class_of(t))
    }

    pub(crate) fn class_of(&self, t: f64) -> PointClassification {
        match locate(&self.bps, t) {
            Loc::At(i) => self.bp_class[i],
            Loc::Inside(k) => match self.piece_comp[k] {
                Some(c) => PointClassification {
                    class: PointClass::ConstancyInterior,
                    t_star: self.comps[c].hi,
                    delta_g: 0.0,
                },
                None => PointClassification { class: PointClass::Regular, t_star: t, delta_g: 0.0 },
            },
        }
    }

    pub fn t_star(&self, t: f64) -> f64 {
        self.class_of(t).t_star
    }

    pub fn closure_conditions(&self) -> ClosureConditions {
        match self.declared_limit {
            None => ClosureConditions { ng_accum_ok: true, dg_accum_ok: true },
            Some(DeclaredLimit::CantorFunction) => ClosureConditions { ng_accum_ok: false, dg_accum_ok: true },
            Some(DeclaredLimit::AccumulatingJumps) => ClosureConditions { ng_accum_ok: true, dg_accum_ok: false },
        }
    }

    pub(crate) fn pieces(&self) -> &[GPiece] {
        &self.pieces
    }

    /// Index of the piece governing `t⁺` (`t < b`).
    pub(crate) fn piece_right(&self, t: f64) -> usize {
        match locate(&self.bps, t) {
            Loc::At(i) => i.min(self.pieces.len() - 1),
            Loc::Inside(k) => k,
        }
    }

    /// Index of the piece governing `t⁻` (`t > a`).
    pub(crate) fn piece_left(&self, t: f64) -> usize {
        match locate(&self.bps, t) {
            Loc::At(i) => i.saturating_sub(1),
            Loc::Inside(k) => k,
        }
    }

    /// g as a piecewise map with the same one-sided values.
    pub fn as_map(&self) -> PiecewiseMap {
        PiecewiseMap::with_values(
            self.bps.clone(),
            self.pieces.iter().map(GPiece::expr).collect(),
            self.val.clone(),
            self.right.clone(),
        )
        .expect("derivator data is a valid piecewise map")
    }
}
