//! Chordal distance, the difference-quotient functional Γ and the metric d on BD¹.

use serde::Serialize;

use crate::derivator::Derivator;
use crate::error::{Error, Result};
use crate::gdiff::{self, derivative_value};
use crate::piecewise::{uniform_grid, PiecewiseMap};

/// A real number or the point at infinity of the projectively extended line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

/// `|x - y| / (√(1+x²) √(1+y²))`.
pub fn chordal(x: f64, y: f64) -> f64 {
    if x == y {
        return 0.0;
    }
    (x - y).abs() / (1f64.hypot(x) * 1f64.hypot(y))
}

/// Chordal distance with `l(∞, y) = 1/√(1+y²)` and `l(∞, ∞) = 0`.
pub fn chordal_ext(x: ExtReal, y: ExtReal) -> f64 {
    match (x, y) {
        (ExtReal::Finite(x), ExtReal::Finite(y)) => chordal(x, y),
        (ExtReal::Infinite, ExtReal::Infinite) => 0.0,
        (ExtReal::Infinite, ExtReal::Finite(y)) | (ExtReal::Finite(y), ExtReal::Infinite) => 1.0 / 1f64.hypot(y),
    }
}

/// Sampling parameters for Γ and the sup norms.
#[derive(Clone, Copy, Debug)]
pub struct PairGrid {
    pub uniform: usize,
    pub near_diagonal: u32,
    pub approach_halvings: u32,
}

impl Default for PairGrid {
    fn default() -> Self {
        PairGrid { uniform: 256, near_diagonal: 20, approach_halvings: 40 }
    }
}

/// Approach increments below this (relative) size are not trusted.
const RESOLVABLE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Side {
    At,
    Right,
    Left,
}

/// Sample points (including one-sided limits as pseudo-points) and explicit real pairs,
/// fixed once for every function compared on it.
struct PairSet {
    nodes: Vec<(f64, Side)>,
    node_g: Vec<f64>,
    positions: Vec<f64>,
    /// (anchor node, partner point, g(partner) - g(anchor)).
    probes: Vec<(usize, f64, f64)>,
    /// (s, t, g(s) - g(t)).
    near: Vec<(f64, f64, f64)>,
}

fn value(f: &PiecewiseMap, t: f64, side: Side) -> f64 {
    match side {
        Side::At => f.at(t),
        Side::Right => f.rl(t),
        Side::Left => f.ll(t),
    }
}

fn gvalue(g: &Derivator, t: f64, side: Side) -> f64 {
    match side {
        Side::Right => g.rl(t),
        _ => g.at(t),
    }
}

/// Closure of the constancy component around `t` (around `t⁺` when `right`), else `[t, t]`.
fn level_bounds(g: &Derivator, t: f64, right: bool) -> (f64, f64) {
    g.components()
        .iter()
        .find(|c| c.lo <= t && if right { t < c.hi } else { t <= c.hi })
        .map_or((t, t), |c| (c.lo, c.hi))
}

impl PairSet {
    fn build(g: &Derivator, fs: &[&PiecewiseMap], cfg: &PairGrid) -> Result<PairSet> {
        let (a, b) = g.domain();
        for f in fs {
            if f.domain() != (a, b) {
                let (a1, b1) = f.domain();
                return Err(Error::DomainMismatch { a0: a, b0: b, a1, b1 });
            }
        }
        let mut events: Vec<f64> = fs.iter().flat_map(|f| f.breakpoints().iter().copied()).collect();
        events.extend(g.jump_points().iter().map(|p| p.0));
        events.sort_by(f64::total_cmp);
        events.dedup();

        let mut positions = uniform_grid(a, b, cfg.uniform.max(2));
        positions.extend(g.breakpoints());
        positions.extend(&events);
        positions.sort_by(f64::total_cmp);
        positions.dedup();

        let mut nodes = Vec::with_capacity(positions.len());
        for &t in &positions {
            nodes.push((t, Side::At));
            if t < b && (g.rl(t) != g.at(t) || fs.iter().any(|f| f.rl(t) != f.at(t))) {
                nodes.push((t, Side::Right));
            }
            if t > a && fs.iter().any(|f| f.ll(t) != f.at(t)) {
                nodes.push((t, Side::Left));
            }
        }
        let node_g: Vec<f64> = nodes.iter().map(|&(t, s)| gvalue(g, t, s)).collect();

        let mut probes = Vec::new();
        for (i, &(t, side)) in nodes.iter().enumerate() {
            if events.binary_search_by(|e| e.total_cmp(&t)).is_err() {
                continue;
            }
            let (lo, hi) = level_bounds(g, t, side == Side::Right);
            let w_lo = (lo - a).min(1e-2);
            let w_hi = (b - hi).min(1e-2);
            for k in 1..=cfg.approach_halvings {
                let h = 0.5f64.powi(k as i32);
                for s in [lo - w_lo * h, hi + w_hi * h] {
                    if s < a || s > b {
                        continue;
                    }
                    let dg = g.at(s) - node_g[i];
                    if dg != 0.0 {
                        probes.push((i, s, dg));
                    }
                }
            }
        }

        let mut near = Vec::new();
        for &t in &uniform_grid(a, b, cfg.uniform.max(2)) {
            for k in 1..=cfg.near_diagonal {
                let s = t + (b - a) * 0.5f64.powi(k as i32);
                if s <= b {
                    let dg = g.at(s) - g.at(t);
                    if dg != 0.0 {
                        near.push((s, t, dg));
                    }
                }
            }
        }
        Ok(PairSet { nodes, node_g, positions, probes, near })
    }

    fn sample(&self, f: &PiecewiseMap) -> Sampled {
        Sampled {
            nodes: self.nodes.iter().map(|&(t, s)| value(f, t, s)).collect(),
            probes: self
                .probes
                .iter()
                .map(|&(i, s, _)| {
                    let (u, v) = (f.at(s), value(f, self.nodes[i].0, self.nodes[i].1));
                    (u - v, RESOLVABLE * (1.0 + u.abs() + v.abs()))
                })
                .collect(),
            near: self.near.iter().map(|&(s, t, _)| f.at(s) - f.at(t)).collect(),
        }
    }

    fn gamma(&self, x: &Sampled, y: &Sampled) -> f64 {
        let mut sup = 0.0f64;
        let n = self.nodes.len();
        for i in 0..n {
            for j in i + 1..n {
                let dg = self.node_g[j] - self.node_g[i];
                if dg != 0.0 {
                    sup = sup.max(chordal((x.nodes[j] - x.nodes[i]) / dg, (y.nodes[j] - y.nodes[i]) / dg));
                }
            }
        }
        for (k, p) in self.probes.iter().enumerate() {
            let ((nx, fx), (ny, fy)) = (x.probes[k], y.probes[k]);
            // Both increments at rounding level: the quotients are noise.
            if nx.abs() <= fx && ny.abs() <= fy {
                continue;
            }
            sup = sup.max(chordal(nx / p.2, ny / p.2));
        }
        for (k, p) in self.near.iter().enumerate() {
            sup = sup.max(chordal(x.near[k] / p.2, y.near[k] / p.2));
        }
        sup
    }

    fn derivatives(&self, f: &PiecewiseMap, g: &Derivator, tol: f64) -> Result<Vec<f64>> {
        self.positions.iter().map(|&t| derivative_value(f, g, t, tol)).collect()
    }
}

struct Sampled {
    nodes: Vec<f64>,
    /// (increment, noise floor).
    probes: Vec<(f64, f64)>,
    near: Vec<f64>,
}

fn sup_gap(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// The three summands of `d(f, h)` and their sum.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MetricReport {
    pub sup_norm_gap: f64,
    pub deriv_gap: f64,
    pub gamma: f64,
    pub d: f64,
}

impl MetricReport {
    fn new(sup_norm_gap: f64, deriv_gap: f64, gamma: f64) -> Self {
        MetricReport { sup_norm_gap, deriv_gap, gamma, d: sup_norm_gap + deriv_gap + gamma }
    }
}

/// Sampled lower bound for `Γ(f, h)`.
pub fn gamma(f: &PiecewiseMap, h: &PiecewiseMap, g: &Derivator, grid: &PairGrid) -> Result<f64> {
    let set = PairSet::build(g, &[f, h], grid)?;
    Ok(set.gamma(&set.sample(f), &set.sample(h)))
}

/// Sampled `d(f, h)`.
pub fn bd1_distance(f: &PiecewiseMap, h: &PiecewiseMap, g: &Derivator, grid: &PairGrid) -> Result<MetricReport> {
    let set = PairSet::build(g, &[f, h], grid)?;
    let (sf, sh) = (set.sample(f), set.sample(h));
    let (df, dh) = (set.derivatives(f, g, gdiff::DEFAULT_TOL)?, set.derivatives(h, g, gdiff::DEFAULT_TOL)?);
    Ok(MetricReport::new(sup_gap(&sf.nodes, &sh.nodes), sup_gap(&df, &dh), set.gamma(&sf, &sh)))
}

/// Pairwise reports on one shared sample set.
fn pairwise(fs: &[&PiecewiseMap], g: &Derivator, grid: &PairGrid) -> Result<Vec<Vec<MetricReport>>> {
    let set = PairSet::build(g, fs, grid)?;
    let samples: Vec<Sampled> = fs.iter().map(|f| set.sample(f)).collect();
    let derivs = fs.iter().map(|f| set.derivatives(f, g, gdiff::DEFAULT_TOL)).collect::<Result<Vec<_>>>()?;
    let n = fs.len();
    let mut out = vec![vec![MetricReport::new(0.0, 0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[i][j] = MetricReport::new(
                    sup_gap(&samples[i].nodes, &samples[j].nodes),
                    sup_gap(&derivs[i], &derivs[j]),
                    set.gamma(&samples[i], &samples[j]),
                );
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AxiomsReport {
    pub symmetric: bool,
    pub triangle_slack: f64,
    pub identity_ok: bool,
    pub holds: bool,
}

/// Symmetry (exact), triangle inequality (1e-12 slack) and `d = 0 ⇒ sup gap = 0`
/// for three functions on a shared sample set.
pub fn metric_axioms_check(fs: [&PiecewiseMap; 3], g: &Derivator, grid: &PairGrid) -> Result<AxiomsReport> {
    let m = pairwise(&fs, g, grid)?;
    let mut symmetric = true;
    let mut identity_ok = true;
    let mut slack = f64::NEG_INFINITY;
    for i in 0..3 {
        identity_ok &= m[i][i].d == 0.0;
        for j in 0..3 {
            let (x, y) = (m[i][j], m[j][i]);
            symmetric &= x.d == y.d && x.gamma == y.gamma && x.sup_norm_gap == y.sup_norm_gap;
            if x.d == 0.0 {
                identity_ok &= x.sup_norm_gap == 0.0;
            }
            for k in 0..3 {
                slack = slack.max(m[i][k].d - m[i][j].d - m[j][k].d);
            }
        }
    }
    let holds = symmetric && identity_ok && slack <= 1e-12;
    Ok(AxiomsReport { symmetric, triangle_slack: slack, identity_ok, holds })
}

#[derive(Clone, Debug, Serialize)]
pub struct CauchyReport {
    pub distances: Vec<Vec<f64>>,
    pub sup_gaps: Vec<Vec<f64>>,
    pub gammas: Vec<Vec<f64>>,
    /// Largest d between members of the second half of the prefix.
    pub tail_max: f64,
    /// `(eps, tail_max <= eps)` for each requested eps.
    pub cauchy_at: Vec<(f64, bool)>,
}

/// Pairwise `d(f_n, f_m)` over a finite prefix and an eps-Cauchy flag on its tail half.
pub fn cauchy_probe(seq: &[PiecewiseMap], g: &Derivator, eps: &[f64], grid: &PairGrid) -> Result<CauchyReport> {
    let refs: Vec<&PiecewiseMap> = seq.iter().collect();
    let m = pairwise(&refs, g, grid)?;
    let pick = |f: fn(&MetricReport) -> f64| m.iter().map(|row| row.iter().map(f).collect()).collect();
    let distances: Vec<Vec<f64>> = pick(|r| r.d);
    let start = seq.len() / 2;
    let mut tail_max = 0.0f64;
    for i in start..seq.len() {
        for j in start..seq.len() {
            tail_max = tail_max.max(distances[i][j]);
        }
    }
    Ok(CauchyReport {
        sup_gaps: pick(|r| r.sup_norm_gap),
        gammas: pick(|r| r.gamma),
        distances,
        tail_max,
        cauchy_at: eps.iter().map(|&e| (e, tail_max <= e)).collect(),
    })
}
