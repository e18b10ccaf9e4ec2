//! Cantor staircase iterates, the finite-depth Cantor derivator and
//! Cantor-set membership, with exact triadic bookkeeping.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::derivator::{DeclaredLimit, Derivator, SegmentForm};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::piecewise::PiecewiseMap;

/// Largest depth accepted by the float-facing constructors (3^depth must fit in u64
/// and 2^depth intervals must be enumerable).
pub const MAX_DEPTH: u32 = 24;

/// Exact point `num / 3^pow`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triadic {
    pub num: u64,
    pub pow: u32,
}

impl Triadic {
    pub fn new(num: u64, pow: u32) -> Self {
        Triadic { num, pow }
    }

    /// Correctly rounded float value; equal rationals map to identical floats.
    pub fn to_f64(self) -> f64 {
        self.num as f64 / 3f64.powi(self.pow as i32)
    }
}

/// Indices `j` of the `2^depth` closed intervals `[j/3^depth, (j+1)/3^depth]` making up E_depth,
/// in increasing order.
pub fn e_indices(depth: u32) -> Vec<u64> {
    let n = 1u64 << depth;
    (0..n)
        .map(|i| {
            let mut j = 0u64;
            for k in 0..depth {
                let bit = (i >> (depth - 1 - k)) & 1;
                j = j * 3 + 2 * bit;
            }
            j
        })
        .collect()
}

/// Closed pieces of E_depth as triadic pairs.
pub fn e_pieces(depth: u32) -> Vec<(Triadic, Triadic)> {
    e_indices(depth)
        .into_iter()
        .map(|j| (Triadic::new(j, depth), Triadic::new(j + 1, depth)))
        .collect()
}

fn check_depth(depth: u32) -> Result<()> {
    if depth > MAX_DEPTH {
        return Err(Error::InvalidInput(format!("Cantor depth {depth} exceeds {MAX_DEPTH}")));
    }
    Ok(())
}

/// Exact non-negative rational `p / q`.
#[derive(Clone, Debug)]
struct Ratio {
    p: BigUint,
    q: BigUint,
}

fn exact_value(x: f64) -> Ratio {
    // Prefer a short triadic reading so that fl(j/3^n) is treated as j/3^n.
    for pow in 0..=30u32 {
        let scale = 3f64.powi(pow as i32);
        let j = (x * scale).round();
        if j >= 0.0 && j / scale == x {
            return Ratio { p: BigUint::from(j as u64), q: BigUint::from(3u64).pow(pow) };
        }
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    if e >= 0 {
        Ratio { p: BigUint::from(mant) << (e as usize), q: BigUint::one() }
    } else {
        Ratio { p: BigUint::from(mant), q: BigUint::one() << ((-e) as usize) }
    }
}

/// floor(x * 3^depth) and whether x * 3^depth is an integer.
fn scaled_floor(r: &Ratio, depth: u32) -> (BigUint, bool) {
    let num = &r.p * BigUint::from(3u64).pow(depth);
    let (j, rem) = num.div_rem(&r.q);
    (j, rem.is_zero())
}

fn no_ones(mut j: BigUint, depth: u32) -> bool {
    let three = BigUint::from(3u64);
    for _ in 0..depth {
        let (q, d) = j.div_rem(&three);
        if d.is_one() {
            return false;
        }
        j = q;
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct CantorMembership {
    pub in_c: bool,
    pub in_c_hat: bool,
}

/// Membership of `x` in E_depth and in the half-open variant Ê_depth.
pub fn cantor_membership(x: f64, depth: u32) -> Result<CantorMembership> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { t: x, lo: 0.0, hi: 1.0 });
    }
    let r = exact_value(x);
    let (j, exact) = scaled_floor(&r, depth);
    let in_c = if exact {
        let top = BigUint::from(3u64).pow(depth);
        (j < top && no_ones(j.clone(), depth)) || (!j.is_zero() && no_ones(&j - 1u32, depth))
    } else {
        no_ones(j.clone(), depth)
    };
    let in_c_hat = if r.p.is_zero() {
        true
    } else if exact {
        no_ones(&j - 1u32, depth)
    } else {
        no_ones(j, depth)
    };
    Ok(CantorMembership { in_c, in_c_hat })
}

/// F_depth(x) for the staircase recurrence seeded with F_0 = 1, as (numerator, 2^depth).
fn staircase_exact(x: f64, depth: u32) -> (u64, u64) {
    let den = 1u64 << depth;
    if x >= 1.0 {
        return (den, den);
    }
    let r = exact_value(x);
    let (j, _) = scaled_floor(&r, depth);
    let mut j = j.to_u64().unwrap_or(u64::MAX);
    let mut digits = vec![0u8; depth as usize];
    for k in (0..depth as usize).rev() {
        digits[k] = (j % 3) as u8;
        j /= 3;
    }
    let mut acc = 0u64;
    let mut scale = den;
    for d in digits {
        match d {
            0 => scale /= 2,
            1 => return (acc + scale / 2, den),
            _ => {
                acc += scale / 2;
                scale /= 2;
            }
        }
    }
    (acc + scale, den)
}

/// The staircase iterate F_depth(x), seed F_0 = 1.
pub fn cantor_g(x: f64, depth: u32) -> Result<f64> {
    check_depth(depth)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { t: x, lo: 0.0, hi: 1.0 });
    }
    let (n, d) = staircase_exact(x, depth);
    Ok(n as f64 / d as f64)
}

/// F_depth as a right-continuous step map on [0,1].
pub fn cantor_iterate(depth: u32) -> Result<PiecewiseMap> {
    check_depth(depth)?;
    let js = e_indices(depth);
    let den = (1u64 << depth) as f64;
    let mut bps = vec![0.0];
    let mut segs = Vec::new();
    let mut vals = vec![1.0 / den];
    for (i, &j) in js.iter().enumerate().skip(1) {
        let x = Triadic::new(j, depth).to_f64();
        segs.push(Expr::constant(i as f64 / den));
        bps.push(x);
        vals.push((i + 1) as f64 / den);
    }
    segs.push(Expr::constant(1.0));
    bps.push(1.0);
    vals.push(1.0);
    let rights = vals.clone();
    PiecewiseMap::with_values(bps, segs, vals, rights)
}

/// Breakpoints and forms of the continuous approximant (seed F_0(x) = x) on [0,1],
/// rising from `from` to `to`.
pub(crate) fn approximant_pieces(depth: u32, lo: f64, hi: f64, from: f64, to: f64) -> (Vec<f64>, Vec<Piece>) {
    let js = e_indices(depth);
    let den = (1u64 << depth) as f64;
    let at = |num: u64| lo + (hi - lo) * Triadic::new(num, depth).to_f64();
    let level = |i: usize| from + (to - from) * (i as f64 / den);
    let mut bps = vec![lo];
    let mut pieces = Vec::new();
    for (i, &j) in js.iter().enumerate() {
        let x0 = *bps.last().unwrap();
        let x1 = if j + 1 == 3u64.pow(depth) { hi } else { at(j + 1) };
        pieces.push(Piece::Rise { x0, y0: level(i), x1, y1: level(i + 1) });
        bps.push(x1);
        if let Some(&next) = js.get(i + 1) {
            pieces.push(Piece::Flat(level(i + 1)));
            bps.push(at(next));
        }
    }
    (bps, pieces)
}

pub(crate) enum Piece {
    Rise { x0: f64, y0: f64, x1: f64, y1: f64 },
    Flat(f64),
}

/// The finite-depth Cantor derivator on [0,1], flagged as a stand-in for the
/// Cantor function itself.
pub fn cantor_derivator(depth: u32) -> Result<Derivator> {
    check_depth(depth)?;
    if depth == 0 {
        return Err(Error::InvalidInput("Cantor derivator needs depth >= 1".into()));
    }
    let g = Derivator::build(
        (0.0, 1.0),
        vec![0.0, 1.0],
        vec![SegmentForm::CantorIterate { depth, from: 0.0, to: 1.0 }],
        Vec::new(),
    )?;
    Ok(g.with_declared_limit(Some(DeclaredLimit::CantorFunction)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staircase_matches_plotted_plateaus() {
        let expected = [
            (0.0, 1.0 / 8.0),
            (1.0 / 27.0, 1.0 / 8.0),
            (2.0 / 27.0, 2.0 / 8.0),
            (0.2, 2.0 / 8.0),
            (2.0 / 9.0, 3.0 / 8.0),
            (8.0 / 27.0, 4.0 / 8.0),
            (0.5, 4.0 / 8.0),
            (2.0 / 3.0, 5.0 / 8.0),
            (20.0 / 27.0, 6.0 / 8.0),
            (8.0 / 9.0, 7.0 / 8.0),
            (26.0 / 27.0, 1.0),
            (1.0, 1.0),
        ];
        for (x, v) in expected {
            assert_eq!(cantor_g(x, 3).unwrap(), v, "x = {x}");
        }
    }

    #[test]
    fn seed_and_endpoints() {
        for n in 1..8 {
            assert_eq!(cantor_g(0.5, n).unwrap(), 0.5);
            assert_eq!(cantor_g(1.0, n).unwrap(), 1.0);
            assert_eq!(cantor_g(0.0, n).unwrap(), 0.5f64.powi(n as i32));
        }
        assert_eq!(cantor_g(0.3, 0).unwrap(), 1.0);
    }

    #[test]
    fn membership_examples() {
        for n in [1, 5, 12, 20] {
            assert!(cantor_membership(0.25, n).unwrap().in_c);
        }
        assert!(!cantor_membership(0.5, 1).unwrap().in_c);
        let third = cantor_membership(1.0 / 3.0, 1).unwrap();
        assert!(third.in_c && third.in_c_hat);
        let two_thirds = cantor_membership(2.0 / 3.0, 1).unwrap();
        assert!(two_thirds.in_c && !two_thirds.in_c_hat);
        assert!(cantor_membership(0.0, 6).unwrap().in_c_hat);
        assert!(cantor_membership(1.0, 6).unwrap().in_c_hat);
    }

    #[test]
    fn e_pieces_are_increasing_and_counted() {
        let p = e_pieces(4);
        assert_eq!(p.len(), 16);
        assert!(p.windows(2).all(|w| w[0].1.num < w[1].0.num));
        assert_eq!(p.last().unwrap().1.num, 81);
    }

    #[test]
    fn iterate_map_agrees_with_pointwise_evaluation() {
        let f = cantor_iterate(4).unwrap();
        for j in 0..=243u64 {
            let x = Triadic::new(j, 5).to_f64();
            assert_eq!(f.at(x), cantor_g(x, 4).unwrap(), "x = {j}/243");
        }
    }
}
