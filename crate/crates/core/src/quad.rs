//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integral of `f` over `[a, b]` and an error estimate.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if !(a < b) {
        return (0.0, 0.0);
    }
    let mut stack = vec![(a, b, 0u32)];
    let (mut total, mut err) = (0.0, 0.0);
    let min_width = (b - a) * 1e-12;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi);
        let local_tol = tol * (hi - lo) / (b - a);
        if e <= local_tol.max(1e-15 * v.abs()) || depth >= 40 || hi - lo <= min_width {
            total += v;
            err += e;
        } else {
            let m = 0.5 * (lo + hi);
            stack.push((m, hi, depth + 1));
            stack.push((lo, m, depth + 1));
        }
    }
    (total, err)
}

/// Riemann–Stieltjes integral of `f` against an increasing `g` on `[a, b]`,
/// by adaptive refinement of the midpoint sum.
pub fn integrate_stieltjes(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    fn rec(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, a: f64, b: f64, coarse: f64, tol: f64, depth: u32) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let left = f(0.5 * (a + m)) * (g(m) - g(a));
        let right = f(0.5 * (m + b)) * (g(b) - g(m));
        let fine = left + right;
        let e = (fine - coarse).abs() / 3.0;
        if e <= tol || depth >= 40 {
            return (fine + (fine - coarse) / 3.0, e);
        }
        let (l, el) = rec(f, g, a, m, left, tol / 2.0, depth + 1);
        let (r, er) = rec(f, g, m, b, right, tol / 2.0, depth + 1);
        (l + r, el + er)
    }
    if !(a < b) {
        return (0.0, 0.0);
    }
    let coarse = f(0.5 * (a + b)) * (g(b) - g(a));
    rec(f, g, a, b, coarse, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_integrals() {
        let (v, _) = integrate(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-13);
        let (v, _) = integrate(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn stieltjes_against_square() {
        let (v, _) = integrate_stieltjes(&|x: f64| x, &|x: f64| x * x, 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }
}
