//! Segment expressions: finite sums of polynomial-times-exponential terms,
//! closed under the operations the calculus needs, plus opaque callables.

use std::fmt;
use std::sync::Arc;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied real function with an optional derivative.
#[derive(Clone)]
pub struct Custom {
    pub label: String,
    pub f: RealFn,
    pub df: Option<RealFn>,
}

impl Custom {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Custom { label: label.into(), f: Arc::new(f), df: None }
    }

    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Custom({})", self.label)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Term {
    rate: f64,
    /// Ascending polynomial coefficients.
    coeffs: Vec<f64>,
}

/// `sum_i p_i(t) * exp(r_i * t)` with distinct rates.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ExpPoly {
    terms: Vec<Term>,
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.last() == Some(&0.0) {
        c.pop();
    }
    c
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly::default()
    }

    pub fn constant(c: f64) -> Self {
        ExpPoly::poly(vec![c])
    }

    pub fn poly(coeffs: Vec<f64>) -> Self {
        ExpPoly::term(0.0, coeffs)
    }

    pub fn exp(scale: f64, rate: f64) -> Self {
        ExpPoly::term(rate, vec![scale])
    }

    pub fn term(rate: f64, coeffs: Vec<f64>) -> Self {
        let coeffs = trim(coeffs);
        if coeffs.is_empty() {
            return ExpPoly::zero();
        }
        ExpPoly { terms: vec![Term { rate, coeffs }] }
    }

    /// `(rate, ascending coefficients)` for each term, sorted by rate.
    pub fn terms(&self) -> Vec<(f64, Vec<f64>)> {
        self.terms.iter().map(|t| (t.rate, t.coeffs.clone())).collect()
    }

    pub fn from_term_list(terms: Vec<(f64, Vec<f64>)>) -> Self {
        ExpPoly::from_terms(terms.into_iter().map(|(rate, coeffs)| Term { rate, coeffs }).collect())
    }

    fn from_terms(mut terms: Vec<Term>) -> Self {
        terms.sort_by(|x, y| x.rate.total_cmp(&y.rate));
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.rate == t.rate => last.coeffs = poly_add(&last.coeffs, &t.coeffs),
                _ => merged.push(t),
            }
        }
        let terms = merged
            .into_iter()
            .map(|t| Term { rate: t.rate, coeffs: trim(t.coeffs) })
            .filter(|t| !t.coeffs.is_empty())
            .collect();
        ExpPoly { terms }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let p = horner(&term.coeffs, t);
                if term.rate == 0.0 {
                    p
                } else {
                    p * (term.rate * t).exp()
                }
            })
            .sum()
    }

    pub fn add(&self, other: &ExpPoly) -> ExpPoly {
        ExpPoly::from_terms(self.terms.iter().chain(other.terms.iter()).cloned().collect())
    }

    pub fn scale(&self, c: f64) -> ExpPoly {
        ExpPoly::from_terms(
            self.terms
                .iter()
                .map(|t| Term { rate: t.rate, coeffs: t.coeffs.iter().map(|x| x * c).collect() })
                .collect(),
        )
    }

    pub fn mul(&self, other: &ExpPoly) -> ExpPoly {
        let mut out = Vec::new();
        for x in &self.terms {
            for y in &other.terms {
                out.push(Term { rate: x.rate + y.rate, coeffs: poly_mul(&x.coeffs, &y.coeffs) });
            }
        }
        ExpPoly::from_terms(out)
    }

    pub fn derivative(&self) -> ExpPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let dp: Vec<f64> = t.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
                let rp: Vec<f64> = t.coeffs.iter().map(|c| c * t.rate).collect();
                Term { rate: t.rate, coeffs: poly_add(&dp, &rp) }
            })
            .collect();
        ExpPoly::from_terms(terms)
    }

    /// An antiderivative (no constant term is fixed beyond what the algebra yields).
    pub fn antiderivative(&self) -> ExpPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let p = &t.coeffs;
                if t.rate == 0.0 {
                    let mut q = vec![0.0];
                    q.extend(p.iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0)));
                    Term { rate: 0.0, coeffs: q }
                } else {
                    // q' + r q = p, solved from the top coefficient down.
                    let n = p.len();
                    let mut q = vec![0.0; n];
                    for k in (0..n).rev() {
                        let carry = if k + 1 < n { (k as f64 + 1.0) * q[k + 1] } else { 0.0 };
                        q[k] = (p[k] - carry) / t.rate;
                    }
                    Term { rate: t.rate, coeffs: q }
                }
            })
            .collect();
        ExpPoly::from_terms(terms)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [t] if t.rate == 0.0 && t.coeffs.len() == 1 => Some(t.coeffs[0]),
            _ => None,
        }
    }

    /// Exact reciprocal when the expression is a single `c * exp(r t)`.
    pub fn recip(&self) -> Option<ExpPoly> {
        match self.terms.as_slice() {
            [t] if t.coeffs.len() == 1 && t.coeffs[0] != 0.0 => Some(ExpPoly::exp(1.0 / t.coeffs[0], -t.rate)),
            _ => None,
        }
    }

    /// `exp(self)` when `self` is affine in `t`.
    pub fn exp_of(&self) -> Option<ExpPoly> {
        match self.terms.as_slice() {
            [] => Some(ExpPoly::constant(1.0)),
            [t] if t.rate == 0.0 && t.coeffs.len() <= 2 => {
                let c0 = t.coeffs[0];
                let c1 = t.coeffs.get(1).copied().unwrap_or(0.0);
                Some(ExpPoly::exp(c0.exp(), c1))
            }
            _ => None,
        }
    }
}

/// Expression valid on one closed segment of a piecewise object.
#[derive(Clone)]
pub enum Expr {
    ExpPoly(ExpPoly),
    Exp(Box<Expr>),
    Recip(Box<Expr>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Custom(Custom),
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::ExpPoly(p) => write!(f, "{p:?}"),
            Expr::Exp(e) => write!(f, "exp({e:?})"),
            Expr::Recip(e) => write!(f, "1/({e:?})"),
            Expr::Sum(v) => write!(f, "Sum{v:?}"),
            Expr::Product(v) => write!(f, "Product{v:?}"),
            Expr::Custom(c) => write!(f, "{c:?}"),
        }
    }
}

impl From<ExpPoly> for Expr {
    fn from(p: ExpPoly) -> Self {
        Expr::ExpPoly(p)
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::ExpPoly(ExpPoly::constant(c))
    }

    pub fn affine(slope: f64, intercept: f64) -> Expr {
        Expr::ExpPoly(ExpPoly::poly(vec![intercept, slope]))
    }

    pub fn custom(c: Custom) -> Expr {
        Expr::Custom(c)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::ExpPoly(p) => p.eval(t),
            Expr::Exp(e) => e.eval(t).exp(),
            Expr::Recip(e) => 1.0 / e.eval(t),
            Expr::Sum(v) => v.iter().map(|e| e.eval(t)).sum(),
            Expr::Product(v) => v.iter().map(|e| e.eval(t)).product(),
            Expr::Custom(c) => (c.f)(t),
        }
    }

    pub fn as_exppoly(&self) -> Option<&ExpPoly> {
        match self {
            Expr::ExpPoly(p) => Some(p),
            _ => None,
        }
    }

    /// Some(c) when the expression is known to be the constant c.
    pub fn as_constant(&self) -> Option<f64> {
        self.as_exppoly().and_then(ExpPoly::as_constant)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        match (self, other) {
            (Expr::ExpPoly(x), Expr::ExpPoly(y)) => Expr::ExpPoly(x.add(y)),
            _ if self.as_constant() == Some(0.0) => other.clone(),
            _ if other.as_constant() == Some(0.0) => self.clone(),
            _ => Expr::Sum(vec![self.clone(), other.clone()]),
        }
    }

    pub fn scale(&self, c: f64) -> Expr {
        match self {
            Expr::ExpPoly(p) => Expr::ExpPoly(p.scale(c)),
            _ if c == 1.0 => self.clone(),
            _ if c == 0.0 => Expr::constant(0.0),
            _ => Expr::Product(vec![Expr::constant(c), self.clone()]),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        match (self, other) {
            (Expr::ExpPoly(x), Expr::ExpPoly(y)) => Expr::ExpPoly(x.mul(y)),
            _ => match (self.as_constant(), other.as_constant()) {
                (Some(c), _) => other.scale(c),
                (_, Some(c)) => self.scale(c),
                _ => Expr::Product(vec![self.clone(), other.clone()]),
            },
        }
    }

    pub fn recip(&self) -> Expr {
        match self {
            Expr::ExpPoly(p) => match p.recip() {
                Some(r) => Expr::ExpPoly(r),
                None => Expr::Recip(Box::new(self.clone())),
            },
            Expr::Exp(inner) => Expr::exp(&inner.scale(-1.0)),
            Expr::Recip(inner) => (**inner).clone(),
            _ => Expr::Recip(Box::new(self.clone())),
        }
    }

    pub fn exp(inner: &Expr) -> Expr {
        match inner.as_exppoly().and_then(ExpPoly::exp_of) {
            Some(p) => Expr::ExpPoly(p),
            None => Expr::Exp(Box::new(inner.clone())),
        }
    }

    /// `h(self(t))` with derivative `dh(self(t)) * self'(t)` when both are known.
    pub fn compose(&self, h: &ScalarFn) -> Expr {
        let inner = self.clone();
        let outer = h.f.clone();
        let f = move |t: f64| outer(inner.eval(t));
        let df = match (self.derivative(), h.df.clone()) {
            (Some(d), Some(dh)) => {
                let inner = self.clone();
                Some(Arc::new(move |t: f64| dh(inner.eval(t)) * d.eval(t)) as RealFn)
            }
            _ => None,
        };
        Expr::Custom(Custom { label: format!("{}∘…", h.label), f: Arc::new(f), df })
    }

    pub fn derivative(&self) -> Option<Expr> {
        match self {
            Expr::ExpPoly(p) => Some(Expr::ExpPoly(p.derivative())),
            Expr::Exp(e) => Some(e.derivative()?.mul(self)),
            Expr::Recip(e) => {
                let d = e.derivative()?;
                let r = self.clone();
                Some(d.scale(-1.0).mul(&r).mul(&r))
            }
            Expr::Sum(v) => {
                let mut acc = Expr::constant(0.0);
                for e in v {
                    acc = acc.add(&e.derivative()?);
                }
                Some(acc)
            }
            Expr::Product(v) => {
                let mut acc = Expr::constant(0.0);
                for i in 0..v.len() {
                    let mut term = v[i].derivative()?;
                    for (j, e) in v.iter().enumerate() {
                        if j != i {
                            term = term.mul(e);
                        }
                    }
                    acc = acc.add(&term);
                }
                Some(acc)
            }
            Expr::Custom(c) => c.df.as_ref().map(|df| {
                Expr::Custom(Custom { label: format!("d({})", c.label), f: df.clone(), df: None })
            }),
        }
    }

    /// Closed-form antiderivative, available for exponential polynomials only.
    pub fn antiderivative(&self) -> Option<Expr> {
        self.as_exppoly().map(|p| Expr::ExpPoly(p.antiderivative()))
    }
}

/// A scalar function `h: R -> R` with its derivative, used by the chain rule.
#[derive(Clone)]
pub struct ScalarFn {
    pub label: String,
    pub f: RealFn,
    pub df: Option<RealFn>,
}

impl ScalarFn {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFn { label: label.into(), f: Arc::new(f), df: Some(Arc::new(df)) }
    }

    pub fn square() -> Self {
        ScalarFn::new("square", |y| y * y, |y| 2.0 * y)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}
