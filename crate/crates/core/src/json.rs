//! JSON specs for derivators and piecewise functions.
//!
//! ```json
//! { "domain": [0, 3], "breakpoints": [0, 1, 2, 3],
//!   "segments": [{"form": "affine", "slope": 1, "intercept": 0}, ...],
//!   "jumps": {"1": 1.0} }
//! ```
//! Function specs use the same layout with `point_values` and `right_limits` maps in
//! place of `jumps`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::derivator::{DeclaredLimit, Derivator, SegmentForm};
use crate::error::{Error, Result};
use crate::expr::{ExpPoly, Expr};
use crate::piecewise::PiecewiseMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum GSegment {
    Affine { slope: f64, intercept: f64 },
    Constant { level: f64 },
    Cantor {
        depth: u32,
        #[serde(default)]
        from: f64,
        #[serde(default = "one")]
        to: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitTag {
    CantorFunction,
    AccumulatingJumps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivatorSpec {
    pub domain: [f64; 2],
    pub breakpoints: Vec<f64>,
    pub segments: Vec<GSegment>,
    #[serde(default)]
    pub jumps: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_limit: Option<LimitTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_depth: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub rate: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FSegment {
    Affine { slope: f64, intercept: f64 },
    Constant { level: f64 },
    Poly { coeffs: Vec<f64> },
    Exp { scale: f64, rate: f64 },
    Exppoly { terms: Vec<Term> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub domain: [f64; 2],
    pub breakpoints: Vec<f64>,
    pub segments: Vec<FSegment>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub point_values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub right_limits: BTreeMap<String, f64>,
}

fn key(t: f64) -> String {
    format!("{t:?}")
}

fn parse_map(m: &BTreeMap<String, f64>) -> Result<Vec<(f64, f64)>> {
    m.iter()
        .map(|(k, &v)| {
            k.trim()
                .parse::<f64>()
                .map(|t| (t, v))
                .map_err(|_| Error::InvalidInput(format!("bad point key {k:?}")))
        })
        .collect()
}

fn check_domain(domain: [f64; 2], bps: &[f64]) -> Result<()> {
    if bps.first() != Some(&domain[0]) || bps.last() != Some(&domain[1]) {
        return Err(Error::InvalidInput("breakpoints must start and end at the domain ends".into()));
    }
    Ok(())
}

impl DerivatorSpec {
    pub fn build(&self) -> Result<Derivator> {
        check_domain(self.domain, &self.breakpoints)?;
        let forms = self
            .segments
            .iter()
            .map(|s| match *s {
                GSegment::Affine { slope, intercept } => SegmentForm::Affine { slope, intercept },
                GSegment::Constant { level } => SegmentForm::Constant { level },
                GSegment::Cantor { depth, from, to } => SegmentForm::CantorIterate { depth, from, to },
            })
            .collect();
        let limit = self.declared_limit.map(|l| match l {
            LimitTag::CantorFunction => DeclaredLimit::CantorFunction,
            LimitTag::AccumulatingJumps => DeclaredLimit::AccumulatingJumps,
        });
        Ok(Derivator::build((self.domain[0], self.domain[1]), self.breakpoints.clone(), forms, parse_map(&self.jumps)?)?
            .with_declared_limit(limit)
            .with_truncation_depth(self.truncation_depth))
    }

    pub fn from_derivator(g: &Derivator) -> Result<DerivatorSpec> {
        let specs = g.segment_specs();
        let mut breakpoints = vec![g.domain().0];
        let mut segments = Vec::with_capacity(specs.len());
        for s in specs {
            breakpoints.push(s.hi);
            segments.push(match &s.form {
                SegmentForm::Affine { slope, intercept } => GSegment::Affine { slope: *slope, intercept: *intercept },
                SegmentForm::Constant { level } => GSegment::Constant { level: *level },
                SegmentForm::CantorIterate { depth, from, to } => GSegment::Cantor { depth: *depth, from: *from, to: *to },
                SegmentForm::CustomMonotone { func, .. } => {
                    return Err(Error::InvalidInput(format!("custom segment {:?} has no JSON form", func.label)))
                }
            });
        }
        let (a, b) = g.domain();
        Ok(DerivatorSpec {
            domain: [a, b],
            breakpoints,
            segments,
            jumps: g.declared_jumps().iter().map(|&(t, d)| (key(t), d)).collect(),
            declared_limit: g.declared_limit().map(|l| match l {
                DeclaredLimit::CantorFunction => LimitTag::CantorFunction,
                DeclaredLimit::AccumulatingJumps => LimitTag::AccumulatingJumps,
            }),
            truncation_depth: g.truncation_depth(),
        })
    }
}

impl FunctionSpec {
    pub fn build(&self) -> Result<PiecewiseMap> {
        check_domain(self.domain, &self.breakpoints)?;
        let segs = self
            .segments
            .iter()
            .map(|s| match s {
                FSegment::Affine { slope, intercept } => Expr::affine(*slope, *intercept),
                FSegment::Constant { level } => Expr::constant(*level),
                FSegment::Poly { coeffs } => ExpPoly::poly(coeffs.clone()).into(),
                FSegment::Exp { scale, rate } => ExpPoly::exp(*scale, *rate).into(),
                FSegment::Exppoly { terms } => {
                    ExpPoly::from_term_list(terms.iter().map(|t| (t.rate, t.coeffs.clone())).collect()).into()
                }
            })
            .collect();
        PiecewiseMap::new(self.breakpoints.clone(), segs, &parse_map(&self.point_values)?, &parse_map(&self.right_limits)?)
    }

    /// Spec for a map whose segments are all exponential polynomials.
    pub fn from_map(f: &PiecewiseMap) -> Result<FunctionSpec> {
        let bps = f.breakpoints();
        let mut segments = Vec::with_capacity(f.segments().len());
        for e in f.segments() {
            let p = e
                .as_exppoly()
                .ok_or_else(|| Error::InvalidInput(format!("segment {e:?} has no JSON form")))?;
            let terms = p.terms();
            segments.push(match terms.as_slice() {
                [] => FSegment::Constant { level: 0.0 },
                [(r, c)] if *r == 0.0 && c.len() == 1 => FSegment::Constant { level: c[0] },
                [(r, c)] if *r == 0.0 && c.len() == 2 => FSegment::Affine { slope: c[1], intercept: c[0] },
                [(r, c)] if *r == 0.0 => FSegment::Poly { coeffs: c.clone() },
                [(r, c)] if c.len() == 1 => FSegment::Exp { scale: c[0], rate: *r },
                _ => FSegment::Exppoly { terms: terms.into_iter().map(|(rate, coeffs)| Term { rate, coeffs }).collect() },
            });
        }
        let (a, b) = f.domain();
        let mut spec = FunctionSpec {
            domain: [a, b],
            breakpoints: bps.to_vec(),
            segments,
            point_values: BTreeMap::new(),
            right_limits: BTreeMap::new(),
        };
        let plain = spec.build()?;
        for (i, &t) in bps.iter().enumerate() {
            if plain.point_values()[i] != f.point_values()[i] {
                spec.point_values.insert(key(t), f.point_values()[i]);
            }
            if i + 1 < bps.len() && plain.right_limits()[i] != f.right_limits()[i] {
                spec.right_limits.insert(key(t), f.right_limits()[i]);
            }
        }
        Ok(spec)
    }
}

pub fn parse_derivator(text: &str) -> Result<Derivator> {
    let spec: DerivatorSpec = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("derivator JSON: {e}")))?;
    spec.build()
}

pub fn parse_function(text: &str) -> Result<PiecewiseMap> {
    let spec: FunctionSpec = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("function JSON: {e}")))?;
    spec.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn derivator_text_format() {
        let text = r#"{"domain": [0, 3], "breakpoints": [0, 1, 2, 3],
            "segments": [{"form": "affine", "slope": 1, "intercept": 0},
                         {"form": "affine", "slope": 1, "intercept": 1},
                         {"form": "affine", "slope": 1, "intercept": 2}],
            "jumps": {"1": 1.0, "2.0": 1.0}}"#;
        let g = parse_derivator(text).unwrap();
        assert_eq!(g.jump_at(1.0), 1.0);
        assert_eq!(g.rl(2.0), 4.0);
        let c = parse_derivator(r#"{"domain": [0, 1], "breakpoints": [0, 1], "segments": [{"form": "cantor", "depth": 2}]}"#)
            .unwrap();
        assert_eq!(c.components().len(), 3);
        assert!(parse_derivator(r#"{"domain": [0, 1]}"#).is_err());
        assert!(parse_derivator(r#"{"domain": [0, 1], "breakpoints": [0, 1], "segments": [{"form": "affine", "slope": 1, "intercept": 0}], "jumps": {"x": 1}}"#).is_err());
    }

    #[test]
    fn specs_rebuild_the_same_objects() {
        let g = fixtures::example1_g(1.0, 0.5);
        let again = DerivatorSpec::from_derivator(&g).unwrap().build().unwrap();
        for k in 0..=30 {
            let t = k as f64 / 10.0;
            assert_eq!(g.at(t), again.at(t));
            assert_eq!(g.rl(t), again.rl(t));
        }
        let f = fixtures::example1_vtilde();
        let spec = FunctionSpec::from_map(&f).unwrap();
        assert_eq!(spec.point_values.len(), 2);
        let text = serde_json::to_string(&spec).unwrap();
        let back = parse_function(&text).unwrap();
        assert_eq!(back.point_values(), f.point_values());
        assert_eq!(back.right_limits(), f.right_limits());
    }
}
