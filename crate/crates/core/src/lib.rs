//! Calculus with respect to a left-continuous non-decreasing derivator:
//! the Stieltjes measure and derivative, the g-exponential, the kernel of the
//! derivative, mean value inequalities and the difference-quotient metric.

pub mod cantor;
pub mod derivator;
pub mod error;
pub mod expr;
pub mod families;
pub mod fixtures;
pub mod gdiff;
pub mod gexp;
pub mod json;
pub mod kernel;
pub mod measure;
pub mod metric;
pub mod piecewise;
pub mod quad;
pub mod suite;

pub use derivator::{Derivator, PointClass, PointClassification, SegmentForm};
pub use error::{Error, Result};
pub use expr::{Custom, ExpPoly, Expr, ScalarFn};
pub use piecewise::PiecewiseMap;
