//! Numerical laboratory for entangled ergodic averages of Dunford-Schwartz
//! operators on finite-dimensional function models of the circle and cyclic
//! grids.

pub mod config;
pub mod csvio;
pub mod entangle;
pub mod error;
pub mod function;
pub mod jdlg;
pub mod kahan;
pub mod limit;
pub mod linalg;
pub mod operator;
pub mod rng;
pub mod semigroup;
pub mod series;
pub mod volterra;

pub use error::{Error, Result};
pub use function::{Basis, FunctionVector, NormKind};
pub use operator::{Angle, DSReport, Operator, PowerPlan};
pub use series::{CesaroSeries, SeriesValue};
