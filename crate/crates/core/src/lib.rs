//! Fractional partial derivatives, fractional variational calculus for
//! classical fields, and numerical Noether residual checks, with a
//! fractional Dirac field in one time dimension as a worked case.

pub mod cli;
pub mod densities;
pub mod dirac;
pub mod error;
pub mod field;
pub mod fracops;
pub mod grid;
pub mod numeric;
pub mod noether;
pub mod special;
pub mod variational;

pub use error::{FracError, Result};
pub use field::{ComplexField, FieldSample, RealField, Scalar};
pub use fracops::{FractionalOperator, FractionalOrder, OperatorKind, Scheme, Side};
pub use grid::{Grid, Grid1D, Grid2D};
pub use variational::{AdjointMode, FieldConfiguration, LagrangianDensity, PerturbationField, PointState};
