//! Sampled field components and their CSV form (`x,value_re[,value_im]`).

use std::fmt::Debug;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{FracError, Result};
use crate::grid::{Grid, Grid1D};

/// Scalar values a field can carry: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const IS_COMPLEX: bool;
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// One field component sampled at every node of a grid, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample<T: Scalar = f64> {
    grid: Grid,
    values: Vec<T>,
}

pub type RealField = FieldSample<f64>;
pub type ComplexField = FieldSample<Complex64>;

impl<T: Scalar> FieldSample<T> {
    pub fn new(grid: impl Into<Grid>, values: Vec<T>) -> Result<Self> {
        let grid = grid.into();
        if values.len() != grid.len() {
            return Err(FracError::Structural(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite_value()) {
            return Err(FracError::Structural(format!("non-finite field value at node {j}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the nodes of a one-dimensional grid.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> T) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(grid: impl Into<Grid>) -> Self {
        let grid = grid.into();
        Self { values: vec![T::zero(); grid.len()], grid }
    }

    /// Used by operators whose outputs are finite by construction.
    pub(crate) fn from_parts(grid: Grid, values: Vec<T>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> FieldSample<U> {
        FieldSample { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_with<U: Scalar, V: Scalar>(
        &self,
        other: &FieldSample<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<FieldSample<V>> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(FieldSample {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Index-reversed copy (1D only): value at `x` moves to `a + b - x`.
    pub fn reversed(&self) -> Result<Self> {
        self.grid.as_1d()?;
        let mut values = self.values.clone();
        values.reverse();
        Ok(Self { grid: self.grid, values })
    }

    /// Largest modulus over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }

    /// Largest modulus over nodes not on the domain boundary.
    pub fn interior_max_abs(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(j, _)| !self.grid.is_boundary(*j))
            .fold(0.0, |m, (_, v)| m.max(v.modulus()))
    }

    /// Quadrature inner product `sum_j w_j f_j g_j` (bilinear, no conjugation).
    pub fn weighted_dot(&self, other: &Self) -> Result<T> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let w = self.grid.weights();
        let mut acc = T::zero();
        for ((&a, &b), &wj) in self.values.iter().zip(&other.values).zip(&w) {
            acc += a * b * wj;
        }
        Ok(acc)
    }

    /// Writes one node per line as `x,value_re[,value_im]` (`x,y,...` on 2D grids).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (j, v) in self.values.iter().enumerate() {
            let coords = self.grid.coords(j);
            let head = coords.iter().map(|c| format!("{c:.17e}")).collect::<Vec<_>>().join(",");
            if T::IS_COMPLEX {
                writeln!(out, "{head},{:.17e},{:.17e}", v.re(), v.im())?;
            } else {
                writeln!(out, "{head},{:.17e}", v.re())?;
            }
        }
        Ok(())
    }
}

impl FieldSample<f64> {
    pub fn to_complex(&self) -> ComplexField {
        self.map(Complex64::from_real)
    }
}

impl FieldSample<Complex64> {
    /// Reads a 1D CSV written by [`FieldSample::write_csv`]; lines starting with `#` are skipped.
    /// A missing imaginary column reads as zero. Node positions must match `grid`.
    pub fn read_csv<R: BufRead>(grid: Grid1D, input: R) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| FracError::Structural(format!("line {}: {e}", lineno + 1)))?;
            let (x, v) = match cols.as_slice() {
                [x, re] => (*x, Complex64::new(*re, 0.0)),
                [x, re, im] => (*x, Complex64::new(*re, *im)),
                _ => {
                    return Err(FracError::Structural(format!(
                        "line {}: expected 2 or 3 columns, got {}",
                        lineno + 1,
                        cols.len()
                    )))
                }
            };
            let j = values.len();
            if j >= grid.len() || (x - grid.node(j)).abs() > 1e-12 * (1.0 + x.abs()) {
                return Err(FracError::Structural(format!("line {}: node x = {x} does not match the grid", lineno + 1)));
            }
            values.push(v);
        }
        Self::new(grid, values)
    }
}

pub(crate) fn ensure_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(FracError::Structural("fields live on different grids".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(RealField::new(grid(4), vec![0.0; 4]).is_err());
        assert!(RealField::new(grid(4), vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(ComplexField::new(grid(2), vec![Complex64::new(0.0, f64::INFINITY); 3]).is_err());
    }

    #[test]
    fn zip_rejects_other_grid() {
        let f = RealField::zeros(grid(4));
        let g = RealField::zeros(grid(8));
        assert!(f.zip_with(&g, |a, b| a + b).is_err());
    }

    #[test]
    fn interior_norm_skips_ends() {
        let f = RealField::new(grid(4), vec![9.0, 1.0, -2.0, 1.0, 9.0]).unwrap();
        assert_eq!(f.max_abs(), 9.0);
        assert_eq!(f.interior_max_abs(), 2.0);
    }

    proptest! {
        #[test]
        fn csv_round_trip(n in 2usize..40, seed in proptest::collection::vec(-1e6f64..1e6, 82)) {
            let g = grid(n);
            let values: Vec<Complex64> = (0..=n).map(|j| Complex64::new(seed[2 * j], seed[2 * j + 1])).collect();
            let f = ComplexField::new(g, values).unwrap();
            let mut buf = Vec::new();
            f.write_csv(&mut buf).unwrap();
            let back = ComplexField::read_csv(g, buf.as_slice()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
