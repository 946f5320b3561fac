//! Discrete left/right Riemann-Liouville and Caputo partial derivatives.
//!
//! Caputo operators use the L1 scheme, Riemann-Liouville operators the
//! Grünwald-Letnikov scheme. Right-sided operators are the index reflection of
//! the left-sided ones, which carries the `-1/Gamma(1 - alpha)` sign of the
//! right-sided definitions. Two-dimensional fields are differentiated one axis
//! at a time.

mod matrix;
mod weights;

use rayon::prelude::*;

use crate::error::{FracError, Result};
use crate::field::{ensure_same_grid, FieldSample, Scalar};
use crate::grid::{Grid, Grid1D};
use crate::special::gamma_fn;

pub use matrix::{operator_matrix, OperatorMatrix};
pub use weights::{gl_weights, l1_weights};

/// Lines at least this long are evaluated with rayon.
const PARALLEL_MIN_LEN: usize = 512;

/// Derivative order in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(FracError::Config(format!("fractional order must lie in (0, 1], got {alpha}")));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    RiemannLiouville,
    Caputo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    GrunwaldLetnikov,
    L1,
}

impl OperatorKind {
    /// The discretization used for this kind.
    pub fn scheme(self) -> Scheme {
        match self {
            OperatorKind::RiemannLiouville => Scheme::GrunwaldLetnikov,
            OperatorKind::Caputo => Scheme::L1,
        }
    }
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// A fully specified fractional operator along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOperator {
    pub kind: OperatorKind,
    pub side: Side,
    pub alpha: FractionalOrder,
}

impl FractionalOperator {
    pub fn new(kind: OperatorKind, side: Side, alpha: FractionalOrder) -> Self {
        Self { kind, side, alpha }
    }

    pub fn caputo(side: Side, alpha: FractionalOrder) -> Self {
        Self::new(OperatorKind::Caputo, side, alpha)
    }

    pub fn riemann_liouville(side: Side, alpha: FractionalOrder) -> Self {
        Self::new(OperatorKind::RiemannLiouville, side, alpha)
    }
}

/// Precomputed convolution weights for one operator on one axis grid.
#[derive(Debug, Clone)]
pub(crate) struct LineKernel {
    kind: OperatorKind,
    side: Side,
    /// L1 weights (Caputo) or GL weights already multiplied by `h^-alpha` (RL).
    weights: Vec<f64>,
    /// `h^-alpha / Gamma(2 - alpha)` for Caputo, unused for RL.
    scale: f64,
    len: usize,
}

impl LineKernel {
    pub(crate) fn new(op: FractionalOperator, grid: &Grid1D) -> Result<Self> {
        let len = grid.len();
        let a = op.alpha.value();
        let hpow = if op.alpha.is_classical() { 1.0 / grid.h() } else { grid.h().powf(-a) };
        let (weights, scale) = match op.kind {
            OperatorKind::Caputo => (l1_weights(op.alpha, len), hpow / gamma_fn(2.0 - a)?),
            OperatorKind::RiemannLiouville => {
                (gl_weights(op.alpha, len).into_iter().map(|g| g * hpow).collect(), 1.0)
            }
        };
        Ok(Self { kind: op.kind, side: op.side, weights, scale, len })
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Applies the operator to one line of samples.
    pub(crate) fn apply<T: Scalar>(&self, f: &[T]) -> Vec<T> {
        debug_assert_eq!(f.len(), self.len);
        match self.side {
            Side::Left => self.apply_left(f),
            Side::Right => {
                let rev: Vec<T> = f.iter().rev().copied().collect();
                let mut out = self.apply_left(&rev);
                out.reverse();
                out
            }
        }
    }

    fn apply_left<T: Scalar>(&self, f: &[T]) -> Vec<T> {
        let node = |j: usize| -> T {
            match self.kind {
                OperatorKind::Caputo => {
                    if j == 0 {
                        return T::zero();
                    }
                    let mut acc = T::zero();
                    for m in 0..j {
                        acc += (f[j - m] - f[j - m - 1]) * self.weights[m];
                    }
                    acc * self.scale
                }
                OperatorKind::RiemannLiouville => {
                    let mut acc = T::zero();
                    for (i, &fi) in f.iter().enumerate().take(j + 1) {
                        acc += fi * self.weights[j - i];
                    }
                    acc
                }
            }
        };
        if f.len() >= PARALLEL_MIN_LEN {
            (0..f.len()).into_par_iter().map(node).collect()
        } else {
            (0..f.len()).map(node).collect()
        }
    }

    /// Matrix entry `(i, j)` of the operator on this line.
    pub(crate) fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.len - 1;
        let (i, j) = match self.side {
            Side::Left => (i, j),
            Side::Right => (n - i, n - j),
        };
        if j > i {
            return 0.0;
        }
        match self.kind {
            OperatorKind::RiemannLiouville => self.weights[i - j],
            OperatorKind::Caputo => {
                if i == 0 {
                    return 0.0;
                }
                // Coefficient of f_j in sum_m w_m (f_{i-m} - f_{i-m-1}).
                let plus = if j >= 1 { self.weights[i - j] } else { 0.0 };
                let minus = if j < i { self.weights[i - j - 1] } else { 0.0 };
                self.scale * (plus - minus)
            }
        }
    }

    /// Quadrature-weighted transpose `W^-1 M^T W` applied to one line.
    pub(crate) fn apply_weighted_transpose<T: Scalar>(&self, f: &[T], w: &[f64]) -> Vec<T> {
        let n = self.len;
        let wf: Vec<T> = f.iter().zip(w).map(|(&v, &wi)| v * wi).collect();
        let node = |j: usize| -> T {
            let mut acc = T::zero();
            let range = match self.side {
                Side::Left => j..n,
                Side::Right => 0..j + 1,
            };
            for i in range {
                let e = self.entry(i, j);
                if e != 0.0 {
                    acc += wf[i] * e;
                }
            }
            acc * (1.0 / w[j])
        };
        if n >= PARALLEL_MIN_LEN {
            (0..n).into_par_iter().map(node).collect()
        } else {
            (0..n).map(node).collect()
        }
    }
}

fn map_lines<T: Scalar>(
    f: &FieldSample<T>,
    axis: usize,
    mut line_op: impl FnMut(&[T]) -> Vec<T>,
) -> Result<FieldSample<T>> {
    let grid = *f.grid();
    let len = grid.axis(axis)?.len();
    let mut out = vec![T::zero(); f.len()];
    let mut buf = Vec::with_capacity(len);
    for (start, stride) in grid.lines(axis)? {
        buf.clear();
        buf.extend((0..len).map(|t| f.values()[start + t * stride]));
        for (t, v) in line_op(&buf).into_iter().enumerate() {
            out[start + t * stride] = v;
        }
    }
    Ok(FieldSample::from_parts(grid, out))
}

/// Applies `op` along `axis` of `f`.
pub fn apply_partial<T: Scalar>(f: &FieldSample<T>, axis: usize, op: FractionalOperator) -> Result<FieldSample<T>> {
    let kernel = LineKernel::new(op, f.grid().axis(axis)?)?;
    map_lines(f, axis, |line| kernel.apply(line))
}

/// Exact discrete adjoint of `op` along `axis` under the trapezoid inner product:
/// `<g, op f>_w = <adjoint_partial(g), f>_w` for all `f`, `g`.
pub fn adjoint_partial<T: Scalar>(f: &FieldSample<T>, axis: usize, op: FractionalOperator) -> Result<FieldSample<T>> {
    let g1 = f.grid().axis(axis)?;
    let kernel = LineKernel::new(op, g1)?;
    let w = g1.weights();
    map_lines(f, axis, |line| kernel.apply_weighted_transpose(line, &w))
}

fn apply_1d<T: Scalar>(f: &FieldSample<T>, op: FractionalOperator) -> Result<FieldSample<T>> {
    f.grid().as_1d()?;
    apply_partial(f, 0, op)
}

/// Left Caputo derivative, L1 scheme. The first node is 0 (empty sum).
pub fn caputo_left<T: Scalar>(f: &FieldSample<T>, alpha: FractionalOrder) -> Result<FieldSample<T>> {
    apply_1d(f, FractionalOperator::caputo(Side::Left, alpha))
}

/// Right Caputo derivative: reflection of [`caputo_left`].
pub fn caputo_right<T: Scalar>(f: &FieldSample<T>, alpha: FractionalOrder) -> Result<FieldSample<T>> {
    apply_1d(f, FractionalOperator::caputo(Side::Right, alpha))
}

/// Left Riemann-Liouville derivative, Grünwald-Letnikov scheme.
pub fn rl_left<T: Scalar>(f: &FieldSample<T>, alpha: FractionalOrder) -> Result<FieldSample<T>> {
    apply_1d(f, FractionalOperator::riemann_liouville(Side::Left, alpha))
}

/// Right Riemann-Liouville derivative: reflection of [`rl_left`].
pub fn rl_right<T: Scalar>(f: &FieldSample<T>, alpha: FractionalOrder) -> Result<FieldSample<T>> {
    apply_1d(f, FractionalOperator::riemann_liouville(Side::Right, alpha))
}

/// `|<g, caputo_left f>_w - <f, rl_right g>_w|`, the discrete defect of the
/// fractional integration-by-parts identity. Requires `f(a) = 0`.
pub fn adjoint_defect<T: Scalar>(
    alpha: FractionalOrder,
    grid: &Grid1D,
    f: &FieldSample<T>,
    g: &FieldSample<T>,
) -> Result<f64> {
    let grid = Grid::One(*grid);
    ensure_same_grid(&grid, f.grid())?;
    ensure_same_grid(&grid, g.grid())?;
    if f.values()[0] != T::zero() {
        return Err(FracError::Config("adjoint_defect requires f(a) = 0".into()));
    }
    let lhs = g.weighted_dot(&caputo_left(f, alpha)?)?;
    let rhs = f.weighted_dot(&rl_right(g, alpha)?)?;
    Ok((lhs - rhs).modulus())
}

/// First derivative by centered differences inside, one-sided at the two ends.
pub fn centered_derivative<T: Scalar>(f: &FieldSample<T>) -> Result<FieldSample<T>> {
    let g = f.grid().as_1d()?;
    let v = f.values();
    let n = g.intervals();
    let h = g.h();
    let mut out = Vec::with_capacity(n + 1);
    out.push((v[1] - v[0]) * (1.0 / h));
    for j in 1..n {
        out.push((v[j + 1] - v[j - 1]) * (0.5 / h));
    }
    out.push((v[n] - v[n - 1]) * (1.0 / h));
    Ok(FieldSample::from_parts(*f.grid(), out))
}
