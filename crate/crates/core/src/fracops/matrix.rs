use super::{FractionalOperator, FractionalOrder, LineKernel, OperatorKind, Scheme, Side};
use crate::error::{FracError, Result};
use crate::field::Scalar;
use crate::grid::Grid1D;

/// Dense `(n+1) x (n+1)` matrix of a discrete fractional operator, row-major.
/// Left operators are lower triangular, right operators upper triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    kind: OperatorKind,
    side: Side,
    scheme: Scheme,
    alpha: FractionalOrder,
    size: usize,
    entries: Vec<f64>,
}

/// Builds the matrix of the operator `(kind, side, scheme, alpha)` on `grid`.
pub fn operator_matrix(
    kind: OperatorKind,
    side: Side,
    scheme: Scheme,
    alpha: FractionalOrder,
    grid: &Grid1D,
) -> Result<OperatorMatrix> {
    if kind.scheme() != scheme {
        return Err(FracError::Config(format!("scheme {scheme:?} does not discretize {kind:?} derivatives")));
    }
    let kernel = LineKernel::new(FractionalOperator::new(kind, side, alpha), grid)?;
    let size = kernel.len();
    let mut entries = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            entries[i * size + j] = kernel.entry(i, j);
        }
    }
    Ok(OperatorMatrix { kind, side, scheme, alpha, size, entries })
}

impl OperatorMatrix {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Matrix-vector product over the triangular band. Columns are visited in
    /// the same order as the convolution in the apply operations, so for
    /// Riemann-Liouville operators the result is bit-identical to them.
    pub fn apply<T: Scalar>(&self, f: &[T]) -> Result<Vec<T>> {
        if f.len() != self.size {
            return Err(FracError::Structural(format!(
                "vector of length {} does not match {}x{} operator",
                f.len(),
                self.size,
                self.size
            )));
        }
        let n = self.size;
        Ok((0..n)
            .map(|i| {
                let mut acc = T::zero();
                match self.side {
                    Side::Left => {
                        for (j, &fj) in f.iter().enumerate().take(i + 1) {
                            acc += fj * self.get(i, j);
                        }
                    }
                    Side::Right => {
                        for j in (i..n).rev() {
                            acc += f[j] * self.get(i, j);
                        }
                    }
                }
                acc
            })
            .collect())
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.size).all(|i| (i + 1..self.size).all(|j| self.get(i, j) == 0.0))
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.size).all(|i| (0..i).all(|j| self.get(i, j) == 0.0))
    }

    /// `R M R` with `R` the index-reversal permutation.
    pub fn reflected(&self) -> Vec<f64> {
        let n = self.size;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(n - 1 - i, n - 1 - j);
            }
        }
        out
    }
}
