//! Uniform grids on `[a, b]` and their tensor products, with trapezoid weights.

use crate::error::{FracError, Result};

/// Uniform sampling of `[a, b]` with `n` intervals (`n + 1` nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(FracError::Config(format!("grid ends must be finite, got [{a}, {b}]")));
        }
        if b <= a {
            return Err(FracError::Config(format!("grid requires b > a, got [{a}, {b}]")));
        }
        if n < 2 {
            return Err(FracError::Config(format!("grid requires n >= 2 intervals, got {n}")));
        }
        Ok(Self { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    /// Node `j`; the last node is pinned to `b` exactly.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n {
            self.b
        } else {
            self.a + j as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.node(j)).collect()
    }

    /// Trapezoid weights: `h/2` at both ends, `h` inside.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.n + 1];
        w[0] = 0.5 * h;
        w[self.n] = 0.5 * h;
        w
    }
}

/// Tensor product of two uniform grids. Node `(i, j)` is stored at `i * ny + j`,
/// where `ny` is the node count along axis 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    x: Grid1D,
    y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Self {
        Self { x, y }
    }

    pub fn axis(&self, k: usize) -> Option<&Grid1D> {
        match k {
            0 => Some(&self.x),
            1 => Some(&self.y),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.y.len() + j
    }

    pub fn weights(&self) -> Vec<f64> {
        let wx = self.x.weights();
        let wy = self.y.weights();
        wx.iter().flat_map(|a| wy.iter().map(move |b| a * b)).collect()
    }
}

/// Domain of a sampled field: one or two axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    One(Grid1D),
    Two(Grid2D),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::One(g) => g.len(),
            Grid::Two(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis_count(&self) -> usize {
        match self {
            Grid::One(_) => 1,
            Grid::Two(_) => 2,
        }
    }

    pub fn axis(&self, k: usize) -> Result<&Grid1D> {
        let g = match self {
            Grid::One(g) if k == 0 => Some(g),
            Grid::One(_) => None,
            Grid::Two(g) => g.axis(k),
        };
        g.ok_or_else(|| FracError::Structural(format!("grid has no axis {k}")))
    }

    pub fn as_1d(&self) -> Result<&Grid1D> {
        match self {
            Grid::One(g) => Ok(g),
            Grid::Two(_) => Err(FracError::Structural("expected a one-dimensional grid".into())),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        match self {
            Grid::One(g) => g.weights(),
            Grid::Two(g) => g.weights(),
        }
    }

    /// Coordinates of the node with flat index `idx`.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        match self {
            Grid::One(g) => vec![g.node(idx)],
            Grid::Two(g) => {
                let ny = g.y.len();
                vec![g.x.node(idx / ny), g.y.node(idx % ny)]
            }
        }
    }

    /// True when the node lies on the boundary of the domain.
    pub fn is_boundary(&self, idx: usize) -> bool {
        match self {
            Grid::One(g) => idx == 0 || idx == g.intervals(),
            Grid::Two(g) => {
                let ny = g.y.len();
                let (i, j) = (idx / ny, idx % ny);
                i == 0 || i == g.x.intervals() || j == 0 || j == g.y.intervals()
            }
        }
    }

    /// Flat indices of the one-dimensional lines running along `axis`.
    /// Each entry is `(start, stride)`; the line has `axis(k).len()` nodes.
    pub fn lines(&self, axis: usize) -> Result<Vec<(usize, usize)>> {
        match (self, axis) {
            (Grid::One(_), 0) => Ok(vec![(0, 1)]),
            (Grid::Two(g), 0) => {
                let ny = g.y.len();
                Ok((0..ny).map(|j| (j, ny)).collect())
            }
            (Grid::Two(g), 1) => {
                let ny = g.y.len();
                Ok((0..g.x.len()).map(|i| (i * ny, 1)).collect())
            }
            _ => Err(FracError::Structural(format!("grid has no axis {axis}"))),
        }
    }
}

impl From<Grid1D> for Grid {
    fn from(g: Grid1D) -> Self {
        Grid::One(g)
    }
}

impl From<Grid2D> for Grid {
    fn from(g: Grid2D) -> Self {
        Grid::Two(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(1.0, 1.0, 8).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(0.0, f64::NAN, 8).is_err());
    }

    #[test]
    fn nodes_hit_both_ends() {
        let g = Grid1D::new(-0.3, 2.7, 7).unwrap();
        let x = g.nodes();
        assert_eq!(x[0], -0.3);
        assert_eq!(x[7], 2.7);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn weights_sum_to_length() {
        for &(a, b, n) in &[(0.0, 1.0, 2), (-2.0, 3.5, 1023), (1e3, 1e3 + 0.1, 77)] {
            let g = Grid1D::new(a, b, n).unwrap();
            let s = crate::numeric::compensated_sum(g.weights().iter().copied());
            assert!((s - (b - a)).abs() <= 8.0 * f64::EPSILON * (b - a));
        }
    }

    #[test]
    fn two_dimensional_lines_cover_every_node_once() {
        let g = Grid::Two(Grid2D::new(Grid1D::new(0.0, 1.0, 3).unwrap(), Grid1D::new(0.0, 2.0, 4).unwrap()));
        for axis in 0..2 {
            let len = g.axis(axis).unwrap().len();
            let mut seen = vec![0; g.len()];
            for (start, stride) in g.lines(axis).unwrap() {
                for t in 0..len {
                    seen[start + t * stride] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
        assert_eq!(g.coords(g.len() - 1), vec![1.0, 2.0]);
        assert!(g.is_boundary(0));
        assert!(!g.is_boundary(6));
    }
}
