//! Fractional Dirac field in one time dimension.
//!
//! `L = m^a Psibar Psi + Psibar gamma^mu (C+_mu Psi)` with `Psi` a column spinor
//! and `Psibar` an independent row spinor. In 0+1 dimensions the field
//! equations are the initial-value problem `C+ Psi = -m^a gamma0 Psi` and the
//! terminal-value problem `(RL- Psibar) gamma0 + m^a Psibar = 0`.
//!
//! `Psibar` behaves like `(T - t)^(a-1)` near `t = T` when `a < 1`. At the node
//! `t = T` every solver stores `Gamma(a) h^(a-1) psibar_t`, the value the
//! Grünwald-Letnikov sweep needs to reproduce the weighted terminal condition
//! `lim (T - t)^(1-a) Psibar(t) = psibar_t`. At `a = 1` this is `psibar_t` itself.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix2, RowVector2, Vector2};
use num_complex::Complex64;

use crate::error::{FracError, Result};
use crate::field::{ensure_same_grid, ComplexField};
use crate::fracops::{centered_derivative, FractionalOperator, FractionalOrder, LineKernel, Side};
use crate::grid::{Grid, Grid1D};
use crate::noether::bilinear;
use crate::special::{gamma_fn, mittag_leffler_matrix, MittagLefflerParams};
use crate::variational::{AdjointMode, FieldConfiguration, LagrangianDensity, PointState};

/// Spinor dimension.
pub const SPINOR_DIM: usize = 2;
/// Smallest number of time intervals accepted by [`DiracParams`].
pub const MIN_INTERVALS: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Euclidean gamma matrices `gamma^mu`, `mu < dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaAlgebra {
    matrices: Vec<Matrix2<Complex64>>,
}

/// `gamma^0 = diag(1, -1)`, and for `dim = 2` also `gamma^1 = [[0, 1], [1, 0]]`.
pub fn make_gamma(dim: usize) -> Result<GammaAlgebra> {
    let g0 = Matrix2::new(ONE, ZERO, ZERO, -ONE);
    let g1 = Matrix2::new(ZERO, ONE, ONE, ZERO);
    match dim {
        1 => Ok(GammaAlgebra { matrices: vec![g0] }),
        2 => Ok(GammaAlgebra { matrices: vec![g0, g1] }),
        _ => Err(FracError::Config(format!("gamma algebra supports 1 or 2 axes, got {dim}"))),
    }
}

impl GammaAlgebra {
    pub fn dim(&self) -> usize {
        self.matrices.len()
    }

    pub fn gamma(&self, mu: usize) -> &Matrix2<Complex64> {
        &self.matrices[mu]
    }

    /// Largest entry of `gamma^mu gamma^nu + gamma^nu gamma^mu - 2 delta^{mu nu} I` over all pairs.
    pub fn anticommutator_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (mu, a) in self.matrices.iter().enumerate() {
            for (nu, b) in self.matrices.iter().enumerate() {
                let want = if mu == nu { Matrix2::identity() * Complex64::new(2.0, 0.0) } else { Matrix2::zeros() };
                let d = a * b + b * a - want;
                worst = d.iter().fold(worst, |m, v| m.max(v.norm()));
            }
        }
        worst
    }

    /// Largest entry of `gamma^mu - (gamma^mu)^dagger`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.matrices
            .iter()
            .flat_map(|g| (g - g.adjoint()).iter().map(|v| v.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

/// Whether a spinor is the column field `Psi` or the row field `Psibar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinorRole {
    Psi,
    PsiBar,
}

/// Two complex components on one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    role: SpinorRole,
    components: Vec<ComplexField>,
}

impl SpinorField {
    pub fn new(role: SpinorRole, components: Vec<ComplexField>) -> Result<Self> {
        if components.len() != SPINOR_DIM {
            return Err(FracError::Structural(format!("spinor needs {SPINOR_DIM} components, got {}", components.len())));
        }
        components[0].grid().as_1d()?;
        ensure_same_grid(components[0].grid(), components[1].grid())?;
        Ok(Self { role, components })
    }

    fn from_nodes(role: SpinorRole, grid: Grid1D, nodes: &[[Complex64; 2]]) -> Result<Self> {
        let comps = (0..SPINOR_DIM)
            .map(|s| ComplexField::new(grid, nodes.iter().map(|v| v[s]).collect()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| FracError::Numerical(format!("spinor solve produced non-finite values ({e})")))?;
        Self::new(role, comps)
    }

    pub fn role(&self) -> SpinorRole {
        self.role
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[ComplexField] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The spinor at node `j`.
    pub fn at(&self, j: usize) -> [Complex64; 2] {
        [self.components[0].values()[j], self.components[1].values()[j]]
    }

    /// Largest componentwise difference to `other`.
    pub fn max_diff(&self, other: &SpinorField) -> Result<f64> {
        ensure_same_grid(self.grid(), other.grid())?;
        let mut worst = 0.0f64;
        for (a, b) in self.components.iter().zip(&other.components) {
            worst = worst.max(a.zip_with(b, |x, y| x - y)?.max_abs());
        }
        Ok(worst)
    }

    /// CSV rows `t,re_1,im_1,re_2,im_2`, one per node, no header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = self.grid().as_1d()?;
        for j in 0..self.len() {
            let [a, b] = self.at(j);
            writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", g.node(j), a.re, a.im, b.re, b.im)?;
        }
        Ok(())
    }

    /// Column names matching [`write_csv`](Self::write_csv).
    pub fn csv_columns(&self) -> &'static str {
        match self.role {
            SpinorRole::Psi => "t,re_psi1,im_psi1,re_psi2,im_psi2",
            SpinorRole::PsiBar => "t,re_psibar1,im_psibar1,re_psibar2,im_psibar2",
        }
    }
}

/// `Psibar M Psi` at every node. Only a `PsiBar` field may stand on the left.
pub fn contract(psibar: &SpinorField, m: &Matrix2<Complex64>, psi: &SpinorField) -> Result<ComplexField> {
    if psibar.role != SpinorRole::PsiBar || psi.role != SpinorRole::Psi {
        return Err(FracError::Structural("contraction needs a Psibar field on the left and a Psi field on the right".into()));
    }
    ensure_same_grid(psibar.grid(), psi.grid())?;
    let values = (0..psi.len())
        .map(|j| {
            let (b, p) = (psibar.at(j), psi.at(j));
            (RowVector2::new(b[0], b[1]) * m * Vector2::new(p[0], p[1]))[(0, 0)]
        })
        .collect();
    ComplexField::new(*psi.grid(), values)
}

/// Mass, order, horizon and boundary data of a 0+1 dimensional Dirac problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracParams {
    pub m: f64,
    pub alpha: FractionalOrder,
    pub t_end: f64,
    pub n: usize,
    pub psi0: [Complex64; 2],
    pub psibar_t: [Complex64; 2],
}

impl DiracParams {
    pub fn new(
        m: f64,
        alpha: FractionalOrder,
        t_end: f64,
        n: usize,
        psi0: [Complex64; 2],
        psibar_t: [Complex64; 2],
    ) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(FracError::Config(format!("mass must be positive, got {m}")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(FracError::Config(format!("time horizon must be positive, got {t_end}")));
        }
        if n < MIN_INTERVALS {
            return Err(FracError::Config(format!("need at least {MIN_INTERVALS} time intervals, got {n}")));
        }
        if psi0.iter().chain(&psibar_t).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(FracError::Config("initial and terminal spinors must be finite".into()));
        }
        Ok(Self { m, alpha, t_end, n, psi0, psibar_t })
    }

    pub fn grid(&self) -> Grid1D {
        Grid1D::new(0.0, self.t_end, self.n).expect("validated in DiracParams::new")
    }

    /// `m^alpha`, computed as `exp(alpha ln m)`.
    pub fn m_alpha(&self) -> f64 {
        (self.alpha.value() * self.m.ln()).exp()
    }

    /// Value stored at `t = T` for `Psibar`: `Gamma(alpha) h^(alpha-1) psibar_t`.
    pub fn psibar_terminal_node(&self) -> Result<[Complex64; 2]> {
        let a = self.alpha.value();
        let c = if self.alpha.is_classical() { 1.0 } else { gamma_fn(a)? * self.grid().h().powf(a - 1.0) };
        Ok([self.psibar_t[0] * c, self.psibar_t[1] * c])
    }
}

fn require_time_only(g: &GammaAlgebra) -> Result<()> {
    if g.dim() != 1 {
        return Err(FracError::Structural(format!(
            "Dirac solves run in one time dimension, gamma algebra has {} axes",
            g.dim()
        )));
    }
    Ok(())
}

/// The Dirac density over the fields `[Psi_1, Psi_2, Psibar_1, Psibar_2]`, one
/// left Caputo slot per gamma matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracDensity {
    alpha: FractionalOrder,
    m_alpha: f64,
    gamma: GammaAlgebra,
}

impl DiracDensity {
    pub fn new(alpha: FractionalOrder, m: f64, gamma: GammaAlgebra) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(FracError::Config(format!("mass must be positive, got {m}")));
        }
        Ok(Self { alpha, m_alpha: (alpha.value() * m.ln()).exp(), gamma })
    }
}

/// [`DiracDensity`] for the parameters of a 0+1 dimensional problem.
pub fn dirac_lagrangian(p: &DiracParams, g: &GammaAlgebra) -> Result<DiracDensity> {
    require_time_only(g)?;
    DiracDensity::new(p.alpha, p.m, g.clone())
}

impl LagrangianDensity for DiracDensity {
    fn n_fields(&self) -> usize {
        2 * SPINOR_DIM
    }

    fn axes(&self) -> usize {
        self.gamma.dim()
    }

    fn left_order(&self, k: usize) -> Option<FractionalOrder> {
        (k < self.gamma.dim()).then_some(self.alpha)
    }

    fn value(&self, p: &PointState) -> Result<Complex64> {
        let (psi, bar) = p.fields.split_at(SPINOR_DIM);
        let mut acc = ZERO;
        for s in 0..SPINOR_DIM {
            acc += self.m_alpha * bar[s] * psi[s];
        }
        for mu in 0..self.gamma.dim() {
            let g = self.gamma.gamma(mu);
            for s in 0..SPINOR_DIM {
                for t in 0..SPINOR_DIM {
                    acc += bar[s] * g[(s, t)] * p.left(t, mu);
                }
            }
        }
        Ok(acc)
    }

    fn d_field(&self, p: &PointState, r: usize) -> Result<Complex64> {
        if r < SPINOR_DIM {
            return Ok(self.m_alpha * p.fields[SPINOR_DIM + r]);
        }
        let s = r - SPINOR_DIM;
        let mut acc = self.m_alpha * p.fields[s];
        for mu in 0..self.gamma.dim() {
            let g = self.gamma.gamma(mu);
            for t in 0..SPINOR_DIM {
                acc += g[(s, t)] * p.left(t, mu);
            }
        }
        Ok(acc)
    }

    fn d_left(&self, p: &PointState, r: usize, k: usize) -> Result<Complex64> {
        if r >= SPINOR_DIM {
            return Ok(ZERO);
        }
        let g = self.gamma.gamma(k);
        Ok((0..SPINOR_DIM).fold(ZERO, |acc, s| acc + p.fields[SPINOR_DIM + s] * g[(s, r)]))
    }

    fn conjugate_pairs(&self) -> Vec<(usize, usize)> {
        (0..SPINOR_DIM).map(|s| (s, SPINOR_DIM + s)).collect()
    }
}

/// Packs `Psi` and `Psibar` into the field order of [`DiracDensity`].
pub fn configuration(psi: &SpinorField, psibar: &SpinorField) -> Result<FieldConfiguration> {
    if psibar.role != SpinorRole::PsiBar || psi.role != SpinorRole::Psi {
        return Err(FracError::Structural("expected a Psi and a Psibar field".into()));
    }
    FieldConfiguration::new(psi.components.iter().chain(&psibar.components).cloned().collect())
}

fn ml_range_hint(e: FracError) -> FracError {
    match e {
        FracError::Range(msg) => FracError::Range(format!("{msg}; try a smaller time horizon or mass")),
        e => e,
    }
}

fn matrix_ml(alpha: f64, beta: f64, a: Matrix2<Complex64>) -> Result<Matrix2<Complex64>> {
    let p = MittagLefflerParams::new(alpha, beta)?;
    let e = mittag_leffler_matrix(p, &DMatrix::from_iterator(2, 2, a.iter().copied())).map_err(ml_range_hint)?;
    Ok(Matrix2::from_iterator(e.iter().copied()))
}

/// `Psi(t) = E_{alpha,1}(-m^alpha gamma0 t^alpha) psi0` at every node.
pub fn solve_psi(p: &DiracParams, g: &GammaAlgebra) -> Result<SpinorField> {
    require_time_only(g)?;
    let grid = p.grid();
    let a = p.alpha.value();
    let gen = g.gamma(0) * Complex64::new(-p.m_alpha(), 0.0);
    let psi0 = Vector2::new(p.psi0[0], p.psi0[1]);
    let nodes = grid
        .nodes()
        .into_iter()
        .map(|t| {
            let e = matrix_ml(a, 1.0, gen * Complex64::new(t.powf(a), 0.0))?;
            let v = e * psi0;
            Ok([v[0], v[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    SpinorField::from_nodes(SpinorRole::Psi, grid, &nodes)
}

/// `Psibar(T - s) = Gamma(alpha) s^(alpha-1) psibar_t E_{alpha,alpha}(-m^alpha gamma0 s^alpha)`,
/// the solution with `s^(1-alpha) Psibar -> psibar_t` as `s -> 0`.
pub fn solve_psibar(p: &DiracParams, g: &GammaAlgebra) -> Result<SpinorField> {
    require_time_only(g)?;
    let grid = p.grid();
    let a = p.alpha.value();
    let ga = gamma_fn(a)?;
    let gen = g.gamma(0) * Complex64::new(-p.m_alpha(), 0.0);
    let bar = RowVector2::new(p.psibar_t[0], p.psibar_t[1]);
    let n = grid.intervals();
    let mut nodes = Vec::with_capacity(n + 1);
    for j in 0..n {
        let s = grid.b() - grid.node(j);
        let e = matrix_ml(a, a, gen * Complex64::new(s.powf(a), 0.0))?;
        let v = bar * e * Complex64::new(ga * s.powf(a - 1.0), 0.0);
        nodes.push([v[0], v[1]]);
    }
    nodes.push(p.psibar_terminal_node()?);
    SpinorField::from_nodes(SpinorRole::PsiBar, grid, &nodes)
}

fn solve2(m: Matrix2<Complex64>, rhs: Vector2<Complex64>) -> Result<Vector2<Complex64>> {
    m.lu().solve(&rhs).ok_or_else(|| FracError::Numerical("singular 2x2 step matrix".into()))
}

/// `Psi` from the L1 scheme itself: `(C+ Psi)_j + m^alpha gamma0 Psi_j = 0` for `j >= 1`.
pub fn solve_psi_discrete(p: &DiracParams, g: &GammaAlgebra) -> Result<SpinorField> {
    require_time_only(g)?;
    let grid = p.grid();
    let kernel = LineKernel::new(FractionalOperator::caputo(Side::Left, p.alpha), &grid)?;
    let mass = g.gamma(0) * Complex64::new(p.m_alpha(), 0.0);
    let mut ys: Vec<Vector2<Complex64>> = vec![Vector2::new(p.psi0[0], p.psi0[1])];
    for j in 1..grid.len() {
        let mut rhs = Vector2::zeros();
        for (i, y) in ys.iter().enumerate() {
            rhs -= y * Complex64::new(kernel.entry(j, i), 0.0);
        }
        let lhs = Matrix2::identity() * Complex64::new(kernel.entry(j, j), 0.0) + mass;
        ys.push(solve2(lhs, rhs)?);
    }
    let nodes: Vec<[Complex64; 2]> = ys.iter().map(|v| [v[0], v[1]]).collect();
    SpinorField::from_nodes(SpinorRole::Psi, grid, &nodes)
}

/// `Psibar` from a backward sweep of `(O Psibar)_j gamma0 + m^alpha Psibar_j = 0`,
/// where `O` is the right RL operator (continuum-faithful) or the weighted
/// transpose of the left Caputo matrix (discrete-exact).
///
/// The continuum-faithful sweep enforces rows `0..n`. In discrete-exact mode
/// row 0 is the variation with respect to the fixed initial value `Psi_0`, so
/// it is not a field equation; rows `1..n` are enforced and `Psibar_0` is
/// extrapolated linearly from nodes 1 and 2. No interior residual depends on it.
pub fn solve_psibar_discrete(p: &DiracParams, g: &GammaAlgebra, mode: AdjointMode) -> Result<SpinorField> {
    require_time_only(g)?;
    let grid = p.grid();
    let n = grid.intervals();
    let w = grid.weights();
    let (kernel, transpose) = match mode {
        AdjointMode::ContinuumFaithful => {
            (LineKernel::new(FractionalOperator::riemann_liouville(Side::Right, p.alpha), &grid)?, false)
        }
        AdjointMode::DiscreteExact => (LineKernel::new(FractionalOperator::caputo(Side::Left, p.alpha), &grid)?, true),
    };
    // Entry (i, j) of the upper-triangular outer operator.
    let entry = |i: usize, j: usize| if transpose { kernel.entry(j, i) * w[j] / w[i] } else { kernel.entry(i, j) };
    let g0 = *g.gamma(0);
    let mass = Matrix2::identity() * Complex64::new(p.m_alpha(), 0.0);
    let last = p.psibar_terminal_node()?;
    let mut xs: Vec<RowVector2<Complex64>> = vec![RowVector2::zeros(); n + 1];
    xs[n] = RowVector2::new(last[0], last[1]);
    let first_row = if transpose { 1 } else { 0 };
    for j in (first_row..n).rev() {
        let mut acc = RowVector2::zeros();
        for (i, x) in xs.iter().enumerate().skip(j + 1) {
            acc += x * Complex64::new(entry(j, i), 0.0);
        }
        let rhs = -(acc * g0);
        let lhs = g0 * Complex64::new(entry(j, j), 0.0) + mass;
        // x lhs = rhs  <=>  lhs^T x^T = rhs^T
        let sol = solve2(lhs.transpose(), rhs.transpose())?;
        xs[j] = sol.transpose();
    }
    if transpose {
        xs[0] = xs[1] * Complex64::new(2.0, 0.0) - xs[2];
    }
    let nodes: Vec<[Complex64; 2]> = xs.iter().map(|v| [v[0], v[1]]).collect();
    SpinorField::from_nodes(SpinorRole::PsiBar, grid, &nodes)
}

/// Exponents `{0, 1} U {k alpha < 2}` whose powers of `t` the corrected
/// quadrature integrates exactly.
fn starting_exponents(a: f64) -> Vec<f64> {
    let mut s = vec![0.0, 1.0];
    let mut k = 1.0;
    while k * a < 2.0 - 1e-12 {
        let v = k * a;
        if (v - v.round()).abs() > 1e-9 {
            s.push(v);
        }
        k += 1.0;
    }
    s
}

fn node_power(j: usize, s: f64) -> f64 {
    if j == 0 {
        if s == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (j as f64).powf(s)
    }
}

/// Product-trapezoid weights of the fractional integral at step `i` (`i + 1` entries).
fn trapezoid_weights(a: f64, i: usize, g2: f64) -> Vec<f64> {
    let k = (i - 1) as f64;
    let p = a + 1.0;
    let mut w = vec![0.0; i + 1];
    w[0] = k.powf(p) - (k - a) * (k + 1.0).powf(a);
    for (j, wj) in w.iter_mut().enumerate().take(i).skip(1) {
        let d = k - j as f64;
        *wj = (d + 2.0).powf(p) + d.powf(p) - 2.0 * (d + 1.0).powf(p);
    }
    w[i] = 1.0;
    w.iter().map(|v| v / g2).collect()
}

/// Product-rectangle (predictor) weights at step `i` (`i` entries).
fn rectangle_weights(a: f64, i: usize, g1: f64) -> Vec<f64> {
    (0..i).map(|j| (((i - j) as f64).powf(a) - ((i - 1 - j) as f64).powf(a)) / g1).collect()
}

/// Adds starting weights on nodes `0..K` so that `t^s` is integrated exactly for every `s` in `exps`.
fn corrected(base: Vec<f64>, a: f64, i: usize, exps: &[f64], v_lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> Result<Vec<f64>> {
    let k = exps.len();
    let mut w = base;
    if w.len() < k {
        w.resize(k, 0.0);
    }
    let mut rhs = DVector::zeros(k);
    for (row, &s) in exps.iter().enumerate() {
        let exact = gamma_fn(s + 1.0)? / gamma_fn(s + 1.0 + a)? * (i as f64).powf(s + a);
        let have: f64 = w.iter().enumerate().map(|(j, wj)| wj * node_power(j, s)).sum();
        rhs[row] = exact - have;
    }
    let delta = v_lu.solve(&rhs).ok_or_else(|| FracError::Numerical("starting weight system is singular".into()))?;
    for (wj, d) in w.iter_mut().zip(delta.iter()) {
        *wj += d;
    }
    Ok(w)
}

/// `Psi` from a fractional Adams-Bashforth-Moulton predictor-corrector with
/// starting weights that make the quadrature exact on `t^s`, `s in {0, 1, k alpha}`.
/// The first `K - 1` steps are solved jointly with the corrector.
pub fn solve_psi_pece(p: &DiracParams, g: &GammaAlgebra) -> Result<SpinorField> {
    require_time_only(g)?;
    let grid = p.grid();
    let n = grid.intervals();
    let a = p.alpha.value();
    let ha = if p.alpha.is_classical() { grid.h() } else { grid.h().powf(a) };
    let gen = g.gamma(0) * Complex64::new(-p.m_alpha(), 0.0);
    let (g1, g2) = (gamma_fn(a + 1.0)?, gamma_fn(a + 2.0)?);
    let exps = starting_exponents(a);
    let k = exps.len();
    let v = DMatrix::from_fn(k, k, |row, col| node_power(col, exps[row]));
    let v_lu = v.lu();
    let y0 = Vector2::new(p.psi0[0], p.psi0[1]);

    let mut y: Vec<Vector2<Complex64>> = vec![y0];
    let start = (k - 1).min(n);
    if start > 0 {
        // y_i = y0 + h^a sum_j w_ij A y_j for i = 1..=start, all at once.
        let dim = 2 * start;
        let mut lhs = DMatrix::<Complex64>::identity(dim, dim);
        let mut rhs = DVector::<Complex64>::zeros(dim);
        for i in 1..=start {
            let w = corrected(trapezoid_weights(a, i, g2), a, i, &exps, &v_lu)?;
            let f0 = gen * y0 * Complex64::new(ha * w[0], 0.0);
            for c in 0..2 {
                rhs[2 * (i - 1) + c] = y0[c] + f0[c];
            }
            for (j, wj) in w.iter().enumerate().skip(1) {
                for r in 0..2 {
                    for c in 0..2 {
                        lhs[(2 * (i - 1) + r, 2 * (j - 1) + c)] -= gen[(r, c)] * ha * wj;
                    }
                }
            }
        }
        let sol = lhs.lu().solve(&rhs).ok_or_else(|| FracError::Numerical("PECE starting system is singular".into()))?;
        for i in 0..start {
            y.push(Vector2::new(sol[2 * i], sol[2 * i + 1]));
        }
    }
    let mut f: Vec<Vector2<Complex64>> = y.iter().map(|v| gen * v).collect();
    for i in start + 1..=n {
        let pw = corrected(rectangle_weights(a, i, g1), a, i, &exps, &v_lu)?;
        let mut pred = Vector2::zeros();
        for (wj, fj) in pw.iter().zip(&f) {
            pred += fj * Complex64::new(*wj, 0.0);
        }
        let yp = y0 + pred * Complex64::new(ha, 0.0);
        let cw = corrected(trapezoid_weights(a, i, g2), a, i, &exps, &v_lu)?;
        let mut corr = Vector2::zeros();
        for (wj, fj) in cw.iter().take(i).zip(&f) {
            corr += fj * Complex64::new(*wj, 0.0);
        }
        corr += gen * yp * Complex64::new(cw[i], 0.0);
        let yi = y0 + corr * Complex64::new(ha, 0.0);
        f.push(gen * yi);
        y.push(yi);
    }
    let nodes: Vec<[Complex64; 2]> = y.iter().map(|v| [v[0], v[1]]).collect();
    SpinorField::from_nodes(SpinorRole::Psi, grid, &nodes)
}

/// `sum_mu D+_mu[Psibar gamma^mu, Psi]`: the pointwise conserved-quantity residual,
/// with the outer operator chosen by `mode`.
pub fn conserved_residual(
    psi: &SpinorField,
    psibar: &SpinorField,
    p: &DiracParams,
    g: &GammaAlgebra,
    mode: AdjointMode,
) -> Result<ComplexField> {
    require_time_only(g)?;
    if psibar.role != SpinorRole::PsiBar || psi.role != SpinorRole::Psi {
        return Err(FracError::Structural("expected a Psi and a Psibar field".into()));
    }
    ensure_same_grid(psi.grid(), psibar.grid())?;
    let mut acc = ComplexField::zeros(*psi.grid());
    for mu in 0..g.dim() {
        let gm = g.gamma(mu);
        for t in 0..SPINOR_DIM {
            // (Psibar gamma^mu)_t
            let f = psibar.components[0].zip_with(&psibar.components[1], |b0, b1| b0 * gm[(0, t)] + b1 * gm[(1, t)])?;
            let d = bilinear(&f, &psi.components[t], mu, p.alpha, Side::Left, mode)?;
            acc = acc.zip_with(&d, |x, y| x + y)?;
        }
    }
    Ok(acc)
}

/// `m^alpha Psibar Psi`, the scale of each half of the conserved residual.
pub fn mass_term(psi: &SpinorField, psibar: &SpinorField, p: &DiracParams) -> Result<ComplexField> {
    let ma = Complex64::new(p.m_alpha(), 0.0);
    Ok(contract(psibar, &Matrix2::identity(), psi)?.map(|v| v * ma))
}

/// `j^mu = Psibar gamma^mu Psi`, one field per axis.
pub fn classical_current(psi: &SpinorField, psibar: &SpinorField, g: &GammaAlgebra) -> Result<Vec<ComplexField>> {
    (0..g.dim()).map(|mu| contract(psibar, g.gamma(mu), psi)).collect()
}

/// Interior max of the centered-difference time derivative of `j0`.
pub fn continuity_defect(j0: &ComplexField) -> Result<f64> {
    Ok(centered_derivative(j0)?.interior_max_abs())
}
