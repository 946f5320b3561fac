//! Fractional action functional, Euler-Lagrange residual and the Gâteaux
//! consistency check that ties them together.
//!
//! Every field is carried as complex samples. Real fields simply have zero
//! imaginary parts, and a complex field with its conjugate is a pair of
//! independent components (see [`LagrangianDensity::conjugate_pairs`]).
//! Densities are treated as holomorphic in all their arguments, so
//! derivatives and inner products are bilinear with no conjugation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{FracError, Result};
use crate::field::{ComplexField, FieldSample, RealField};
use crate::fracops::{adjoint_partial, apply_partial, centered_derivative, FractionalOperator, FractionalOrder, Side};
use crate::grid::Grid;
use crate::numeric::ComplexSum;

const PARALLEL_MIN_NODES: usize = 2048;
/// Step of the central-difference cross-check of analytic partials.
pub const PARTIALS_FD_STEP: f64 = 1e-6;

/// How the outer derivatives of the Euler-Lagrange residual are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdjointMode {
    /// Grünwald-Letnikov Riemann-Liouville operators, as in the continuum equations.
    ContinuumFaithful,
    /// Quadrature-weighted transpose of the discrete Caputo matrices. This is the
    /// exact adjoint of the discretized action.
    DiscreteExact,
}

/// Values seen by a density at one node.
///
/// Slot values are stored field-major: the derivative of field `r` along
/// axis `k` sits at `r * axes + k`. Unused slots hold zero.
#[derive(Debug, Clone, Copy)]
pub struct PointState<'a> {
    pub coords: &'a [f64],
    pub fields: &'a [Complex64],
    pub left: &'a [Complex64],
    pub right: &'a [Complex64],
    pub axes: usize,
}

impl PointState<'_> {
    /// Left Caputo derivative of field `r` along axis `k`.
    pub fn left(&self, r: usize, k: usize) -> Complex64 {
        self.left[r * self.axes + k]
    }

    /// Right Caputo derivative of field `r` along axis `k`.
    pub fn right(&self, r: usize, k: usize) -> Complex64 {
        self.right[r * self.axes + k]
    }
}

/// A Lagrangian density `L(x, phi, C+ phi, C- phi)` with analytic partials.
///
/// A left slot on axis `k` is active when [`left_order`](Self::left_order)
/// returns an order for it, likewise for right slots. Partials with respect to
/// slots the density does not use must return zero.
pub trait LagrangianDensity: Send + Sync {
    fn n_fields(&self) -> usize;

    fn axes(&self) -> usize {
        1
    }

    fn left_order(&self, k: usize) -> Option<FractionalOrder>;

    fn right_order(&self, _k: usize) -> Option<FractionalOrder> {
        None
    }

    fn value(&self, p: &PointState) -> Result<Complex64>;

    /// `dL / d phi_r`
    fn d_field(&self, p: &PointState, r: usize) -> Result<Complex64>;

    /// `dL / d (C+ phi_r)` along axis `k`
    fn d_left(&self, p: &PointState, r: usize, k: usize) -> Result<Complex64>;

    /// `dL / d (C- phi_r)` along axis `k`
    fn d_right(&self, _p: &PointState, _r: usize, _k: usize) -> Result<Complex64> {
        Ok(Complex64::new(0.0, 0.0))
    }

    /// Index pairs `(r, r*)` of a complex field and its conjugate.
    fn conjugate_pairs(&self) -> Vec<(usize, usize)> {
        Vec::new()
    }
}

/// Ordered list of field components on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfiguration {
    fields: Vec<ComplexField>,
}

impl FieldConfiguration {
    pub fn new(fields: Vec<ComplexField>) -> Result<Self> {
        let first = fields.first().ok_or_else(|| FracError::Structural("configuration needs at least one field".into()))?;
        if fields.iter().any(|f| f.grid() != first.grid()) {
            return Err(FracError::Structural("configuration fields live on different grids".into()));
        }
        Ok(Self { fields })
    }

    pub fn from_real(fields: Vec<RealField>) -> Result<Self> {
        Self::new(fields.iter().map(RealField::to_complex).collect())
    }

    pub fn zeros(grid: impl Into<Grid>, n_fields: usize) -> Result<Self> {
        let grid = grid.into();
        Self::new((0..n_fields).map(|_| ComplexField::zeros(grid)).collect())
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn fields(&self) -> &[ComplexField] {
        &self.fields
    }

    pub fn field(&self, r: usize) -> &ComplexField {
        &self.fields[r]
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn into_fields(self) -> Vec<ComplexField> {
        self.fields
    }

    /// `self + eps * other`, componentwise.
    pub fn add_scaled(&self, eps: Complex64, other: &FieldConfiguration) -> Result<Self> {
        if other.n_fields() != self.n_fields() {
            return Err(FracError::Structural(format!(
                "configurations have {} and {} fields",
                self.n_fields(),
                other.n_fields()
            )));
        }
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.zip_with(b, |x, y| x + eps * y))
            .collect::<Result<Vec<_>>>()?;
        Self::new(fields)
    }

    /// Largest interior-node modulus over all components.
    pub fn interior_max_abs(&self) -> f64 {
        self.fields.iter().map(FieldSample::interior_max_abs).fold(0.0, f64::max)
    }

    /// Largest modulus over all nodes and components.
    pub fn max_abs(&self) -> f64 {
        self.fields.iter().map(FieldSample::max_abs).fold(0.0, f64::max)
    }

    /// `sum_r <self_r, other_r>` under the grid quadrature (bilinear).
    pub fn weighted_dot(&self, other: &FieldConfiguration) -> Result<Complex64> {
        if other.n_fields() != self.n_fields() {
            return Err(FracError::Structural("configurations differ in field count".into()));
        }
        let mut acc = ComplexSum::default();
        for (a, b) in self.fields.iter().zip(&other.fields) {
            acc.add(a.weighted_dot(b)?);
        }
        Ok(acc.value())
    }
}

/// Variation direction `eta` for the Gâteaux derivative. Vanishes on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    eta: FieldConfiguration,
}

impl PerturbationField {
    pub fn new(eta: FieldConfiguration) -> Result<Self> {
        let grid = *eta.grid();
        for (r, f) in eta.fields().iter().enumerate() {
            if let Some(j) = (0..f.len()).find(|&j| grid.is_boundary(j) && f.values()[j].norm() != 0.0) {
                return Err(FracError::Config(format!("perturbation of field {r} is nonzero at boundary node {j}")));
            }
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> &FieldConfiguration {
        &self.eta
    }
}

fn check_shape(l: &dyn LagrangianDensity, cfg: &FieldConfiguration) -> Result<()> {
    if cfg.n_fields() != l.n_fields() {
        return Err(FracError::Structural(format!(
            "density expects {} fields, configuration has {}",
            l.n_fields(),
            cfg.n_fields()
        )));
    }
    if l.axes() != cfg.grid().axis_count() {
        return Err(FracError::Structural(format!(
            "density differentiates along {} axes, grid has {}",
            l.axes(),
            cfg.grid().axis_count()
        )));
    }
    Ok(())
}

/// Nodewise values of every argument slot of a density.
#[derive(Debug, Clone)]
pub(crate) struct SlotValues {
    axes: usize,
    n_fields: usize,
    grid: Grid,
    /// `fields[r][j]`
    fields: Vec<Vec<Complex64>>,
    /// `left[r * axes + k][j]`
    left: Vec<Vec<Complex64>>,
    right: Vec<Vec<Complex64>>,
}

impl SlotValues {
    pub(crate) fn new(l: &dyn LagrangianDensity, cfg: &FieldConfiguration) -> Result<Self> {
        check_shape(l, cfg)?;
        let axes = l.axes();
        let len = cfg.grid().len();
        let mut left = Vec::with_capacity(cfg.n_fields() * axes);
        let mut right = Vec::with_capacity(cfg.n_fields() * axes);
        for f in cfg.fields() {
            for k in 0..axes {
                left.push(match l.left_order(k) {
                    Some(a) => apply_partial(f, k, FractionalOperator::caputo(Side::Left, a))?.into_values(),
                    None => vec![Complex64::new(0.0, 0.0); len],
                });
                right.push(match l.right_order(k) {
                    Some(b) => apply_partial(f, k, FractionalOperator::caputo(Side::Right, b))?.into_values(),
                    None => vec![Complex64::new(0.0, 0.0); len],
                });
            }
        }
        Ok(Self {
            axes,
            n_fields: cfg.n_fields(),
            grid: *cfg.grid(),
            fields: cfg.fields().iter().map(|f| f.values().to_vec()).collect(),
            left,
            right,
        })
    }

    /// Evaluates `eval` at every node with the node's [`PointState`].
    /// Errors are tagged with the node coordinates.
    pub(crate) fn map_nodes<U: Send>(
        &self,
        eval: impl Fn(&PointState) -> Result<U> + Sync,
    ) -> Result<Vec<U>> {
        let node = |j: usize| -> Result<U> {
            let coords = self.grid.coords(j);
            let fields: Vec<Complex64> = self.fields.iter().map(|f| f[j]).collect();
            let left: Vec<Complex64> = self.left.iter().map(|f| f[j]).collect();
            let right: Vec<Complex64> = self.right.iter().map(|f| f[j]).collect();
            let p = PointState { coords: &coords, fields: &fields, left: &left, right: &right, axes: self.axes };
            eval(&p).map_err(|e| match e {
                e @ FracError::Evaluation { .. } => e,
                e => FracError::Evaluation { coords: coords.clone(), message: e.to_string() },
            })
        };
        let len = self.grid.len();
        if len >= PARALLEL_MIN_NODES {
            (0..len).into_par_iter().map(node).collect()
        } else {
            (0..len).map(node).collect()
        }
    }
}

/// Nodewise partial derivatives of a density along a configuration.
#[derive(Debug, Clone)]
pub(crate) struct Momenta {
    /// `d_field[r]`
    pub(crate) d_field: Vec<ComplexField>,
    /// `d_left[r * axes + k]`
    pub(crate) d_left: Vec<ComplexField>,
    pub(crate) d_right: Vec<ComplexField>,
}

impl Momenta {
    pub(crate) fn new(l: &dyn LagrangianDensity, cfg: &FieldConfiguration) -> Result<Self> {
        let slots = SlotValues::new(l, cfg)?;
        let (nf, axes) = (slots.n_fields, slots.axes);
        let per_node = slots.map_nodes(|p| {
            let mut out = Vec::with_capacity(nf * (1 + 2 * axes));
            for r in 0..nf {
                out.push(l.d_field(p, r)?);
            }
            for r in 0..nf {
                for k in 0..axes {
                    out.push(if l.left_order(k).is_some() { l.d_left(p, r, k)? } else { Complex64::new(0.0, 0.0) });
                }
            }
            for r in 0..nf {
                for k in 0..axes {
                    out.push(if l.right_order(k).is_some() { l.d_right(p, r, k)? } else { Complex64::new(0.0, 0.0) });
                }
            }
            Ok(out)
        })?;
        let column = |c: usize| FieldSample::new(slots.grid, per_node.iter().map(|v| v[c]).collect());
        let d_field = (0..nf).map(column).collect::<Result<Vec<_>>>()?;
        let d_left = (0..nf * axes).map(|c| column(nf + c)).collect::<Result<Vec<_>>>()?;
        let d_right = (0..nf * axes).map(|c| column(nf + nf * axes + c)).collect::<Result<Vec<_>>>()?;
        Ok(Self { d_field, d_left, d_right })
    }
}

/// Outer operator paired with a left Caputo slot: the right RL derivative, or
/// the exact discrete adjoint of the left Caputo matrix.
pub(crate) fn outer_left(p: &ComplexField, axis: usize, alpha: FractionalOrder, mode: AdjointMode) -> Result<ComplexField> {
    match mode {
        AdjointMode::ContinuumFaithful => apply_partial(p, axis, FractionalOperator::riemann_liouville(Side::Right, alpha)),
        AdjointMode::DiscreteExact => adjoint_partial(p, axis, FractionalOperator::caputo(Side::Left, alpha)),
    }
}

/// Outer operator paired with a right Caputo slot.
pub(crate) fn outer_right(q: &ComplexField, axis: usize, beta: FractionalOrder, mode: AdjointMode) -> Result<ComplexField> {
    match mode {
        AdjointMode::ContinuumFaithful => apply_partial(q, axis, FractionalOperator::riemann_liouville(Side::Left, beta)),
        AdjointMode::DiscreteExact => adjoint_partial(q, axis, FractionalOperator::caputo(Side::Right, beta)),
    }
}

/// Discrete action `sum_j w_j L(x_j, ...)` with trapezoid weights.
pub fn action(l: &dyn LagrangianDensity, cfg: &FieldConfiguration) -> Result<Complex64> {
    let slots = SlotValues::new(l, cfg)?;
    let values = slots.map_nodes(|p| l.value(p))?;
    let mut acc = ComplexSum::default();
    for (v, w) in values.iter().zip(cfg.grid().weights()) {
        acc.add(v * w);
    }
    Ok(acc.value())
}

/// Fractional Euler-Lagrange residual, one component per field:
/// `dL/dphi_r + sum_k Outer-(dL/dC+phi_r) + sum_k Outer+(dL/dC-phi_r)`.
pub fn el_residual(l: &dyn LagrangianDensity, cfg: &FieldConfiguration, mode: AdjointMode) -> Result<FieldConfiguration> {
    let m = Momenta::new(l, cfg)?;
    let axes = l.axes();
    let mut out = Vec::with_capacity(cfg.n_fields());
    for r in 0..cfg.n_fields() {
        let mut acc = m.d_field[r].clone();
        for k in 0..axes {
            if let Some(a) = l.left_order(k) {
                let t = outer_left(&m.d_left[r * axes + k], k, a, mode)?;
                acc = acc.zip_with(&t, |x, y| x + y)?;
            }
            if let Some(b) = l.right_order(k) {
                let t = outer_right(&m.d_right[r * axes + k], k, b, mode)?;
                acc = acc.zip_with(&t, |x, y| x + y)?;
            }
        }
        out.push(acc);
    }
    FieldConfiguration::new(out)
}

/// Classical Euler-Lagrange residual `dL/dphi - d/dx(dL/dphi') + d/dx(dL/d(-phi'))`
/// on a 1D grid, with `phi'` and the outer derivative taken by centered differences.
/// Left slots receive `phi'`, right slots `-phi'`.
pub fn classical_el_residual(l: &dyn LagrangianDensity, cfg: &FieldConfiguration) -> Result<FieldConfiguration> {
    check_shape(l, cfg)?;
    cfg.grid().as_1d()?;
    let grid = *cfg.grid();
    let nf = cfg.n_fields();
    let zero = Complex64::new(0.0, 0.0);
    let derivs = cfg.fields().iter().map(centered_derivative).collect::<Result<Vec<_>>>()?;
    let per_node: Vec<Vec<Complex64>> = (0..grid.len())
        .map(|j| {
            let coords = grid.coords(j);
            let fields: Vec<Complex64> = cfg.fields().iter().map(|f| f.values()[j]).collect();
            let left: Vec<Complex64> =
                derivs.iter().map(|d| if l.left_order(0).is_some() { d.values()[j] } else { zero }).collect();
            let right: Vec<Complex64> =
                derivs.iter().map(|d| if l.right_order(0).is_some() { -d.values()[j] } else { zero }).collect();
            let p = PointState { coords: &coords, fields: &fields, left: &left, right: &right, axes: 1 };
            let mut out = Vec::with_capacity(3 * nf);
            for r in 0..nf {
                out.push(l.d_field(&p, r)?);
                out.push(if l.left_order(0).is_some() { l.d_left(&p, r, 0)? } else { zero });
                out.push(if l.right_order(0).is_some() { l.d_right(&p, r, 0)? } else { zero });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let column = |c: usize| ComplexField::new(grid, per_node.iter().map(|v| v[c]).collect());
    let mut out = Vec::with_capacity(nf);
    for r in 0..nf {
        let dl = centered_derivative(&column(3 * r + 1)?)?;
        let dr = centered_derivative(&column(3 * r + 2)?)?;
        let base = column(3 * r)?;
        let lhs = base.zip_with(&dl, |a, b| a - b)?;
        out.push(lhs.zip_with(&dr, |a, b| a + b)?);
    }
    FieldConfiguration::new(out)
}

/// Options for [`gateaux_derivative_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateauxOptions {
    pub eps: f64,
    /// Combine the steps `eps` and `eps / 2` to cancel the `eps^2` error term.
    pub richardson: bool,
}

impl Default for GateauxOptions {
    fn default() -> Self {
        Self { eps: 1e-3, richardson: true }
    }
}

/// Central difference `(S(phi + eps eta) - S(phi - eps eta)) / (2 eps)`.
pub fn gateaux_derivative(
    l: &dyn LagrangianDensity,
    cfg: &FieldConfiguration,
    pert: &PerturbationField,
    eps: f64,
) -> Result<Complex64> {
    gateaux_derivative_with(l, cfg, pert, GateauxOptions { eps, richardson: false })
}

pub fn gateaux_derivative_with(
    l: &dyn LagrangianDensity,
    cfg: &FieldConfiguration,
    pert: &PerturbationField,
    opts: GateauxOptions,
) -> Result<Complex64> {
    if !(1e-7..=1e-2).contains(&opts.eps) {
        return Err(FracError::Config(format!("eps must lie in [1e-7, 1e-2], got {}", opts.eps)));
    }
    let central = |eps: f64| -> Result<Complex64> {
        let e = Complex64::new(eps, 0.0);
        let plus = action(l, &cfg.add_scaled(e, pert.eta())?)?;
        let minus = action(l, &cfg.add_scaled(-e, pert.eta())?)?;
        Ok((plus - minus) / (2.0 * eps))
    };
    let d1 = central(opts.eps)?;
    if !opts.richardson {
        return Ok(d1);
    }
    let d2 = central(0.5 * opts.eps)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// `|dS[eta] - <R, eta>|` with the residual taken in `mode`.
pub fn consistency_defect(
    l: &dyn LagrangianDensity,
    cfg: &FieldConfiguration,
    pert: &PerturbationField,
    mode: AdjointMode,
    opts: GateauxOptions,
) -> Result<f64> {
    let g = gateaux_derivative_with(l, cfg, pert, opts)?;
    let r = el_residual(l, cfg, mode)?;
    let inner = r.weighted_dot(pert.eta())?;
    Ok((g - inner).norm())
}

/// [`consistency_defect`] in [`AdjointMode::DiscreteExact`] with Richardson
/// extrapolation at `eps = 1e-3`. Roundoff-sized for any smooth density.
pub fn variational_consistency(
    l: &dyn LagrangianDensity,
    cfg: &FieldConfiguration,
    pert: &PerturbationField,
) -> Result<f64> {
    consistency_defect(l, cfg, pert, AdjointMode::DiscreteExact, GateauxOptions::default())
}

/// Largest gap between the analytic partials of `l` at `p` and central
/// differences of `value` with step `step` (real direction).
pub fn check_partials(l: &dyn LagrangianDensity, p: &PointState, step: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    let eval = |fields: &[Complex64], left: &[Complex64], right: &[Complex64]| {
        l.value(&PointState { coords: p.coords, fields, left, right, axes: p.axes })
    };
    let nf = p.fields.len();
    for r in 0..nf {
        let mut f = p.fields.to_vec();
        f[r] = p.fields[r] + step;
        let up = eval(&f, p.left, p.right)?;
        f[r] = p.fields[r] - step;
        let down = eval(&f, p.left, p.right)?;
        worst = worst.max(((up - down) / (2.0 * step) - l.d_field(p, r)?).norm());
        for k in 0..p.axes {
            let c = r * p.axes + k;
            if l.left_order(k).is_some() {
                let mut s = p.left.to_vec();
                s[c] = p.left[c] + step;
                let up = eval(p.fields, &s, p.right)?;
                s[c] = p.left[c] - step;
                let down = eval(p.fields, &s, p.right)?;
                worst = worst.max(((up - down) / (2.0 * step) - l.d_left(p, r, k)?).norm());
            }
            if l.right_order(k).is_some() {
                let mut s = p.right.to_vec();
                s[c] = p.right[c] + step;
                let up = eval(p.fields, p.left, &s)?;
                s[c] = p.right[c] - step;
                let down = eval(p.fields, p.left, &s)?;
                worst = worst.max(((up - down) / (2.0 * step) - l.d_right(p, r, k)?).norm());
            }
        }
    }
    Ok(worst)
}

/// Solves the Euler-Lagrange equations at interior nodes for a density whose
/// residual is affine in the fields, keeping the boundary values of
/// `boundary`. The residual is probed once per unknown, so the cost grows like
/// `(fields * nodes)^2 * nodes`; meant for grids of a few hundred nodes.
///
/// Fails with [`FracError::Numerical`] if the result does not satisfy the
/// equations, which is what happens when the residual is not affine.
pub fn solve_dirichlet(
    l: &dyn LagrangianDensity,
    boundary: &FieldConfiguration,
    mode: AdjointMode,
) -> Result<FieldConfiguration> {
    check_shape(l, boundary)?;
    let grid = *boundary.grid();
    let interior: Vec<usize> = (0..grid.len()).filter(|&j| !grid.is_boundary(j)).collect();
    let nf = boundary.n_fields();
    let dim = nf * interior.len();
    let zero = Complex64::new(0.0, 0.0);

    let mut base: Vec<Vec<Complex64>> = boundary.fields().iter().map(|f| f.values().to_vec()).collect();
    for f in &mut base {
        for &j in &interior {
            f[j] = zero;
        }
    }
    let build = |vals: &[Vec<Complex64>]| -> Result<FieldConfiguration> {
        FieldConfiguration::new(vals.iter().map(|v| ComplexField::new(grid, v.clone())).collect::<Result<_>>()?)
    };
    let gather = |res: &FieldConfiguration| -> Vec<Complex64> {
        res.fields().iter().flat_map(|f| interior.iter().map(move |&j| f.values()[j])).collect()
    };
    let r0 = gather(&el_residual(l, &build(&base)?, mode)?);
    let mut jac = DMatrix::<Complex64>::zeros(dim, dim);
    for col in 0..dim {
        let (r, j) = (col / interior.len(), interior[col % interior.len()]);
        let mut probe = base.clone();
        probe[r][j] = Complex64::new(1.0, 0.0);
        let rc = gather(&el_residual(l, &build(&probe)?, mode)?);
        for (row, (a, b)) in rc.iter().zip(&r0).enumerate() {
            jac[(row, col)] = a - b;
        }
    }
    let rhs = DVector::from_iterator(dim, r0.iter().map(|v| -v));
    let sol = jac.lu().solve(&rhs).ok_or_else(|| FracError::Numerical("Euler-Lagrange system is singular".into()))?;
    for (idx, v) in sol.iter().enumerate() {
        base[idx / interior.len()][interior[idx % interior.len()]] = *v;
    }
    let out = build(&base)?;
    let res = el_residual(l, &out, mode)?;
    let scale = 1.0 + out.interior_max_abs() + r0.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let got = res.interior_max_abs();
    if got > 1e-8 * scale {
        return Err(FracError::Numerical(format!(
            "Dirichlet solve left an Euler-Lagrange residual of {got:e}; is the density quadratic?"
        )));
    }
    Ok(out)
}
