//! Bilinear fractional product operators, internal symmetry variations and the
//! pointwise Noether residual.
//!
//! `D+[f, g] = f (C+ g) - (Outer- f) g` and `D-[f, g] = f (C- g) - (Outer+ f) g`,
//! where the outer operator is the RL derivative of the opposite side
//! ([`AdjointMode::ContinuumFaithful`]) or the exact discrete adjoint of the
//! Caputo matrix ([`AdjointMode::DiscreteExact`]). At order 1 both reduce to the
//! product rule `d(fg)/dx` up to O(h).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{FracError, Result};
use crate::field::{ensure_same_grid, ComplexField, FieldSample, Scalar};
use crate::grid::Grid;
use crate::fracops::{adjoint_partial, apply_partial, centered_derivative, FractionalOperator, FractionalOrder, Side};
use crate::variational::{action, outer_left, outer_right, AdjointMode, FieldConfiguration, LagrangianDensity, Momenta};

/// Default `epsilon` for action-invariance checks.
pub const INVARIANCE_EPS: f64 = 1e-3;

/// First-order internal field variation; coordinates are not varied.
#[derive(Debug, Clone, PartialEq)]
pub enum SymmetryVariation {
    /// `delta phi_r = i eps sum_s lambda_rs phi_s`
    MatrixGenerator { lambda: DMatrix<Complex64>, epsilon: f64 },
    /// `delta phi = i eps phi`, `delta phi* = -i eps phi*` on each conjugate pair.
    Phase { epsilon: f64 },
    /// A precomputed `delta phi`.
    Explicit(FieldConfiguration),
}

/// Field variation `delta phi` of `cfg`. `pairs` lists the conjugate pairs
/// `(r, r*)` needed by [`SymmetryVariation::Phase`]; unpaired fields do not vary.
pub fn apply_variation(
    v: &SymmetryVariation,
    cfg: &FieldConfiguration,
    pairs: &[(usize, usize)],
) -> Result<FieldConfiguration> {
    let nf = cfg.n_fields();
    match v {
        SymmetryVariation::MatrixGenerator { lambda, epsilon } => {
            if lambda.nrows() != nf || lambda.ncols() != nf {
                return Err(FracError::Structural(format!(
                    "generator is {}x{} but the configuration has {nf} fields",
                    lambda.nrows(),
                    lambda.ncols()
                )));
            }
            let ie = Complex64::new(0.0, *epsilon);
            let fields = (0..nf)
                .map(|r| {
                    let mut acc = ComplexField::zeros(*cfg.grid());
                    for s in 0..nf {
                        let c = ie * lambda[(r, s)];
                        acc = acc.zip_with(cfg.field(s), |a, b| a + c * b)?;
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<_>>>()?;
            FieldConfiguration::new(fields)
        }
        SymmetryVariation::Phase { epsilon } => {
            if pairs.is_empty() {
                return Err(FracError::Config("phase variation needs a density with conjugate field pairs".into()));
            }
            let mut fields: Vec<ComplexField> = (0..nf).map(|_| ComplexField::zeros(*cfg.grid())).collect();
            let ie = Complex64::new(0.0, *epsilon);
            for &(r, rs) in pairs {
                if r >= nf || rs >= nf || r == rs {
                    return Err(FracError::Structural(format!("bad conjugate pair ({r}, {rs}) for {nf} fields")));
                }
                fields[r] = cfg.field(r).map(|z| ie * z);
                fields[rs] = cfg.field(rs).map(|z| -ie * z);
            }
            FieldConfiguration::new(fields)
        }
        SymmetryVariation::Explicit(d) => {
            if d.n_fields() != nf {
                return Err(FracError::Structural("explicit variation has the wrong number of fields".into()));
            }
            ensure_same_grid(d.grid(), cfg.grid())?;
            Ok(d.clone())
        }
    }
}

fn outer<T: Scalar>(f: &FieldSample<T>, axis: usize, alpha: FractionalOrder, side: Side, mode: AdjointMode) -> Result<FieldSample<T>> {
    match mode {
        AdjointMode::ContinuumFaithful => {
            apply_partial(f, axis, FractionalOperator::riemann_liouville(side.opposite(), alpha))
        }
        AdjointMode::DiscreteExact => adjoint_partial(f, axis, FractionalOperator::caputo(side, alpha)),
    }
}

/// `f (C g) - (Outer f) g` for a Caputo operator of the given side along `axis`.
pub fn bilinear<T: Scalar>(
    f: &FieldSample<T>,
    g: &FieldSample<T>,
    axis: usize,
    alpha: FractionalOrder,
    side: Side,
    mode: AdjointMode,
) -> Result<FieldSample<T>> {
    ensure_same_grid(f.grid(), g.grid())?;
    let cg = apply_partial(g, axis, FractionalOperator::caputo(side, alpha))?;
    let of = outer(f, axis, alpha, side, mode)?;
    let first = f.zip_with(&cg, |a, b| a * b)?;
    let second = of.zip_with(g, |a, b| a * b)?;
    first.zip_with(&second, |a, b| a - b)
}

/// `D+[f, g] = f (C+ g) - (RL- f) g` on a 1D grid.
pub fn bilinear_left<T: Scalar>(f: &FieldSample<T>, g: &FieldSample<T>, alpha: FractionalOrder) -> Result<FieldSample<T>> {
    f.grid().as_1d()?;
    bilinear(f, g, 0, alpha, Side::Left, AdjointMode::ContinuumFaithful)
}

/// `D-[f, g] = f (C- g) - (RL+ f) g` on a 1D grid.
pub fn bilinear_right<T: Scalar>(f: &FieldSample<T>, g: &FieldSample<T>, beta: FractionalOrder) -> Result<FieldSample<T>> {
    f.grid().as_1d()?;
    bilinear(f, g, 0, beta, Side::Right, AdjointMode::ContinuumFaithful)
}

/// Interior max of `|D+[f, g] - (fg)'|` at order 1, the derivative of the
/// product taken by centered differences.
pub fn classical_divergence_check<T: Scalar>(f: &FieldSample<T>, g: &FieldSample<T>) -> Result<f64> {
    let one = FractionalOrder::new(1.0)?;
    let d = bilinear_left(f, g, one)?;
    let prod = f.zip_with(g, |a, b| a * b)?;
    let c = centered_derivative(&prod)?;
    Ok(d.zip_with(&c, |a, b| a - b)?.interior_max_abs())
}

/// The two products one `(field, axis, side)` slot contributes before regrouping:
/// `p * C(dphi)` and `Outer(p) * dphi`.
#[derive(Debug, Clone)]
pub struct NoetherTerm {
    pub field: usize,
    pub axis: usize,
    pub side: Side,
    pub momentum_times_derivative: ComplexField,
    pub outer_momentum_times_variation: ComplexField,
}

/// Termwise form of the residual: for every active slot, the momentum
/// `p = dL/d(C phi_r)` times the Caputo derivative of `delta phi_r`, and the
/// outer derivative of `p` times `delta phi_r`.
pub fn noether_terms(
    l: &dyn LagrangianDensity,
    cfg: &FieldConfiguration,
    v: &SymmetryVariation,
    mode: AdjointMode,
) -> Result<Vec<NoetherTerm>> {
    let delta = apply_variation(v, cfg, &l.conjugate_pairs())?;
    let m = Momenta::new(l, cfg)?;
    let axes = l.axes();
    let mut out = Vec::new();
    for r in 0..cfg.n_fields() {
        let d = delta.field(r);
        for k in 0..axes {
            for (side, order) in [(Side::Left, l.left_order(k)), (Side::Right, l.right_order(k))] {
                let Some(a) = order else { continue };
                let p = match side {
                    Side::Left => &m.d_left[r * axes + k],
                    Side::Right => &m.d_right[r * axes + k],
                };
                let cd = apply_partial(d, k, FractionalOperator::caputo(side, a))?;
                let op = match side {
                    Side::Left => outer_left(p, k, a, mode)?,
                    Side::Right => outer_right(p, k, a, mode)?,
                };
                out.push(NoetherTerm {
                    field: r,
                    axis: k,
                    side,
                    momentum_times_derivative: p.zip_with(&cd, |x, y| x * y)?,
                    outer_momentum_times_variation: op.zip_with(d, |x, y| x * y)?,
                });
            }
        }
    }
    Ok(out)
}

/// Sum of [`noether_terms`], each slot contributing `first - second`.
pub fn assemble_terms(terms: &[NoetherTerm], grid: &Grid) -> Result<ComplexField> {
    let mut acc = ComplexField::zeros(*grid);
    for t in terms {
        let slot = t.momentum_times_derivative.zip_with(&t.outer_momentum_times_variation, |a, b| a - b)?;
        acc = acc.zip_with(&slot, |a, b| a + b)?;
    }
    Ok(acc)
}

/// Pointwise Noether residual
/// `sum_{k,r} D+_k[dL/d(C+ phi_r), delta phi_r] + D-_k[dL/d(C- phi_r), delta phi_r]`.
/// Vanishes at interior nodes on solutions of the Euler-Lagrange equations when
/// the action is invariant under `v`.
pub fn noether_residual(
    l: &dyn LagrangianDensity,
    cfg: &FieldConfiguration,
    v: &SymmetryVariation,
    mode: AdjointMode,
) -> Result<ComplexField> {
    let delta = apply_variation(v, cfg, &l.conjugate_pairs())?;
    let m = Momenta::new(l, cfg)?;
    let axes = l.axes();
    let mut acc = ComplexField::zeros(*cfg.grid());
    for r in 0..cfg.n_fields() {
        for k in 0..axes {
            if let Some(a) = l.left_order(k) {
                let t = bilinear(&m.d_left[r * axes + k], delta.field(r), k, a, Side::Left, mode)?;
                acc = acc.zip_with(&t, |x, y| x + y)?;
            }
            if let Some(b) = l.right_order(k) {
                let t = bilinear(&m.d_right[r * axes + k], delta.field(r), k, b, Side::Right, mode)?;
                acc = acc.zip_with(&t, |x, y| x + y)?;
            }
        }
    }
    Ok(acc)
}

/// Classical current along axis 0, `sum_r dL/d(phi_r') delta phi_r`, for
/// densities whose left slots see the first derivative at order 1.
pub fn classical_current(l: &dyn LagrangianDensity, cfg: &FieldConfiguration, v: &SymmetryVariation) -> Result<ComplexField> {
    let delta = apply_variation(v, cfg, &l.conjugate_pairs())?;
    let m = Momenta::new(l, cfg)?;
    let axes = l.axes();
    let mut acc = ComplexField::zeros(*cfg.grid());
    for r in 0..cfg.n_fields() {
        let t = m.d_left[r * axes].zip_with(delta.field(r), |a, b| a * b)?;
        acc = acc.zip_with(&t, |a, b| a + b)?;
    }
    Ok(acc)
}

/// `|S(phi + delta phi) - S(phi)|`. Of order `eps^2` when the action is invariant.
pub fn action_invariance_defect(l: &dyn LagrangianDensity, cfg: &FieldConfiguration, v: &SymmetryVariation) -> Result<f64> {
    let delta = apply_variation(v, cfg, &l.conjugate_pairs())?;
    let moved = cfg.add_scaled(Complex64::new(1.0, 0.0), &delta)?;
    Ok((action(l, &moved)? - action(l, cfg)?).norm())
}

/// `v` with its `epsilon` replaced. Explicit variations are returned unchanged.
pub fn with_epsilon(v: &SymmetryVariation, epsilon: f64) -> SymmetryVariation {
    match v {
        SymmetryVariation::MatrixGenerator { lambda, .. } => {
            SymmetryVariation::MatrixGenerator { lambda: lambda.clone(), epsilon }
        }
        SymmetryVariation::Phase { .. } => SymmetryVariation::Phase { epsilon },
        SymmetryVariation::Explicit(d) => SymmetryVariation::Explicit(d.clone()),
    }
}
