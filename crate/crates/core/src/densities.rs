//! Built-in Lagrangian densities and the named catalog used by the CLI.
//!
//! Catalog names: `frac-kinetic:<alpha>[:<m>]`, `complex-scalar:<alpha>[:<m>]`,
//! `two-sided:<alpha>:<beta>[:<m>]` and `dirac:<alpha>[:<m>]`. The mass defaults
//! to 0 for the scalar densities and to 1 for the Dirac density.

use num_complex::Complex64;

use crate::dirac::{make_gamma, DiracDensity};
use crate::error::{FracError, Result};
use crate::fracops::FractionalOrder;
use crate::variational::{LagrangianDensity, PointState};

fn check_mass(m: f64) -> Result<f64> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(FracError::Config(format!("mass must be finite and nonnegative, got {m}")));
    }
    Ok(m)
}

/// Real scalar with `L = (C+ phi)^2 / 2 - m^2 phi^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracKinetic {
    alpha: FractionalOrder,
    m: f64,
}

impl FracKinetic {
    pub fn new(alpha: FractionalOrder, m: f64) -> Result<Self> {
        Ok(Self { alpha, m: check_mass(m)? })
    }
}

impl LagrangianDensity for FracKinetic {
    fn n_fields(&self) -> usize {
        1
    }

    fn left_order(&self, _k: usize) -> Option<FractionalOrder> {
        Some(self.alpha)
    }

    fn value(&self, p: &PointState) -> Result<Complex64> {
        let (phi, d) = (p.fields[0], p.left(0, 0));
        Ok(0.5 * d * d - 0.5 * self.m * self.m * phi * phi)
    }

    fn d_field(&self, p: &PointState, _r: usize) -> Result<Complex64> {
        Ok(-self.m * self.m * p.fields[0])
    }

    fn d_left(&self, p: &PointState, _r: usize, _k: usize) -> Result<Complex64> {
        Ok(p.left(0, 0))
    }
}

/// Complex scalar as the pair `[phi, phi*]`:
/// `L = (C+ phi*)(C+ phi) - m^2 phi* phi`. Invariant under `phi -> e^{i theta} phi`,
/// `phi* -> e^{-i theta} phi*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexScalar {
    alpha: FractionalOrder,
    m: f64,
}

impl ComplexScalar {
    pub fn new(alpha: FractionalOrder, m: f64) -> Result<Self> {
        Ok(Self { alpha, m: check_mass(m)? })
    }
}

impl LagrangianDensity for ComplexScalar {
    fn n_fields(&self) -> usize {
        2
    }

    fn left_order(&self, _k: usize) -> Option<FractionalOrder> {
        Some(self.alpha)
    }

    fn value(&self, p: &PointState) -> Result<Complex64> {
        let m2 = self.m * self.m;
        Ok(p.left(1, 0) * p.left(0, 0) - m2 * p.fields[1] * p.fields[0])
    }

    fn d_field(&self, p: &PointState, r: usize) -> Result<Complex64> {
        Ok(-self.m * self.m * p.fields[1 - r])
    }

    fn d_left(&self, p: &PointState, r: usize, _k: usize) -> Result<Complex64> {
        Ok(p.left(1 - r, 0))
    }

    fn conjugate_pairs(&self) -> Vec<(usize, usize)> {
        vec![(0, 1)]
    }
}

/// Real scalar using both derivative sides:
/// `L = (C+ phi)^2 / 2 + (C- phi)^2 / 2 - m^2 phi^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSided {
    alpha: FractionalOrder,
    beta: FractionalOrder,
    m: f64,
}

impl TwoSided {
    pub fn new(alpha: FractionalOrder, beta: FractionalOrder, m: f64) -> Result<Self> {
        Ok(Self { alpha, beta, m: check_mass(m)? })
    }
}

impl LagrangianDensity for TwoSided {
    fn n_fields(&self) -> usize {
        1
    }

    fn left_order(&self, _k: usize) -> Option<FractionalOrder> {
        Some(self.alpha)
    }

    fn right_order(&self, _k: usize) -> Option<FractionalOrder> {
        Some(self.beta)
    }

    fn value(&self, p: &PointState) -> Result<Complex64> {
        let (phi, l, r) = (p.fields[0], p.left(0, 0), p.right(0, 0));
        Ok(0.5 * (l * l + r * r) - 0.5 * self.m * self.m * phi * phi)
    }

    fn d_field(&self, p: &PointState, _r: usize) -> Result<Complex64> {
        Ok(-self.m * self.m * p.fields[0])
    }

    fn d_left(&self, p: &PointState, _r: usize, _k: usize) -> Result<Complex64> {
        Ok(p.left(0, 0))
    }

    fn d_right(&self, p: &PointState, _r: usize, _k: usize) -> Result<Complex64> {
        Ok(p.right(0, 0))
    }
}

/// A catalog density together with the name it was parsed from.
pub struct CatalogDensity {
    pub name: String,
    pub alpha: FractionalOrder,
    pub density: Box<dyn LagrangianDensity>,
}

impl std::fmt::Debug for CatalogDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogDensity").field("name", &self.name).field("alpha", &self.alpha).finish()
    }
}

/// Family names known to [`parse_density`].
pub const CATALOG: [&str; 4] = ["frac-kinetic", "complex-scalar", "two-sided", "dirac"];

fn number(part: Option<&str>, what: &str, spec: &str) -> Result<Option<f64>> {
    part.map(|s| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| FracError::Config(format!("bad {what} '{s}' in density '{spec}'")))
    })
    .transpose()
}

/// Parses a catalog name such as `complex-scalar:0.5` or `frac-kinetic:0.5:2`.
pub fn parse_density(spec: &str) -> Result<CatalogDensity> {
    let mut parts = spec.split(':');
    let family = parts.next().unwrap_or_default();
    let alpha = number(parts.next(), "order", spec)?
        .ok_or_else(|| FracError::Config(format!("density '{spec}' needs an order, e.g. {family}:0.5")))?;
    let alpha = FractionalOrder::new(alpha)?;
    let density: Box<dyn LagrangianDensity> = match family {
        "frac-kinetic" => Box::new(FracKinetic::new(alpha, number(parts.next(), "mass", spec)?.unwrap_or(0.0))?),
        "complex-scalar" => Box::new(ComplexScalar::new(alpha, number(parts.next(), "mass", spec)?.unwrap_or(0.0))?),
        "two-sided" => {
            let beta = number(parts.next(), "order", spec)?
                .ok_or_else(|| FracError::Config(format!("density '{spec}' needs two orders, e.g. two-sided:0.5:0.7")))?;
            let m = number(parts.next(), "mass", spec)?.unwrap_or(0.0);
            Box::new(TwoSided::new(alpha, FractionalOrder::new(beta)?, m)?)
        }
        "dirac" => {
            let m = number(parts.next(), "mass", spec)?.unwrap_or(1.0);
            Box::new(DiracDensity::new(alpha, m, make_gamma(1)?)?)
        }
        other => {
            return Err(FracError::Config(format!(
                "unknown density '{other}'; known: {}",
                CATALOG.join(", ")
            )))
        }
    };
    if parts.next().is_some() {
        return Err(FracError::Config(format!("too many parameters in density '{spec}'")));
    }
    Ok(CatalogDensity { name: spec.to_string(), alpha, density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::{check_partials, PARTIALS_FD_STEP};

    fn point<'a>(fields: &'a [Complex64], left: &'a [Complex64], right: &'a [Complex64]) -> PointState<'a> {
        PointState { coords: &[0.3], fields, left, right, axes: 1 }
    }

    #[test]
    fn analytic_partials_match_finite_differences() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let fields = [c(0.7, -0.2), c(-1.1, 0.4), c(0.3, 0.9), c(-0.5, 0.1)];
        let left = [c(1.3, 0.5), c(-0.8, 0.2), c(0.6, -0.7), c(0.2, 0.2)];
        let right = [c(-0.4, 0.3), c(0.9, 0.0), c(0.0, 0.1), c(0.5, -0.5)];
        for name in ["frac-kinetic:0.5:1.5", "complex-scalar:0.4:2", "two-sided:0.3:0.8:0.7", "dirac:0.6:1.3"] {
            let d = parse_density(name).unwrap();
            let n = d.density.n_fields();
            let p = point(&fields[..n], &left[..n], &right[..n]);
            let gap = check_partials(d.density.as_ref(), &p, PARTIALS_FD_STEP).unwrap();
            assert!(gap < 1e-8, "{name}: {gap}");
        }
    }

    #[test]
    fn catalog_rejects_bad_names() {
        for bad in ["", "frac-kinetic", "frac-kinetic:1.5", "complex-scalar:x", "two-sided:0.5", "nope:0.5", "dirac:0.5:1:2"] {
            assert!(matches!(parse_density(bad), Err(FracError::Config(_))), "{bad}");
        }
        assert!(parse_density("frac-kinetic:0.5:-1").is_err());
    }
}
