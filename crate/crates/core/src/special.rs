//! Gamma and Mittag-Leffler functions.
//!
//! Mittag-Leffler values come from the power series
//! `E_{a,b}(z) = sum_k z^k / Gamma(a k + b)` with compensated summation.
//! Arguments for which the series loses too many digits to cancellation are
//! rejected with [`FracError::Range`] instead of returning an inaccurate value.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{FracError, Result};
use crate::numeric::{ComplexSum, NeumaierSum};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest argument whose Gamma value is representable as `f64`.
const GAMMA_MAX_ARG: f64 = 171.6;

/// Largest `|z|` accepted by the Mittag-Leffler evaluators.
pub const ML_MAX_ABS_Z: f64 = 50.0;
/// Accuracy target the cancellation guard enforces, relative to `max(1, |E|)`.
pub const ML_TOLERANCE: f64 = 1e-10;
/// Default cap on the number of series terms.
pub const ML_DEFAULT_TERMS: usize = 4000;
const ML_MAX_DIM: usize = 8;

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Gamma function on the real line, excluding the poles `0, -1, -2, ...`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(FracError::Domain(format!("gamma of non-finite argument {x}")));
    }
    if is_pole(x) {
        return Err(FracError::Domain(format!("gamma has a pole at {x}")));
    }
    if x > GAMMA_MAX_ARG {
        return Err(FracError::Range(format!("gamma({x}) overflows f64")));
    }
    if x == x.floor() && x <= 23.0 {
        // Exact factorial for small positive integers.
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return Ok(acc);
    }
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin();
        return Ok(std::f64::consts::PI / (s * lanczos(1.0 - x)));
    }
    Ok(lanczos(x))
}

fn lanczos(x: f64) -> f64 {
    let x = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    // Split the power so t^(x + 1/2) cannot overflow before exp(-t) is applied.
    let half = t.powf(0.5 * (x + 0.5));
    (2.0 * std::f64::consts::PI).sqrt() * half * ((-t).exp() * half) * acc
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 || x.is_infinite() {
        return Err(FracError::Domain(format!("ln_gamma needs a positive finite argument, got {x}")));
    }
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin();
        return Ok(std::f64::consts::PI.ln() - s.ln() - ln_gamma(1.0 - x)?);
    }
    let y = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (y + i as f64);
    }
    let t = y + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + (y + 0.5) * t.ln() - t + acc.ln())
}

/// `1 / Gamma(x)` for `x > 0`, switching to logarithms past the overflow point.
fn recip_gamma(x: f64) -> Result<f64> {
    if x <= GAMMA_MAX_ARG {
        Ok(1.0 / gamma_fn(x)?)
    } else {
        Ok((-ln_gamma(x)?).exp())
    }
}

/// Parameters of the two-parameter family `E_{alpha, beta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MittagLefflerParams {
    alpha: f64,
    beta: f64,
}

impl MittagLefflerParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(FracError::Config(format!(
                "Mittag-Leffler parameters must be positive, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `E_{alpha, beta}(z)` with the default term budget.
pub fn mittag_leffler(params: MittagLefflerParams, z: Complex64) -> Result<Complex64> {
    mittag_leffler_with_budget(params, z, ML_DEFAULT_TERMS)
}

/// `E_{alpha, beta}(z)` summing at most `max_terms` series terms.
pub fn mittag_leffler_with_budget(params: MittagLefflerParams, z: Complex64, max_terms: usize) -> Result<Complex64> {
    let r = z.norm();
    if !r.is_finite() || r > ML_MAX_ABS_Z {
        return Err(FracError::Range(format!("|z| = {r} exceeds the supported Mittag-Leffler domain |z| <= {ML_MAX_ABS_Z}")));
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let mut sum = ComplexSum::default();
    let mut mass = NeumaierSum::default();
    let mut zpow = Complex64::new(1.0, 0.0);
    let mut prev = f64::INFINITY;
    let (ln_r, theta) = (r.ln(), z.arg());
    for k in 0..max_terms {
        let arg = alpha * k as f64 + beta;
        let term = if zpow.norm() < 1e300 && arg <= GAMMA_MAX_ARG {
            zpow * recip_gamma(arg)?
        } else {
            let kf = k as f64;
            let mag = (kf * ln_r - ln_gamma(arg)?).exp();
            Complex64::from_polar(mag, kf * theta)
        };
        let size = term.norm();
        sum.add(term);
        mass.add(size);
        let total = sum.value().norm();
        if size <= prev && (size <= 1e-16 * total || size < 1e-300) {
            return check_cancellation(sum.value(), mass.value());
        }
        prev = size;
        zpow *= z;
    }
    Err(FracError::Range(format!(
        "Mittag-Leffler series for alpha = {alpha}, |z| = {r} did not converge within {max_terms} terms"
    )))
}

fn check_cancellation(value: Complex64, mass: f64) -> Result<Complex64> {
    let estimate = 4.0 * f64::EPSILON * mass;
    if estimate > ML_TOLERANCE * value.norm().max(1.0) {
        return Err(FracError::Range(format!(
            "Mittag-Leffler series cancels too strongly (term mass {mass:e}, value {:e}); argument too large for series evaluation",
            value.norm()
        )));
    }
    Ok(value)
}

/// Matrix Mittag-Leffler function `sum_k A^k / Gamma(alpha k + beta)`.
pub fn mittag_leffler_matrix(params: MittagLefflerParams, a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    mittag_leffler_matrix_with_budget(params, a, ML_DEFAULT_TERMS)
}

pub fn mittag_leffler_matrix_with_budget(
    params: MittagLefflerParams,
    a: &DMatrix<Complex64>,
    max_terms: usize,
) -> Result<DMatrix<Complex64>> {
    let d = a.nrows();
    if d != a.ncols() {
        return Err(FracError::Structural(format!("matrix Mittag-Leffler needs a square matrix, got {}x{}", d, a.ncols())));
    }
    if d == 0 || d > ML_MAX_DIM {
        return Err(FracError::Structural(format!("matrix dimension {d} outside 1..={ML_MAX_DIM}")));
    }
    if a.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(FracError::Structural("matrix has non-finite entries".into()));
    }
    // Induced infinity norm bounds the spectral radius.
    let norm = (0..d).map(|i| (0..d).map(|j| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    if norm > ML_MAX_ABS_Z {
        return Err(FracError::Range(format!(
            "matrix norm {norm} exceeds the supported Mittag-Leffler domain {ML_MAX_ABS_Z}"
        )));
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let mut sums = vec![ComplexSum::default(); d * d];
    let mut mass = NeumaierSum::default();
    let mut power = DMatrix::<Complex64>::identity(d, d);
    let mut prev = f64::INFINITY;
    for k in 0..max_terms {
        let arg = alpha * k as f64 + beta;
        let scale = recip_gamma(arg)?;
        let term = &power * Complex64::new(scale, 0.0);
        let size = term.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        for (s, v) in sums.iter_mut().zip(term.iter()) {
            s.add(*v);
        }
        mass.add(size);
        let total = sums.iter().fold(0.0f64, |m, s| m.max(s.value().norm()));
        if size <= prev && (size <= 1e-16 * total || size < 1e-300) {
            let out = DMatrix::from_iterator(d, d, sums.iter().map(|s| s.value()));
            let peak = out.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            check_cancellation(Complex64::new(peak, 0.0), mass.value() * d as f64)?;
            return Ok(out);
        }
        prev = size;
        power = &power * a;
        if power.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            break;
        }
    }
    Err(FracError::Range(format!(
        "matrix Mittag-Leffler series for alpha = {alpha} did not converge within {max_terms} terms"
    )))
}
