// Oracle literals are compared against std constants on purpose.
#![allow(clippy::approx_constant)]

use fracfield::densities::{parse_density, ComplexScalar, FracKinetic, TwoSided};
use fracfield::variational::{
    action, check_partials, classical_el_residual, consistency_defect, el_residual, gateaux_derivative,
    gateaux_derivative_with, solve_dirichlet, variational_consistency, GateauxOptions, PARTIALS_FD_STEP,
};
use fracfield::*;
use num_complex::Complex64;
use proptest::prelude::*;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn unit(n: usize) -> Grid1D {
    Grid1D::new(0.0, 1.0, n).unwrap()
}

fn cfg1(n: usize, f: impl Fn(f64) -> f64) -> FieldConfiguration {
    FieldConfiguration::from_real(vec![RealField::from_fn(unit(n), f).unwrap()]).unwrap()
}

fn bump(n: usize, fields: usize) -> PerturbationField {
    let g = unit(n);
    let f = ComplexField::from_fn(g, |x| c(x * (1.0 - x))).unwrap();
    PerturbationField::new(FieldConfiguration::new(vec![f; fields]).unwrap()).unwrap()
}

/// `L = k phi^2 / 2 + s phi`, no derivative slots.
struct Potential {
    k: f64,
    s: f64,
}

impl LagrangianDensity for Potential {
    fn n_fields(&self) -> usize {
        1
    }
    fn left_order(&self, _k: usize) -> Option<FractionalOrder> {
        None
    }
    fn value(&self, p: &PointState) -> Result<Complex64> {
        Ok(0.5 * self.k * p.fields[0] * p.fields[0] + self.s * p.fields[0])
    }
    fn d_field(&self, p: &PointState, _r: usize) -> Result<Complex64> {
        Ok(self.k * p.fields[0] + self.s)
    }
    fn d_left(&self, _p: &PointState, _r: usize, _k: usize) -> Result<Complex64> {
        Ok(ZERO)
    }
}

/// Sum of two one-field densities sharing the left order.
struct Sum<'a>(&'a dyn LagrangianDensity, &'a dyn LagrangianDensity);

impl LagrangianDensity for Sum<'_> {
    fn n_fields(&self) -> usize {
        1
    }
    fn left_order(&self, k: usize) -> Option<FractionalOrder> {
        self.0.left_order(k).or(self.1.left_order(k))
    }
    fn value(&self, p: &PointState) -> Result<Complex64> {
        Ok(self.0.value(p)? + self.1.value(p)?)
    }
    fn d_field(&self, p: &PointState, r: usize) -> Result<Complex64> {
        Ok(self.0.d_field(p, r)? + self.1.d_field(p, r)?)
    }
    fn d_left(&self, p: &PointState, r: usize, k: usize) -> Result<Complex64> {
        Ok(self.0.d_left(p, r, k)? + self.1.d_left(p, r, k)?)
    }
}

/// `L = (|C+_x phi|^2 + |C+_y phi|^2) / 2 + phi^4 / 4` on a 2D grid.
struct Kinetic2D(FractionalOrder, FractionalOrder);

impl LagrangianDensity for Kinetic2D {
    fn n_fields(&self) -> usize {
        1
    }
    fn axes(&self) -> usize {
        2
    }
    fn left_order(&self, k: usize) -> Option<FractionalOrder> {
        [self.0, self.1].get(k).copied()
    }
    fn value(&self, p: &PointState) -> Result<Complex64> {
        let (a, b, f) = (p.left(0, 0), p.left(0, 1), p.fields[0]);
        Ok(0.5 * (a * a + b * b) + 0.25 * f * f * f * f)
    }
    fn d_field(&self, p: &PointState, _r: usize) -> Result<Complex64> {
        Ok(p.fields[0] * p.fields[0] * p.fields[0])
    }
    fn d_left(&self, p: &PointState, _r: usize, k: usize) -> Result<Complex64> {
        Ok(p.left(0, k))
    }
}

/// Fails to evaluate right of `x = 0.5`.
struct Fragile;

impl LagrangianDensity for Fragile {
    fn n_fields(&self) -> usize {
        1
    }
    fn left_order(&self, _k: usize) -> Option<FractionalOrder> {
        None
    }
    fn value(&self, p: &PointState) -> Result<Complex64> {
        if p.coords[0] > 0.5 {
            return Err(FracError::Domain("log of a negative number".into()));
        }
        Ok(p.fields[0])
    }
    fn d_field(&self, _p: &PointState, _r: usize) -> Result<Complex64> {
        Ok(c(1.0))
    }
    fn d_left(&self, _p: &PointState, _r: usize, _k: usize) -> Result<Complex64> {
        Ok(ZERO)
    }
}

fn kinetic(a: f64, m: f64) -> FracKinetic {
    FracKinetic::new(order(a), m).unwrap()
}

#[test]
fn action_examples() {
    let half_sq = Potential { k: 1.0, s: 0.0 };
    let s = action(&half_sq, &cfg1(100, |_| 1.0)).unwrap();
    assert!((s - c(0.5)).norm() <= 1e-12);

    let s = action(&kinetic(0.5, 0.0), &cfg1(100, |_| 2.5)).unwrap();
    assert_eq!(s, c(0.0));

    // (2/sqrt(pi) sqrt(x))^2 / 2 integrates to 1/pi.
    let one_over_pi = std::f64::consts::FRAC_1_PI;
    assert!((one_over_pi - 0.318_309_9).abs() < 1e-7);
    let errs: Vec<f64> = [128usize, 512]
        .iter()
        .map(|&n| (action(&kinetic(0.5, 0.0), &cfg1(n, |x| x)).unwrap() - c(one_over_pi)).norm())
        .collect();
    assert!(errs.iter().all(|&e| e <= 4.0 / 128.0), "{errs:?}");
}

#[test]
fn action_is_additive() {
    let a = kinetic(0.6, 0.0);
    let b = Potential { k: -2.0, s: 0.7 };
    let cfg = cfg1(200, |x| (3.0 * x).sin() + x * x);
    let (sa, sb) = (action(&a, &cfg).unwrap(), action(&b, &cfg).unwrap());
    let sum = action(&Sum(&a, &b), &cfg).unwrap();
    assert!((sum - sa - sb).norm() <= 8.0 * f64::EPSILON * (sa.norm() + sb.norm()));

    // The residual is linear in the density too.
    for mode in [AdjointMode::DiscreteExact, AdjointMode::ContinuumFaithful] {
        let ra = el_residual(&a, &cfg, mode).unwrap();
        let rb = el_residual(&b, &cfg, mode).unwrap();
        let rs = el_residual(&Sum(&a, &b), &cfg, mode).unwrap();
        let scale = ra.max_abs() + rb.max_abs();
        let sum = ra.add_scaled(c(1.0), &rb).unwrap();
        let gap = rs.add_scaled(c(-1.0), &sum).unwrap().max_abs();
        assert!(gap <= 16.0 * f64::EPSILON * scale, "{mode:?}: {gap:e}");
    }
}

#[test]
fn el_residual_examples() {
    // L = -m^2 phi^2 / 2 with m = 1 gives R = -phi.
    let l = Potential { k: -1.0, s: 0.0 };
    let cfg = cfg1(64, |x| (2.0 * x).cos());
    for mode in [AdjointMode::DiscreteExact, AdjointMode::ContinuumFaithful] {
        let r = el_residual(&l, &cfg, mode).unwrap();
        for (rv, fv) in r.field(0).values().iter().zip(cfg.field(0).values()) {
            assert_eq!(*rv, -fv);
        }
    }

    // Discrete minimizer of the free kinetic density.
    let l = kinetic(0.5, 0.0);
    let boundary = cfg1(128, |x| if x == 1.0 { 1.0 } else { 0.0 });
    let sol = solve_dirichlet(&l, &boundary, AdjointMode::DiscreteExact).unwrap();
    let r = el_residual(&l, &sol, AdjointMode::DiscreteExact).unwrap();
    assert!(r.interior_max_abs() <= 1e-9, "{:e}", r.interior_max_abs());
}

/// `R(0.5)` for `L = (C+^0.5 phi)^2 / 2 - phi^2 / 2`, `phi = x`: the right RL
/// derivative of `2 sqrt(x / pi)` at 0.5, minus 0.5. Reference value from
/// adaptive quadrature of the defining integral in 30-digit arithmetic.
const R_HALF: f64 = -0.160_783_537_889_292_1;

#[test]
fn el_residual_against_quadrature_oracle() {
    let l = kinetic(0.5, 1.0);
    let at_half = |n: usize| {
        let r = el_residual(&l, &cfg1(n, |x| x), AdjointMode::ContinuumFaithful).unwrap();
        r.field(0).values()[n / 2].re
    };
    let errs: Vec<f64> = [128usize, 512, 2048].iter().map(|&n| (at_half(n) - R_HALF).abs()).collect();
    assert!(errs.windows(2).all(|w| w[1] < 0.5 * w[0]), "{errs:?}");
    assert!(errs[2] < 2e-3, "{errs:?}");
    // The fine-grid self-reference agrees with the quadrature oracle.
    assert!((at_half(8192) - R_HALF).abs() < 5e-4);
}

#[test]
fn gateaux_examples() {
    let n = 1024;
    let l = Potential { k: 1.0, s: 0.0 };
    let zero = PerturbationField::new(FieldConfiguration::zeros(unit(n), 1).unwrap()).unwrap();
    assert_eq!(gateaux_derivative(&l, &cfg1(n, |x| x), &zero, 1e-3).unwrap(), c(0.0));

    let sixth = 1.0 / 6.0;
    let d = gateaux_derivative(&l, &cfg1(n, |_| 1.0), &bump(n, 1), 1e-3).unwrap();
    assert!((d - c(sixth)).norm() <= 1e-6, "{d}");

    let linear = Potential { k: 0.0, s: 1.0 };
    for f in [|x: f64| x, |x: f64| (5.0 * x).exp()] {
        let d = gateaux_derivative(&linear, &cfg1(n, f), &bump(n, 1), 1e-4).unwrap();
        assert!((d - c(sixth)).norm() <= 1e-6);
    }

    assert!(gateaux_derivative(&l, &cfg1(n, |x| x), &bump(n, 1), 0.1).is_err());
    assert!(gateaux_derivative(&l, &cfg1(n, |x| x), &bump(n, 1), 1e-9).is_err());
}

#[test]
fn perturbation_must_vanish_on_boundary() {
    let f = ComplexField::from_fn(unit(16), c).unwrap();
    let err = PerturbationField::new(FieldConfiguration::new(vec![f]).unwrap());
    assert!(matches!(err, Err(FracError::Config(_))));
}

#[test]
fn consistency_examples() {
    let l = Potential { k: 1.0, s: 0.0 };
    assert!(variational_consistency(&l, &cfg1(256, |x| x.sin()), &bump(256, 1)).unwrap() <= 1e-10);

    let l = kinetic(0.5, 0.0);
    let cfg = cfg1(256, |x| x);
    let s = action(&l, &cfg).unwrap().norm();
    assert!(variational_consistency(&l, &cfg, &bump(256, 1)).unwrap() <= 1e-8 * (1.0 + s));
}

#[test]
fn continuum_faithful_defect_converges() {
    let l = kinetic(0.5, 0.0);
    let opts = GateauxOptions::default();
    let defects: Vec<f64> = [64usize, 128, 256, 512, 1024]
        .iter()
        .map(|&n| consistency_defect(&l, &cfg1(n, |x| x), &bump(n, 1), AdjointMode::ContinuumFaithful, opts).unwrap())
        .collect();
    let orders: Vec<f64> = defects.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    assert!(orders.iter().all(|&p| p >= 0.8), "defects {defects:?} orders {orders:?}");
}

#[test]
fn discrete_exact_consistency_for_catalog_densities() {
    let n = 128;
    let g = unit(n);
    let shapes = [|x: f64| (2.0 * x).sin() + 0.3, |x: f64| x * x - 0.5 * x, |x: f64| (x - 0.2).abs().sqrt(), |x: f64| 1.0 - x];
    for name in ["frac-kinetic:0.5", "frac-kinetic:0.3:2", "complex-scalar:0.7:1", "two-sided:0.4:0.9:1", "dirac:0.5", "dirac:1:2"] {
        let d = parse_density(name).unwrap();
        let nf = d.density.n_fields();
        let fields = (0..nf)
            .map(|r| ComplexField::from_fn(g, |x| Complex64::new(shapes[r](x), 0.2 * shapes[(r + 1) % 4](x))).unwrap())
            .collect();
        let cfg = FieldConfiguration::new(fields).unwrap();
        let eta = (0..nf)
            .map(|r| ComplexField::from_fn(g, |x| Complex64::new(x * (1.0 - x) * (1.0 + r as f64 * x), 0.1 * x * (1.0 - x))).unwrap())
            .collect();
        let pert = PerturbationField::new(FieldConfiguration::new(eta).unwrap()).unwrap();
        let s = action(d.density.as_ref(), &cfg).unwrap().norm();
        let defect = variational_consistency(d.density.as_ref(), &cfg, &pert).unwrap();
        assert!(defect <= 1e-8 * (1.0 + s), "{name}: {defect:e}");
    }
}

#[test]
fn consistency_on_a_2d_grid() {
    let g = Grid2D::new(Grid1D::new(0.0, 1.0, 24).unwrap(), Grid1D::new(-1.0, 1.0, 20).unwrap());
    let l = Kinetic2D(order(0.4), order(0.9));
    let n = g.len();
    let coords = |idx: usize| Grid::from(g).coords(idx);
    let phi: Vec<Complex64> = (0..n).map(|i| { let x = coords(i); c((x[0] * 2.0).sin() * x[1] + 0.5) }).collect();
    let eta: Vec<Complex64> = (0..n)
        .map(|i| {
            let x = coords(i);
            c(x[0] * (1.0 - x[0]) * (1.0 - x[1] * x[1]))
        })
        .collect();
    let cfg = FieldConfiguration::new(vec![ComplexField::new(g, phi).unwrap()]).unwrap();
    let pert = PerturbationField::new(FieldConfiguration::new(vec![ComplexField::new(g, eta).unwrap()]).unwrap()).unwrap();
    let s = action(&l, &cfg).unwrap().norm();
    assert!(variational_consistency(&l, &cfg, &pert).unwrap() <= 1e-8 * (1.0 + s));
}

#[test]
fn classical_reduction_at_order_one() {
    let n = 512;
    let h = 1.0 / n as f64;
    let f = |x: f64| (2.0 * x).sin() + x * x;
    for name in ["frac-kinetic:1:1.5", "complex-scalar:1:0.5", "two-sided:1:1:1", "dirac:1"] {
        let d = parse_density(name).unwrap();
        let nf = d.density.n_fields();
        let fields = (0..nf)
            .map(|r| ComplexField::from_fn(unit(n), |x| Complex64::new(f(x + 0.1 * r as f64), 0.3 * x)).unwrap())
            .collect();
        let cfg = FieldConfiguration::new(fields).unwrap();
        let classical = classical_el_residual(d.density.as_ref(), &cfg).unwrap();
        let frac = el_residual(d.density.as_ref(), &cfg, AdjointMode::ContinuumFaithful).unwrap();
        let scale = 1.0 + cfg.max_abs();
        // Nodes next to the boundary see the Caputo value at the left end
        // (zero by convention) and the one-sided classical stencil on the right.
        let diff = frac.add_scaled(c(-1.0), &classical).unwrap();
        let gap = diff
            .fields()
            .iter()
            .flat_map(|f| f.values()[2..n - 1].iter().map(|z| z.norm()))
            .fold(0.0, f64::max);
        assert!(gap <= 10.0 * h * scale, "{name}: {gap:e}");
    }
}

#[test]
fn sign_convention_free_kinetic_minimizers() {
    // The residual as written (all terms added) vanishes on minimizers of the
    // discrete action in both pairings.
    for mode in [AdjointMode::DiscreteExact, AdjointMode::ContinuumFaithful] {
        for a in [0.3, 0.7, 1.0] {
            let l = kinetic(a, 0.0);
            let boundary = cfg1(96, |x| if x == 0.0 { 0.5 } else if x == 1.0 { -1.0 } else { 0.0 });
            let sol = solve_dirichlet(&l, &boundary, mode).unwrap();
            assert!(el_residual(&l, &sol, mode).unwrap().interior_max_abs() <= 1e-9);
        }
    }
    // A discrete-exact minimizer really minimizes the action among perturbed configurations.
    let l = kinetic(0.6, 0.0);
    let boundary = cfg1(64, |x| if x == 1.0 { 1.0 } else { 0.0 });
    let sol = solve_dirichlet(&l, &boundary, AdjointMode::DiscreteExact).unwrap();
    let s0 = action(&l, &sol).unwrap().re;
    for eps in [1e-2, -1e-2, 1e-1] {
        let moved = sol.add_scaled(c(eps), bump(64, 1).eta()).unwrap();
        assert!(action(&l, &moved).unwrap().re > s0);
    }
}

#[test]
fn dirichlet_solve_rejects_nonlinear_residuals() {
    let g = Grid2D::new(Grid1D::new(0.0, 1.0, 6).unwrap(), Grid1D::new(0.0, 1.0, 6).unwrap());
    let boundary = FieldConfiguration::new(vec![ComplexField::new(g, vec![c(1.0); g.len()]).unwrap()]).unwrap();
    let err = solve_dirichlet(&Kinetic2D(order(0.5), order(0.5)), &boundary, AdjointMode::DiscreteExact);
    assert!(matches!(err, Err(FracError::Numerical(_))));
}

#[test]
fn evaluation_errors_carry_coordinates() {
    match action(&Fragile, &cfg1(8, |x| x)) {
        Err(FracError::Evaluation { coords, message }) => {
            assert_eq!(coords, vec![0.625]);
            assert!(message.contains("negative"));
        }
        other => panic!("expected an evaluation error, got {other:?}"),
    }
}

#[test]
fn shape_mismatches_are_structural() {
    let two = ComplexScalar::new(order(0.5), 1.0).unwrap();
    assert!(matches!(action(&two, &cfg1(8, |x| x)), Err(FracError::Structural(_))));
    let g = Grid2D::new(unit(4), unit(4));
    let cfg2 = FieldConfiguration::new(vec![ComplexField::zeros(g)]).unwrap();
    assert!(matches!(action(&kinetic(0.5, 0.0), &cfg2), Err(FracError::Structural(_))));
}

#[test]
fn partials_cross_check_detects_wrong_derivatives() {
    struct Wrong;
    impl LagrangianDensity for Wrong {
        fn n_fields(&self) -> usize {
            1
        }
        fn left_order(&self, _k: usize) -> Option<FractionalOrder> {
            Some(FractionalOrder::new(0.5).unwrap())
        }
        fn value(&self, p: &PointState) -> Result<Complex64> {
            Ok(p.left(0, 0) * p.left(0, 0))
        }
        fn d_field(&self, _p: &PointState, _r: usize) -> Result<Complex64> {
            Ok(ZERO)
        }
        fn d_left(&self, p: &PointState, _r: usize, _k: usize) -> Result<Complex64> {
            Ok(p.left(0, 0))
        }
    }
    let (f, l, r) = ([c(0.3)], [c(2.0)], [ZERO]);
    let p = PointState { coords: &[0.0], fields: &f, left: &l, right: &r, axes: 1 };
    assert!(check_partials(&Wrong, &p, PARTIALS_FD_STEP).unwrap() > 1.0);
    assert!(check_partials(&kinetic(0.5, 2.0), &p, PARTIALS_FD_STEP).unwrap() < 1e-8);
}

#[test]
fn richardson_improves_a_non_quadratic_action() {
    let g = Grid2D::new(Grid1D::new(0.0, 1.0, 10).unwrap(), Grid1D::new(0.0, 1.0, 10).unwrap());
    let l = Kinetic2D(order(0.5), order(0.5));
    let grid = Grid::from(g);
    let phi: Vec<Complex64> = (0..g.len()).map(|i| c(1.0 + grid.coords(i)[0])).collect();
    let eta: Vec<Complex64> = (0..g.len())
        .map(|i| if grid.is_boundary(i) { ZERO } else { c(1.0) })
        .collect();
    let cfg = FieldConfiguration::new(vec![ComplexField::new(g, phi).unwrap()]).unwrap();
    let pert = PerturbationField::new(FieldConfiguration::new(vec![ComplexField::new(g, eta).unwrap()]).unwrap()).unwrap();
    let exact = el_residual(&l, &cfg, AdjointMode::DiscreteExact).unwrap().weighted_dot(pert.eta()).unwrap();
    let plain = gateaux_derivative_with(&l, &cfg, &pert, GateauxOptions { eps: 1e-2, richardson: false }).unwrap();
    let rich = gateaux_derivative_with(&l, &cfg, &pert, GateauxOptions { eps: 1e-2, richardson: true }).unwrap();
    assert!((rich - exact).norm() < 1e-3 * (plain - exact).norm());
}

#[test]
fn two_sided_right_slot_enters_residual() {
    let l = TwoSided::new(order(0.5), order(0.5), 0.0).unwrap();
    let cfg = cfg1(64, |x| x * x);
    let both = el_residual(&l, &cfg, AdjointMode::ContinuumFaithful).unwrap();
    let left_only = el_residual(&kinetic(0.5, 0.0), &cfg, AdjointMode::ContinuumFaithful).unwrap();
    assert!(both.add_scaled(c(-1.0), &left_only).unwrap().interior_max_abs() > 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discrete_exact_identity_holds_for_random_data(
        a in 0.05f64..=1.0,
        m in 0.0f64..3.0,
        coeffs in proptest::collection::vec(-2.0f64..2.0, 6),
        n in 16usize..80,
    ) {
        let l = FracKinetic::new(order(a), m).unwrap();
        let cfg = cfg1(n, |x| coeffs[0] + coeffs[1] * x + coeffs[2] * (3.0 * x).sin());
        let g = unit(n);
        let eta = ComplexField::from_fn(g, |x| c(x * (1.0 - x) * (coeffs[3] + coeffs[4] * x + coeffs[5] * x * x))).unwrap();
        let pert = PerturbationField::new(FieldConfiguration::new(vec![eta]).unwrap()).unwrap();
        let s = action(&l, &cfg).unwrap().norm();
        let d = variational_consistency(&l, &cfg, &pert).unwrap();
        prop_assert!(d <= 1e-8 * (1.0 + s), "defect {:e}", d);
    }
}
