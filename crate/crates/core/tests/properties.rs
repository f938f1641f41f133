//! Property tests over the discretization, models, spectra and reduction.

use metastable::grid::{
    derivative, inner_product, norm, BoundaryTreatment, Grid1D, GridFunction, NormKind, Order,
};
use metastable::models::{burgers_rhs, jinxin_rhs, BurgersModel, JinXinModel, Model, State};
use metastable::reduction::{project_xi, ReductionContext};
use metastable::spectral::{eigenpairs, jinxin_eigen_map, JinXinEigen, LinearizedOperator};
use metastable::steady::eval_profile;
use proptest::prelude::*;

fn field(grid: Grid1D, vals: &[f64]) -> GridFunction {
    GridFunction::new(grid, vals.to_vec()).unwrap()
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_symmetric_and_bilinear(f in values(33), g in values(33), k in values(33), a in -5.0..5.0f64) {
        let grid = Grid1D::new(-1.0, 1.0, 31).unwrap();
        let (f, g, k) = (field(grid, &f), field(grid, &g), field(grid, &k));
        let fg = inner_product(&f, &g).unwrap();
        prop_assert_eq!(fg, inner_product(&g, &f).unwrap());
        let mut af_k = f.clone();
        af_k.scale(a);
        af_k.axpy(1.0, &k);
        let lhs = inner_product(&af_k, &g).unwrap();
        let rhs = a * fg + inner_product(&k, &g).unwrap();
        let scale = 1.0 + lhs.abs().max(rhs.abs()) + (a * fg).abs();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale);
    }

    #[test]
    fn l2_norm_is_the_root_of_the_inner_product(f in values(41)) {
        let grid = Grid1D::new(-2.0, 3.0, 39).unwrap();
        let f = field(grid, &f);
        prop_assert_eq!(norm(&f, NormKind::L2), inner_product(&f, &f).unwrap().sqrt());
    }

    #[test]
    fn second_difference_is_exact_on_quadratics(c0 in -5.0..5.0f64, c1 in -5.0..5.0f64, c2 in -5.0..5.0f64) {
        let grid = Grid1D::new(-1.0, 1.0, 49).unwrap();
        let f = grid.sample(|x| c0 + c1 * x + c2 * x * x);
        let d = derivative(&f, Order::Second, BoundaryTreatment::OneSided);
        // rounding in u_{i±1} − 2u_i is amplified by 1/h²
        let tol = 1e-11 * (1.0 + c0.abs() + c1.abs() + c2.abs());
        for &v in d.interior() {
            prop_assert!((v - 2.0 * c2).abs() <= tol, "{} vs {}", v, 2.0 * c2);
        }
    }

    #[test]
    fn jinxin_transport_conserves_mass_for_matching_end_fluxes(u in values(31), v in values(30), ve in -3.0..3.0f64) {
        let m = JinXinModel::standard(0.1, 1.0, 1.0).unwrap();
        let grid = Grid1D::new(-1.0, 1.0, 31).unwrap();
        let mut uv = vec![1.0];
        uv.extend(u);
        uv.push(-1.0);
        let mut vv = v;
        vv.insert(0, ve);
        vv.push(ve);
        let State::JinXin { u: du, .. } = jinxin_rhs(&State::JinXin { u: field(grid, &uv), v: vv }, &m).unwrap() else {
            unreachable!()
        };
        let total: f64 = du.values().iter().sum::<f64>() * grid.h();
        let size: f64 = du.values().iter().map(|x| x.abs()).sum::<f64>() * grid.h();
        prop_assert!(total.abs() <= 1e-12 * (1.0 + size));
    }

    #[test]
    fn eigen_map_inverts_the_relaxation_dispersion(s in 0.0..1.0f64, eps in 0.01..0.2f64) {
        // principal branch: λ > −1/(2ε)
        let lambda = -s / (2.0 * eps) * 0.999;
        let vsc = lambda * (1.0 + eps * lambda);
        let JinXinEigen::Real(back) = jinxin_eigen_map(vsc, eps) else {
            return Err(TestCaseError::fail("complex image on the real branch"));
        };
        prop_assert!((back - lambda).abs() <= 1e-12 * (1.0 + lambda.abs()));
    }

    #[test]
    fn tanh_steady_state_residual_is_second_order(kappa in 0.5..1.5f64, eps in 0.08..0.2f64) {
        let ell = 1.0;
        let u_star = kappa * (kappa * ell / (2.0 * eps)).tanh();
        let m = BurgersModel::new(eps, ell, u_star).unwrap();
        let res = |n: usize| {
            let g = Grid1D::new(-ell, ell, n).unwrap();
            let mut u = g.sample(|x| -kappa * (kappa * x / (2.0 * eps)).tanh());
            let last = u.values().len() - 1;
            u.values_mut()[0] = u_star;
            u.values_mut()[last] = -u_star;
            norm(&burgers_rhs(&u, &m).unwrap(), NormKind::Linf)
        };
        let (coarse, fine) = (res(199), res(399));
        prop_assert!(coarse / fine > 3.5, "ratio {}", coarse / fine);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn projection_recovers_the_profile_position(xi in -0.4..0.4f64) {
        let m = Model::Burgers(BurgersModel::new(0.1, 1.0, 1.0).unwrap());
        let g = m.default_grid(199).unwrap();
        let ctx = ReductionContext::with_default_interval(m, g).unwrap();
        let u = eval_profile(xi, &m, &g).unwrap().u;
        let found = project_xi(&u, xi + 0.02, &ctx).unwrap();
        prop_assert!((found - xi).abs() < 1e-8, "{} vs {}", found, xi);
        let again = project_xi(&u, found, &ctx).unwrap();
        prop_assert!((again - found).abs() < 1e-10);
    }
}

#[test]
fn trapezoid_and_centered_differences_are_second_order() {
    let err = |n: usize| {
        let g = Grid1D::new(0.0, 1.0, n).unwrap();
        let f = g.sample(|x| (3.0 * x).sin());
        let one = g.sample(|_| 1.0);
        let quad = (inner_product(&f, &one).unwrap() - (1.0 - 3f64.cos()) / 3.0).abs();
        let d = derivative(&f, Order::First, BoundaryTreatment::OneSided);
        let exact = g.sample(|x| 3.0 * (3.0 * x).cos());
        let diff: Vec<f64> = d
            .interior()
            .iter()
            .zip(exact.interior())
            .map(|(a, b)| (a - b).abs())
            .collect();
        (quad, diff.iter().cloned().fold(0.0, f64::max))
    };
    let (q1, d1) = err(49);
    let (q2, d2) = err(99);
    assert!(
        (q1 / q2).log2() >= 1.9,
        "quadrature order {}",
        (q1 / q2).log2()
    );
    assert!(
        (d1 / d2).log2() >= 1.9,
        "difference order {}",
        (d1 / d2).log2()
    );
}

#[test]
fn leading_eigenvalues_are_stable_under_refinement() {
    // base grids resolve the layer with h ≤ ε/40
    for (eps, n) in [(0.05, 1599), (0.1, 799)] {
        let m = Model::Burgers(BurgersModel::new(eps, 1.0, 1.0).unwrap());
        let l = |n: usize| {
            let g = m.default_grid(n).unwrap();
            eigenpairs(&LinearizedOperator::assemble(-0.2, &m, &g).unwrap(), 5)
                .unwrap()
                .lambda
        };
        let (a, b) = (l(n), l(2 * n + 1));
        for k in 0..5 {
            let drift = ((a[k] - b[k]) / b[k]).abs();
            assert!(drift < 1e-3, "eps {eps} k {k} drift {drift}");
        }
    }
}
