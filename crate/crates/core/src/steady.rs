//! Matched two-branch tanh profiles `U(x; ξ)` and their companions.
//!
//! Left of the layer `U = κ₋ tanh(κ₋(ξ − x)/2ε)`, right of it
//! `U = κ₊ tanh(κ₊(ξ − x)/2ε)`. The amplitudes are found through the
//! excess `δ = κ − u*`, which stays accurate when it is exponentially small.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};
use crate::models::{LayerParams, Model};

/// Signed number stored as `sign · exp(log_abs)`, for quantities that
/// underflow in double precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScalar {
    pub sign: f64,
    pub log_abs: f64,
}

impl LogScalar {
    pub fn zero() -> Self {
        Self {
            sign: 0.0,
            log_abs: f64::NEG_INFINITY,
        }
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }
}

/// Layers closer than this many ε to the boundary are refused.
pub const MARGIN_EPSILONS: f64 = 4.0;

pub fn margin(p: &LayerParams) -> f64 {
    MARGIN_EPSILONS * p.epsilon
}

pub(crate) fn check_margin(xi: f64, p: &LayerParams) -> Result<()> {
    let m = margin(p);
    if !xi.is_finite() || xi <= -p.ell + m || xi >= p.ell - m {
        return Err(Error::LayerAtBoundary { xi, margin: m });
    }
    Ok(())
}

/// `2/(e^{y} + 1)` without overflow.
fn two_over_exp_plus_one(y: f64) -> f64 {
    if y > 0.0 {
        let e = (-y).exp();
        2.0 * e / (1.0 + e)
    } else {
        2.0 / (y.exp() + 1.0)
    }
}

/// Excess `δ = κ − u*` of the root of `κ tanh(κL/2ε) = u*`.
fn solve_excess(length: f64, p: &LayerParams) -> Result<f64> {
    let us = p.u_star;
    if us == 0.0 {
        return Ok(0.0);
    }
    let eps = p.epsilon;
    // g(δ) = δ − 2(u*+δ)/(e^{(u*+δ)L/ε} + 1); increasing, g(0) < 0
    let g = |d: f64| d - (us + d) * two_over_exp_plus_one((us + d) * length / eps);
    let dg = |d: f64| {
        let k = us + d;
        let y = k * length / eps;
        let t = two_over_exp_plus_one(y);
        // d/dδ of k·t: t + k·t'(y)·L/ε with t'(y) = −t²e^{y}/2 = −t(1 − t/2)
        1.0 - (t - k * t * (1.0 - 0.5 * t) * length / eps)
    };
    let mut lo = 0.0;
    let mut hi = us.max(1.0);
    let mut grow = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::RootFailure("no bracket for branch amplitude".into()));
        }
    }
    let mut d = (2.0 * us * (-us * length / eps).exp()).clamp(lo, hi);
    for _ in 0..200 {
        let gv = g(d);
        if gv == 0.0 {
            return Ok(d);
        }
        if gv < 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        let mut next = d - gv / dg(d);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let scale = us + d;
        if (next - d).abs() <= 4.0 * f64::EPSILON * scale.max(d.abs()) * 1e-3 + f64::MIN_POSITIVE
            || (next - d).abs() <= 1e-18 * scale
        {
            return Ok(next);
        }
        if hi - lo <= 1e-17 * scale {
            return Ok(next);
        }
        d = next;
    }
    let k = us + d;
    let resid = k * (k * length / (2.0 * eps)).tanh() - us;
    if resid.abs() < 1e-13 * us.max(1.0) {
        Ok(d)
    } else {
        Err(Error::RootFailure(format!(
            "branch amplitude did not converge (residual {resid:e})"
        )))
    }
}

/// Excesses `(κ₋ − u*, κ₊ − u*)`.
pub fn solve_excesses(xi: f64, p: &LayerParams) -> Result<(f64, f64)> {
    check_margin(xi, p)?;
    Ok((solve_excess(p.ell + xi, p)?, solve_excess(p.ell - xi, p)?))
}

/// Branch amplitudes `(κ₋, κ₊)`.
pub fn solve_kappas(xi: f64, p: &LayerParams) -> Result<(f64, f64)> {
    let (dm, dp) = solve_excesses(xi, p)?;
    Ok((p.u_star + dm, p.u_star + dp))
}

/// `[[∂ₓU]]` at `x = ξ`, i.e. `(κ₋² − κ₊²)/2ε`.
pub fn derivative_jump(xi: f64, p: &LayerParams) -> Result<f64> {
    let (dm, dp) = solve_excesses(xi, p)?;
    Ok((dm - dp) * (2.0 * p.u_star + dm + dp) / (2.0 * p.epsilon))
}

/// `(4u*²/ε)|sinh(u*ξ/ε)| e^{−u*ℓ/ε}` in log form.
pub fn omega_asymptotic(xi: f64, p: &LayerParams) -> LogScalar {
    let y = (p.u_star * xi / p.epsilon).abs();
    if y == 0.0 || p.u_star == 0.0 {
        return LogScalar::zero();
    }
    let log_sinh = y + (-(-2.0 * y).exp_m1()).ln() - std::f64::consts::LN_2;
    LogScalar {
        sign: 1.0,
        log_abs: (4.0 * p.u_star * p.u_star / p.epsilon).ln() + log_sinh
            - p.u_star * p.ell / p.epsilon,
    }
}

/// Residual bound per component: `(0, Ω)` for Jin-Xin, `(Ω,)` for Burgers.
pub fn omega_components(xi: f64, m: &Model) -> Result<Vec<LogScalar>> {
    let p = m.layer()?;
    Ok(match m {
        Model::Burgers(_) => vec![omega_asymptotic(xi, &p)],
        Model::JinXin(_) => vec![LogScalar::zero(), omega_asymptotic(xi, &p)],
    })
}

/// Sampled matched profile.
#[derive(Debug, Clone)]
pub struct MatchedLayerProfile {
    pub xi: f64,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    pub params: LayerParams,
    pub u: GridFunction,
    /// Jin-Xin companion `V = κ∓²/2` at the cell midpoints.
    pub v: Option<Vec<f64>>,
}

fn branch(kappa: f64, xi: f64, x: f64, eps: f64) -> f64 {
    kappa * (kappa * (xi - x) / (2.0 * eps)).tanh()
}

/// Profile value at a single point; the right branch owns `x = ξ`.
pub fn profile_value(x: f64, xi: f64, kappas: (f64, f64), eps: f64) -> f64 {
    if x < xi {
        branch(kappas.0, xi, x, eps)
    } else {
        branch(kappas.1, xi, x, eps)
    }
}

pub fn eval_profile(xi: f64, m: &Model, grid: &Grid1D) -> Result<MatchedLayerProfile> {
    let p = m.layer()?;
    let (km, kp) = solve_kappas(xi, &p)?;
    let eps = p.epsilon;
    let mut u = grid.sample(|x| profile_value(x, xi, (km, kp), eps));
    let n = grid.len();
    // boundary nodes carry the exact data
    u.values_mut()[0] = p.u_star;
    u.values_mut()[n - 1] = -p.u_star;
    let v = match m {
        Model::Burgers(_) => None,
        Model::JinXin(_) => Some(
            grid.midpoints()
                .into_iter()
                .map(|x| if x < xi { 0.5 * km * km } else { 0.5 * kp * kp })
                .collect(),
        ),
    };
    Ok(MatchedLayerProfile {
        xi,
        kappa_minus: km,
        kappa_plus: kp,
        params: p,
        u,
        v,
    })
}

/// `sech²(c)` for `c ≥ 0` without overflow.
fn sech2(c: f64) -> f64 {
    let e = (-2.0 * c.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// `dκ₋/dξ` and `dκ₊/dξ` by implicit differentiation of
/// `κ tanh(κ(ℓ ± ξ)/2ε) = u*`.
pub fn dkappa_dxi(xi: f64, p: &LayerParams) -> Result<(f64, f64)> {
    let (km, kp) = solve_kappas(xi, p)?;
    let eps = p.epsilon;
    let one = |k: f64, length: f64, dlen: f64| {
        if k == 0.0 {
            return 0.0;
        }
        let c = k * length / (2.0 * eps);
        let s2 = sech2(c);
        let g_k = c.tanh() + k * length / (2.0 * eps) * s2;
        let g_xi = dlen * k * k / (2.0 * eps) * s2;
        -g_xi / g_k
    };
    Ok((one(km, p.ell + xi, 1.0), one(kp, p.ell - xi, -1.0)))
}

/// `∂_ξ U(x; ξ)` from the branch formula, including the κ variation.
pub fn dprofile_dxi(xi: f64, m: &Model, grid: &Grid1D) -> Result<GridFunction> {
    let p = m.layer()?;
    let (km, kp) = solve_kappas(xi, &p)?;
    let (dkm, dkp) = dkappa_dxi(xi, &p)?;
    let eps = p.epsilon;
    let d = |x: f64| {
        let (k, dk) = if x < xi { (km, dkm) } else { (kp, dkp) };
        let s = k * (xi - x) / (2.0 * eps);
        dk * s.tanh() + k * sech2(s) * (dk * (xi - x) + k) / (2.0 * eps)
    };
    let mut out = grid.sample(d);
    let n = grid.len();
    out.values_mut()[0] = 0.0;
    out.values_mut()[n - 1] = 0.0;
    Ok(out)
}

/// Centered difference of the sampled profile in ξ, one-sided near the
/// margin. Step `max(1e-6, 1e-3 h)`.
pub fn dprofile_dxi_fd(xi: f64, m: &Model, grid: &Grid1D) -> Result<GridFunction> {
    let p = m.layer()?;
    check_margin(xi, &p)?;
    let step = (1e-3 * grid.h()).max(1e-6);
    let inside = |z: f64| check_margin(z, &p).is_ok();
    let (lo, hi) = match (inside(xi - step), inside(xi + step)) {
        (true, true) => (xi - step, xi + step),
        (false, true) => (xi, xi + step),
        (true, false) => (xi - step, xi),
        (false, false) => {
            return Err(Error::LayerAtBoundary {
                xi,
                margin: margin(&p),
            })
        }
    };
    // branches stay assigned by the unperturbed ξ, so nodes next to the
    // layer difference one smooth branch instead of straddling the kink
    let sample = |z: f64| -> Result<GridFunction> {
        let k = solve_kappas(z, &p)?;
        let mut u = grid.sample(|x| {
            if x < xi {
                branch(k.0, z, x, p.epsilon)
            } else {
                branch(k.1, z, x, p.epsilon)
            }
        });
        let n = grid.len();
        u.values_mut()[0] = p.u_star;
        u.values_mut()[n - 1] = -p.u_star;
        Ok(u)
    };
    let mut d = sample(hi)?.sub(&sample(lo)?);
    d.scale(1.0 / (hi - lo));
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{derivative, inner_product, norm, BoundaryTreatment, NormKind, Order};
    use crate::models::BurgersModel;

    fn params(eps: f64) -> LayerParams {
        LayerParams {
            epsilon: eps,
            ell: 1.0,
            u_star: 1.0,
        }
    }

    fn burgers(eps: f64) -> Model {
        Model::Burgers(BurgersModel::new(eps, 1.0, 1.0).unwrap())
    }

    #[test]
    fn symmetric_kappas() {
        let (a, b) = solve_kappas(0.0, &params(0.1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kappa_matches_bisection_oracle() {
        let (k, _) = solve_kappas(0.0, &params(0.1)).unwrap();
        let f = |k: f64| k * (5.0 * k).tanh() - 1.0;
        let (mut lo, mut hi) = (1.0, 1.1);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!((k - 0.5 * (lo + hi)).abs() < 1e-14);
        assert!(f(k).abs() < 1e-13);
    }

    #[test]
    fn kappas_decrease_to_u_star() {
        let mut prev = f64::INFINITY;
        for eps in [0.2, 0.15, 0.1, 0.05, 0.02] {
            let (k, _) = solve_kappas(0.0, &params(eps)).unwrap();
            assert!(k >= 1.0 && k < prev);
            prev = k;
        }
    }

    #[test]
    fn margin_is_enforced() {
        assert!(matches!(
            solve_kappas(0.65, &params(0.1)),
            Err(Error::LayerAtBoundary { .. })
        ));
        assert!(solve_kappas(0.55, &params(0.1)).is_ok());
    }

    #[test]
    fn jump_examples() {
        let p = params(0.1);
        assert_eq!(derivative_jump(0.0, &p).unwrap(), 0.0);
        let j = derivative_jump(-0.3, &p).unwrap();
        let asym = 2.0 / 0.1 * ((-7.0f64).exp() - (-13.0f64).exp());
        assert!(j > 0.0 && j / asym < 2.0 && asym / j < 2.0);
        for xi in [0.05, 0.2, 0.41] {
            let a = derivative_jump(xi, &p).unwrap();
            let b = derivative_jump(-xi, &p).unwrap();
            assert!((a + b).abs() <= 1e-12 * a.abs().max(1e-300));
            assert!(a < 0.0);
        }
    }

    #[test]
    fn omega_examples() {
        let p = params(0.1);
        assert_eq!(omega_asymptotic(0.0, &p).value(), 0.0);
        assert_eq!(
            omega_asymptotic(0.3, &p).value(),
            omega_asymptotic(-0.3, &p).value()
        );
        let expected = 40.0 * 5f64.sinh() * (-10f64).exp();
        assert!((omega_asymptotic(0.5, &p).value() - expected).abs() < 1e-12 * expected);
        assert!((omega_asymptotic(0.5, &p).value() - 0.13476).abs() < 1e-5);
        // stays meaningful where the plain value underflows
        let tiny = omega_asymptotic(0.1, &params(0.0005));
        assert_eq!(tiny.value(), 0.0);
        assert!(tiny.log_abs.is_finite() && tiny.log_abs < -700.0);
    }

    #[test]
    fn profile_examples() {
        let g = Grid1D::new(-1.0, 1.0, 399).unwrap();
        let m = burgers(0.1);
        let pr = eval_profile(0.0, &m, &g).unwrap();
        assert_eq!(pr.u.values()[200], 0.0);
        assert!((pr.u.values()[0] - 1.0).abs() < 1e-12);
        let dev = g
            .nodes()
            .iter()
            .zip(pr.u.values())
            .map(|(x, u)| (u + (x / 0.2).tanh()).abs())
            .fold(0.0, f64::max);
        assert!(dev < 2e-4);
        let pr = eval_profile(0.137, &m, &g).unwrap();
        let exact = profile_value(0.137, 0.137, (pr.kappa_minus, pr.kappa_plus), 0.1);
        assert_eq!(exact, 0.0);
        let km = pr.kappa_minus;
        assert!((km * (km * 1.137 / 0.2).tanh() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn kappa_envelope() {
        for eps in [0.1, 0.07, 0.05] {
            for xi in [-0.5, -0.2, 0.0, 0.3] {
                let p = params(eps);
                let (dm, dp) = solve_excesses(xi, &p).unwrap();
                assert!(dm > 0.0 && dm <= 4.0 * (-(1.0 + xi) / eps).exp());
                assert!(dp > 0.0 && dp <= 4.0 * (-(1.0 - xi) / eps).exp());
            }
        }
    }

    #[test]
    fn xi_derivative_paths_agree() {
        let g = Grid1D::new(-1.0, 1.0, 399).unwrap();
        let m = burgers(0.1);
        for xi in [-0.4, -0.1, 0.0, 0.23] {
            let a = dprofile_dxi(xi, &m, &g).unwrap();
            let b = dprofile_dxi_fd(xi, &m, &g).unwrap();
            let rel = norm(&a.sub(&b), NormKind::L2) / norm(&a, NormKind::L2);
            assert!(rel < 1e-6, "xi {xi}: {rel}");
            assert!(a.values()[0].abs() < 1e-10 && a.values()[g.len() - 1].abs() < 1e-10);
            assert!(b.values()[0].abs() < 1e-10);
        }
    }

    #[test]
    fn xi_derivative_is_minus_x_derivative_at_center() {
        let g = Grid1D::new(-1.0, 1.0, 399).unwrap();
        let m = burgers(0.1);
        let d = dprofile_dxi(0.0, &m, &g).unwrap();
        let u = eval_profile(0.0, &m, &g).unwrap().u;
        let mut dx = derivative(&u, Order::First, BoundaryTreatment::OneSided);
        dx.scale(-1.0);
        let rel = norm(&d.sub(&dx), NormKind::L2) / norm(&d, NormKind::L2);
        assert!(rel < 1e-3, "{rel}");
    }

    #[test]
    fn residual_mass_matches_jump() {
        // the residual is a discrete delta of mass ε[[U']] on top of an
        // O(h²) truncation background
        let m = burgers(0.1);
        for (n, l1_tol) in [(199usize, None), (799, Some(0.1))] {
            let g = Grid1D::new(-1.0, 1.0, n).unwrap();
            for xi in [-0.3, -0.15, 0.2] {
                let pr = eval_profile(xi, &m, &g).unwrap();
                let r = GridFunction::new(
                    g,
                    crate::models::burgers_operator(pr.u.values(), 0.1, g.h()),
                )
                .unwrap();
                let target = 0.1 * derivative_jump(xi, &pr.params).unwrap();
                let mass = inner_product(&r, &g.sample(|_| 1.0)).unwrap();
                assert!(
                    (mass - target).abs() < 0.01 * target.abs(),
                    "{mass} {target}"
                );
                if let Some(tol) = l1_tol {
                    let l1 = inner_product(&r.map(f64::abs), &g.sample(|_| 1.0)).unwrap();
                    assert!((l1 - target.abs()).abs() < tol * target.abs());
                }
            }
        }
    }

    #[test]
    fn residual_away_from_layer_is_second_order() {
        let m = burgers(0.1);
        let far = |n: usize| {
            let g = Grid1D::new(-1.0, 1.0, n).unwrap();
            let pr = eval_profile(-0.2, &m, &g).unwrap();
            let r = crate::models::burgers_operator(pr.u.values(), 0.1, g.h());
            (0..g.len())
                .filter(|&i| (g.x(i) + 0.2).abs() > 0.5)
                .map(|i| r[i].abs())
                .fold(0.0, f64::max)
        };
        let ratio = far(399) / far(799);
        assert!(ratio > 3.6 && ratio < 4.4, "{ratio}");
    }
}
