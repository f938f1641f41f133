//! Reduction onto the profile family: drift θ(ξ), the projection constraint,
//! spectral coefficients, the quasi-linear forcing terms and the rates β, μ.
//!
//! The drift is `θ(ξ) = ⟨ψ̂(·;ξ), F[U(·;ξ)]⟩` with `F[U] = ε[[U']]δ_ξ` and
//! `ψ̂ = ψ₁/⟨ψ₁, ∂_ξU⟩`, the adjoint mode normalized against the tangent of
//! the family so that `dξ/dt ≈ θ(ξ)`. For Jin-Xin the adjoint mode is the
//! pair `(p, q)` with `p` the viscous adjoint mode and
//! `q = ε p'/(1 + ελ)` on the midpoints.

use crate::error::{Error, Result};
use crate::grid::{
    first_difference, inner_product, norm, trapezoid_dot, Grid1D, GridFunction, NormKind,
};
use crate::models::{Model, State};
use crate::spectral::{
    eigenpairs, jinxin_eigen_map, JinXinEigen, LinearizedOperator, SpectralPairs,
};
use crate::steady::{
    check_margin, derivative_jump, dkappa_dxi, dprofile_dxi, eval_profile, omega_asymptotic,
    MatchedLayerProfile,
};

/// Number of Chebyshev samples of the adjoint mode over J.
pub const CACHE_NODES: usize = 17;

/// Leading adjoint data at one ξ.
#[derive(Debug, Clone)]
pub struct AdjointMode {
    pub xi: f64,
    /// Leading eigenvalue of the model's linearization.
    pub lambda1: f64,
    /// Real part of the second eigenvalue.
    pub lambda2_re: f64,
    pub phi1: GridFunction,
    /// Biorthonormal adjoint mode, `⟨ψ₁, φ₁⟩ = 1`.
    pub psi1: GridFunction,
    /// `ψ₁` rescaled so that its pairing with the family tangent is one.
    pub psi_hat: GridFunction,
    /// Jin-Xin second component of `ψ̂` at the midpoints.
    pub q_hat: Option<Vec<f64>>,
    /// `⟨ψ₁, ∂_ξ(U, V)⟩`
    pub pairing: f64,
    pub dxi_u: GridFunction,
}

/// Barycentric interpolation on Chebyshev points of the first kind.
#[derive(Debug, Clone)]
pub struct ChebyshevNodes {
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebyshevNodes {
    pub fn new(a: f64, b: f64, count: usize) -> Self {
        let n = count as f64;
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for j in 0..count {
            let th = (2.0 * j as f64 + 1.0) * std::f64::consts::PI / (2.0 * n);
            nodes.push(0.5 * (a + b) - 0.5 * (b - a) * th.cos());
            weights.push(if j % 2 == 0 { th.sin() } else { -th.sin() });
        }
        Self { nodes, weights }
    }

    /// Barycentric coefficients `c_j` with `f(x) ≈ Σ c_j f_j`.
    pub fn coefficients(&self, x: f64) -> Vec<f64> {
        if let Some(j) = self.nodes.iter().position(|&t| t == x) {
            let mut c = vec![0.0; self.nodes.len()];
            c[j] = 1.0;
            return c;
        }
        let raw: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w / (x - t))
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / s).collect()
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        self.coefficients(x)
            .iter()
            .zip(values)
            .map(|(c, v)| c * v)
            .sum()
    }
}

/// Model, grid and the cached adjoint modes over the working interval J.
#[derive(Debug, Clone)]
pub struct ReductionContext {
    pub model: Model,
    pub grid: Grid1D,
    pub j_interval: (f64, f64),
    pub cheb: ChebyshevNodes,
    pub modes: Vec<AdjointMode>,
}

/// Default working interval `[−0.6ℓ, 0.6ℓ]`.
pub fn default_interval(m: &Model) -> (f64, f64) {
    (-0.6 * m.ell(), 0.6 * m.ell())
}

impl ReductionContext {
    pub fn new(model: Model, grid: Grid1D, j_interval: (f64, f64)) -> Result<Self> {
        let (a, b) = j_interval;
        if !(a < b) {
            return Err(Error::InvalidModel(format!(
                "working interval [{a}, {b}] is empty"
            )));
        }
        let cheb = ChebyshevNodes::new(a, b, CACHE_NODES);
        let mut modes = Vec::with_capacity(CACHE_NODES);
        for &xi in &cheb.nodes {
            modes.push(adjoint_mode(xi, &model, &grid)?);
        }
        Ok(Self {
            model,
            grid,
            j_interval,
            cheb,
            modes,
        })
    }

    pub fn with_default_interval(model: Model, grid: Grid1D) -> Result<Self> {
        Self::new(model, grid, default_interval(&model))
    }

    pub fn epsilon(&self) -> f64 {
        self.model.epsilon()
    }

    /// Spacing of the ξ samples, `|J|/(nodes − 1)`.
    pub fn cache_spacing(&self) -> f64 {
        (self.j_interval.1 - self.j_interval.0) / (CACHE_NODES as f64 - 1.0)
    }

    pub fn contains(&self, xi: f64) -> bool {
        xi >= self.j_interval.0 && xi <= self.j_interval.1
    }

    /// Exact adjoint mode at ξ (fresh eigensolve).
    pub fn mode(&self, xi: f64) -> Result<AdjointMode> {
        adjoint_mode(xi, &self.model, &self.grid)
    }

    /// Barycentric interpolation of `ψ̂` from the cache.
    pub fn psi_hat_cached(&self, xi: f64) -> GridFunction {
        let c = self.cheb.coefficients(xi);
        let mut out = self.grid.zeros();
        for (cj, md) in c.iter().zip(&self.modes) {
            out.axpy(*cj, &md.psi_hat);
        }
        out
    }

    /// Biorthonormal `ψ₁` interpolated from the cache.
    pub fn psi1_cached(&self, xi: f64) -> GridFunction {
        let c = self.cheb.coefficients(xi);
        let mut out = self.grid.zeros();
        for (cj, md) in c.iter().zip(&self.modes) {
            out.axpy(*cj, &md.psi1);
        }
        out
    }

    /// Leading eigenfunction interpolated from the cache.
    pub fn phi1_cached(&self, xi: f64) -> GridFunction {
        let c = self.cheb.coefficients(xi);
        let mut out = self.grid.zeros();
        for (cj, md) in c.iter().zip(&self.modes) {
            out.axpy(*cj, &md.phi1);
        }
        out
    }

    /// `⟨ψ₁, ∂_ξU⟩` interpolated from the cache.
    pub fn pairing_cached(&self, xi: f64) -> f64 {
        let v: Vec<f64> = self.modes.iter().map(|m| m.pairing).collect();
        self.cheb.interpolate(&v, xi)
    }

    pub fn lambda1_cached(&self, xi: f64) -> f64 {
        let v: Vec<f64> = self.modes.iter().map(|m| m.lambda1).collect();
        self.cheb.interpolate(&v, xi)
    }

    pub fn lambda1_sup(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.lambda1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `θ(ξ)` from a fresh eigensolve, `ψ̂` evaluated at `x = ξ` by cubic interpolation.
    pub fn theta(&self, xi: f64) -> Result<f64> {
        let md = self.mode(xi)?;
        theta_from_mode(&md, &self.model)
    }

    /// `θ(ξ)` with `ψ̂(·; ξ)` interpolated from the Chebyshev cache; the
    /// exponentially varying jump is always evaluated exactly.
    pub fn theta_cached(&self, xi: f64) -> Result<f64> {
        let p = self.model.layer()?;
        let jump = derivative_jump(xi, &p)?;
        Ok(p.epsilon * jump * self.psi_hat_cached(xi).interpolate(xi))
    }

    /// `∂_ξψ̂` by a centered difference of the cached interpolant with step
    /// `spacing/4`.
    pub fn dpsi_hat_dxi(&self, xi: f64) -> Result<GridFunction> {
        if !self.contains(xi) {
            return Err(Error::Domain(format!(
                "ξ = {xi} lies outside the working interval"
            )));
        }
        let step = self.cache_spacing() / 4.0;
        let mut d = self
            .psi_hat_cached(xi + step)
            .sub(&self.psi_hat_cached(xi - step));
        d.scale(0.5 / step);
        Ok(d)
    }
}

fn theta_from_mode(md: &AdjointMode, m: &Model) -> Result<f64> {
    let p = m.layer()?;
    let jump = derivative_jump(md.xi, &p)?;
    Ok(p.epsilon * jump * md.psi_hat.interpolate(md.xi))
}

/// Linear interpolation of midpoint values at `x`.
fn midpoint_value(grid: &Grid1D, q: &[f64], x: f64) -> f64 {
    let s = (x - grid.a()) / grid.h() - 0.5;
    let j = s.floor().clamp(0.0, (q.len() - 2) as f64) as usize;
    let w = s - j as f64;
    (1.0 - w) * q[j] + w * q[j + 1]
}

/// Leading eigenpair at ξ together with the tangent-normalized adjoint.
pub fn adjoint_mode(xi: f64, m: &Model, grid: &Grid1D) -> Result<AdjointMode> {
    let profile = eval_profile(xi, m, grid)?;
    let op = LinearizedOperator::from_profile(xi, m.epsilon(), grid, profile.u.values());
    let pairs = eigenpairs(&op, 2)?;
    let dxi_u = dprofile_dxi(xi, m, grid)?;
    build_mode(&pairs, &profile, dxi_u, m, grid)
}

fn build_mode(
    pairs: &SpectralPairs,
    profile: &MatchedLayerProfile,
    dxi_u: GridFunction,
    m: &Model,
    grid: &Grid1D,
) -> Result<AdjointMode> {
    let xi = profile.xi;
    let eps = m.epsilon();
    let psi1 = pairs.psi[0].clone();
    let (lambda1, lambda2_re, q) = match m {
        Model::Burgers(_) => (pairs.lambda[0], pairs.lambda[1], None),
        Model::JinXin(_) => {
            let JinXinEigen::Real(l1) = jinxin_eigen_map(pairs.lambda[0], eps) else {
                return Err(Error::SpectralFailure(
                    "leading Jin-Xin eigenvalue is complex".into(),
                ));
            };
            let l2 = jinxin_eigen_map(pairs.lambda[1], eps).re();
            let h = grid.h();
            let pv = psi1.values();
            let q: Vec<f64> = (0..pv.len() - 1)
                .map(|j| eps * (pv[j + 1] - pv[j]) / (h * (1.0 + eps * l1)))
                .collect();
            (l1, l2, Some(q))
        }
    };
    let mut pairing = inner_product(&psi1, &dxi_u)?;
    if let Some(q) = &q {
        // ∂_ξV = ε[[U']]δ_ξ + κκ' on each side
        let p = m.layer()?;
        let jump = derivative_jump(xi, &p)?;
        let (dkm, dkp) = dkappa_dxi(xi, &p)?;
        let h = grid.h();
        let smooth: f64 = grid
            .midpoints()
            .iter()
            .zip(q)
            .map(|(x, qj)| {
                if *x < xi {
                    profile.kappa_minus * dkm * qj
                } else {
                    profile.kappa_plus * dkp * qj
                }
            })
            .sum::<f64>()
            * h;
        pairing += eps * jump * midpoint_value(grid, q, xi) + smooth;
    }
    if !(pairing.abs() > 0.0) || !pairing.is_finite() {
        return Err(Error::SpectralFailure(format!(
            "adjoint mode does not pair with the family tangent at ξ = {xi}"
        )));
    }
    let mut psi_hat = psi1.clone();
    psi_hat.scale(1.0 / pairing);
    let q_hat = q.map(|q| q.into_iter().map(|x| x / pairing).collect());
    Ok(AdjointMode {
        xi,
        lambda1,
        lambda2_re,
        phi1: pairs.phi[0].clone(),
        psi1,
        psi_hat,
        q_hat,
        pairing,
        dxi_u,
    })
}

/// `θ(ξ)` from a fresh eigensolve.
pub fn theta(xi: f64, ctx: &ReductionContext) -> Result<f64> {
    ctx.theta(xi)
}

/// `β = −θ'(ξ̄)` by a centered difference with step 1e-4.
pub fn beta_rate(xi_bar: f64, ctx: &ReductionContext) -> Result<f64> {
    let d = 1e-4;
    Ok(-(ctx.theta(xi_bar + d)? - ctx.theta(xi_bar - d)?) / (2.0 * d))
}

/// Integrated layer path of `dξ/dt = θ(ξ)`.
#[derive(Debug, Clone, Default)]
pub struct ReducedPath {
    pub t: Vec<f64>,
    pub xi: Vec<f64>,
    pub drift: Vec<f64>,
    /// Set when integration stopped before the final time.
    pub aborted: Option<String>,
}

impl ReducedPath {
    /// Cubic Hermite interpolation between accepted steps.
    pub fn xi_at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.xi[0];
        }
        if t >= self.t[n - 1] {
            return self.xi[n - 1];
        }
        let k = self.t.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let hstep = t1 - t0;
        let s = (t - t0) / hstep;
        let (y0, y1, d0, d1) = (
            self.xi[k],
            self.xi[k + 1],
            self.drift[k] * hstep,
            self.drift[k + 1] * hstep,
        );
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
    }

    /// First time the path reaches `target`, by linear interpolation.
    pub fn time_at(&self, target: f64) -> Option<f64> {
        let sgn = (self.xi[0] - target).signum();
        for k in 1..self.t.len() {
            if (self.xi[k] - target).signum() != sgn {
                let w = (target - self.xi[k - 1]) / (self.xi[k] - self.xi[k - 1]);
                return Some(self.t[k - 1] + w * (self.t[k] - self.t[k - 1]));
            }
        }
        None
    }
}

/// RK4 with step doubling (relative tolerance 1e-8) on the cached drift.
pub fn reduced_ode(xi0: f64, t_end: f64, ctx: &ReductionContext) -> ReducedPath {
    let f = |x: f64| ctx.theta_cached(x);
    let mut path = ReducedPath::default();
    let d0 = match f(xi0) {
        Ok(d) => d,
        Err(e) => {
            path.aborted = Some(e.to_string());
            return path;
        }
    };
    path.t.push(0.0);
    path.xi.push(xi0);
    path.drift.push(d0);
    if d0 == 0.0 {
        path.t.push(t_end);
        path.xi.push(xi0);
        path.drift.push(0.0);
        return path;
    }
    let rk4 = |x: f64, h: f64| -> Result<f64> {
        let k1 = f(x)?;
        let k2 = f(x + 0.5 * h * k1)?;
        let k3 = f(x + 0.5 * h * k2)?;
        let k4 = f(x + h * k3)?;
        Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    };
    let tol = 1e-8;
    let mut t = 0.0;
    let mut x = xi0;
    let mut h = (1e-3 * x.abs() / d0.abs()).min(t_end);
    while t < t_end {
        h = h.min(t_end - t);
        let step = (|| -> Result<(f64, f64)> {
            let full = rk4(x, h)?;
            let half = rk4(rk4(x, 0.5 * h)?, 0.5 * h)?;
            Ok((full, half))
        })();
        let (full, half) = match step {
            Ok(v) => v,
            Err(e) => {
                path.aborted = Some(e.to_string());
                return path;
            }
        };
        let err = (half - full).abs() / 15.0;
        let scale = tol * x.abs().max(half.abs()) + 1e-300;
        if err <= scale {
            t += h;
            x = half + (half - full) / 15.0;
            let d = match f(x) {
                Ok(d) => d,
                Err(e) => {
                    path.aborted = Some(e.to_string());
                    return path;
                }
            };
            path.t.push(t);
            path.xi.push(x);
            path.drift.push(d);
            let grow = if err == 0.0 {
                4.0
            } else {
                (0.9 * (scale / err).powf(0.2)).clamp(0.2, 4.0)
            };
            h *= grow;
        } else {
            h *= (0.9 * (scale / err).powf(0.2)).clamp(0.1, 0.5);
            if h < 1e-14 * t.max(1.0) {
                path.aborted = Some(format!("step size underflow at t = {t}"));
                return path;
            }
        }
    }
    path
}

/// `∫ dξ/θ(ξ)` from `xi0` to `target` by adaptive Simpson quadrature on the
/// cached drift.
pub fn time_to_reach(xi0: f64, target: f64, ctx: &ReductionContext) -> Result<f64> {
    let g = |x: f64| -> Result<f64> { Ok(1.0 / ctx.theta_cached(x)?) };
    fn simpson(a: f64, fa: f64, _m: f64, fm: f64, b: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        g: &dyn Fn(f64) -> Result<f64>,
        a: f64,
        fa: f64,
        m: f64,
        fm: f64,
        b: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = g(lm)?;
        let frm = g(rm)?;
        let left = simpson(a, fa, lm, flm, m, fm);
        let right = simpson(m, fm, rm, frm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(rec(g, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1)?
            + rec(g, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1)?)
    }
    let fa = g(xi0)?;
    let fb = g(target)?;
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() != fb.signum() {
        return Err(Error::RootFailure(
            "drift vanishes between the endpoints".into(),
        ));
    }
    let m = 0.5 * (xi0 + target);
    let fm = g(m)?;
    let whole = simpson(xi0, fa, m, fm, target, fb);
    let t = rec(
        &g,
        xi0,
        fa,
        m,
        fm,
        target,
        fb,
        whole,
        1e-10 * whole.abs(),
        40,
    )?;
    Ok(t)
}

fn require_layer(u: &GridFunction) -> Result<()> {
    let inner = u.interior();
    let pos = inner.iter().any(|&x| x > 0.0);
    let neg = inner.iter().any(|&x| x < 0.0);
    if pos && neg {
        Ok(())
    } else {
        Err(Error::ProjectionFailure(
            "field has no sign change in the interior".into(),
        ))
    }
}

/// Constraint `g(ξ) = ⟨ψ̂(·;ξ), s − (U, V)(·;ξ)⟩`.
fn constraint(state: &State, xi: f64, ctx: &ReductionContext) -> Result<f64> {
    let md = ctx.mode(xi)?;
    let profile = eval_profile(xi, &ctx.model, &ctx.grid)?;
    constraint_with(state, &md, &profile, &ctx.grid)
}

fn constraint_with(
    state: &State,
    md: &AdjointMode,
    profile: &MatchedLayerProfile,
    grid: &Grid1D,
) -> Result<f64> {
    let v = state.u().sub(&profile.u);
    let mut g = inner_product(&md.psi_hat, &v)?;
    if let (State::JinXin { v: vs, .. }, Some(q), Some(vp)) = (state, &md.q_hat, &profile.v) {
        g += grid.h()
            * vs.iter()
                .zip(vp)
                .zip(q)
                .map(|((a, b), c)| (a - b) * c)
                .sum::<f64>();
    }
    Ok(g)
}

/// Layer position ξ* with `⟨ψ̂(·;ξ*), u − U(·;ξ*)⟩ = 0`.
pub fn project_xi(u: &GridFunction, xi_guess: f64, ctx: &ReductionContext) -> Result<f64> {
    project_state(&State::Burgers(u.clone()), xi_guess, ctx)
}

/// Projection for either model's state; Jin-Xin pairs both components.
pub fn project_state(state: &State, xi_guess: f64, ctx: &ReductionContext) -> Result<f64> {
    require_layer(state.u())?;
    let p = ctx.model.layer()?;
    let g = |x: f64| constraint(state, x, ctx);
    let inside = |x: f64| check_margin(x, &p).is_ok();
    let window = 0.2;
    let (lo_lim, hi_lim) = (xi_guess - window, xi_guess + window);
    if !inside(xi_guess) {
        return Err(Error::ProjectionFailure(format!(
            "initial guess {xi_guess} is outside the admissible range"
        )));
    }
    // secant from the guess
    let mut x0 = xi_guess;
    let mut g0 = g(x0)?;
    let mut x1 = if inside(xi_guess + 1e-3) {
        xi_guess + 1e-3
    } else {
        xi_guess - 1e-3
    };
    let mut g1 = g(x1)?;
    for _ in 0..60 {
        if g1 == 0.0 {
            return Ok(x1);
        }
        if g1 == g0 {
            break;
        }
        let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        if !(x2 > lo_lim && x2 < hi_lim) || !inside(x2) {
            break;
        }
        x0 = x1;
        g0 = g1;
        x1 = x2;
        g1 = g(x1)?;
        if (x1 - x0).abs() <= 1e-15 * x1.abs().max(1.0) {
            return Ok(x1);
        }
    }
    // bracket search and Illinois regula falsi as a fallback
    let gc = g(xi_guess)?;
    let mut bracket = None;
    for k in 1..=40 {
        let d = window * k as f64 / 40.0;
        for x in [xi_guess - d, xi_guess + d] {
            if inside(x) {
                let gx = g(x)?;
                if gx.signum() != gc.signum() {
                    bracket = Some(if x < xi_guess {
                        (x, gx, xi_guess, gc)
                    } else {
                        (xi_guess, gc, x, gx)
                    });
                    break;
                }
            }
        }
        if bracket.is_some() {
            break;
        }
    }
    let Some((mut a, mut fa, mut b, mut fb)) = bracket else {
        return Err(Error::ProjectionFailure(format!(
            "no sign change of the constraint within {window} of {xi_guess}"
        )));
    };
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(c)?;
        if fc == 0.0 || (b - a).abs() < 1e-15 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 1e-14 * a.abs().max(1.0) {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::ProjectionFailure(
        "constraint solve did not converge".into(),
    ))
}

/// Perturbation `v = u − U(·; ξ)` and its first adjoint coefficient.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub xi: f64,
    pub v: GridFunction,
    /// Jin-Xin second component at the midpoints.
    pub w: Option<Vec<f64>>,
    /// `|⟨ψ₁, v⟩|` with the biorthonormal `ψ₁`.
    pub v1_abs: f64,
    pub l2: f64,
    pub h1: f64,
}

pub fn perturbation(state: &State, xi: f64, ctx: &ReductionContext) -> Result<Perturbation> {
    let profile = eval_profile(xi, &ctx.model, &ctx.grid)?;
    let md = ctx.mode(xi)?;
    let v = state.u().sub(&profile.u);
    let h = ctx.grid.h();
    let mut l2sq = norm(&v, NormKind::L2).powi(2);
    let mut h1sq = norm(&v, NormKind::H1).powi(2);
    // ψ₁ pairs with the tangent through `pairing`; its pair component is q̂·pairing
    let mut v1 = inner_product(&md.psi1, &v)?;
    let w = match (state, &profile.v) {
        (State::JinXin { v: vs, .. }, Some(vp)) => {
            let w: Vec<f64> = vs.iter().zip(vp).map(|(a, b)| a - b).collect();
            let wsq: f64 = h * w.iter().map(|x| x * x).sum::<f64>();
            l2sq += wsq;
            let dw: f64 = w
                .windows(2)
                .map(|p| ((p[1] - p[0]) / h).powi(2))
                .sum::<f64>()
                * h;
            h1sq += wsq + dw;
            if let Some(q) = &md.q_hat {
                v1 += md.pairing * h * q.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            }
            Some(w)
        }
        _ => None,
    };
    Ok(Perturbation {
        xi,
        v,
        w,
        v1_abs: v1.abs(),
        l2: l2sq.sqrt(),
        h1: h1sq.sqrt(),
    })
}

/// `v_k = ⟨ψ_k, v⟩` for `k = 1..m_count`.
pub fn spectral_coeffs(
    v: &GridFunction,
    xi: f64,
    m_count: usize,
    ctx: &ReductionContext,
) -> Result<Vec<f64>> {
    let pairs = ctx_pairs(xi, m_count, ctx)?;
    pairs.psi.iter().map(|p| inner_product(p, v)).collect()
}

pub fn ctx_pairs(xi: f64, m_count: usize, ctx: &ReductionContext) -> Result<SpectralPairs> {
    let op = LinearizedOperator::assemble(xi, &ctx.model, &ctx.grid)?;
    eigenpairs(&op, m_count)
}

/// Rank-one map `v ↦ left · ⟨right, v⟩`.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub left: GridFunction,
    pub right: GridFunction,
}

impl RankOne {
    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        let mut out = self.left.clone();
        out.scale(trapezoid_dot(v.grid().h(), self.right.values(), v.values()));
        out
    }

    /// Operator norm in L², `|left|·|right|`.
    pub fn norm(&self) -> f64 {
        norm(&self.left, NormKind::L2) * norm(&self.right, NormKind::L2)
    }
}

/// Hat function of unit trapezoid mass centered at `x`.
pub fn discrete_delta(grid: &Grid1D, x: f64) -> GridFunction {
    let mut d = grid.zeros();
    let i = grid.cell_of(x);
    let s = (x - grid.x(i)) / grid.h();
    let h = grid.h();
    d.values_mut()[i] = (1.0 - s) / h;
    d.values_mut()[i + 1] = s / h;
    d
}

/// `H = ε[[U']]δ_ξ − ∂_ξU θ` and `M v = −∂_ξU θ ⟨∂_ξψ̂, v⟩`.
///
/// The delta is the unit-mass hat at ξ, so H vanishes identically at the
/// symmetric equilibrium.
pub fn assemble_h_m(xi: f64, ctx: &ReductionContext) -> Result<(GridFunction, RankOne)> {
    let md = ctx.mode(xi)?;
    let th = theta_from_mode(&md, &ctx.model)?;
    let p = ctx.model.layer()?;
    let jump = derivative_jump(xi, &p)?;
    let mut h = discrete_delta(&ctx.grid, xi);
    h.scale(p.epsilon * jump);
    h.axpy(-th, &md.dxi_u);
    let mut left = md.dxi_u.clone();
    left.scale(-th);
    let right = ctx.dpsi_hat_dxi(xi)?;
    Ok((h, RankOne { left, right }))
}

/// `Q = v v'` and `ρ = ⟨ψ̂, Q⟩ + ⟨∂_ξψ̂, v⟩²`.
pub fn quadratic_terms(
    v: &GridFunction,
    xi: f64,
    ctx: &ReductionContext,
) -> Result<(GridFunction, f64)> {
    if ctx.model.is_jinxin() {
        return Err(Error::InvalidModel(
            "quadratic terms are defined for the Burgers model".into(),
        ));
    }
    let q = quadratic_product(v);
    if v.values().iter().all(|x| *x == 0.0) {
        return Ok((q, 0.0));
    }
    let md = ctx.mode(xi)?;
    let dpsi = ctx.dpsi_hat_dxi(xi)?;
    let a = inner_product(&dpsi, v)?;
    Ok((q.clone(), inner_product(&md.psi_hat, &q)? + a * a))
}

/// `v v'` with the centered first difference, zero at the boundary.
pub fn quadratic_product(v: &GridFunction) -> GridFunction {
    let d = first_difference(v.values(), v.grid().h());
    let n = d.len();
    let mut vals: Vec<f64> = v.values().iter().zip(&d).map(|(a, b)| a * b).collect();
    vals[0] = 0.0;
    vals[n - 1] = 0.0;
    GridFunction::new(*v.grid(), vals).expect("finite")
}

/// `C = max_ξ ‖M_ξ‖/Ω(ξ)` over the cache nodes.
pub fn fit_m_constant(ctx: &ReductionContext) -> Result<f64> {
    let p = ctx.model.layer()?;
    let mut c: f64 = 0.0;
    for md in &ctx.modes {
        let om = omega_asymptotic(md.xi, &p).value();
        if om <= 0.0 {
            continue;
        }
        let (_, m) = assemble_h_m(md.xi, ctx)?;
        c = c.max(m.norm() / om);
    }
    Ok(c)
}

/// `sup_J Ω` (attained at the endpoint farther from the center).
pub fn omega_sup(ctx: &ReductionContext) -> Result<f64> {
    let p = ctx.model.layer()?;
    let (a, b) = ctx.j_interval;
    Ok(omega_asymptotic(a, &p)
        .value()
        .max(omega_asymptotic(b, &p).value()))
}

/// `μ = −sup_J λ₁ − C sup_J Ω`.
pub fn mu_rate(ctx: &ReductionContext, c_fit: f64) -> Result<f64> {
    Ok(-ctx.lambda1_sup() - c_fit * omega_sup(ctx)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBundle {
    pub epsilon: f64,
    pub beta: f64,
    pub mu: f64,
    pub omega_sup: f64,
    pub lambda1_sup: f64,
}

impl RateBundle {
    pub fn compute(ctx: &ReductionContext, xi_bar: f64) -> Result<Self> {
        let c = fit_m_constant(ctx)?;
        Ok(Self {
            epsilon: ctx.epsilon(),
            beta: beta_rate(xi_bar, ctx)?,
            mu: mu_rate(ctx, c)?,
            omega_sup: omega_sup(ctx)?,
            lambda1_sup: ctx.lambda1_sup(),
        })
    }

    pub fn beta_stable(&self) -> bool {
        self.beta > 0.0
    }

    pub fn mu_positive(&self) -> bool {
        self.mu > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BurgersModel, JinXinModel};

    fn burgers(eps: f64) -> Model {
        Model::Burgers(BurgersModel::new(eps, 1.0, 1.0).unwrap())
    }

    fn ctx(eps: f64, n: usize) -> ReductionContext {
        let m = burgers(eps);
        ReductionContext::with_default_interval(m, m.default_grid(n).unwrap()).unwrap()
    }

    fn ctx_on(eps: f64, n: usize, half: f64) -> ReductionContext {
        let m = burgers(eps);
        ReductionContext::new(m, m.default_grid(n).unwrap(), (-half, half)).unwrap()
    }

    #[test]
    fn mu_positive_on_visited_interval_and_shrinking() {
        let mus: Vec<f64> = [0.1, 0.08, 0.06]
            .iter()
            .map(|&e| {
                let c = ctx_on(e, 399, 0.3);
                mu_rate(&c, fit_m_constant(&c).unwrap()).unwrap()
            })
            .collect();
        assert!(mus.iter().all(|m| *m > 0.0), "{mus:?}");
        assert!(mus[0] > mus[1] && mus[1] > mus[2]);
    }

    #[test]
    fn rate_bundle_fields() {
        let c = ctx_on(0.1, 399, 0.3);
        let r = RateBundle::compute(&c, 0.0).unwrap();
        assert!(r.beta_stable() && r.mu_positive());
        assert!(r.lambda1_sup < 0.0 && r.omega_sup > 0.0);
        assert!(r.mu < -r.lambda1_sup);
    }

    #[test]
    fn forcing_bounded_by_omega() {
        let c = ctx(0.1, 399);
        let p = c.model.layer().unwrap();
        let ratios: Vec<f64> = [-0.4, -0.25, -0.1, 0.15, 0.3]
            .iter()
            .map(|&xi| {
                let (h, _) = assemble_h_m(xi, &c).unwrap();
                norm(&h, NormKind::Linf) / omega_asymptotic(xi, &p).value()
            })
            .collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 2.0, "{ratios:?}");
    }

    #[test]
    fn expansion_converges() {
        let c = ctx(0.1, 399);
        let xi = 0.0;
        let pairs = ctx_pairs(xi, 40, &c).unwrap();
        let v = c
            .grid
            .sample(|x| (std::f64::consts::FRAC_PI_2 * (x + 1.0)).sin());
        let coeffs = spectral_coeffs(&v, xi, 40, &c).unwrap();
        let err = |m: usize| {
            let mut r = v.clone();
            for (c, phi) in coeffs.iter().zip(&pairs.phi).take(m) {
                r.axpy(-c, phi);
            }
            norm(&r, NormKind::L2) / norm(&v, NormKind::L2)
        };
        assert!(err(20) < 0.05, "{}", err(20));
        assert!(err(20) < err(5));
    }

    #[test]
    fn argmin_of_theta_is_the_jump_zero() {
        let c = ctx(0.1, 399);
        let (mut a, mut b) = (-0.2, 0.25);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if c.theta(m).unwrap() > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        assert!((0.5 * (a + b)).abs() < 1e-8);
    }

    #[test]
    fn chebyshev_interpolates_smooth_functions() {
        let c = ChebyshevNodes::new(-0.6, 0.6, 17);
        let v: Vec<f64> = c.nodes.iter().map(|x| (2.0 * x).exp()).collect();
        for x in [-0.55, -0.1, 0.0, 0.33] {
            assert!((c.interpolate(&v, x) - (2.0 * x).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_sign_and_center() {
        let c = ctx(0.1, 399);
        assert_eq!(c.theta(0.0).unwrap(), 0.0);
        for xi in [0.1, 0.3, 0.5] {
            assert!(xi * c.theta(xi).unwrap() < 0.0);
            assert!(-xi * c.theta(-xi).unwrap() < 0.0);
        }
    }

    #[test]
    fn theta_bounded_by_omega() {
        let c = ctx(0.1, 399);
        let p = c.model.layer().unwrap();
        for xi in [-0.5, -0.3, -0.1, 0.2, 0.4] {
            let r = c.theta(xi).unwrap().abs() / omega_asymptotic(xi, &p).value();
            assert!(r <= 4.5, "{r}");
        }
    }

    #[test]
    fn cache_matches_exact_modes() {
        let c = ctx(0.1, 399);
        // ψ̂ picks up exponential boundary interaction as |ξ| approaches the margin
        for (xi, tol) in [(-0.47, 1e-3), (-0.05, 1e-5), (0.21, 1e-5)] {
            let exact = c.mode(xi).unwrap();
            let interp = c.psi1_cached(xi);
            let bi = inner_product(&interp, &exact.phi1).unwrap();
            assert!((bi - 1.0).abs() < 1e-6, "{bi}");
            let t0 = c.theta(xi).unwrap();
            let t1 = c.theta_cached(xi).unwrap();
            assert!((t0 - t1).abs() < tol * t0.abs(), "{t0} {t1}");
        }
    }

    #[test]
    fn theta_is_normalization_invariant() {
        let c = ctx(0.1, 399);
        let mut md = c.mode(-0.2).unwrap();
        let base = theta_from_mode(&md, &c.model).unwrap();
        // ψ̂ depends only on the direction of ψ₁
        let s = 3.7;
        md.psi1.scale(1.0 / s);
        let pairing = inner_product(&md.psi1, &md.dxi_u).unwrap();
        let mut ph = md.psi1.clone();
        ph.scale(1.0 / pairing);
        md.psi_hat = ph;
        let scaled = theta_from_mode(&md, &c.model).unwrap();
        assert!((base - scaled).abs() <= 1e-12 * base.abs());
    }

    #[test]
    fn beta_positive_and_shrinking() {
        let b1 = beta_rate(0.0, &ctx(0.1, 399)).unwrap();
        let b2 = beta_rate(0.0, &ctx(0.07, 399)).unwrap();
        assert!(b1 > 0.0 && b2 > 0.0 && b2 < b1);
    }

    #[test]
    fn reduced_ode_examples() {
        let c = ctx(0.1, 399);
        let p = reduced_ode(0.0, 100.0, &c);
        assert!(p.xi.iter().all(|x| *x == 0.0));
        let p = reduced_ode(-0.33, 2e4, &c);
        assert!(p.aborted.is_none());
        assert!(p.xi.windows(2).all(|w| w[1] >= w[0] && w[1] < 0.0));
    }

    #[test]
    fn quadrature_and_integration_agree() {
        let c = ctx(0.1, 399);
        let tq = time_to_reach(-0.3, -0.01, &c).unwrap();
        let p = reduced_ode(-0.3, 2.0 * tq, &c);
        let ti = p.time_at(-0.01).unwrap();
        assert!((tq / ti - 1.0).abs() < 0.01, "{tq} {ti}");
    }

    #[test]
    fn projection_examples() {
        let c = ctx(0.1, 399);
        let u = eval_profile(0.2, &c.model, &c.grid).unwrap().u;
        let xi = project_xi(&u, 0.17, &c).unwrap();
        assert!((xi - 0.2).abs() < 1e-8);
        let pairs = ctx_pairs(0.2, 2, &c).unwrap();
        let mut up = u.clone();
        up.axpy(0.01, &pairs.phi[1]);
        let xi = project_xi(&up, 0.25, &c).unwrap();
        assert!((xi - 0.2).abs() < 1e-6, "{xi}");
        let again = project_xi(&up, xi, &c).unwrap();
        assert!((again - xi).abs() < 1e-10);
        let flat = c.grid.zeros();
        assert!(matches!(
            project_xi(&flat, 0.0, &c),
            Err(Error::ProjectionFailure(_))
        ));
    }

    #[test]
    fn coefficients_of_a_mode() {
        let c = ctx(0.1, 399);
        let pairs = ctx_pairs(-0.1, 4, &c).unwrap();
        let v = spectral_coeffs(&pairs.phi[1], -0.1, 4, &c).unwrap();
        for (k, x) in v.iter().enumerate() {
            let e = if k == 1 { 1.0 } else { 0.0 };
            assert!((x - e).abs() < 1e-8);
        }
    }

    #[test]
    fn forcing_vanishes_at_equilibrium() {
        let c = ctx(0.1, 399);
        let (h, m) = assemble_h_m(0.0, &c).unwrap();
        assert!(norm(&h, NormKind::Linf) < 1e-6);
        assert!(m.norm() < 1e-12);
    }

    #[test]
    fn rank_one_bound() {
        let c = ctx(0.1, 399);
        let (_, m) = assemble_h_m(-0.3, &c).unwrap();
        let th = c.theta(-0.3).unwrap();
        let md = c.mode(-0.3).unwrap();
        let dpsi = c.dpsi_hat_dxi(-0.3).unwrap();
        let c1 = norm(&md.dxi_u, NormKind::L2) * norm(&dpsi, NormKind::L2);
        assert!(m.norm() <= c1 * th.abs() * (1.0 + 1e-12));
        let v = c.grid.sample(|x| (3.0 * x).sin() * (1.0 - x * x));
        assert!(
            norm(&m.apply(&v), NormKind::L2) <= m.norm() * norm(&v, NormKind::L2) * (1.0 + 1e-12)
        );
    }

    #[test]
    fn quadratic_examples() {
        let c = ctx(0.1, 399);
        let (q, rho) = quadratic_terms(&c.grid.zeros(), 0.1, &c).unwrap();
        assert_eq!(rho, 0.0);
        assert!(q.values().iter().all(|x| *x == 0.0));
        let pi = std::f64::consts::PI;
        let v = c.grid.sample(|x| (pi * (x + 1.0) / 2.0).sin());
        let (q, _) = quadratic_terms(&v, 0.1, &c).unwrap();
        let err = (1..c.grid.len() - 1)
            .map(|i| {
                let x = c.grid.x(i);
                let s = pi * (x + 1.0) / 2.0;
                (q.values()[i] - s.sin() * s.cos() * pi / 2.0).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 2.0 * c.grid.h() * c.grid.h());
    }

    #[test]
    fn degenerate_mu_is_diffusion_rate() {
        let m = Model::Burgers(BurgersModel::new(0.1, 1.0, 0.0).unwrap());
        let g = m.default_grid(399).unwrap();
        let lam = LinearizedOperator::assemble(0.0, &m, &g)
            .and_then(|op| eigenpairs(&op, 1))
            .unwrap()
            .lambda[0];
        let om = omega_asymptotic(0.3, &m.layer().unwrap()).value();
        assert_eq!(om, 0.0);
        assert!((lam + 0.1 * (std::f64::consts::PI / 2.0).powi(2)).abs() < 1e-4);
    }

    #[test]
    fn jinxin_theta_tracks_burgers() {
        let jx = Model::JinXin(JinXinModel::standard(0.1, 1.0, 1.0).unwrap());
        let g = jx.default_grid(399).unwrap();
        let cj = ReductionContext::with_default_interval(jx, g).unwrap();
        let cb = ctx(0.1, 399);
        for xi in [-0.3, 0.2] {
            let a = cj.theta(xi).unwrap();
            let b = cb.theta(xi).unwrap();
            assert!((a / b - 1.0).abs() < 1e-2, "{a} {b}");
        }
        let pr = eval_profile(-0.2, &jx, &g).unwrap();
        let s = State::JinXin {
            u: pr.u.clone(),
            v: pr.v.clone().unwrap(),
        };
        let xi = project_state(&s, -0.18, &cj).unwrap();
        assert!((xi + 0.2).abs() < 1e-8);
    }
}
