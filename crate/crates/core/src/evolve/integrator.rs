//! Time stepping for the full models: backward Euler with damped Newton, or
//! an IMEX split with implicit diffusion/relaxation and explicit convection.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};
use crate::models::{
    burgers_jacobian, burgers_operator_into, jinxin_operator, skew_convection, JinXinModel, Model,
    State,
};
use crate::tridiag::Tridiagonal;

/// Smallest step the adaptive driver will try before aborting.
pub const DT_MIN: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Imex,
    Implicit,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "imex" => Ok(Scheme::Imex),
            "implicit" => Ok(Scheme::Implicit),
            other => Err(format!(
                "unknown scheme `{other}` (expected imex or implicit)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt_init: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub scheme: Scheme,
    /// Keep a state snapshot at every `snapshot_stride`-th output time.
    pub snapshot_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_max: 500.0,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            scheme: Scheme::Implicit,
            snapshot_stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                key: key.into(),
                message,
            })
        };
        if !(self.dt_init > 0.0) {
            return bad("dt_init", format!("must be positive, got {}", self.dt_init));
        }
        if !(self.dt_max >= self.dt_init) {
            return bad(
                "dt_max",
                format!(
                    "must be at least dt_init = {}, got {}",
                    self.dt_init, self.dt_max
                ),
            );
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol", format!("must be positive, got {}", self.rel_tol));
        }
        if !(self.abs_tol > 0.0) {
            return bad("abs_tol", format!("must be positive, got {}", self.abs_tol));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride", "must be at least 1".into());
        }
        Ok(())
    }
}

/// Unknowns of a model state: interior `u` for Burgers; for Jin-Xin the
/// interleaved vector `(v_{1/2}, u_1, v_{3/2}, …, u_n, v_{n+1/2})`, whose
/// Jacobian is tridiagonal.
pub(crate) struct Packing<'a> {
    pub model: &'a Model,
    pub grid: Grid1D,
}

impl<'a> Packing<'a> {
    pub fn new(model: &'a Model, grid: Grid1D) -> Self {
        Self { model, grid }
    }

    pub fn pack(&self, s: &State) -> Vec<f64> {
        match s {
            State::Burgers(u) => u.interior().to_vec(),
            State::JinXin { u, v } => {
                let uv = u.values();
                let n = uv.len() - 2;
                let mut z = Vec::with_capacity(2 * n + 1);
                for i in 1..=n {
                    z.push(v[i - 1]);
                    z.push(uv[i]);
                }
                z.push(v[n]);
                z
            }
        }
    }

    fn full_u(&self, interior: impl Iterator<Item = f64>) -> Vec<f64> {
        let (l, r) = self.model.boundary_values();
        let mut u = Vec::with_capacity(self.grid.len());
        u.push(l);
        u.extend(interior);
        u.push(r);
        u
    }

    pub fn unpack(&self, z: &[f64]) -> State {
        match self.model {
            Model::Burgers(_) => State::Burgers(
                GridFunction::new(self.grid, self.full_u(z.iter().copied())).expect("finite state"),
            ),
            Model::JinXin(_) => {
                let u = self.full_u(z.iter().skip(1).step_by(2).copied());
                let v = z.iter().step_by(2).copied().collect();
                State::JinXin {
                    u: GridFunction::new(self.grid, u).expect("finite state"),
                    v,
                }
            }
        }
    }

    pub fn rhs(&self, z: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        match self.model {
            Model::Burgers(b) => {
                let u = self.full_u(z.iter().copied());
                let mut out = vec![0.0; u.len()];
                burgers_operator_into(&u, b.epsilon, h, &mut out);
                out[1..out.len() - 1].to_vec()
            }
            Model::JinXin(jx) => {
                let State::JinXin { u, v } = self.unpack(z) else {
                    unreachable!()
                };
                let mut du = vec![0.0; u.values().len()];
                let mut dv = vec![0.0; v.len()];
                jinxin_operator(u.values(), &v, jx, h, &mut du, &mut dv);
                let mut out = Vec::with_capacity(z.len());
                let n = du.len() - 2;
                for i in 1..=n {
                    out.push(dv[i - 1]);
                    out.push(du[i]);
                }
                out.push(dv[n]);
                out
            }
        }
    }

    pub fn jacobian(&self, z: &[f64]) -> Tridiagonal {
        let h = self.grid.h();
        match self.model {
            Model::Burgers(b) => burgers_jacobian(&self.full_u(z.iter().copied()), b.epsilon, h),
            Model::JinXin(jx) => jinxin_jacobian(z, jx, h),
        }
    }
}

fn jinxin_jacobian(z: &[f64], m: &JinXinModel, h: f64) -> Tridiagonal {
    let len = z.len();
    let a2 = m.a * m.a;
    let mut sub = vec![0.0; len - 1];
    let mut diag = vec![0.0; len];
    let mut sup = vec![0.0; len - 1];
    for p in 0..len {
        if p % 2 == 1 {
            // u row: −(v_right − v_left)/h
            sub[p - 1] = 1.0 / h;
            sup[p] = -1.0 / h;
        } else {
            diag[p] = -1.0 / m.epsilon;
            if p > 0 {
                sub[p - 1] = a2 / h + 0.5 * (m.flux.df)(z[p - 1]) / m.epsilon;
            }
            if p + 1 < len {
                sup[p] = -a2 / h + 0.5 * (m.flux.df)(z[p + 1]) / m.epsilon;
            }
        }
    }
    Tridiagonal::new(sub, diag, sup)
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solve `z − z_n − dt F(z) = 0` by damped Newton from `z_n`.
pub(crate) fn backward_euler(p: &Packing, zn: &[f64], dt: f64) -> Result<Vec<f64>> {
    let residual = |z: &[f64]| -> Vec<f64> {
        let f = p.rhs(z);
        z.iter()
            .zip(zn)
            .zip(&f)
            .map(|((a, b), c)| a - b - dt * c)
            .collect()
    };
    let mut z = zn.to_vec();
    let mut g = residual(&z);
    let mut gnorm = max_abs(&g);
    for _ in 0..NEWTON_MAX_ITER {
        let jac = p.jacobian(&z).scaled_shift(1.0, -dt);
        let lu = jac.factor();
        if lu.singular {
            return Err(Error::StepRejected("singular Newton matrix".into()));
        }
        let mut delta: Vec<f64> = g.iter().map(|x| -x).collect();
        lu.solve_in_place(&mut delta);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let gt = residual(&trial);
            let gtn = max_abs(&gt);
            if gtn.is_finite() && (gtn <= gnorm || lambda < 1.0 / 64.0) {
                z = trial;
                g = gt;
                gnorm = gtn;
                break;
            }
            lambda *= 0.5;
            if lambda < 1.0 / 128.0 {
                return Err(Error::StepRejected("Newton line search failed".into()));
            }
        }
        if lambda * max_abs(&delta) <= NEWTON_TOL * (1.0 + max_abs(&z)) {
            return Ok(z);
        }
    }
    Err(Error::StepRejected(format!(
        "Newton did not converge in {NEWTON_MAX_ITER} iterations"
    )))
}

/// Largest stable IMEX step for the state (explicit convection/transport).
pub fn imex_step_limit(s: &State, m: &Model) -> f64 {
    let h = s.grid().h();
    match m {
        Model::Burgers(_) => {
            let umax = max_abs(s.u().values()).max(1e-300);
            0.9 * h / umax
        }
        Model::JinXin(jx) => 0.9 * h / jx.a,
    }
}

fn imex(s: &State, dt: f64, m: &Model) -> Result<State> {
    let grid = *s.grid();
    let h = grid.h();
    match (m, s) {
        (Model::Burgers(b), State::Burgers(u)) => {
            let uv = u.values();
            let len = uv.len();
            let n = len - 2;
            let mut conv = vec![0.0; len];
            skew_convection(uv, h, &mut conv);
            let c = b.epsilon / (h * h);
            let mut rhs: Vec<f64> = (1..=n).map(|i| uv[i] - dt * conv[i]).collect();
            rhs[0] += dt * c * uv[0];
            rhs[n - 1] += dt * c * uv[len - 1];
            let mat = Tridiagonal::new(
                vec![-dt * c; n - 1],
                vec![1.0 + 2.0 * dt * c; n],
                vec![-dt * c; n - 1],
            );
            let inner = mat.solve(&rhs);
            let mut out = uv.to_vec();
            out[1..=n].copy_from_slice(&inner);
            Ok(State::Burgers(
                GridFunction::new(grid, out).map_err(|e| Error::StepRejected(e.to_string()))?,
            ))
        }
        (Model::JinXin(jx), State::JinXin { u, v }) => {
            let uv = u.values();
            let len = uv.len();
            let mut un = uv.to_vec();
            for i in 1..len - 1 {
                un[i] = uv[i] - dt * (v[i] - v[i - 1]) / h;
            }
            let a2 = jx.a * jx.a;
            let eps = jx.epsilon;
            let vn: Vec<f64> = (0..len - 1)
                .map(|j| {
                    let fbar = 0.5 * ((jx.flux.f)(un[j]) + (jx.flux.f)(un[j + 1]));
                    (v[j] + dt * (-a2 * (un[j + 1] - un[j]) / h + fbar / eps)) / (1.0 + dt / eps)
                })
                .collect();
            let u = GridFunction::new(grid, un).map_err(|e| Error::StepRejected(e.to_string()))?;
            if vn.iter().any(|x| !x.is_finite()) {
                return Err(Error::StepRejected("non-finite relaxation update".into()));
            }
            Ok(State::JinXin { u, v: vn })
        }
        _ => Err(Error::InvalidModel("state does not match the model".into())),
    }
}

/// One step of size `dt`; Newton failure is reported as `StepRejected`.
pub fn step(s: &State, dt: f64, m: &Model, scheme: Scheme) -> Result<State> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    match scheme {
        Scheme::Imex => imex(s, dt, m),
        Scheme::Implicit => {
            let p = Packing::new(m, *s.grid());
            let z = backward_euler(&p, &p.pack(s), dt)?;
            Ok(p.unpack(&z))
        }
    }
}

/// Counters from [`drive`].
#[derive(Debug, Clone, Default)]
pub(crate) struct DriveOutcome {
    pub accepted: usize,
    pub rejected: usize,
    pub aborted: Option<String>,
}

/// Callbacks of the adaptive driver for one kind of state.
pub(crate) trait Stepper {
    type S: Clone;
    fn step(&self, s: &Self::S, dt: f64) -> Result<Self::S>;
    /// Flat view used by the step-doubling error.
    fn flat(&self, s: &Self::S) -> Vec<f64>;
    /// Stability cap on the step (infinite for fully implicit schemes).
    fn dt_limit(&self, _s: &Self::S) -> f64 {
        f64::INFINITY
    }
    /// Called after every accepted step; may replace the state.
    fn after_step(&mut self, _t: f64, _s: &mut Self::S) -> Result<()> {
        Ok(())
    }
}

/// Weighted max-norm step-doubling error.
fn doubling_error(a: &[f64], b: &[f64], cfg: &IntegratorConfig) -> f64 {
    let scale = cfg.abs_tol + cfg.rel_tol * max_abs(b);
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Step-doubling adaptive integration through sorted output times. The
/// two-half-step value is kept on acceptance; the step grows by at most 4x
/// and output times are hit exactly by clipping without shrinking the
/// controller's step. `on_output(k, t, state, dt)` runs at each output time.
pub(crate) fn drive<T: Stepper>(
    stepper: &mut T,
    s0: T::S,
    output_times: &[f64],
    cfg: &IntegratorConfig,
    mut on_output: impl FnMut(usize, f64, &T::S, f64) -> Result<()>,
) -> Result<DriveOutcome> {
    cfg.validate()?;
    if output_times.is_empty() {
        return Err(Error::Config {
            key: "times".into(),
            message: "no output times".into(),
        });
    }
    if output_times.windows(2).any(|w| !(w[1] > w[0])) || !(output_times[0] >= 0.0) {
        return Err(Error::Config {
            key: "times".into(),
            message: "output times must be non-negative and increasing".into(),
        });
    }
    let mut out = DriveOutcome::default();
    let mut s = s0;
    let mut t = 0.0;
    let mut dt_ctrl = cfg.dt_init;
    for (k, &t_out) in output_times.iter().enumerate() {
        while t < t_out {
            let mut dt = dt_ctrl.min(cfg.dt_max).min(stepper.dt_limit(&s));
            let clipped = t + dt >= t_out;
            if clipped {
                dt = t_out - t;
            }
            let attempt = (|| -> Result<(T::S, T::S)> {
                let full = stepper.step(&s, dt)?;
                let half = stepper.step(&s, 0.5 * dt)?;
                let half = stepper.step(&half, 0.5 * dt)?;
                Ok((full, half))
            })();
            let (err, candidate) = match attempt {
                Ok((full, half)) => (
                    doubling_error(&stepper.flat(&full), &stepper.flat(&half), cfg),
                    Some(half),
                ),
                Err(Error::StepRejected(_)) => (f64::INFINITY, None),
                Err(e) => return Err(e),
            };
            match candidate {
                Some(mut next) if err <= 1.0 => {
                    t = if clipped { t_out } else { t + dt };
                    stepper.after_step(t, &mut next)?;
                    s = next;
                    out.accepted += 1;
                    let factor = if err == 0.0 {
                        4.0
                    } else {
                        (0.9 / err.sqrt()).clamp(0.2, 4.0)
                    };
                    let proposed = (dt * factor).min(cfg.dt_max);
                    dt_ctrl = match (clipped, factor < 1.0) {
                        (false, _) => proposed,
                        (true, true) => dt_ctrl.min(proposed),
                        (true, false) => dt_ctrl.max(proposed),
                    };
                }
                _ => {
                    out.rejected += 1;
                    let factor = if err.is_finite() {
                        (0.9 / err.sqrt()).clamp(0.2, 0.9)
                    } else {
                        0.5
                    };
                    dt_ctrl = dt * factor;
                    if dt_ctrl < DT_MIN {
                        out.aborted = Some(format!("step size fell below {DT_MIN} at t = {t}"));
                        return Ok(out);
                    }
                }
            }
        }
        on_output(k, t, &s, dt_ctrl)?;
    }
    Ok(out)
}

/// Newton solve of `F_h(u) = 0` from `guess`.
pub fn discrete_steady_state(guess: &State, m: &Model) -> Result<State> {
    let p = Packing::new(m, *guess.grid());
    let mut z = p.pack(guess);
    for _ in 0..50 {
        let f = p.rhs(&z);
        let lu = p.jacobian(&z).factor();
        if lu.singular {
            return Err(Error::RootFailure(
                "singular Jacobian in steady-state solve".into(),
            ));
        }
        let mut d: Vec<f64> = f.iter().map(|x| -x).collect();
        lu.solve_in_place(&mut d);
        for (a, b) in z.iter_mut().zip(&d) {
            *a += b;
        }
        if max_abs(&d) <= 1e-13 * (1.0 + max_abs(&z)) {
            return Ok(p.unpack(&z));
        }
    }
    Err(Error::RootFailure(
        "steady-state Newton did not converge".into(),
    ))
}
