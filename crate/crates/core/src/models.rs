//! Viscous Burgers and Jin-Xin relaxation models and their semidiscrete
//! right-hand sides.
//!
//! Burgers convection uses the skew-averaged form, the mean of the
//! conservative `(u²/2)'` and the advective `u u'` differences. Jin-Xin
//! stores `u` at the nodes and `v` at the `n+1` cell midpoints, so only `u`
//! carries boundary data.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};

/// Smooth scalar flux with its derivative.
#[derive(Debug, Clone, Copy)]
pub struct Flux {
    pub f: fn(f64) -> f64,
    pub df: fn(f64) -> f64,
}

impl Flux {
    pub fn quadratic() -> Self {
        Self {
            f: |u| 0.5 * u * u,
            df: |u| u,
        }
    }
}

/// Parameters shared by both models when building layer profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerParams {
    pub epsilon: f64,
    pub ell: f64,
    pub u_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersModel {
    pub epsilon: f64,
    pub ell: f64,
    pub u_star: f64,
}

impl BurgersModel {
    /// `u_star = 0` is accepted as the pure-diffusion degenerate case.
    pub fn new(epsilon: f64, ell: f64, u_star: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "half-length must be positive, got {ell}"
            )));
        }
        if !(u_star >= 0.0 && u_star.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "boundary amplitude must be non-negative, got {u_star}"
            )));
        }
        Ok(Self {
            epsilon,
            ell,
            u_star,
        })
    }

    pub fn layer(&self) -> LayerParams {
        LayerParams {
            epsilon: self.epsilon,
            ell: self.ell,
            u_star: self.u_star,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JinXinModel {
    pub epsilon: f64,
    pub a: f64,
    pub ell: f64,
    /// `u(-ℓ)`
    pub u_minus: f64,
    /// `u(ℓ)`
    pub u_plus: f64,
    pub flux: Flux,
}

impl JinXinModel {
    pub fn new(
        epsilon: f64,
        a: f64,
        ell: f64,
        u_minus: f64,
        u_plus: f64,
        flux: Flux,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "characteristic speed must be positive, got {a}"
            )));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "half-length must be positive, got {ell}"
            )));
        }
        if !u_minus.is_finite() || !u_plus.is_finite() {
            return Err(Error::InvalidModel("boundary data must be finite".into()));
        }
        Ok(Self {
            epsilon,
            a,
            ell,
            u_minus,
            u_plus,
            flux,
        })
    }

    /// Quadratic flux, `a = 1`, `u(∓ℓ) = ±u*`.
    pub fn standard(epsilon: f64, ell: f64, u_star: f64) -> Result<Self> {
        Self::new(epsilon, 1.0, ell, u_star, -u_star, Flux::quadratic())
    }

    /// Whether `a² > max |f'(u)|²` over the boundary-data range, sampled.
    /// Equality (the standard setup) counts as a warning, not a failure.
    pub fn subcharacteristic(&self) -> Subcharacteristic {
        let lo = self.u_minus.min(self.u_plus);
        let hi = self.u_minus.max(self.u_plus);
        let max_speed = (0..=200)
            .map(|k| lo + (hi - lo) * k as f64 / 200.0)
            .map(|u| (self.flux.df)(u).abs())
            .fold(0.0, f64::max);
        if max_speed < self.a * (1.0 - 1e-12) {
            Subcharacteristic::Strict
        } else if max_speed <= self.a * (1.0 + 1e-12) {
            Subcharacteristic::Marginal
        } else {
            Subcharacteristic::Violated
        }
    }

    /// Layer parameters for antisymmetric data `u(∓ℓ) = ±u*` with `a = 1`
    /// and the quadratic flux, the only setting with the tanh family.
    pub fn layer(&self) -> Result<LayerParams> {
        if (self.u_minus + self.u_plus).abs() > 1e-14 * self.u_minus.abs().max(1.0)
            || self.u_minus < 0.0
        {
            return Err(Error::InvalidModel(
                "layer profiles need u(-ℓ) = -u(ℓ) ≥ 0".into(),
            ));
        }
        if (self.a - 1.0).abs() > 1e-14 || (self.flux.f)(2.0) != 2.0 || (self.flux.df)(3.0) != 3.0 {
            return Err(Error::InvalidModel(
                "layer profiles need a = 1 and f(u) = u²/2".into(),
            ));
        }
        Ok(LayerParams {
            epsilon: self.epsilon,
            ell: self.ell,
            u_star: self.u_minus,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcharacteristic {
    Strict,
    Marginal,
    Violated,
}

#[derive(Debug, Clone, Copy)]
pub enum Model {
    Burgers(BurgersModel),
    JinXin(JinXinModel),
}

impl Model {
    pub fn epsilon(&self) -> f64 {
        match self {
            Model::Burgers(m) => m.epsilon,
            Model::JinXin(m) => m.epsilon,
        }
    }

    pub fn ell(&self) -> f64 {
        match self {
            Model::Burgers(m) => m.ell,
            Model::JinXin(m) => m.ell,
        }
    }

    /// Dirichlet data `(u(-ℓ), u(ℓ))`.
    pub fn boundary_values(&self) -> (f64, f64) {
        match self {
            Model::Burgers(m) => (m.u_star, -m.u_star),
            Model::JinXin(m) => (m.u_minus, m.u_plus),
        }
    }

    pub fn layer(&self) -> Result<LayerParams> {
        match self {
            Model::Burgers(m) => Ok(m.layer()),
            Model::JinXin(m) => m.layer(),
        }
    }

    /// Same model with a different ε.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Model> {
        Ok(match self {
            Model::Burgers(m) => Model::Burgers(BurgersModel::new(epsilon, m.ell, m.u_star)?),
            Model::JinXin(m) => Model::JinXin(JinXinModel::new(
                epsilon, m.a, m.ell, m.u_minus, m.u_plus, m.flux,
            )?),
        })
    }

    pub fn is_jinxin(&self) -> bool {
        matches!(self, Model::JinXin(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Burgers(_) => "burgers",
            Model::JinXin(_) => "jinxin",
        }
    }

    pub fn default_grid(&self, n_interior: usize) -> Result<Grid1D> {
        Grid1D::new(-self.ell(), self.ell(), n_interior)
    }
}

/// Model unknowns on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Burgers(GridFunction),
    /// `u` at the nodes; `v` at the cell midpoints (`n_interior + 1` values).
    JinXin {
        u: GridFunction,
        v: Vec<f64>,
    },
}

impl State {
    pub fn u(&self) -> &GridFunction {
        match self {
            State::Burgers(u) => u,
            State::JinXin { u, .. } => u,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        self.u().grid()
    }

    pub fn v(&self) -> Option<&[f64]> {
        match self {
            State::Burgers(_) => None,
            State::JinXin { v, .. } => Some(v),
        }
    }
}

/// Skew-averaged convection `½[(u²/2)' + u u']` at interior nodes.
pub(crate) fn skew_convection(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    let inv = 1.0 / (2.0 * h);
    for i in 1..n - 1 {
        let cons = 0.5 * (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) * inv;
        let adv = u[i] * (u[i + 1] - u[i - 1]) * inv;
        out[i] = 0.5 * (cons + adv);
    }
    out[0] = 0.0;
    out[n - 1] = 0.0;
}

/// `ε u'' − ½[(u²/2)' + u u']` at interior nodes, zero at the boundary.
/// No boundary data are checked.
pub fn burgers_operator(u: &[f64], epsilon: f64, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    burgers_operator_into(u, epsilon, h, &mut out);
    out
}

pub(crate) fn burgers_operator_into(u: &[f64], epsilon: f64, h: f64, out: &mut [f64]) {
    skew_convection(u, h, out);
    let n = u.len();
    let c = epsilon / (h * h);
    for i in 1..n - 1 {
        out[i] = c * (u[i + 1] - 2.0 * u[i] + u[i - 1]) - out[i];
    }
}

/// Jacobian of [`burgers_operator`] with respect to interior values.
pub(crate) fn burgers_jacobian(u: &[f64], epsilon: f64, h: f64) -> crate::tridiag::Tridiagonal {
    let n = u.len() - 2;
    let c = epsilon / (h * h);
    let inv = 1.0 / (2.0 * h);
    let mut sub = vec![0.0; n - 1];
    let mut sup = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    for k in 0..n {
        let i = k + 1;
        // ∂/∂u_i of ½[(u_{i+1}² − u_{i-1}²)/2 + u_i(u_{i+1} − u_{i-1})]/(2h)
        diag[k] = -2.0 * c - 0.5 * (u[i + 1] - u[i - 1]) * inv;
        if k + 1 < n {
            sup[k] = c - 0.5 * (u[i + 1] + u[i]) * inv;
        }
        if k > 0 {
            sub[k - 1] = c + 0.5 * (u[i - 1] + u[i]) * inv;
        }
    }
    crate::tridiag::Tridiagonal::new(sub, diag, sup)
}

fn check_boundary(u: &GridFunction, left: f64, right: f64) -> Result<()> {
    let vals = u.values();
    let n = vals.len();
    if (vals[0] - left).abs() > 1e-12 {
        return Err(Error::BoundaryViolation {
            side: "left",
            expected: left,
            found: vals[0],
        });
    }
    if (vals[n - 1] - right).abs() > 1e-12 {
        return Err(Error::BoundaryViolation {
            side: "right",
            expected: right,
            found: vals[n - 1],
        });
    }
    Ok(())
}

pub fn burgers_rhs(u: &GridFunction, m: &BurgersModel) -> Result<GridFunction> {
    check_boundary(u, m.u_star, -m.u_star)?;
    let values = burgers_operator(u.values(), m.epsilon, u.grid().h());
    Ok(GridFunction::new(*u.grid(), values).expect("finite"))
}

/// Jin-Xin right-hand side on the staggered layout.
///
/// `du_i = −(v_{i+1/2} − v_{i−1/2})/h` at interior nodes and
/// `dv_{i+1/2} = −a²(u_{i+1} − u_i)/h + (f̄_{i+1/2} − v_{i+1/2})/ε` with
/// `f̄_{i+1/2} = (f(u_i) + f(u_{i+1}))/2`.
pub(crate) fn jinxin_operator(
    u: &[f64],
    v: &[f64],
    m: &JinXinModel,
    h: f64,
    du: &mut [f64],
    dv: &mut [f64],
) {
    let n = u.len();
    du[0] = 0.0;
    du[n - 1] = 0.0;
    for i in 1..n - 1 {
        du[i] = -(v[i] - v[i - 1]) / h;
    }
    let a2 = m.a * m.a;
    for j in 0..n - 1 {
        let fbar = 0.5 * ((m.flux.f)(u[j]) + (m.flux.f)(u[j + 1]));
        dv[j] = -a2 * (u[j + 1] - u[j]) / h + (fbar - v[j]) / m.epsilon;
    }
}

pub fn jinxin_rhs(s: &State, m: &JinXinModel) -> Result<State> {
    let State::JinXin { u, v } = s else {
        return Err(Error::InvalidModel(
            "Jin-Xin right-hand side needs a (u, v) state".into(),
        ));
    };
    check_boundary(u, m.u_minus, m.u_plus)?;
    if v.len() != u.values().len() - 1 {
        return Err(Error::InvalidGrid(format!(
            "v needs {} midpoint values, got {}",
            u.values().len() - 1,
            v.len()
        )));
    }
    let mut du = vec![0.0; u.values().len()];
    let mut dv = vec![0.0; v.len()];
    jinxin_operator(u.values(), v, m, u.grid().h(), &mut du, &mut dv);
    Ok(State::JinXin {
        u: GridFunction::new(*u.grid(), du)?,
        v: dv,
    })
}

/// `u0(x) = u*((x/ℓ)²/2 − x/ℓ − 1/2)`, which for `ℓ = u* = 1` is
/// `x²/2 − x − 1/2`; Jin-Xin adds `v0 = f(u0)` at the midpoints.
pub fn default_initial_data(m: &Model, grid: &Grid1D) -> State {
    let (left, _) = m.boundary_values();
    let ell = m.ell();
    let u0 = move |x: f64| {
        let s = x / ell;
        left * (0.5 * s * s - s - 0.5)
    };
    let mut u = grid.sample(u0);
    let (bl, br) = m.boundary_values();
    let n = u.values().len();
    u.values_mut()[0] = bl;
    u.values_mut()[n - 1] = br;
    match m {
        Model::Burgers(_) => State::Burgers(u),
        Model::JinXin(jx) => {
            let v = grid
                .midpoints()
                .into_iter()
                .map(|x| (jx.flux.f)(u0(x)))
                .collect();
            State::JinXin { u, v }
        }
    }
}

/// Nodal samples of the Jin-Xin `v` by averaging neighbouring midpoints,
/// extrapolating linearly to the two boundary nodes.
pub fn jinxin_v_at_nodes(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut out = vec![0.0; m + 1];
    for i in 1..m {
        out[i] = 0.5 * (v[i - 1] + v[i]);
    }
    out[0] = 1.5 * v[0] - 0.5 * v[1];
    out[m] = 1.5 * v[m - 1] - 0.5 * v[m - 2];
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::new(-1.0, 1.0, 399).unwrap()
    }

    #[test]
    fn linear_field_convection() {
        let g = grid();
        let u = g.sample(|x| x);
        let r = burgers_operator(u.values(), 0.1, g.h());
        for (i, ri) in r.iter().enumerate().take(g.len() - 1).skip(1) {
            assert!((ri + g.x(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_is_steady() {
        let g = grid();
        let m = BurgersModel::new(0.1, 1.0, 0.0).unwrap();
        let r = burgers_rhs(&g.zeros(), &m).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn boundary_mismatch_is_reported() {
        let g = grid();
        let m = BurgersModel::new(0.1, 1.0, 1.0).unwrap();
        assert!(matches!(
            burgers_rhs(&g.zeros(), &m),
            Err(Error::BoundaryViolation { .. })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = Grid1D::new(-1.0, 1.0, 12).unwrap();
        let u: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| (3.0 * x).sin() - 0.2 * x)
            .collect();
        let j = burgers_jacobian(&u, 0.07, g.h());
        let base = burgers_operator(&u, 0.07, g.h());
        let d = 1e-7;
        for col in 1..g.len() - 1 {
            let mut up = u.clone();
            up[col] += d;
            let r = burgers_operator(&up, 0.07, g.h());
            for row in 1..g.len() - 1 {
                let fd = (r[row] - base[row]) / d;
                let (k, c) = (row - 1, col - 1);
                let exact = if k == c {
                    j.diag[k]
                } else if c == k + 1 {
                    j.sup[k]
                } else if k == c + 1 {
                    j.sub[c]
                } else {
                    0.0
                };
                assert!(
                    (fd - exact).abs() < 1e-4 * (1.0 + exact.abs()),
                    "({row},{col}) {fd} {exact}"
                );
            }
        }
    }

    #[test]
    fn jinxin_constant_equilibrium() {
        let g = Grid1D::new(-1.0, 1.0, 50).unwrap();
        let c = 0.3;
        let m = JinXinModel::new(0.1, 1.0, 1.0, c, c, Flux::quadratic()).unwrap();
        let s = State::JinXin {
            u: g.sample(|_| c),
            v: vec![0.5 * c * c; g.len() - 1],
        };
        let State::JinXin { u, v } = jinxin_rhs(&s, &m).unwrap() else {
            unreachable!()
        };
        assert!(u.values().iter().all(|x| x.abs() < 1e-15));
        assert!(v.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn jinxin_relaxed_v_leaves_only_transport() {
        let g = Grid1D::new(-1.0, 1.0, 199).unwrap();
        let m = JinXinModel::standard(0.1, 1.0, 1.0).unwrap();
        let State::JinXin { u, .. } = default_initial_data(&Model::JinXin(m), &g) else {
            unreachable!()
        };
        let uv = u.values();
        let v: Vec<f64> = (0..uv.len() - 1)
            .map(|j| 0.25 * (uv[j] * uv[j] + uv[j + 1] * uv[j + 1]))
            .collect();
        let State::JinXin { v: dv, .. } =
            jinxin_rhs(&State::JinXin { u: u.clone(), v }, &m).unwrap()
        else {
            unreachable!()
        };
        for j in 0..dv.len() {
            assert!((dv[j] + (uv[j + 1] - uv[j]) / g.h()).abs() < 1e-10);
        }
    }

    #[test]
    fn initial_data_values() {
        let g = Grid1D::new(-1.0, 1.0, 3).unwrap();
        let State::Burgers(u) = default_initial_data(
            &Model::Burgers(BurgersModel::new(0.1, 1.0, 1.0).unwrap()),
            &g,
        ) else {
            unreachable!()
        };
        assert_eq!(u.values()[0], 1.0);
        assert_eq!(u.values()[4], -1.0);
        assert_eq!(u.values()[2], -0.5);
        let jx = Model::JinXin(JinXinModel::standard(0.1, 1.0, 1.0).unwrap());
        let g = Grid1D::new(-1.0, 1.0, 4).unwrap();
        let State::JinXin { u, v } = default_initial_data(&jx, &g) else {
            unreachable!()
        };
        assert_eq!(v.len(), 5);
        // midpoint 2 sits at x = 0
        assert!((v[2] - 0.125).abs() < 1e-15);
        assert!((u.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn subcharacteristic_marginal_for_standard_setup() {
        let m = JinXinModel::standard(0.1, 1.0, 1.0).unwrap();
        assert_eq!(m.subcharacteristic(), Subcharacteristic::Marginal);
        let m = JinXinModel::new(0.1, 2.0, 1.0, 1.0, -1.0, Flux::quadratic()).unwrap();
        assert_eq!(m.subcharacteristic(), Subcharacteristic::Strict);
        let m = JinXinModel::new(0.1, 0.5, 1.0, 1.0, -1.0, Flux::quadratic()).unwrap();
        assert_eq!(m.subcharacteristic(), Subcharacteristic::Violated);
    }
}
