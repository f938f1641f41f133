//! Fast/remainder split `v = z + R` of a coupled trajectory, with
//! `z = Σ_{k≥2} v_k(0) E_k(t) φ_k(·; ξ(t))` and `E_k = exp ∫₀ᵗ λ_k(ξ(σ)) dσ`.

use super::coupled::CoupledTrajectory;
use crate::error::{Error, Result};
use crate::grid::{inner_product, norm, NormKind};
use crate::reduction::{ctx_pairs, ReductionContext};

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub t: Vec<f64>,
    pub z_h1: Vec<f64>,
    pub r_h1: Vec<f64>,
    /// Initial coefficients `v_k(0)`, `k = 1..m_count`.
    pub initial_coeffs: Vec<f64>,
    /// Mean of `λ₂` along the path.
    pub lambda2_mean: f64,
    /// The path left the cached interval and eigenvalues were extrapolated.
    pub extrapolated: bool,
}

impl Decomposition {
    /// Mean `|R|_{H¹}` over samples with `t ≥ t_from`.
    pub fn remainder_plateau(&self, t_from: f64) -> f64 {
        let tail: Vec<f64> = self
            .t
            .iter()
            .zip(&self.r_h1)
            .filter(|(t, _)| **t >= t_from)
            .map(|(_, r)| *r)
            .collect();
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

pub fn z_decomposition(
    traj: &CoupledTrajectory,
    m_count: usize,
    ctx: &ReductionContext,
) -> Result<Decomposition> {
    if m_count < 2 {
        return Err(Error::Domain(
            "the decomposition needs at least two modes".into(),
        ));
    }
    let (Some(first), Some(p0)) = (traj.states.first(), traj.path.first()) else {
        return Err(Error::Domain("empty trajectory".into()));
    };
    // eigenvalues on the cache nodes, interpolated along the path
    let node_lambdas: Vec<Vec<f64>> = ctx
        .cheb
        .nodes
        .iter()
        .map(|&xi| ctx_pairs(xi, m_count, ctx).map(|p| p.lambda))
        .collect::<Result<_>>()?;
    let lambda_at = |xi: f64| -> Vec<f64> {
        let c = ctx.cheb.coefficients(xi);
        (0..m_count)
            .map(|k| c.iter().zip(&node_lambdas).map(|(w, l)| w * l[k]).sum())
            .collect()
    };
    let extrapolated = traj.path.iter().any(|p| !ctx.contains(p.xi));

    if first.0 != 0.0 {
        return Err(Error::Domain(
            "the trajectory must have t = 0 among its output times".into(),
        ));
    }
    let xi0 = p0.xi;
    let pairs0 = ctx_pairs(xi0, m_count, ctx)?;
    let v0 = &first.1.v;
    let coeffs: Vec<f64> = pairs0
        .psi
        .iter()
        .map(|p| inner_product(p, v0))
        .collect::<Result<_>>()?;

    let mut integral = vec![0.0; m_count];
    let mut prev = lambda_at(xi0);
    let mut lambda2_acc = 0.0;
    let mut state_idx = 0;
    let mut out = Decomposition {
        t: Vec::new(),
        z_h1: Vec::new(),
        r_h1: Vec::new(),
        initial_coeffs: coeffs.clone(),
        lambda2_mean: 0.0,
        extrapolated,
    };
    let mut record = |t: f64, integral: &[f64], out: &mut Decomposition| -> Result<()> {
        while state_idx < traj.states.len() && traj.states[state_idx].0 < t {
            state_idx += 1;
        }
        if state_idx >= traj.states.len() || traj.states[state_idx].0 != t {
            return Ok(());
        }
        let (_, st) = &traj.states[state_idx];
        let pairs = ctx_pairs(st.xi, m_count, ctx)?;
        let mut z = ctx.grid.zeros();
        for k in 1..m_count {
            z.axpy(coeffs[k] * integral[k].exp(), &pairs.phi[k]);
        }
        let r = st.v.sub(&z);
        out.t.push(t);
        out.z_h1.push(norm(&z, NormKind::H1));
        out.r_h1.push(norm(&r, NormKind::H1));
        Ok(())
    };
    record(0.0, &integral, &mut out)?;
    for w in traj.path.windows(2) {
        let dt = w[1].t - w[0].t;
        let cur = lambda_at(w[1].xi);
        for k in 0..m_count {
            integral[k] += 0.5 * dt * (prev[k] + cur[k]);
        }
        lambda2_acc += 0.5 * dt * (prev[1] + cur[1]);
        prev = cur;
        record(w[1].t, &integral, &mut out)?;
    }
    let span = traj.path.last().map(|p| p.t).unwrap_or(0.0);
    out.lambda2_mean = if span > 0.0 {
        lambda2_acc / span
    } else {
        prev[1]
    };
    Ok(out)
}
