//! Adaptive long-time runs, layer tracking and per-sample diagnostics.

use super::integrator::{drive, imex_step_limit, step, IntegratorConfig, Packing, Scheme, Stepper};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::models::{Model, State};
use crate::reduction::{perturbation, project_state, ReductionContext};

/// Zero crossing of `u` nearest a previous layer position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerCrossing {
    pub xi: f64,
    /// More than one sign change was found.
    pub multiple: bool,
}

/// Linear interpolation of the sign-change bracket nearest `xi_prev`.
pub fn track_layer(u: &GridFunction, xi_prev: f64) -> Result<LayerCrossing> {
    let vals = u.values();
    let grid = u.grid();
    let mut best: Option<f64> = None;
    let mut count = 0;
    for i in 0..vals.len() - 1 {
        let (a, b) = (vals[i], vals[i + 1]);
        let root = if a == 0.0 {
            // an exact zero node counts when the sign differs across it
            (i > 0 && vals[i - 1] * b < 0.0).then(|| grid.x(i))
        } else if a * b < 0.0 {
            Some(grid.x(i) + grid.h() * a / (a - b))
        } else {
            None
        };
        if let Some(x) = root {
            count += 1;
            if best.is_none_or(|bx| (x - xi_prev).abs() < (bx - xi_prev).abs()) {
                best = Some(x);
            }
        }
    }
    best.map(|xi| LayerCrossing {
        xi,
        multiple: count > 1,
    })
    .ok_or(Error::NoLayer)
}

/// One row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub xi_tracked: f64,
    pub xi_projected: f64,
    pub v_l2: f64,
    pub v_h1: f64,
    pub v1_abs: f64,
    /// Step size proposed by the controller when the sample was taken.
    pub dt: f64,
    pub multiple_crossings: bool,
}

impl TrajectorySample {
    pub const CSV_HEADER: &'static str = "t,xi_tracked,xi_projected,v_l2,v_h1,v1_abs,dt";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t, self.xi_tracked, self.xi_projected, self.v_l2, self.v_h1, self.v1_abs, self.dt
        )
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub state: State,
}

impl Snapshot {
    /// `x u` lines, and for Jin-Xin a second text with `x v` at the midpoints.
    pub fn to_text(&self) -> (String, Option<String>) {
        let grid = self.state.grid();
        let mut u = String::from("x,u\n");
        for (x, val) in grid.nodes().iter().zip(self.state.u().values()) {
            u.push_str(&format!("{x},{val}\n"));
        }
        let v = self.state.v().map(|v| {
            let mut s = String::from("x,v\n");
            for (x, val) in grid.midpoints().iter().zip(v) {
                s.push_str(&format!("{x},{val}\n"));
            }
            s
        });
        (u, v)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: Model,
    pub samples: Vec<TrajectorySample>,
    pub snapshots: Vec<Snapshot>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Reason the run stopped early; the samples recorded so far are kept.
    pub aborted: Option<String>,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TrajectorySample::CSV_HEADER);
        s.push('\n');
        for r in &self.samples {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn sample_at(&self, t: f64) -> Option<&TrajectorySample> {
        self.samples.iter().find(|s| s.t == t)
    }

    pub fn final_state(&self) -> Option<&State> {
        self.snapshots.last().map(|s| &s.state)
    }
}

fn diagnose(
    t: f64,
    s: &State,
    dt: f64,
    xi_prev: f64,
    proj_prev: f64,
    ctx: Option<&ReductionContext>,
) -> TrajectorySample {
    let nan = f64::NAN;
    let (xi_tracked, multiple) = match track_layer(s.u(), xi_prev) {
        Ok(c) => (c.xi, c.multiple),
        Err(_) => (nan, false),
    };
    let mut sample = TrajectorySample {
        t,
        xi_tracked,
        xi_projected: nan,
        v_l2: nan,
        v_h1: nan,
        v1_abs: nan,
        dt,
        multiple_crossings: multiple,
    };
    let Some(ctx) = ctx else { return sample };
    let guess = if proj_prev.is_finite() {
        proj_prev
    } else {
        xi_tracked
    };
    if !guess.is_finite() {
        return sample;
    }
    if let Ok(xi) = project_state(s, guess, ctx).or_else(|_| project_state(s, xi_tracked, ctx)) {
        if let Ok(p) = perturbation(s, xi, ctx) {
            sample.xi_projected = xi;
            sample.v_l2 = p.l2;
            sample.v_h1 = p.h1;
            sample.v1_abs = p.v1_abs;
        }
    }
    sample
}

/// Adaptive integration from `s0` through the sorted `output_times`, with
/// step-doubling error control. Output times are hit exactly; the last one
/// is the final time. With a reduction context each sample also carries the
/// projected layer position and perturbation norms.
pub fn run_adaptive(
    m: &Model,
    s0: &State,
    output_times: &[f64],
    cfg: &IntegratorConfig,
    ctx: Option<&ReductionContext>,
) -> Result<Trajectory> {
    let (bl, br) = m.boundary_values();
    let uv = s0.u().values();
    if (uv[0] - bl).abs() > 1e-12 || (uv[uv.len() - 1] - br).abs() > 1e-12 {
        return Err(Error::BoundaryViolation {
            side: "initial",
            expected: bl,
            found: uv[0],
        });
    }
    let mut traj = Trajectory {
        model: *m,
        samples: Vec::new(),
        snapshots: Vec::new(),
        steps_accepted: 0,
        steps_rejected: 0,
        aborted: None,
    };
    let mut stepper = ModelStepper {
        model: m,
        packing: Packing::new(m, *s0.grid()),
        scheme: cfg.scheme,
    };
    let mut xi_prev = track_layer(s0.u(), 0.0).map(|c| c.xi).unwrap_or(0.0);
    let mut proj_prev = f64::NAN;
    let last = output_times.len().saturating_sub(1);
    let outcome = drive(
        &mut stepper,
        s0.clone(),
        output_times,
        cfg,
        |k, t, s, dt| {
            let sample = diagnose(t, s, dt, xi_prev, proj_prev, ctx);
            if sample.xi_tracked.is_finite() {
                xi_prev = sample.xi_tracked;
            }
            if sample.xi_projected.is_finite() {
                proj_prev = sample.xi_projected;
            }
            traj.samples.push(sample);
            if k % cfg.snapshot_stride == 0 || k == last {
                traj.snapshots.push(Snapshot {
                    t,
                    state: s.clone(),
                });
            }
            Ok(())
        },
    )?;
    traj.steps_accepted = outcome.accepted;
    traj.steps_rejected = outcome.rejected;
    traj.aborted = outcome.aborted;
    Ok(traj)
}

struct ModelStepper<'a> {
    model: &'a Model,
    packing: Packing<'a>,
    scheme: Scheme,
}

impl Stepper for ModelStepper<'_> {
    type S = State;
    fn step(&self, s: &State, dt: f64) -> Result<State> {
        step(s, dt, self.model, self.scheme)
    }
    fn flat(&self, s: &State) -> Vec<f64> {
        self.packing.pack(s)
    }
    fn dt_limit(&self, s: &State) -> f64 {
        match self.scheme {
            Scheme::Imex => imex_step_limit(s, self.model),
            Scheme::Implicit => f64::INFINITY,
        }
    }
}
