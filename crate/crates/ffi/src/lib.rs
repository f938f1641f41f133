//! C ABI over the layer-dynamics library.
//!
//! Every entry point returns an `MsStatus`; results go through out-pointers.
//! Objects are opaque handles released with the matching `*_free`. On a
//! non-OK status, `ms_last_error_message` describes the failure for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use metastable::evolve::{run_adaptive, IntegratorConfig, Trajectory};
use metastable::harness::{run_command, Command, ExperimentConfig, RunOptions};
use metastable::models::{default_initial_data, BurgersModel, JinXinModel, Model};
use metastable::reduction::{beta_rate, time_to_reach, ReductionContext};
use metastable::spectral::{eigenpairs, model_eigenvalues, LinearizedOperator};
use metastable::steady::omega_asymptotic;
use metastable::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Aborted = 5,
    Io = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MsStatus {
    match e {
        Error::Config { .. } => MsStatus::Config,
        Error::InvalidGrid(_)
        | Error::InvalidModel(_)
        | Error::LayerAtBoundary { .. }
        | Error::Domain(_) => MsStatus::InvalidArgument,
        Error::RuntimeAbort { .. } => MsStatus::Aborted,
        Error::Io(_) => MsStatus::Io,
        _ => MsStatus::Numerical,
    }
}

/// Runs `f`, mapping library errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), (MsStatus, String)>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MsStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            MsStatus::Panic
        }
    }
}

fn lib(e: Error) -> (MsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MsStatus, String) {
    (MsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, (MsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), (MsStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ms_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Opaque model handle.
pub struct MsModel(Model);

/// Opaque reduced-dynamics context: cached slow mode over the default interval.
pub struct MsContext(ReductionContext);

/// Opaque full-model trajectory.
pub struct MsTrajectory(Trajectory);

/// One trajectory row; NaN marks unavailable columns.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MsSample {
    pub t: f64,
    pub xi_tracked: f64,
    pub xi_projected: f64,
    pub v_l2: f64,
    pub v_h1: f64,
    pub v1_abs: f64,
    pub dt: f64,
}

/// Viscous Burgers model with boundary values `±u_star` on `[−ell, ell]`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_burgers_new(
    epsilon: f64,
    ell: f64,
    u_star: f64,
    out: *mut *mut MsModel,
) -> MsStatus {
    guard(|| {
        let m = BurgersModel::new(epsilon, ell, u_star).map_err(lib)?;
        put(
            out,
            Box::into_raw(Box::new(MsModel(Model::Burgers(m)))),
            "out",
        )
    })
}

/// Jin-Xin relaxation model with quadratic flux and speed `a`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_jinxin_new(
    epsilon: f64,
    a: f64,
    ell: f64,
    u_star: f64,
    out: *mut *mut MsModel,
) -> MsStatus {
    guard(|| {
        let m = JinXinModel::new(
            epsilon,
            a,
            ell,
            u_star,
            -u_star,
            metastable::models::Flux::quadratic(),
        )
        .map_err(lib)?;
        put(
            out,
            Box::into_raw(Box::new(MsModel(Model::JinXin(m)))),
            "out",
        )
    })
}

/// # Safety
/// `model` must be null or a handle from a `ms_*_new` call, freed once.
#[no_mangle]
pub unsafe extern "C" fn ms_model_free(model: *mut MsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Leading eigenvalue (real part) of the model linearized at the profile with layer at `xi`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_lambda1(
    model: *const MsModel,
    xi: f64,
    n_interior: usize,
    out: *mut f64,
) -> MsStatus {
    guard(|| {
        let m = &get(model, "model")?.0;
        let g = m.default_grid(n_interior).map_err(lib)?;
        let op = LinearizedOperator::assemble(xi, m, &g).map_err(lib)?;
        let pairs = eigenpairs(&op, 2).map_err(lib)?;
        put(out, model_eigenvalues(&pairs, m)[0].re(), "out")
    })
}

/// Asymptotic drift amplitude `Ω(ξ)` of the layer.
///
/// # Safety
/// `model` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_omega(model: *const MsModel, xi: f64, out: *mut f64) -> MsStatus {
    guard(|| {
        let m = &get(model, "model")?.0;
        let p = m.layer().map_err(lib)?;
        put(out, omega_asymptotic(xi, &p).value(), "out")
    })
}

/// # Safety
/// `model` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_context_new(
    model: *const MsModel,
    n_interior: usize,
    out: *mut *mut MsContext,
) -> MsStatus {
    guard(|| {
        let m = get(model, "model")?.0;
        let g = m.default_grid(n_interior).map_err(lib)?;
        let c = ReductionContext::with_default_interval(m, g).map_err(lib)?;
        put(out, Box::into_raw(Box::new(MsContext(c))), "out")
    })
}

/// # Safety
/// `ctx` must be null or a handle from `ms_context_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn ms_context_free(ctx: *mut MsContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Reduced layer velocity `θ(ξ)`.
///
/// # Safety
/// `ctx` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_theta(ctx: *const MsContext, xi: f64, out: *mut f64) -> MsStatus {
    guard(|| put(out, get(ctx, "ctx")?.0.theta(xi).map_err(lib)?, "out"))
}

/// Reduced-dynamics travel time from `xi0` to `target`.
///
/// # Safety
/// `ctx` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_time_to_reach(
    ctx: *const MsContext,
    xi0: f64,
    target: f64,
    out: *mut f64,
) -> MsStatus {
    guard(|| {
        put(
            out,
            time_to_reach(xi0, target, &get(ctx, "ctx")?.0).map_err(lib)?,
            "out",
        )
    })
}

/// Convergence rate `β = −θ′(ξ̄)` at the equilibrium `xi_bar`.
///
/// # Safety
/// `ctx` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_beta(ctx: *const MsContext, xi_bar: f64, out: *mut f64) -> MsStatus {
    guard(|| {
        put(
            out,
            beta_rate(xi_bar, &get(ctx, "ctx")?.0).map_err(lib)?,
            "out",
        )
    })
}

/// Full-model run from the default initial data with the default adaptive
/// integrator. An early stop still yields a trajectory; check
/// `ms_trajectory_aborted`.
///
/// # Safety
/// `model` must be a live handle, `times` valid for `n_times` reads and
/// `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_simulate(
    model: *const MsModel,
    n_interior: usize,
    times: *const f64,
    n_times: usize,
    out: *mut *mut MsTrajectory,
) -> MsStatus {
    guard(|| {
        let m = &get(model, "model")?.0;
        if times.is_null() {
            return Err(null("times"));
        }
        let times = std::slice::from_raw_parts(times, n_times);
        let g = m.default_grid(n_interior).map_err(lib)?;
        let s0 = default_initial_data(m, &g);
        let tr = run_adaptive(m, &s0, times, &IntegratorConfig::default(), None).map_err(lib)?;
        put(out, Box::into_raw(Box::new(MsTrajectory(tr))), "out")
    })
}

/// # Safety
/// `traj` must be null or a handle from `ms_simulate`, freed once.
#[no_mangle]
pub unsafe extern "C" fn ms_trajectory_free(traj: *mut MsTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// # Safety
/// `traj` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_trajectory_len(traj: *const MsTrajectory, out: *mut usize) -> MsStatus {
    guard(|| put(out, get(traj, "traj")?.0.samples.len(), "out"))
}

/// # Safety
/// `traj` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_trajectory_aborted(
    traj: *const MsTrajectory,
    out: *mut bool,
) -> MsStatus {
    guard(|| put(out, get(traj, "traj")?.0.aborted.is_some(), "out"))
}

/// # Safety
/// `traj` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ms_trajectory_sample(
    traj: *const MsTrajectory,
    index: usize,
    out: *mut MsSample,
) -> MsStatus {
    guard(|| {
        let tr = &get(traj, "traj")?.0;
        let s = tr.samples.get(index).ok_or_else(|| {
            (
                MsStatus::InvalidArgument,
                format!("index {index} out of range ({})", tr.samples.len()),
            )
        })?;
        let row = MsSample {
            t: s.t,
            xi_tracked: s.xi_tracked,
            xi_projected: s.xi_projected,
            v_l2: s.v_l2,
            v_h1: s.v_h1,
            v1_abs: s.v1_abs,
            dt: s.dt,
        };
        put(out, row, "out")
    })
}

/// Runs a CLI subcommand (`simulate`, `table1`, `table2`, `spectrum`,
/// `hypotheses`, `coupled`) with configuration text, writing into `out_dir`.
/// Aborted runs return `MS_STATUS_ABORTED` after writing partial outputs.
///
/// # Safety
/// All string arguments must be null-terminated and valid.
#[no_mangle]
pub unsafe extern "C" fn ms_run_command(
    command: *const c_char,
    config_text: *const c_char,
    out_dir: *const c_char,
    jobs: usize,
) -> MsStatus {
    guard(|| {
        let cmd = match text(command, "command")? {
            "simulate" => Command::Simulate,
            "table1" => Command::Table1,
            "table2" => Command::Table2,
            "spectrum" => Command::Spectrum,
            "hypotheses" => Command::Hypotheses,
            "coupled" => Command::Coupled,
            other => {
                return Err((
                    MsStatus::InvalidArgument,
                    format!("unknown command `{other}`"),
                ))
            }
        };
        let cfg = ExperimentConfig::parse(text(config_text, "config_text")?).map_err(lib)?;
        let opts = RunOptions {
            out_dir: PathBuf::from(text(out_dir, "out_dir")?),
            jobs: jobs.max(1),
            long: false,
        };
        let out = run_command(cmd, &cfg, &opts).map_err(lib)?;
        if out.aborted.is_empty() {
            Ok(())
        } else {
            Err((MsStatus::Aborted, out.aborted.join("; ")))
        }
    })
}
