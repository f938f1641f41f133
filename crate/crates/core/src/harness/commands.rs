//! Experiment orchestration behind the CLI subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{ExperimentConfig, ModelKind};
use super::reference::{ReferenceTable, TABLE1, TABLE2};
use crate::error::{Error, Result};
use crate::evolve::{run_adaptive, simulate_coupled, z_decomposition, Trajectory};
use crate::models::{default_initial_data, BurgersModel, Model};
use crate::reduction::{ctx_pairs, default_interval, RateBundle, ReductionContext};
use crate::spectral::{
    check_hypotheses, eigenpairs, lambda1_asymptotic, model_eigenvalues, HypothesisReport,
    LinearizedOperator, RATIO_THRESHOLD,
};
use crate::steady::{margin, omega_asymptotic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Table1,
    Table2,
    Spectrum,
    Hypotheses,
    Coupled,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub jobs: usize,
    /// Include the slow small-ε table columns.
    pub long: bool,
}

#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    /// Runs that stopped early; their partial outputs are still written.
    pub aborted: Vec<String>,
    pub summary: Vec<String>,
}

/// Maps `f` over `items` on up to `jobs` threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every item mapped"))
        .collect()
}

fn write(out: &mut CommandOutput, dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    out.files.push(path);
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n as f64 - 1.0))
        .collect()
}

fn interval(cfg: &ExperimentConfig, m: &Model) -> (f64, f64) {
    cfg.j_interval.unwrap_or_else(|| default_interval(m))
}

fn context(cfg: &ExperimentConfig, m: Model) -> Result<ReductionContext> {
    let grid = m.default_grid(cfg.n_interior)?;
    ReductionContext::new(m, grid, interval(cfg, &m))
}

fn epsilons(cfg: &ExperimentConfig, default: &[f64]) -> Vec<f64> {
    cfg.epsilons.clone().unwrap_or_else(|| default.to_vec())
}

fn tag(m: &Model) -> String {
    format!("{}_eps{}", m.name(), m.epsilon())
}

/// Trajectory of one model from the default initial data. Projection
/// failures leave NaN columns; a context failure disables projection.
fn trajectory_for(
    cfg: &ExperimentConfig,
    m: Model,
    times: &[f64],
) -> Result<(Trajectory, Option<String>)> {
    let grid = m.default_grid(cfg.n_interior)?;
    let s0 = default_initial_data(&m, &grid);
    let (ctx, note) = if cfg.project {
        match context(cfg, m) {
            Ok(c) => (Some(c), None),
            Err(e) => (
                None,
                Some(format!("{}: projection disabled ({e})", tag(&m))),
            ),
        }
    } else {
        (None, None)
    };
    Ok((
        run_adaptive(&m, &s0, times, &cfg.integrator, ctx.as_ref())?,
        note,
    ))
}

fn write_trajectory(out: &mut CommandOutput, dir: &Path, m: &Model, tr: &Trajectory) -> Result<()> {
    let t = tag(m);
    write(out, dir, &format!("trajectory_{t}.csv"), &tr.to_csv())?;
    for snap in &tr.snapshots {
        let (u, v) = snap.to_text();
        write(out, dir, &format!("snapshot_{t}_t{}.txt", snap.t), &u)?;
        if let Some(v) = v {
            write(out, dir, &format!("snapshot_{t}_t{}_v.txt", snap.t), &v)?;
        }
    }
    if let Some(reason) = &tr.aborted {
        out.aborted.push(format!("{t}: {reason}"));
    }
    Ok(())
}

pub fn run_command(
    cmd: Command,
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<CommandOutput> {
    cfg.validate()?;
    fs::create_dir_all(&opts.out_dir)?;
    match cmd {
        Command::Simulate => simulate(cfg, opts),
        Command::Table1 => table(cfg, opts, &TABLE1, ModelKind::Burgers),
        Command::Table2 => table(cfg, opts, &TABLE2, ModelKind::JinXin),
        Command::Spectrum => spectrum(cfg, opts),
        Command::Hypotheses => hypotheses(cfg, opts),
        Command::Coupled => coupled(cfg, opts),
    }
}

fn simulate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandOutput> {
    let eps = epsilons(cfg, &[0.1]);
    let times = cfg
        .times
        .clone()
        .unwrap_or_else(|| vec![0.2, 1.0, 10.0, 100.0, 1000.0]);
    let models: Vec<Model> = eps
        .iter()
        .map(|&e| cfg.model_for(e))
        .collect::<Result<_>>()?;
    let runs = par_map(&models, opts.jobs, |m| trajectory_for(cfg, *m, &times));
    let mut out = CommandOutput::default();
    for (m, run) in models.iter().zip(runs) {
        match run {
            Ok((tr, note)) => {
                write_trajectory(&mut out, &opts.out_dir, m, &tr)?;
                out.summary.extend(note);
                if let Some(last) = tr.samples.last() {
                    out.summary.push(format!(
                        "{}: t = {} xi = {}",
                        tag(m),
                        last.t,
                        last.xi_tracked
                    ));
                }
            }
            Err(e) => out.aborted.push(format!("{}: {e}", tag(m))),
        }
    }
    Ok(out)
}

fn table(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    reference: &ReferenceTable,
    kind: ModelKind,
) -> Result<CommandOutput> {
    let base = ExperimentConfig {
        model: kind,
        ..cfg.clone()
    };
    let eps = epsilons(cfg, reference.columns(opts.long));
    let models: Vec<Model> = eps
        .iter()
        .map(|&e| base.model_for(e))
        .collect::<Result<_>>()?;
    let runs = par_map(&models, opts.jobs, |m| {
        trajectory_for(&base, *m, reference.times)
    });
    let mut out = CommandOutput::default();
    let mut columns = Vec::new();
    for (m, run) in models.iter().zip(runs) {
        match run {
            Ok((tr, note)) => {
                write_trajectory(&mut out, &opts.out_dir, m, &tr)?;
                out.summary.extend(note);
                columns.push(
                    reference
                        .times
                        .iter()
                        .map(|&t| tr.sample_at(t).map_or(f64::NAN, |s| s.xi_tracked))
                        .collect(),
                );
            }
            Err(e) => {
                out.aborted.push(format!("{}: {e}", tag(m)));
                columns.push(vec![f64::NAN; reference.times.len()]);
            }
        }
    }
    let mut csv = String::from("t");
    for e in &eps {
        csv.push_str(&format!(",{e}"));
    }
    csv.push('\n');
    let mut diff = String::from("t,epsilon,computed,reference,difference\n");
    for (i, t) in reference.times.iter().enumerate() {
        csv.push_str(&format!("{t}"));
        for (j, e) in eps.iter().enumerate() {
            let xi: f64 = columns[j][i];
            csv.push_str(&format!(",{xi}"));
            let r = reference.value(*t, *e).unwrap_or(f64::NAN);
            diff.push_str(&format!("{t},{e},{xi},{r},{}\n", xi - r));
        }
        csv.push('\n');
    }
    write(
        &mut out,
        &opts.out_dir,
        &format!("{}.csv", reference.name),
        &csv,
    )?;
    write(
        &mut out,
        &opts.out_dir,
        &format!("{}_diff.csv", reference.name),
        &diff,
    )?;
    Ok(out)
}

/// Default ξ samples: 13 points across J shrunk by 2%, kept inside the margin.
fn xi_samples(cfg: &ExperimentConfig, m: &Model) -> Result<Vec<f64>> {
    let p = m.layer()?;
    let (a, b) = interval(cfg, m);
    let lim = m.ell() - margin(&p);
    let list = cfg
        .xi_samples
        .clone()
        .unwrap_or_else(|| linspace(0.98 * a, 0.98 * b, 13));
    Ok(list.into_iter().filter(|x| x.abs() <= lim).collect())
}

struct SpectrumRow {
    epsilon: f64,
    xi: f64,
    lambdas: Vec<f64>,
    asym: f64,
    omega: f64,
    ok: bool,
}

fn spectrum_row(m: &Model, cfg: &ExperimentConfig, xi: f64) -> SpectrumRow {
    let p = m.layer().expect("layer checked by caller");
    let omega = omega_asymptotic(xi, &p).value();
    let asym = lambda1_asymptotic(xi, m)
        .map(|l| l.value())
        .unwrap_or(f64::NAN);
    let lambdas = m
        .default_grid(cfg.n_interior)
        .and_then(|g| LinearizedOperator::assemble(xi, m, &g))
        .and_then(|op| eigenpairs(&op, cfg.modes))
        .map(|pairs| {
            model_eigenvalues(&pairs, m)
                .iter()
                .map(|l| l.re())
                .collect::<Vec<f64>>()
        });
    match lambdas {
        Ok(l) => SpectrumRow {
            epsilon: m.epsilon(),
            xi,
            lambdas: l,
            asym,
            omega,
            ok: true,
        },
        Err(_) => SpectrumRow {
            epsilon: m.epsilon(),
            xi,
            lambdas: vec![f64::NAN; cfg.modes],
            asym,
            omega,
            ok: false,
        },
    }
}

fn spectrum(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandOutput> {
    let eps = epsilons(cfg, &[0.1, 0.08, 0.06]);
    let mut tasks = Vec::new();
    for &e in &eps {
        let m = cfg.model_for(e)?;
        for xi in xi_samples(cfg, &m)? {
            tasks.push((m, xi));
        }
    }
    let rows = par_map(&tasks, opts.jobs, |(m, xi)| spectrum_row(m, cfg, *xi));
    let mut csv = String::from("epsilon,xi");
    for k in 1..=cfg.modes {
        csv.push_str(&format!(",lambda{k}"));
    }
    csv.push_str(",lambda1_asym,omega,ratio,ok\n");
    let mut max_ratio: f64 = 0.0;
    for r in &rows {
        let ratio = (r.omega / r.lambdas[0]).abs();
        if r.ok {
            max_ratio = max_ratio.max(ratio);
        }
        csv.push_str(&format!("{},{}", r.epsilon, r.xi));
        for l in &r.lambdas {
            csv.push_str(&format!(",{l}"));
        }
        csv.push_str(&format!(",{},{},{},{}\n", r.asym, r.omega, ratio, r.ok));
    }
    // pure diffusion control: U ≡ 0 against −ε(kπ/2ℓ)²
    let mut control = String::from("epsilon,k,lambda,exact,rel_err\n");
    for &e in &eps {
        let m = Model::Burgers(BurgersModel::new(e, cfg.ell, 0.0)?);
        let g = m.default_grid(cfg.n_interior)?;
        let pairs = eigenpairs(&LinearizedOperator::assemble(0.0, &m, &g)?, cfg.modes)?;
        for (k, l) in pairs.lambda.iter().enumerate() {
            let exact = -e * ((k + 1) as f64 * std::f64::consts::PI / (2.0 * cfg.ell)).powi(2);
            control.push_str(&format!(
                "{e},{},{l},{exact},{}\n",
                k + 1,
                (l - exact).abs() / exact.abs()
            ));
        }
    }
    let mut out = CommandOutput::default();
    write(&mut out, &opts.out_dir, "spectrum.csv", &csv)?;
    write(&mut out, &opts.out_dir, "spectrum_control.csv", &control)?;
    let ok = rows.iter().filter(|r| r.ok).count();
    out.summary.push(format!("{ok}/{} eigensolves succeeded; max |omega/lambda1| = {max_ratio} (threshold {RATIO_THRESHOLD})", rows.len()));
    if (ok as f64) < 0.9 * rows.len() as f64 {
        return Err(Error::RuntimeAbort {
            t: 0.0,
            reason: format!("only {ok} of {} eigensolves succeeded", rows.len()),
        });
    }
    Ok(out)
}

fn hypotheses(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandOutput> {
    let eps = epsilons(cfg, &[0.1, 0.08, 0.06]);
    let m = cfg.model_for(eps[0])?;
    // samples must respect the margin of the smallest ε
    let smallest = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let xis = xi_samples(cfg, &cfg.model_for(smallest)?)?;
    let indexed: Vec<(usize, f64)> = eps.iter().cloned().enumerate().collect();
    // per-ε seeds match a single sequential lattice run
    let reports = par_map(&indexed, opts.jobs, |&(i, e)| {
        check_hypotheses(
            &m,
            &xis,
            &[e],
            cfg.n_interior,
            cfg.seed.wrapping_add(1000 * i as u64),
        )
    });
    let mut samples = Vec::new();
    for r in reports {
        samples.extend(r?.samples);
    }
    let mut csv = String::from(
        "epsilon,xi,lambda1,lambda2_re,omega,ratio,gap_ok,ratio_ok,decay_nu,decay_C\n",
    );
    for s in &samples {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.epsilon,
            s.xi,
            s.lambda1,
            s.lambda2_re,
            s.omega,
            s.ratio,
            s.gap_ok,
            s.ratio_ok,
            s.decay_nu,
            s.decay_c
        ));
    }
    let report = HypothesisReport::from_samples(&m, &xis, &eps, samples)?;
    let rates = par_map(&eps, opts.jobs, |&e| -> Result<RateBundle> {
        RateBundle::compute(&context(cfg, cfg.model_for(e)?)?, 0.0)
    });
    let mut rcsv = String::from("epsilon,beta,mu,omega_sup,lambda1_sup\n");
    let mut out = CommandOutput::default();
    for (e, r) in eps.iter().zip(rates) {
        match r {
            Ok(r) => rcsv.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epsilon, r.beta, r.mu, r.omega_sup, r.lambda1_sup
            )),
            Err(err) => out
                .summary
                .push(format!("rates for epsilon {e} unavailable: {err}")),
        }
    }
    write(&mut out, &opts.out_dir, "hypotheses.csv", &csv)?;
    write(&mut out, &opts.out_dir, "rates.csv", &rcsv)?;
    let h4 = report.h4.map_or("not run".to_string(), |b| b.to_string());
    out.summary.push(format!(
        "H1 {} H2 {} H3 {} H4 {}; gap spread {}",
        report.h1,
        report.h2,
        report.h3,
        h4,
        report.gap_spread()
    ));
    Ok(out)
}

fn coupled(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CommandOutput> {
    if cfg.model != ModelKind::Burgers {
        return Err(Error::Config {
            key: "model".into(),
            message: "coupled runs need model = burgers".into(),
        });
    }
    let eps = epsilons(cfg, &[0.1]);
    let mut times = cfg.times.clone().unwrap_or_else(|| linspace(0.0, 10.0, 21));
    if times[0] != 0.0 {
        times.insert(0, 0.0);
    }
    let run = |&e: &f64| -> Result<(
        crate::evolve::CoupledTrajectory,
        crate::evolve::Decomposition,
    )> {
        let ctx = context(cfg, cfg.model_for(e)?)?;
        let pairs = ctx_pairs(cfg.xi0, cfg.m_count, &ctx)?;
        let mut v0 = ctx.grid.zeros();
        for &k in &cfg.v0_modes {
            v0.axpy(cfg.v0_amplitude, &pairs.phi[k - 1]);
        }
        let tr = simulate_coupled(
            cfg.xi0,
            &v0,
            &times,
            cfg.coupled_mode,
            &cfg.integrator,
            &ctx,
        )?;
        let d = z_decomposition(&tr, cfg.m_count, &ctx)?;
        Ok((tr, d))
    };
    let results = par_map(&eps, opts.jobs, run);
    let mode = match cfg.coupled_mode {
        crate::evolve::CoupledMode::Complete => "complete",
        crate::evolve::CoupledMode::QuasiLinear => "quasi_linear",
    };
    let mut out = CommandOutput::default();
    for (e, r) in eps.iter().zip(results) {
        match r {
            Ok((tr, d)) => {
                write(
                    &mut out,
                    &opts.out_dir,
                    &format!("coupled_{mode}_eps{e}.csv"),
                    &tr.to_csv(),
                )?;
                let mut dc = String::from("t,z_h1,r_h1\n");
                for k in 0..d.t.len() {
                    dc.push_str(&format!("{},{},{}\n", d.t[k], d.z_h1[k], d.r_h1[k]));
                }
                write(
                    &mut out,
                    &opts.out_dir,
                    &format!("decomposition_{mode}_eps{e}.csv"),
                    &dc,
                )?;
                out.summary
                    .push(format!("epsilon {e}: {} re-projections", tr.reprojections));
                if let Some(reason) = tr.aborted {
                    out.aborted.push(format!("epsilon {e}: {reason}"));
                }
            }
            Err(err) => out.aborted.push(format!("epsilon {e}: {err}")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    fn opts(dir: &Path, jobs: usize) -> RunOptions {
        RunOptions {
            out_dir: dir.to_path_buf(),
            jobs,
            long: false,
        }
    }

    #[test]
    fn par_map_keeps_input_order() {
        let items: Vec<u64> = (0..50).collect();
        let out = par_map(&items, 4, |x| x * x);
        assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!(par_map(&Vec::<u64>::new(), 3, |x| *x).is_empty());
    }

    #[test]
    fn simulate_writes_identical_files_for_any_job_count() {
        let cfg = small("epsilon = 0.1, 0.09\nn_interior = 99\ntimes = 0.2, 1\n");
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let o1 = run_command(Command::Simulate, &cfg, &opts(d1.path(), 1)).unwrap();
        let o2 = run_command(Command::Simulate, &cfg, &opts(d2.path(), 2)).unwrap();
        assert!(o1.aborted.is_empty());
        assert_eq!(o1.files.len(), o2.files.len());
        for (a, b) in o1.files.iter().zip(&o2.files) {
            assert_eq!(a.file_name(), b.file_name());
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
        let csv = fs::read_to_string(d1.path().join("trajectory_burgers_eps0.1.csv")).unwrap();
        assert!(csv.starts_with("t,xi_tracked,xi_projected,v_l2,v_h1,v1_abs,dt\n"));
        assert!(d1.path().join("snapshot_burgers_eps0.1_t0.2.txt").exists());
    }

    #[test]
    fn jinxin_snapshots_include_the_flux_variable() {
        let cfg =
            small("model = jinxin\nepsilon = 0.1\nn_interior = 99\ntimes = 0.2\nproject = false\n");
        let d = tempfile::tempdir().unwrap();
        run_command(Command::Simulate, &cfg, &opts(d.path(), 1)).unwrap();
        let v = fs::read_to_string(d.path().join("snapshot_jinxin_eps0.1_t0.2_v.txt")).unwrap();
        assert!(v.starts_with("x,v\n"));
    }

    #[test]
    fn hypotheses_csv_has_the_documented_columns() {
        let cfg = small("epsilon = 0.1\nn_interior = 199\nxi_samples = -0.2, 0, 0.2\n");
        let d = tempfile::tempdir().unwrap();
        run_command(Command::Hypotheses, &cfg, &opts(d.path(), 2)).unwrap();
        let csv = fs::read_to_string(d.path().join("hypotheses.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("epsilon,xi,lambda1,lambda2_re,omega,ratio,gap_ok,ratio_ok,decay_nu,decay_C")
        );
        assert_eq!(lines.count(), 3);
        let rates = fs::read_to_string(d.path().join("rates.csv")).unwrap();
        assert!(rates.starts_with("epsilon,beta,mu,omega_sup,lambda1_sup\n"));
    }

    #[test]
    fn coupled_rejects_jinxin() {
        let cfg = small("model = jinxin\n");
        let d = tempfile::tempdir().unwrap();
        let e = run_command(Command::Coupled, &cfg, &opts(d.path(), 1)).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
    }
}
