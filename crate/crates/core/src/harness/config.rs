//! Line-based `key = value` experiment configuration with `#` comments.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::evolve::{CoupledMode, IntegratorConfig, Scheme};
use crate::models::{BurgersModel, Flux, JinXinModel, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Burgers,
    JinXin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// `None` means "use the command's default list".
    pub epsilons: Option<Vec<f64>>,
    pub n_interior: usize,
    pub ell: f64,
    pub u_star: f64,
    /// Jin-Xin characteristic speed.
    pub a: f64,
    pub times: Option<Vec<f64>>,
    pub integrator: IntegratorConfig,
    pub j_interval: Option<(f64, f64)>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub xi_samples: Option<Vec<f64>>,
    /// Eigenvalues reported per row by the spectrum command.
    pub modes: usize,
    /// Solve the projection constraint at every trajectory sample.
    pub project: bool,
    pub coupled_mode: CoupledMode,
    pub xi0: f64,
    pub v0_amplitude: f64,
    /// 1-based mode indices summed into the initial perturbation.
    pub v0_modes: Vec<usize>,
    /// Modes kept in the fast/remainder split.
    pub m_count: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Burgers,
            epsilons: None,
            n_interior: 799,
            ell: 1.0,
            u_star: 1.0,
            a: 1.0,
            times: None,
            integrator: IntegratorConfig::default(),
            j_interval: None,
            out_dir: None,
            seed: 7,
            xi_samples: None,
            modes: 5,
            project: true,
            coupled_mode: CoupledMode::Complete,
            xi0: -0.3,
            v0_amplitude: 0.01,
            v0_modes: vec![2],
            m_count: 10,
        }
    }
}

pub const KEYS: &[&str] = &[
    "model",
    "epsilon",
    "n_interior",
    "ell",
    "u_star",
    "a",
    "times",
    "dt_init",
    "dt_max",
    "rel_tol",
    "abs_tol",
    "scheme",
    "snapshot_stride",
    "j_interval",
    "out_dir",
    "seed",
    "xi_samples",
    "modes",
    "project",
    "coupled_mode",
    "xi0",
    "v0_amplitude",
    "v0_modes",
    "m_count",
];

fn err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn scalar(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| err(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(err(key, format!("`{v}` is not finite")));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| err(key, format!("`{v}` is not a non-negative integer")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(err(key, "list is empty"));
    }
    items.into_iter().map(|s| scalar(key, s)).collect()
}

fn positive(key: &str, x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(err(key, format!("must be positive, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(
                    line,
                    format!("line {} is not of the form `key = value`", lineno + 1),
                ));
            };
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(err(key, "unknown key"));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(key, "key given twice"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "model" => {
                self.model = match v {
                    "burgers" => ModelKind::Burgers,
                    "jinxin" => ModelKind::JinXin,
                    _ => {
                        return Err(err(
                            key,
                            format!("unknown model `{v}` (expected burgers or jinxin)"),
                        ))
                    }
                }
            }
            "epsilon" => {
                let l = list(key, v)?;
                for e in &l {
                    positive(key, *e)?;
                }
                self.epsilons = Some(l);
            }
            "n_interior" => self.n_interior = count(key, v)?,
            "ell" => self.ell = positive(key, scalar(key, v)?)?,
            "u_star" => self.u_star = scalar(key, v)?,
            "a" => self.a = positive(key, scalar(key, v)?)?,
            "times" => self.times = Some(list(key, v)?),
            "dt_init" => self.integrator.dt_init = scalar(key, v)?,
            "dt_max" => self.integrator.dt_max = scalar(key, v)?,
            "rel_tol" => self.integrator.rel_tol = scalar(key, v)?,
            "abs_tol" => self.integrator.abs_tol = scalar(key, v)?,
            "scheme" => self.integrator.scheme = v.parse::<Scheme>().map_err(|m| err(key, m))?,
            "snapshot_stride" => self.integrator.snapshot_stride = count(key, v)?,
            "j_interval" => {
                let l = list(key, v)?;
                if l.len() != 2 || !(l[0] < l[1]) {
                    return Err(err(key, "expected two increasing values `lo, hi`"));
                }
                self.j_interval = Some((l[0], l[1]));
            }
            "out_dir" => {
                if v.is_empty() {
                    return Err(err(key, "empty path"));
                }
                self.out_dir = Some(PathBuf::from(v));
            }
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| err(key, format!("`{v}` is not an unsigned integer")))?
            }
            "xi_samples" => self.xi_samples = Some(list(key, v)?),
            "modes" => self.modes = count(key, v)?,
            "project" => {
                self.project = match v {
                    "true" => true,
                    "false" => false,
                    _ => return Err(err(key, format!("expected true or false, got `{v}`"))),
                }
            }
            "coupled_mode" => {
                self.coupled_mode = v.parse::<CoupledMode>().map_err(|m| err(key, m))?
            }
            "xi0" => self.xi0 = scalar(key, v)?,
            "v0_amplitude" => self.v0_amplitude = scalar(key, v)?,
            "v0_modes" => {
                let l = list(key, v)?;
                let mut modes = Vec::with_capacity(l.len());
                for x in l {
                    if x < 1.0 || x.fract() != 0.0 {
                        return Err(err(
                            key,
                            format!("mode indices are positive integers, got {x}"),
                        ));
                    }
                    modes.push(x as usize);
                }
                self.v0_modes = modes;
            }
            "m_count" => self.m_count = count(key, v)?,
            _ => return Err(err(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if self.n_interior < 3 {
            return Err(err("n_interior", "at least 3 interior nodes are needed"));
        }
        if self.u_star < 0.0 {
            return Err(err("u_star", "must be non-negative"));
        }
        if self.modes == 0 {
            return Err(err("modes", "must be at least 1"));
        }
        if self.m_count < 2 {
            return Err(err("m_count", "must be at least 2"));
        }
        if let Some(t) = &self.times {
            if t.iter().any(|x| *x < 0.0) || t.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(err("times", "must be non-negative and strictly increasing"));
            }
        }
        if self.v0_modes.iter().any(|&k| k > self.m_count) {
            return Err(err("v0_modes", "mode index exceeds m_count"));
        }
        Ok(())
    }

    pub fn model_for(&self, epsilon: f64) -> Result<Model> {
        Ok(match self.model {
            ModelKind::Burgers => {
                Model::Burgers(BurgersModel::new(epsilon, self.ell, self.u_star)?)
            }
            ModelKind::JinXin => Model::JinXin(JinXinModel::new(
                epsilon,
                self.a,
                self.ell,
                self.u_star,
                -self.u_star,
                Flux::quadratic(),
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# run\nmodel = jinxin\nepsilon = 0.1, 0.07 # two\ntimes = 0.2,1\nscheme = imex\nproject = false\n",
        )
        .unwrap();
        assert_eq!(cfg.model, ModelKind::JinXin);
        assert_eq!(cfg.epsilons, Some(vec![0.1, 0.07]));
        assert_eq!(cfg.times, Some(vec![0.2, 1.0]));
        assert_eq!(cfg.integrator.scheme, Scheme::Imex);
        assert!(!cfg.project);
    }

    #[test]
    fn unknown_key_is_named() {
        match ExperimentConfig::parse("epsilon = 0.1\nfoo = 3\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "foo"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_epsilon_list_is_rejected() {
        assert!(
            matches!(ExperimentConfig::parse("epsilon =\n"), Err(Error::Config { key, .. }) if key == "epsilon")
        );
    }

    #[test]
    fn malformed_values() {
        for (text, key) in [
            ("n_interior = -3", "n_interior"),
            ("times = 1, 0.5", "times"),
            ("dt_init = 0", "dt_init"),
            ("model = heat", "model"),
            ("epsilon = 0.1\nepsilon = 0.2", "epsilon"),
            ("j_interval = 0.5, -0.5", "j_interval"),
        ] {
            assert!(
                matches!(ExperimentConfig::parse(text), Err(Error::Config { key: k, .. }) if k == key),
                "{text}"
            );
        }
    }
}
