//! Experiment configuration, presets, and TOML loading with overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, ControllerKind};
use crate::error::{Error, Result};
use crate::observation::ObservationOperator;
use crate::solver::ForcingSpec;

/// Where the reference solution comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TruthSpec {
    /// Closed-form solution of the model.
    Analytic,
    /// Unnudged simulation on a `grid_n_fine`-point grid, restricted to the
    /// assimilation grid every step. The simulation may take `substeps`
    /// internal steps per assimilation step; observations stay on the
    /// assimilation time grid.
    Dns {
        grid_n_fine: usize,
        #[serde(default = "default_substeps")]
        substeps: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObserverSpec {
    /// Fourier modes with `max(|m1|, |m2|) <= k`.
    Fourier { k: usize },
    /// Averages over an `m x m` array of cells.
    Cells { m: usize },
}

impl ObserverSpec {
    pub fn build(&self, length: f64) -> Result<ObservationOperator<f64>> {
        match *self {
            ObserverSpec::Fourier { k } => ObservationOperator::fourier(k, length),
            ObserverSpec::Cells { m } => ObservationOperator::cells(m, length),
        }
    }
}

fn default_substeps() -> usize {
    1
}

fn default_max_mode() -> usize {
    4
}

/// Initial state of a simulated truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TruthInit {
    #[default]
    Zero,
    /// Random solenoidal field with the given rms velocity on modes up to `max_mode`.
    Random {
        seed: u64,
        amplitude: f64,
        #[serde(default = "default_max_mode")]
        max_mode: usize,
    },
}

/// Initial state of the assimilating model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Zero,
    /// Truth at `t = 0` plus a random solenoidal perturbation of rms `amplitude`.
    Perturbed {
        seed: u64,
        amplitude: f64,
        #[serde(default = "default_max_mode")]
        max_mode: usize,
    },
    /// Truth at `t = 0` restricted to the assimilation grid.
    Truth,
}

fn default_length() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ForcingSpec,
    pub nu: f64,
    /// Points per direction of the assimilation grid.
    pub grid_n: usize,
    /// Side of the periodic square.
    #[serde(default = "default_length")]
    pub length: f64,
    pub truth: TruthSpec,
    pub dt: f64,
    pub t_final: f64,
    pub observer: ObserverSpec,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub u0: TruthInit,
    #[serde(default)]
    pub v0: InitialSpec,
    /// Step sizes of a convergence study.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dt_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Converge,
    Longtime,
    Saturate,
    TwinDecay,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Converge, Preset::Longtime, Preset::Saturate, Preset::TwinDecay];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Converge => "converge",
            Preset::Longtime => "longtime",
            Preset::Saturate => "saturate",
            Preset::TwinDecay => "twin-decay",
        }
    }

    pub fn config(&self) -> ExperimentConfig {
        match self {
            Preset::Converge => ExperimentConfig {
                model: ForcingSpec::ManufacturedPeriodic,
                nu: 1.0,
                grid_n: 128,
                length: 1.0,
                truth: TruthSpec::Analytic,
                dt: 1.0 / 32.0,
                t_final: 2.0,
                observer: ObserverSpec::Fourier { k: 8 },
                controller: ControllerConfig::algo2(1.0),
                u0: TruthInit::Zero,
                v0: InitialSpec::Zero,
                dt_list: vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125],
                output_path: None,
            },
            Preset::Longtime => ExperimentConfig {
                dt: 0.01,
                t_final: 10.0,
                dt_list: vec![],
                ..Preset::Converge.config()
            },
            Preset::Saturate => ExperimentConfig {
                model: ForcingSpec::Kolmogorov {
                    k_f: 4,
                    amplitude: 1.0,
                    ramp: 1.0,
                },
                nu: 1.0e-3,
                grid_n: 16,
                length: std::f64::consts::TAU,
                truth: TruthSpec::Dns {
                    grid_n_fine: 64,
                    substeps: 4,
                },
                dt: 0.01,
                t_final: 10.0,
                observer: ObserverSpec::Fourier { k: 5 },
                controller: ControllerConfig {
                    factor: 1.1,
                    tol: 0.3,
                    ..ControllerConfig::algo2(1.0)
                },
                u0: TruthInit::Random {
                    seed: 7,
                    amplitude: 0.01,
                    max_mode: 8,
                },
                v0: InitialSpec::Truth,
                dt_list: vec![],
                output_path: None,
            },
            Preset::TwinDecay => ExperimentConfig {
                model: ForcingSpec::TaylorGreenZero,
                nu: 0.01,
                grid_n: 64,
                length: 1.0,
                truth: TruthSpec::Dns {
                    grid_n_fine: 64,
                    substeps: 1,
                },
                dt: 1.0e-3,
                t_final: 0.5,
                observer: ObserverSpec::Fourier { k: 15 },
                controller: ControllerConfig::constant(40.0),
                u0: TruthInit::Random {
                    seed: 11,
                    amplitude: 0.01,
                    max_mode: 4,
                },
                v0: InitialSpec::Zero,
                dt_list: vec![],
                output_path: None,
            },
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

/// Command-line style overrides applied after the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub chi0: Option<f64>,
    pub controller: Option<ControllerKind>,
    pub observer_k: Option<usize>,
    pub nu: Option<f64>,
    /// Seed of the truth initial state; the model perturbation uses `seed + 1`.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Number of time steps; `dt` must divide `t_final`.
    pub fn steps(&self) -> Result<usize> {
        steps_for(self.dt, self.t_final)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.model.validate()?;
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if self.grid_n < 4 || self.grid_n % 2 != 0 {
            return bad(format!("grid_n must be even and >= 4, got {}", self.grid_n));
        }
        match self.truth {
            TruthSpec::Analytic if !self.model.has_analytic_truth() => {
                return bad("analytic truth requested for a model without one".into());
            }
            TruthSpec::Dns { grid_n_fine, .. } if grid_n_fine < self.grid_n || grid_n_fine % 2 != 0 => {
                return bad(format!(
                    "dns grid_n_fine {grid_n_fine} must be even and >= grid_n {}",
                    self.grid_n
                ));
            }
            TruthSpec::Dns { substeps: 0, .. } => return bad("dns substeps must be >= 1".into()),
            _ => {}
        }
        self.steps()?;
        for &dt in &self.dt_list {
            steps_for(dt, self.t_final)?;
        }
        self.controller.validate()?;
        self.observer
            .build(self.length)?
            .check_grid(&crate::field::Grid::new(self.grid_n, self.length)?)?;
        for (name, amp) in [
            ("u0", match self.u0 {
                TruthInit::Random { amplitude, .. } => amplitude,
                TruthInit::Zero => 0.0,
            }),
            ("v0", match self.v0 {
                InitialSpec::Perturbed { amplitude, .. } => amplitude,
                _ => 0.0,
            }),
        ] {
            if !(amp >= 0.0) || !amp.is_finite() {
                return bad(format!("{name} amplitude must be finite and >= 0, got {amp}"));
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dt) = o.dt {
            self.dt = dt;
        }
        if let Some(kind) = o.controller {
            self.controller.kind = kind;
        }
        if let Some(chi0) = o.chi0 {
            self.controller.chi0 = chi0;
            self.controller.chi_max = self.controller.chi_max.max(chi0);
        }
        if let Some(k) = o.observer_k {
            self.observer = ObserverSpec::Fourier { k };
        }
        if let Some(nu) = o.nu {
            self.nu = nu;
        }
        if let Some(seed) = o.seed {
            if let TruthInit::Random { seed: s, .. } = &mut self.u0 {
                *s = seed;
            }
            if let InitialSpec::Perturbed { seed: s, .. } = &mut self.v0 {
                *s = seed.wrapping_add(1);
            }
        }
        if let Some(out) = &o.out {
            self.output_path = Some(out.clone());
        }
    }

    /// Parses a TOML document layered over `base`. Tables merge key by key,
    /// except tagged tables (with a `kind` key) which replace the base entry.
    pub fn from_toml_over(base: &ExperimentConfig, text: &str) -> Result<Self> {
        let overlay: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut merged = toml::Table::try_from(base).map_err(|e| Error::Config(format!("{e}")))?;
        merge(&mut merged, overlay);
        merged.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{e}")))
    }

    pub fn load(base: &ExperimentConfig, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_over(base, &text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("{e}")))
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !o.contains_key("kind") => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn steps_for(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final > 0.0) || !dt.is_finite() || !t_final.is_finite() {
        return Err(Error::Config(format!("dt {dt} and t_final {t_final} must be positive")));
    }
    let steps = (t_final / dt).round();
    if steps < 1.0 || (steps * dt - t_final).abs() > 1e-9 * t_final {
        return Err(Error::Config(format!("dt {dt} does not divide t_final {t_final}")));
    }
    Ok(steps as usize)
}
