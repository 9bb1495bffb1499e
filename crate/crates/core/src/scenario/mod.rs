//! Run configuration, named presets and orchestration.

mod expr;
mod output;
mod run;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use expr::{Expr, Func, Var};
pub use output::{check_manifest, read_report, FieldSlot, SnapshotMeta};
pub use run::{run_scenario, verify_dictionary_scenario, DictionaryOutput, RunReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    Hydrostatic,
    #[serde(rename = "semilagrangian-1d")]
    Semilagrangian1d,
    #[serde(rename = "semilagrangian-2d")]
    Semilagrangian2d,
    LogMeanStudy,
}

impl System {
    pub fn torus_dim(self) -> Option<usize> {
        match self {
            System::Semilagrangian1d => Some(1),
            System::Semilagrangian2d => Some(2),
            _ => None,
        }
    }
}

/// Inline initial data, one expression per field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// `ω₀(x, y)` for the channel flow.
    pub omega: Option<String>,
    /// `v₀(x, a)` (one entry per component; in 2-D the second spatial
    /// variable is `y`).
    pub v: Option<Vec<String>>,
    /// `h_a(x, a)`.
    pub ha: Option<String>,
    /// Make the label-averaged flux divergence free before the run.
    pub project_flux: Option<bool>,
    /// `f(x)` on `[0,1]` for the log-mean study.
    pub f: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub na: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Collapse floor as a fraction of `min ∂_yω₀`.
    pub rayleigh_fraction: Option<f64>,
    pub tail: Option<f64>,
    pub curl_budget: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySpec {
    pub levels: Vec<[usize; 3]>,
    pub t_eval: f64,
}

impl Default for DictionarySpec {
    fn default() -> Self {
        Self {
            levels: vec![[16, 33, 33], [32, 65, 65], [64, 129, 129]],
            t_eval: 0.1,
        }
    }
}

/// The on-disk configuration. Everything but `schema_version` is optional
/// when a preset supplies it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: Option<String>,
    pub system: Option<System>,
    pub preset: Option<String>,
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    pub dt: Option<f64>,
    pub cfl_max: Option<f64>,
    pub t_end: Option<f64>,
    /// Diagnostic cadence in base steps.
    pub sample_every: Option<usize>,
    /// Snapshot cadence in samples; 0 keeps only the first and last.
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Base vorticity level, for label coordinates.
    pub k: Option<f64>,
    pub p_list: Option<Vec<f64>>,
    /// Node count for the log-mean study.
    pub nodes: Option<usize>,
    pub dictionary: Option<DictionarySpec>,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        preset(name)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            preset: Some(name.to_string()),
            ..Default::default()
        })
    }
}

#[derive(Debug, Clone)]
pub enum Initial {
    Omega(Expr),
    Labels {
        v: Vec<Expr>,
        ha: Expr,
        project_flux: bool,
    },
    Samples(Expr),
}

/// A configuration with every field resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub system: System,
    pub initial: Initial,
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
    pub dt: f64,
    pub cfl_max: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub snapshot_every: usize,
    pub rayleigh_fraction: f64,
    pub tail_threshold: f64,
    pub curl_budget: f64,
    pub k: Option<f64>,
    pub p_list: Vec<f64>,
    pub nodes: usize,
    pub dictionary: DictionarySpec,
    pub out: PathBuf,
}

pub const PRESET_NAMES: &[&str] = &[
    "paper-remark",
    "paper-remark-mirrored",
    "shear",
    "even-x",
    "sl-pinned",
    "sl-blowup-1d",
    "sl-blowup-2d",
    "log-mean-exp",
];

/// Every preset as a partial configuration.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let omega = |s: &str| InitialSpec {
        omega: Some(s.into()),
        ..Default::default()
    };
    let hydro = |s: &str| ScenarioConfig {
        system: Some(System::Hydrostatic),
        initial: Some(omega(s)),
        ..Default::default()
    };
    let cfg = match name {
        "paper-remark" => hydro("2*y - sin(2*pi*x - y)"),
        "paper-remark-mirrored" => hydro("2*y - sin(-2*pi*x - y)"),
        "shear" => hydro("2*y + 3"),
        "even-x" => hydro("2*y + 0.1*cos(2*pi*x)*sin(pi*y + 0.3)"),
        "sl-pinned" => ScenarioConfig {
            k: Some(0.0),
            ..hydro("y + 0.1*sin(2*pi*x)*y*(1 - y)")
        },
        "sl-blowup-1d" => ScenarioConfig {
            system: Some(System::Semilagrangian1d),
            initial: Some(InitialSpec {
                v: Some(vec!["0.5*sin(2*pi*x)*(2*a - 1)".into()]),
                ha: Some("1 - 0.5*cos(2*pi*x)*(2*a - 1)".into()),
                project_flux: Some(true),
                ..Default::default()
            }),
            ..Default::default()
        },
        "sl-blowup-2d" => ScenarioConfig {
            system: Some(System::Semilagrangian2d),
            initial: Some(InitialSpec {
                v: Some(vec![
                    "0.5*sin(2*pi*x)*(2*a - 1)".into(),
                    "0.5*sin(2*pi*y)*(2*a - 1)".into(),
                ]),
                ha: Some("1 - 0.25*(cos(2*pi*x) + cos(2*pi*y))*(2*a - 1)".into()),
                project_flux: Some(true),
                ..Default::default()
            }),
            grid: GridSpec {
                nx: Some(32),
                ny: None,
                na: Some(33),
            },
            t_end: Some(0.5),
            ..Default::default()
        },
        "log-mean-exp" => ScenarioConfig {
            system: Some(System::LogMeanStudy),
            initial: Some(InitialSpec {
                f: Some("exp(x)".into()),
                ..Default::default()
            }),
            nodes: Some(10_000),
            ..Default::default()
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

fn parse(src: &str) -> Result<Expr> {
    Expr::parse(src)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn count(name: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be at least {min}, got {v}")))
    }
}

impl ScenarioConfig {
    /// Fill unset fields from the preset, then from defaults, and validate.
    pub fn resolve(&self) -> Result<Scenario> {
        let base = match &self.preset {
            Some(p) => preset(p)?,
            None => ScenarioConfig::default(),
        };
        let system = self
            .system
            .or(base.system)
            .ok_or_else(|| Error::Config("no system given and no preset".into()))?;
        if let (Some(a), Some(b)) = (self.system, base.system) {
            if a != b {
                return Err(Error::Config(format!("system {a:?} conflicts with the preset's {b:?}")));
            }
        }
        let init = match (&self.initial, &base.initial) {
            (Some(mine), Some(theirs)) => InitialSpec {
                omega: mine.omega.clone().or(theirs.omega.clone()),
                v: mine.v.clone().or(theirs.v.clone()),
                ha: mine.ha.clone().or(theirs.ha.clone()),
                project_flux: mine.project_flux.or(theirs.project_flux),
                f: mine.f.clone().or(theirs.f.clone()),
            },
            (Some(i), None) | (None, Some(i)) => i.clone(),
            (None, None) => return Err(Error::Config("no initial data and no preset".into())),
        };
        let missing = |what: &str| Error::Config(format!("initial.{what} is required for {system:?}"));
        let initial = match system {
            System::Hydrostatic => Initial::Omega(parse(init.omega.as_deref().ok_or_else(|| missing("omega"))?)?),
            System::Semilagrangian1d | System::Semilagrangian2d => {
                let d = system.torus_dim().expect("torus system");
                let v: Vec<Expr> = init
                    .v
                    .as_ref()
                    .ok_or_else(|| missing("v"))?
                    .iter()
                    .map(|s| parse(s))
                    .collect::<Result<_>>()?;
                if v.len() != d {
                    return Err(Error::Config(format!("initial.v needs {d} components, got {}", v.len())));
                }
                Initial::Labels {
                    v,
                    ha: parse(init.ha.as_deref().ok_or_else(|| missing("ha"))?)?,
                    project_flux: init.project_flux.unwrap_or(false),
                }
            }
            System::LogMeanStudy => Initial::Samples(parse(init.f.as_deref().ok_or_else(|| missing("f"))?)?),
        };

        let torus = system.torus_dim().is_some();
        let nx = self.grid.nx.or(base.grid.nx).unwrap_or(if torus { 64 } else { 128 });
        let ny = self.grid.ny.or(base.grid.ny).unwrap_or(513);
        let na = self.grid.na.or(base.grid.na).unwrap_or(65);
        let pick = |a: Option<f64>, b: Option<f64>, d: f64| a.or(b).unwrap_or(d);
        let name = self
            .name
            .clone()
            .or(self.preset.clone())
            .unwrap_or_else(|| "custom".into());
        let p_list = self
            .p_list
            .clone()
            .or(base.p_list)
            .unwrap_or_else(|| vec![1.0, 0.5, 0.1, 0.01, 0.001]);
        for &p in &p_list {
            positive("p", p)?;
        }
        let dictionary = self.dictionary.clone().or(base.dictionary).unwrap_or_default();
        for l in &dictionary.levels {
            count("dictionary level nx", l[0], 4)?;
            count("dictionary level ny", l[1], 5)?;
            count("dictionary level na", l[2], 5)?;
        }
        positive("dictionary.t_eval", dictionary.t_eval)?;
        let t_end = pick(self.t_end, base.t_end, 1.0);
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be nonnegative, got {t_end}")));
        }
        Ok(Scenario {
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&name)),
            name,
            system,
            initial,
            nx: count("grid.nx", nx, 4)?,
            ny: count("grid.ny", ny, 5)?,
            na: count("grid.na", na, 5)?,
            dt: positive("dt", pick(self.dt, base.dt, 1e-3))?,
            cfl_max: positive("cfl_max", pick(self.cfl_max, base.cfl_max, 0.5))?,
            t_end,
            sample_every: count("sample_every", self.sample_every.or(base.sample_every).unwrap_or(1), 1)?,
            snapshot_every: self.snapshot_every.or(base.snapshot_every).unwrap_or(0),
            rayleigh_fraction: positive(
                "thresholds.rayleigh_fraction",
                pick(self.thresholds.rayleigh_fraction, base.thresholds.rayleigh_fraction, 1e-3),
            )?,
            tail_threshold: positive("thresholds.tail", pick(self.thresholds.tail, base.thresholds.tail, 1e-4))?,
            curl_budget: positive(
                "thresholds.curl_budget",
                pick(self.thresholds.curl_budget, base.thresholds.curl_budget, 1e-6),
            )?,
            k: self.k.or(base.k),
            p_list,
            nodes: count("nodes", self.nodes.or(base.nodes).unwrap_or(10_000), 2)?,
            dictionary,
        })
    }
}
