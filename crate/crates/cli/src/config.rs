//! TOML run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use nesh_core::game::{default_game, default_initial_actions};
use nesh_core::tuner::{self, DesignOverrides, DEFAULT_H_SAFETY};
use nesh_core::{Bounds, GameSpec, Topology};

/// A value that is either synthesized (`"auto"`) or given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Setting<T> {
    #[default]
    Auto,
    Value(T),
}

impl<T: Copy> Setting<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Setting::Auto => None,
            Setting::Value(v) => Some(*v),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSetting<T> {
    Value(T),
    Keyword(String),
}

impl<T: Serialize + Copy> Serialize for Setting<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Setting::Auto => RawSetting::<T>::Keyword("auto".into()).serialize(s),
            Setting::Value(v) => RawSetting::Value(*v).serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Setting<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match RawSetting::<T>::deserialize(d)? {
            RawSetting::Value(v) => Ok(Setting::Value(v)),
            RawSetting::Keyword(k) if k == "auto" => Ok(Setting::Auto),
            RawSetting::Keyword(k) => {
                Err(serde::de::Error::custom(format!("expected \"auto\" or a number, got {k:?}")))
            }
        }
    }
}

impl<T: fmt::Display> fmt::Display for Setting<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Auto => f.write_str("auto"),
            Setting::Value(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub rho: Vec<f64>,
    pub x_desired: Vec<f64>,
    pub p0: f64,
    pub q0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Cycle,
    Path,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    /// `[i, j, weight]`, 0-indexed, undirected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DosSection {
    /// Target fraction of time under attack; `0` disables DoS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duty: Option<f64>,
    /// Mean off+on period in seconds.
    #[serde(default = "default_period")]
    pub period: f64,
    /// Trace seed; falls back to `sim.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Scripted trace, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

fn default_period() -> f64 {
    30.0
}

impl Default for DosSection {
    fn default() -> Self {
        Self { duty: None, period: default_period(), seed: None, file: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default)]
    pub h: Setting<f64>,
    /// Gradient step size.
    #[serde(default)]
    pub delta: Setting<f64>,
    #[serde(default)]
    pub gamma1: Setting<f64>,
    #[serde(default)]
    pub c_bound: Setting<f64>,
    #[serde(default, rename = "R_x")]
    pub r_x: Setting<u64>,
    #[serde(default, rename = "R_y")]
    pub r_y: Setting<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Sampling period in seconds.
    #[serde(default = "default_delta_seconds")]
    pub delta_seconds: f64,
    #[serde(default = "default_horizon_steps")]
    pub horizon_steps: u64,
    #[serde(default = "default_decimation")]
    pub record_decimation: u64,
    #[serde(default)]
    pub seed: u64,
    /// Initial actions.
    pub x0: Vec<f64>,
}

fn default_delta_seconds() -> f64 {
    0.01
}
fn default_horizon_steps() -> u64 {
    150_000
}
fn default_decimation() -> u64 {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default)]
    pub theta0: Setting<f64>,
    #[serde(default)]
    pub c_x0: Setting<f64>,
    #[serde(default)]
    pub c_xstar: Setting<f64>,
    #[serde(default = "default_margin")]
    pub gamma1_margin: f64,
    #[serde(default = "default_h_safety")]
    pub h_safety: f64,
}

fn default_margin() -> f64 {
    0.1
}
fn default_h_safety() -> f64 {
    DEFAULT_H_SAFETY
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            theta0: Setting::Auto,
            c_x0: Setting::Auto,
            c_xstar: Setting::Auto,
            gamma1_margin: default_margin(),
            h_safety: default_h_safety(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameSection,
    pub topology: TopologySection,
    #[serde(default)]
    pub dos: DosSection,
    #[serde(default)]
    pub design: DesignSection,
    pub sim: SimSection,
    #[serde(default)]
    pub bounds: BoundsSection,
}

impl Default for RunConfig {
    /// Built-in 5-player game on a unit-weight 5-cycle, 90% duty attack.
    fn default() -> Self {
        let g = default_game();
        Self {
            game: GameSection { rho: g.rho().to_vec(), x_desired: g.x_desired().to_vec(), p0: g.p0(), q0: g.q0() },
            topology: TopologySection { preset: Some(Preset::Cycle), edges: None },
            dos: DosSection { duty: Some(0.9), ..DosSection::default() },
            design: DesignSection::default(),
            sim: SimSection {
                delta_seconds: default_delta_seconds(),
                horizon_steps: default_horizon_steps(),
                record_decimation: default_decimation(),
                seed: 0,
                x0: default_initial_actions(),
            },
            bounds: BoundsSection::default(),
        }
    }
}

/// Where the DoS trace of a run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    File(PathBuf),
    Generated { duty: f64, period: f64, seed: u64 },
}

/// A validated configuration turned into library objects.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub game: GameSpec,
    pub topology: Topology,
    pub x0: Vec<f64>,
    pub x_star: Vec<f64>,
    pub bounds: Bounds,
    pub overrides: DesignOverrides,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config; relative trace paths are resolved against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(file) = &cfg.dos.file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.dos.file = Some(dir.join(file));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.topology.preset, &self.topology.edges) {
            (Some(_), Some(_)) => bail!("topology: `preset` and `edges` are mutually exclusive"),
            (None, None) => bail!("topology: need `preset` or `edges`"),
            _ => {}
        }
        if self.dos.file.is_some() && self.dos.duty.is_some() {
            bail!("dos: `file` and `duty` are mutually exclusive");
        }
        if !(self.sim.delta_seconds > 0.0) {
            bail!("sim.delta_seconds must be positive");
        }
        if self.sim.record_decimation == 0 {
            bail!("sim.record_decimation must be at least 1");
        }
        Ok(())
    }

    pub fn trace_source(&self, seed_override: Option<u64>) -> TraceSource {
        match &self.dos.file {
            Some(path) => TraceSource::File(path.clone()),
            None => TraceSource::Generated {
                duty: self.dos.duty.unwrap_or(0.0),
                period: self.dos.period,
                seed: seed_override.or(self.dos.seed).unwrap_or(self.sim.seed),
            },
        }
    }

    /// Horizon of the run in seconds.
    pub fn horizon_seconds(&self) -> f64 {
        self.sim.horizon_steps as f64 * self.sim.delta_seconds
    }

    pub fn scenario(&self) -> nesh_core::Result<Scenario> {
        let g = &self.game;
        let game = GameSpec::new(g.rho.clone(), g.x_desired.clone(), g.p0, g.q0)?;
        let n = game.n_players();
        let topology = match (&self.topology.preset, &self.topology.edges) {
            (Some(Preset::Cycle), _) => Topology::cycle(n)?,
            (Some(Preset::Path), _) => Topology::path(n)?,
            (Some(Preset::Complete), _) => Topology::complete(n)?,
            (None, Some(edges)) => Topology::from_edges(n, edges)?,
            (None, None) => return Err(nesh_core::Error::InvalidTopology("no preset or edges".into())),
        };
        if self.sim.x0.len() != n {
            return Err(nesh_core::Error::Dimension { expected: n, got: self.sim.x0.len() });
        }
        let x_star = game.solve_ne()?;
        let c_x0 = self.bounds.c_x0.value().unwrap_or_else(|| tuner::max_abs(&self.sim.x0));
        let c_xstar = self.bounds.c_xstar.value().unwrap_or_else(|| tuner::max_abs(&x_star));
        let bounds = Bounds {
            theta0: self.bounds.theta0.value().unwrap_or_else(|| tuner::auto_theta0(c_x0)),
            c_x0,
            c_xstar,
            gamma1_margin: self.bounds.gamma1_margin,
            h_safety: self.bounds.h_safety,
        };
        let d = &self.design;
        let overrides = DesignOverrides {
            h: d.h.value(),
            delta: d.delta.value(),
            gamma1: d.gamma1.value(),
            c_bound: d.c_bound.value(),
            r_x: d.r_x.value(),
            r_y: d.r_y.value(),
        };
        Ok(Scenario { game, topology, x0: self.sim.x0.clone(), x_star, bounds, overrides })
    }
}
