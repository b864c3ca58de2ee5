//! TOML run configuration.
//!
//! ```toml
//! [run]
//! scenario = "flat-gaussian"   # shipped base scenario; omit to define one inline
//! system = "bpw"               # "bp" or "bpw"
//! seed = 2024
//! output = "runs/example"      # relative paths resolve under the output root
//! snapshot_stride = 10
//! s_list = [0.0, 1.0]
//!
//! [grid]
//! length = 64.0
//! points = 512
//!
//! [params]
//! eps = 0.1
//! mu = 0.1
//! beta = 0.0
//! nu = 0.0
//! h0 = 0.5
//! dt = 1e-3
//! t_end = 1.0
//!
//! [tolerances]
//! balance_residual = 1e-5
//!
//! [bathymetry]
//! preset = "gaussian-bump"
//! amplitude = 1.0
//! width = 2.0
//!
//! [initial]
//! recipe = "gaussian"
//! amplitude = 0.5
//! width = 1.0
//! ```
//!
//! Every section is optional when `run.scenario` names a shipped scenario; the
//! sections present override its fields. An inline scenario needs `[grid]`,
//! `[initial]` and a complete `[params]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bathymetry::{BathymetryPreset, Params, Tolerances};
use crate::dynamics::SystemKind;
use crate::error::{Error, Result};
use crate::harness::{scenario, Expectation, InitialRecipe, Scenario};

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub scenario: Option<String>,
    pub name: Option<String>,
    pub system: Option<SystemKind>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub snapshot_stride: Option<usize>,
    pub s_list: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub length: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub eps: Option<f64>,
    pub mu: Option<f64>,
    pub beta: Option<f64>,
    pub nu: Option<f64>,
    pub h0: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub grid: Option<GridSection>,
    pub params: Option<ParamsSection>,
    pub tolerances: Option<Tolerances>,
    pub bathymetry: Option<BathymetryPreset>,
    pub initial: Option<InitialRecipe>,
}

/// A configuration resolved into a runnable scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub scenario: Scenario,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    /// Config that runs a shipped scenario unchanged.
    pub fn for_scenario(name: &str) -> Self {
        Self {
            run: RunSection {
                scenario: Some(name.into()),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let mut sc = match &self.run.scenario {
            Some(name) => scenario(name)?,
            None => self.inline_base()?,
        };
        if let Some(name) = &self.run.name {
            sc.name = name.clone();
        }
        if let Some(system) = self.run.system {
            sc.system = system;
        }
        if let Some(stride) = self.run.snapshot_stride {
            sc.snapshot_stride = stride;
        }
        if let Some(s_list) = &self.run.s_list {
            sc.s_list = s_list.clone();
        }
        if let Some(g) = &self.grid {
            sc.length = g.length;
            sc.points = g.points;
        }
        if let Some(p) = &self.params {
            let q = &mut sc.params;
            let fields = [
                (&mut q.eps, p.eps),
                (&mut q.mu, p.mu),
                (&mut q.beta, p.beta),
                (&mut q.nu, p.nu),
                (&mut q.h0, p.h0),
                (&mut q.dt, p.dt),
                (&mut q.t_end, p.t_end),
            ];
            for (slot, value) in fields {
                if let Some(v) = value {
                    *slot = v;
                }
            }
        }
        if let Some(t) = &self.tolerances {
            sc.params.tolerances = t.clone();
        }
        if let Some(b) = &self.bathymetry {
            sc.bathymetry = b.clone();
        }
        if let Some(i) = &self.initial {
            sc.initial = i.clone();
        }
        if sc.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be >= 1".into()));
        }
        sc.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        sc.grid().map_err(|e| Error::Config(e.to_string()))?;
        Ok(ResolvedRun {
            scenario: sc,
            seed: self.run.seed.unwrap_or(DEFAULT_SEED),
            output: self.run.output.clone(),
        })
    }

    fn inline_base(&self) -> Result<Scenario> {
        let missing = |what: &str| Error::Config(format!("inline scenario needs {what}"));
        let grid = self.grid.as_ref().ok_or_else(|| missing("[grid]"))?;
        let p = self.params.as_ref().ok_or_else(|| missing("[params]"))?;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| missing(&format!("params.{name}")));
        let params = Params {
            eps: need(p.eps, "eps")?,
            mu: need(p.mu, "mu")?,
            beta: p.beta.unwrap_or(0.0),
            nu: p.nu.unwrap_or(0.0),
            h0: need(p.h0, "h0")?,
            dt: need(p.dt, "dt")?,
            t_end: need(p.t_end, "t_end")?,
            tolerances: Tolerances::default(),
        };
        Ok(Scenario {
            name: "inline".into(),
            description: String::new(),
            system: self.run.system.ok_or_else(|| missing("run.system"))?,
            length: grid.length,
            points: grid.points,
            initial: self.initial.clone().ok_or_else(|| missing("[initial]"))?,
            bathymetry: self.bathymetry.clone().unwrap_or(BathymetryPreset::Flat),
            params,
            s_list: vec![0.0, 1.0],
            snapshot_stride: 1,
            expect: Expectation::Completes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_with_overrides() {
        let cfg = RunConfig::parse(
            r#"
[run]
scenario = "flat-gaussian"
seed = 7
[params]
t_end = 0.5
[grid]
length = 32.0
points = 256
"#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.seed, 7);
        assert_eq!(r.scenario.params.t_end, 0.5);
        assert_eq!(r.scenario.params.dt, 1e-3);
        assert_eq!(r.scenario.points, 256);
    }

    #[test]
    fn inline_scenario() {
        let cfg = RunConfig::parse(
            r#"
[run]
system = "bp"
[grid]
length = 20.0
points = 64
[params]
eps = 0.1
mu = 0.2
h0 = 0.5
dt = 0.01
t_end = 0.1
[bathymetry]
preset = "gaussian-bump"
amplitude = 1.0
width = 2.0
[initial]
recipe = "gaussian"
amplitude = 0.1
width = 2.0
"#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.scenario.system, SystemKind::BpRegularized);
        assert_eq!(r.scenario.params.beta, 0.0);
        assert_eq!(r.seed, DEFAULT_SEED);
    }

    #[test]
    fn errors_are_config_errors() {
        assert!(matches!(RunConfig::parse("[run]\nbogus = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[grid]\nlength = 1.0\npoints = 64").unwrap().resolve(), Err(Error::Config(_))));
        let bad_grid = RunConfig::parse("[run]\nscenario = \"rest\"\n[grid]\nlength = 1.0\npoints = 100").unwrap();
        assert!(matches!(bad_grid.resolve(), Err(Error::Config(_))));
        let bad_dt = RunConfig::parse("[run]\nscenario = \"rest\"\n[params]\ndt = -1.0").unwrap();
        assert!(matches!(bad_dt.resolve(), Err(Error::Config(_))));
        assert!(matches!(RunConfig::for_scenario("nope").resolve(), Err(Error::Config(_))));
    }
}
