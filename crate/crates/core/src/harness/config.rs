//! Run configuration: a TOML file with `[run]`, `[grid]`, `[model]`, `[solver]` and `[output]`
//! sections. Missing keys take the scenario preset's value; unknown keys are errors.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fv_solver::{FluxScheme, MAX_CFL};
use crate::kernels::KernelProfile;
use crate::models::PreyBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Corridor,
    Evacuation,
    Braess,
    Crossing,
    Retraction,
    Leader,
    Dogs,
    Predator,
    Panic,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 9] = [
        ScenarioName::Corridor,
        ScenarioName::Evacuation,
        ScenarioName::Braess,
        ScenarioName::Crossing,
        ScenarioName::Retraction,
        ScenarioName::Leader,
        ScenarioName::Dogs,
        ScenarioName::Predator,
        ScenarioName::Panic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Corridor => "corridor",
            ScenarioName::Evacuation => "evacuation",
            ScenarioName::Braess => "braess",
            ScenarioName::Crossing => "crossing",
            ScenarioName::Retraction => "retraction",
            ScenarioName::Leader => "leader",
            ScenarioName::Dogs => "dogs",
            ScenarioName::Predator => "predator",
            ScenarioName::Panic => "panic",
        }
    }

    /// Orderly-type scenarios, whose densities obey the unit bound.
    pub fn is_orderly(&self) -> bool {
        matches!(
            self,
            ScenarioName::Corridor
                | ScenarioName::Evacuation
                | ScenarioName::Braess
                | ScenarioName::Crossing
                | ScenarioName::Retraction
        )
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    Constant,
    Lwr,
    AffinePanic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlocalName {
    Explicit,
    Picard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub scenario: ScenarioName,
    pub seed: u64,
    /// Multiplies the preset initial densities.
    pub density_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kernel: KernelProfile,
    pub radius: f64,
    pub law: LawName,
    pub v_max: f64,
    /// Width of the smoothed kink of the affine panic law.
    pub blend: f64,
    /// Self-interaction weight of the orderly models.
    pub eps: f64,
    /// Cross-interaction weight of the two-population orderly model.
    pub eps_other: f64,
    /// Leading direction of the prey flux in the predator scenario.
    #[serde(default)]
    pub prey_base_direction: PreyBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub cfl: f64,
    pub t_end: f64,
    pub nonlocal: NonlocalName,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub flux: FluxScheme,
    pub frame_stride: usize,
    pub dt_max: f64,
    pub edge_check: bool,
    pub edge_tolerance: f64,
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub frames: bool,
    /// Density shown as white in frames.
    pub rho_display: f64,
    pub metrics_file: String,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub model: ModelSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// Preset values of a scenario.
    pub fn preset(name: ScenarioName) -> Self {
        let base = RunConfig {
            run: RunSection {
                scenario: name,
                seed: 7,
                density_scale: 1.0,
            },
            grid: GridSection {
                nx: 100,
                ny: 100,
                dx: 0.1,
                dy: 0.1,
            },
            model: ModelSection {
                kernel: KernelProfile::Triweight,
                radius: 0.5,
                law: LawName::Lwr,
                v_max: 1.0,
                blend: 0.2,
                eps: 1.0,
                eps_other: 0.0,
                prey_base_direction: PreyBase::Nu,
            },
            solver: SolverSection {
                cfl: 0.45,
                t_end: 4.0,
                nonlocal: NonlocalName::Explicit,
                picard_tol: 1e-10,
                picard_max_iter: 20,
                flux: FluxScheme::Godunov,
                frame_stride: 50,
                dt_max: 0.1,
                edge_check: true,
                edge_tolerance: 1e-10,
                snapshot_times: Vec::new(),
            },
            output: OutputSection {
                frames: false,
                rho_display: 1.0,
                metrics_file: "metrics.csv".into(),
            },
        };
        let mut c = base;
        match name {
            ScenarioName::Corridor => {
                c.grid = GridSection { nx: 400, ny: 60, dx: 0.05, dy: 0.05 };
                c.model.radius = 0.3;
                c.model.v_max = 2.0;
                c.solver.t_end = 7.557;
                c.solver.snapshot_times = vec![2.529, 5.043, 7.557];
                c.solver.frame_stride = 100;
            }
            ScenarioName::Evacuation | ScenarioName::Braess => {
                c.grid = GridSection { nx: 120, ny: 76, dx: 0.1, dy: 0.1 };
                c.model.radius = 0.4;
                c.model.v_max = 2.0;
                c.model.eps = 0.2;
                c.solver.t_end = 30.0;
                c.solver.snapshot_times = vec![4.438, 6.253, 11.396];
                c.solver.frame_stride = 100;
            }
            ScenarioName::Crossing => {
                c.grid = GridSection { nx: 200, ny: 60, dx: 0.05, dy: 0.05 };
                c.model.radius = 0.3;
                c.model.v_max = 1.5;
                c.model.eps = 0.3;
                c.model.eps_other = 0.7;
                c.solver.t_end = 4.0;
                c.solver.frame_stride = 100;
            }
            ScenarioName::Retraction => {
                c.grid = GridSection { nx: 200, ny: 60, dx: 0.05, dy: 0.05 };
                c.model.radius = 0.3;
                c.model.v_max = 1.5;
                c.model.eps = 0.0;
                c.model.eps_other = 0.3;
                c.solver.t_end = 4.0;
                c.solver.frame_stride = 100;
            }
            ScenarioName::Leader | ScenarioName::Dogs => {}
            ScenarioName::Predator => {
                c.grid = GridSection { nx: 160, ny: 100, dx: 0.1, dy: 0.1 };
            }
            ScenarioName::Panic => {
                c.grid = GridSection { nx: 64, ny: 64, dx: 0.0625, dy: 0.0625 };
                c.model.law = LawName::AffinePanic;
                c.model.radius = 0.5;
                c.solver.t_end = 1.0;
                c.solver.frame_stride = 4;
            }
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let g = &self.grid;
        if g.nx < 3 || g.ny < 3 || !(g.dx > 0.0 && g.dy > 0.0) {
            return bad(format!("grid needs nx, ny >= 3 and positive spacing, got {g:?}"));
        }
        if i64::try_from(self.run.seed).is_err() {
            return bad(format!("seed must fit a TOML integer (<= {}), got {}", i64::MAX, self.run.seed));
        }
        if !(self.run.density_scale >= 0.0 && self.run.density_scale.is_finite()) {
            return bad("density_scale must be >= 0".into());
        }
        let m = &self.model;
        if !(m.radius > 0.0) || !(m.v_max > 0.0) || !(m.blend > 0.0) || !(m.eps >= 0.0) || !(m.eps_other >= 0.0) {
            return bad("model needs radius, v_max, blend > 0 and eps, eps_other >= 0".into());
        }
        let s = &self.solver;
        if !(s.cfl > 0.0 && s.cfl <= MAX_CFL) {
            return bad(format!("cfl = {} exceeds the split-scheme limit {MAX_CFL}", s.cfl));
        }
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) || s.frame_stride == 0 || !(s.dt_max > 0.0) {
            return bad("solver needs t_end >= 0, frame_stride >= 1 and dt_max > 0".into());
        }
        if !(s.picard_tol > 0.0) || s.picard_max_iter == 0 || !(s.edge_tolerance >= 0.0) {
            return bad("picard_tol > 0, picard_max_iter >= 1 and edge_tolerance >= 0 are required".into());
        }
        if !(self.output.rho_display > 0.0) {
            return bad("rho_display must be > 0".into());
        }
        if self.output.metrics_file.is_empty() || self.output.metrics_file.contains(['/', '\\']) {
            return bad("metrics_file must be a plain file name".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses a configuration text, filling every missing key from the scenario preset.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    let name = user
        .get("run")
        .and_then(|r| r.get("scenario"))
        .and_then(|s| s.as_str())
        .ok_or_else(|| Error::Config("missing `[run] scenario`".into()))?;
    let name: ScenarioName = name.parse()?;
    let mut table = toml::Table::try_from(RunConfig::preset(name)).expect("preset serializes");
    merge(&mut table, user);
    let cfg: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_preset_defaults() {
        let c = parse_config_str("[run]\nscenario = \"corridor\"\n").unwrap();
        assert_eq!(c, RunConfig::preset(ScenarioName::Corridor));
        assert_eq!((c.grid.nx, c.grid.ny, c.grid.dx), (400, 60, 0.05));
        assert_eq!(c.model.radius, 0.3);
        assert_eq!(c.model.v_max, 2.0);
    }

    #[test]
    fn overrides_apply() {
        let c = parse_config_str("[run]\nscenario = \"panic\"\nseed = 3\n[solver]\nt_end = 0.5\n[model]\nlaw = \"constant\"\n").unwrap();
        assert_eq!(c.run.seed, 3);
        assert_eq!(c.solver.t_end, 0.5);
        assert_eq!(c.model.law, LawName::Constant);
        assert_eq!(c.grid.nx, 64);
    }

    #[test]
    fn rejects_bad_input() {
        let err = |s: &str| parse_config_str(s).unwrap_err().to_string();
        assert!(err("[run]\nscenario = \"corridor\"\n[solver]\ncfl = 0.9\n").contains("cfl"));
        assert!(err("[run]\nscenario = \"corridor\"\n[solver]\nbogus = 1\n").contains("bogus"));
        assert!(err("[run]\nscenario = \"corridor\"\n[extra]\nx = 1\n").contains("extra"));
        assert!(err("[run]\nscenario = \"moon\"\n").contains("moon"));
        assert!(err("[grid]\nnx = 3\n").contains("scenario"));
        assert!(parse_config_str("[run]\nscenario = \"corridor\"\n[grid]\nnx = \"many\"\n").is_err());
    }

    #[test]
    fn every_preset_round_trips() {
        for name in ScenarioName::ALL {
            let c = RunConfig::preset(name);
            c.validate().unwrap();
            assert_eq!(parse_config_str(&c.to_toml()).unwrap(), c);
            assert_eq!(name.as_str().parse::<ScenarioName>().unwrap(), name);
        }
    }
}
