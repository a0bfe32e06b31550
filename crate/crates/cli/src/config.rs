//! Scenario configuration: sizes, grids, seeds, and tolerance overrides.
//!
//! Every run is fully determined by one `ScenarioConfig`. Seeds are explicit
//! -- there is no ambient randomness to fall back on -- and each scenario
//! validates that the grids it consumes are nonempty before any sampling
//! starts. `default_for` produces the full-size configuration each scenario
//! was calibrated on; TOML files can override any field.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// All knobs of a scenario run. Unknown TOML keys are rejected so typos
/// surface as errors instead of silently keeping a default.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Scenario id: one of e1..e6.
    pub scenario: String,
    /// Root seed; every subtask derives its stream from this value.
    pub seed: u64,
    /// Output directory for emitted tables. Defaults to "out/<scenario>".
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Ambient dimensions, scenario-specific meaning.
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Sample-size ladder, scenario-specific meaning (documented per
    /// scenario module). Trailing entries are optional stages.
    #[serde(default)]
    pub sample_sizes: Vec<usize>,
    /// Stochastic-flow ensemble size.
    #[serde(default)]
    pub paths: usize,
    /// Flow time step.
    #[serde(default)]
    pub dt: f64,
    /// Tilt-strength grid.
    #[serde(default)]
    pub t_grid: Vec<f64>,
    /// Radius grid.
    #[serde(default)]
    pub r_grid: Vec<f64>,
    /// Shift magnitudes / shift offsets grid.
    #[serde(default)]
    pub h_grid: Vec<f64>,
    /// Exponential-slope grid for test functions.
    #[serde(default)]
    pub s_grid: Vec<f64>,
    /// Measure family names the scenario should cover; empty means the
    /// scenario's full default roster.
    #[serde(default)]
    pub measures: Vec<String>,
    /// Nodes for one-dimensional quadrature backends.
    #[serde(default)]
    pub quad_points: usize,
    /// Direction-net resolution for subgaussian sups along flows.
    #[serde(default)]
    pub net_resolution: f64,
    /// Steps between subgaussian evaluations along a flow.
    #[serde(default)]
    pub stride: usize,
    /// Absolute tolerance replacements keyed by invariant id prefix.
    #[serde(default)]
    pub tolerance_overrides: BTreeMap<String, f64>,
}

impl ScenarioConfig {
    /// The calibrated full-size configuration for a scenario id.
    pub fn default_for(scenario: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig {
            scenario: scenario.to_string(),
            seed: 0,
            out_dir: None,
            dims: Vec::new(),
            sample_sizes: Vec::new(),
            paths: 0,
            dt: 0.0,
            t_grid: Vec::new(),
            r_grid: Vec::new(),
            h_grid: Vec::new(),
            s_grid: Vec::new(),
            measures: Vec::new(),
            quad_points: 0,
            net_resolution: 0.0,
            stride: 0,
            tolerance_overrides: BTreeMap::new(),
        };
        match scenario {
            "e1" => {
                cfg.seed = 101;
                cfg.quad_points = 200_001;
                cfg.h_grid = vec![-2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0];
            }
            "e2" => {
                cfg.seed = 102;
                cfg.dims = vec![16, 64, 256];
                cfg.sample_sizes = vec![4_000];
                cfg.t_grid = log_grid(0.02, 6.0, 10);
            }
            "e3" => {
                cfg.seed = 103;
                cfg.dims = vec![4, 16, 64];
                cfg.sample_sizes = vec![16_000];
                cfg.measures = vec!["gaussian".into(), "cube".into(), "ball".into()];
            }
            "e4" => {
                cfg.seed = 104;
                cfg.dims = vec![16];
                cfg.sample_sizes = vec![40_000];
                cfg.r_grid = lin_grid(0.25, 4.0, 16);
                cfg.measures = vec!["radial_exp".into(), "radial_ball".into()];
            }
            "e5" => {
                cfg.seed = 105;
                cfg.dims = vec![4];
                // cloud for flow ensembles, then cloud for the subgaussian
                // leg (omit the second entry to skip that leg).
                cfg.sample_sizes = vec![6_000, 60_000];
                cfg.paths = 96;
                cfg.dt = 1.0 / 32.0;
                cfg.t_grid = vec![0.5, 1.0];
                cfg.s_grid = vec![0.2];
                cfg.net_resolution = 0.7;
            }
            "e6" => {
                cfg.seed = 106;
                cfg.dims = vec![8];
                // scan points per tilt, static cloud, then flow cloud (omit
                // the third entry to skip the pathwise leg).
                cfg.sample_sizes = vec![4_000, 20_000, 40_000];
                cfg.paths = 24;
                cfg.dt = 1.0 / 32.0;
                cfg.t_grid = vec![0.0, 0.25, 0.5, 1.0];
                cfg.h_grid = vec![0.25, 0.5, 1.0, 1.5];
                cfg.net_resolution = 0.9;
                cfg.stride = 4;
            }
            other => bail!("unknown scenario id '{other}' (known: e1, e2, e3, e4, e5, e6)"),
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario config {}", path.display()))?;
        let cfg: ScenarioConfig = toml::from_str(&text)
            .with_context(|| format!("parsing scenario config {}", path.display()))?;
        Ok(cfg)
    }

    /// Checks the fields the configured scenario actually consumes.
    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                bail!("scenario {}: {what}", self.scenario)
            }
        };
        for (grid, name) in [
            (&self.t_grid, "t_grid"),
            (&self.r_grid, "r_grid"),
            (&self.h_grid, "h_grid"),
            (&self.s_grid, "s_grid"),
        ] {
            if grid.iter().any(|v| !v.is_finite()) {
                bail!("scenario {}: {name} has a non-finite entry", self.scenario);
            }
        }
        match self.scenario.as_str() {
            "e1" => {
                need(self.quad_points >= 1_001, "needs quad_points >= 1001")?;
                need(!self.h_grid.is_empty(), "needs a nonempty h_grid of centering offsets")?;
                need(self.h_grid.contains(&0.0), "h_grid must contain 0 (the centered member)")?;
            }
            "e2" => {
                need(!self.dims.is_empty(), "needs a nonempty dims list")?;
                need(!self.t_grid.is_empty(), "needs a nonempty t_grid")?;
                need(self.t_grid.iter().all(|t| *t > 0.0), "t_grid must be positive")?;
                need(!self.sample_sizes.is_empty(), "needs sample_sizes[0]")?;
                need(self.sample_sizes[0] >= 200, "needs at least 200 samples per grid point")?;
            }
            "e3" => {
                need(!self.dims.is_empty(), "needs a nonempty dims list")?;
                need(!self.measures.is_empty(), "needs a nonempty measures list")?;
                need(!self.sample_sizes.is_empty(), "needs sample_sizes[0]")?;
            }
            "e4" => {
                need(!self.dims.is_empty(), "needs a nonempty dims list")?;
                need(!self.r_grid.is_empty(), "needs a nonempty r_grid")?;
                need(self.r_grid.iter().all(|r| *r > 0.0), "r_grid must be positive")?;
                need(!self.measures.is_empty(), "needs a nonempty measures list")?;
                need(
                    self.sample_sizes.first().copied().unwrap_or(0) >= 10_000,
                    "concentration curves need sample_sizes[0] >= 10000",
                )?;
            }
            "e5" => {
                need(!self.dims.is_empty(), "needs a nonempty dims list")?;
                need(self.paths >= 8, "needs at least 8 flow paths")?;
                need(self.dt > 0.0, "needs a positive dt")?;
                need(self.t_grid.len() >= 2, "needs t_grid = [entropy horizon, drift horizon]")?;
                need(self.t_grid.iter().all(|t| *t > 0.0), "t_grid must be positive")?;
                need(!self.s_grid.is_empty(), "needs a nonempty s_grid")?;
                need(!self.sample_sizes.is_empty(), "needs sample_sizes[0]")?;
                if self.sample_sizes.len() >= 2 {
                    need(self.net_resolution > 0.0, "subgaussian leg needs net_resolution")?;
                }
            }
            "e6" => {
                need(!self.dims.is_empty(), "needs a nonempty dims list")?;
                need(!self.t_grid.is_empty(), "needs a nonempty t_grid")?;
                need(self.t_grid.contains(&0.0), "t_grid must contain 0 (the untilted slice)")?;
                need(!self.h_grid.is_empty(), "needs a nonempty h_grid of shift magnitudes")?;
                need(self.h_grid.iter().all(|h| *h > 0.0), "h_grid must be positive")?;
                need(self.sample_sizes.len() >= 2, "needs sample_sizes = [scan, static, flow?]")?;
                if self.sample_sizes.len() >= 3 {
                    need(self.paths >= 8, "pathwise leg needs at least 8 paths")?;
                    need(self.dt > 0.0, "pathwise leg needs a positive dt")?;
                    need(self.stride >= 1, "pathwise leg needs stride >= 1")?;
                    need(self.net_resolution > 0.0, "pathwise leg needs net_resolution")?;
                }
            }
            other => bail!("unknown scenario id '{other}' (known: e1, e2, e3, e4, e5, e6)"),
        }
        Ok(())
    }

    /// Effective output directory.
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&self.scenario))
    }

    /// Absolute tolerance for an invariant, with overrides taking precedence
    /// over the scenario default. Overrides match by exact id first, then by
    /// longest prefix ending before a '/'.
    pub fn tolerance(&self, invariant: &str, default: f64) -> f64 {
        if let Some(t) = self.tolerance_overrides.get(invariant) {
            return *t;
        }
        let mut best: Option<(usize, f64)> = None;
        for (key, t) in &self.tolerance_overrides {
            if invariant.strip_prefix(key.as_str()).is_some_and(|rest| rest.starts_with('/'))
                && best.is_none_or(|(len, _)| key.len() > len)
            {
                best = Some((key.len(), *t));
            }
        }
        best.map(|(_, t)| t).unwrap_or(default)
    }

    /// Derived seed for a named subtask, decorrelated from sibling streams.
    pub fn subseed(&self, salt: u64) -> u64 {
        self.seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

/// Log-spaced grid from lo to hi inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2, "log grid needs 0 < lo < hi and count >= 2");
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    let mut grid: Vec<f64> = (0..count).map(|k| lo * ratio.powi(k as i32)).collect();
    grid[count - 1] = hi;
    grid
}

/// Linearly spaced grid from lo to hi inclusive.
pub fn lin_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(hi > lo && count >= 2, "linear grid needs lo < hi and count >= 2");
    let step = (hi - lo) / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|k| lo + step * k as f64).collect();
    grid[count - 1] = hi;
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_config_validates() {
        for id in ["e1", "e2", "e3", "e4", "e5", "e6"] {
            let cfg = ScenarioConfig::default_for(id).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("default {id} config invalid: {e}"));
            assert_eq!(cfg.scenario, id);
        }
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        assert!(ScenarioConfig::default_for("e9").is_err());
        let mut cfg = ScenarioConfig::default_for("e1").unwrap();
        cfg.scenario = "e9".into();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("unknown scenario id 'e9'"), "{err}");
    }

    #[test]
    fn empty_required_grid_is_rejected() {
        let mut cfg = ScenarioConfig::default_for("e2").unwrap();
        cfg.t_grid.clear();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("t_grid"), "{err}");

        let mut cfg = ScenarioConfig::default_for("e4").unwrap();
        cfg.r_grid.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default_for("e1").unwrap();
        cfg.h_grid.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip_preserves_the_config() {
        let cfg = ScenarioConfig::default_for("e5").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.t_grid, cfg.t_grid);
        assert_eq!(back.sample_sizes, cfg.sample_sizes);
    }

    #[test]
    fn seed_must_be_explicit_in_toml() {
        let err = toml::from_str::<ScenarioConfig>("scenario = \"e1\"").unwrap_err().to_string();
        assert!(err.contains("seed"), "missing seed must be a parse error: {err}");
        let err =
            toml::from_str::<ScenarioConfig>("scenario = \"e1\"\nseed = 3\nbogus_knob = 1\n")
                .unwrap_err()
                .to_string();
        assert!(err.contains("bogus_knob"), "unknown keys must be rejected: {err}");
    }

    #[test]
    fn tolerance_overrides_match_exact_then_prefix() {
        let mut cfg = ScenarioConfig::default_for("e1").unwrap();
        cfg.tolerance_overrides.insert("e1.sd_sq_floor".into(), 0.5);
        cfg.tolerance_overrides.insert("e1.sd_sq_floor/gaussian".into(), 0.25);
        assert_eq!(cfg.tolerance("e1.sd_sq_floor/gaussian", 0.0), 0.25);
        assert_eq!(cfg.tolerance("e1.sd_sq_floor/uniform", 0.0), 0.5);
        assert_eq!(cfg.tolerance("e1.sd_sq_floor_other/x", 0.125), 0.125);
        assert_eq!(cfg.tolerance("e1.psi1_cap/gaussian", 0.125), 0.125);
    }

    #[test]
    fn grids_are_inclusive_and_ordered() {
        let g = log_grid(0.02, 6.0, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.02);
        assert_eq!(g[9], 6.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let l = lin_grid(0.25, 4.0, 16);
        assert_eq!(l.len(), 16);
        assert_eq!(l[0], 0.25);
        assert_eq!(l[15], 4.0);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
    }
}
