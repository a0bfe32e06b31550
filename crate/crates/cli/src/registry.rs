//! Registry of frozen empirical constants.
//!
//! Scenario assertions that involve a non-universal constant (a decay rate, a
//! ratio cap) compare against values fitted once on the full-size
//! configuration and then frozen here with explicit headroom. Assert runs
//! read the frozen value and never refit; a missing constant is a
//! configuration error, not a silent pass. Overriding a frozen value bumps
//! the registry version so downstream reports can tell the vintages apart.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// The frozen registry compiled into the binary.
const FROZEN: &str = include_str!("../frozen_constants.toml");

/// One frozen constant: the value assertions use, the raw fitted number it
/// was derived from, and a note on how it was measured.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConstantEntry {
    pub value: f64,
    pub fitted: f64,
    pub note: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConstantsRegistry {
    pub version: u32,
    pub constants: BTreeMap<String, ConstantEntry>,
}

impl ConstantsRegistry {
    /// The compiled-in frozen registry.
    pub fn frozen() -> Self {
        toml::from_str(FROZEN).expect("compiled-in constants registry parses")
    }

    pub fn empty() -> Self {
        ConstantsRegistry { version: 0, constants: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading constants registry {}", path.display()))?;
        toml::from_str(&text)
            .with_context(|| format!("parsing constants registry {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serializing constants registry")?;
        std::fs::write(path, text)
            .with_context(|| format!("writing constants registry {}", path.display()))
    }

    /// Value of a frozen constant. Missing constants are a configuration
    /// error: the caller asked to assert against something never fitted.
    pub fn get(&self, name: &str) -> Result<f64> {
        match self.constants.get(name) {
            Some(entry) => Ok(entry.value),
            None => bail!(
                "constant '{name}' is not in the registry (version {}); \
                 fit it first with --fit-constants and freeze the result",
                self.version
            ),
        }
    }

    /// Replaces a frozen value and bumps the registry version.
    pub fn override_constant(&mut self, name: &str, value: f64, note: impl Into<String>) {
        let fitted = self.constants.get(name).map(|e| e.fitted).unwrap_or(value);
        self.constants.insert(name.to_string(), ConstantEntry { value, fitted, note: note.into() });
        self.version += 1;
    }

    pub fn render_table(&self) -> String {
        let mut out = format!("constants registry version {}\n", self.version);
        for (name, e) in &self.constants {
            let _ = writeln!(out, "{name} = {} (fitted {})  {}", e.value, e.fitted, e.note);
        }
        out
    }
}

/// How a fitted constant aggregates across measurements: caps keep the
/// largest observed ratio, floors the smallest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitAgg {
    Max,
    Min,
}

/// Scenario-facing access to constants. In assert mode reads come from the
/// frozen registry; in fit mode reads are absent and measurements accumulate
/// into per-constant extremes that a freeze step can then pad with headroom.
#[derive(Debug)]
pub struct ConstantsStore {
    registry: ConstantsRegistry,
    fit: bool,
    pub fitted: BTreeMap<String, (FitAgg, f64)>,
}

impl ConstantsStore {
    pub fn assert_mode(registry: ConstantsRegistry) -> Self {
        ConstantsStore { registry, fit: false, fitted: BTreeMap::new() }
    }

    pub fn fit_mode() -> Self {
        ConstantsStore { registry: ConstantsRegistry::empty(), fit: true, fitted: BTreeMap::new() }
    }

    pub fn is_fit(&self) -> bool {
        self.fit
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        if self.fit {
            bail!("constant '{name}' requested during a fit run");
        }
        self.registry.get(name)
    }

    /// Folds one measurement into a max-aggregated (cap) constant.
    pub fn fit_max(&mut self, name: &str, value: f64) {
        let slot = self.fitted.entry(name.to_string()).or_insert((FitAgg::Max, f64::NEG_INFINITY));
        debug_assert_eq!(slot.0, FitAgg::Max, "aggregation flavor is fixed per constant");
        slot.1 = slot.1.max(value);
    }

    /// Folds one measurement into a min-aggregated (floor) constant.
    pub fn fit_min(&mut self, name: &str, value: f64) {
        let slot = self.fitted.entry(name.to_string()).or_insert((FitAgg::Min, f64::INFINITY));
        debug_assert_eq!(slot.0, FitAgg::Min, "aggregation flavor is fixed per constant");
        slot.1 = slot.1.min(value);
    }

    /// The fitted extremes as a registry skeleton (no headroom applied).
    pub fn fitted_registry(&self) -> ConstantsRegistry {
        let mut constants = BTreeMap::new();
        for (name, (agg, value)) in &self.fitted {
            let flavor = match agg {
                FitAgg::Max => "max over measurements; freeze above this",
                FitAgg::Min => "min over measurements; freeze below this",
            };
            constants.insert(
                name.clone(),
                ConstantEntry { value: *value, fitted: *value, note: flavor.into() },
            );
        }
        ConstantsRegistry { version: 0, constants }
    }
}
