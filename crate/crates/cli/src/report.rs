//! Scenario reports: an append-only record of assertions and data curves.
//!
//! Every assertion line carries the invariant id, both compared values, and
//! the tolerance that was in force, so a report is auditable without
//! re-running the scenario. Records are only ever appended: nothing an
//! earlier stage wrote can be edited or dropped by a later one.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// Schema tag written into every emitted summary.
pub const REPORT_SCHEMA: &str = "loglab-report-v1";

/// Direction of an assertion's comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Cmp {
    /// lhs <= rhs + tolerance
    Le,
    /// lhs >= rhs - tolerance
    Ge,
    /// |lhs - rhs| <= tolerance
    Within,
}

/// One checked inequality with everything needed to audit it.
#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub invariant: String,
    pub lhs: f64,
    pub cmp: Cmp,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    fn build(invariant: impl Into<String>, lhs: f64, cmp: Cmp, rhs: f64, tolerance: f64) -> Self {
        // NaN on either side must read as a failure, so every comparison is
        // phrased positively and negated nowhere.
        let pass = match cmp {
            Cmp::Le => lhs <= rhs + tolerance,
            Cmp::Ge => lhs >= rhs - tolerance,
            Cmp::Within => (lhs - rhs).abs() <= tolerance,
        };
        Assertion { invariant: invariant.into(), lhs, cmp, rhs, tolerance, pass, detail: String::new() }
    }

    pub fn le(invariant: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::build(invariant, lhs, Cmp::Le, rhs, tolerance)
    }

    pub fn ge(invariant: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::build(invariant, lhs, Cmp::Ge, rhs, tolerance)
    }

    pub fn within(invariant: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::build(invariant, lhs, Cmp::Within, rhs, tolerance)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let op = match self.cmp {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Within => "~=",
        };
        write!(
            f,
            "{verdict} {}: lhs={:.6e} {op} rhs={:.6e} (tol {:.3e})",
            self.invariant, self.lhs, self.rhs, self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, "  [{}]", self.detail)?;
        }
        Ok(())
    }
}

/// A numeric table destined for one CSV file. `labels`, when nonempty, is a
/// leading text column aligned with `rows`.
#[derive(Clone, Debug, Serialize)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Everything a scenario run produced.
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub assertions: Vec<Assertion>,
    pub curves: Vec<Curve>,
    pub notes: Vec<String>,
    pub constants_used: BTreeMap<String, f64>,
}

impl ScenarioReport {
    pub fn new(scenario: impl Into<String>, seed: u64) -> Self {
        ScenarioReport {
            schema: REPORT_SCHEMA.into(),
            scenario: scenario.into(),
            seed,
            assertions: Vec::new(),
            curves: Vec::new(),
            notes: Vec::new(),
            constants_used: BTreeMap::new(),
        }
    }

    /// Appends an assertion and reports whether it passed.
    pub fn record(&mut self, assertion: Assertion) -> bool {
        let pass = assertion.pass;
        self.assertions.push(assertion);
        pass
    }

    pub fn curve(
        &mut self,
        name: impl Into<String>,
        columns: Vec<String>,
        labels: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) {
        self.curves.push(Curve { name: name.into(), columns, labels, rows });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn all_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn failures(&self) -> usize {
        self.assertions.iter().filter(|a| !a.pass).count()
    }

    /// The stdout block: one line per assertion plus a one-line tally.
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for a in &self.assertions {
            out.push_str(&a.to_string());
            out.push('\n');
        }
        out.push_str(&format!(
            "scenario {}: {} assertions, {} failed, {} curves\n",
            self.scenario,
            self.assertions.len(),
            self.failures(),
            self.curves.len()
        ));
        out
    }
}
