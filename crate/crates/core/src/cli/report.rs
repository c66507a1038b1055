//! Scenario results and the three output files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::diagnostics::{format_value, rows_to_csv, DiagnosticsRow};
use crate::evolution::ConvergenceVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Below,
    AtMost,
    Above,
    AtLeast,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::Above => ">",
            Relation::AtLeast => ">=",
        }
    }

    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Below => value < threshold,
            Relation::AtMost => value <= threshold,
            Relation::Above => value > threshold,
            Relation::AtLeast => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
}

impl Assertion {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            relation,
            threshold,
        }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        self.relation.holds(self.value, self.threshold)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub scenario: String,
    pub rows: Vec<DiagnosticsRow>,
    /// Named scalars written to `diagnostics.csv` and `summary.txt`.
    pub measurements: Vec<(String, f64)>,
    pub convergence: Option<ConvergenceVerdict>,
    pub assertions: Vec<Assertion>,
}

impl Report {
    pub fn new(scenario: impl Into<String>) -> Self {
        Report {
            scenario: scenario.into(),
            ..Report::default()
        }
    }

    pub fn measure(&mut self, name: impl Into<String>, value: f64) {
        self.measurements.push((name.into(), value));
    }

    pub fn check(
        &mut self,
        name: impl Into<String>,
        value: f64,
        relation: Relation,
        threshold: f64,
    ) {
        self.assertions
            .push(Assertion::new(name, value, relation, threshold));
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(Assertion::passed)
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("quantity,value\n");
        for (name, v) in &self.measurements {
            let _ = writeln!(s, "{name},{}", format_value(Some(*v)));
        }
        if let Some(verdict) = &self.convergence {
            for e in &verdict.entries {
                for (suffix, v) in [
                    ("coarse", e.coarse),
                    ("fine", e.fine),
                    ("rel_change", e.rel_change),
                ] {
                    let _ = writeln!(
                        s,
                        "convergence.{}.{suffix},{}",
                        e.name,
                        format_value(Some(v))
                    );
                }
            }
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "samples = {}", self.rows.len());
        if let Some(last) = self.rows.last() {
            for (name, v) in last.values() {
                let _ = writeln!(s, "final.{name} = {}", format_value(v));
            }
        }
        for (name, v) in &self.measurements {
            let _ = writeln!(s, "{name} = {}", format_value(Some(*v)));
        }
        match &self.convergence {
            None => {
                let _ = writeln!(s, "convergence = not checked");
            }
            Some(v) => {
                let _ = writeln!(
                    s,
                    "convergence = {}",
                    if v.passed { "PASS" } else { "FAIL" }
                );
                if let Some(note) = &v.note {
                    let _ = writeln!(s, "convergence.note = {note}");
                }
                for e in &v.entries {
                    let _ = writeln!(
                        s,
                        "convergence.{} = {} -> {} (relative change {})",
                        e.name,
                        format_value(Some(e.coarse)),
                        format_value(Some(e.fine)),
                        format_value(Some(e.rel_change))
                    );
                }
            }
        }
        for a in &self.assertions {
            let _ = writeln!(
                s,
                "assert {}: {} {} {} {}",
                a.name,
                format_value(Some(a.value)),
                a.relation.symbol(),
                format_value(Some(a.threshold)),
                if a.passed() { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            s,
            "result = {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }

    /// Writes `trajectory.csv`, `diagnostics.csv` and `summary.txt`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("trajectory.csv"), rows_to_csv(&self.rows))?;
        fs::write(dir.join("diagnostics.csv"), self.diagnostics_csv())?;
        fs::write(dir.join("summary.txt"), self.summary())
    }
}
