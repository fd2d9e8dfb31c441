//! JSON summaries and CSV tables written by each command.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub error_estimate: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= bound`.
    pub fn at_most(name: &str, value: f64, bound: f64, error_estimate: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            bound,
            error_estimate,
            pass: value <= bound,
        }
    }

    /// Passes when `|value − target| <= band`; `bound` records the band.
    pub fn within(name: &str, value: f64, target: f64, band: f64, error_estimate: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            bound: band,
            error_estimate,
            pass: (value - target).abs() <= band,
        }
    }

    /// A step that could not be computed.
    pub fn failed(name: &str, error: &dyn std::fmt::Display) -> (Self, String) {
        (
            Check {
                name: name.to_string(),
                value: f64::NAN,
                bound: f64::NAN,
                error_estimate: f64::NAN,
                pass: false,
            },
            format!("{name}: {error}"),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: String,
    pub rows: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &str) -> Self {
        Table {
            name: name.to_string(),
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// Outcome of one command.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub errors: Vec<String>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass) && self.errors.is_empty()
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn fail(&mut self, name: &str, error: &dyn std::fmt::Display) {
        let (c, msg) = Check::failed(name, error);
        self.checks.push(c);
        self.errors.push(msg);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("paneitz-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("paneitz-core".to_string(), paneitz_core::VERSION.to_string()),
    ])
}

impl Summary {
    pub fn new(command: &str, seed: u64, outcome: &Outcome) -> Self {
        Summary {
            command: command.to_string(),
            pass: outcome.pass(),
            checks: outcome.checks.clone(),
            seed,
            versions: versions(),
            errors: outcome.errors.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn write_outputs(dir: &Path, summary: &Summary, tables: &[Table]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{}.json", summary.command)), summary.to_json())?;
    for t in tables {
        std::fs::write(dir.join(format!("{}.csv", t.name)), t.render())?;
    }
    Ok(())
}
