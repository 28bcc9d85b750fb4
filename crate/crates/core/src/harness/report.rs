use std::fmt;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::HarnessError;

/// One pass/fail check with the measured value and its threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes iff `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), pass: value <= tolerance, value, tolerance, detail: String::new() }
    }

    /// Passes iff `value > threshold`.
    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), pass: value > threshold, value, tolerance: threshold, detail: String::new() }
    }

    pub fn boolean(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, value: f64::from(u8::from(pass)), tolerance: 1.0, detail: detail.into() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.6e} (tol {:.1e})", self.name, self.value, self.tolerance)?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

/// Outcome of one command: its checks plus command-specific data.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub data: Value,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.into(), pass: true, checks: Vec::new(), data: Value::Null }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    /// Appends the checks of `other`, prefixed by its command name.
    pub fn absorb(&mut self, other: Report) {
        for mut c in other.checks {
            c.name = format!("{}/{}", other.command, c.name);
            self.push(c);
        }
        if let Value::Object(map) = &mut self.data {
            map.insert(other.command, other.data);
        } else {
            self.data = serde_json::json!({ other.command: other.data });
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        super::output::write_json(dir, "report.json", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorb_prefixes_and_propagates_failure() {
        let mut a = Report::new("all");
        let mut b = Report::new("current");
        b.push(Check::at_most("trend", 2.0, 1.0));
        a.push(Check::boolean("ok", true, ""));
        a.absorb(b);
        assert!(!a.pass);
        assert_eq!(a.failures().map(|c| c.name.as_str()).collect::<Vec<_>>(), vec!["current/trend"]);
        assert!(!Check::at_most("nan", f64::NAN, 1.0).pass);
    }
}
