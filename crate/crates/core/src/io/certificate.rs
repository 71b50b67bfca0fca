//! Run certificates: a versioned header line followed by a TOML body holding
//! the configuration echo, measured quantities and pass/fail checks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Envelope, ResidualNorms};
use crate::error::{Error, Result};
use crate::io::config::Config;
use crate::io::snapshot::OrderRow;
use crate::picard::IterationRecord;
use crate::pipeline::LadderRung;

pub const CERTIFICATE_MAGIC: &str = "# mmbl-certificate v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `min (q1 − δ)` over the run.
    pub lower: f64,
    /// `min (P − δ − q1)` over the run.
    pub upper: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub name: String,
    pub rows: Vec<OrderRow>,
    /// Order between the two finest levels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Certificate {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<Config>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margins: Option<Margins>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<IterationRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<LadderRung>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<ResidualNorms>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub studies: Vec<Study>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measured: BTreeMap<String, f64>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<Timing>>,
}

impl Certificate {
    pub fn new(command: &str) -> Self {
        Certificate {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, pass, detail));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Iteration records without wall-clock times, so that certificates of
    /// identical runs are byte-identical.
    pub fn set_iterations(&mut self, records: &[IterationRecord]) {
        self.iterations = records
            .iter()
            .map(|r| IterationRecord {
                wall_seconds: 0.0,
                ..*r
            })
            .collect();
    }

    pub fn to_text(&self) -> Result<String> {
        let body = toml::to_string(self)
            .map_err(|e| Error::Internal(format!("certificate serialization: {e}")))?;
        Ok(format!("{CERTIFICATE_MAGIC}\n{body}"))
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let schema = |detail: String| Error::Schema {
            path: origin.to_string(),
            detail,
        };
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        if first.trim_end() != CERTIFICATE_MAGIC {
            return Err(schema(format!("unknown certificate header {first:?}")));
        }
        toml::from_str(body).map_err(|e| schema(e.message().to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_header_rejected() {
        let err = Certificate::parse("# mmbl-certificate v2\ncommand = \"run\"\n", "c").unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
    }

    #[test]
    fn minimal_round_trip() {
        let mut c = Certificate::new("check-invariants");
        c.seed = Some(7);
        c.measured.insert("max_identity_error".into(), 3.5e-17);
        c.check("identity", true, "ok");
        let back = Certificate::parse(&c.to_text().unwrap(), "c").unwrap();
        assert_eq!(back, c);
        assert!(back.passed());
    }
}
