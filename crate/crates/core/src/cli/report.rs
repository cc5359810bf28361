//! Run reports and their JSON / CSV forms.

use serde::Serialize;

use super::config::{ExperimentConfig, Format};
use super::CliError;
use crate::qh_verify::{ExactCheck, MomentCheckReport, RegressionReport};

/// One line of a report. Exact checks carry a zero standard error and no z.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub theory: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z: Option<f64>,
    pub pass: bool,
}

impl CheckEntry {
    pub fn moment(name: impl Into<String>, m: &MomentCheckReport) -> Self {
        CheckEntry {
            name: name.into(),
            theory: m.theory,
            estimate: m.estimate,
            std_error: m.std_error,
            z: Some(m.z_score),
            pass: m.pass,
        }
    }

    pub fn exact(name: impl Into<String>, c: &ExactCheck) -> Self {
        CheckEntry {
            name: name.into(),
            theory: c.reference,
            estimate: c.value,
            std_error: 0.0,
            z: None,
            pass: c.pass,
        }
    }

    /// One entry per fitted coefficient, named `prefix.feature`.
    pub fn regression(prefix: &str, r: &RegressionReport) -> Vec<Self> {
        (0..r.features.len())
            .map(|j| CheckEntry {
                name: format!("{prefix}.{}", r.features[j]),
                theory: r.theory_coefficients[j],
                estimate: r.coefficients[j],
                std_error: r.std_errors[j],
                z: Some(r.z_scores[j]),
                pass: r.z_scores[j].abs() <= r.threshold,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub checks: Vec<CheckEntry>,
    pub pass: bool,
    pub seed: Option<u64>,
    pub version: &'static str,
}

impl RunReport {
    pub fn new(config: ExperimentConfig, checks: Vec<CheckEntry>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        let seed = config.seed;
        RunReport {
            config,
            checks,
            pass,
            seed,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> Result<String, CliError> {
        let value = serde_json::to_value(self).map_err(|e| CliError::Io(e.to_string()))?;
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    /// One row per check.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.checks {
            w.serialize(c).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}
