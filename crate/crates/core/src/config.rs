//! Study configuration file (TOML).
//!
//! One file carries every coupled setting of a study. Unknown keys are
//! rejected so that a typo never silently falls back to a default.
//!
//! ```
//! use labrisk::config::StudyConfig;
//!
//! let cfg = StudyConfig::parse(r#"
//! [data]
//! input = "cohort.csv"
//! label_column = "Group"
//! positive_label = "P-TMA"
//!
//! [protocol]
//! seed = 7
//! n_iter = 5
//! families = ["logreg", "gradient_boosting"]
//! "#).unwrap();
//! assert_eq!(cfg.protocol.seed, 7);
//! assert_eq!(cfg.study_settings().eval.seed, 7);
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{ExclusionRules, GradeMap, LabelSpec};
use crate::error::Error;
use crate::interpret::ReportSettings;
use crate::metrics::{default_dca_grid, EvalSettings};
use crate::preprocess::PreprocessSpec;
use crate::protocol::{ProtocolSettings, StudySettings};
use crate::synth::Manifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Raw CSV export, relative to the config file.
    pub input: Option<PathBuf>,
    /// Output directory, relative to the config file.
    pub output: Option<PathBuf>,
    pub label_column: String,
    pub positive_label: Option<String>,
    pub id_column: Option<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { input: None, output: None, label_column: "Group".into(), positive_label: None, id_column: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub calibration_bins: usize,
    pub bootstrap_iterations: usize,
    pub confidence_level: f64,
    pub dca_grid: Vec<f64>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { calibration_bins: 10, bootstrap_iterations: 1000, confidence_level: 0.95, dca_grid: default_dca_grid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub top_k: usize,
    pub trend_cutoff: f64,
    pub case_label: String,
    pub control_label: String,
    /// `analyte,alias,domain` CSV; the bundled map is used when absent.
    pub analyte_map: Option<PathBuf>,
    /// Descriptive columns summarized in the baseline table; all when empty.
    pub baseline: Vec<String>,
}

impl Default for ReportSection {
    fn default() -> Self {
        let r = ReportSettings::default();
        Self {
            top_k: r.top_k,
            trend_cutoff: r.trend_cutoff,
            case_label: r.case_label,
            control_label: r.control_label,
            analyte_map: None,
            baseline: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub data: DataSection,
    pub exclusions: ExclusionRules,
    pub grades: GradeMap,
    pub preprocess: PreprocessSpec,
    pub protocol: ProtocolSettings,
    pub metrics: MetricsSection,
    pub report: ReportSection,
}

fn invalid(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

impl StudyConfig {
    /// Parses and validates; parse errors carry the line and column.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut cfg: StudyConfig = toml::from_str(text).map_err(|e| invalid(e.to_string().trim_end().to_string()))?;
        cfg.grades = cfg.grades.normalized();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.data.label_column.trim().is_empty() {
            return Err(invalid("data.label_column must not be empty"));
        }
        self.preprocess.validate().map_err(|e| invalid(format!("preprocess: {e}")))?;
        self.protocol.validate().map_err(|e| invalid(format!("protocol: {e}")))?;
        let m = &self.metrics;
        if m.calibration_bins == 0 {
            return Err(invalid("metrics.calibration_bins must be at least 1"));
        }
        if m.bootstrap_iterations == 0 {
            return Err(invalid("metrics.bootstrap_iterations must be at least 1"));
        }
        if !(m.confidence_level > 0.0 && m.confidence_level < 1.0) {
            return Err(invalid("metrics.confidence_level must lie strictly between 0 and 1"));
        }
        if m.dca_grid.is_empty() || m.dca_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(invalid("metrics.dca_grid must be non-empty with values strictly between 0 and 1"));
        }
        if self.report.top_k == 0 {
            return Err(invalid("report.top_k must be at least 1"));
        }
        if !(self.report.trend_cutoff >= 0.0 && self.report.trend_cutoff <= 1.0) {
            return Err(invalid("report.trend_cutoff must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn label_spec(&self) -> LabelSpec {
        LabelSpec { column: self.data.label_column.clone(), positive: self.data.positive_label.clone() }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        let m = &self.metrics;
        EvalSettings {
            calibration_bins: m.calibration_bins,
            bootstrap_iterations: m.bootstrap_iterations,
            confidence_level: m.confidence_level,
            dca_grid: m.dca_grid.clone(),
            seed: self.protocol.seed,
        }
    }

    pub fn study_settings(&self) -> StudySettings {
        StudySettings { protocol: self.protocol.clone(), preprocess: self.preprocess.clone(), eval: self.eval_settings() }
    }

    pub fn report_settings(&self) -> ReportSettings {
        let r = &self.report;
        ReportSettings {
            top_k: r.top_k,
            trend_cutoff: r.trend_cutoff,
            case_label: r.case_label.clone(),
            control_label: r.control_label.clone(),
        }
    }

    /// Config matching a synthetic cohort: label, exclusions, labels and seed
    /// taken from its manifest; input `cohort.csv`, output `bundle`.
    pub fn for_synthetic(manifest: &Manifest) -> Self {
        let mut cfg = Self::default();
        cfg.data.input = Some("cohort.csv".into());
        cfg.data.output = Some("bundle".into());
        cfg.data.label_column = manifest.label_column.clone();
        cfg.data.positive_label = Some(manifest.case_label.clone());
        cfg.exclusions = manifest.exclusion_rules();
        cfg.protocol.seed = manifest.seed;
        cfg.report.case_label = manifest.case_label.clone();
        cfg.report.control_label = manifest.control_label.clone();
        cfg
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form; independent of formatting and
    /// key order in the source file.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
