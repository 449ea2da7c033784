//! Report bundles: every artifact of a study run as plain files.
//!
//! A bundle is self-contained. [`reevaluate`] rebuilds the held-out metric
//! table from the stored preprocessor, model, threshold and test rows and
//! must reproduce `metrics.json` exactly. Writing is deterministic: the same
//! inputs give byte-identical files whatever the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::StudyConfig;
use crate::dataio::{ingest, Cohort, CohortSchema, Ingested};
use crate::error::{Error, Stage, StageExt};
use crate::interpret::{
    baseline_table, feature_report, format_baseline_table, format_feature_report, AnalyteMap, BaselineTable, FeatureReport,
    RankingBasis,
};
use crate::metrics::{self, evaluate, Evaluation, MetricKind, ScoredSet};
use crate::models::{Family, TrainedModel};
use crate::preprocess::FittedPreprocessor;
use crate::protocol::{run_study, score_rows, CandidateResult, CandidateTest, FoldPlan, StudyResult, ThresholdReport};

/// Bumped whenever the file layout changes.
pub const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub tool: String,
    pub version: String,
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub input_sha256: String,
    pub n_rows: usize,
    pub n_predictors: usize,
    pub components: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

/// Partition record with a digest guarding against edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub test_row_ids: Vec<String>,
    pub sha256: String,
}

impl SplitRecord {
    fn digest(train: &[usize], test: &[usize], ids: &[String]) -> String {
        let body = serde_json::to_vec(&(train, test, ids)).expect("serializes");
        sha256_hex(&body)
    }

    pub fn new(cohort: &Cohort, study: &StudyResult) -> Self {
        let ids: Vec<String> = study.split.test_rows.iter().map(|&r| cohort.row_ids()[r].clone()).collect();
        Self {
            seed: study.split.seed,
            sha256: Self::digest(&study.split.train_rows, &study.split.test_rows, &ids),
            train_rows: study.split.train_rows.clone(),
            test_rows: study.split.test_rows.clone(),
            test_row_ids: ids,
        }
    }

    pub fn verify(&self) -> Result<(), Error> {
        if Self::digest(&self.train_rows, &self.test_rows, &self.test_row_ids) != self.sha256 {
            return Err(Error::Integrity("split.json does not match its recorded digest".into()));
        }
        Ok(())
    }
}

/// Search and selection results without the fitted artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub selected: Family,
    pub threshold: ThresholdReport,
    pub folds: FoldPlan,
    pub candidates: Vec<CandidateResult>,
    pub test_probs: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub config: StudyConfig,
    pub run_log: RunLog,
    pub schema: CohortSchema,
    pub split: SplitRecord,
    pub summary: StudySummary,
    pub evaluation: Evaluation,
    pub candidate_tests: Vec<CandidateTest>,
    pub features: FeatureReport,
    pub baseline: Option<BaselineTable>,
    pub preprocessor: FittedPreprocessor,
    pub model: TrainedModel,
}

fn components() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("labrisk".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("rng".to_string(), "chacha8+splitmix64".to_string()),
        ("format".to_string(), FORMAT_VERSION.to_string()),
    ])
}

/// Ingests the raw export with the config's label, exclusion and grade rules.
pub fn ingest_with(config: &StudyConfig, bytes: &[u8]) -> Result<Ingested, Error> {
    ingest(bytes, &config.label_spec(), config.data.id_column.as_deref(), &config.exclusions, &config.grades).stage(Stage::Ingest)
}

/// Runs a study from raw bytes to a complete bundle.
pub fn train_bundle(config: &StudyConfig, input: &[u8], map: &AnalyteMap) -> Result<ReportBundle, Error> {
    config.validate()?;
    let ingested = ingest_with(config, input)?;
    let cohort = &ingested.cohort;
    let study = run_study(cohort, &config.study_settings())?;
    let report = config.report_settings();
    let features = feature_report(study.model.feature_importance(), &study.preprocessor, cohort, map, &report).stage(Stage::Interpretation)?;
    let baseline = match &ingested.descriptive {
        Some(d) => {
            let wanted: Vec<String> = if config.report.baseline.is_empty() {
                d.columns().iter().map(|c| c.name.clone()).collect()
            } else {
                config.report.baseline.clone()
            };
            Some(baseline_table(d, &wanted, &report).stage(Stage::Interpretation)?)
        }
        None if !config.report.baseline.is_empty() => {
            return Err(Error::Config("report.baseline lists columns but no descriptive columns were excluded".into()))
        }
        None => None,
    };
    let mut warnings = ingested.schema.warnings.clone();
    warnings.extend(study.warnings.iter().cloned());
    let run_log = RunLog {
        tool: "labrisk".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        format_version: FORMAT_VERSION,
        config_hash: config.hash(),
        seed: config.protocol.seed,
        input_sha256: sha256_hex(input),
        n_rows: cohort.n(),
        n_predictors: study.preprocessor.n_features(),
        components: components(),
        warnings,
    };
    let split = SplitRecord::new(cohort, &study);
    let StudyResult { folds, candidates, selected, preprocessor, model, threshold, test_probs, evaluation, candidate_tests, warnings, .. } =
        study;
    Ok(ReportBundle {
        config: config.clone(),
        run_log,
        schema: ingested.schema,
        split,
        summary: StudySummary { selected, threshold, folds, candidates, test_probs, warnings },
        evaluation,
        candidate_tests,
        features,
        baseline,
        preprocessor,
        model,
    })
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("artifact serializes");
    out.push(b'\n');
    out
}

pub const REPORT_FILE: &str = "report.md";

impl ReportBundle {
    /// Every file of the bundle, in a fixed order.
    pub fn files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let e = &self.evaluation;
        let mut files = vec![
            ("config.toml", self.config.to_toml().into_bytes()),
            ("run_log.json", json(&self.run_log)),
            ("schema.json", json(&self.schema)),
            ("split.json", json(&self.split)),
            ("study.json", json(&self.summary)),
            ("metrics.json", json(e)),
            ("metrics.txt", metrics::format_table(&e.table, self.config.metrics.confidence_level).into_bytes()),
            ("candidates.json", json(&self.candidate_tests)),
            ("features.json", json(&self.features)),
            ("roc.csv", metrics::roc_csv(&e.roc).into_bytes()),
            ("pr.csv", metrics::pr_csv(&e.pr).into_bytes()),
            ("calibration.csv", metrics::calibration_csv(&e.calibration).into_bytes()),
            ("dca.csv", metrics::decision_curve_csv(&e.decision_curve).into_bytes()),
            ("preprocessor.json", json(&self.preprocessor)),
            ("model.json", json(&self.model)),
        ];
        if let Some(b) = &self.baseline {
            files.push(("baseline.json", json(b)));
        }
        files.push((REPORT_FILE, render_report(self).into_bytes()));
        files
    }

    pub fn write(&self, dir: &Path) -> Result<(), Error> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, bytes) in self.files() {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// SHA-256 over all file names and contents.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, bytes) in self.files() {
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        hex::encode(h.finalize())
    }

    pub fn load(dir: &Path) -> Result<Self, Error> {
        fn read<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, Error> {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_slice(&bytes).map_err(|e| Error::Integrity(format!("{name}: {e}")))
        }
        let cfg_path = dir.join("config.toml");
        let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        let config = StudyConfig::parse(&text)?;
        let baseline = if dir.join("baseline.json").exists() { Some(read(dir, "baseline.json")?) } else { None };
        let bundle = Self {
            config,
            run_log: read(dir, "run_log.json")?,
            schema: read(dir, "schema.json")?,
            split: read(dir, "split.json")?,
            summary: read(dir, "study.json")?,
            evaluation: read(dir, "metrics.json")?,
            candidate_tests: read(dir, "candidates.json")?,
            features: read(dir, "features.json")?,
            baseline,
            preprocessor: read(dir, "preprocessor.json")?,
            model: read(dir, "model.json")?,
        };
        if bundle.run_log.format_version != FORMAT_VERSION {
            return Err(Error::Integrity(format!("bundle format {} is not supported", bundle.run_log.format_version)));
        }
        if bundle.run_log.config_hash != bundle.config.hash() {
            return Err(Error::Integrity("config.toml does not match the run log's config hash".into()));
        }
        bundle.split.verify()?;
        Ok(bundle)
    }
}

/// Recomputes the held-out evaluation strictly on the recorded test rows.
///
/// Refuses when the input differs from the one trained on or the split
/// record was altered.
pub fn reevaluate(bundle: &ReportBundle, input: &[u8]) -> Result<Evaluation, Error> {
    bundle.split.verify()?;
    if sha256_hex(input) != bundle.run_log.input_sha256 {
        return Err(Error::Integrity("input data differ from the data the bundle was trained on".into()));
    }
    let ingested = ingest_with(&bundle.config, input)?;
    let cohort = &ingested.cohort;
    let rows = &bundle.split.test_rows;
    if rows.iter().any(|&r| r >= cohort.n()) {
        return Err(Error::Integrity("recorded test rows fall outside the cohort".into()));
    }
    let ids: Vec<&String> = rows.iter().map(|&r| &cohort.row_ids()[r]).collect();
    if ids.iter().zip(&bundle.split.test_row_ids).any(|(a, b)| *a != b) || ids.len() != bundle.split.test_row_ids.len() {
        return Err(Error::Integrity("recorded test row ids do not match the cohort".into()));
    }
    let probs = score_rows(cohort, &bundle.preprocessor, &bundle.model, rows).stage(Stage::Evaluation)?;
    let labels: Vec<bool> = rows.iter().map(|&r| cohort.labels()[r]).collect();
    let set = ScoredSet::new(probs, labels).stage(Stage::Evaluation)?;
    evaluate(&set, bundle.summary.threshold.threshold, &bundle.config.eval_settings()).stage(Stage::Evaluation)
}

fn f3(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.3}"))
}

fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for r in rows {
        out.push_str(&format!("| {} |\n", r.join(" | ")));
    }
    out
}

fn metric_rows(b: &ReportBundle) -> String {
    let level = b.config.metrics.confidence_level * 100.0;
    let header = ["Metric".to_string(), format!("Estimate (bootstrap {level:.0}% CI)")];
    let rows: Vec<Vec<String>> = b
        .evaluation
        .table
        .iter()
        .map(|r| {
            let ci = match (r.ci_lower, r.ci_upper) {
                (Some(l), Some(u)) => format!(" ({l:.3}-{u:.3})"),
                _ => String::new(),
            };
            vec![r.name.clone(), format!("{}{ci}", f3(r.estimate))]
        })
        .collect();
    markdown_table(&header, &rows)
}

fn candidate_rows(b: &ReportBundle) -> String {
    const SHOWN: [MetricKind; 9] = [
        MetricKind::Auroc,
        MetricKind::Auprc,
        MetricKind::Accuracy,
        MetricKind::Sensitivity,
        MetricKind::Specificity,
        MetricKind::Ppv,
        MetricKind::Npv,
        MetricKind::F1,
        MetricKind::Brier,
    ];
    let mut header = vec!["Model".to_string(), "CV AUROC".to_string()];
    header.extend(SHOWN.iter().map(|k| k.label().to_string()));
    let rows: Vec<Vec<String>> = b
        .candidate_tests
        .iter()
        .map(|c| {
            let star = if c.family == b.summary.selected { "*" } else { "" };
            let mut row = vec![format!("{}{star}", c.family.label()), format!("{:.3}", c.cv_auroc)];
            row.extend(SHOWN.iter().map(|&k| f3(c.evaluation.value(k))));
            row
        })
        .collect();
    markdown_table(&header, &rows)
}

/// The Markdown report assembling all tables.
pub fn render_report(b: &ReportBundle) -> String {
    let s = &b.summary;
    let mut out = String::from("# Study report\n\n");
    out.push_str(&format!(
        "Seed {}; config hash `{}`; input sha256 `{}`.\n\n",
        b.run_log.seed, b.run_log.config_hash, b.run_log.input_sha256
    ));
    out.push_str(&format!(
        "Cohort: {} rows, {} predictors after preprocessing. Training {} rows, held-out test {} rows.\n\n",
        b.run_log.n_rows,
        b.run_log.n_predictors,
        b.split.train_rows.len(),
        b.split.test_rows.len()
    ));

    out.push_str("## Baseline characteristics\n\n");
    match &b.baseline {
        Some(t) => out.push_str(&format!("```text\n{}```\n\n", format_baseline_table(t))),
        None => out.push_str("No descriptive columns were configured, so no baseline table was produced.\n\n"),
    }

    out.push_str(&format!("## Held-out performance of the selected model ({})\n\n", s.selected.label()));
    out.push_str(&format!(
        "Threshold {:.4} from out-of-fold training predictions (Youden J {:.3}).\n\n",
        s.threshold.threshold, s.threshold.youden_j
    ));
    out.push_str(&metric_rows(b));
    out.push('\n');

    out.push_str("## Held-out performance of candidate models\n\n");
    out.push_str(&candidate_rows(b));
    out.push_str(
        "\n\\* Selected by mean cross-validated AUROC in the training rows. Candidate test results are descriptive; the test rows were not used to choose the model.\n\n",
    );

    out.push_str("## Leading predictors\n\n");
    if b.features.basis != RankingBasis::ModelImportance {
        out.push_str(&format!(
            "No importance-ranked predictor table: the selected model ({}) has no native feature importance. \
             The table below ranks predictors by absolute rank-biserial effect size.\n\n",
            s.selected.label()
        ));
    }
    out.push_str(&format!("```text\n{}```\n\n", format_feature_report(&b.features)));

    let mut warnings: Vec<&String> = b.run_log.warnings.iter().collect();
    warnings.dedup();
    if !warnings.is_empty() {
        out.push_str("## Warnings\n\n");
        for w in warnings {
            out.push_str(&format!("- {w}\n"));
        }
        out.push('\n');
    }
    out
}
