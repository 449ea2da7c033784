//! Synthetic cohorts with a known ground truth.
//!
//! Labels are fixed first (exactly `round(n * prevalence)` cases). Each
//! analyte-week feature is Gaussian around its control reference; a planted
//! shift moves the case distribution by `size` standard deviations. With
//! class-conditional Gaussians of equal variance the log-odds of a case is
//! linear in the standardized planted features, so the manifest's latent
//! score is exact rather than approximate.
//!
//! Rendering then masks cells at the missingness rate and, at the mess rate,
//! writes values with units, date annotations, qualitative grades or free
//! text, in the dialect [`crate::dataio`] ingests.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{week_code, Cohort, ExclusionRules, WEEKS};
use crate::interpret::mann_whitney;
use crate::rng::{shuffle, stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
}

const LABEL_STREAM: u64 = 11;
const FEATURE_STREAM: u64 = 12;
const EXTRA_STREAM: u64 = 13;

/// Planted effects at or above this size are checked for direction agreement.
pub const CHECKED_EFFECT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// How a planted effect changes the case distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectShape {
    /// Mean shift of `size` control SDs in `direction`.
    #[default]
    Shift,
    /// Case SD is `1 + size` control SDs; no mean change. Invisible to a
    /// linear score.
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedEffect {
    pub feature: String,
    pub direction: Direction,
    pub size: f64,
    #[serde(default)]
    pub shape: EffectShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyteSpec {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    #[serde(default)]
    pub unit: String,
    #[serde(default = "default_decimals")]
    pub decimals: usize,
    /// Weeks at which the analyte is sampled; all seven when absent.
    #[serde(default = "all_weeks")]
    pub weeks: Vec<u8>,
    /// Qualitative urinalysis grades may replace values in messy cells.
    #[serde(default)]
    pub graded: bool,
}

fn default_decimals() -> usize {
    2
}

fn all_weeks() -> Vec<u8> {
    WEEKS.to_vec()
}

impl AnalyteSpec {
    fn new(name: &str, mean: f64, sd: f64, unit: &str, decimals: usize) -> Self {
        Self { name: name.into(), mean, sd, unit: unit.into(), decimals, weeks: all_weeks(), graded: false }
    }

    pub fn feature_names(&self) -> impl Iterator<Item = String> + '_ {
        self.weeks.iter().map(move |&w| format!("{}{}", self.name, week_code(w).unwrap_or("?")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub prevalence: f64,
    pub analytes: Vec<AnalyteSpec>,
    pub effects: Vec<PlantedEffect>,
    pub missing_rate: f64,
    pub mess_rate: f64,
    /// Adds identifier, descriptive, leaky and date columns.
    pub extra_columns: bool,
    pub label_column: String,
    pub case_label: String,
    pub control_label: String,
    pub seed: u64,
}

/// Ordered so that the first five are the strongest planted features.
pub const DEFAULT_PLANTED: [(&str, Direction); 9] = [
    ("CysCVI", Direction::Up),
    ("UAVI", Direction::Up),
    ("HbXXXII", Direction::Down),
    ("NeuXVI", Direction::Up),
    ("LDHVI", Direction::Up),
    ("CrXXIV", Direction::Up),
    ("NeuVI", Direction::Up),
    ("NLRXXIV", Direction::Down),
    ("WBCXII", Direction::Up),
];

/// Planted effect size of the default cohort, in control SDs.
pub const DEFAULT_EFFECT: f64 = 0.8;

pub fn default_panel() -> Vec<AnalyteSpec> {
    let mut uwbc = AnalyteSpec::new("UWBC", 10.0, 3.0, "/uL", 1);
    uwbc.graded = true;
    vec![
        AnalyteSpec::new("CysC", 0.8, 0.12, "mg/L", 3),
        AnalyteSpec::new("UA", 260.0, 50.0, "umol/L", 1),
        AnalyteSpec::new("Hb", 120.0, 12.0, "g/L", 1),
        AnalyteSpec::new("Neu", 6.0, 1.2, "10^9/L", 2),
        AnalyteSpec::new("LDH", 180.0, 30.0, "U/L", 1),
        AnalyteSpec::new("Cr", 50.0, 8.0, "umol/L", 1),
        uwbc,
        AnalyteSpec::new("NLR", 4.0, 0.8, "", 2),
        AnalyteSpec::new("WBC", 9.0, 1.6, "10^9/L", 2),
        AnalyteSpec::new("ALT", 20.0, 4.0, "U/L", 1),
        AnalyteSpec::new("AST", 22.0, 4.0, "U/L", 1),
        AnalyteSpec::new("Alb", 38.0, 3.0, "g/L", 1),
        AnalyteSpec::new("PLT", 230.0, 40.0, "10^9/L", 0),
        AnalyteSpec::new("Lym", 1.6, 0.3, "10^9/L", 2),
        AnalyteSpec::new("Mono", 0.5, 0.1, "10^9/L", 2),
        AnalyteSpec::new("TBil", 9.0, 2.0, "umol/L", 1),
        AnalyteSpec::new("Glu", 4.5, 0.5, "mmol/L", 2),
        AnalyteSpec::new("BUN", 3.2, 0.6, "mmol/L", 2),
        AnalyteSpec::new("Na", 138.0, 2.0, "mmol/L", 1),
        AnalyteSpec::new("K", 4.0, 0.3, "mmol/L", 2),
        AnalyteSpec::new("Ca", 2.3, 0.1, "mmol/L", 2),
    ]
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 300,
            prevalence: 142.0 / 300.0,
            analytes: default_panel(),
            effects: DEFAULT_PLANTED
                .iter()
                .map(|&(f, d)| PlantedEffect { feature: f.into(), direction: d, size: DEFAULT_EFFECT, shape: EffectShape::Shift })
                .collect(),
            missing_rate: 0.05,
            mess_rate: 0.05,
            extra_columns: true,
            label_column: "Group".into(),
            case_label: "P-TMA".into(),
            control_label: "Control".into(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Default panel with every effect removed.
    pub fn null(seed: u64) -> Self {
        Self { effects: Vec::new(), seed, ..Self::default() }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.analytes.iter().flat_map(AnalyteSpec::feature_names).collect()
    }

    pub fn n_cases(&self) -> usize {
        (self.n as f64 * self.prevalence).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return bad(format!("prevalence {} must lie strictly between 0 and 1", self.prevalence));
        }
        for (name, r) in [("missing_rate", self.missing_rate), ("mess_rate", self.mess_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} {r} must lie in [0, 1]"));
            }
        }
        let cases = self.n_cases();
        if cases < 2 || self.n - cases < 2 {
            return bad(format!("n = {} at prevalence {} leaves fewer than two rows in a class", self.n, self.prevalence));
        }
        if self.label_column.trim().is_empty() || self.case_label == self.control_label {
            return bad("label column must be named and the two labels must differ".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.analytes {
            if a.name.is_empty() || !(a.sd > 0.0) || !a.mean.is_finite() || !a.sd.is_finite() {
                return bad(format!("analyte {:?} needs a name, a finite mean and a positive SD", a.name));
            }
            if let Some(w) = a.weeks.iter().find(|w| week_code(**w).is_none()) {
                return bad(format!("analyte {}: week {w} is not on the sampling schedule", a.name));
            }
            for f in a.feature_names() {
                if !seen.insert(f.clone()) {
                    return bad(format!("feature {f} is defined twice"));
                }
            }
        }
        if seen.is_empty() {
            return bad("the analyte panel is empty".into());
        }
        let mut planted = std::collections::BTreeSet::new();
        for e in &self.effects {
            if !seen.contains(&e.feature) {
                return bad(format!("planted feature {} is not in the panel", e.feature));
            }
            if !(e.size >= 0.0 && e.size.is_finite()) {
                return bad(format!("effect size {} for {} must be finite and non-negative", e.size, e.feature));
            }
            if !planted.insert(&e.feature) {
                return bad(format!("feature {} has two planted effects", e.feature));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTruth {
    pub feature: String,
    pub analyte: String,
    pub week: u8,
    pub informative: bool,
    pub direction: Option<Direction>,
    pub effect_size: f64,
    pub shape: EffectShape,
    pub control_mean: f64,
    pub control_sd: f64,
}

/// One term of the latent log-odds, in standardized units `z = (x - mean) / sd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTerm {
    pub feature: String,
    pub linear: f64,
    pub quadratic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraColumn {
    pub name: String,
    /// identifier, descriptive, leaky or date
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n: usize,
    pub cases: usize,
    pub label_column: String,
    pub case_label: String,
    pub control_label: String,
    pub features: Vec<FeatureTruth>,
    pub intercept: f64,
    pub latent: Vec<LatentTerm>,
    pub extra_columns: Vec<ExtraColumn>,
}

impl Manifest {
    pub fn informative(&self) -> impl Iterator<Item = &FeatureTruth> {
        self.features.iter().filter(|f| f.informative)
    }

    /// Exact case log-odds for a subject; `value` returns raw feature values.
    pub fn log_odds(&self, value: impl Fn(&str) -> Option<f64>) -> Option<f64> {
        let mut s = self.intercept;
        for t in &self.latent {
            let f = self.features.iter().find(|f| f.feature == t.feature)?;
            let z = (value(&t.feature)? - f.control_mean) / f.control_sd;
            s += t.linear * z + t.quadratic * z * z;
        }
        Some(s)
    }

    /// Exclusion rules that remove the extra columns a model must not see.
    pub fn exclusion_rules(&self) -> ExclusionRules {
        let names = |role: &str| self.extra_columns.iter().filter(|c| c.role == role).map(|c| c.name.clone()).collect();
        ExclusionRules {
            identifiers: names("identifier"),
            post_event: names("leaky"),
            non_predictor: names("descriptive"),
            ..ExclusionRules::default()
        }
    }
}

/// Calendar date for days since 1970-01-01.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + if m <= 2 { 1 } else { 0 };
    (y, m, d)
}

fn date_string(days: i64) -> String {
    let (y, m, d) = civil_from_days(days);
    format!("{y:04}-{m:02}-{d:02}")
}

const EPOCH_2020: i64 = 18_262;
const COMMENTS: [&str; 3] = ["hemolysed", "insufficient sample", "see note"];

fn grade(z: f64) -> &'static str {
    match z {
        z if z < -0.5 => "negative",
        z if z < 0.5 => "trace",
        z if z < 1.5 => "+",
        _ => "++",
    }
}

/// Renders one cell. Every draw happens regardless of outcome so that the
/// values of a feature do not depend on the rates.
fn render_cell(
    rng: &mut impl Rng,
    spec: &AnalyteSpec,
    value: f64,
    z: f64,
    visit_day: i64,
    missing_rate: f64,
    mess_rate: f64,
) -> String {
    let u_missing: f64 = rng.random();
    let u_mess: f64 = rng.random();
    let kind: u32 = rng.random_range(0..4);
    let pick: usize = rng.random_range(0..COMMENTS.len());
    let messy = u_mess < mess_rate;
    if u_missing < missing_rate {
        return if messy { "NA".into() } else { String::new() };
    }
    let plain = format!("{value:.prec$}", prec = spec.decimals);
    if !messy {
        return plain;
    }
    match kind {
        0 if !spec.unit.is_empty() => format!("{plain} {}", spec.unit),
        0 | 1 => format!("{}: {plain}", date_string(visit_day)),
        2 if spec.graded => grade(z).to_string(),
        2 => format!("{plain} ({})", date_string(visit_day)),
        _ => COMMENTS[pick].to_string(),
    }
}

/// Generates a cohort as raw CSV bytes plus its manifest.
pub fn generate(config: &SynthConfig) -> Result<(Vec<u8>, Manifest), SynthError> {
    config.validate()?;
    let seed = config.seed;
    let n = config.n;
    let cases = config.n_cases();
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut stream(seed, &[LABEL_STREAM]), &mut order);
    let mut labels = vec![false; n];
    for &r in &order[..cases] {
        labels[r] = true;
    }

    let mut extra = stream(seed, &[EXTRA_STREAM]);
    let enrolment: Vec<i64> = (0..n).map(|_| EPOCH_2020 + extra.random_range(0..730)).collect();

    let mut header: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<String>> = Vec::new();
    let mut extra_columns = Vec::new();
    let mut push_extra = |name: &str, role: &str, cells: Vec<String>, header: &mut Vec<String>, columns: &mut Vec<Vec<String>>| {
        header.push(name.to_string());
        columns.push(cells);
        extra_columns.push(ExtraColumn { name: name.into(), role: role.into() });
    };

    if config.extra_columns {
        push_extra("SubjectID", "identifier", (1..=n).map(|i| format!("S{i:04}")).collect(), &mut header, &mut columns);
    }
    header.push(config.label_column.clone());
    columns.push(labels.iter().map(|&y| if y { config.case_label.clone() } else { config.control_label.clone() }).collect());
    if config.extra_columns {
        let age = (0..n).map(|_| format!("{:.0}", 31.0 + 3.5 * extra.sample::<f64, _>(StandardNormal))).collect();
        push_extra("Age", "descriptive", age, &mut header, &mut columns);
        let hapo = (0..n).map(|_| if extra.random::<f64>() < 0.22 { "Yes" } else { "No" }.to_string()).collect();
        push_extra("HAPO", "descriptive", hapo, &mut header, &mut columns);
        let sex = (0..n).map(|_| if extra.random::<f64>() < 0.47 { "Female" } else { "Male" }.to_string()).collect();
        push_extra("NewbornSex", "descriptive", sex, &mut header, &mut columns);
        let los = labels
            .iter()
            .map(|&y| {
                let base = if y { 6.0 } else { 3.0 };
                format!("{:.0}", (base + 1.5 * extra.sample::<f64, _>(StandardNormal)).max(1.0))
            })
            .collect();
        push_extra("LOS", "leaky", los, &mut header, &mut columns);
        let fetal = labels
            .iter()
            .map(|&y| {
                let adverse = y && extra.random::<f64>() < 0.35;
                if adverse { "Adverse Outcome" } else { "Normal Outcome" }.to_string()
            })
            .collect();
        push_extra("FetalOutcome", "leaky", fetal, &mut header, &mut columns);
        let visit = enrolment.iter().map(|&d| date_string(d)).collect();
        push_extra("VisitDate", "date", visit, &mut header, &mut columns);
        let blood = (0..n).map(|_| ["A", "B", "AB", "O"][extra.random_range(0..4)].to_string()).collect();
        push_extra("BloodType", "noise", blood, &mut header, &mut columns);
    }

    let mut features = Vec::new();
    let mut latent = Vec::new();
    let mut intercept = (config.prevalence / (1.0 - config.prevalence)).ln();
    let mut index = 0u64;
    for spec in &config.analytes {
        for (&week, name) in spec.weeks.iter().zip(spec.feature_names()) {
            let effect = config.effects.iter().find(|e| e.feature == name);
            let (size, shape) = effect.map_or((0.0, EffectShape::Shift), |e| (e.size, e.shape));
            let direction = effect.filter(|e| e.size > 0.0 && e.shape == EffectShape::Shift).map(|e| e.direction);
            let mut rng = stream(seed, &[FEATURE_STREAM, index]);
            index += 1;
            let cells: Vec<String> = (0..n)
                .map(|r| {
                    let e: f64 = rng.sample(StandardNormal);
                    let z = match (labels[r], shape) {
                        (false, _) => e,
                        (true, EffectShape::Shift) => e + direction.map_or(0.0, Direction::sign) * size,
                        (true, EffectShape::Spread) => e * (1.0 + size),
                    };
                    let value = spec.mean + spec.sd * z;
                    let day = enrolment[r] + 7 * (week as i64 - 6);
                    render_cell(&mut rng, spec, value, z, day, config.missing_rate, config.mess_rate)
                })
                .collect();
            header.push(name.clone());
            columns.push(cells);
            if size > 0.0 {
                match shape {
                    EffectShape::Shift => {
                        let d = direction.map_or(0.0, Direction::sign) * size;
                        intercept -= d * d / 2.0;
                        latent.push(LatentTerm { feature: name.clone(), linear: d, quadratic: 0.0 });
                    }
                    EffectShape::Spread => {
                        let s = 1.0 + size;
                        intercept -= s.ln();
                        latent.push(LatentTerm { feature: name.clone(), linear: 0.0, quadratic: (1.0 - 1.0 / (s * s)) / 2.0 });
                    }
                }
            }
            features.push(FeatureTruth {
                feature: name,
                analyte: spec.name.clone(),
                week,
                informative: size > 0.0,
                direction,
                effect_size: size,
                shape,
                control_mean: spec.mean,
                control_sd: spec.sd,
            });
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| SynthError::InvalidConfig(format!("CSV rendering failed: {e}"));
    w.write_record(&header).map_err(io)?;
    for r in 0..n {
        w.write_record(columns.iter().map(|c| c[r].as_str())).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| SynthError::InvalidConfig(format!("CSV rendering failed: {e}")))?;

    let manifest = Manifest {
        seed,
        n,
        cases,
        label_column: config.label_column.clone(),
        case_label: config.case_label.clone(),
        control_label: config.control_label.clone(),
        features,
        intercept,
        latent,
        extra_columns,
    };
    Ok((bytes, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheck {
    pub feature: String,
    pub planted: Direction,
    pub effect_size: f64,
    /// Empirical rank-biserial correlation, cases versus controls.
    pub r: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCheck {
    pub checks: Vec<DirectionCheck>,
    pub all_agree: bool,
}

/// Compares the sign of the empirical rank-biserial correlation with each
/// planted shift of at least [`CHECKED_EFFECT`].
pub fn verify_manifest(cohort: &Cohort, manifest: &Manifest) -> Result<ManifestCheck, SynthError> {
    if cohort.n() != manifest.n || cohort.positives() != manifest.cases {
        return Err(SynthError::Schema(format!(
            "cohort has {} rows and {} cases, manifest {} and {}",
            cohort.n(),
            cohort.positives(),
            manifest.n,
            manifest.cases
        )));
    }
    let labels = cohort.labels();
    let mut checks = Vec::new();
    for f in manifest.informative() {
        let Some(planted) = f.direction else { continue };
        if f.effect_size < CHECKED_EFFECT {
            continue;
        }
        let col = cohort.column_index(&f.feature).ok_or_else(|| SynthError::Schema(format!("feature {} not in cohort", f.feature)))?;
        let case = cohort.present(col, (0..cohort.n()).filter(|&r| labels[r]));
        let control = cohort.present(col, (0..cohort.n()).filter(|&r| !labels[r]));
        let r = mann_whitney(&case, &control).map_err(|e| SynthError::Schema(format!("{}: {e}", f.feature)))?.r;
        checks.push(DirectionCheck { feature: f.feature.clone(), planted, effect_size: f.effect_size, r, agrees: r * planted.sign() > 0.0 });
    }
    let all_agree = checks.iter().all(|c| c.agrees);
    Ok(ManifestCheck { checks, all_agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{build_cohort, parse_clinical_value, parse_csv, ParsedValue, LabelSpec, GradeMap};

    fn cohort(bytes: &[u8], m: &Manifest) -> Cohort {
        let table = parse_csv(bytes).unwrap();
        let label = LabelSpec { column: m.label_column.clone(), positive: Some(m.case_label.clone()) };
        build_cohort(&table, &label, &GradeMap::default(), None).unwrap()
    }

    #[test]
    fn default_shape() {
        let cfg = SynthConfig::default();
        let (bytes, m) = generate(&cfg).unwrap();
        assert_eq!((m.n, m.cases), (300, 142));
        assert_eq!(m.features.len(), 147);
        assert_eq!(m.informative().count(), 9);
        let table = parse_csv(&bytes).unwrap();
        assert_eq!(table.n_rows(), 300);
        for f in ["CysCVI", "UAVI", "HbXXXII", "NeuXVI", "LDHVI", "CrXXIV", "UWBCXXX", "NLRXXIV", "WBCXII"] {
            assert!(table.column_index(f).is_some(), "{f}");
        }
        let c = cohort(&bytes, &m);
        assert_eq!(c.positives(), 142);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate(&SynthConfig::with_seed(4)).unwrap();
        let b = generate(&SynthConfig::with_seed(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, generate(&SynthConfig::with_seed(5)).unwrap().0);
    }

    #[test]
    fn clean_cells_parse() {
        let cfg = SynthConfig { mess_rate: 0.0, extra_columns: false, ..SynthConfig::default() };
        let (bytes, m) = generate(&cfg).unwrap();
        let table = parse_csv(&bytes).unwrap();
        for f in &m.features {
            let col = table.column_index(&f.feature).unwrap();
            for cell in table.column(col) {
                assert!(matches!(parse_clinical_value(cell), ParsedValue::Numeric { censored: None, .. } | ParsedValue::Missing), "{cell}");
            }
        }
    }

    #[test]
    fn mess_preserves_values_where_numeric() {
        let clean = SynthConfig { mess_rate: 0.0, missing_rate: 0.0, ..SynthConfig::default() };
        let messy = SynthConfig { mess_rate: 0.5, missing_rate: 0.0, ..SynthConfig::default() };
        let (a, _) = generate(&clean).unwrap();
        let (b, _) = generate(&messy).unwrap();
        let (ta, tb) = (parse_csv(&a).unwrap(), parse_csv(&b).unwrap());
        let col = ta.column_index("CysCVI").unwrap();
        let mut differing = 0;
        for (x, y) in ta.column(col).zip(tb.column(col)) {
            match parse_clinical_value(y) {
                ParsedValue::Numeric { value, .. } => assert_eq!(Some(value), parse_clinical_value(x).as_f64()),
                _ => differing += 1,
            }
        }
        assert!(differing > 0 && differing < 150);
    }

    #[test]
    fn planted_directions_hold() {
        let (bytes, m) = generate(&SynthConfig::with_seed(2)).unwrap();
        let c = cohort(&bytes, &m);
        let check = verify_manifest(&c, &m).unwrap();
        assert_eq!(check.checks.len(), 9);
        assert!(check.all_agree);
        let hb = check.checks.iter().find(|c| c.feature == "HbXXXII").unwrap();
        assert!(hb.r < 0.0);

        let mut flipped = m.clone();
        flipped.features.iter_mut().filter(|f| f.feature == "CysCVI").for_each(|f| f.direction = f.direction.map(Direction::flipped));
        assert!(!verify_manifest(&c, &flipped).unwrap().all_agree);
    }

    #[test]
    fn zero_effects_are_not_checked() {
        let (bytes, m) = generate(&SynthConfig::null(1)).unwrap();
        assert_eq!(m.informative().count(), 0);
        assert!(m.latent.is_empty());
        let check = verify_manifest(&cohort(&bytes, &m), &m).unwrap();
        assert!(check.checks.is_empty() && check.all_agree);
    }

    #[test]
    fn invalid_configs() {
        let mut c = SynthConfig::default();
        c.effects[0].feature = "XyzVI".into();
        assert!(c.validate().is_err());
        assert!(SynthConfig { prevalence: 1.0, ..SynthConfig::default() }.validate().is_err());
        assert!(SynthConfig { mess_rate: 1.5, ..SynthConfig::default() }.validate().is_err());
        assert!(SynthConfig { n: 3, ..SynthConfig::default() }.validate().is_err());
        let mut d = SynthConfig::default();
        d.analytes[0].weeks = vec![7];
        assert!(d.validate().is_err());
    }

    #[test]
    fn dates_render() {
        assert_eq!(date_string(0), "1970-01-01");
        assert_eq!(date_string(EPOCH_2020), "2020-01-01");
        assert_eq!(date_string(EPOCH_2020 + 59), "2020-02-29");
    }

    #[test]
    fn exclusion_rules_cover_extras() {
        let (_, m) = generate(&SynthConfig::default()).unwrap();
        let rules = m.exclusion_rules();
        assert_eq!(rules.identifiers, vec!["SubjectID"]);
        assert_eq!(rules.post_event, vec!["LOS", "FetalOutcome"]);
        assert_eq!(rules.non_predictor, vec!["Age", "HAPO", "NewbornSex"]);
    }
}
