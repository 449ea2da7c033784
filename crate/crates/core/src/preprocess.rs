//! Training-only column screening, imputation, scaling and encoding.
//!
//! Fitting order is fixed: screen → impute → scale/encode. All statistics
//! come from the rows passed to [`fit`]; rows outside that set never
//! influence the fitted state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{Cohort, ColumnKind};
use crate::Matrix;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("no predictors retained after screening")]
    NoPredictors,
    #[error("empty training row set")]
    EmptyTrainingRows,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid preprocessing spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSpec {
    pub missingness_threshold: f64,
    pub categorical_cardinality_max: usize,
    pub drop_constant: bool,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self { missingness_threshold: 0.30, categorical_cardinality_max: 20, drop_constant: true }
    }
}

impl PreprocessSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(0.0..=1.0).contains(&self.missingness_threshold) {
            return Err(PreprocessError::InvalidSpec("missingness_threshold must lie in [0, 1]".into()));
        }
        if self.categorical_cardinality_max == 0 {
            return Err(PreprocessError::InvalidSpec("categorical_cardinality_max must be positive".into()));
        }
        if !self.drop_constant {
            return Err(PreprocessError::InvalidSpec("constant columns are always dropped".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    Missingness { fraction: f64 },
    Constant,
    Cardinality { levels: usize },
    NotAPredictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Kept,
    Dropped(DropReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDecision {
    pub column: String,
    pub decision: Decision,
}

fn sorted_rows(rows: &[usize]) -> Vec<usize> {
    let mut r = rows.to_vec();
    r.sort_unstable();
    r.dedup();
    r
}

/// Decides which columns survive, using training rows only.
pub fn screen_columns(
    cohort: &Cohort,
    spec: &PreprocessSpec,
    train_rows: &[usize],
) -> Result<Vec<ColumnDecision>, PreprocessError> {
    spec.validate()?;
    let rows = sorted_rows(train_rows);
    if rows.is_empty() {
        return Err(PreprocessError::EmptyTrainingRows);
    }
    let decisions: Vec<ColumnDecision> = cohort
        .columns()
        .iter()
        .enumerate()
        .map(|(c, meta)| {
            let present = cohort.present(c, rows.iter().copied());
            let fraction = 1.0 - present.len() as f64 / rows.len() as f64;
            let distinct = {
                let mut v = present.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len()
            };
            let decision = if meta.kind == ColumnKind::Excluded {
                Decision::Dropped(DropReason::NotAPredictor)
            } else if fraction > spec.missingness_threshold {
                Decision::Dropped(DropReason::Missingness { fraction })
            } else if distinct <= 1 {
                Decision::Dropped(DropReason::Constant)
            } else if meta.kind == ColumnKind::Categorical && distinct > spec.categorical_cardinality_max {
                Decision::Dropped(DropReason::Cardinality { levels: distinct })
            } else {
                Decision::Kept
            };
            ColumnDecision { column: meta.name.clone(), decision }
        })
        .collect();
    if decisions.iter().all(|d| d.decision != Decision::Kept) {
        return Err(PreprocessError::NoPredictors);
    }
    Ok(decisions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    Continuous {
        median: f64,
        mean: f64,
        sd: f64,
        slot: usize,
    },
    Categorical {
        mode: String,
        /// Training categories; slot `first_slot + vocabulary.len()` is "other".
        vocabulary: Vec<String>,
        first_slot: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedColumn {
    pub column: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<ColumnTransform>,
}

/// Screening decisions plus the statistics needed to transform any row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPreprocessor {
    pub spec: PreprocessSpec,
    pub columns: Vec<FittedColumn>,
    pub feature_names: Vec<String>,
}

/// Model input: no missing entries, one name per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: Matrix,
    pub feature_names: Vec<String>,
}

pub const OTHER_LEVEL: &str = "<other>";

pub fn median_of(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    assert!(n > 0, "median of empty set");
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Fits screening, imputation and scaling on `train_rows`.
pub fn fit(cohort: &Cohort, spec: &PreprocessSpec, train_rows: &[usize]) -> Result<FittedPreprocessor, PreprocessError> {
    let decisions = screen_columns(cohort, spec, train_rows)?;
    let rows = sorted_rows(train_rows);
    let mut columns = Vec::with_capacity(decisions.len());
    let mut feature_names = Vec::new();
    for (c, d) in decisions.into_iter().enumerate() {
        let meta = &cohort.columns()[c];
        let transform = if d.decision == Decision::Kept {
            let present = cohort.present(c, rows.iter().copied());
            Some(match meta.kind {
                ColumnKind::Categorical => {
                    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                    for v in &present {
                        *counts.entry(*v as usize).or_default() += 1;
                    }
                    // Ties go to the lexicographically first level.
                    let mode_idx = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(k, _)| *k).unwrap();
                    let vocabulary: Vec<String> = counts.keys().map(|&k| meta.levels[k].clone()).collect();
                    let first_slot = feature_names.len();
                    feature_names.extend(vocabulary.iter().map(|l| format!("{}={l}", meta.name)));
                    feature_names.push(format!("{}={OTHER_LEVEL}", meta.name));
                    ColumnTransform::Categorical { mode: meta.levels[mode_idx].clone(), vocabulary, first_slot }
                }
                _ => {
                    let median = median_of(&present);
                    let imputed: Vec<f64> = rows.iter().map(|&r| cohort.value(r, c).unwrap_or(median)).collect();
                    let n = imputed.len() as f64;
                    let mean = imputed.iter().sum::<f64>() / n;
                    let sd = (imputed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                    let sd = if sd > 0.0 { sd } else { 1.0 };
                    let slot = feature_names.len();
                    feature_names.push(meta.name.clone());
                    ColumnTransform::Continuous { median, mean, sd, slot }
                }
            })
        } else {
            None
        };
        columns.push(FittedColumn { column: d.column, decision: d.decision, transform });
    }
    Ok(FittedPreprocessor { spec: spec.clone(), columns, feature_names })
}

impl FittedPreprocessor {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn kept(&self) -> impl Iterator<Item = &FittedColumn> {
        self.columns.iter().filter(|c| c.transform.is_some())
    }

    /// Imputes, scales and encodes the given rows.
    pub fn transform(&self, cohort: &Cohort, rows: &[usize]) -> Result<DesignMatrix, PreprocessError> {
        let names: Vec<&str> = cohort.columns().iter().map(|c| c.name.as_str()).collect();
        let fitted: Vec<&str> = self.columns.iter().map(|c| c.column.as_str()).collect();
        if names != fitted {
            return Err(PreprocessError::SchemaMismatch("cohort columns differ from fit-time columns".into()));
        }
        let d = self.n_features();
        let mut x = Matrix::zeros(rows.len(), d);
        for (c, col) in self.columns.iter().enumerate() {
            let meta = &cohort.columns()[c];
            match &col.transform {
                None => {}
                Some(ColumnTransform::Continuous { median, mean, sd, slot }) => {
                    if meta.kind != ColumnKind::Continuous {
                        return Err(PreprocessError::SchemaMismatch(format!("{:?} is no longer continuous", meta.name)));
                    }
                    for (i, &r) in rows.iter().enumerate() {
                        let v = cohort.value(r, c).unwrap_or(*median);
                        x.set(i, *slot, (v - mean) / sd);
                    }
                }
                Some(ColumnTransform::Categorical { mode, vocabulary, first_slot }) => {
                    if meta.kind != ColumnKind::Categorical {
                        return Err(PreprocessError::SchemaMismatch(format!("{:?} is no longer categorical", meta.name)));
                    }
                    for (i, &r) in rows.iter().enumerate() {
                        let level = cohort.value(r, c).map_or(mode.as_str(), |v| meta.levels[v as usize].as_str());
                        let offset = vocabulary.iter().position(|l| l == level).unwrap_or(vocabulary.len());
                        x.set(i, first_slot + offset, 1.0);
                    }
                }
            }
        }
        Ok(DesignMatrix { x, feature_names: self.feature_names.clone() })
    }

    /// Source column of each design-matrix feature.
    pub fn feature_sources(&self) -> Vec<String> {
        let mut out = vec![String::new(); self.n_features()];
        for col in &self.columns {
            match &col.transform {
                Some(ColumnTransform::Continuous { slot, .. }) => out[*slot] = col.column.clone(),
                Some(ColumnTransform::Categorical { vocabulary, first_slot, .. }) => {
                    for s in *first_slot..=first_slot + vocabulary.len() {
                        out[s] = col.column.clone();
                    }
                }
                None => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::ColumnMeta;
    use proptest::prelude::*;

    fn meta(name: &str, kind: ColumnKind, levels: &[&str]) -> ColumnMeta {
        ColumnMeta {
            name: name.into(),
            analyte: name.into(),
            week: None,
            kind,
            missing_fraction: 0.0,
            unparseable: 0,
            censored: 0,
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn cohort(cols: Vec<(ColumnMeta, Vec<Option<f64>>)>) -> Cohort {
        let n = cols[0].1.len();
        let labels = (0..n).map(|i| i % 2 == 0).collect();
        let ids = (0..n).map(|i| i.to_string()).collect();
        let (m, d) = cols.into_iter().unzip();
        Cohort::from_columns(m, d, labels, ids).unwrap()
    }

    fn all(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn screening_rules() {
        let mut sparse = vec![None; 10];
        sparse[0] = Some(1.0);
        let c = cohort(vec![
            (meta("sparse", ColumnKind::Continuous, &[]), sparse),
            (meta("flat", ColumnKind::Continuous, &[]), vec![Some(5.0); 10]),
            (
                meta("ok", ColumnKind::Continuous, &[]),
                (0..10).map(|i| if i == 3 { None } else { Some(i as f64) }).collect(),
            ),
        ]);
        let d = screen_columns(&c, &PreprocessSpec::default(), &all(10)).unwrap();
        assert!(matches!(d[0].decision, Decision::Dropped(DropReason::Missingness { fraction }) if (fraction - 0.9).abs() < 1e-12));
        assert_eq!(d[1].decision, Decision::Dropped(DropReason::Constant));
        assert_eq!(d[2].decision, Decision::Kept);
    }

    #[test]
    fn nothing_kept_is_an_error() {
        let c = cohort(vec![(meta("flat", ColumnKind::Continuous, &[]), vec![Some(5.0); 4])]);
        assert!(matches!(fit(&c, &PreprocessSpec::default(), &all(4)), Err(PreprocessError::NoPredictors)));
        assert!(matches!(fit(&c, &PreprocessSpec::default(), &[]), Err(PreprocessError::EmptyTrainingRows)));
    }

    #[test]
    fn cardinality_cap() {
        let levels: Vec<String> = (0..5).map(|i| format!("L{i}")).collect();
        let lv: Vec<&str> = levels.iter().map(String::as_str).collect();
        let c = cohort(vec![(meta("free", ColumnKind::Categorical, &lv), (0..10).map(|i| Some((i % 5) as f64)).collect())]);
        let spec = PreprocessSpec { categorical_cardinality_max: 4, ..Default::default() };
        assert!(matches!(screen_columns(&c, &spec, &all(10)), Err(PreprocessError::NoPredictors)));
    }

    #[test]
    fn median_imputation_and_population_sd() {
        let c = cohort(vec![(
            meta("x", ColumnKind::Continuous, &[]),
            vec![Some(1.0), Some(2.0), Some(3.0), None, Some(100.0)],
        )]);
        let spec = PreprocessSpec { missingness_threshold: 0.5, ..Default::default() };
        let fp = fit(&c, &spec, &[0, 1, 2, 3]).unwrap();
        match fp.columns[0].transform.as_ref().unwrap() {
            ColumnTransform::Continuous { median, mean, sd, .. } => {
                assert_eq!(*median, 2.0);
                assert_eq!(*mean, 2.0);
                assert!((sd - 0.5f64.sqrt()).abs() < 1e-15);
            }
            _ => panic!(),
        }
        let dm = fp.transform(&c, &[0, 1, 2, 3]).unwrap();
        assert!((dm.x.get(2, 0) - 1.414_213_562_373_095).abs() < 1e-12);
        assert_eq!(dm.x.get(1, 0), 0.0);
        assert_eq!(dm.x.get(3, 0), 0.0);
    }

    #[test]
    fn one_hot_with_other_slot() {
        let c = cohort(vec![
            (meta("cat", ColumnKind::Categorical, &["a", "b", "c"]), vec![Some(0.0), Some(0.0), Some(1.0), Some(2.0), None]),
            (meta("x", ColumnKind::Continuous, &[]), vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)]),
        ]);
        let fp = fit(&c, &PreprocessSpec::default(), &[0, 1, 2]).unwrap();
        match fp.columns[0].transform.as_ref().unwrap() {
            ColumnTransform::Categorical { mode, vocabulary, first_slot } => {
                assert_eq!(mode, "a");
                assert_eq!(vocabulary, &["a", "b"]);
                assert_eq!(*first_slot, 0);
            }
            _ => panic!(),
        }
        assert_eq!(fp.feature_names, vec!["cat=a", "cat=b", "cat=<other>", "x"]);
        let dm = fp.transform(&c, &[3, 4]).unwrap();
        assert_eq!(dm.x.row(0)[..3], [0.0, 0.0, 1.0]);
        assert_eq!(dm.x.row(1)[..3], [1.0, 0.0, 0.0]);
        assert_eq!(fp.feature_sources(), vec!["cat", "cat", "cat", "x"]);
    }

    #[test]
    fn schema_mismatch() {
        let a = cohort(vec![(meta("x", ColumnKind::Continuous, &[]), vec![Some(1.0), Some(2.0)])]);
        let b = cohort(vec![(meta("y", ColumnKind::Continuous, &[]), vec![Some(1.0), Some(2.0)])]);
        let fp = fit(&a, &PreprocessSpec::default(), &[0, 1]).unwrap();
        assert!(matches!(fp.transform(&b, &[0]), Err(PreprocessError::SchemaMismatch(_))));
    }

    #[test]
    fn json_round_trip() {
        let c = cohort(vec![(meta("x", ColumnKind::Continuous, &[]), vec![Some(0.1), Some(0.7), Some(0.3)])]);
        let fp = fit(&c, &PreprocessSpec::default(), &[0, 1, 2]).unwrap();
        let back: FittedPreprocessor = serde_json::from_str(&serde_json::to_string(&fp).unwrap()).unwrap();
        assert_eq!(back, fp);
    }

    fn random_cohort() -> impl Strategy<Value = (Vec<Vec<Option<f64>>>, usize)> {
        (4usize..20).prop_flat_map(|n| {
            (
                proptest::collection::vec(
                    proptest::collection::vec(proptest::option::weighted(0.9, -50.0f64..50.0), n),
                    1..5,
                ),
                2..n,
            )
        })
    }

    proptest! {
        #[test]
        fn fit_ignores_non_training_rows((cols, n_train) in random_cohort(), junk in -1e3f64..1e3) {
            let n = cols[0].len();
            let metas: Vec<_> = (0..cols.len()).map(|i| meta(&format!("c{i}"), ColumnKind::Continuous, &[])).collect();
            let build = |data: Vec<Vec<Option<f64>>>| {
                let labels = (0..n).map(|i| i % 2 == 0).collect();
                Cohort::from_columns(metas.clone(), data, labels, (0..n).map(|i| i.to_string()).collect()).unwrap()
            };
            let train: Vec<usize> = (0..n_train).collect();
            let a = build(cols.clone());
            let mut mutated = cols.clone();
            for col in &mut mutated {
                for v in col.iter_mut().skip(n_train) {
                    *v = if junk > 0.0 { Some(junk) } else { None };
                }
            }
            let b = build(mutated);
            match (fit(&a, &PreprocessSpec::default(), &train), fit(&b, &PreprocessSpec::default(), &train)) {
                (Ok(fa), Ok(fb)) => {
                    prop_assert_eq!(serde_json::to_string(&fa).unwrap(), serde_json::to_string(&fb).unwrap());
                    // Fully observed continuous training columns come out centered and unit-scaled.
                    let dm = fa.transform(&a, &train).unwrap();
                    for col in fa.kept() {
                        if let Some(ColumnTransform::Continuous { slot, .. }) = col.transform {
                            let ci = a.column_index(&col.column).unwrap();
                            if train.iter().all(|&r| a.value(r, ci).is_some()) {
                                let v = dm.x.column(slot);
                                let m = v.iter().sum::<f64>() / v.len() as f64;
                                let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
                                prop_assert!(m.abs() < 1e-9);
                                prop_assert!((s - 1.0).abs() < 1e-9);
                            }
                        }
                    }
                    prop_assert_eq!(fa.transform(&a, &train).unwrap(), dm);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "fit outcome depends on non-training rows"),
            }
        }
    }
}
