//! Cohort filtering, missingness-based column dropping, imputation,
//! standardisation and random undersampling.
//!
//! Statistics are fitted once on a training table, frozen in a
//! [`FittedPreprocessor`], and replayed unchanged on blind-test and external
//! tables.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    indicator_name, Cell, Column, ColumnKind, ColumnRole, ColumnSpec, DataTable, Schema,
};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Filters

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "missing")]
    Missing,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Missing => "missing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Number(f64),
    Token(String),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Number(x) => write!(f, "{x}"),
            Bound::Token(t) => f.write_str(t),
        }
    }
}

/// Excludes every row whose `column` satisfies `comparator bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRule {
    pub column: String,
    pub comparator: Comparator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<Bound>,
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.bound {
            Some(b) => write!(f, "{} {} {}", self.column, self.comparator, b),
            None => write!(f, "{} {}", self.column, self.comparator),
        }
    }
}

impl FilterRule {
    pub fn new(column: impl Into<String>, comparator: Comparator, bound: f64) -> Self {
        Self {
            column: column.into(),
            comparator,
            bound: Some(Bound::Number(bound)),
        }
    }

    fn validate(&self, schema: &Schema) -> Result<usize> {
        let idx = schema.index_of(&self.column).ok_or_else(|| {
            Error::invalid(format!("filter '{self}' references unknown column '{}'", self.column))
        })?;
        let numeric = schema.columns()[idx].is_numeric();
        let ok = match (self.comparator, &self.bound) {
            (Comparator::Missing, None) => true,
            (Comparator::Missing, Some(_)) => false,
            (Comparator::Eq, Some(Bound::Number(_))) => numeric,
            (Comparator::Eq, Some(Bound::Token(_))) => !numeric,
            (_, Some(Bound::Number(_))) => numeric,
            _ => false,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "filter '{self}' is incompatible with the kind of column '{}'",
                self.column
            )));
        }
        Ok(idx)
    }

    fn matches(&self, cell: Cell<'_>) -> bool {
        match (cell, self.comparator, &self.bound) {
            (Cell::Missing, Comparator::Missing, _) => true,
            (Cell::Missing, _, _) => false,
            (Cell::Number(x), c, Some(Bound::Number(b))) => match c {
                Comparator::Lt => x < *b,
                Comparator::Le => x <= *b,
                Comparator::Gt => x > *b,
                Comparator::Ge => x >= *b,
                Comparator::Eq => x == *b,
                Comparator::Missing => false,
            },
            (Cell::Token(t), Comparator::Eq, Some(Bound::Token(b))) => t == b,
            _ => false,
        }
    }
}

/// Adult-cohort exclusion criteria: age under 18, under four hours in the
/// ICU, admission weight above 260 kg, admission height above 240 cm.
pub fn clinical_preset() -> Vec<FilterRule> {
    vec![
        FilterRule::new("age", Comparator::Lt, 18.0),
        FilterRule::new("icu_hours", Comparator::Lt, 4.0),
        FilterRule::new("admission_weight", Comparator::Gt, 260.0),
        FilterRule::new("admission_height", Comparator::Gt, 240.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCount {
    pub rule: String,
    /// Rows satisfying the rule, regardless of earlier rules.
    pub matched: usize,
    /// Rows removed at this step: matched here and by no earlier rule.
    pub removed: usize,
}

/// Exclusion flow: `n_output = n_input - sum(removed)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub n_input: usize,
    pub n_output: usize,
    pub rules: Vec<RuleCount>,
}

pub fn apply_filters(table: &DataTable, rules: &[FilterRule]) -> Result<(DataTable, FilterReport)> {
    let cols: Vec<usize> = rules
        .iter()
        .map(|r| r.validate(table.schema()))
        .collect::<Result<_>>()?;
    let mut excluded = vec![false; table.n_rows()];
    let mut counts = Vec::with_capacity(rules.len());
    for (rule, &col) in rules.iter().zip(&cols) {
        let mut matched = 0;
        let mut removed = 0;
        for (row, gone) in excluded.iter_mut().enumerate() {
            if rule.matches(table.cell(row, col)) {
                matched += 1;
                if !*gone {
                    removed += 1;
                    *gone = true;
                }
            }
        }
        counts.push(RuleCount {
            rule: rule.to_string(),
            matched,
            removed,
        });
    }
    let keep: Vec<usize> = (0..table.n_rows()).filter(|&i| !excluded[i]).collect();
    let report = FilterReport {
        n_input: table.n_rows(),
        n_output: keep.len(),
        rules: counts,
    };
    Ok((table.select_rows(&keep), report))
}

// ---------------------------------------------------------------------------
// Fit / transform

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Feature columns whose missing fraction is at least this are dropped.
    pub missingness_threshold: f64,
    pub categorical_fill: String,
    /// Majority rows kept per minority row; `None` keeps the natural ratio.
    pub undersample_ratio: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            missingness_threshold: 0.20,
            categorical_fill: "UNKNOWN".to_owned(),
            undersample_ratio: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeValue {
    Mean(f64),
    Constant(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputeParam {
    pub name: String,
    pub value: ImputeValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryLevels {
    pub name: String,
    pub levels: Vec<String>,
}

/// Population mean and standard deviation of a continuous column, measured
/// after imputation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizeParam {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeEntry {
    pub name: String,
    #[serde(flatten)]
    pub param: StandardizeParam,
}

const PREPROCESSOR_FORMAT: &str = "readmit-preprocessor";
const PREPROCESSOR_VERSION: u32 = 1;

/// Frozen preprocessing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPreprocessor {
    pub format: String,
    pub version: u32,
    pub config: PreprocessConfig,
    /// Input columns seen at fit time.
    pub source_columns: Vec<ColumnSpec>,
    pub dropped_columns: Vec<DroppedColumn>,
    pub impute_values: Vec<ImputeParam>,
    pub categories: Vec<CategoryLevels>,
    pub standardize_params: Vec<StandardizeEntry>,
}

fn mean_std(values: &[f64]) -> StandardizeParam {
    if values.is_empty() {
        return StandardizeParam { mean: 0.0, std: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    // Exactly constant columns must report 0 rather than rounding noise.
    let constant = values.iter().all(|&v| v == values[0]);
    StandardizeParam {
        mean,
        std: if constant { 0.0 } else { std },
    }
}

/// Learns dropping, imputation, encoding and standardisation parameters.
pub fn fit(table: &DataTable, config: &PreprocessConfig) -> Result<FittedPreprocessor> {
    if table.n_rows() == 0 {
        return Err(Error::data("cannot fit a preprocessor on an empty table"));
    }
    if !(config.missingness_threshold > 0.0 && config.missingness_threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "missingness threshold must lie in (0, 1], got {}",
            config.missingness_threshold
        )));
    }
    let n = table.n_rows() as f64;
    let mut dropped = Vec::new();
    let mut impute = Vec::new();
    let mut categories = Vec::new();
    let mut standardize = Vec::new();
    let mut n_kept = 0;
    for (spec, col) in table.schema().columns().iter().zip(table.columns()) {
        if spec.role != ColumnRole::Feature {
            continue;
        }
        let frac = col.missing_count() as f64 / n;
        // A threshold of 1 keeps every column, including fully empty ones.
        if config.missingness_threshold < 1.0 && frac >= config.missingness_threshold {
            dropped.push(DroppedColumn {
                name: spec.name.clone(),
                missing_fraction: frac,
            });
            continue;
        }
        n_kept += 1;
        match col {
            Column::Numeric(values) => {
                let observed: Vec<f64> = values.iter().flatten().copied().collect();
                let mean = if observed.is_empty() {
                    0.0
                } else {
                    observed.iter().sum::<f64>() / observed.len() as f64
                };
                impute.push(ImputeParam {
                    name: spec.name.clone(),
                    value: ImputeValue::Mean(mean),
                });
                if spec.kind == ColumnKind::Continuous {
                    let filled: Vec<f64> = values.iter().map(|v| v.unwrap_or(mean)).collect();
                    standardize.push(StandardizeEntry {
                        name: spec.name.clone(),
                        param: mean_std(&filled),
                    });
                }
            }
            Column::Text(values) => {
                impute.push(ImputeParam {
                    name: spec.name.clone(),
                    value: ImputeValue::Constant(config.categorical_fill.clone()),
                });
                let mut levels: Vec<String> = values
                    .iter()
                    .map(|v| v.clone().unwrap_or_else(|| config.categorical_fill.clone()))
                    .collect();
                levels.sort();
                levels.dedup();
                if levels.len() == 1 {
                    log::warn!(
                        "categorical column '{}' has a single level; its indicator is constant",
                        spec.name
                    );
                }
                categories.push(CategoryLevels {
                    name: spec.name.clone(),
                    levels,
                });
            }
        }
    }
    if n_kept == 0 {
        return Err(Error::data("no usable features: every feature column was dropped"));
    }
    Ok(FittedPreprocessor {
        format: PREPROCESSOR_FORMAT.to_owned(),
        version: PREPROCESSOR_VERSION,
        config: config.clone(),
        source_columns: table.schema().columns().to_vec(),
        dropped_columns: dropped,
        impute_values: impute,
        categories,
        standardize_params: standardize,
    })
}

impl FittedPreprocessor {
    fn is_dropped(&self, name: &str) -> bool {
        self.dropped_columns.iter().any(|d| d.name == name)
    }

    /// Schema of tables produced by [`transform`](Self::transform).
    pub fn output_schema(&self) -> Result<Schema> {
        let levels: HashMap<&str, &Vec<String>> = self
            .categories
            .iter()
            .map(|c| (c.name.as_str(), &c.levels))
            .collect();
        let mut out = Vec::new();
        for spec in &self.source_columns {
            match spec.role {
                ColumnRole::Excluded => {}
                ColumnRole::Feature if self.is_dropped(&spec.name) => {}
                ColumnRole::Feature if spec.kind == ColumnKind::Categorical => {
                    for level in levels[spec.name.as_str()].iter() {
                        out.push(ColumnSpec::feature(
                            indicator_name(&spec.name, level),
                            ColumnKind::Binary,
                        ));
                    }
                }
                // mean imputation can leave fractions in a binary column
                ColumnRole::Feature if spec.kind == ColumnKind::Binary => {
                    out.push(ColumnSpec::feature(spec.name.clone(), ColumnKind::Continuous));
                }
                _ => out.push(spec.clone()),
            }
        }
        Schema::new(out)
    }

    /// Replays the frozen parameters on `table`.
    ///
    /// Columns are matched by name. Categorical levels unseen at fit time
    /// encode as all-zero indicators; zero-variance columns map to 0.
    pub fn transform(&self, table: &DataTable) -> Result<DataTable> {
        let impute: HashMap<&str, &ImputeValue> = self
            .impute_values
            .iter()
            .map(|p| (p.name.as_str(), &p.value))
            .collect();
        let scale: HashMap<&str, StandardizeParam> = self
            .standardize_params
            .iter()
            .map(|p| (p.name.as_str(), p.param))
            .collect();
        let levels: HashMap<&str, &Vec<String>> = self
            .categories
            .iter()
            .map(|c| (c.name.as_str(), &c.levels))
            .collect();

        let mut columns = Vec::new();
        for spec in &self.source_columns {
            if spec.role == ColumnRole::Excluded
                || (spec.role == ColumnRole::Feature && self.is_dropped(&spec.name))
            {
                continue;
            }
            let idx = table.schema().index_of(&spec.name).ok_or_else(|| {
                Error::data(format!(
                    "column '{}' was present at fit time but is absent now",
                    spec.name
                ))
            })?;
            let actual = &table.schema().columns()[idx];
            if actual.kind != spec.kind || actual.role != spec.role {
                return Err(Error::data(format!(
                    "column '{}' changed kind or role since fit",
                    spec.name
                )));
            }
            let col = table.column(idx);
            if spec.role != ColumnRole::Feature {
                columns.push(col.clone());
                continue;
            }
            match (col, impute[spec.name.as_str()]) {
                (Column::Numeric(values), ImputeValue::Mean(fill)) => {
                    let standardized = scale.get(spec.name.as_str());
                    columns.push(Column::Numeric(
                        values
                            .iter()
                            .map(|v| {
                                let x = v.unwrap_or(*fill);
                                Some(match standardized {
                                    Some(p) if p.std == 0.0 => 0.0,
                                    Some(p) => (x - p.mean) / p.std,
                                    None => x,
                                })
                            })
                            .collect(),
                    ));
                }
                (Column::Text(values), ImputeValue::Constant(fill)) => {
                    for level in levels[spec.name.as_str()].iter() {
                        columns.push(Column::Numeric(
                            values
                                .iter()
                                .map(|v| {
                                    let token = v.as_deref().unwrap_or(fill);
                                    Some(if token == level { 1.0 } else { 0.0 })
                                })
                                .collect(),
                        ));
                    }
                }
                _ => {
                    return Err(Error::data(format!(
                        "column '{}' storage does not match the fitted parameters",
                        spec.name
                    )))
                }
            }
        }
        DataTable::new(self.output_schema()?, columns)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("preprocessor serialization");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let pre: FittedPreprocessor =
            serde_json::from_str(text).map_err(|e| Error::parse_json(text, e))?;
        if pre.format != PREPROCESSOR_FORMAT {
            return Err(Error::Parse {
                offset: 0,
                message: format!("not a preprocessor file (format '{}')", pre.format),
            });
        }
        if pre.version != PREPROCESSOR_VERSION {
            return Err(Error::Version {
                found: pre.version,
                expected: PREPROCESSOR_VERSION,
            });
        }
        Ok(pre)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

// ---------------------------------------------------------------------------
// Undersampling

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    /// Selected row indices in shuffled order.
    pub rows: Vec<usize>,
    /// Set when fewer majority rows exist than the ratio asks for.
    pub warning: Option<String>,
}

/// Keeps every positive row plus `floor(ratio * positives)` negatives drawn
/// uniformly without replacement, then shuffles the result.
pub fn undersample_indices(labels: &[u8], ratio: f64, seed: u64) -> Result<Sample> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::invalid(format!(
            "undersampling ratio must be positive, got {ratio}"
        )));
    }
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut majority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    let target = (ratio * minority.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let warning = if target > majority.len() {
        let msg = format!(
            "ratio 1:{ratio} needs {target} majority rows but only {} exist; keeping all",
            majority.len()
        );
        log::warn!("{msg}");
        Some(msg)
    } else {
        majority.shuffle(&mut rng);
        majority.truncate(target);
        None
    };
    let mut rows = minority;
    rows.extend(majority);
    rows.shuffle(&mut rng);
    Ok(Sample { rows, warning })
}

pub fn undersample(table: &DataTable, ratio: f64, seed: u64) -> Result<(DataTable, Option<String>)> {
    let sample = undersample_indices(&table.labels(), ratio, seed)?;
    Ok((table.select_rows(&sample.rows), sample.warning))
}
