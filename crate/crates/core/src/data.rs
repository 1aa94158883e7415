//! Tabular data model, CSV ingestion, one-hot encoding, stratified splitting
//! and the synthetic cohort generator.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Label,
    Identifier,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }

    pub fn feature(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self::new(name, kind, ColumnRole::Feature)
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Binary, ColumnRole::Label)
    }

    /// Whether cells of this column are stored as numbers.
    ///
    /// Identifier and excluded columns are kept verbatim as text whatever
    /// their declared kind.
    pub fn is_numeric(&self) -> bool {
        matches!(self.role, ColumnRole::Feature | ColumnRole::Label)
            && self.kind != ColumnKind::Categorical
    }
}

/// Ordered column list with exactly one binary label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct Schema {
    columns: Vec<ColumnSpec>,
    label: usize,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<SchemaRepr> for Schema {
    type Error = Error;

    fn try_from(repr: SchemaRepr) -> Result<Self> {
        Schema::new(repr.columns)
    }
}

impl From<Schema> for SchemaRepr {
    fn from(schema: Schema) -> Self {
        SchemaRepr {
            columns: schema.columns,
        }
    }
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name '{}'", c.name)));
            }
        }
        let labels: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == ColumnRole::Label)
            .map(|(i, _)| i)
            .collect();
        let label = match labels.as_slice() {
            [i] => *i,
            [] => return Err(Error::Schema("schema has no label column".into())),
            _ => return Err(Error::Schema("schema has more than one label column".into())),
        };
        if columns[label].kind != ColumnKind::Binary {
            return Err(Error::Schema(format!(
                "label column '{}' must be binary",
                columns[label].name
            )));
        }
        Ok(Self { columns, label })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn label_index(&self) -> usize {
        self.label
    }

    pub fn label(&self) -> &ColumnSpec {
        &self.columns[self.label]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Indices of feature-role columns, in schema order.
    pub fn feature_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == ColumnRole::Feature)
            .map(|(i, _)| i)
            .collect()
    }

    /// Canonical text encoding; `from_json(to_json(s))` is the identity and
    /// re-encoding yields identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("schema serialization");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse_json(text, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Column storage: numbers for continuous/binary/label columns, text
/// otherwise. `None` is a MISSING cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn missing_count(&self) -> usize {
        match self {
            Column::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            Column::Text(v) => v.iter().filter(|c| c.is_none()).count(),
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Text(v) => v[row].is_none(),
        }
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&[Option<String>]> {
        match self {
            Column::Text(v) => Some(v),
            Column::Numeric(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Text(v) => Column::Text(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Borrowed view of a single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Number(f64),
    Token(&'a str),
    Missing,
}

/// Immutable table of typed columns with a 0/1 label column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    schema: Schema,
    columns: Vec<Column>,
    n_rows: usize,
}

impl DataTable {
    pub fn new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::data(format!(
                "table has {} columns but schema lists {}",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::data(format!(
                    "column '{}' has {} rows, expected {n_rows}",
                    spec.name,
                    col.len()
                )));
            }
            if spec.is_numeric() != matches!(col, Column::Numeric(_)) {
                return Err(Error::data(format!(
                    "column '{}' storage does not match its kind",
                    spec.name
                )));
            }
        }
        let label = columns[schema.label_index()]
            .as_numeric()
            .expect("label is numeric");
        for (row, v) in label.iter().enumerate() {
            match v {
                Some(x) if *x == 0.0 || *x == 1.0 => {}
                Some(x) => {
                    return Err(Error::data(format!(
                        "label column '{}' has value {x} at row index {row}; expected 0 or 1",
                        schema.label().name
                    )))
                }
                None => {
                    return Err(Error::data(format!(
                        "label column '{}' is missing at row index {row}",
                        schema.label().name
                    )))
                }
            }
        }
        Ok(Self {
            schema,
            columns,
            n_rows,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&Column> {
        self.schema.index_of(name).map(|i| &self.columns[i])
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell<'_> {
        match &self.columns[col] {
            Column::Numeric(v) => v[row].map_or(Cell::Missing, Cell::Number),
            Column::Text(v) => v[row].as_deref().map_or(Cell::Missing, Cell::Token),
        }
    }

    pub fn labels(&self) -> Vec<u8> {
        self.columns[self.schema.label_index()]
            .as_numeric()
            .expect("label is numeric")
            .iter()
            .map(|v| u8::from(v == &Some(1.0)))
            .collect()
    }

    /// Counts of (negatives, positives).
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels().iter().filter(|&&y| y == 1).count();
        (self.n_rows - pos, pos)
    }

    /// New table holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        DataTable {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Missing fraction of every column, keyed by name.
    pub fn missing_fractions(&self) -> Vec<(String, f64)> {
        self.schema
            .columns()
            .iter()
            .zip(&self.columns)
            .map(|(spec, col)| {
                let frac = if self.n_rows == 0 {
                    0.0
                } else {
                    col.missing_count() as f64 / self.n_rows as f64
                };
                (spec.name.clone(), frac)
            })
            .collect()
    }

    /// Extracts the numeric feature matrix and labels.
    ///
    /// Fails if any feature column is categorical (encode first) or holds a
    /// MISSING cell (impute first).
    pub fn to_dataset(&self) -> Result<Dataset> {
        let features = self.schema.feature_indices();
        let mut names = Vec::with_capacity(features.len());
        let mut cols = Vec::with_capacity(features.len());
        for &j in &features {
            let spec = &self.schema.columns()[j];
            let values = self.columns[j].as_numeric().ok_or_else(|| {
                Error::data(format!(
                    "feature '{}' is categorical; one-hot encode before modelling",
                    spec.name
                ))
            })?;
            if let Some(row) = values.iter().position(Option::is_none) {
                return Err(Error::data(format!(
                    "feature '{}' is missing at row index {row}; impute before modelling",
                    spec.name
                )));
            }
            names.push(spec.name.clone());
            cols.push(values);
        }
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            data.extend(cols.iter().map(|c| c[i].expect("checked above")));
        }
        Ok(Dataset {
            x: Matrix::new(self.n_rows, names.len(), data)?,
            y: self.labels(),
            feature_names: names,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.columns().iter().map(|c| c.name.as_str()))?;
        let mut record: Vec<String> = Vec::with_capacity(self.n_cols());
        for row in 0..self.n_rows {
            record.clear();
            for col in 0..self.n_cols() {
                record.push(match self.cell(row, col) {
                    Cell::Number(x) => format_number(x),
                    Cell::Token(t) => t.to_owned(),
                    Cell::Missing => String::new(),
                });
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Shortest text form that parses back to the identical `f64`.
pub fn format_number(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{x}")
    }
}

/// Numeric design matrix with 0/1 labels, ready for the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::invalid(format!(
                "{} rows but {} labels",
                x.n_rows(),
                y.len()
            )));
        }
        if x.n_cols() != feature_names.len() {
            return Err(Error::Dimension {
                expected: feature_names.len(),
                found: x.n_cols(),
            });
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        Ok(Self {
            x,
            y,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    /// Tokens read as MISSING in addition to the empty string.
    pub missing_tokens: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            missing_tokens: vec!["NA".to_owned()],
        }
    }
}

/// Per-column counts gathered during ingestion. Only columns with a non-zero
/// count appear.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub n_rows: usize,
    pub missing: BTreeMap<String, usize>,
    pub unparseable: BTreeMap<String, usize>,
}

pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &Schema,
    options: &CsvOptions,
) -> Result<(DataTable, IngestReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), schema, options)
}

pub fn read_csv<R: Read>(
    reader: R,
    schema: &Schema,
    options: &CsvOptions,
) -> Result<(DataTable, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut positions = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        if positions.insert(name.to_owned(), i).is_some() {
            return Err(Error::Schema(format!("duplicate header column '{name}'")));
        }
    }
    let label_name = &schema.label().name;
    let source: Vec<usize> = schema
        .columns()
        .iter()
        .map(|c| {
            positions.get(&c.name).copied().ok_or_else(|| {
                if &c.name == label_name {
                    Error::Schema(format!("label column not found: '{}'", c.name))
                } else {
                    Error::Schema(format!("column not found in header: '{}'", c.name))
                }
            })
        })
        .collect::<Result<_>>()?;

    let is_missing = |s: &str| s.is_empty() || options.missing_tokens.iter().any(|t| t == s);
    let mut numeric: Vec<Vec<Option<f64>>> = vec![Vec::new(); schema.len()];
    let mut text: Vec<Vec<Option<String>>> = vec![Vec::new(); schema.len()];
    let mut report = IngestReport::default();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut record)? {
        for (j, spec) in schema.columns().iter().enumerate() {
            let raw = record.get(source[j]).unwrap_or("");
            let missing = is_missing(raw);
            if spec.is_numeric() {
                let value = if missing {
                    None
                } else {
                    match parse_number(raw, spec.kind) {
                        Some(v) => Some(v),
                        None if spec.role == ColumnRole::Label => {
                            return Err(Error::data(format!(
                                "label column '{}' has unparseable value '{raw}' at row index {row}",
                                spec.name
                            )));
                        }
                        None => {
                            *report.unparseable.entry(spec.name.clone()).or_default() += 1;
                            None
                        }
                    }
                };
                if value.is_none() {
                    if spec.role == ColumnRole::Label {
                        return Err(Error::data(format!(
                            "label column '{}' is missing at row index {row}",
                            spec.name
                        )));
                    }
                    *report.missing.entry(spec.name.clone()).or_default() += 1;
                }
                numeric[j].push(value);
            } else {
                if missing {
                    *report.missing.entry(spec.name.clone()).or_default() += 1;
                }
                text[j].push((!missing).then(|| raw.to_owned()));
            }
        }
        row += 1;
    }
    report.n_rows = row;
    let columns = schema
        .columns()
        .iter()
        .zip(numeric.into_iter().zip(text))
        .map(|(spec, (n, t))| {
            if spec.is_numeric() {
                Column::Numeric(n)
            } else {
                Column::Text(t)
            }
        })
        .collect();
    Ok((DataTable::new(schema.clone(), columns)?, report))
}

fn parse_number(raw: &str, kind: ColumnKind) -> Option<f64> {
    let v: f64 = raw.trim().parse().ok()?;
    match kind {
        ColumnKind::Binary if v != 0.0 && v != 1.0 => None,
        _ if v.is_nan() => None,
        _ => Some(v),
    }
}

// ---------------------------------------------------------------------------
// One-hot encoding

/// Observed levels of every categorical feature column, sorted
/// lexicographically.
pub fn categorical_levels(table: &DataTable) -> Vec<(String, Vec<String>)> {
    table
        .schema()
        .columns()
        .iter()
        .zip(table.columns())
        .filter(|(spec, _)| spec.role == ColumnRole::Feature && spec.kind == ColumnKind::Categorical)
        .map(|(spec, col)| {
            let levels: BTreeSet<&str> = col
                .as_text()
                .expect("categorical is text")
                .iter()
                .flatten()
                .map(String::as_str)
                .collect();
            (spec.name.clone(), levels.into_iter().map(str::to_owned).collect())
        })
        .collect()
}

pub fn indicator_name(column: &str, level: &str) -> String {
    format!("{column}={level}")
}

/// Replaces each categorical feature column by one indicator column per
/// observed level, named `<col>=<level>` in lexicographic level order.
///
/// Returns the encoded table and any warnings (single-level columns).
pub fn one_hot_encode(table: &DataTable) -> Result<(DataTable, Vec<String>)> {
    let levels = categorical_levels(table);
    let mut warnings = Vec::new();
    for (name, lv) in &levels {
        if lv.len() == 1 {
            let msg = format!("categorical column '{name}' has a single level; emitting a constant indicator");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok((one_hot_encode_with_levels(table, &levels)?, warnings))
}

/// One-hot encodes with a fixed level list per column. Cells whose level is
/// not listed encode as all-zero indicators.
pub fn one_hot_encode_with_levels(
    table: &DataTable,
    levels: &[(String, Vec<String>)],
) -> Result<DataTable> {
    let lookup: HashMap<&str, &Vec<String>> =
        levels.iter().map(|(n, l)| (n.as_str(), l)).collect();
    let mut specs = Vec::new();
    let mut columns = Vec::new();
    for (spec, col) in table.schema().columns().iter().zip(table.columns()) {
        let encode = spec.role == ColumnRole::Feature && spec.kind == ColumnKind::Categorical;
        if !encode {
            specs.push(spec.clone());
            columns.push(col.clone());
            continue;
        }
        let levels = lookup.get(spec.name.as_str()).ok_or_else(|| {
            Error::data(format!("no level list for categorical column '{}'", spec.name))
        })?;
        let cells = col.as_text().expect("categorical is text");
        if let Some(row) = cells.iter().position(Option::is_none) {
            return Err(Error::data(format!(
                "categorical column '{}' is missing at row index {row}; impute before encoding",
                spec.name
            )));
        }
        for level in levels.iter() {
            specs.push(ColumnSpec::feature(
                indicator_name(&spec.name, level),
                ColumnKind::Binary,
            ));
            columns.push(Column::Numeric(
                cells
                    .iter()
                    .map(|c| Some(if c.as_deref() == Some(level.as_str()) { 1.0 } else { 0.0 }))
                    .collect(),
            ));
        }
    }
    DataTable::new(Schema::new(specs)?, columns)
}

// ---------------------------------------------------------------------------
// Stratified split

/// Splits into (train, test) keeping each class's test share at
/// `round(class_count * test_fraction)`. Both halves keep input row order.
pub fn split_stratified(
    table: &DataTable,
    test_fraction: f64,
    seed: u64,
) -> Result<(DataTable, DataTable)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let labels = table.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::data(format!(
                "class {class} has {} row(s); stratified split needs at least 2",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((table.select_rows(&train), table.select_rows(&test)))
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

fn default_scale() -> f64 {
    1.0
}

/// A generated feature that enters the outcome model.
///
/// Continuous values are `location + scale * z` with `z ~ N(0, 1)` and
/// contribute `coefficient * z` to the logit. Binary values are
/// Bernoulli(0.5) and contribute `coefficient * value`. Categorical values are
/// uniform over `L0..L{k-1}` and contribute `coefficient` when the level is
/// the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativeFeature {
    pub name: String,
    pub kind: ColumnKind,
    pub coefficient: f64,
    #[serde(default)]
    pub location: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

impl InformativeFeature {
    pub fn continuous(name: impl Into<String>, coefficient: f64) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            coefficient,
            location: 0.0,
            scale: 1.0,
        }
    }

    pub fn scaled(mut self, location: f64, scale: f64) -> Self {
        self.location = location;
        self.scale = scale;
        self
    }

    pub fn with_kind(mut self, kind: ColumnKind) -> Self {
        self.kind = kind;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_rows: usize,
    pub informative: Vec<InformativeFeature>,
    /// Extra unit-normal features with no effect on the outcome.
    pub noise_count: usize,
    pub categorical_levels: usize,
    pub base_logit: f64,
    pub missing_rate: f64,
    pub seed: u64,
    /// When set, exactly `round(n_rows * p)` rows are labelled positive: the
    /// ones with the largest latent `logit + Logistic(0, 1)` draw.
    #[serde(default)]
    pub target_prevalence: Option<f64>,
    pub label_name: String,
    /// Name of a text identifier column, if one should be emitted.
    #[serde(default)]
    pub id_column: Option<String>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_rows: 1000,
            informative: Vec::new(),
            noise_count: 0,
            categorical_levels: 3,
            base_logit: 0.0,
            missing_rate: 0.0,
            seed: 0,
            target_prevalence: None,
            label_name: "readmitted".to_owned(),
            id_column: None,
        }
    }
}

/// eICU readmission prevalence: 6,021 of 149,009 admissions.
pub const EICU_PREVALENCE: f64 = 6021.0 / 149_009.0;
/// MIMIC-IV readmission prevalence.
pub const MIMIC_PREVALENCE: f64 = 0.0874;

impl SyntheticConfig {
    /// Named scenarios: `eicu-like`, `mimic-like` and `balanced`.
    pub fn preset(name: &str, n_rows: usize, seed: u64) -> Result<Self> {
        let (prevalence, shift) = match name {
            "eicu-like" => (EICU_PREVALENCE, 1.0),
            "mimic-like" => (MIMIC_PREVALENCE, 0.8),
            "balanced" => (0.5, 1.0),
            other => {
                return Err(Error::invalid(format!(
                    "unknown preset '{other}' (expected eicu-like, mimic-like or balanced)"
                )))
            }
        };
        // mimic-like dampens every effect to mimic a cohort shift.
        let f = |name: &str, coef: f64, loc: f64, scale: f64| {
            InformativeFeature::continuous(name, coef * shift).scaled(loc, scale)
        };
        let informative = vec![
            f("age", 1.2, 62.0, 17.0),
            f("icu_hours", 0.6, 60.0, 30.0),
            f("admission_weight", -0.5, 82.0, 24.0),
            f("admission_height", 0.0, 169.0, 11.0),
            f("albumin", -1.0, 3.0, 0.6),
            f("bun", 1.2, 25.0, 15.0),
            f("hemoglobin", -0.8, 10.5, 2.0),
            InformativeFeature::continuous("unit_type", -shift)
                .with_kind(ColumnKind::Categorical),
            InformativeFeature::continuous("ventilated", 0.8 * shift)
                .with_kind(ColumnKind::Binary),
        ];
        Ok(Self {
            n_rows,
            informative,
            noise_count: 6,
            categorical_levels: 4,
            base_logit: 0.0,
            missing_rate: 0.05,
            seed,
            target_prevalence: Some(prevalence),
            label_name: "readmitted".to_owned(),
            id_column: Some("patient_id".to_owned()),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_rows < 1 {
            return Err(Error::invalid("n_rows must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::invalid(format!(
                "missing_rate must lie in [0, 1), got {}",
                self.missing_rate
            )));
        }
        if !self.base_logit.is_finite() {
            return Err(Error::invalid("base_logit must be finite"));
        }
        if let Some(p) = self.target_prevalence {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("target prevalence {p} outside [0, 1]")));
            }
        }
        for f in &self.informative {
            if !f.coefficient.is_finite() || !f.location.is_finite() || !f.scale.is_finite() {
                return Err(Error::invalid(format!(
                    "feature '{}' has a non-finite parameter",
                    f.name
                )));
            }
            if f.kind == ColumnKind::Categorical && self.categorical_levels < 1 {
                return Err(Error::invalid("categorical_levels must be at least 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub kind: ColumnKind,
    pub coefficient: f64,
    /// For categorical features, the level that carries the coefficient.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effect_level: Option<String>,
}

/// Generating-model record written next to a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub base_logit: f64,
    pub target_prevalence: Option<f64>,
    pub coefficients: Vec<Coefficient>,
    /// Names of features with a non-zero coefficient.
    pub informative: Vec<String>,
    pub noise: Vec<String>,
    pub n_rows: usize,
    pub n_positive: usize,
    pub seed: u64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws a synthetic cohort from a logistic outcome model.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(DataTable, GroundTruth)> {
    config.validate()?;
    let n = config.n_rows;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = config.noise_count.max(1).to_string().len().max(2);
    let noise_names: Vec<String> = (1..=config.noise_count)
        .map(|i| format!("noise_{i:0width$}"))
        .collect();
    let level_names: Vec<String> = (0..config.categorical_levels).map(|l| format!("L{l}")).collect();

    let mut feature_cols: Vec<Column> = Vec::new();
    let mut specs: Vec<ColumnSpec> = Vec::new();
    if let Some(id) = &config.id_column {
        specs.push(ColumnSpec::new(id.clone(), ColumnKind::Categorical, ColumnRole::Identifier));
    }
    let mut logit = vec![config.base_logit; n];
    for f in &config.informative {
        specs.push(ColumnSpec::feature(f.name.clone(), f.kind));
        match f.kind {
            ColumnKind::Continuous => {
                let mut col = Vec::with_capacity(n);
                for eta in logit.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *eta += f.coefficient * z;
                    col.push(Some(f.location + f.scale * z));
                }
                feature_cols.push(Column::Numeric(col));
            }
            ColumnKind::Binary => {
                let mut col = Vec::with_capacity(n);
                for eta in logit.iter_mut() {
                    let v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                    *eta += f.coefficient * v;
                    col.push(Some(v));
                }
                feature_cols.push(Column::Numeric(col));
            }
            ColumnKind::Categorical => {
                let k = config.categorical_levels;
                let mut col = Vec::with_capacity(n);
                for eta in logit.iter_mut() {
                    let l = rng.random_range(0..k);
                    if l == k - 1 {
                        *eta += f.coefficient;
                    }
                    col.push(Some(level_names[l].clone()));
                }
                feature_cols.push(Column::Text(col));
            }
        }
    }
    for name in &noise_names {
        specs.push(ColumnSpec::feature(name.clone(), ColumnKind::Continuous));
        feature_cols.push(Column::Numeric(
            (0..n).map(|_| Some(rng.sample::<f64, _>(StandardNormal))).collect(),
        ));
    }

    let labels: Vec<f64> = match config.target_prevalence {
        None => logit
            .iter()
            .map(|&eta| if rng.random_bool(sigmoid(eta)) { 1.0 } else { 0.0 })
            .collect(),
        Some(p) => {
            let n_pos = (n as f64 * p).round() as usize;
            let latent: Vec<f64> = logit
                .iter()
                .map(|&eta| {
                    let u: f64 = rng.random_range(f64::EPSILON..1.0);
                    eta + (u / (1.0 - u)).ln()
                })
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| latent[b].total_cmp(&latent[a]).then(a.cmp(&b)));
            let mut y = vec![0.0; n];
            for &i in &order[..n_pos] {
                y[i] = 1.0;
            }
            y
        }
    };

    if config.missing_rate > 0.0 {
        for col in feature_cols.iter_mut() {
            match col {
                Column::Numeric(v) => v.iter_mut().for_each(|c| {
                    if rng.random_bool(config.missing_rate) {
                        *c = None;
                    }
                }),
                Column::Text(v) => v.iter_mut().for_each(|c| {
                    if rng.random_bool(config.missing_rate) {
                        *c = None;
                    }
                }),
            }
        }
    }

    let mut columns = Vec::with_capacity(specs.len() + 1);
    if config.id_column.is_some() {
        let width = n.to_string().len().max(6);
        columns.push(Column::Text(
            (1..=n).map(|i| Some(format!("P{i:0width$}"))).collect(),
        ));
    }
    columns.extend(feature_cols);
    specs.push(ColumnSpec::label(config.label_name.clone()));
    columns.push(Column::Numeric(labels.iter().map(|&y| Some(y)).collect()));

    let table = DataTable::new(Schema::new(specs)?, columns)?;
    let coefficients = config
        .informative
        .iter()
        .map(|f| Coefficient {
            name: f.name.clone(),
            kind: f.kind,
            coefficient: f.coefficient,
            effect_level: (f.kind == ColumnKind::Categorical)
                .then(|| level_names[config.categorical_levels - 1].clone()),
        })
        .collect();
    let truth = GroundTruth {
        base_logit: config.base_logit,
        target_prevalence: config.target_prevalence,
        coefficients,
        informative: config
            .informative
            .iter()
            .filter(|f| f.coefficient != 0.0)
            .map(|f| f.name.clone())
            .collect(),
        noise: noise_names,
        n_rows: n,
        n_positive: labels.iter().filter(|&&y| y == 1.0).count(),
        seed: config.seed,
    };
    Ok((table, truth))
}
