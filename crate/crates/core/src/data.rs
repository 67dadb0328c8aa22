//! Labeled tabular datasets: schema, CSV ingestion and the synthetic generator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

pub const DEFAULT_LABEL_COLUMN: &str = "classification";
pub const DEFAULT_POSITIVE_LABEL: &str = "malware";
pub const DEFAULT_NEGATIVE_LABEL: &str = "benign";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
        }
    }
}

/// Ordered feature columns plus the label column description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<Column>,
    label_column: String,
    positive_label: String,
}

/// Process-telemetry columns of the public Kaggle malware corpus, in file order.
const KAGGLE_COLUMNS: [&str; 35] = [
    "hash",
    "millisecond",
    "classification",
    "state",
    "usage_counter",
    "prio",
    "static_prio",
    "normal_prio",
    "policy",
    "vm_pgoff",
    "vm_truncate_count",
    "task_size",
    "cached_hole_size",
    "free_area_cache",
    "mm_users",
    "map_count",
    "hiwater_rss",
    "total_vm",
    "shared_vm",
    "exec_vm",
    "reserved_vm",
    "nr_ptes",
    "end_data",
    "last_interval",
    "nvcsw",
    "nivcsw",
    "min_flt",
    "maj_flt",
    "fs_excl_counter",
    "lock",
    "utime",
    "stime",
    "gtime",
    "cgtime",
    "signal_nvcsw",
];

impl FeatureSchema {
    pub fn new(
        columns: Vec<Column>,
        label_column: impl Into<String>,
        positive_label: impl Into<String>,
    ) -> Result<Self> {
        let label_column = label_column.into();
        let mut seen = BTreeSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::SchemaMismatch("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column `{}`",
                    c.name
                )));
            }
        }
        if label_column.is_empty() {
            return Err(Error::SchemaMismatch("empty label column name".into()));
        }
        if seen.contains(label_column.as_str()) {
            return Err(Error::SchemaMismatch(format!(
                "label column `{label_column}` is also listed as a feature"
            )));
        }
        Ok(Self {
            columns,
            label_column,
            positive_label: positive_label.into(),
        })
    }

    /// All-numeric schema with the default label column and values.
    pub fn numeric<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names.iter().map(|n| Column::numeric(n.as_ref())).collect(),
            DEFAULT_LABEL_COLUMN,
            DEFAULT_POSITIVE_LABEL,
        )
    }

    /// Schema of the Kaggle PC-malware corpus: 34 feature columns (`hash` is
    /// the one categorical feature) plus the `classification` label.
    pub fn kaggle_malware() -> Self {
        let columns = KAGGLE_COLUMNS
            .iter()
            .filter(|&&n| n != DEFAULT_LABEL_COLUMN)
            .map(|&n| {
                if n == "hash" {
                    Column::categorical(n)
                } else {
                    Column::numeric(n)
                }
            })
            .collect();
        Self::new(columns, DEFAULT_LABEL_COLUMN, DEFAULT_POSITIVE_LABEL)
            .expect("static schema is valid")
    }

    /// Infers column kinds from a CSV file: a column is numeric when every
    /// value parses as a finite number, categorical otherwise.
    pub fn infer_from_csv(
        path: impl AsRef<Path>,
        label_column: &str,
        positive_label: &str,
    ) -> Result<Self> {
        let mut reader = csv_reader(path.as_ref())?;
        let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
        if !headers.iter().any(|h| h == label_column) {
            return Err(Error::SchemaMismatch(format!(
                "header lacks label column `{label_column}`"
            )));
        }
        let mut numeric = vec![true; headers.len()];
        for record in reader.records() {
            let record = record?;
            for (i, field) in record.iter().enumerate() {
                if numeric[i] && !matches!(parse_number(field), Some(v) if v.is_finite()) {
                    numeric[i] = false;
                }
            }
        }
        let columns = headers
            .iter()
            .zip(&numeric)
            .filter(|(h, _)| h.as_str() != label_column)
            .map(|(h, &is_num)| {
                if is_num {
                    Column::numeric(h.as_str())
                } else {
                    Column::categorical(h.as_str())
                }
            })
            .collect();
        Self::new(columns, label_column, positive_label)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn positive_label(&self) -> &str {
        &self.positive_label
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn categorical_columns(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Categorical)
            .map(|c| c.name.clone())
            .collect()
    }

    fn restricted(&self, idx: &[usize]) -> Self {
        Self {
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            label_column: self.label_column.clone(),
            positive_label: self.positive_label.clone(),
        }
    }
}

/// Category text to integer code, per categorical column.
pub type Encodings = BTreeMap<String, BTreeMap<String, u32>>;

/// Encoded feature matrix with binary labels and provenance.
///
/// Immutable once built; every transformation returns a new value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Matrix,
    labels: Vec<u8>,
    row_ids: Vec<usize>,
    encodings: Encodings,
}

impl Dataset {
    pub fn new(
        schema: FeatureSchema,
        rows: Matrix,
        labels: Vec<u8>,
        row_ids: Vec<usize>,
        encodings: Encodings,
    ) -> Result<Self> {
        if rows.cols() != schema.columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "matrix has {} columns, schema lists {}",
                rows.cols(),
                schema.columns.len()
            )));
        }
        if labels.len() != rows.rows() {
            return Err(Error::LengthMismatch {
                left: rows.rows(),
                right: labels.len(),
            });
        }
        if row_ids.len() != rows.rows() {
            return Err(Error::LengthMismatch {
                left: rows.rows(),
                right: row_ids.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::NonBinaryValue(bad));
        }
        if let Some(pos) = rows.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = rows.cols().max(1);
            return Err(Error::Parse {
                row: pos / cols,
                column: schema.columns[pos % cols].name.clone(),
                message: "non-finite value".into(),
            });
        }
        Ok(Self {
            schema,
            rows,
            labels,
            row_ids,
            encodings,
        })
    }

    /// Dataset from an all-numeric matrix with default column names and sequential row ids.
    pub fn from_matrix(rows: Matrix, labels: Vec<u8>) -> Result<Self> {
        let names = feature_names(rows.cols());
        let n = rows.rows();
        Self::new(
            FeatureSchema::numeric(&names)?,
            rows,
            labels,
            (0..n).collect(),
            default_label_encoding(),
        )
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn encodings(&self) -> &Encodings {
        &self.encodings
    }

    pub fn n_rows(&self) -> usize {
        self.rows.rows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Row positions (not ids) of each class: `[negatives, positives]`.
    pub fn class_indices(&self) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    /// Rows at the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: self.rows.select_rows(positions),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
            encodings: self.encodings.clone(),
        }
    }

    /// Columns at the given positions, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let schema = self.schema.restricted(idx);
        let kept: BTreeSet<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        let encodings = self
            .encodings
            .iter()
            .filter(|(k, _)| kept.contains(k.as_str()) || *k == &schema.label_column)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Self {
            schema,
            rows: self.rows.select_cols(idx),
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
            encodings,
        }
    }

    /// Same rows and labels with a replacement feature matrix of identical shape.
    pub fn with_matrix(&self, rows: Matrix) -> Result<Self> {
        if rows.rows() != self.n_rows() || rows.cols() != self.n_features() {
            return Err(Error::ShapeMismatch {
                expected: self.n_rows() * self.n_features(),
                got: rows.rows() * rows.cols(),
            });
        }
        Self::new(
            self.schema.clone(),
            rows,
            self.labels.clone(),
            self.row_ids.clone(),
            self.encodings.clone(),
        )
    }

    /// Re-expresses categorical codes in the code space of `reference`, so a
    /// file encoded on its own lines up with the training file's encodings.
    /// Categories unknown to `reference` map to one past its largest code.
    pub fn recode_categories(&self, reference: &Encodings) -> Self {
        let mut rows = self.rows.clone();
        let mut encodings = self.encodings.clone();
        for (j, col) in self.schema.columns.iter().enumerate() {
            let (Some(own), Some(target)) =
                (self.encodings.get(&col.name), reference.get(&col.name))
            else {
                continue;
            };
            if col.kind != ColumnKind::Categorical {
                continue;
            }
            let unseen = target.values().max().map_or(0, |m| m + 1);
            let map: HashMap<u32, u32> = own
                .iter()
                .map(|(text, &code)| (code, target.get(text).copied().unwrap_or(unseen)))
                .collect();
            for r in 0..rows.rows() {
                let code = rows.get(r, j) as u32;
                rows.set(r, j, map.get(&code).copied().unwrap_or(unseen) as f64);
            }
            encodings.insert(col.name.clone(), target.clone());
        }
        Self {
            schema: self.schema.clone(),
            rows,
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
            encodings,
        }
    }

    fn negative_label(&self) -> String {
        self.encodings
            .get(&self.schema.label_column)
            .and_then(|m| {
                m.keys()
                    .find(|k| *k != &self.schema.positive_label)
                    .cloned()
            })
            .unwrap_or_else(|| DEFAULT_NEGATIVE_LABEL.to_string())
    }

    /// Writes the dataset back out as CSV, decoding categorical codes and labels.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        self.write_csv_to(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: std::io::Write>(&self, writer: &mut csv::Writer<W>) -> Result<()> {
        let mut header: Vec<&str> = self.schema.feature_names();
        header.push(&self.schema.label_column);
        writer.write_record(&header)?;

        let decoders: Vec<Option<HashMap<u32, &str>>> = self
            .schema
            .columns
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Categorical => self
                    .encodings
                    .get(&c.name)
                    .map(|m| m.iter().map(|(k, &v)| (v, k.as_str())).collect()),
                ColumnKind::Numeric => None,
            })
            .collect();
        let negative = self.negative_label();

        let mut record = Vec::with_capacity(header.len());
        for (r, row) in self.rows.row_iter().enumerate() {
            record.clear();
            for (v, dec) in row.iter().zip(&decoders) {
                let text = dec
                    .as_ref()
                    .and_then(|d| d.get(&(*v as u32)).map(|s| s.to_string()))
                    .unwrap_or_else(|| v.to_string());
                record.push(text);
            }
            record.push(if self.labels[r] == 1 {
                self.schema.positive_label.clone()
            } else {
                negative.clone()
            });
            writer.write_record(&record)?;
        }
        Ok(())
    }
}

pub(crate) fn feature_names(d: usize) -> Vec<String> {
    let width = d.saturating_sub(1).to_string().len().max(3);
    (0..d).map(|i| format!("feat_{i:0width$}")).collect()
}

fn default_label_encoding() -> Encodings {
    let mut m = BTreeMap::new();
    m.insert(
        DEFAULT_LABEL_COLUMN.to_string(),
        BTreeMap::from([
            (DEFAULT_NEGATIVE_LABEL.to_string(), 0),
            (DEFAULT_POSITIVE_LABEL.to_string(), 1),
        ]),
    );
    m
}

/// Assigns consecutive codes from 0 to the distinct values in byte-wise
/// lexicographic order.
pub fn encode_labels<S: AsRef<str>>(values: &[S]) -> (Vec<u32>, BTreeMap<String, u32>) {
    let distinct: BTreeSet<&str> = values.iter().map(|v| v.as_ref()).collect();
    let mapping: BTreeMap<String, u32> = distinct
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v.to_string(), i as u32))
        .collect();
    let codes = values.iter().map(|v| mapping[v.as_ref()]).collect();
    (codes, mapping)
}

fn parse_number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_path(path)?)
}

/// Reads a CSV file laid out per `schema`. The header must name exactly the
/// schema's feature columns plus its label column, in any order.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let mut reader = csv_reader(path.as_ref())?;
    load_from_reader(&mut reader, schema)
}

pub fn load_from_reader<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
    schema: &FeatureSchema,
) -> Result<Dataset> {
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let position: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    if position.len() != headers.len() {
        return Err(Error::SchemaMismatch("duplicate header names".into()));
    }
    let label_pos = *position.get(schema.label_column.as_str()).ok_or_else(|| {
        Error::SchemaMismatch(format!(
            "header lacks label column `{}`",
            schema.label_column
        ))
    })?;
    let mut col_pos = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let p = position
            .get(c.name.as_str())
            .ok_or_else(|| Error::SchemaMismatch(format!("header lacks column `{}`", c.name)))?;
        col_pos.push(*p);
    }
    if headers.len() != schema.columns.len() + 1 {
        let known: BTreeSet<&str> = schema
            .feature_names()
            .into_iter()
            .chain(std::iter::once(schema.label_column.as_str()))
            .collect();
        let extra: Vec<&str> = headers
            .iter()
            .map(|h| h.as_str())
            .filter(|h| !known.contains(h))
            .collect();
        return Err(Error::SchemaMismatch(format!(
            "header has columns not in schema: {extra:?}"
        )));
    }

    let d = schema.columns.len();
    let mut values: Vec<f64> = Vec::new();
    let mut raw_categorical: Vec<Vec<String>> = vec![Vec::new(); d];
    let mut raw_labels: Vec<String> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (j, c) in schema.columns.iter().enumerate() {
            let field = &record[col_pos[j]];
            match c.kind {
                ColumnKind::Numeric => {
                    let v = parse_number(field)
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse {
                            row,
                            column: c.name.clone(),
                            message: if field.trim().is_empty() {
                                "missing value".into()
                            } else {
                                format!("`{field}` is not a finite number")
                            },
                        })?;
                    values.push(v);
                }
                ColumnKind::Categorical => {
                    raw_categorical[j].push(field.to_string());
                    values.push(0.0);
                }
            }
        }
        raw_labels.push(record[label_pos].to_string());
    }
    let n = raw_labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }

    let mut encodings = Encodings::new();
    for (j, c) in schema.columns.iter().enumerate() {
        if c.kind == ColumnKind::Categorical {
            let (codes, mapping) = encode_labels(&raw_categorical[j]);
            for (r, code) in codes.into_iter().enumerate() {
                values[r * d + j] = code as f64;
            }
            encodings.insert(c.name.clone(), mapping);
        }
    }

    let (_, label_map) = encode_labels(&raw_labels);
    if label_map.len() > 2 {
        return Err(Error::NonBinaryLabel(label_map.into_keys().collect()));
    }
    if label_map.len() == 2 && !label_map.contains_key(&schema.positive_label) {
        return Err(Error::SchemaMismatch(format!(
            "positive label `{}` not among label values {:?}",
            schema.positive_label,
            label_map.keys().collect::<Vec<_>>()
        )));
    }
    let labels = raw_labels
        .iter()
        .map(|l| u8::from(*l == schema.positive_label))
        .collect();
    encodings.insert(schema.label_column.clone(), label_map);

    Dataset::new(
        schema.clone(),
        Matrix::from_vec(n, d, values)?,
        labels,
        (0..n).collect(),
        encodings,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthPattern {
    /// Class-conditional Gaussian clusters on the informative features.
    #[default]
    Clusters,
    /// Informative features sit at `±separation/2`; the label is the parity
    /// of their signs (two informative features give XOR).
    Parity,
}

/// Parameters of the synthetic two-class generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub class_separation: f64,
    pub label_flip_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub pattern: SynthPattern,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_rows < 2 {
            return fail("n_rows must be at least 2");
        }
        if self.n_features < 1 {
            return fail("n_features must be at least 1");
        }
        if self.n_informative > self.n_features {
            return fail("n_informative exceeds n_features");
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return fail("class_separation must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.label_flip_rate) {
            return fail("label_flip_rate must lie in [0, 1)");
        }
        if self.pattern == SynthPattern::Parity && self.n_informative == 0 {
            return fail("parity pattern needs at least one informative feature");
        }
        Ok(())
    }
}

/// Generates a balanced two-class dataset; equal specs give identical output.
pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let n = spec.n_rows;
    let d = spec.n_features;

    let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    labels.shuffle(&mut rng);

    let half = spec.class_separation / 2.0;
    let mut values = Vec::with_capacity(n * d);
    for &y in &labels {
        match spec.pattern {
            SynthPattern::Clusters => {
                let mean = if y == 1 { half } else { -half };
                for _ in 0..spec.n_informative {
                    values.push(mean + rng.sample::<f64, _>(StandardNormal));
                }
            }
            SynthPattern::Parity => {
                let mut negatives = 0usize;
                for j in 0..spec.n_informative {
                    let positive = if j + 1 < spec.n_informative {
                        rng.random::<bool>()
                    } else {
                        // last sign fixes the parity: odd count of negative signs <=> label 1
                        (negatives % 2 == 1) == (y == 1)
                    };
                    if !positive {
                        negatives += 1;
                    }
                    let mean = if positive { half } else { -half };
                    values.push(mean + rng.sample::<f64, _>(StandardNormal));
                }
            }
        }
        for _ in spec.n_informative..d {
            values.push(rng.sample::<f64, _>(StandardNormal));
        }
    }

    if spec.label_flip_rate > 0.0 {
        let [mut neg, mut pos]: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &l) in labels.iter().enumerate() {
            if l == 1 {
                pos.push(i);
            } else {
                neg.push(i);
            }
        }
        // equal flips per class keep the classes balanced
        let per_class = ((spec.label_flip_rate * n as f64) / 2.0).round() as usize;
        let per_class = per_class.min(pos.len()).min(neg.len());
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        for &i in pos[..per_class].iter().chain(&neg[..per_class]) {
            labels[i] ^= 1;
        }
    }

    let names = feature_names(d);
    Dataset::new(
        FeatureSchema::numeric(&names)?,
        Matrix::from_vec(n, d, values)?,
        labels,
        (0..n).collect(),
        default_label_encoding(),
    )
}
