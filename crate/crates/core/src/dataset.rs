//! Mixed-type tabular datasets with an explicit schema.
//!
//! A [`Dataset`] is a list of rows of [`Cell`]s typed by a [`Schema`]. Exactly
//! one attribute is the class; it is nominal and never missing. Schemas are
//! never inferred: they come from a sidecar JSON document or are built in code.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;

/// Marker written for missing cells; `""` is also accepted on input.
pub const MISSING_MARKER: &str = "?";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("missing class value at row {row}")]
    MissingClassValue { row: usize },
    #[error("class `{class}` has {count} instance(s); at least 2 are needed to split")]
    ClassTooSmall { class: String, count: usize },
    #[error("split fraction {0} is not in (0, 1)")]
    BadFraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Feature,
    Class,
}

/// One column of the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default)]
    pub role: Role,
}

impl AttributeSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numeric,
            categories: Vec::new(),
            role: Role::Feature,
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Nominal,
            categories: categories.into_iter().map(Into::into).collect(),
            role: Role::Feature,
        }
    }

    pub fn class<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            role: Role::Class,
            ..Self::nominal(name, categories)
        }
    }

    pub fn is_nominal(&self) -> bool {
        self.kind == AttributeKind::Nominal
    }

    pub fn category_index(&self, text: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == text)
    }
}

/// Validated list of attributes with exactly one nominal class attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AttributeSpec>", into = "Vec<AttributeSpec>")]
pub struct Schema {
    attributes: Vec<AttributeSpec>,
    class_index: usize,
}

impl Schema {
    pub fn new(attributes: Vec<AttributeSpec>) -> Result<Self, DatasetError> {
        let mut class_index = None;
        let mut names = HashSet::new();
        for (j, attr) in attributes.iter().enumerate() {
            if !names.insert(attr.name.as_str()) {
                return Err(DatasetError::InvalidSchema(format!("duplicate attribute name `{}`", attr.name)));
            }
            match attr.kind {
                AttributeKind::Nominal => {
                    if attr.categories.is_empty() {
                        return Err(DatasetError::InvalidSchema(format!("nominal attribute `{}` has no categories", attr.name)));
                    }
                    let mut seen = HashSet::new();
                    for c in &attr.categories {
                        if c.is_empty() || c == MISSING_MARKER {
                            return Err(DatasetError::InvalidSchema(format!("attribute `{}` uses a reserved category `{c}`", attr.name)));
                        }
                        if !seen.insert(c.as_str()) {
                            return Err(DatasetError::InvalidSchema(format!("attribute `{}` repeats category `{c}`", attr.name)));
                        }
                    }
                }
                AttributeKind::Numeric => {
                    if !attr.categories.is_empty() {
                        return Err(DatasetError::InvalidSchema(format!("numeric attribute `{}` lists categories", attr.name)));
                    }
                }
            }
            if attr.role == Role::Class {
                if class_index.replace(j).is_some() {
                    return Err(DatasetError::InvalidSchema("more than one class attribute".into()));
                }
                if !attr.is_nominal() || attr.categories.len() < 2 {
                    return Err(DatasetError::InvalidSchema(format!("class `{}` must be nominal with at least 2 categories", attr.name)));
                }
            }
        }
        let class_index = class_index.ok_or_else(|| DatasetError::InvalidSchema("no class attribute".into()))?;
        Ok(Self { attributes, class_index })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn class_attribute(&self) -> &AttributeSpec {
        &self.attributes[self.class_index]
    }

    pub fn class_count(&self) -> usize {
        self.class_attribute().categories.len()
    }

    /// Indices of the non-class attributes, in schema order.
    pub fn feature_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.attributes.len()).filter(move |&j| j != self.class_index)
    }
}

impl TryFrom<Vec<AttributeSpec>> for Schema {
    type Error = DatasetError;

    fn try_from(attributes: Vec<AttributeSpec>) -> Result<Self, Self::Error> {
        Schema::new(attributes)
    }
}

impl From<Schema> for Vec<AttributeSpec> {
    fn from(schema: Schema) -> Self {
        schema.attributes
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Numeric(f64),
    Category(usize),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match *self {
            Cell::Numeric(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<usize> {
        match *self {
            Cell::Category(c) => Some(c),
            _ => None,
        }
    }
}

/// Rows of cells typed by a schema. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Cell>>,
}

impl Dataset {
    /// Validates every cell against the schema. `rows` must be nonempty.
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::Parse { row: 0, col: 0, msg: "dataset has no rows".into() });
        }
        Self::validate_rows(&schema, &rows)?;
        Ok(Self { schema, rows })
    }

    fn validate_rows(schema: &Schema, rows: &[Vec<Cell>]) -> Result<(), DatasetError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(DatasetError::SchemaMismatch(format!("row {i} has {} cells, schema has {}", row.len(), schema.len())));
            }
            for (j, (cell, attr)) in row.iter().zip(schema.attributes()).enumerate() {
                let ok = match (cell, attr.kind) {
                    (Cell::Missing, _) => {
                        if j == schema.class_index() {
                            return Err(DatasetError::MissingClassValue { row: i });
                        }
                        true
                    }
                    (Cell::Numeric(v), AttributeKind::Numeric) => v.is_finite(),
                    (Cell::Category(c), AttributeKind::Nominal) => *c < attr.categories.len(),
                    _ => false,
                };
                if !ok {
                    return Err(DatasetError::Parse { row: i, col: j, msg: format!("invalid cell {cell:?} for `{}`", attr.name) });
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn into_rows(self) -> Vec<Vec<Cell>> {
        self.rows
    }

    pub fn class_of(&self, row: usize) -> usize {
        self.rows[row][self.schema.class_index()]
            .as_category()
            .expect("class cells are validated")
    }

    pub fn classes(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.class_of(i)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.schema.class_count()];
        for i in 0..self.len() {
            counts[self.class_of(i)] += 1;
        }
        counts
    }

    /// Column `j` as numeric values, `None` for missing cells.
    pub fn numeric_column(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[j].as_numeric()).collect()
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(Cell::is_missing)
    }

    /// New dataset holding the given rows (by index) in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset, DatasetError> {
        ensure_same_schema(self, other)?;
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(Dataset { schema: self.schema.clone(), rows })
    }

    /// Same rows, class labels replaced.
    pub fn with_classes(&self, classes: &[usize]) -> Result<Dataset, DatasetError> {
        if classes.len() != self.len() {
            return Err(DatasetError::SchemaMismatch("class vector length differs from row count".into()));
        }
        let ci = self.schema.class_index();
        let rows = self
            .rows
            .iter()
            .zip(classes)
            .map(|(r, &c)| {
                let mut r = r.clone();
                r[ci] = Cell::Category(c);
                r
            })
            .collect();
        Dataset::new(self.schema.clone(), rows)
    }
}

pub(crate) fn ensure_same_schema(a: &Dataset, b: &Dataset) -> Result<(), DatasetError> {
    if a.schema != b.schema {
        return Err(DatasetError::SchemaMismatch("datasets have different schemas".into()));
    }
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset, DatasetError> {
    read_csv(File::open(path)?, schema)
}

/// Load a CSV whose schema lives in a sidecar JSON file.
pub fn load_csv_with_sidecar(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let schema = Schema::from_json_file(schema_path)?;
    load_csv(path, &schema)
}

/// Parse CSV text with a header row. Row numbers in errors are 1-based data
/// rows; column numbers are 0-based.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DatasetError::Parse { row: 0, col: 0, msg: e.to_string() })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DatasetError::Parse { row: 0, col: 0, msg: "empty file".into() });
    }
    let names: Vec<&str> = headers.iter().collect();
    let expected: Vec<&str> = schema.attributes().iter().map(|a| a.name.as_str()).collect();
    if names != expected {
        return Err(DatasetError::SchemaMismatch(format!("header {names:?} does not match schema {expected:?}")));
    }

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| DatasetError::Parse { row: row_no, col: 0, msg: e.to_string() })?;
        if record.len() != schema.len() {
            return Err(DatasetError::Parse {
                row: row_no,
                col: record.len().min(schema.len()),
                msg: format!("expected {} fields, found {}", schema.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(schema.len());
        for (j, (field, attr)) in record.iter().zip(schema.attributes()).enumerate() {
            if field.is_empty() || field == MISSING_MARKER {
                if j == schema.class_index() {
                    return Err(DatasetError::MissingClassValue { row: row_no });
                }
                row.push(Cell::Missing);
                continue;
            }
            let cell = match attr.kind {
                AttributeKind::Numeric => {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| DatasetError::Parse { row: row_no, col: j, msg: format!("`{field}` is not a number") })?;
                    if !v.is_finite() {
                        return Err(DatasetError::Parse { row: row_no, col: j, msg: format!("`{field}` is not finite") });
                    }
                    Cell::Numeric(v)
                }
                AttributeKind::Nominal => Cell::Category(attr.category_index(field).ok_or_else(|| DatasetError::Parse {
                    row: row_no,
                    col: j,
                    msg: format!("unknown category `{field}` for `{}`", attr.name),
                })?),
            };
            row.push(cell);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DatasetError::Parse { row: 1, col: 0, msg: "no data rows".into() });
    }
    Dataset::new(schema.clone(), rows)
}

pub fn write_csv<W: Write>(writer: W, d: &Dataset) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| DatasetError::Io(std::io::Error::other(e));
    wtr.write_record(d.schema.attributes().iter().map(|a| a.name.as_str())).map_err(io)?;
    let mut fields = Vec::with_capacity(d.schema.len());
    for row in &d.rows {
        fields.clear();
        for (cell, attr) in row.iter().zip(d.schema.attributes()) {
            fields.push(match *cell {
                // `{}` on f64 prints the shortest string that parses back exactly.
                Cell::Numeric(v) => v.to_string(),
                Cell::Category(c) => attr.categories[c].clone(),
                Cell::Missing => MISSING_MARKER.to_string(),
            });
        }
        wtr.write_record(&fields).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, d: &Dataset) -> Result<(), DatasetError> {
    write_csv(File::create(path)?, d)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Stratified random split. The first part receives `round(fraction * count)`
/// instances of every class (half rounded up), then the largest class is
/// nudged so that the first part has `round(fraction * n)` rows in total.
/// Both parts keep the input row order.
pub fn stratified_split(d: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::BadFraction(fraction));
    }
    let classes = d.schema.class_count();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for i in 0..d.len() {
        members[d.class_of(i)].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < 2 {
            return Err(DatasetError::ClassTooSmall { class: d.schema.class_attribute().categories[c].clone(), count: m.len() });
        }
    }

    let mut take: Vec<usize> = members.iter().map(|m| round_half_up(fraction * m.len() as f64).min(m.len())).collect();
    let target = round_half_up(fraction * d.len() as f64);
    let current: usize = take.iter().sum();
    if current != target {
        let largest = (0..classes).max_by_key(|&c| (members[c].len(), std::cmp::Reverse(c))).unwrap_or(0);
        if current > target {
            take[largest] = take[largest].saturating_sub(current - target);
        } else {
            take[largest] = (take[largest] + (target - current)).min(members[largest].len());
        }
    }

    let mut rng = rng::stream(seed, 0);
    let mut first = Vec::with_capacity(target);
    let mut second = Vec::with_capacity(d.len() - target);
    for (m, &k) in members.iter_mut().zip(&take) {
        m.shuffle(&mut rng);
        first.extend_from_slice(&m[..k]);
        second.extend_from_slice(&m[k..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((d.select(&first), d.select(&second)))
}
