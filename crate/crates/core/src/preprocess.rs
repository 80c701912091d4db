//! Imputation, nominal encoding and `[0,1]` normalization, plus the exact
//! inverse used to turn generated rows back into a [`Dataset`].
//!
//! Numeric attributes map through `(x - min) / span`. Nominal attributes are
//! either coded as integers `1..=k` and normalized the same way, or expanded
//! into `k` one-hot columns. Two-category nominals always use a single 0/1
//! column, since one-hot expansion would only duplicate it. The class is kept
//! aside as an integer label (its one-hot form is available on demand).

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, Cell, Dataset, DatasetError, Schema};

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("attribute `{0}` has no observed values")]
    AllMissingColumn(String),
    #[error("dataset contains missing values; impute first")]
    MissingValues,
    #[error("encoded width mismatch: expected {expected} columns, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("schema of the data differs from the fitted transform")]
    SchemaMismatch,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Numeric,
    NominalInteger,
    NominalBinary,
}

/// Value substituted for missing cells of one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillValue {
    Numeric(f64),
    Category(usize),
}

impl From<FillValue> for Cell {
    fn from(v: FillValue) -> Self {
        match v {
            FillValue::Numeric(x) => Cell::Numeric(x),
            FillValue::Category(c) => Cell::Category(c),
        }
    }
}

/// Encoding and normalization parameters of one source attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeTransform {
    /// Index of the attribute in the schema.
    pub attribute: usize,
    pub encoding: Encoding,
    pub min: f64,
    /// `max - min`; zero only for constant attributes.
    pub span: f64,
    /// Number of categories (0 for numeric attributes).
    pub category_count: usize,
    /// First encoded column and number of encoded columns.
    pub column: usize,
    pub width: usize,
    pub fill: Option<FillValue>,
}

impl AttributeTransform {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.column..self.column + self.width
    }

    fn normalize(&self, x: f64) -> f64 {
        if self.span == 0.0 {
            0.5
        } else {
            (x - self.min) / self.span
        }
    }

    /// Inverse of `normalize`. Rounding can send several neighbouring floats
    /// to the same normalized value; among those the one with the shortest
    /// decimal form is returned, which recovers values read from text
    /// exactly unless they carry close to 17 significant digits.
    fn denormalize(&self, v: f64) -> f64 {
        if self.span == 0.0 {
            return self.min;
        }
        let y = v * self.span + self.min;
        let Some(p) = self.preimage_near(y, v) else {
            return y;
        };
        for digits in 1..17 {
            if let Ok(z) = format!("{:.*e}", digits - 1, p).parse::<f64>() {
                if self.normalize(z) == v {
                    return z;
                }
            }
        }
        p
    }

    fn preimage_near(&self, y: f64, v: f64) -> Option<f64> {
        if self.normalize(y) == v {
            return Some(y);
        }
        let (mut lo, mut hi) = (y, y);
        for _ in 0..8 {
            hi = hi.next_up();
            lo = lo.next_down();
            if self.normalize(hi) == v {
                return Some(hi);
            }
            if self.normalize(lo) == v {
                return Some(lo);
            }
        }
        None
    }
}

/// Everything needed to encode new data the same way and to decode
/// generated rows: per-attribute transforms and the source schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub schema: Schema,
    pub attributes: Vec<AttributeTransform>,
    pub width: usize,
}

/// Encoded features in `[0,1]` with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub features: Vec<Vec<f64>>,
    pub classes: Vec<usize>,
    pub class_count: usize,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_one_hot(&self, row: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.class_count];
        v[self.classes[row]] = 1.0;
        v
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Fill values per schema attribute: column median for numerics, modal
/// category (lowest index on ties) for nominals, `None` for the class.
pub fn fill_values(d: &Dataset) -> Result<Vec<Option<FillValue>>, PreprocessError> {
    let schema = d.schema();
    let mut fills = vec![None; schema.len()];
    for j in schema.feature_indices() {
        let attr = &schema.attributes()[j];
        fills[j] = Some(match attr.kind {
            AttributeKind::Numeric => {
                let mut vals: Vec<f64> = d.rows().iter().filter_map(|r| r[j].as_numeric()).collect();
                if vals.is_empty() {
                    return Err(PreprocessError::AllMissingColumn(attr.name.clone()));
                }
                FillValue::Numeric(median(&mut vals))
            }
            AttributeKind::Nominal => {
                let mut counts = vec![0usize; attr.categories.len()];
                for r in d.rows() {
                    if let Some(c) = r[j].as_category() {
                        counts[c] += 1;
                    }
                }
                if counts.iter().all(|&c| c == 0) {
                    return Err(PreprocessError::AllMissingColumn(attr.name.clone()));
                }
                let best = counts.iter().enumerate().max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i))).map(|(i, _)| i).unwrap();
                FillValue::Category(best)
            }
        });
    }
    Ok(fills)
}

fn apply_fills(d: &Dataset, fills: &[Option<FillValue>]) -> Result<Dataset, PreprocessError> {
    let rows = d
        .rows()
        .iter()
        .map(|r| {
            r.iter()
                .zip(fills)
                .map(|(cell, fill)| match (cell, fill) {
                    (Cell::Missing, Some(f)) => Cell::from(*f),
                    _ => *cell,
                })
                .collect()
        })
        .collect();
    Ok(Dataset::new(d.schema().clone(), rows)?)
}

/// Median/mode imputation. Returns the completed dataset and the fill value
/// used for every feature attribute.
pub fn impute(d: &Dataset) -> Result<(Dataset, Vec<Option<FillValue>>), PreprocessError> {
    let fills = fill_values(d)?;
    Ok((apply_fills(d, &fills)?, fills))
}

/// Fit transforms on a missing-free dataset and encode it.
pub fn encode(d: &Dataset, nominal_as_binary: bool) -> Result<(EncodedDataset, TransformRecord), PreprocessError> {
    if d.has_missing() {
        return Err(PreprocessError::MissingValues);
    }
    let record = fit_transform(d, nominal_as_binary, None);
    let encoded = record.encode_complete(d);
    Ok((encoded, record))
}

/// Impute, then encode; the fill values are stored in the record so that
/// [`TransformRecord::apply`] can complete new data the same way.
pub fn prepare(d: &Dataset, nominal_as_binary: bool) -> Result<(EncodedDataset, TransformRecord), PreprocessError> {
    let (complete, fills) = impute(d)?;
    let record = fit_transform(&complete, nominal_as_binary, Some(&fills));
    let encoded = record.encode_complete(&complete);
    Ok((encoded, record))
}

fn fit_transform(d: &Dataset, nominal_as_binary: bool, fills: Option<&[Option<FillValue>]>) -> TransformRecord {
    let schema = d.schema();
    let mut attributes = Vec::new();
    let mut column = 0;
    for j in schema.feature_indices() {
        let attr = &schema.attributes()[j];
        let fill = fills.and_then(|f| f[j]);
        let t = match attr.kind {
            AttributeKind::Numeric => {
                let (min, max) = d
                    .rows()
                    .iter()
                    .filter_map(|r| r[j].as_numeric())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                AttributeTransform { attribute: j, encoding: Encoding::Numeric, min, span: max - min, category_count: 0, column, width: 1, fill }
            }
            AttributeKind::Nominal => {
                let k = attr.categories.len();
                if nominal_as_binary && k > 2 {
                    AttributeTransform { attribute: j, encoding: Encoding::NominalBinary, min: 0.0, span: 1.0, category_count: k, column, width: k, fill }
                } else {
                    // codes 1..=k over the declared categories
                    AttributeTransform {
                        attribute: j,
                        encoding: Encoding::NominalInteger,
                        min: 1.0,
                        span: (k - 1) as f64,
                        category_count: k,
                        column,
                        width: 1,
                        fill,
                    }
                }
            }
        };
        column += t.width;
        attributes.push(t);
    }
    TransformRecord { schema: schema.clone(), attributes, width: column }
}

impl TransformRecord {
    pub fn class_count(&self) -> usize {
        self.schema.class_count()
    }

    pub fn class_categories(&self) -> &[String] {
        &self.schema.class_attribute().categories
    }

    /// Encoded columns that come from numeric attributes.
    pub fn numeric_columns(&self) -> Vec<usize> {
        self.attributes.iter().filter(|t| t.encoding == Encoding::Numeric).map(|t| t.column).collect()
    }

    fn encode_row(&self, row: &[Cell], out: &mut Vec<f64>) {
        for t in &self.attributes {
            match (t.encoding, row[t.attribute]) {
                (Encoding::Numeric, Cell::Numeric(x)) => out.push(t.normalize(x)),
                (Encoding::NominalInteger, Cell::Category(c)) => out.push(t.normalize((c + 1) as f64)),
                (Encoding::NominalBinary, Cell::Category(c)) => out.extend((0..t.width).map(|i| if i == c { 1.0 } else { 0.0 })),
                (_, cell) => unreachable!("cell {cell:?} does not fit encoding {:?}", t.encoding),
            }
        }
    }

    fn encode_complete(&self, d: &Dataset) -> EncodedDataset {
        let features = d
            .rows()
            .iter()
            .map(|r| {
                let mut v = Vec::with_capacity(self.width);
                self.encode_row(r, &mut v);
                v
            })
            .collect();
        EncodedDataset { features, classes: d.classes(), class_count: self.class_count() }
    }

    /// Encode data with the frozen parameters. Missing cells are filled with
    /// the stored imputation values; values outside the fitted range encode
    /// outside `[0,1]`.
    pub fn apply(&self, d: &Dataset) -> Result<EncodedDataset, PreprocessError> {
        if d.schema() != &self.schema {
            return Err(PreprocessError::SchemaMismatch);
        }
        if !d.has_missing() {
            return Ok(self.encode_complete(d));
        }
        let mut fills = vec![None; self.schema.len()];
        for t in &self.attributes {
            fills[t.attribute] = t.fill;
        }
        if d.rows().iter().any(|r| r.iter().zip(&fills).any(|(c, f)| c.is_missing() && f.is_none())) {
            return Err(PreprocessError::MissingValues);
        }
        Ok(self.encode_complete(&apply_fills(d, &fills)?))
    }

    /// Map encoded rows (plus class labels) back to the source schema.
    pub fn decode(&self, rows: &[Vec<f64>], classes: &[usize]) -> Result<Dataset, PreprocessError> {
        if rows.len() != classes.len() {
            return Err(PreprocessError::WidthMismatch { expected: rows.len(), found: classes.len() });
        }
        let ci = self.schema.class_index();
        let mut out = Vec::with_capacity(rows.len());
        for (row, &class) in rows.iter().zip(classes) {
            if row.len() != self.width {
                return Err(PreprocessError::WidthMismatch { expected: self.width, found: row.len() });
            }
            let mut cells = vec![Cell::Missing; self.schema.len()];
            cells[ci] = Cell::Category(class);
            for t in &self.attributes {
                cells[t.attribute] = match t.encoding {
                    Encoding::Numeric => Cell::Numeric(t.denormalize(row[t.column])),
                    Encoding::NominalInteger => {
                        let code = (row[t.column] * t.span + 1.0).round();
                        let code = if code.is_nan() { 1.0 } else { code.clamp(1.0, t.category_count as f64) };
                        Cell::Category(code as usize - 1)
                    }
                    Encoding::NominalBinary => {
                        let block = &row[t.columns()];
                        let mut best = 0;
                        for (i, &v) in block.iter().enumerate() {
                            if v > block[best] {
                                best = i;
                            }
                        }
                        Cell::Category(best)
                    }
                };
            }
            out.push(cells);
        }
        Ok(Dataset::new(self.schema.clone(), out)?)
    }
}
