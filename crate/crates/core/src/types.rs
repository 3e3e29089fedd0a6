//! Shared value types: relevance maps, regions of interest, prediction
//! tables and metric reports.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RddtResult;

/// A 2D grid of signed per-pixel relevance.
///
/// Values are held at single precision, the precision they have on disk,
/// and every accessor widens to `f64` so sums never accumulate in `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl RelevanceMap {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidMap(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidMap(format!(
                "{height}x{width} map needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Builds a map from double-precision values, rounding each to `f32`.
    pub fn from_f64(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        Self::new(height, width, values.iter().map(|&v| v as f32).collect())
    }

    /// Builds a map from a row-major nested array; rows must be equally long.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::InvalidMap("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::from_f64(height, width, &flat)
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col] as f64
    }

    /// Sum of all values in double precision.
    pub fn total(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    pub fn total_abs(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64).abs()).sum()
    }

    pub(crate) fn ensure_same_shape(&self, other: &RelevanceMap) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(crate::error::shape_mismatch(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle, 0-based with a top-left origin. Rows
/// `top..top + height` and columns `left..left + width` are inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Roi {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Roi {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self {
            top,
            left,
            height,
            width,
        }
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    /// Checks containment in a `map_height` x `map_width` grid and that the
    /// region is strictly smaller than the grid.
    pub fn validate_for(&self, map_height: usize, map_width: usize) -> Result<()> {
        let out = || Error::OutOfBounds {
            roi: self.to_string(),
            height: map_height,
            width: map_width,
        };
        if self.height == 0 || self.width == 0 {
            return Err(out());
        }
        let bottom = self.top.checked_add(self.height).ok_or_else(out)?;
        let right = self.left.checked_add(self.width).ok_or_else(out)?;
        if bottom > map_height || right > map_width {
            return Err(out());
        }
        if self.area() >= map_height * map_width {
            return Err(Error::RoiCoversWholeImage {
                height: map_height,
                width: map_width,
            });
        }
        Ok(())
    }

    /// `(row, col)` pairs inside the region, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.top..self.top + self.height)
            .flat_map(move |r| (self.left..self.left + self.width).map(move |c| (r, c)))
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top && row < self.top + self.height && col >= self.left && col < self.left + self.width
    }
}

impl fmt::Display for Roi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(top={}, left={}, height={}, width={})",
            self.top, self.left, self.height, self.width
        )
    }
}

/// Checks that `roi` lies inside `map` and is strictly smaller than it.
pub fn validate_roi(map: &RelevanceMap, roi: &Roi) -> Result<()> {
    roi.validate_for(map.height(), map.width())
}

/// One prediction: binary target, prediction and protected attribute, plus
/// the positive-class score the prediction was thresholded from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub id: String,
    pub y_true: u8,
    pub y_pred: u8,
    pub pa: u8,
    pub score: f64,
}

impl SampleRow {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("y_true", self.y_true), ("y_pred", self.y_pred), ("pa", self.pa)] {
            if v > 1 {
                return Err(Error::BadValue(format!("{}: {name}={v} is not binary", self.id)));
            }
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::BadValue(format!(
                "{}: score={} is outside [0, 1]",
                self.id, self.score
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleTable {
    rows: Vec<SampleRow>,
}

impl SampleTable {
    pub fn new(rows: Vec<SampleRow>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            row.validate()?;
            if !seen.insert(row.id.as_str()) {
                return Err(Error::DuplicateId(row.id.clone()));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[SampleRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Same rows with predictions replaced by `predict(row)`.
    pub fn with_predictions(&self, mut predict: impl FnMut(&SampleRow) -> u8) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| SampleRow {
                y_pred: predict(r),
                ..r.clone()
            })
            .collect();
        Self { rows }
    }
}

/// The fixed registry of reportable metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricName {
    #[serde(rename = "RRF")]
    Rrf,
    #[serde(rename = "ADR")]
    Adr,
    #[serde(rename = "DIF")]
    Dif,
    #[serde(rename = "RDDT")]
    Rddt,
    EqualizedOdds,
    Accuracy,
}

impl MetricName {
    pub const ALL: [MetricName; 6] = [
        MetricName::Rrf,
        MetricName::Adr,
        MetricName::Dif,
        MetricName::Rddt,
        MetricName::EqualizedOdds,
        MetricName::Accuracy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Rrf => "RRF",
            MetricName::Adr => "ADR",
            MetricName::Dif => "DIF",
            MetricName::Rddt => "RDDT",
            MetricName::EqualizedOdds => "EqualizedOdds",
            MetricName::Accuracy => "Accuracy",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::BadValue(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Flag(bool),
    Real(f64),
}

impl MetricValue {
    /// Numeric view; flags become 0 or 1.
    pub fn as_f64(self) -> f64 {
        match self {
            MetricValue::Flag(b) => b as u8 as f64,
            MetricValue::Real(v) => v,
        }
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Flag(b) => write!(f, "{}", *b as u8),
            MetricValue::Real(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    /// Absent for reports computed from maps on disk.
    pub seed: Option<u64>,
    pub phi_target: Option<f64>,
    pub method: String,
    pub attribution: String,
}

/// Metric values for one (method, phi, seed) cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub meta: ReportMeta,
    pub entries: BTreeMap<MetricName, MetricValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rddt: Option<RddtResult>,
}

impl MetricReport {
    pub fn new(meta: ReportMeta) -> Self {
        Self {
            meta,
            entries: BTreeMap::new(),
            rddt: None,
        }
    }

    pub fn set(&mut self, name: MetricName, value: MetricValue) {
        self.entries.insert(name, value);
    }

    pub fn set_real(&mut self, name: MetricName, value: f64) {
        self.set(name, MetricValue::Real(value));
    }

    pub fn get(&self, name: MetricName) -> Option<MetricValue> {
        self.entries.get(&name).copied()
    }

    pub fn set_rddt(&mut self, result: RddtResult) {
        self.set(MetricName::Rddt, MetricValue::Flag(result.decision));
        self.rddt = Some(result);
    }
}
