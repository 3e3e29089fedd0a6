//! File formats.
//!
//! Relevance map (`.sfmap`), all integers little-endian:
//!
//! ```text
//! "SFMAP1"    6 bytes
//! height      u32
//! width       u32
//! payload     height * width f32, row-major
//! ```
//!
//! Readers reject malformed input instead of repairing it.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::LabeledImage;
use crate::error::{Error, Result};
use crate::types::{MetricName, MetricReport, RelevanceMap, Roi, SampleRow, SampleTable};

pub const MAP_MAGIC: &[u8; 6] = b"SFMAP1";
pub const MAP_EXTENSION: &str = "sfmap";
pub const TABLE_HEADER: [&str; 5] = ["id", "y_true", "y_pred", "pa", "score"];
pub const DATASET_INDEX: &str = "index.csv";
const DATASET_HEADER: [&str; 4] = ["id", "y", "pa", "path"];

pub fn encode_map(map: &RelevanceMap) -> Vec<u8> {
    let mut buf = Vec::with_capacity(14 + 4 * map.len());
    buf.extend_from_slice(MAP_MAGIC);
    buf.extend_from_slice(&(map.height() as u32).to_le_bytes());
    buf.extend_from_slice(&(map.width() as u32).to_le_bytes());
    for v in map.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_map(bytes: &[u8]) -> Result<RelevanceMap> {
    if bytes.len() < MAP_MAGIC.len() || &bytes[..MAP_MAGIC.len()] != MAP_MAGIC {
        return Err(Error::BadMagic { expected: "SFMAP1" });
    }
    if bytes.len() < 14 {
        return Err(Error::Truncated(format!("{}-byte header is incomplete", bytes.len())));
    }
    let height = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let width = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    if height == 0 || width == 0 {
        return Err(Error::BadHeader(format!("zero dimension {height}x{width}")));
    }
    let payload = &bytes[14..];
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::BadHeader(format!("{height}x{width} overflows")))?;
    if payload.len() < expected {
        return Err(Error::Truncated(format!(
            "{height}x{width} map needs {} floats, found {}",
            height * width,
            payload.len() / 4
        )));
    }
    if payload.len() > expected {
        return Err(Error::BadValue(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    RelevanceMap::new(height, width, values)
}

pub fn write_map(map: &RelevanceMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_map(map)).map_err(|e| Error::from(e).at(path))
}

pub fn read_map(path: impl AsRef<Path>) -> Result<RelevanceMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_map(&bytes).map_err(|e| e.at(path))
}

/// Sorted `.sfmap` file names in `dir`.
pub fn list_maps(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::from(e).at(dir))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == MAP_EXTENSION) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Dataset-level region with optional per-sample overrides.
///
/// ```json
/// {"top": 10, "left": 5, "height": 5, "width": 6,
///  "overrides": {"s0042": {"top": 9, "left": 5, "height": 5, "width": 6}}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiFile {
    #[serde(flatten)]
    pub default: Roi,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, Roi>,
}

impl RoiFile {
    pub fn new(default: Roi) -> Self {
        Self {
            default,
            overrides: BTreeMap::new(),
        }
    }

    /// Region for a sample id (a map file stem), falling back to the default.
    pub fn roi_for(&self, id: &str) -> Roi {
        self.overrides.get(id).copied().unwrap_or(self.default)
    }

    pub fn validate_for(&self, height: usize, width: usize) -> Result<()> {
        self.default.validate_for(height, width)?;
        for roi in self.overrides.values() {
            roi.validate_for(height, width)?;
        }
        Ok(())
    }
}

pub fn read_roi_file(path: impl AsRef<Path>) -> Result<RoiFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).at(path))
}

pub fn write_roi_file(roi: &RoiFile, path: impl AsRef<Path>) -> Result<()> {
    write_json(roi, path)
}

/// Formats `v` with `digits` significant digits, without exponent, trimming
/// trailing zeros.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

fn parse_binary(field: &str, name: &str, line: u64) -> Result<u8> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(Error::BadValue(format!("line {line}: {name}={field:?} is not 0 or 1"))),
    }
}

/// Reads a prediction table. Scores carry single precision: they are
/// rounded to the nearest `f32` on read, which makes the 9-digit text form
/// round-trip exactly.
pub fn read_table_from(reader: impl std::io::Read) -> Result<SampleTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(TABLE_HEADER.iter().copied()) {
        return Err(Error::BadHeader(format!(
            "expected {:?}, found {:?}",
            TABLE_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::BadValue(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let score: f64 = record[4]
            .parse()
            .map_err(|_| Error::BadValue(format!("line {line}: score={:?} is not a number", &record[4])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::BadValue(format!("line {line}: score={score} is outside [0, 1]")));
        }
        rows.push(SampleRow {
            id,
            y_true: parse_binary(&record[1], "y_true", line)?,
            y_pred: parse_binary(&record[2], "y_pred", line)?,
            pa: parse_binary(&record[3], "pa", line)?,
            score: score as f32 as f64,
        });
    }
    SampleTable::new(rows)
}

pub fn read_table(path: impl AsRef<Path>) -> Result<SampleTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::from(e).at(path))?;
    read_table_from(file).map_err(|e| e.at(path))
}

pub fn write_table_to(table: &SampleTable, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TABLE_HEADER)?;
    for r in table.rows() {
        w.write_record([
            r.id.clone(),
            r.y_true.to_string(),
            r.y_pred.to_string(),
            r.pa.to_string(),
            format_significant(r.score, 9),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table(table: &SampleTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::from(e).at(path))?;
    write_table_to(table, file)
}

/// Writes `index.csv` plus one `.sfmap` per image under `dir/images/`.
pub fn write_dataset(samples: &[LabeledImage], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("images"))?;
    let mut w = csv::Writer::from_path(dir.join(DATASET_INDEX))?;
    w.write_record(DATASET_HEADER)?;
    for s in samples {
        let rel = format!("images/{}.{MAP_EXTENSION}", s.id);
        let map = RelevanceMap::from_f64(s.height, s.width, &s.pixels)?;
        write_map(&map, dir.join(&rel))?;
        w.write_record([s.id.as_str(), &s.y.to_string(), &s.pa.to_string(), &rel])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<LabeledImage>> {
    let dir = dir.as_ref();
    let index = dir.join(DATASET_INDEX);
    let mut rdr = csv::Reader::from_path(&index).map_err(|e| Error::from(e).at(&index))?;
    if rdr.headers()?.iter().ne(DATASET_HEADER.iter().copied()) {
        return Err(Error::BadHeader(format!("expected {:?}", DATASET_HEADER.join(","))).at(&index));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::BadValue(e.to_string()).at(&index))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id).at(&index));
        }
        let map = read_map(dir.join(&record[3]))?;
        out.push(LabeledImage {
            id,
            height: map.height(),
            width: map.width(),
            pixels: map.values().iter().map(|&v| v as f64).collect(),
            y: parse_binary(&record[1], "y", line).map_err(|e| e.at(&index))?,
            pa: parse_binary(&record[2], "pa", line).map_err(|e| e.at(&index))?,
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::from(e).at(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).at(path))
}

/// One row per report: metadata columns then every registry metric, blank
/// when absent.
pub fn write_reports_csv(reports: &[MetricReport], path: impl AsRef<Path>) -> Result<()> {
    let path: PathBuf = path.as_ref().into();
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::from(e).at(&path))?;
    let mut header = vec!["method", "phi", "seed", "attribution"];
    header.extend(MetricName::ALL.iter().map(|m| m.as_str()));
    w.write_record(&header)?;
    for r in reports {
        let mut record = vec![
            r.meta.method.clone(),
            r.meta.phi_target.map(|p| p.to_string()).unwrap_or_default(),
            r.meta.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.meta.attribution.clone(),
        ];
        record.extend(
            MetricName::ALL
                .iter()
                .map(|&m| r.get(m).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
