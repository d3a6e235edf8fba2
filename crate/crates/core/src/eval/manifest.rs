//! Labeled dataset indexes: audio manifests and extracted feature tables.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{SalientFeatures, FEATURE_DIM, FEATURE_NAMES};

pub const MANIFEST_HEADER: [&str; 3] = ["path", "label_coarse", "label_fine"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub path: String,
    pub coarse: usize,
    pub fine: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks label ranges and path uniqueness.
    pub fn validate(&self, coarse_classes: usize, fine_classes: usize) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, r) in self.rows.iter().enumerate() {
            if r.coarse >= coarse_classes {
                return Err(Error::contract(format!(
                    "row {i} ({}): coarse label {} outside 0..{coarse_classes}",
                    r.path, r.coarse
                )));
            }
            if let Some(f) = r.fine {
                if f >= fine_classes {
                    return Err(Error::contract(format!(
                        "row {i} ({}): fine label {f} outside 0..{fine_classes}",
                        r.path
                    )));
                }
            }
            if !seen.insert(r.path.as_str()) {
                return Err(Error::contract(format!("duplicate path {}", r.path)));
            }
        }
        Ok(())
    }
}

/// Resolves a manifest entry relative to the directory holding the manifest.
pub fn resolve_entry(manifest_path: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn parse_label(field: &str, what: &str, line: usize) -> Result<Option<usize>> {
    let v: i64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("line {line}"), format!("{what} '{field}' is not an integer")))?;
    match v {
        -1 => Ok(None),
        v if v >= 0 => Ok(Some(v as usize)),
        _ => Err(Error::parse(format!("line {line}"), format!("{what} {v} is negative"))),
    }
}

fn label_field(l: Option<usize>) -> String {
    l.map_or("-1".to_string(), |v| v.to_string())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    if got != want {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected header '{}', found '{}'", want.join(","), got.join(",")),
        ));
    }
    Ok(())
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(MANIFEST_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &manifest.rows {
        w.write_record([r.path.clone(), r.coarse.to_string(), label_field(r.fine)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, &MANIFEST_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let coarse = parse_label(&rec[1], "label_coarse", line)?
            .ok_or_else(|| Error::parse(format!("line {line}"), "coarse label is required"))?;
        rows.push(ManifestRow {
            path: rec[0].to_string(),
            coarse,
            fine: parse_label(&rec[2], "label_fine", line)?,
        });
    }
    Ok(DatasetManifest { rows })
}

/// One recording's features with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub path: String,
    pub coarse: Option<usize>,
    pub fine: Option<usize>,
    pub features: SalientFeatures,
}

pub fn feature_header() -> Vec<&'static str> {
    let mut h = MANIFEST_HEADER.to_vec();
    h.extend_from_slice(&FEATURE_NAMES);
    h
}

pub fn write_feature_csv(rows: &[FeatureRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(feature_header()).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.path.clone(), label_field(r.coarse), label_field(r.fine)];
        rec.extend(r.features.to_array().iter().map(f64::to_string));
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, &feature_header())?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let mut v = [0.0; FEATURE_DIM];
        for (d, slot) in v.iter_mut().enumerate() {
            let field = &rec[3 + d];
            *slot = field.trim().parse().map_err(|_| {
                Error::parse(format!("line {line}"), format!("{} '{field}' is not a number", FEATURE_NAMES[d]))
            })?;
        }
        rows.push(FeatureRow {
            path: rec[0].to_string(),
            coarse: parse_label(&rec[1], "label_coarse", line)?,
            fine: parse_label(&rec[2], "label_fine", line)?,
            features: SalientFeatures::from_array(v),
        });
    }
    Ok(rows)
}

/// True when the CSV at `path` has the feature-table header rather than the
/// plain manifest header.
pub fn is_feature_csv(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    Ok(first.split(',').count() > MANIFEST_HEADER.len())
}
