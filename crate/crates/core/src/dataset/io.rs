//! On-disk interchange layout.
//!
//! ```text
//! <dir>/meta.json          name, dims, class names, seen/unseen ids
//! <dir>/attributes.csv     header a0..a{S-1}, one row per class id
//! <dir>/train_seen.csv     header label,f0..f{V-1}
//! <dir>/test_unseen.csv    same layout, labels are evaluation-only
//! <dir>/test_seen.csv      optional, same layout
//! ```
//!
//! With the binary feature format each sample set is a directory holding
//! `features.f32` (little-endian row-major f32) and `header.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AttributeMatrix, ClassId, ClassSplit, DatasetMeta, SampleSet, ZslDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    #[default]
    Csv,
    F32,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    schema_version: u32,
    name: String,
    feature_dim: usize,
    attribute_dim: usize,
    class_names: Vec<String>,
    seen: Vec<usize>,
    unseen: Vec<usize>,
    #[serde(default)]
    evaluation_only: Vec<String>,
    #[serde(default)]
    feature_format: FeatureFormat,
}

#[derive(Debug, Serialize, Deserialize)]
struct BinaryHeader {
    schema_version: u32,
    rows: usize,
    cols: usize,
    dtype: String,
    byte_order: String,
    layout: String,
    labels: Vec<i64>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn parse_f64(file: &str, row: usize, field: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        file: file.to_string(),
        row,
        message: format!("not a number: {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            file: file.to_string(),
            row,
            message: format!("non-finite value {field:?}"),
        });
    }
    Ok(v)
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let name = file_label(path);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            file: name.clone(),
            row,
            message: e.to_string(),
        })?;
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(out)
}

fn read_attributes(path: &Path, dim: usize) -> Result<Matrix> {
    let name = file_label(path);
    let rows = read_csv_rows(path)?;
    let mut m = Matrix::empty(dim);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                context: name,
                row: i,
                expected: dim,
                found: r.len(),
            });
        }
        let vals = r.iter().map(|f| parse_f64(&name, i, f)).collect::<Result<Vec<_>>>()?;
        m.push_row(&vals);
    }
    Ok(m)
}

fn check_label(context: &str, row: usize, raw: i64, n_classes: usize) -> Result<ClassId> {
    if raw < 0 || raw as usize >= n_classes {
        return Err(Error::LabelOutOfRange {
            context: context.to_string(),
            row,
            label: raw,
        });
    }
    Ok(ClassId(raw as usize))
}

fn read_sample_csv(path: &Path, dim: usize, n_classes: usize) -> Result<SampleSet> {
    let name = file_label(path);
    let rows = read_csv_rows(path)?;
    let mut features = Matrix::empty(dim);
    let mut labels = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim + 1 {
            return Err(Error::DimensionMismatch {
                context: name,
                row: i,
                expected: dim,
                found: r.len().saturating_sub(1),
            });
        }
        let raw: i64 = r[0].trim().parse().map_err(|_| Error::Parse {
            file: name.clone(),
            row: i,
            message: format!("bad label {:?}", r[0]),
        })?;
        labels.push(check_label(&name, i, raw, n_classes)?);
        let vals = r[1..].iter().map(|f| parse_f64(&name, i, f)).collect::<Result<Vec<_>>>()?;
        features.push_row(&vals);
    }
    SampleSet::labeled(features, labels)
}

fn read_sample_binary(dir: &Path, dim: usize, n_classes: usize) -> Result<SampleSet> {
    let header_path = dir.join("header.json");
    let header: BinaryHeader = serde_json::from_str(&read_text(&header_path)?)?;
    let context = format!("{}/features.f32", file_label(dir));
    if header.dtype != "f32" || header.byte_order != "little" || header.layout != "row-major" {
        return Err(Error::Parse {
            file: file_label(&header_path),
            row: 0,
            message: "unsupported binary layout".into(),
        });
    }
    if header.cols != dim {
        return Err(Error::DimensionMismatch {
            context,
            row: 0,
            expected: dim,
            found: header.cols,
        });
    }
    let blob_path = dir.join("features.f32");
    let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    if bytes.len() != header.rows * header.cols * 4 {
        return Err(Error::DimensionMismatch {
            context,
            row: bytes.len() / 4 / dim.max(1),
            expected: header.rows * header.cols * 4,
            found: bytes.len(),
        });
    }
    if header.labels.len() != header.rows {
        return Err(Error::LengthMismatch {
            left: header.labels.len(),
            right: header.rows,
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let features = Matrix::from_vec(header.rows, header.cols, data)?;
    let labels = header
        .labels
        .iter()
        .enumerate()
        .map(|(i, &l)| check_label(&context, i, l, n_classes))
        .collect::<Result<Vec<_>>>()?;
    SampleSet::labeled(features, labels)
}

fn read_sample_set(dir: &Path, stem: &str, format: FeatureFormat, dim: usize, n_classes: usize) -> Result<SampleSet> {
    match format {
        FeatureFormat::Csv => read_sample_csv(&dir.join(format!("{stem}.csv")), dim, n_classes),
        FeatureFormat::F32 => read_sample_binary(&dir.join(stem), dim, n_classes),
    }
}

fn sample_set_exists(dir: &Path, stem: &str, format: FeatureFormat) -> bool {
    match format {
        FeatureFormat::Csv => dir.join(format!("{stem}.csv")).exists(),
        FeatureFormat::F32 => dir.join(stem).join("header.json").exists(),
    }
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<ZslDataset> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let meta: MetaFile = serde_json::from_str(&read_text(&dir.join("meta.json"))?)?;
    let split = ClassSplit::new(
        meta.seen.iter().copied().map(ClassId).collect(),
        meta.unseen.iter().copied().map(ClassId).collect(),
    )?;
    let attrs = read_attributes(&dir.join("attributes.csv"), meta.attribute_dim)?;
    let attributes = AttributeMatrix::new(attrs)?;
    let n_classes = attributes.n_classes();
    for &c in split.seen.iter().chain(&split.unseen) {
        if c.0 >= n_classes {
            return Err(Error::LabelOutOfRange {
                context: "meta.json split".into(),
                row: 0,
                label: c.0 as i64,
            });
        }
    }
    let fmt = meta.feature_format;
    let train_seen = read_sample_set(dir, "train_seen", fmt, meta.feature_dim, n_classes)?;
    let test_unseen = read_sample_set(dir, "test_unseen", fmt, meta.feature_dim, n_classes)?;
    let test_seen = if sample_set_exists(dir, "test_seen", fmt) {
        Some(read_sample_set(dir, "test_seen", fmt, meta.feature_dim, n_classes)?)
    } else {
        None
    };
    let ds_meta = DatasetMeta {
        name: meta.name,
        feature_dim: meta.feature_dim,
        attribute_dim: meta.attribute_dim,
        class_names: meta.class_names,
    };
    ZslDataset::new(ds_meta, split, attributes, train_seen, test_unseen, test_seen)
}

fn csv_line(label: Option<ClassId>, row: &[f64]) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(row.len() + 1);
    if let Some(l) = label {
        parts.push(l.0.to_string());
    }
    parts.extend(row.iter().map(|v| format!("{v}")));
    parts.join(",")
}

fn write_sample_csv(path: &Path, features: &Matrix, labels: &[ClassId]) -> Result<()> {
    let mut out = String::from("label");
    for j in 0..features.cols() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for (i, row) in features.iter_rows().enumerate() {
        out.push_str(&csv_line(Some(labels[i]), row));
        out.push('\n');
    }
    write_text(path, &out)
}

fn write_sample_binary(dir: &Path, features: &Matrix, labels: &[ClassId]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bytes = Vec::with_capacity(features.as_slice().len() * 4);
    for &v in features.as_slice() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let blob = dir.join("features.f32");
    fs::write(&blob, bytes).map_err(|e| Error::io(&blob, e))?;
    let header = BinaryHeader {
        schema_version: SCHEMA_VERSION,
        rows: features.rows(),
        cols: features.cols(),
        dtype: "f32".into(),
        byte_order: "little".into(),
        layout: "row-major".into(),
        labels: labels.iter().map(|l| l.0 as i64).collect(),
    };
    write_text(&dir.join("header.json"), &serde_json::to_string_pretty(&header)?)
}

/// Writes `ds` in the interchange layout. The binary format stores features as
/// f32, so it round-trips bit-exactly only for f32-representable values.
pub fn save_dataset(ds: &ZslDataset, dir: impl AsRef<Path>, format: FeatureFormat) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut evaluation_only = vec!["test_unseen".to_string()];
    if ds.test_seen.is_some() {
        evaluation_only.push("test_seen".into());
    }
    let meta = MetaFile {
        schema_version: SCHEMA_VERSION,
        name: ds.meta.name.clone(),
        feature_dim: ds.meta.feature_dim,
        attribute_dim: ds.meta.attribute_dim,
        class_names: ds.meta.class_names.clone(),
        seen: ds.split.seen.iter().map(|c| c.0).collect(),
        unseen: ds.split.unseen.iter().map(|c| c.0).collect(),
        evaluation_only,
        feature_format: format,
    };
    write_text(&dir.join("meta.json"), &serde_json::to_string_pretty(&meta)?)?;

    let attrs = ds.attributes.matrix();
    let mut text = (0..attrs.cols()).map(|j| format!("a{j}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for row in attrs.iter_rows() {
        text.push_str(&csv_line(None, row));
        text.push('\n');
    }
    write_text(&dir.join("attributes.csv"), &text)?;

    let train_labels = ds
        .train_seen
        .labels
        .as_deref()
        .ok_or(Error::InvalidDataset("train_seen has no labels".into()))?;
    let mut sets: Vec<(&str, &Matrix, &[ClassId])> = vec![
        ("train_seen", &ds.train_seen.features, train_labels),
        ("test_unseen", &ds.test_unseen.features, &ds.hidden.unseen),
    ];
    if let (Some(ts), Some(l)) = (&ds.test_seen, &ds.hidden.seen) {
        sets.push(("test_seen", &ts.features, l));
    }
    for (stem, feats, labels) in sets {
        match format {
            FeatureFormat::Csv => write_sample_csv(&dir.join(format!("{stem}.csv")), feats, labels)?,
            FeatureFormat::F32 => write_sample_binary(&dir.join(stem), feats, labels)?,
        }
    }
    Ok(dir.to_path_buf())
}
