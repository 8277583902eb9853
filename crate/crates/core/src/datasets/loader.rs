//! CSV batches and the TOML manifest that ties a reference batch to incoming ones.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::types::{BatchSequence, LabeledBatch};

pub const MANIFEST_VERSION: u32 = 1;

/// Which CSV columns hold the label and the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    /// Empty means every column except the label, in file order.
    #[serde(default)]
    pub feature_columns: Vec<String>,
}

impl CsvSchema {
    pub fn new(label_column: &str) -> Self {
        Self {
            label_column: label_column.to_string(),
            feature_columns: Vec::new(),
        }
    }
}

/// Maps label strings to contiguous ids in sorted order: numeric when every
/// label parses as an integer, lexicographic otherwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        let mut names: Vec<String> = names.into_iter().map(str::to_string).collect();
        names.sort_unstable();
        names.dedup();
        if names.iter().all(|n| n.parse::<i64>().is_ok()) {
            names.sort_by_key(|n| n.parse::<i64>().unwrap_or(0));
        }
        Self { names }
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Features plus raw label strings, before ids are assigned.
struct RawBatch {
    features: Array2<f64>,
    labels: Vec<String>,
}

impl RawBatch {
    fn into_batch(self, map: &LabelMap) -> LabeledBatch {
        let ids = self.labels.iter().map(|l| map.id(l).expect("label map built from these labels")).collect();
        LabeledBatch::new(self.features, Some(ids))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub has_drift: bool,
}

/// Manifest file format (version 1):
///
/// ```toml
/// version = 1
/// label_column = "label"
/// feature_columns = []        # optional
/// reference = "reference.csv"
/// [[batches]]
/// path = "batch_01.csv"
/// has_drift = false
/// ```
///
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub version: u32,
    pub reference: PathBuf,
    pub batches: Vec<ManifestEntry>,
    #[serde(flatten)]
    pub schema: CsvSchema,
}

impl BatchManifest {
    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(DriftError::MissingFile(path.to_path_buf()));
        }
        let mut m: Self = toml::from_str(&fs::read_to_string(path)?).map_err(|e| DriftError::Config(e.to_string()))?;
        if m.version != MANIFEST_VERSION {
            return Err(DriftError::Config(format!("unsupported manifest version {}", m.version)));
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        m.reference = base.join(&m.reference);
        for e in &mut m.batches {
            e.path = base.join(&e.path);
        }
        for p in std::iter::once(&m.reference).chain(m.batches.iter().map(|e| &e.path)) {
            if !p.exists() {
                return Err(DriftError::MissingFile(p.clone()));
            }
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| DriftError::Config(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Loads every batch with one shared label map, checking the column schema agrees.
    pub fn load(&self) -> Result<BatchSequence> {
        let reference = read_raw(&self.reference, &self.schema)?;
        let raw = self
            .batches
            .iter()
            .map(|e| read_raw(&e.path, &self.schema))
            .collect::<Result<Vec<_>>>()?;
        for b in &raw {
            if b.features.ncols() != reference.features.ncols() {
                return Err(DriftError::ColumnMismatch {
                    expected: reference.features.ncols(),
                    actual: b.features.ncols(),
                });
            }
        }
        let all = std::iter::once(&reference).chain(&raw).flat_map(|b| b.labels.iter().map(String::as_str));
        let map = LabelMap::from_names(all);
        let reference = reference.into_batch(&map);
        let incoming = raw
            .into_iter()
            .enumerate()
            .map(|(i, b)| b.into_batch(&map).with_batch_id(i + 1))
            .collect();
        BatchSequence::new(reference, incoming, self.batches.iter().map(|e| e.has_drift).collect())
    }
}

/// Rows in file order. `row` in parse errors counts data rows from 1.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LabeledBatch> {
    let raw = read_raw(path, schema)?;
    let map = LabelMap::from_names(raw.labels.iter().map(String::as_str));
    Ok(raw.into_batch(&map))
}

fn read_raw(path: &Path, schema: &CsvSchema) -> Result<RawBatch> {
    if !path.exists() {
        return Err(DriftError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| DriftError::UnknownLabelColumn(schema.label_column.clone()))?;
    let feature_idx: Vec<usize> = if schema.feature_columns.is_empty() {
        (0..header.len()).filter(|&i| i != label_idx).collect()
    } else {
        schema
            .feature_columns
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| DriftError::Config(format!("unknown feature column '{c}'")))
            })
            .collect::<Result<_>>()?
    };
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        for &j in &feature_idx {
            let cell = record.get(j).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| DriftError::Parse {
                row: r + 1,
                column: header[j].clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DriftError::Parse {
                    row: r + 1,
                    column: header[j].clone(),
                    message: "non-finite value".into(),
                });
            }
            data.push(v);
        }
        labels.push(record.get(label_idx).unwrap_or("").trim().to_string());
    }
    if labels.is_empty() {
        return Err(DriftError::EmptyDataset);
    }
    let features = Array2::from_shape_vec((labels.len(), feature_idx.len()), data)
        .map_err(|e| DriftError::InvalidBatch(e.to_string()))?;
    Ok(RawBatch { features, labels })
}

/// Writes `f0..f{k-1}` feature columns plus a `label` column (empty when unlabeled).
pub fn write_csv(path: &Path, batch: &LabeledBatch) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..batch.cols()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (i, row) in batch.features.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(batch.labels.as_ref().map_or(String::new(), |l| l[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn label_map_orders_numeric_then_lexicographic() {
        let m = LabelMap::from_names(["10", "2", "1", "2"]);
        assert_eq!(m.names(), ["1", "2", "10"]);
        let m = LabelMap::from_names(["b", "a", "10"]);
        assert_eq!(m.names(), ["10", "a", "b"]);
        assert_eq!(m.id("b"), Some(2));
        assert_eq!(m.id("z"), None);
    }

    #[test]
    fn load_csv_reads_features_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "x,label,y\n1.5,cat,2\n3,dog,4\n5,cat,6\n");
        let b = load_csv(&p, &CsvSchema::new("label")).unwrap();
        assert_eq!((b.rows(), b.cols()), (3, 2));
        assert_eq!(b.features[[1, 1]], 4.0);
        assert_eq!(b.labels().unwrap(), [0, 1, 0]);
        let schema = CsvSchema {
            label_column: "label".into(),
            feature_columns: vec!["y".into()],
        };
        let b = load_csv(&p, &schema).unwrap();
        assert_eq!(b.cols(), 1);
        assert_eq!(b.features[[2, 0]], 6.0);
    }

    #[test]
    fn load_csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let schema = CsvSchema::new("label");
        assert!(matches!(load_csv(&dir.path().join("none.csv"), &schema), Err(DriftError::MissingFile(_))));
        let p = write(dir.path(), "a.csv", "x,y\n1,2\n");
        assert!(matches!(load_csv(&p, &schema), Err(DriftError::UnknownLabelColumn(_))));
        let p = write(dir.path(), "b.csv", "x,label\n1,a\nfoo,b\n");
        match load_csv(&p, &schema) {
            Err(DriftError::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "x")),
            other => panic!("expected parse error, got {other:?}"),
        }
        let p = write(dir.path(), "c.csv", "x,label\nNaN,a\n");
        assert!(matches!(load_csv(&p, &schema), Err(DriftError::Parse { .. })));
        let p = write(dir.path(), "d.csv", "x,label\n");
        assert!(matches!(load_csv(&p, &schema), Err(DriftError::EmptyDataset)));
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let b = LabeledBatch::new(Array2::from_shape_vec((2, 2), vec![0.1, -2.0, 3.25, 4.0]).unwrap(), Some(vec![1, 0]));
        let p = dir.path().join("b.csv");
        write_csv(&p, &b).unwrap();
        let back = load_csv(&p, &CsvSchema::new("label")).unwrap();
        assert_eq!(back.features, b.features);
        assert_eq!(back.labels, b.labels);
    }

    #[test]
    fn manifest_shares_one_label_map_and_checks_columns() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "r.csv", "x,label\n1,a\n2,b\n");
        write(dir.path(), "i.csv", "x,label\n3,c\n4,a\n");
        write(dir.path(), "w.csv", "x,z,label\n3,1,c\n");
        let m = BatchManifest {
            version: MANIFEST_VERSION,
            reference: "r.csv".into(),
            batches: vec![ManifestEntry {
                path: "i.csv".into(),
                has_drift: true,
            }],
            schema: CsvSchema::new("label"),
        };
        let path = dir.path().join("m.toml");
        m.write(&path).unwrap();
        let seq = BatchManifest::read(&path).unwrap().load().unwrap();
        assert_eq!(seq.reference.labels().unwrap(), [0, 1]);
        assert_eq!(seq.incoming[0].labels().unwrap(), [2, 0]);
        assert_eq!(seq.ground_truth_drift, [true]);

        let mut bad = m.clone();
        bad.batches[0].path = "w.csv".into();
        bad.write(&path).unwrap();
        let err = BatchManifest::read(&path).unwrap().load();
        assert!(matches!(err, Err(DriftError::ColumnMismatch { expected: 1, actual: 2 })));

        bad.batches[0].path = "gone.csv".into();
        bad.write(&path).unwrap();
        assert!(matches!(BatchManifest::read(&path), Err(DriftError::MissingFile(_))));

        let mut old = m.clone();
        old.version = 0;
        old.write(&path).unwrap();
        assert!(matches!(BatchManifest::read(&path), Err(DriftError::Config(_))));
    }
}
