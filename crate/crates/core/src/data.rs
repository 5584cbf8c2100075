//! Shared dataset containers and their CSV serialization.

use std::path::Path;

use thiserror::Error;

/// Errors raised while reading or writing dataset files.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: line {line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
}

/// One sample's feature vector plus its APT-group label and SHA-256 identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub sha256: String,
    pub label: String,
    pub features: Vec<f64>,
}

/// Ordered collection of [`FeatureRecord`]s with a fixed feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub records: Vec<FeatureRecord>,
}

/// A record whose label has been replaced by its integer code.
///
/// SMOTE-generated records carry `synthetic = true` and a placeholder
/// identity in `sha256`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedRecord {
    pub sha256: String,
    pub label_code: usize,
    pub features: Vec<f64>,
    pub synthetic: bool,
}

/// A train or test partition of label-coded records.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub dim: usize,
    pub num_classes: usize,
    pub records: Vec<CodedRecord>,
}

fn feature_header(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("f{i}")).collect()
}

fn parse_feature(field: &str, path: &Path, line: usize, col: usize) -> Result<f64, DataError> {
    let value: f64 = field.parse().map_err(|_| DataError::Format {
        path: path.display().to_string(),
        line,
        reason: format!("column f{col}: not a number: {field:?}"),
    })?;
    if !value.is_finite() {
        return Err(DataError::Format {
            path: path.display().to_string(),
            line,
            reason: format!("column f{col}: non-finite value"),
        });
    }
    Ok(value)
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset {
            dim,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Write as CSV with header `sha256,label,f0..f{D-1}`.
    ///
    /// Features are formatted with the shortest representation that parses
    /// back to the identical `f64`, so write/read round-trips are bit-exact.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["sha256".to_string(), "label".to_string()];
        header.extend(feature_header(self.dim));
        writer.write_record(&header)?;
        for record in &self.records {
            let mut row = vec![record.sha256.clone(), record.label.clone()];
            row.extend(record.features.iter().map(|v| format!("{v}")));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Read a CSV written by [`Dataset::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self, DataError> {
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        if header.len() < 2 || &header[0] != "sha256" || &header[1] != "label" {
            return Err(DataError::Format {
                path: path.display().to_string(),
                line: 1,
                reason: "expected header sha256,label,f0..".to_string(),
            });
        }
        let dim = header.len() - 2;
        for (i, name) in header.iter().skip(2).enumerate() {
            if name != format!("f{i}") {
                return Err(DataError::Format {
                    path: path.display().to_string(),
                    line: 1,
                    reason: format!("expected feature column f{i}, found {name:?}"),
                });
            }
        }
        let mut records = Vec::new();
        for (idx, row) in reader.records().enumerate() {
            let row = row?;
            let line = idx + 2;
            if row.len() != dim + 2 {
                return Err(DataError::Format {
                    path: path.display().to_string(),
                    line,
                    reason: format!("expected {} fields, found {}", dim + 2, row.len()),
                });
            }
            let mut features = Vec::with_capacity(dim);
            for (col, field) in row.iter().skip(2).enumerate() {
                features.push(parse_feature(field, path, line, col)?);
            }
            records.push(FeatureRecord {
                sha256: row[0].to_string(),
                label: row[1].to_string(),
                features,
            });
        }
        Ok(Dataset { dim, records })
    }
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Per-class record counts, indexed by label code.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for record in &self.records {
            counts[record.label_code] += 1;
        }
        counts
    }

    /// Write as CSV with header `sha256,label_code,f0..f{D-1}`.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["sha256".to_string(), "label_code".to_string()];
        header.extend(feature_header(self.dim));
        writer.write_record(&header)?;
        for record in &self.records {
            let mut row = vec![record.sha256.clone(), record.label_code.to_string()];
            row.extend(record.features.iter().map(|v| format!("{v}")));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Read a CSV written by [`DataSplit::write_csv`].
    ///
    /// `num_classes` fixes the action-space size; when `None` it is inferred
    /// as `max(label_code) + 1`. Records whose identity starts with
    /// `synthetic:` are flagged as SMOTE products.
    pub fn read_csv(path: &Path, num_classes: Option<usize>) -> Result<Self, DataError> {
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        if header.len() < 2 || &header[0] != "sha256" || &header[1] != "label_code" {
            return Err(DataError::Format {
                path: path.display().to_string(),
                line: 1,
                reason: "expected header sha256,label_code,f0..".to_string(),
            });
        }
        let dim = header.len() - 2;
        let mut records = Vec::new();
        let mut max_code = 0usize;
        for (idx, row) in reader.records().enumerate() {
            let row = row?;
            let line = idx + 2;
            if row.len() != dim + 2 {
                return Err(DataError::Format {
                    path: path.display().to_string(),
                    line,
                    reason: format!("expected {} fields, found {}", dim + 2, row.len()),
                });
            }
            let label_code: usize = row[1].parse().map_err(|_| DataError::Format {
                path: path.display().to_string(),
                line,
                reason: format!("label_code: not a non-negative integer: {:?}", &row[1]),
            })?;
            max_code = max_code.max(label_code);
            let mut features = Vec::with_capacity(dim);
            for (col, field) in row.iter().skip(2).enumerate() {
                features.push(parse_feature(field, path, line, col)?);
            }
            let sha256 = row[0].to_string();
            let synthetic = sha256.starts_with("synthetic:");
            records.push(CodedRecord {
                sha256,
                label_code,
                features,
                synthetic,
            });
        }
        let inferred = if records.is_empty() { 0 } else { max_code + 1 };
        let num_classes = num_classes.unwrap_or(inferred);
        if num_classes < inferred {
            return Err(DataError::Format {
                path: path.display().to_string(),
                line: 1,
                reason: format!("label code {} exceeds declared class count {num_classes}", inferred - 1),
            });
        }
        Ok(DataSplit {
            dim,
            num_classes,
            records,
        })
    }
}
