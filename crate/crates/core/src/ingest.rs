//! Parsers for the corpus manifest and the three behavioral report formats,
//! plus feature-vector assembly.
//!
//! Report schemas are JSON. Only the documented paths are read; everything
//! else in a document is ignored. A documented section that is absent
//! contributes zero to the feature vector; a section that is present with
//! the wrong shape is a [`IngestError::Schema`] error naming the offending
//! path.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::data::{Dataset, FeatureRecord};

/// Number of scalar features preceding the API-count columns:
/// unique_sources, malicious_count, import_count, files_written,
/// registry_keys_set, network_event_count.
pub const BASE_FEATURES: usize = 6;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("manifest row {row}: duplicate sha256 {sha256}")]
    DuplicateHash { row: usize, sha256: String },
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
}

fn schema_err(path: impl Into<String>, reason: impl Into<String>) -> IngestError {
    IngestError::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

/// One row of the corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sha256: String,
    pub apt_group: String,
    pub country: String,
}

/// Counts extracted from an antivirus file report.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileReportFeatures {
    pub file_name: String,
    pub unique_sources: u64,
    pub malicious_count: u64,
    pub import_count: u64,
}

/// Counts extracted from a dynamic behavior report.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BehaviorFeatures {
    pub files_written: u64,
    pub registry_keys_set: u64,
    pub network_event_count: u64,
}

/// Per-API call counts summed across all processes of a sandbox run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApiCallCounts(pub BTreeMap<String, u64>);

/// Fixed, ordered list of API names used as feature columns.
///
/// Names are ordered by descending total frequency in the source corpus,
/// ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiVocabulary {
    pub names: Vec<String>,
    pub corpus_size: usize,
    /// Total frequency of the least frequent included name (0 when empty).
    pub frequency_cutoff: u64,
}

impl ApiVocabulary {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Feature width of vectors assembled against this vocabulary.
    pub fn feature_dim(&self) -> usize {
        BASE_FEATURES + self.names.len()
    }

    pub fn write_json(&self, path: &Path) -> Result<(), IngestError> {
        let text = serde_json::to_string_pretty(self).expect("vocabulary serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| schema_err(path.display().to_string(), e.to_string()))
    }
}

fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Parse the corpus manifest CSV (header `sha256,apt_group,country`).
pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>, IngestError> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let expected = ["sha256", "apt_group", "country"];
    if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(IngestError::MalformedRow {
            row: 1,
            reason: "expected header sha256,apt_group,country".to_string(),
        });
    }
    let mut entries = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        let line = idx + 2;
        if row.len() != 3 {
            return Err(IngestError::MalformedRow {
                row: line,
                reason: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let sha256 = row[0].to_string();
        if !is_sha256_hex(&sha256) {
            return Err(IngestError::MalformedRow {
                row: line,
                reason: format!("sha256 is not 64 lowercase hex chars: {sha256:?}"),
            });
        }
        let apt_group = row[1].to_string();
        if apt_group.is_empty() {
            return Err(IngestError::MalformedRow {
                row: line,
                reason: "empty apt_group".to_string(),
            });
        }
        if !seen.insert(sha256.clone()) {
            return Err(IngestError::DuplicateHash { row: line, sha256 });
        }
        entries.push(ManifestEntry {
            sha256,
            apt_group,
            country: row[2].to_string(),
        });
    }
    Ok(entries)
}

fn parse_json(document: &str) -> Result<Value, IngestError> {
    serde_json::from_str(document).map_err(|e| schema_err("$", format!("invalid JSON: {e}")))
}

/// Navigate an object field; `Ok(None)` when the field (or the node itself)
/// is absent, `Err` when the node exists but is not an object.
fn get_field<'a>(
    node: Option<&'a Value>,
    field: &str,
    path: &str,
) -> Result<Option<&'a Value>, IngestError> {
    match node {
        None => Ok(None),
        Some(Value::Object(map)) => Ok(map.get(field)),
        Some(_) => Err(schema_err(path, "expected an object")),
    }
}

fn expect_u64(value: &Value, path: &str) -> Result<u64, IngestError> {
    value
        .as_u64()
        .ok_or_else(|| schema_err(path, "expected a non-negative integer"))
}

fn expect_array<'a>(value: &'a Value, path: &str) -> Result<&'a Vec<Value>, IngestError> {
    value
        .as_array()
        .ok_or_else(|| schema_err(path, "expected an array"))
}

fn expect_object<'a>(
    value: &'a Value,
    path: &str,
) -> Result<&'a serde_json::Map<String, Value>, IngestError> {
    value
        .as_object()
        .ok_or_else(|| schema_err(path, "expected an object"))
}

fn count_string_array(value: Option<&Value>, path: &str) -> Result<u64, IngestError> {
    match value {
        None => Ok(0),
        Some(v) => {
            let items = expect_array(v, path)?;
            for (i, item) in items.iter().enumerate() {
                if !item.is_string() {
                    return Err(schema_err(format!("{path}[{i}]"), "expected a string"));
                }
            }
            Ok(items.len() as u64)
        }
    }
}

/// Parse an antivirus file report document.
pub fn parse_file_report(document: &str) -> Result<FileReportFeatures, IngestError> {
    let root = parse_json(document)?;
    let data = get_field(Some(&root), "data", "$")?;
    let attributes = get_field(data, "attributes", "data")?;

    let file_name = match get_field(attributes, "meaningful_name", "data.attributes")? {
        None => String::new(),
        Some(v) => v
            .as_str()
            .ok_or_else(|| schema_err("data.attributes.meaningful_name", "expected a string"))?
            .to_string(),
    };

    let unique_sources = match get_field(attributes, "unique_sources", "data.attributes")? {
        None => 0,
        Some(v) => expect_u64(v, "data.attributes.unique_sources")?,
    };

    let mut malicious_count = 0;
    if let Some(results) = get_field(attributes, "last_analysis_results", "data.attributes")? {
        let engines = expect_object(results, "data.attributes.last_analysis_results")?;
        for (engine, verdict) in engines {
            let path = format!("data.attributes.last_analysis_results.{engine}");
            let verdict = expect_object(verdict, &path)?;
            if let Some(category) = verdict.get("category") {
                let category = category
                    .as_str()
                    .ok_or_else(|| schema_err(format!("{path}.category"), "expected a string"))?;
                if category.eq_ignore_ascii_case("malicious") {
                    malicious_count += 1;
                }
            }
        }
    }

    let mut import_count = 0;
    let pe_info = get_field(attributes, "pe_info", "data.attributes")?;
    if let Some(import_list) = get_field(pe_info, "import_list", "data.attributes.pe_info")? {
        let entries = expect_array(import_list, "data.attributes.pe_info.import_list")?;
        for (i, entry) in entries.iter().enumerate() {
            let path = format!("data.attributes.pe_info.import_list[{i}]");
            let entry = expect_object(entry, &path)?;
            if let Some(functions) = entry.get("imported_functions") {
                import_count +=
                    count_string_array(Some(functions), &format!("{path}.imported_functions"))?;
            }
        }
    }

    Ok(FileReportFeatures {
        file_name,
        unique_sources,
        malicious_count,
        import_count,
    })
}

/// Parse a dynamic behavior report document.
pub fn parse_behavior_report(document: &str) -> Result<BehaviorFeatures, IngestError> {
    let root = parse_json(document)?;
    let data = get_field(Some(&root), "data", "$")?;

    let files_written = count_string_array(
        get_field(data, "files_written", "data")?,
        "data.files_written",
    )?;
    let registry_keys_set = count_string_array(
        get_field(data, "registry_keys_set", "data")?,
        "data.registry_keys_set",
    )?;
    let network_event_count = match get_field(data, "network_events", "data")? {
        None => 0,
        Some(v) => expect_array(v, "data.network_events")?.len() as u64,
    };

    Ok(BehaviorFeatures {
        files_written,
        registry_keys_set,
        network_event_count,
    })
}

/// Parse a Cuckoo sandbox report document; per-API counts are summed across
/// all processes under `behavior.apistats`.
pub fn parse_cuckoo_report(document: &str) -> Result<ApiCallCounts, IngestError> {
    let root = parse_json(document)?;
    let behavior = get_field(Some(&root), "behavior", "$")?;
    let mut counts = BTreeMap::new();
    if let Some(apistats) = get_field(behavior, "apistats", "behavior")? {
        let processes = expect_object(apistats, "behavior.apistats")?;
        for (pid, apis) in processes {
            let pid_path = format!("behavior.apistats.{pid}");
            let apis = expect_object(apis, &pid_path)?;
            for (api, count) in apis {
                if api.is_empty() {
                    return Err(schema_err(&pid_path, "empty API name"));
                }
                let count = expect_u64(count, &format!("{pid_path}.{api}"))?;
                *counts.entry(api.clone()).or_insert(0) += count;
            }
        }
    }
    Ok(ApiCallCounts(counts))
}

/// Build the top-`top_n` API vocabulary from `(sha256, counts)` records.
///
/// Ordering is by descending total frequency with lexicographic tie-break,
/// so the result is independent of record order. Callers are responsible
/// for passing training-partition records only when leakage matters.
pub fn build_vocabulary(
    records: &[(String, ApiCallCounts)],
    top_n: usize,
) -> Result<ApiVocabulary, IngestError> {
    assert!(top_n >= 1, "top_n must be positive");
    if records.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for (_, counts) in records {
        for (api, count) in &counts.0 {
            *totals.entry(api).or_insert(0) += count;
        }
    }
    let mut ranked: Vec<(&str, u64)> = totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_n);
    let frequency_cutoff = ranked.last().map(|(_, c)| *c).unwrap_or(0);
    Ok(ApiVocabulary {
        names: ranked.into_iter().map(|(n, _)| n.to_string()).collect(),
        corpus_size: records.len(),
        frequency_cutoff,
    })
}

/// Compose the fixed-width feature vector for one sample.
///
/// Layout: the six base counts, then one column per vocabulary API name.
/// Any feature absent from the source reports is exactly 0.
pub fn feature_vector(
    file: Option<&FileReportFeatures>,
    behavior: Option<&BehaviorFeatures>,
    api: Option<&ApiCallCounts>,
    vocab: &ApiVocabulary,
) -> Vec<f64> {
    let mut features = Vec::with_capacity(vocab.feature_dim());
    match file {
        Some(f) => {
            features.push(f.unique_sources as f64);
            features.push(f.malicious_count as f64);
            features.push(f.import_count as f64);
        }
        None => features.extend([0.0; 3]),
    }
    match behavior {
        Some(b) => {
            features.push(b.files_written as f64);
            features.push(b.registry_keys_set as f64);
            features.push(b.network_event_count as f64);
        }
        None => features.extend([0.0; 3]),
    }
    for name in &vocab.names {
        let count = api.and_then(|a| a.0.get(name)).copied().unwrap_or(0);
        features.push(count as f64);
    }
    features
}

/// Merge parsed reports into one [`Dataset`], one record per manifest entry
/// in manifest order. Missing reports contribute all-zero fields; API counts
/// outside the vocabulary are dropped. Never fails.
pub fn assemble_dataset(
    manifest: &[ManifestEntry],
    file_reports: &HashMap<String, FileReportFeatures>,
    behavior_reports: &HashMap<String, BehaviorFeatures>,
    cuckoo_reports: &HashMap<String, ApiCallCounts>,
    vocab: &ApiVocabulary,
) -> Dataset {
    let dim = vocab.feature_dim();
    let records = manifest
        .iter()
        .map(|entry| FeatureRecord {
            sha256: entry.sha256.clone(),
            label: entry.apt_group.clone(),
            features: feature_vector(
                file_reports.get(&entry.sha256),
                behavior_reports.get(&entry.sha256),
                cuckoo_reports.get(&entry.sha256),
                vocab,
            ),
        })
        .collect();
    Dataset { dim, records }
}
