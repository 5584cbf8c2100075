//! Preprocessing chain: label encoding, stratified splitting, SMOTE
//! oversampling, and min-max normalization.
//!
//! The default chain is split -> SMOTE on the training partition only ->
//! fit the scaler on train -> apply to both partitions. The literal order
//! from the source methodology (SMOTE over the full dataset before
//! splitting) is available behind [`PrepareConfig::paper_order`].

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CodedRecord, DataSplit, Dataset};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {class} has {size} member(s); at least {needed} required")]
    ClassTooSmall {
        class: String,
        size: usize,
        needed: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("metadata error: {0}")]
    Metadata(String),
}

/// Bijection between label strings and integer codes 0..K-1, assigned in
/// lexicographic label order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCodebook {
    labels: Vec<String>,
}

impl LabelCodebook {
    pub fn from_labels<I: IntoIterator<Item = String>>(labels: I) -> Self {
        let mut unique: Vec<String> = labels.into_iter().collect();
        unique.sort();
        unique.dedup();
        LabelCodebook { labels: unique }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn code_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn label_of(&self, code: usize) -> Option<&str> {
        self.labels.get(code).map(|s| s.as_str())
    }
}

/// Train/test split configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.2,
            seed: 0,
            stratified: true,
        }
    }
}

/// SMOTE configuration; every class is oversampled up to the majority count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            seed: 0,
        }
    }
}

/// Per-feature extrema fit on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Replace string labels by integer codes; the codebook covers exactly the
/// distinct labels present.
pub fn encode_labels(dataset: &Dataset) -> Result<(LabelCodebook, DataSplit), PipelineError> {
    if dataset.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let codebook = LabelCodebook::from_labels(dataset.records.iter().map(|r| r.label.clone()));
    let records = dataset
        .records
        .iter()
        .map(|r| CodedRecord {
            sha256: r.sha256.clone(),
            label_code: codebook
                .code_of(&r.label)
                .expect("codebook covers every dataset label"),
            features: r.features.clone(),
            synthetic: false,
        })
        .collect();
    Ok((
        codebook,
        DataSplit {
            dim: dataset.dim,
            num_classes: codebook.len(),
            records,
        },
    ))
}

fn class_index_map(split: &DataSplit) -> BTreeMap<usize, Vec<usize>> {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, record) in split.records.iter().enumerate() {
        map.entry(record.label_code).or_default().push(i);
    }
    map
}

fn subset(split: &DataSplit, mut indices: Vec<usize>) -> DataSplit {
    indices.sort_unstable();
    DataSplit {
        dim: split.dim,
        num_classes: split.num_classes,
        records: indices.iter().map(|&i| split.records[i].clone()).collect(),
    }
}

/// Split into train/test partitions. With `stratified`, the test fraction is
/// honored per class up to rounding; record order follows input order within
/// each partition.
pub fn stratified_split(
    data: &DataSplit,
    cfg: &SplitConfig,
) -> Result<(DataSplit, DataSplit), PipelineError> {
    if data.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(PipelineError::InvalidConfig(format!(
            "test_fraction must be in (0,1), got {}",
            cfg.test_fraction
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut test_indices = Vec::new();
    let mut train_indices = Vec::new();
    if cfg.stratified {
        for (class, mut indices) in class_index_map(data) {
            if indices.len() < 2 {
                return Err(PipelineError::ClassTooSmall {
                    class: class.to_string(),
                    size: indices.len(),
                    needed: 2,
                });
            }
            indices.shuffle(&mut rng);
            let n_test = ((cfg.test_fraction * indices.len() as f64).round() as usize)
                .min(indices.len());
            test_indices.extend_from_slice(&indices[..n_test]);
            train_indices.extend_from_slice(&indices[n_test..]);
        }
    } else {
        let mut indices: Vec<usize> = (0..data.len()).collect();
        indices.shuffle(&mut rng);
        let n_test = ((cfg.test_fraction * indices.len() as f64).round() as usize)
            .min(indices.len());
        test_indices.extend_from_slice(&indices[..n_test]);
        train_indices.extend_from_slice(&indices[n_test..]);
    }
    Ok((subset(data, train_indices), subset(data, test_indices)))
}

/// Oversample every minority class up to the majority-class count.
///
/// Each synthetic vector is `x + u * (x_nn - x)` for a real class member
/// `x`, one of its `k` nearest same-class neighbors `x_nn` (Euclidean), and
/// `u` uniform in [0,1]. Originals are preserved verbatim; synthetics are
/// appended with placeholder identities.
pub fn smote_oversample(train: &DataSplit, cfg: &SmoteConfig) -> Result<DataSplit, PipelineError> {
    if cfg.k_neighbors == 0 {
        return Err(PipelineError::InvalidConfig(
            "k_neighbors must be at least 1".to_string(),
        ));
    }
    if train.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let classes = class_index_map(train);
    let majority = classes.values().map(Vec::len).max().unwrap_or(0);
    let mut result = train.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    for (&class, indices) in &classes {
        let deficit = majority - indices.len();
        if deficit == 0 {
            continue;
        }
        if indices.len() < 2 {
            return Err(PipelineError::ClassTooSmall {
                class: class.to_string(),
                size: indices.len(),
                needed: 2,
            });
        }
        let k = cfg.k_neighbors.min(indices.len() - 1);
        // Neighbor lists per class member, sorted by (distance, index).
        let neighbor_lists: Vec<Vec<usize>> = indices
            .iter()
            .map(|&i| {
                let mut dists: Vec<(f64, usize)> = indices
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (squared_distance(&train.records[i].features, &train.records[j].features), j))
                    .collect();
                dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                dists.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect();
        for ordinal in 0..deficit {
            let base_pos = rng.gen_range(0..indices.len());
            let base = &train.records[indices[base_pos]];
            let neighbors = &neighbor_lists[base_pos];
            let neighbor = &train.records[neighbors[rng.gen_range(0..neighbors.len())]];
            let u: f64 = rng.gen();
            let features = base
                .features
                .iter()
                .zip(&neighbor.features)
                .map(|(&x, &nn)| x + u * (nn - x))
                .collect();
            result.records.push(CodedRecord {
                sha256: format!("synthetic:{class:02}:{ordinal:05}"),
                label_code: class,
                features,
                synthetic: true,
            });
        }
    }
    Ok(result)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Column-wise extrema of the training split only.
pub fn fit_minmax(train: &DataSplit) -> Result<ScalerParams, PipelineError> {
    if train.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let dim = train.dim;
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for record in &train.records {
        for (i, &v) in record.features.iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(ScalerParams { min, max })
}

/// Rescale every feature to [0,1] via `(x - min) / (max - min)`.
///
/// Constant columns map to 0; values outside the training range clip to
/// [0,1].
pub fn apply_minmax(split: &DataSplit, params: &ScalerParams) -> Result<DataSplit, PipelineError> {
    if params.min.len() != split.dim {
        return Err(PipelineError::DimensionMismatch {
            expected: params.min.len(),
            got: split.dim,
        });
    }
    let mut result = split.clone();
    for record in &mut result.records {
        for (i, v) in record.features.iter_mut().enumerate() {
            let range = params.max[i] - params.min[i];
            *v = if range == 0.0 {
                0.0
            } else {
                ((*v - params.min[i]) / range).clamp(0.0, 1.0)
            };
        }
    }
    Ok(result)
}

/// Full preprocessing configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub split: SplitConfig,
    /// `None` disables oversampling.
    pub smote: Option<SmoteConfig>,
    /// Apply SMOTE to the full dataset before splitting, reproducing the
    /// source methodology's literal order (leaks synthetic neighbors of
    /// test points into training; off by default).
    pub paper_order: bool,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            split: SplitConfig::default(),
            smote: Some(SmoteConfig::default()),
            paper_order: false,
        }
    }
}

/// Output of the preprocessing chain plus everything needed to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub codebook: LabelCodebook,
    pub scaler: ScalerParams,
    pub train: DataSplit,
    pub test: DataSplit,
}

/// Run the full chain on an assembled dataset.
pub fn prepare(dataset: &Dataset, cfg: &PrepareConfig) -> Result<PreparedData, PipelineError> {
    let (codebook, coded) = encode_labels(dataset)?;
    let (train, test) = if cfg.paper_order {
        let balanced = match &cfg.smote {
            Some(smote_cfg) => smote_oversample(&coded, smote_cfg)?,
            None => coded,
        };
        stratified_split(&balanced, &cfg.split)?
    } else {
        let (train, test) = stratified_split(&coded, &cfg.split)?;
        let train = match &cfg.smote {
            Some(smote_cfg) => smote_oversample(&train, smote_cfg)?,
            None => train,
        };
        (train, test)
    };
    let scaler = fit_minmax(&train)?;
    let train = apply_minmax(&train, &scaler)?;
    let test = apply_minmax(&test, &scaler)?;
    Ok(PreparedData {
        codebook,
        scaler,
        train,
        test,
    })
}

/// Sidecar metadata written next to prepared splits for exact replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetadata {
    pub labels: Vec<String>,
    pub dim: usize,
    pub num_classes: usize,
    pub scaler: ScalerParams,
    pub config: PrepareConfig,
}

impl SplitMetadata {
    pub fn new(prepared: &PreparedData, cfg: &PrepareConfig) -> Self {
        SplitMetadata {
            labels: prepared.codebook.labels().to_vec(),
            dim: prepared.train.dim,
            num_classes: prepared.codebook.len(),
            scaler: prepared.scaler.clone(),
            config: cfg.clone(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).expect("metadata serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Metadata(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureRecord;
    use proptest::prelude::*;

    fn dataset_from(labels: &[&str], features: Vec<Vec<f64>>) -> Dataset {
        let dim = features.first().map(|f| f.len()).unwrap_or(0);
        Dataset {
            dim,
            records: labels
                .iter()
                .zip(features)
                .enumerate()
                .map(|(i, (label, features))| FeatureRecord {
                    sha256: format!("{i:064x}"),
                    label: label.to_string(),
                    features,
                })
                .collect(),
        }
    }

    fn split_from(codes: &[usize], features: Vec<Vec<f64>>) -> DataSplit {
        let dim = features.first().map(|f| f.len()).unwrap_or(0);
        let num_classes = codes.iter().max().map(|&c| c + 1).unwrap_or(0);
        DataSplit {
            dim,
            num_classes,
            records: codes
                .iter()
                .zip(features)
                .enumerate()
                .map(|(i, (&label_code, features))| CodedRecord {
                    sha256: format!("{i:064x}"),
                    label_code,
                    features,
                    synthetic: false,
                })
                .collect(),
        }
    }

    #[test]
    fn encode_assigns_lexicographic_codes() {
        let dataset = dataset_from(
            &["Winnti", "APT 1", "APT 10", "APT 1"],
            vec![vec![0.0]; 4],
        );
        let (codebook, coded) = encode_labels(&dataset).unwrap();
        assert_eq!(codebook.labels(), &["APT 1", "APT 10", "Winnti"]);
        assert_eq!(codebook.code_of("APT 1"), Some(0));
        assert_eq!(codebook.code_of("APT 10"), Some(1));
        assert_eq!(codebook.code_of("Winnti"), Some(2));
        assert_eq!(
            coded.records.iter().map(|r| r.label_code).collect::<Vec<_>>(),
            vec![2, 0, 1, 0]
        );
    }

    #[test]
    fn encode_single_label_is_all_zero() {
        let dataset = dataset_from(&["X", "X"], vec![vec![1.0], vec![2.0]]);
        let (codebook, coded) = encode_labels(&dataset).unwrap();
        assert_eq!(codebook.len(), 1);
        assert!(coded.records.iter().all(|r| r.label_code == 0));
    }

    #[test]
    fn encode_empty_dataset_is_error() {
        assert!(matches!(
            encode_labels(&Dataset::new(1)).unwrap_err(),
            PipelineError::EmptyDataset
        ));
    }

    #[test]
    fn split_exact_stratification() {
        let codes: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let split = split_from(&codes, (0..100).map(|i| vec![i as f64]).collect());
        let cfg = SplitConfig {
            test_fraction: 0.2,
            seed: 7,
            stratified: true,
        };
        let (train, test) = stratified_split(&split, &cfg).unwrap();
        assert_eq!(test.len(), 20);
        assert_eq!(train.len(), 80);
        assert_eq!(test.class_counts(), vec![10, 10]);
    }

    #[test]
    fn split_is_deterministic() {
        let codes: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let split = split_from(&codes, (0..30).map(|i| vec![i as f64]).collect());
        let cfg = SplitConfig {
            test_fraction: 0.3,
            seed: 42,
            stratified: true,
        };
        let a = stratified_split(&split, &cfg).unwrap();
        let b = stratified_split(&split, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_rejects_singleton_class() {
        let split = split_from(&[0, 0, 1], vec![vec![0.0], vec![1.0], vec![2.0]]);
        let err = stratified_split(&split, &SplitConfig::default()).unwrap_err();
        match err {
            PipelineError::ClassTooSmall { class, size, .. } => {
                assert_eq!(class, "1");
                assert_eq!(size, 1);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn smote_matches_majority() {
        let codes = [vec![0usize; 10], vec![1usize; 4]].concat();
        let features: Vec<Vec<f64>> = (0..14).map(|i| vec![i as f64, (i * 2) as f64]).collect();
        let split = split_from(&codes, features);
        let result = smote_oversample(&split, &SmoteConfig::default()).unwrap();
        assert_eq!(result.class_counts(), vec![10, 10]);
        assert_eq!(result.records.iter().filter(|r| r.synthetic).count(), 6);
        // originals preserved verbatim, in order
        assert_eq!(&result.records[..14], &split.records[..]);
    }

    #[test]
    fn smote_balanced_input_is_fixed_point() {
        let codes = [0, 0, 1, 1];
        let split = split_from(&codes, (0..4).map(|i| vec![i as f64]).collect());
        let result = smote_oversample(&split, &SmoteConfig::default()).unwrap();
        assert_eq!(result, split);
    }

    #[test]
    fn smote_synthetics_lie_on_segment() {
        // class 1 = two 1-D points at 0 and 1; all synthetics must fall in [0,1].
        for seed in 0..1000 {
            let codes = [vec![0usize; 5], vec![1usize; 2]].concat();
            let mut features: Vec<Vec<f64>> = (0..5).map(|i| vec![10.0 + i as f64]).collect();
            features.push(vec![0.0]);
            features.push(vec![1.0]);
            let split = split_from(&codes, features);
            let cfg = SmoteConfig {
                k_neighbors: 5,
                seed,
            };
            let result = smote_oversample(&split, &cfg).unwrap();
            for record in result.records.iter().filter(|r| r.synthetic && r.label_code == 1) {
                let v = record.features[0];
                assert!((0.0..=1.0).contains(&v), "seed {seed}: {v} outside segment");
            }
        }
    }

    #[test]
    fn smote_rejects_singleton_minority() {
        let codes = [0, 0, 0, 1];
        let split = split_from(&codes, (0..4).map(|i| vec![i as f64]).collect());
        assert!(matches!(
            smote_oversample(&split, &SmoteConfig::default()).unwrap_err(),
            PipelineError::ClassTooSmall { .. }
        ));
    }

    #[test]
    fn minmax_fit_and_apply() {
        let split = split_from(&[0, 0, 1], vec![vec![2.0], vec![4.0], vec![6.0]]);
        let params = fit_minmax(&split).unwrap();
        assert_eq!(params.min, vec![2.0]);
        assert_eq!(params.max, vec![6.0]);
        let scaled = apply_minmax(&split, &params).unwrap();
        let values: Vec<f64> = scaled.records.iter().map(|r| r.features[0]).collect();
        assert_eq!(values, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn minmax_constant_column_maps_to_zero() {
        let split = split_from(&[0, 1], vec![vec![5.0], vec![5.0]]);
        let params = fit_minmax(&split).unwrap();
        let scaled = apply_minmax(&split, &params).unwrap();
        assert!(scaled.records.iter().all(|r| r.features[0] == 0.0));
    }

    #[test]
    fn minmax_clips_out_of_range_test_values() {
        let train = split_from(&[0, 1], vec![vec![2.0], vec![6.0]]);
        let test = split_from(&[0, 1], vec![vec![8.0], vec![1.0]]);
        let params = fit_minmax(&train).unwrap();
        let scaled = apply_minmax(&test, &params).unwrap();
        assert_eq!(scaled.records[0].features[0], 1.0);
        assert_eq!(scaled.records[1].features[0], 0.0);
    }

    #[test]
    fn minmax_dimension_mismatch() {
        let train = split_from(&[0, 1], vec![vec![2.0], vec![6.0]]);
        let params = fit_minmax(&train).unwrap();
        let other = split_from(&[0, 1], vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(matches!(
            apply_minmax(&other, &params).unwrap_err(),
            PipelineError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn scaler_never_reads_test_data() {
        let train = split_from(&[0, 1], vec![vec![2.0], vec![6.0]]);
        let params = fit_minmax(&train).unwrap();
        // mutating "test" data cannot change already-fit params; fitting
        // again on the same train yields identical params
        assert_eq!(params, fit_minmax(&train).unwrap());
    }

    #[test]
    fn prepare_full_chain_is_deterministic() {
        let labels: Vec<&str> = (0..30).map(|i| if i % 3 == 0 { "A" } else { "B" }).collect();
        let features: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let dataset = dataset_from(&labels, features);
        let cfg = PrepareConfig::default();
        let a = prepare(&dataset, &cfg).unwrap();
        let b = prepare(&dataset, &cfg).unwrap();
        assert_eq!(a, b);
        // SMOTE balanced the training split and everything is in [0,1]
        let counts = a.train.class_counts();
        assert!(counts.iter().all(|&c| c == counts[0]));
        for record in a.train.records.iter().chain(&a.test.records) {
            assert!(record.features.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn prepare_paper_order_balances_before_split() {
        let labels: Vec<&str> = (0..24).map(|i| if i < 18 { "A" } else { "B" }).collect();
        let features: Vec<Vec<f64>> = (0..24).map(|i| vec![i as f64]).collect();
        let dataset = dataset_from(&labels, features);
        let cfg = PrepareConfig {
            paper_order: true,
            ..PrepareConfig::default()
        };
        let prepared = prepare(&dataset, &cfg).unwrap();
        // 18 + 18 balanced before the 0.2 split
        assert_eq!(prepared.train.len() + prepared.test.len(), 36);
    }

    proptest! {
        // Split partition: disjoint, exhaustive, per-class error <= 1 sample.
        #[test]
        fn split_partition_property(seed in 0u64..200, frac in 0.1f64..0.9) {
            let codes: Vec<usize> = (0..57).map(|i| i % 4).collect();
            let split = split_from(&codes, (0..57).map(|i| vec![i as f64]).collect());
            let cfg = SplitConfig { test_fraction: frac, seed, stratified: true };
            let (train, test) = stratified_split(&split, &cfg).unwrap();
            prop_assert_eq!(train.len() + test.len(), split.len());
            let mut ids: Vec<&str> = train.records.iter().chain(&test.records).map(|r| r.sha256.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), split.len());
            let total_counts = split.class_counts();
            let test_counts = test.class_counts();
            for class in 0..4 {
                let expected = frac * total_counts[class] as f64;
                prop_assert!((test_counts[class] as f64 - expected).abs() <= 1.0);
            }
        }

        // SMOTE geometry: every synthetic point is a convex combination of
        // two real same-class training points.
        #[test]
        fn smote_convex_combination_property(seed in 0u64..200) {
            let codes = [vec![0usize; 8], vec![1usize; 3]].concat();
            use rand::Rng as _;
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(31));
            let features: Vec<Vec<f64>> = (0..11).map(|_| (0..3).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
            let split = split_from(&codes, features);
            let result = smote_oversample(&split, &SmoteConfig { k_neighbors: 5, seed }).unwrap();
            for record in result.records.iter().filter(|r| r.synthetic) {
                let class_members: Vec<&CodedRecord> = split
                    .records
                    .iter()
                    .filter(|r| r.label_code == record.label_code)
                    .collect();
                prop_assert!(is_convex_combination(&record.features, &class_members));
            }
        }
    }

    /// Brute-force oracle: does `point` lie on a segment between two class members?
    fn is_convex_combination(point: &[f64], members: &[&CodedRecord]) -> bool {
        for a in members {
            for b in members {
                let (av, bv) = (&a.features, &b.features);
                // find u from the first coordinate where a and b differ
                let mut u: Option<f64> = None;
                let mut consistent = true;
                for i in 0..point.len() {
                    let denom = bv[i] - av[i];
                    if denom.abs() > 1e-12 {
                        let candidate = (point[i] - av[i]) / denom;
                        match u {
                            None => u = Some(candidate),
                            Some(prev) if (prev - candidate).abs() > 1e-9 => {
                                consistent = false;
                                break;
                            }
                            Some(_) => {}
                        }
                    } else if (point[i] - av[i]).abs() > 1e-9 {
                        consistent = false;
                        break;
                    }
                }
                let u = u.unwrap_or(0.0);
                if consistent && (-1e-9..=1.0 + 1e-9).contains(&u) {
                    return true;
                }
            }
        }
        false
    }
}
