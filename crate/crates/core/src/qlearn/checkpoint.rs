//! Checkpoint container: a JSON header (config, hyperparameters, step
//! counter, label names, tensor shapes) followed by raw little-endian f64
//! tensor data. Loading restores bit-identical inference.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Dense, Hyperparams, InitRecord, NetworkConfig, QNetworkParams};

const MAGIC: &[u8; 8] = b"APTQCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid checkpoint: {0}")]
    Format(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: NetworkConfig,
    hyperparams: Hyperparams,
    step: u64,
    labels: Vec<String>,
    init: InitRecord,
    shapes: Vec<(usize, usize)>,
}

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: QNetworkParams,
    pub config: NetworkConfig,
    pub hyperparams: Hyperparams,
    pub step: u64,
    pub labels: Vec<String>,
}

pub fn save_checkpoint(
    path: &Path,
    params: &QNetworkParams,
    config: &NetworkConfig,
    hyperparams: &Hyperparams,
    step: u64,
    labels: &[String],
) -> Result<(), CheckpointError> {
    let header = Header {
        config: config.clone(),
        hyperparams: hyperparams.clone(),
        step,
        labels: labels.to_vec(),
        init: params.init.clone(),
        shapes: params.shapes(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| CheckpointError::Format(format!("header serialization: {e}")))?;
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_all(MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    writer.write_all(&header_bytes)?;
    for layer in &params.layers {
        for &w in &layer.weights {
            writer.write_all(&w.to_le_bytes())?;
        }
        for &b in &layer.biases {
            writer.write_all(&b.to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|_| CheckpointError::Format("file too short for magic".to_string()))?;
    if &magic != MAGIC {
        return Err(CheckpointError::Format("bad magic bytes".to_string()));
    }
    let mut version = [0u8; 4];
    reader.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != VERSION {
        return Err(CheckpointError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let mut len = [0u8; 8];
    reader.read_exact(&mut len)?;
    let header_len = u64::from_le_bytes(len) as usize;
    let mut header_bytes = vec![0u8; header_len];
    reader
        .read_exact(&mut header_bytes)
        .map_err(|_| CheckpointError::Format("truncated header".to_string()))?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| CheckpointError::Format(format!("header parse: {e}")))?;
    if header.shapes != header.config.layer_shapes() {
        return Err(CheckpointError::Format(
            "tensor shapes do not chain through the declared architecture".to_string(),
        ));
    }
    let mut layers = Vec::with_capacity(header.shapes.len());
    let mut buf = [0u8; 8];
    for &(in_dim, out_dim) in &header.shapes {
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim * out_dim {
            reader
                .read_exact(&mut buf)
                .map_err(|_| CheckpointError::Format("truncated tensor data".to_string()))?;
            weights.push(f64::from_le_bytes(buf));
        }
        let mut biases = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            reader
                .read_exact(&mut buf)
                .map_err(|_| CheckpointError::Format("truncated tensor data".to_string()))?;
            biases.push(f64::from_le_bytes(buf));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(CheckpointError::Format(
                "non-finite tensor entry".to_string(),
            ));
        }
        layers.push(Dense {
            in_dim,
            out_dim,
            weights,
            biases,
        });
    }
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing)? != 0 {
        return Err(CheckpointError::Format("trailing bytes".to_string()));
    }
    Ok(Checkpoint {
        params: QNetworkParams {
            layers,
            init: header.init,
        },
        config: header.config,
        hyperparams: header.hyperparams,
        step: header.step,
        labels: header.labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn round_trip_is_bit_identical() {
        let config = NetworkConfig {
            input_dim: 5,
            hidden_layers: vec![4, 3],
            output_dim: 2,
            dropout_rate: 0.1,
            output_normalization: true,
        };
        let params = QNetworkParams::init(&config, 77);
        let hp = Hyperparams {
            total_timesteps: 1234,
            seed: 9,
            ..Hyperparams::default()
        };
        let labels = vec!["APT 1".to_string(), "Winnti".to_string()];
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &params, &config, &hp, 1000, &labels).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.params, params);
        assert_eq!(loaded.config, config);
        assert_eq!(loaded.hyperparams, hp);
        assert_eq!(loaded.step, 1000);
        assert_eq!(loaded.labels, labels);
    }

    #[test]
    fn corrupted_file_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bogus.ckpt");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::Format(_))
        ));
    }

    #[test]
    fn truncated_tensor_data_is_rejected() {
        let config = NetworkConfig {
            input_dim: 3,
            hidden_layers: vec![2],
            output_dim: 2,
            dropout_rate: 0.0,
            output_normalization: false,
        };
        let params = QNetworkParams::init(&config, 1);
        let hp = Hyperparams::default();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &params, &config, &hp, 0, &[]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::Format(_))
        ));
    }
}
