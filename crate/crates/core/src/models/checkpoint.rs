//! Model checkpoints: `HADM` magic, u16 version, u16 flags, u64 header
//! length, a JSON header, then the float64 parameter blob (little-endian,
//! layer order) followed by the center vector when the objective has one.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{LayerSpec, MlpParams};
use super::objective::Objective;
use super::train::{TrainConfig, TrainedModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HADM";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    objective: Objective,
    layers: Vec<LayerSpec>,
    num_params: usize,
    center_len: usize,
    seed: u64,
    config: TrainConfig,
}

pub fn encode_checkpoint(model: &TrainedModel) -> Vec<u8> {
    let header = Header {
        objective: model.objective,
        layers: model.params.layers().to_vec(),
        num_params: model.params.num_params(),
        center_len: model.center.as_ref().map_or(0, |c| c.len()),
        seed: model.config.seed,
        config: model.config.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in model.params.values().iter().chain(model.center.iter().flatten()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic("checkpoint".into()));
    }
    if bytes.len() < 16 {
        return Err(Error::Truncated("checkpoint header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Truncated("checkpoint header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])?;
    let mut params = MlpParams::zeros(header.layers)?;
    if params.num_params() != header.num_params {
        return Err(Error::DimMismatch {
            expected: params.num_params(),
            actual: header.num_params,
        });
    }
    let blob = &bytes[header_end..];
    let expected = (header.num_params + header.center_len) * 8;
    if blob.len() != expected {
        return Err(Error::Truncated(format!(
            "checkpoint blob has {} bytes, expected {expected}",
            blob.len()
        )));
    }
    let values: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    params.set_values(&values[..header.num_params])?;
    let center = (header.center_len > 0).then(|| values[header.num_params..].to_vec());
    header.objective.check_head(&params)?;
    Ok(TrainedModel {
        objective: header.objective,
        params,
        center,
        config: header.config,
    })
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(&encode_checkpoint(model)))
        .map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(obj: Objective) -> TrainedModel {
        let cfg = TrainConfig {
            hidden_width: 5,
            embed_dim: 3,
            seed: 12,
            ..TrainConfig::for_objective(obj)
        };
        let params = cfg.init_head(4).unwrap();
        TrainedModel {
            objective: obj,
            center: obj.needs_center().then(|| vec![0.25, -1.5, 3.0]),
            params,
            config: cfg,
        }
    }

    #[test]
    fn roundtrip_all_objectives() {
        for obj in Objective::ALL {
            let m = model(obj);
            let back = decode_checkpoint(&encode_checkpoint(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = encode_checkpoint(&model(Objective::DeepSad));
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 8]), Err(Error::Truncated(_))));
        let mut bad = bytes.clone();
        bad[0] = b'Z';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::BadMagic(_))));
    }

    #[test]
    fn file_roundtrip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        let m = model(Objective::Bce);
        save_checkpoint(&m, &p).unwrap();
        let first = std::fs::read(&p).unwrap();
        save_checkpoint(&load_checkpoint(&p).unwrap(), &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
    }
}
