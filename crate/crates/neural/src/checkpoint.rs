//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "GRASPCKP"
//! version  u32      currently 1
//! header   u64 length + UTF-8 TOML text
//! count    u64      number of arrays
//! array    u32 name length, name, u32 rank, u64 per dimension,
//!          then the f32 values in row-major order
//! ```
//!
//! The header carries the model configuration under `[model]` and any
//! other tables the caller adds.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Model, ModelConfig};
use crate::params::ParamSet;
use crate::tape::Tensor;
use crate::NeuralError;

pub const MAGIC: &[u8; 8] = b"GRASPCKP";
pub const VERSION: u32 = 1;
const MAX_NAME: usize = 1 << 12;
const MAX_RANK: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: String,
    pub arrays: Vec<(String, Tensor<f32>)>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    model: ModelConfig,
}

fn corrupt(msg: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint(msg.into())
}

impl Checkpoint {
    /// A checkpoint holding only a model and its parameters.
    pub fn from_model(model: &Model, params: &ParamSet<f32>) -> Self {
        let header = toml::to_string(&ModelHeader {
            model: model.config().clone(),
        })
        .expect("model config serializes");
        let mut ck = Self {
            header,
            arrays: Vec::new(),
        };
        ck.push_params("param", params);
        ck
    }

    /// Appends every tensor of `params` under `prefix/name`.
    pub fn push_params(&mut self, prefix: &str, params: &ParamSet<f32>) {
        for (n, t) in params.names().iter().zip(params.tensors()) {
            self.arrays.push((format!("{prefix}/{n}"), t.clone()));
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Reads the `[model]` table of the header.
    pub fn model_config(&self) -> Result<ModelConfig, NeuralError> {
        let h: toml::Table = toml::from_str(&self.header).map_err(|e| corrupt(format!("header: {e}")))?;
        let model = h.get("model").ok_or_else(|| corrupt("header lacks [model]"))?;
        model
            .clone()
            .try_into()
            .map_err(|e| corrupt(format!("model config: {e}")))
    }

    /// Parameters stored under `prefix`, ordered and shaped like `model`.
    pub fn params(&self, model: &Model, prefix: &str) -> Result<ParamSet<f32>, NeuralError> {
        let names = model.param_names();
        let tensors = names
            .iter()
            .map(|n| {
                self.get(&format!("{prefix}/{n}"))
                    .cloned()
                    .ok_or_else(|| corrupt(format!("missing array {prefix}/{n}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let params = ParamSet::new(names, tensors);
        model.check_params(&params)?;
        Ok(params)
    }

    /// The model and its parameters.
    pub fn load_model(&self) -> Result<(Model, ParamSet<f32>), NeuralError> {
        let model = Model::new(self.model_config()?)?;
        let params = self.params(&model, "param")?;
        Ok((model, params))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), NeuralError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.header.len() as u64).to_le_bytes())?;
        w.write_all(self.header.as_bytes())?;
        w.write_all(&(self.arrays.len() as u64).to_le_bytes())?;
        for (name, t) in &self.arrays {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, NeuralError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| corrupt("truncated magic"))?;
        if &magic != MAGIC {
            return Err(corrupt("not a checkpoint"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let header_len = read_u64(&mut r)? as usize;
        let header = String::from_utf8(read_bytes(&mut r, header_len)?).map_err(|_| corrupt("header is not UTF-8"))?;
        let count = read_u64(&mut r)?;
        let mut arrays = Vec::new();
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            if name_len > MAX_NAME {
                return Err(corrupt("array name too long"));
            }
            let name = String::from_utf8(read_bytes(&mut r, name_len)?).map_err(|_| corrupt("bad array name"))?;
            let rank = read_u32(&mut r)? as usize;
            if rank > MAX_RANK {
                return Err(corrupt(format!("{name}: rank {rank}")));
            }
            let shape = (0..rank)
                .map(|_| read_u64(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let len = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| corrupt(format!("{name}: shape overflow")))?;
            let bytes = read_bytes(&mut r, len.checked_mul(4).ok_or_else(|| corrupt("array too large"))?)?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            arrays.push((name, Tensor::new(shape, data)));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self { header, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let tmp = path.with_extension("partial");
        self.write_to(BufWriter::new(File::create(&tmp)?))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_bytes<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>, NeuralError> {
    let mut buf = Vec::new();
    let got = r.take(len as u64).read_to_end(&mut buf)?;
    if got != len {
        return Err(corrupt("truncated"));
    }
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NeuralError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| corrupt("truncated"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NeuralError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| corrupt("truncated"))?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use grasp_core::seed;

    #[test]
    fn round_trip_in_memory() {
        let model = Model::new(ModelConfig {
            hidden: 8,
            channels: vec![8],
            image_size: 8,
            ..ModelConfig::default()
        })
        .unwrap();
        let params = model.init::<f32, _>(&mut seed::rng(3));
        let ck = Checkpoint::from_model(&model, &params);
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        let back = Checkpoint::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, ck);
        let (m2, p2) = back.load_model().unwrap();
        assert_eq!(m2.config(), model.config());
        assert_eq!(p2, params);
    }

    #[test]
    fn rejects_corruption() {
        assert!(Checkpoint::read_from(&b"nonsense"[..]).is_err());
        let ck = Checkpoint {
            header: String::new(),
            arrays: vec![("a".into(), Tensor::new(vec![2], vec![1.0, 2.0]))],
        };
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        for cut in [9, 20, bytes.len() - 1] {
            assert!(Checkpoint::read_from(&bytes[..cut]).is_err());
        }
        bytes.push(0);
        assert!(Checkpoint::read_from(bytes.as_slice()).is_err());
        assert!(ck.load_model().is_err());
    }
}
