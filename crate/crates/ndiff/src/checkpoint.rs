//! Binary checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "NDIFFCK1"
//! hlen     u32      length of the JSON header
//! header   hlen bytes of UTF-8 JSON: model names, input shapes, layer specs
//!                   and a free-form `meta` value
//! tensors  for each model, for each layer: its parameters, then (batch norm
//!          only) running mean and running variance. Each tensor is
//!          u32 rank, u64 extents[rank], f64 values[product(extents)].
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{NdError, Result};
use crate::model::{LayerSpec, RunningStats, Sequential};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"NDIFFCK1";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    models: Vec<ModelHeader>,
    meta: serde_json::Value,
}

/// Named models plus caller metadata read back from a checkpoint.
pub struct Checkpoint {
    pub models: Vec<(String, Sequential)>,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn take(&mut self, name: &str) -> Result<Sequential> {
        let pos = self
            .models
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| NdError::Checkpoint(format!("no model named {name:?}")))?;
        Ok(self.models.remove(pos).1)
    }
}

fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    w.write_u32::<LittleEndian>(t.ndim() as u32)?;
    for &d in t.shape() {
        w.write_u64::<LittleEndian>(d as u64)?;
    }
    for &v in t.data() {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let rank = r.read_u32::<LittleEndian>()? as usize;
    if rank > 8 {
        return Err(NdError::Checkpoint(format!("implausible tensor rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.read_u64::<LittleEndian>()? as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    Tensor::new(shape, data)
}

pub fn write_checkpoint<W: Write>(
    w: &mut W,
    models: &[(&str, &Sequential)],
    meta: &serde_json::Value,
) -> Result<()> {
    let header = Header {
        models: models
            .iter()
            .map(|(name, m)| ModelHeader {
                name: name.to_string(),
                input_shape: m.input_shape().to_vec(),
                layers: m.layers().to_vec(),
            })
            .collect(),
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| NdError::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(json.len() as u32)?;
    w.write_all(&json)?;
    for (_, m) in models {
        for (params, running) in m.params().iter().zip(m.running()) {
            for t in params {
                write_tensor(w, t)?;
            }
            if let Some(s) = running {
                write_tensor(w, &Tensor::vector(s.mean.clone()))?;
                write_tensor(w, &Tensor::vector(s.var.clone()))?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NdError::Checkpoint("bad magic".into()));
    }
    let hlen = r.read_u32::<LittleEndian>()? as usize;
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json)?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| NdError::Checkpoint(e.to_string()))?;
    let mut models = Vec::with_capacity(header.models.len());
    for mh in header.models {
        let mut params = Vec::with_capacity(mh.layers.len());
        let mut running = Vec::with_capacity(mh.layers.len());
        for spec in &mh.layers {
            let count = match spec {
                LayerSpec::Dense { .. }
                | LayerSpec::BatchNorm
                | LayerSpec::Conv1d { .. }
                | LayerSpec::Lstm { .. } => 2,
                _ => 0,
            };
            params.push((0..count).map(|_| read_tensor(r)).collect::<Result<Vec<_>>>()?);
            running.push(if matches!(spec, LayerSpec::BatchNorm) {
                Some(RunningStats {
                    mean: read_tensor(r)?.into_data(),
                    var: read_tensor(r)?.into_data(),
                })
            } else {
                None
            });
        }
        let model = Sequential::from_parts(mh.input_shape, mh.layers, params, running)?;
        models.push((mh.name, model));
    }
    Ok(Checkpoint {
        models,
        meta: header.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_parameters_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Sequential::new(
            &[5],
            vec![
                LayerSpec::Dense { units: 4 },
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::Dense { units: 2 },
            ],
            &mut rng,
        )
        .unwrap();
        let meta = serde_json::json!({"note": "x"});
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("gen", &m)], &meta).unwrap();
        let mut ck = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(ck.meta, meta);
        let back = ck.take("gen").unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.running(), m.running());
        assert_eq!(back.layers(), m.layers());
    }

    #[test]
    fn truncated_or_foreign_input_fails() {
        assert!(read_checkpoint(&mut &b"NOTACKPT"[..]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Sequential::new(&[2], vec![LayerSpec::Dense { units: 2 }], &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("m", &m)], &serde_json::Value::Null).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
