//! Versioned binary weight container.
//!
//! Layout (all little-endian): magic "CRKL", version u32, num_branches u32,
//! num_classes u32, blob count u32; then per blob: name length u32 + UTF-8
//! name, ndim u32, dims (u32 each), values as 32-bit floats.

use std::io::{Read, Write};

use super::{ArchitectureSpec, ModelGraph, NnError, Scalar};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CRKL";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Blob {
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

/// A parsed checkpoint: header fields plus named parameter blobs in file
/// order.
#[derive(Debug, Clone)]
pub struct CheckpointData {
    pub version: u32,
    pub num_branches: u32,
    pub num_classes: u32,
    pub blobs: Vec<(String, Blob)>,
}

impl CheckpointData {
    pub fn get(&self, name: &str) -> Option<&Blob> {
        self.blobs.iter().find(|(n, _)| n == name).map(|(_, b)| b)
    }

    /// Rebuild a model, validating every blob against `arch`. The
    /// checkpoint must cover the full architecture.
    pub fn to_model<S: Scalar>(&self, arch: &ArchitectureSpec) -> Result<ModelGraph<S>, NnError> {
        let n_branches = self.num_branches as usize;
        let num_classes = self.num_classes as usize;
        let mut model =
            ModelGraph::<S>::new_glorot(arch.clone(), n_branches, num_classes, 0);
        for (br, branch) in model.branches.iter_mut().enumerate() {
            for (j, block) in branch.iter_mut().enumerate() {
                let p = format!("branch{br}.block{}", j + 1);
                block.bn.gamma = self.fetch(&format!("{p}.bn.gamma"), &[block.bn.gamma.len()])?;
                block.bn.beta = self.fetch(&format!("{p}.bn.beta"), &[block.bn.beta.len()])?;
                block.bn.running_mean =
                    self.fetch(&format!("{p}.bn.running_mean"), &[block.bn.running_mean.len()])?;
                block.bn.running_var =
                    self.fetch(&format!("{p}.bn.running_var"), &[block.bn.running_var.len()])?;
                block.conv.weight = self.fetch(
                    &format!("{p}.conv.weight"),
                    &[block.conv.out_c, block.conv.in_c, 3, 3],
                )?;
                block.conv.bias =
                    self.fetch(&format!("{p}.conv.bias"), &[block.conv.out_c])?;
            }
        }
        model.dense.weight =
            self.fetch("output.weight", &[model.dense.in_dim, model.dense.out_dim])?;
        model.dense.bias = self.fetch("output.bias", &[model.dense.out_dim])?;
        Ok(model)
    }

    fn fetch<S: Scalar>(&self, name: &str, shape: &[usize]) -> Result<Vec<S>, NnError> {
        let blob = self.get(name).ok_or_else(|| {
            NnError::IncompatibleCheckpoint(format!("missing parameter {name}"))
        })?;
        if blob.shape != shape {
            return Err(NnError::IncompatibleCheckpoint(format!(
                "{name}: shape {:?}, expected {:?}",
                blob.shape, shape
            )));
        }
        Ok(blob.values.iter().map(|&v| S::from_f64(v as f64)).collect())
    }
}

pub fn save_checkpoint<S: Scalar, W: Write>(w: &mut W, model: &ModelGraph<S>) -> Result<(), NnError> {
    let io = |e: std::io::Error| NnError::Io(e.to_string());
    let params = model.named_params();
    w.write_all(&CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(model.n_branches() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(model.num_classes as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(params.len() as u32).to_le_bytes()).map_err(io)?;
    for (name, shape, values) in params {
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&(shape.len() as u32).to_le_bytes()).map_err(io)?;
        for d in &shape {
            w.write_all(&(*d as u32).to_le_bytes()).map_err(io)?;
        }
        for v in values {
            w.write_all(&(v.to_f64() as f32).to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(r: &mut R) -> Result<CheckpointData, NnError> {
    let io = |e: std::io::Error| NnError::Io(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(NnError::IncompatibleCheckpoint("bad magic".into()));
    }
    let mut u = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<u32, NnError> {
        r.read_exact(&mut u).map_err(|e| NnError::Io(e.to_string()))?;
        Ok(u32::from_le_bytes(u))
    };
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::IncompatibleCheckpoint(format!("version {version}")));
    }
    let num_branches = read_u32(r)?;
    let num_classes = read_u32(r)?;
    let count = read_u32(r)? as usize;
    let mut blobs = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes).map_err(io)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| NnError::IncompatibleCheckpoint("non-utf8 name".into()))?;
        let ndim = read_u32(r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(r)? as usize);
        }
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut f = [0u8; 4];
        for _ in 0..total {
            r.read_exact(&mut f).map_err(io)?;
            values.push(f32::from_le_bytes(f));
        }
        blobs.push((name, Blob { shape, values }));
    }
    Ok(CheckpointData { version, num_branches, num_classes, blobs })
}
