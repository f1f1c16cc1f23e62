//! Flat binary model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic       8 bytes  "PBCMODL1"
//! kind        u32      0 logistic, 1 mlp, 2 ridge
//! n_layers    u32      number of widths that follow
//! widths      u64 x n_layers   input, hidden.., classes
//! final_loss  f64
//! n_params    u64
//! params      f64 x n_params
//! ```

use std::path::Path;

use super::network::{Architecture, LearnerKind};
use super::TrainedModel;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"PBCMODL1";

pub fn encode_model(model: &TrainedModel) -> Vec<u8> {
    let arch = model.architecture();
    let mut out = Vec::with_capacity(32 + 8 * (arch.layers.len() + model.params().len()));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&arch.kind.code().to_le_bytes());
    out.extend_from_slice(&(arch.layers.len() as u32).to_le_bytes());
    for &w in &arch.layers {
        out.extend_from_slice(&(w as u64).to_le_bytes());
    }
    out.extend_from_slice(&model.final_loss().to_le_bytes());
    out.extend_from_slice(&(model.params().len() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Data("model file is truncated".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MODEL_MAGIC {
        return Err(Error::Data("not a model file (bad magic)".into()));
    }
    let kind = LearnerKind::from_code(r.u32()?)
        .ok_or_else(|| Error::Data("unknown learner kind in model file".into()))?;
    let n_layers = r.u32()? as usize;
    if n_layers < 2 || n_layers > 64 {
        return Err(Error::Data(format!("implausible layer count {n_layers}")));
    }
    let layers = (0..n_layers)
        .map(|_| r.u64().map(|w| w as usize))
        .collect::<Result<Vec<_>>>()?;
    if layers.contains(&0) {
        return Err(Error::Data("zero-width layer in model file".into()));
    }
    let final_loss = r.f64()?;
    let n_params = r.u64()? as usize;
    let arch = Architecture { kind, layers };
    if n_params != arch.param_count() {
        return Err(Error::Data(format!(
            "model file declares {n_params} parameters, architecture needs {}",
            arch.param_count()
        )));
    }
    let params = (0..n_params).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if !r.buf.is_empty() {
        return Err(Error::Data("trailing bytes after model parameters".into()));
    }
    TrainedModel::new(arch, params, final_loss)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    crate::harness::report::write_atomic(path, &encode_model(model))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
