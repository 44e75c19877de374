//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "CCDSIMCK"
//! version    u32      schema version
//! activation u8       0 = relu, 1 = tanh
//! layers     u32      number of layer sizes, then one u32 per size
//! meta_len   u32      length of the UTF-8 metadata that follows (JSON)
//! count      u64      number of parameters
//! values     count × f64 (IEEE 754, little-endian), canonical flat order
//! ```

use ccdsim_core::model::{Activation, LayerShape, ModelParams};

use crate::error::{CliError, Result};
use crate::format::SCHEMA_VERSION;

const MAGIC: &[u8; 8] = b"CCDSIMCK";

pub fn encode(params: &ModelParams, meta: &str) -> Vec<u8> {
    let sizes = params.shape().sizes();
    let mut out = Vec::with_capacity(32 + 4 * sizes.len() + meta.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    out.push(match params.activation() {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    });
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a checkpoint into the parameters and their metadata string.
pub fn decode(bytes: &[u8]) -> Result<(ModelParams, String)> {
    let bad = |m: &str| CliError::Checkpoint(m.to_string());
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(bad("not a ccdsim checkpoint"));
    }
    let version = c.u32()?;
    if version != SCHEMA_VERSION {
        return Err(CliError::Checkpoint(format!("unsupported version {version}")));
    }
    let activation = match c.take(1)?[0] {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        _ => return Err(bad("unknown activation")),
    };
    let layers = c.u32()? as usize;
    if layers > 1024 {
        return Err(bad("implausible layer count"));
    }
    let sizes = (0..layers).map(|_| c.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let meta_len = c.u32()? as usize;
    let meta = std::str::from_utf8(c.take(meta_len)?)
        .map_err(|_| bad("metadata is not UTF-8"))?
        .to_string();
    let count = c.u64()?;
    let shape = LayerShape::new(sizes)?;
    if count != shape.param_count() as u64 {
        return Err(bad("parameter count does not match layer sizes"));
    }
    let values = c
        .take(8 * shape.param_count())?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if c.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((ModelParams::from_values(shape, activation, values)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccdsim_core::model::init_model;

    #[test]
    fn round_trip_is_bit_exact() {
        let shape = LayerShape::new(vec![21, 7, 5]).unwrap();
        let mut p = init_model(&shape, Activation::Tanh, 3);
        let mut vals = p.values().to_vec();
        vals[0] = -0.0;
        vals[1] = 5e-324;
        vals[2] = f64::MAX;
        p = ModelParams::from_values(shape, Activation::Tanh, vals).unwrap();
        let bytes = encode(&p, "{\"seed\":3}");
        let (back, meta) = decode(&bytes).unwrap();
        assert_eq!(meta, "{\"seed\":3}");
        assert_eq!(back.shape(), p.shape());
        assert_eq!(back.activation(), p.activation());
        let bits = |m: &ModelParams| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&p));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let p = init_model(&LayerShape::new(vec![2, 2]).unwrap(), Activation::Relu, 1);
        let bytes = encode(&p, "");
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode(&magic).is_err());
        let mut nan = bytes;
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode(&nan).is_err());
    }
}
