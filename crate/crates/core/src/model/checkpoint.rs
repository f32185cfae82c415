//! Binary checkpoint container.
//!
//! Layout: 8-byte magic, u32 LE version, u32 LE header length, JSON header,
//! then the embedding table, exact-head and range-head weights as LE f64.

use serde::{Deserialize, Serialize};

use super::{BaselineEncoder, DualHeadModel, Encoder, ModelConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DURPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    encoder: String,
    config: ModelConfig,
    table_len: usize,
    w_e_len: usize,
    w_r_len: usize,
}

const ENCODER_KIND: &str = "baseline-hashed-window";

pub fn save(model: &DualHeadModel<BaselineEncoder>, seed: u64) -> Result<Vec<u8>> {
    let header = Header {
        encoder: ENCODER_KIND.to_string(),
        config: model.config(seed),
        table_len: model.encoder.params().len(),
        w_e_len: model.w_e.len(),
        w_r_len: model.w_r.len(),
    };
    let header = serde_json::to_vec(&header)?;
    let n = header.len();
    let mut out = Vec::with_capacity(16 + n + 8 * (header_floats(model)));
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for x in model.encoder.params().iter().chain(&model.w_e).chain(&model.w_r) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

fn header_floats(model: &DualHeadModel<BaselineEncoder>) -> usize {
    model.encoder.params().len() + model.w_e.len() + model.w_r.len()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?, what)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Returns the model and the seed it was created with.
pub fn load(bytes: &[u8]) -> Result<(DualHeadModel<BaselineEncoder>, u64)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a durpipe checkpoint".into()));
    }
    let version = cur.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, expected: CHECKPOINT_VERSION });
    }
    let n = cur.u32("header length")? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(n, "header")?).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.encoder != ENCODER_KIND {
        return Err(Error::Checkpoint(format!("unknown encoder kind {:?}", header.encoder)));
    }
    let c = &header.config;
    if header.table_len != c.dim * c.buckets || header.w_e_len != c.dim || header.w_r_len != c.dim * c.inventory.len() {
        return Err(Error::Checkpoint("parameter sizes disagree with header dimensions".into()));
    }
    let table = cur.floats(header.table_len, "embedding table")?;
    let w_e = cur.floats(header.w_e_len, "exact head")?;
    let w_r = cur.floats(header.w_r_len, "range head")?;
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let encoder = BaselineEncoder::from_parts(c.dim, c.buckets, c.window, table)
        .ok_or_else(|| Error::Checkpoint("invalid encoder dimensions".into()))?;
    Ok((DualHeadModel { encoder, w_e, w_r, inventory: c.inventory }, c.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duration::UnitInventory;

    fn model() -> DualHeadModel {
        let cfg = ModelConfig { dim: 4, buckets: 32, window: 2, inventory: UnitInventory::Seven, seed: 9 };
        DualHeadModel::from_config(&cfg).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let m = model();
        let bytes = save(&m, 9).unwrap();
        let (back, seed) = load(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(seed, 9);
        assert_eq!(save(&back, seed).unwrap(), bytes);
    }

    #[test]
    fn truncation_is_an_error() {
        let bytes = save(&model(), 0).unwrap();
        for cut in [0, 5, 12, 20, bytes.len() - 1] {
            assert!(matches!(load(&bytes[..cut]), Err(Error::Checkpoint(_))), "cut at {cut}");
        }
    }

    #[test]
    fn old_version_rejected() {
        let mut bytes = save(&model(), 0).unwrap();
        bytes[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(load(&bytes), Err(Error::UnsupportedVersion { found: 0, expected: 1 })));
    }
}
