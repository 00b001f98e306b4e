//! On-disk cache of imputed hourly grids.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "ICUGRID1"
//! count      u32      number of grids
//! per grid:
//!   stay_id  i64
//!   n_hours  u32
//!   numeric  n_hours × 13 f64, row-major
//!   categ.   n_hours × 7 u32, row-major
//!   mask     n_hours × 13 u8 (0/1), row-major
//! ```
//!
//! The cache key is a SHA-256 over the input files, the binning policy and
//! the schema (including vocabularies).

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::BinPolicy;
use crate::schema::{Schema, NUM_CATEGORICAL, NUM_NUMERICAL};
use crate::types::HourlyGrid;

const MAGIC: &[u8; 8] = b"ICUGRID1";

pub fn cache_key(inputs: &[&Path], policy: &BinPolicy, schema: &Schema) -> Result<String> {
    let mut h = Sha256::new();
    for p in inputs {
        crate::ingest::hash_file(p, &mut h)?;
    }
    h.update(serde_json::to_vec(policy)?);
    h.update(schema.hash());
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn encode_grids(grids: &[HourlyGrid]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grids.len() as u32).to_le_bytes());
    for g in grids {
        out.extend_from_slice(&g.stay_id.to_le_bytes());
        out.extend_from_slice(&(g.n_hours as u32).to_le_bytes());
        for x in &g.numeric {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for c in &g.categorical {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend(g.observed_mask.iter().map(|&b| b as u8));
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Data("grid cache truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode_grids(buf: &[u8]) -> Result<Vec<HourlyGrid>> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Data("not a grid cache file".into()));
    }
    let count = u32::from_le_bytes(c.array()?) as usize;
    let mut grids = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let stay_id = i64::from_le_bytes(c.array()?);
        let n_hours = u32::from_le_bytes(c.array()?) as usize;
        let numeric = c
            .take(n_hours * NUM_NUMERICAL * 8)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let categorical = c
            .take(n_hours * NUM_CATEGORICAL * 4)?
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let observed_mask = c.take(n_hours * NUM_NUMERICAL)?.iter().map(|&b| b != 0).collect();
        grids.push(HourlyGrid {
            stay_id,
            n_hours,
            numeric,
            categorical,
            observed_mask,
        });
    }
    if c.pos != buf.len() {
        return Err(Error::Data("trailing bytes in grid cache".into()));
    }
    Ok(grids)
}

pub fn write_grids(path: &Path, grids: &[HourlyGrid]) -> Result<()> {
    fs::write(path, encode_grids(grids)).map_err(|e| Error::io(path, e))
}

pub fn read_grids(path: &Path) -> Result<Vec<HourlyGrid>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grids(&buf)
}
