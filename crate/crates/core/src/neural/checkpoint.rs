//! Flat binary model checkpoints. All integers little-endian:
//!
//! ```text
//! magic        8 bytes  "ICUBCKPT"
//! version      u32      1
//! schema hash  32 bytes SHA-256 of the schema incl. vocabularies
//! spec length  u32, then that many bytes of JSON-encoded ModelSpec
//! block count  u32
//! per block:   name length u16, name bytes, rows u32, cols u32
//! body:        every block's f64 values, in block order, row-major
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::neural::{Model, ModelSpec};

const MAGIC: &[u8; 8] = b"ICUBCKPT";
const VERSION: u32 = 1;

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.schema_hash);
    let spec = serde_json::to_vec(&model.spec)?;
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&(model.blocks().len() as u32).to_le_bytes());
    for b in model.blocks() {
        out.extend_from_slice(&(b.name.len() as u16).to_le_bytes());
        out.extend_from_slice(b.name.as_bytes());
        out.extend_from_slice(&(b.rows as u32).to_le_bytes());
        out.extend_from_slice(&(b.cols as u32).to_le_bytes());
    }
    for x in model.params() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Decodes a checkpoint, refusing one trained against another schema.
pub fn decode(buf: &[u8], expected_schema_hash: &[u8; 32]) -> Result<Model> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    if &hash != expected_schema_hash {
        return Err(Error::Checkpoint("schema hash does not match the active vocabulary".into()));
    }
    let n = r.u32()? as usize;
    let spec: ModelSpec = serde_json::from_slice(r.take(n)?)?;
    let mut model = Model::new(spec, hash, 0)?;
    let blocks = r.u32()? as usize;
    if blocks != model.blocks().len() {
        return Err(Error::Checkpoint(format!("expected {} blocks, found {blocks}", model.blocks().len())));
    }
    for want in model.blocks().to_vec() {
        let len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?;
        let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
        if name != want.name || rows != want.rows || cols != want.cols {
            return Err(Error::Checkpoint(format!(
                "block `{name}` [{rows}×{cols}] does not match `{}` [{}×{}]",
                want.name, want.rows, want.cols
            )));
        }
    }
    let body = r.take(model.n_params() * 8)?;
    for (p, b) in model.params_mut().iter_mut().zip(body.chunks_exact(8)) {
        *p = f64::from_le_bytes(b.try_into().expect("8 bytes"));
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, encode(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path, expected_schema_hash: &[u8; 32]) -> Result<Model> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf, expected_schema_hash)
}
