//! Index file: `"QSIDX1"`, u8 kind, u32 V, u32 n, `V·n` f32 rows, `V` u32 ids.
//!
//! Only item rows are stored; the flatten index recomputes `Γ₂` on load.

use std::path::Path;

use super::{ItemMatrix, MatchIndex};
use crate::error::{Error, Result};
use crate::io::{invalid, put_u32, read_file, to_u32, write_atomic, Reader};

const MAGIC: &[u8; 6] = b"QSIDX1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexKind {
    Flatten = 1,
    Decomposition = 2,
}

impl IndexKind {
    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(IndexKind::Flatten),
            2 => Some(IndexKind::Decomposition),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IndexKind::Flatten => "flatten",
            IndexKind::Decomposition => "decomp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "flatten" => Ok(IndexKind::Flatten),
            "decomp" | "decomposition" => Ok(IndexKind::Decomposition),
            other => Err(Error::Input(format!("unknown index kind {other:?} (flatten|decomp)"))),
        }
    }
}

pub fn encode_index(index: &MatchIndex) -> Result<Vec<u8>> {
    let items = index.items();
    let mut out = Vec::with_capacity(16 + items.rows().len() * 4 + items.len() * 4);
    out.extend_from_slice(MAGIC);
    out.push(index.kind() as u8);
    put_u32(&mut out, to_u32(items.len(), "item count")?);
    put_u32(&mut out, to_u32(items.dim(), "item dimension")?);
    for &x in items.rows() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    for &id in items.ids() {
        put_u32(&mut out, id);
    }
    Ok(out)
}

pub fn decode_index(bytes: &[u8]) -> Result<MatchIndex> {
    let mut r = Reader::new(bytes);
    r.expect_magic(MAGIC)?;
    let kind = IndexKind::from_tag(r.u8()?).ok_or_else(|| invalid("unknown index kind tag"))?;
    let v = r.u32()? as usize;
    let n = r.u32()? as usize;
    let expected = v.checked_mul(n).and_then(|c| c.checked_add(v)).and_then(|c| c.checked_mul(4));
    if expected != Some(r.remaining()) {
        return Err(invalid(format!("index body has {} bytes, expected {:?}", r.remaining(), expected)).into());
    }
    let mut rows = Vec::with_capacity(v * n);
    for _ in 0..v * n {
        rows.push(r.f32()? as f64);
    }
    let ids = (0..v).map(|_| r.u32()).collect::<std::io::Result<Vec<_>>>()?;
    r.finish()?;
    let items = ItemMatrix::new(n, rows, ids).map_err(|e| invalid(format!("corrupt item table: {e}")))?;
    Ok(MatchIndex::build(kind, items))
}

pub fn save_index(index: &MatchIndex, path: &Path) -> Result<()> {
    write_atomic(path, &encode_index(index)?)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<MatchIndex> {
    decode_index(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MatchIndex {
        let rows = vec![0.1, 1.0 / 3.0, -2.0, 0.7, 0.25, 9.5];
        MatchIndex::build(IndexKind::Flatten, ItemMatrix::new(2, rows, vec![4, 1, 8]).unwrap())
    }

    #[test]
    fn round_trip_is_exact() {
        let idx = sample();
        let back = decode_index(&encode_index(&idx).unwrap()).unwrap();
        assert_eq!(back, idx);
        let d = MatchIndex::build(IndexKind::Decomposition, idx.items().clone());
        assert_eq!(decode_index(&encode_index(&d).unwrap()).unwrap(), d);
    }

    #[test]
    fn corrupt_files_are_io_errors() {
        let bytes = encode_index(&sample()).unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_index(&bad_magic), Err(Error::Io(_))));
        assert!(matches!(decode_index(&bytes[..bytes.len() - 1]), Err(Error::Io(_))));
        let mut bad_kind = bytes.clone();
        bad_kind[6] = 7;
        assert!(matches!(decode_index(&bad_kind), Err(Error::Io(_))));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(IndexKind::parse("flatten").unwrap(), IndexKind::Flatten);
        assert_eq!(IndexKind::parse("decomp").unwrap(), IndexKind::Decomposition);
        assert!(IndexKind::parse("hnsw").is_err());
    }
}
