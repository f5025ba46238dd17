//! On-disk database format. All integers little-endian.
//!
//! ```text
//! magic           4 bytes  "RCDB"
//! format_version  u32
//! m               u32
//! tokenizer_id    u32 length + UTF-8 bytes
//! record_count    u64
//! path_count      u32
//!   path          u32 length + UTF-8 bytes        (path_count times)
//! record                                          (record_count times)
//!   path_index    u32
//!   chunk_index   u32
//!   key_len       u32
//!   cont_len      u32
//!   key tokens    key_len LEB128 varints
//!   continuation  cont_len LEB128 varints
//! has_embeddings  u8 (0 or 1)
//!   dimension     u32
//!   provider_id   u32 length + UTF-8 bytes
//!   vectors       record_count * dimension f32, row-major
//! ```
//!
//! Nothing may follow the last section.

use std::path::Path;

use super::{ChunkRecord, EmbeddingMatrix, RetrievalDatabase};
use crate::error::{Error, Result};
use crate::tokenizer::TokenId;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RCDB";

pub fn save_database(db: &RetrievalDatabase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(db)).map_err(|e| Error::io(path, e))
}

pub fn load_database(path: impl AsRef<Path>) -> Result<RetrievalDatabase> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Parse { location, message, .. } => Error::parse(path.display().to_string(), location, message),
        other => other,
    })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_varint(out: &mut Vec<u8>, mut v: u32) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

pub(crate) fn encode(db: &RetrievalDatabase) -> Vec<u8> {
    let mut out = Vec::with_capacity(db.token_count() * 3 + 64);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, db.m as u32);
    put_str(&mut out, &db.tokenizer_id);
    out.extend_from_slice(&(db.records.len() as u64).to_le_bytes());
    put_u32(&mut out, db.paths.len() as u32);
    for p in &db.paths {
        put_str(&mut out, p);
    }
    for (r, &file) in db.records.iter().zip(&db.record_file) {
        put_u32(&mut out, file);
        put_u32(&mut out, r.chunk_index);
        put_u32(&mut out, r.key_tokens.len() as u32);
        put_u32(&mut out, r.continuation_tokens.len() as u32);
        for &t in r.key_tokens.iter().chain(r.continuation_tokens.iter()) {
            put_varint(&mut out, t);
        }
    }
    match &db.embeddings {
        None => out.push(0),
        Some(m) => {
            out.push(1);
            put_u32(&mut out, m.dimension() as u32);
            put_str(&mut out, m.provider_id());
            for &x in m.as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse("database", format!("offset {}", self.pos), message)
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.err(format!("{what} is not UTF-8")))
    }

    fn varint(&mut self) -> Result<TokenId> {
        let mut v: u64 = 0;
        for shift in (0..35).step_by(7) {
            let b = self.u8("token id")?;
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return u32::try_from(v).map_err(|_| self.err("token id overflows u32"));
            }
        }
        Err(self.err("varint longer than 5 bytes"))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub(crate) fn decode(buf: &[u8]) -> Result<RetrievalDatabase> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::parse(
            "database",
            "offset 0",
            "not a retrieval database (bad magic)",
        ));
    }
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let m = r.u32("chunk size")? as usize;
    let tokenizer_id = r.string("tokenizer id")?;
    let record_count = r.u64("record count")?;
    // every record needs at least 17 bytes
    if record_count > (r.remaining() / 17) as u64 {
        return Err(r.err(format!("record count {record_count} exceeds file size")));
    }
    let path_count = r.u32("path count")? as usize;
    if path_count > r.remaining() / 4 {
        return Err(r.err(format!("path count {path_count} exceeds file size")));
    }
    let mut paths = Vec::with_capacity(path_count);
    for _ in 0..path_count {
        paths.push(r.string("path")?);
    }
    let mut records = Vec::with_capacity(record_count as usize);
    for _ in 0..record_count {
        let file = r.u32("path index")? as usize;
        let path = paths
            .get(file)
            .ok_or_else(|| r.err(format!("path index {file} out of range")))?
            .clone();
        let chunk_index = r.u32("chunk index")?;
        let key_len = r.u32("key length")? as usize;
        let cont_len = r.u32("continuation length")? as usize;
        if key_len + cont_len > r.remaining() {
            return Err(r.err("token array length exceeds file size"));
        }
        let key = (0..key_len).map(|_| r.varint()).collect::<Result<Vec<_>>>()?;
        let cont = (0..cont_len).map(|_| r.varint()).collect::<Result<Vec<_>>>()?;
        records.push(ChunkRecord::new(path, chunk_index, key, cont));
    }
    let embeddings = match r.u8("embedding flag")? {
        0 => None,
        1 => {
            let dim = r.u32("embedding dimension")? as usize;
            let provider = r.string("embedding provider")?;
            let n = dim
                .checked_mul(records.len())
                .filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| r.err("embedding block exceeds file size"))?;
            let raw = r.take(n * 4, "embeddings")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Some(EmbeddingMatrix::new(dim, provider, data)?)
        }
        other => return Err(r.err(format!("bad embedding flag {other}"))),
    };
    if r.remaining() != 0 {
        return Err(r.err(format!("{} trailing bytes", r.remaining())));
    }
    let mut db = RetrievalDatabase::from_records(records, m, tokenizer_id)?;
    if db.paths.len() != paths.len() {
        return Err(Error::Integrity("path table lists unused paths".into()));
    }
    if let Some(e) = embeddings {
        db.set_embeddings(e)?;
    }
    Ok(db)
}
