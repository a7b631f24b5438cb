//! Little-endian binary artifact helpers and content hashing.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Provenance embedded at the tail of every binary artifact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    /// Hash of the configuration that produced the artifact.
    pub config_hash: String,
    /// Content hashes of the artifacts this one was derived from.
    pub upstream: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4]) -> Self {
        let mut buf = magic.to_vec();
        buf.write_u32::<LittleEndian>(FORMAT_VERSION).unwrap();
        Self { buf }
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.write_u32::<LittleEndian>(v).unwrap();
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.write_u64::<LittleEndian>(v).unwrap();
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.write_f64::<LittleEndian>(v).unwrap();
        self
    }

    pub fn f64s(&mut self, vs: &[f64]) -> &mut Self {
        for &v in vs {
            self.f64(v);
        }
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn finish(mut self, meta: &ArtifactMeta) -> Vec<u8> {
        let json = serde_json::to_string(meta).expect("meta serializes");
        self.str(&json);
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], magic: &[u8; 4], what: &'static str) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != magic {
            return Err(Error::artifact(what, "bad magic bytes"));
        }
        let mut r = Self {
            cur: Cursor::new(bytes),
            what,
        };
        r.cur.set_position(4);
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::artifact(what, format!("unsupported version {version}")));
        }
        Ok(r)
    }

    fn fail<T>(&self, e: std::io::Error) -> Result<T> {
        Err(Error::artifact(
            self.what,
            format!("at byte {}: {e}", self.cur.position()),
        ))
    }

    pub fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().or_else(|e| self.fail(e))
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.cur
            .read_u32::<LittleEndian>()
            .or_else(|e| self.fail(e))
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.cur
            .read_u64::<LittleEndian>()
            .or_else(|e| self.fail(e))
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.cur
            .read_f64::<LittleEndian>()
            .or_else(|e| self.fail(e))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let remaining = self.cur.get_ref().len() as u64 - self.cur.position();
        if (n as u64).saturating_mul(8) > remaining {
            return Err(Error::artifact(self.what, "truncated numeric block"));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let remaining = self.cur.get_ref().len() as u64 - self.cur.position();
        if len as u64 > remaining {
            return Err(Error::artifact(self.what, "truncated string"));
        }
        let mut buf = vec![0; len];
        self.cur.read_exact(&mut buf).or_else(|e| self.fail(e))?;
        String::from_utf8(buf).map_err(|_| Error::artifact(self.what, "invalid UTF-8"))
    }

    pub fn finish(mut self) -> Result<ArtifactMeta> {
        let json = self.str()?;
        if self.cur.position() != self.cur.get_ref().len() as u64 {
            return Err(Error::artifact(self.what, "trailing bytes"));
        }
        serde_json::from_str(&json).map_err(|e| Error::artifact(self.what, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writer_reader_round_trip() {
        let meta = ArtifactMeta {
            config_hash: "abc".into(),
            upstream: vec!["x".into()],
        };
        let mut w = Writer::new(b"TEST");
        w.u8(7).u32(9).u64(11).f64(-0.5).str("hi").f64s(&[1.0, 2.0]);
        let bytes = w.finish(&meta);
        let mut r = Reader::new(&bytes, b"TEST", "test").unwrap();
        assert_eq!(r.u8().unwrap(), 7);
        assert_eq!(r.u32().unwrap(), 9);
        assert_eq!(r.u64().unwrap(), 11);
        assert_eq!(r.f64().unwrap(), -0.5);
        assert_eq!(r.str().unwrap(), "hi");
        assert_eq!(r.f64s(2).unwrap(), vec![1.0, 2.0]);
        assert_eq!(r.finish().unwrap(), meta);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let bytes = Writer::new(b"AAAA").finish(&ArtifactMeta::default());
        assert!(Reader::new(&bytes, b"BBBB", "x").is_err());
        let mut r = Reader::new(&bytes[..10], b"AAAA", "x").unwrap();
        assert!(r.str().is_err());
    }
}
