//! Little-endian flat binary containers for trained weights.
//!
//! Layout: 8-byte magic, `u32` version, then fields in writer order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct BinWriter {
    buf: Vec<u8>,
}

impl BinWriter {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut w = BinWriter { buf: magic.to_vec() };
        w.u32(version);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// Length-prefixed array.
    pub fn f64s(&mut self, values: &[f64]) {
        self.u64(values.len() as u64);
        for &v in values {
            self.f64(v);
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn save(self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.buf).map_err(|e| Error::io(path, e))
    }
}

pub(crate) struct BinReader {
    buf: Vec<u8>,
    pos: usize,
}

impl BinReader {
    pub fn from_bytes(buf: Vec<u8>, magic: &[u8; 8], version: u32) -> Result<Self> {
        if buf.len() < 12 || &buf[..8] != magic {
            return Err(Error::Format(format!(
                "not a {} file",
                String::from_utf8_lossy(magic).trim_end()
            )));
        }
        let mut r = BinReader { buf, pos: 8 };
        let found = r.u32()?;
        if found != version {
            return Err(Error::Format(format!(
                "unsupported format version {found} (expected {version})"
            )));
        }
        Ok(r)
    }

    pub fn open(path: &Path, magic: &[u8; 8], version: u32) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(buf, magic, version)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("truncated file".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    pub fn f64s(&mut self, expected: usize) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n != expected {
            return Err(Error::Format(format!("array of {n} values, expected {expected}")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    /// Length-prefixed array of any length.
    pub fn f64s_any(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::Format("truncated file".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}
