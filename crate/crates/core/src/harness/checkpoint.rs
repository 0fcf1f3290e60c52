//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `BPTS`, u32 version, u32 config length and
//! the config text, u32 array count, then per array a u16 name length, the
//! name, a u8 element kind (0 = f64, 1 = u64), a u64 element count and the
//! elements. A CRC32 of everything before it closes the file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BPTS";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    U64(Vec<u64>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub arrays: Vec<(String, ArrayData)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint {
                path: self.path.to_path_buf(),
                message: "truncated file".into(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Checkpoint {
            path: self.path.to_path_buf(),
            message: "text block is not UTF-8".into(),
        })
    }
}

impl Checkpoint {
    pub fn push_f64(&mut self, name: impl Into<String>, data: Vec<f64>) {
        self.arrays.push((name.into(), ArrayData::F64(data)));
    }

    pub fn push_u64(&mut self, name: impl Into<String>, data: Vec<u64>) {
        self.arrays.push((name.into(), ArrayData::U64(data)));
    }

    fn find(&self, name: &str) -> Option<&ArrayData> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn f64(&self, name: &str) -> Result<&[f64]> {
        match self.find(name) {
            Some(ArrayData::F64(v)) => Ok(v),
            _ => Err(Error::input(format!(
                "checkpoint has no f64 array `{name}`"
            ))),
        }
    }

    pub fn u64(&self, name: &str) -> Result<&[u64]> {
        match self.find(name) {
            Some(ArrayData::U64(v)) => Ok(v),
            _ => Err(Error::input(format!(
                "checkpoint has no u64 array `{name}`"
            ))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, data) in &self.arrays {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match data {
                ArrayData::F64(v) => {
                    out.push(0);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                ArrayData::U64(v) => {
                    out.push(1);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Verifies the checksum, then the magic and version, before decoding anything.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
        let bad = |message: &str| Error::Checkpoint {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        if bytes.len() < MAGIC.len() + 8 {
            return Err(bad("file too short"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader {
            bytes: body,
            pos: 0,
            path,
        };
        if r.take(4)? != MAGIC {
            return Err(bad("not a checkpoint (bad magic bytes)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let config_len = r.u32()? as usize;
        let config = r.string(config_len)?;
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = r.string(name_len)?;
            let kind = r.u8()?;
            let n = usize::try_from(r.u64()?).map_err(|_| bad("array too large"))?;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| bad("array too large"))?)?;
            let words = raw.chunks_exact(8).map(|c| c.try_into().expect("8 bytes"));
            let data = match kind {
                0 => ArrayData::F64(words.map(f64::from_le_bytes).collect()),
                1 => ArrayData::U64(words.map(u64::from_le_bytes).collect()),
                k => return Err(bad(&format!("unknown array kind {k}"))),
            };
            arrays.push((name, data));
        }
        if r.pos != body.len() {
            return Err(bad("trailing bytes after the last array"));
        }
        Ok(Checkpoint { config, arrays })
    }

    /// Writes to a temporary sibling, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = tmp_path(path);
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Checkpoint::from_bytes(&bytes, path)
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint {
            config: "seed = 3\n".into(),
            arrays: Vec::new(),
        };
        c.push_f64("w", vec![1.5, -0.0, f64::MIN_POSITIVE]);
        c.push_u64("rng", vec![u64::MAX, 7]);
        c
    }

    #[test]
    fn bytes_round_trip() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes(), Path::new("x")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.f64("w").unwrap()[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let mut bytes = sample().to_bytes();
        bytes[20] ^= 0x40;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes, Path::new("x")),
            Err(Error::Checksum { .. })
        ));
    }

    #[test]
    fn other_version_is_refused() {
        let mut bytes = sample().to_bytes();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        let n = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..n]);
        bytes[n..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes, Path::new("x")),
            Err(Error::Version {
                found: 2,
                expected: 1
            })
        ));
    }
}
