//! `PICM` checkpoint files.
//!
//! Layout, all integers little-endian `u32`:
//! magic `PICM`, version `1`, four kernel sizes, four dilations, channels,
//! dropout rate (`f64`), input dim, class count, pooled steps, entry count,
//! then per registry entry: name length, UTF-8 name, rank, dims, and the
//! payload as little-endian `f32`.

use std::fs;
use std::path::Path;

use super::config::{ModelConfig, LAYERS};
use super::params::ModelParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PICM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_checkpoint(cfg: &ModelConfig, params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    cfg.kernels.iter().for_each(|&k| put(&mut out, k));
    cfg.dilations.iter().for_each(|&d| put(&mut out, d));
    put(&mut out, cfg.channels);
    out.extend_from_slice(&cfg.dropout_rate.to_le_bytes());
    put(&mut out, cfg.input_dim);
    put(&mut out, cfg.n_classes);
    put(&mut out, cfg.pooled_steps);
    put(&mut out, params.entries().len());
    for e in params.entries() {
        put(&mut out, e.name.len());
        out.extend_from_slice(e.name.as_bytes());
        put(&mut out, e.shape.len());
        e.shape.iter().for_each(|&d| put(&mut out, d));
        for &v in &e.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Shape(format!("checkpoint truncated at byte {}", self.at))
        })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelConfig, ModelParams)> {
    let mut r = Reader { bytes, at: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            path: "<checkpoint>".into(),
            found: magic,
            expected: CHECKPOINT_MAGIC,
        });
    }
    let version = r.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: "<checkpoint>".into(),
            version,
        });
    }
    let mut kernels = [0; LAYERS];
    for k in &mut kernels {
        *k = r.u32()?;
    }
    let mut dilations = [0; LAYERS];
    for d in &mut dilations {
        *d = r.u32()?;
    }
    let channels = r.u32()?;
    let dropout_rate = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    let cfg = ModelConfig {
        kernels,
        dilations,
        channels,
        dropout_rate,
        input_dim: r.u32()?,
        n_classes: r.u32()?,
        pooled_steps: r.u32()?,
    };
    cfg.validate()?;
    let count = r.u32()?;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()?;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Shape("checkpoint entry name is not UTF-8".into()))?;
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = r
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        entries.push((name, shape, data));
    }
    if r.at != bytes.len() {
        return Err(Error::Shape("trailing bytes after checkpoint".into()));
    }
    let params = ModelParams::from_entries(&cfg, entries)?;
    Ok((cfg, params))
}

pub fn write_checkpoint(path: impl AsRef<Path>, cfg: &ModelConfig, params: &ModelParams) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(cfg, params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(ModelConfig, ModelParams)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        Error::BadMagic { found, expected, .. } => Error::BadMagic {
            path: path.into(),
            found,
            expected,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::params::init_params;

    #[test]
    fn round_trip_at_single_precision() {
        let cfg = ModelConfig::new([3, 5, 7, 9], [1, 2, 3, 4], 4, 0.3, 6, 3).unwrap();
        let p = init_params(&cfg, Some(9), 0).unwrap();
        let bytes = encode_checkpoint(&cfg, &p);
        assert_eq!(&bytes[..4], b"PICM");
        let (cfg2, p2) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(cfg2, cfg);
        for (a, b) in p.entries().iter().zip(p2.entries()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        // a second pass is bit-stable
        assert_eq!(encode_checkpoint(&cfg2, &p2), bytes);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_checkpoint(b"NOPE").is_err());
        let cfg = ModelConfig::new([3; 4], [1; 4], 2, 0.0, 2, 2).unwrap();
        let p = init_params(&cfg, None, 0).unwrap();
        let mut bytes = encode_checkpoint(&cfg, &p);
        bytes.pop();
        assert!(decode_checkpoint(&bytes).is_err());
    }
}
