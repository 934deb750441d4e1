//! The `ALLO` frame-embedding file: a 16-byte header (magic, version, frame
//! count, dimension; all little-endian `u32`) followed by `T·D` little-endian
//! `f32` values, frame-major.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const ALLO_MAGIC: [u8; 4] = *b"ALLO";
pub const ALLO_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn load_embedding_file(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes)
}

fn decode(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        let mut found = [0u8; 4];
        let n = bytes.len().min(4);
        found[..n].copy_from_slice(&bytes[..n]);
        if found != ALLO_MAGIC {
            return Err(Error::BadMagic {
                path: path.into(),
                found,
                expected: ALLO_MAGIC,
            });
        }
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4-byte slice");
    if magic != ALLO_MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            found: magic,
            expected: ALLO_MAGIC,
        });
    }
    let version = read_u32(bytes, 4);
    if version != ALLO_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            version,
        });
    }
    let frames = read_u32(bytes, 8) as usize;
    let dim = read_u32(bytes, 12) as usize;
    if frames == 0 || dim == 0 {
        return Err(Error::EmptyEmbedding {
            path: path.into(),
            frames,
            dim,
        });
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = frames * dim * 4;
    if payload.len() != expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            found: payload.len(),
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    Matrix::from_vec(frames, dim, data)
}

/// Serializes `m` at single precision. Values that are not exactly
/// representable as `f32` are rounded to nearest.
pub fn encode(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    out.extend_from_slice(&ALLO_MAGIC);
    out.extend_from_slice(&ALLO_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn write_embedding_file(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(m)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(magic: &[u8; 4], t: u32, d: u32) -> Vec<u8> {
        let mut b = magic.to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&t.to_le_bytes());
        b.extend_from_slice(&d.to_le_bytes());
        b
    }

    #[test]
    fn loads_a_640_dim_file() {
        let mut bytes = header(b"ALLO", 5, 640);
        bytes.extend(std::iter::repeat_n(0u8, 12800));
        let m = decode(Path::new("x"), &bytes).unwrap();
        assert_eq!((m.rows(), m.cols()), (5, 640));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = header(b"XXXX", 1, 1);
        bytes.extend_from_slice(&[0; 4]);
        assert!(matches!(
            decode(Path::new("x"), &bytes),
            Err(Error::BadMagic { found, .. }) if &found == b"XXXX"
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = header(b"ALLO", 2, 3);
        bytes.extend_from_slice(&[0; 20]);
        assert!(matches!(
            decode(Path::new("x"), &bytes),
            Err(Error::Truncated { expected: 24, found: 20, .. })
        ));
    }

    #[test]
    fn zero_frames_or_dim() {
        assert!(matches!(
            decode(Path::new("x"), &header(b"ALLO", 0, 640)),
            Err(Error::EmptyEmbedding { .. })
        ));
        assert!(matches!(
            decode(Path::new("x"), &header(b"ALLO", 3, 0)),
            Err(Error::EmptyEmbedding { .. })
        ));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = header(b"ALLO", 1, 1);
        bytes[4] = 2;
        bytes.extend_from_slice(&[0; 4]);
        assert!(matches!(
            decode(Path::new("x"), &bytes),
            Err(Error::UnsupportedVersion { version: 2, .. })
        ));
    }

    #[test]
    fn header_layout_is_little_endian() {
        let m = Matrix::from_vec(1, 2, vec![1.0, -2.5]).unwrap();
        let bytes = encode(&m);
        assert_eq!(&bytes[..4], b"ALLO");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[20..24], &(-2.5f32).to_le_bytes());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            rows in 1usize..6,
            cols in 1usize..9,
            seed in proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 54),
        ) {
            let data: Vec<f64> = seed.iter().cycle().take(rows * cols).map(|&v| v as f64).collect();
            let m = Matrix::from_vec(rows, cols, data).unwrap();
            let back = decode(Path::new("x"), &encode(&m)).unwrap();
            prop_assert_eq!(back.rows(), rows);
            for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
