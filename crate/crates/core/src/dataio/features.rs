//! `PSF1` feature files: a 16-byte header (magic, u32 frames, u32 dim,
//! reserved zero word), then frames x dim little-endian `f32`, frame-major.

use std::fs;
use std::path::Path;

use crate::encoder::VideoFeatures;
use crate::error::{Error, Result};
use crate::numerics::Array2;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"PSF1";
pub const HEADER_LEN: usize = 16;

pub fn encode_features<T: Scalar>(x: &VideoFeatures<T>) -> Vec<u8> {
    let m = x.matrix();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in m.as_slice() {
        let f = v.to_f32().unwrap_or(f32::NAN);
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_features<T: Scalar>(bytes: &[u8]) -> Result<VideoFeatures<T>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic, expected PSF1".into(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len(),
            message: format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
        });
    }
    let frames = read_u32(bytes, 4) as usize;
    let dim = read_u32(bytes, 8) as usize;
    if read_u32(bytes, 12) != 0 {
        return Err(Error::Format {
            offset: 12,
            message: "reserved header word is not zero".into(),
        });
    }
    let expected = HEADER_LEN + 4 * frames * dim;
    if bytes.len() < expected {
        return Err(Error::Format {
            offset: bytes.len(),
            message: format!("truncated data: {frames}x{dim} needs {expected} bytes"),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format {
            offset: expected,
            message: format!("{} trailing bytes", bytes.len() - expected),
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64))
        .collect();
    VideoFeatures::new(Array2::from_vec(frames, dim, data)?)
}

pub fn save_features<T: Scalar>(x: &VideoFeatures<T>, path: &Path) -> Result<()> {
    fs::write(path, encode_features(x)).map_err(|e| Error::io(path, e))
}

pub fn load_features<T: Scalar>(path: &Path) -> Result<VideoFeatures<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}
