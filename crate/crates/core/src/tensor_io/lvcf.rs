//! LVCF: a minimal little-endian container for one dense `f32` matrix.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "LVCF"
//!      4     1  version (1)
//!      5     1  dtype (1 = IEEE-754 binary32)
//!      6     2  reserved, zero
//!      8     8  rows, u64 LE
//!     16     8  cols, u64 LE
//!     24   4·n  values, f32 LE, row-major
//! ```

use std::path::Path;

use nalgebra::DMatrix;

use super::fsutil::write_atomic;
use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LVCF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 24;

/// Size in bytes of an encoded `rows × cols` matrix.
pub fn encoded_len(rows: usize, cols: usize) -> usize {
    HEADER_LEN + 4 * rows * cols
}

pub fn encode(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(encoded_len(m.rows(), m.cols()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, DTYPE_F32, 0, 0]);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m[(i, j)] as f32;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Length {
            what: "header",
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {:?}, expected \"LVCF\"", &bytes[0..4]),
        });
    }
    if bytes[4] != VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {}", bytes[4]),
        });
    }
    if bytes[5] != DTYPE_F32 {
        return Err(Error::Format {
            offset: 5,
            message: format!("unsupported dtype {}", bytes[5]),
        });
    }
    if let Some(k) = bytes[6..8].iter().position(|&b| b != 0) {
        return Err(Error::Format {
            offset: 6 + k as u64,
            message: "reserved byte is not zero".into(),
        });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if rows == 0 {
        return Err(Error::Format {
            offset: 8,
            message: "row count is zero".into(),
        });
    }
    if cols == 0 {
        return Err(Error::Format {
            offset: 16,
            message: "column count is zero".into(),
        });
    }
    let payload_len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| n <= usize::MAX as u64 - HEADER_LEN as u64)
        .ok_or_else(|| Error::Format {
            offset: 8,
            message: format!("{rows}x{cols} matrix is too large"),
        })?;
    let found = (bytes.len() - HEADER_LEN) as u64;
    if found != payload_len {
        return Err(Error::Length {
            what: "payload",
            expected: payload_len,
            found,
        });
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    for (n, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format {
                offset: (HEADER_LEN + 4 * n) as u64,
                message: format!("non-finite value {v}"),
            });
        }
        m[(n / cols, n % cols)] = f64::from(v);
    }
    FeatureMatrix::new(m)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Writes `m` as LVCF through a temporary file renamed into place.
///
/// Values are narrowed to `f32`; a value that overflows `f32` is rejected.
pub fn write_matrix(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(m)?;
    write_atomic(path.as_ref(), &bytes)
}
