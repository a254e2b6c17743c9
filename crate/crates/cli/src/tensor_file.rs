//! Binary tensor container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"TIDT" | version: u16 | order: u16 | extents: order × u64 | payload: f64 × ∏extents
//! ```
//!
//! The payload is row-major (last index fastest).

use std::fs;
use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;
use thiserror::Error;
use tidt_core::DenseTensor;

pub const MAGIC: &[u8; 4] = b"TIDT";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a tensor file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported format version {0} (expected {VERSION})")]
    UnsupportedVersion(u16),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after the payload")]
    TrailingBytes(usize),
    #[error("invalid tensor: {0}")]
    Tensor(#[from] tidt_core::TidtError),
}

const HEADER: usize = 8;

pub fn encode(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * (t.order() + t.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(t.order() as u16).to_le_bytes());
    for &n in t.shape() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DenseTensor, FormatError> {
    let truncated = |expected: usize| FormatError::Truncated { expected, found: bytes.len() };
    if bytes.len() < 4 {
        return Err(if MAGIC.starts_with(bytes) { truncated(HEADER) } else { FormatError::BadMagic });
    }
    if &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < HEADER {
        return Err(truncated(HEADER));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let order = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let header = HEADER + 8 * order;
    if bytes.len() < header {
        return Err(truncated(header));
    }
    let shape: Vec<usize> = bytes[HEADER..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")) as usize)
        .collect();
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(header))
        .ok_or(tidt_core::TidtError::InvalidShape(format!("{shape:?} overflows")))?;
    if bytes.len() < count {
        return Err(truncated(count));
    }
    if bytes.len() > count {
        return Err(FormatError::TrailingBytes(bytes.len() - count));
    }
    let data = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(DenseTensor::from_vec(&shape, data)?)
}

pub fn read(path: &Path) -> Result<DenseTensor, FormatError> {
    let bytes = fs::read(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
    decode(&bytes)
}

pub fn write(path: &Path, t: &DenseTensor) -> Result<(), FormatError> {
    write_atomic(path, &encode(t))
}

/// Writes through a temporary file in the target directory, then renames it
/// into place so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let io = |source| FormatError::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = DenseTensor::from_vec(&[2, 1], vec![1.0, -2.5]).unwrap();
        let bytes = encode(&t);
        assert_eq!(&bytes[..4], b"TIDT");
        assert_eq!(&bytes[4..8], &[1, 0, 2, 0]);
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 8 + 16 + 16);
        assert_eq!(decode(&bytes).unwrap(), t);
    }

    #[test]
    fn rejects_damaged_input() {
        let t = DenseTensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let bytes = encode(&t);
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(FormatError::Truncated { .. })));
        assert!(matches!(decode(&bytes[..6]), Err(FormatError::Truncated { .. })));
        let mut wrong = bytes.clone();
        wrong[4] = 2;
        assert!(matches!(decode(&wrong), Err(FormatError::UnsupportedVersion(2))));
        assert!(matches!(decode(b"NOPE...."), Err(FormatError::BadMagic)));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode(&long), Err(FormatError::TrailingBytes(1))));
    }
}
