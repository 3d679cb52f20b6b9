//! Flat binary layout for state snapshots: a 32-byte header (`magic`,
//! `version: u32`, `M: u64`, `d: u64`, `step: u64`, all little-endian)
//! followed by `M·d` little-endian `f64` values in row-major order.

use super::{PathError, StateMatrix};
use std::io::{Read, Write};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"SWPT";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER_LEN: usize = 32;

pub fn write_snapshot<W: Write>(
    mut w: W,
    step: usize,
    states: &StateMatrix,
) -> Result<(), PathError> {
    let mut header = [0u8; SNAPSHOT_HEADER_LEN];
    header[0..4].copy_from_slice(&SNAPSHOT_MAGIC);
    header[4..8].copy_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    header[8..16].copy_from_slice(&(states.rows() as u64).to_le_bytes());
    header[16..24].copy_from_slice(&(states.dim() as u64).to_le_bytes());
    header[24..32].copy_from_slice(&(step as u64).to_le_bytes());
    w.write_all(&header)?;
    let mut body = Vec::with_capacity(states.as_slice().len() * 8);
    for v in states.as_slice() {
        body.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&body)?;
    Ok(())
}

/// Returns `(step, states)`.
pub fn read_snapshot<R: Read>(mut r: R) -> Result<(usize, StateMatrix), PathError> {
    let mut header = [0u8; SNAPSHOT_HEADER_LEN];
    r.read_exact(&mut header)?;
    if header[0..4] != SNAPSHOT_MAGIC {
        return Err(PathError::Snapshot("bad magic".into()));
    }
    let word = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().expect("8 bytes"));
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != SNAPSHOT_VERSION {
        return Err(PathError::Snapshot(format!(
            "unsupported version {version}"
        )));
    }
    let (rows, dim, step) = (word(8) as usize, word(16) as usize, word(24) as usize);
    let len = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| PathError::Snapshot("dimensions overflow".into()))?;
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)
        .map_err(|e| PathError::Snapshot(format!("truncated body: {e}")))?;
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((step, StateMatrix::from_vec(rows, dim, data)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let s = StateMatrix::from_vec(2, 3, vec![1.0, -2.5, 3.0, f64::MIN_POSITIVE, 0.0, 1e300]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, 42, &s).unwrap();
        assert_eq!(buf.len(), SNAPSHOT_HEADER_LEN + 6 * 8);
        assert_eq!(&buf[..4], b"SWPT");
        let (step, back) = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(step, 42);
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_garbage() {
        let mut buf = vec![0u8; 40];
        assert!(matches!(
            read_snapshot(buf.as_slice()),
            Err(PathError::Snapshot(_))
        ));
        buf[..4].copy_from_slice(b"SWPT");
        buf[4] = 1;
        buf[8] = 5;
        buf[16] = 1;
        assert!(matches!(
            read_snapshot(buf.as_slice()),
            Err(PathError::Snapshot(_))
        ));
    }
}
