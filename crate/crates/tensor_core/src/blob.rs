//! Binary tensor files: `b"CTB1"`, u64 LE header length, JSON header, then f64 LE payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::Value;

use crate::error::TensorError;

const MAGIC: &[u8; 4] = b"CTB1";

pub fn write_blob(path: &Path, header: &Value, payload: &[f64]) -> Result<(), TensorError> {
    let head = serde_json::to_vec(header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(head.len() as u64).to_le_bytes())?;
    w.write_all(&head)?;
    w.write_all(&(payload.len() as u64).to_le_bytes())?;
    for x in payload {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_blob(path: &Path) -> Result<(Value, Vec<f64>), TensorError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TensorError::Format("bad magic".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut head = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut head)?;
    let header: Value = serde_json::from_slice(&head)?;
    r.read_exact(&mut len)?;
    let n = u64::from_le_bytes(len) as usize;
    let mut payload = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        payload.push(f64::from_le_bytes(buf));
    }
    Ok((header, payload))
}

/// Interleaved `(re, im)` payload of complex data.
pub fn complex_payload(z: &[crate::C64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn complex_from_payload(p: &[f64]) -> Result<Vec<crate::C64>, TensorError> {
    if !p.len().is_multiple_of(2) {
        return Err(TensorError::Format("odd complex payload".into()));
    }
    Ok(p.chunks(2).map(|c| crate::C64::new(c[0], c[1])).collect())
}
