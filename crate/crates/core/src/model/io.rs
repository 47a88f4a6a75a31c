//! Binary tensor file.
//!
//! Layout: the 5-byte magic `PSPN1`, then little-endian `u32 p`, `u32 N`, `u64 seed`, then the
//! `N^p` entries of the symmetrized tensor as little-endian `f64` in row-major index order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tensor::{CouplingTensor, ModelSpec, MAX_DENSE_ENTRIES};

pub const MAGIC: &[u8; 5] = b"PSPN1";

pub fn write_tensor<S: Scalar, W: Write>(t: &CouplingTensor<S>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(t.degree() as u32).to_le_bytes())?;
    w.write_all(&(t.dim() as u32).to_le_bytes())?;
    w.write_all(&t.seed().to_le_bytes())?;
    for x in t.entries() {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a tensor; `beta` is not part of the file and is supplied by the caller.
pub fn read_tensor<S: Scalar, R: Read>(mut r: R, beta: f64) -> Result<CouplingTensor<S>> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let p = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    let spec = ModelSpec::new(p, n, beta)?;
    if spec.entry_count() > MAX_DENSE_ENTRIES {
        return Err(Error::Format(format!("{} entries exceed the dense limit", spec.entry_count())));
    }
    let count = spec.entry_count() as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8).map_err(|_| Error::Format("truncated entries".into()))?;
        entries.push(S::lit(f64::from_le_bytes(b8)));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    CouplingTensor::from_entries(spec, entries, seed)
}

pub fn save_tensor<S: Scalar>(t: &CouplingTensor<S>, path: impl AsRef<Path>) -> Result<()> {
    write_tensor(t, BufWriter::new(File::create(path)?))
}

pub fn load_tensor<S: Scalar>(path: impl AsRef<Path>, beta: f64) -> Result<CouplingTensor<S>> {
    read_tensor(BufReader::new(File::open(path)?), beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let spec = ModelSpec::new(3, 2, 1.0).unwrap();
        let t: CouplingTensor = CouplingTensor::sample(spec, 0xdead_beef).unwrap();
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        assert_eq!(buf.len(), 5 + 4 + 4 + 8 + 8 * 8);
        assert_eq!(&buf[..5], b"PSPN1");
        assert_eq!(&buf[5..9], &3u32.to_le_bytes());
        assert_eq!(&buf[9..13], &2u32.to_le_bytes());
        assert_eq!(&buf[13..21], &0xdead_beefu64.to_le_bytes());
        assert_eq!(&buf[21..29], &t.entries()[0].to_le_bytes());
        let back: CouplingTensor = read_tensor(&buf[..], 1.0).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn round_trip_keeps_every_bit() {
        let spec = ModelSpec::new(3, 9, 1.0).unwrap();
        let t: CouplingTensor = CouplingTensor::sample(spec, 77).unwrap();
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        let back: CouplingTensor = read_tensor(&buf[..], 1.0).unwrap();
        let bits = |x: &CouplingTensor| x.entries().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(read_tensor::<f64, _>(&b"PSPN2"[..], 1.0).is_err());
        let spec = ModelSpec::new(3, 2, 1.0).unwrap();
        let t: CouplingTensor = CouplingTensor::sample(spec, 1).unwrap();
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        assert!(read_tensor::<f64, _>(&buf[..buf.len() - 3], 1.0).is_err());
        buf.push(0);
        assert!(read_tensor::<f64, _>(&buf[..], 1.0).is_err());
    }
}
