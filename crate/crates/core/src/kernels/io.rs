//! Binary persistence for dense symmetric matrices.
//!
//! Layout: the 8-byte magic `IRSOLVE1`, the order `n` as a little-endian
//! `u64`, then `n * n` little-endian binary64 values in row-major order.
//! Low-tier matrices are widened (exactly) on write; reads yield `High`.

use super::{DenseSymMatrix, KernelError, PrecisionTier};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"IRSOLVE1";

pub fn write_matrix<W: Write>(mut w: W, a: &DenseSymMatrix) -> Result<(), KernelError> {
    w.write_all(MAGIC)?;
    w.write_all(&(a.order() as u64).to_le_bytes())?;
    for v in a.to_row_major_f64() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<DenseSymMatrix, KernelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(KernelError::BadFile("missing IRSOLVE1 magic".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = usize::try_from(u64::from_le_bytes(word))
        .map_err(|_| KernelError::BadFile("order does not fit in memory".into()))?;
    let len = n
        .checked_mul(n)
        .ok_or_else(|| KernelError::BadFile("order overflows".into()))?;
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(KernelError::BadFile("trailing bytes after matrix data".into()));
    }
    DenseSymMatrix::from_row_major(n, PrecisionTier::High, values)
}

pub fn save_matrix(path: impl AsRef<Path>, a: &DenseSymMatrix) -> Result<(), KernelError> {
    write_matrix(BufWriter::new(File::create(path)?), a)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseSymMatrix, KernelError> {
    read_matrix(BufReader::new(File::open(path)?))
}
