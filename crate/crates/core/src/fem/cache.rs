//! Binary cache for spectral bases, keyed by (mesh hash, degree, p).
//!
//! Layout (little endian): magic `DMSPECB1`, format version u32, mesh hash
//! (32 bytes), degree u8, n u64, p u64, eigenvalues, eigenvectors in
//! column-major order, then the symmetry-warning indices.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{FemDegree, SpectralBasis};

const MAGIC: &[u8; 8] = b"DMSPECB1";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a basis cache file (bad magic)")]
    BadMagic,
    #[error("unsupported cache format version {0}")]
    BadVersion(u32),
    #[error("cache file is corrupt: {0}")]
    Corrupt(String),
}

pub fn write_basis(path: &Path, mesh_hash: &[u8; 32], basis: &SpectralBasis) -> Result<(), CacheError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(mesh_hash)?;
    w.write_all(&[match basis.degree() {
        FemDegree::P1 => 1u8,
        FemDegree::P3 => 3u8,
    }])?;
    let (n, p) = (basis.mesh_size() as u64, basis.basis_size() as u64);
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&p.to_le_bytes())?;
    for &l in basis.eigenvalues() {
        w.write_all(&l.to_le_bytes())?;
    }
    for c in 0..basis.basis_size() {
        for r in 0..basis.mesh_size() {
            w.write_all(&basis.eigenvectors()[(r, c)].to_le_bytes())?;
        }
    }
    let warns = basis.symmetry_warnings();
    w.write_all(&(warns.len() as u64).to_le_bytes())?;
    for &i in warns {
        w.write_all(&(i as u64).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_basis(path: &Path) -> Result<([u8; 32], SpectralBasis), CacheError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CacheError::BadVersion(version));
    }
    let mut mesh_hash = [0u8; 32];
    r.read_exact(&mut mesh_hash)?;
    let mut deg = [0u8; 1];
    r.read_exact(&mut deg)?;
    let degree = match deg[0] {
        1 => FemDegree::P1,
        3 => FemDegree::P3,
        other => return Err(CacheError::Corrupt(format!("degree byte {other}"))),
    };
    let n = read_u64(&mut r)? as usize;
    let p = read_u64(&mut r)? as usize;
    if p == 0 || n == 0 || p > n {
        return Err(CacheError::Corrupt(format!("sizes n={n} p={p}")));
    }
    let mut eigenvalues = Vec::with_capacity(p);
    for _ in 0..p {
        eigenvalues.push(read_f64(&mut r)?);
    }
    let mut eigenvectors = DMatrix::zeros(n, p);
    for c in 0..p {
        for row in 0..n {
            eigenvectors[(row, c)] = read_f64(&mut r)?;
        }
    }
    let wn = read_u64(&mut r)? as usize;
    if wn > p {
        return Err(CacheError::Corrupt(format!("{wn} warnings for p={p}")));
    }
    let mut warnings = Vec::with_capacity(wn);
    for _ in 0..wn {
        warnings.push(read_u64(&mut r)? as usize);
    }
    Ok((
        mesh_hash,
        SpectralBasis::from_parts(eigenvalues, eigenvectors, degree, n, warnings),
    ))
}

fn read_u32(r: &mut impl Read) -> Result<u32, CacheError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, CacheError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, CacheError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_round_trips_bitwise() {
        let mesh = crate::synth::primitives::icosphere(3, 1.0);
        let basis = crate::fem::spectral_basis(&mesh, FemDegree::P1, 6).unwrap();
        let hash = crate::hash::mesh_digest(&mesh);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.bin");
        write_basis(&path, &hash, &basis).unwrap();
        let (h2, b2) = read_basis(&path).unwrap();

        assert_eq!(hash, h2);
        assert_eq!(basis.degree(), b2.degree());
        assert_eq!(basis.eigenvalues(), b2.eigenvalues());
        assert_eq!(basis.eigenvectors(), b2.eigenvectors());
        assert_eq!(basis.symmetry_warnings(), b2.symmetry_warnings());
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTACACHE").unwrap();
        assert!(matches!(read_basis(&path), Err(CacheError::BadMagic)));
    }
}
