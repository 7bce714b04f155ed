//! Binary eigenpair cache.
//!
//! Layout, little endian: magic `LLEIG\0\0\x01`, `u32` version, `u64` mesh
//! hash, `u64` pair count `k`, `f64` tolerance, `f64` verified residual, a
//! kind byte (0 dense, 1 separable), then the payload.
//!
//! Dense payload: `u64 n`, `k` eigenvalues, `n` masses, `n·k` vector
//! entries column by column.
//!
//! Separable payload: `u64 nr`, `u64 nt`, `k` eigenvalues, `nr·nt` masses,
//! `nr` ring areas, for each `m = 0..=nt/2` the `nr` radial eigenvalues and
//! `nr·nr` vector entries column by column, then `k` mode records
//! `(u32 m, u8 sine, u32 radial index)`.

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::decomp::{Kind, SpectralDecomp};
use crate::error::{Error, Result};
use crate::fields::Reader;
use crate::geometry::{write_mesh, Mesh};

const MAGIC: &[u8; 8] = b"LLEIG\0\0\x01";
const VERSION: u32 = 1;

/// First eight bytes of the SHA-256 of the mesh text encoding.
pub fn mesh_hash(mesh: &Mesh) -> u64 {
    let d = Sha256::digest(write_mesh(mesh).as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn put(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn write_cache(d: &SpectralDecomp, mesh: &Mesh, tol: f64) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&mesh_hash(mesh).to_le_bytes());
    out.extend_from_slice(&(d.len() as u64).to_le_bytes());
    out.extend_from_slice(&tol.to_le_bytes());
    out.extend_from_slice(&d.residual().to_le_bytes());
    match d.kind() {
        Kind::Dense { vectors } => {
            out.push(0);
            out.extend_from_slice(&(vectors.nrows() as u64).to_le_bytes());
            put(&mut out, d.eigenvalues());
            put(&mut out, d.mass());
            put(&mut out, vectors.as_slice());
        }
        Kind::Separable(s) => {
            out.push(1);
            out.extend_from_slice(&(s.nr as u64).to_le_bytes());
            out.extend_from_slice(&(s.nt as u64).to_le_bytes());
            put(&mut out, d.eigenvalues());
            put(&mut out, d.mass());
            put(&mut out, &s.ring_area);
            for (vals, vecs) in &s.radial {
                put(&mut out, vals);
                put(&mut out, vecs.as_slice());
            }
            for &(m, sine, k) in &s.modes {
                out.extend_from_slice(&(m as u32).to_le_bytes());
                out.push(sine as u8);
                out.extend_from_slice(&(k as u32).to_le_bytes());
            }
        }
    }
    out
}

fn array(r: &mut Reader, n: usize) -> Result<Vec<f64>> {
    if n.checked_mul(8).is_none_or(|b| b > r.remaining()) {
        return Err(Error::Parse("truncated cache payload".into()));
    }
    let v = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse("non-finite value in cache".into()));
    }
    Ok(v)
}

fn size(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Parse("size does not fit in memory".into()))
}

/// Decodes a cache and checks it belongs to `mesh`.
pub fn read_cache(bytes: &[u8], mesh: &Mesh) -> Result<SpectralDecomp> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Parse("not an eigenpair cache".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported cache version {version}")));
    }
    if r.u64()? != mesh_hash(mesh) {
        return Err(Error::Parse("cache was computed for a different mesh".into()));
    }
    let k = size(r.u64()?)?;
    let _tol = r.f64()?;
    let residual = r.f64()?;
    let n = mesh.n_cells();
    if k == 0 || k > n {
        return Err(Error::Parse(format!("pair count {k} out of range")));
    }
    let kind = r.take(1)?[0];
    let d = match kind {
        0 => {
            if size(r.u64()?)? != n {
                return Err(Error::Parse("cell count does not match mesh".into()));
            }
            let vals = array(&mut r, k)?;
            let mass = array(&mut r, n)?;
            let vecs = array(&mut r, n * k)?;
            SpectralDecomp::from_parts(vals, mass, Kind::Dense { vectors: DMatrix::from_vec(n, k, vecs) }, residual)
        }
        1 => {
            let nr = size(r.u64()?)?;
            let nt = size(r.u64()?)?;
            if !mesh.is_full_annulus() || nr != mesh.grid.n1() || nt != mesh.grid.n2 {
                return Err(Error::Parse("separable layout does not match mesh".into()));
            }
            let vals = array(&mut r, k)?;
            let mass = array(&mut r, n)?;
            let ring_area = array(&mut r, nr)?;
            let mut radial = Vec::with_capacity(nt / 2 + 1);
            for _ in 0..=nt / 2 {
                let rv = array(&mut r, nr)?;
                let vv = array(&mut r, nr * nr)?;
                radial.push((rv, DMatrix::from_vec(nr, nr, vv)));
            }
            let mut modes = Vec::with_capacity(k);
            for _ in 0..k {
                let m = r.u32()? as usize;
                let sine = match r.take(1)?[0] {
                    0 => false,
                    1 => true,
                    b => return Err(Error::Parse(format!("bad mode flag {b}"))),
                };
                let kr = r.u32()? as usize;
                if m > nt / 2 || kr >= nr || (sine && (m == 0 || 2 * m == nt)) {
                    return Err(Error::Parse("mode index out of range".into()));
                }
                modes.push((m, sine, kr));
            }
            SpectralDecomp::from_parts(vals, mass, SpectralDecomp::separable_from_parts(nr, nt, radial, ring_area, modes), residual)
        }
        b => return Err(Error::Parse(format!("unknown cache kind {b}"))),
    };
    if r.remaining() != 0 {
        return Err(Error::Parse("trailing bytes after cache payload".into()));
    }
    Ok(d)
}
