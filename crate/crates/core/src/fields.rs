//! Cell-centered field snapshots and their CSV / binary encodings.
//!
//! Binary layout, little endian: the 8-byte magic `LLSNAP\0\x01`, a `u32`
//! version, a `u64` cell count `n`, the time `t` as `f64`, then the arrays
//! `rho`, `ux`, `uy`, `theta` of `n` doubles each.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub theta: Vec<f64>,
}

const MAGIC: &[u8; 8] = b"LLSNAP\0\x01";
const VERSION: u32 = 1;
const CSV_HEADER: &str = "cell,rho,ux,uy,theta";

impl Snapshot {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.rho.len();
        for v in [&self.ux, &self.uy, &self.theta] {
            crate::error::check_len(n, v.len())?;
        }
        Ok(())
    }

    /// CSV with a `# t=<time>` comment line and one row per cell.
    pub fn to_csv(&self) -> Result<String> {
        self.check()?;
        let mut s = String::with_capacity(64 * self.len());
        let _ = writeln!(s, "# t={:e}", self.t);
        let _ = writeln!(s, "{CSV_HEADER}");
        for c in 0..self.len() {
            let _ = writeln!(s, "{c},{:e},{:e},{:e},{:e}", self.rho[c], self.ux[c], self.uy[c], self.theta[c]);
        }
        Ok(s)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))?;
        let t = first
            .strip_prefix("# t=")
            .ok_or_else(|| Error::Parse("missing `# t=` line".into()))?
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse("bad time value".into()))?;
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::Parse(format!("expected header `{CSV_HEADER}`"))),
        }
        let mut snap = Snapshot { t, rho: vec![], ux: vec![], uy: vec![], theta: vec![] };
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(Error::Parse(format!("line {}: expected 5 columns", n + 1)));
            }
            let id: usize = cols[0].parse().map_err(|_| Error::Parse(format!("line {}: bad cell id", n + 1)))?;
            if id != snap.rho.len() {
                return Err(Error::Parse(format!("line {}: cell ids must be consecutive", n + 1)));
            }
            let mut v = [0.0; 4];
            for (k, x) in v.iter_mut().enumerate() {
                *x = cols[k + 1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad number `{}`", n + 1, cols[k + 1])))?;
            }
            snap.rho.push(v[0]);
            snap.ux.push(v[1]);
            snap.uy.push(v[2]);
            snap.theta.push(v[3]);
        }
        Ok(snap)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check()?;
        let n = self.len();
        let mut out = Vec::with_capacity(28 + 32 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for v in [&self.rho, &self.ux, &self.uy, &self.theta] {
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Parse("not a snapshot file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Parse(format!("unsupported snapshot version {version}")));
        }
        let n = r.u64()?;
        let t = r.f64()?;
        let need = n.checked_mul(32).ok_or_else(|| Error::Parse("cell count overflows".into()))?;
        if (bytes.len() - r.pos) as u64 != need {
            return Err(Error::Parse(format!("payload size mismatch for {n} cells")));
        }
        let n = n as usize;
        let mut arr = || (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>();
        let (rho, ux, uy, theta) = (arr()?, arr()?, arr()?, arr()?);
        Ok(Snapshot { t, rho, ux, uy, theta })
    }
}

pub(crate) struct Reader<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Parse("truncated input".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Mass-weighted mean `Σ a_c f_c / Σ a_c`.
pub fn mean(f: &[f64], areas: &[f64]) -> f64 {
    let (s, a) = f.iter().zip(areas).fold((0.0, 0.0), |(s, a), (x, w)| (s + x * w, a + w));
    s / a
}

/// `(Σ a_c |f_c|^p)^{1/p}` over the selected cells.
pub fn lp_norm(f: &[f64], areas: &[f64], p: f64) -> f64 {
    f.iter().zip(areas).map(|(x, a)| a * x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

pub fn l2_norm(f: &[f64], areas: &[f64]) -> f64 {
    f.iter().zip(areas).map(|(x, a)| a * x * x).sum::<f64>().sqrt()
}

pub fn inner(f: &[f64], g: &[f64], w: &[f64]) -> f64 {
    f.iter().zip(g).zip(w).map(|((a, b), w)| a * b * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Snapshot {
        Snapshot {
            t: 0.25,
            rho: vec![1.0, 1.1, 0.9],
            ux: vec![0.0, -0.5, 1e-3],
            uy: vec![2.0, 0.0, 1e-300],
            theta: vec![1.0, 1.2, 0.8],
        }
    }

    #[test]
    fn csv_roundtrip() {
        let s = sample();
        assert_eq!(Snapshot::from_csv(&s.to_csv().unwrap()).unwrap(), s);
    }

    #[test]
    fn binary_roundtrip_and_rejects() {
        let s = sample();
        let b = s.to_bytes().unwrap();
        assert_eq!(Snapshot::from_bytes(&b).unwrap(), s);
        assert!(Snapshot::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[8] = 9;
        assert!(Snapshot::from_bytes(&bad).is_err());
        assert!(Snapshot::from_bytes(b"LLSNAP").is_err());
    }

    #[test]
    fn csv_rejects() {
        assert!(Snapshot::from_csv("").is_err());
        assert!(Snapshot::from_csv("# t=0\ncell,rho\n").is_err());
        assert!(Snapshot::from_csv("# t=0\ncell,rho,ux,uy,theta\n1,1,1,1,1\n").is_err());
    }

    #[test]
    fn shape_mismatch() {
        let mut s = sample();
        s.theta.pop();
        assert!(matches!(s.to_bytes(), Err(Error::Shape { .. })));
    }

    #[test]
    fn norms() {
        let a = [1.0, 2.0];
        assert!((mean(&[1.0, 4.0], &a) - 3.0).abs() < 1e-15);
        assert!((l2_norm(&[1.0, 1.0], &a) - 3f64.sqrt()).abs() < 1e-15);
        assert!((lp_norm(&[1.0, 1.0], &a, 5.0 / 3.0) - 3f64.powf(0.6)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn binary_roundtrip_any(v in proptest::collection::vec(-1e6f64..1e6, 0..40), t in -10.0f64..10.0) {
            let s = Snapshot { t, rho: v.clone(), ux: v.clone(), uy: v.clone(), theta: v };
            prop_assert_eq!(Snapshot::from_bytes(&s.to_bytes().unwrap()).unwrap(), s.clone());
            prop_assert_eq!(Snapshot::from_csv(&s.to_csv().unwrap()).unwrap(), s);
        }
    }
}
