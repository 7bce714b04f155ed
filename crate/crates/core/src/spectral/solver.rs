//! Envelope (skyline) Cholesky factorization for the mesh Laplacian.

use crate::error::{Error, Result};
use crate::geometry::Mesh;

use super::NeumannOperator;

/// Row-oriented envelope Cholesky factor `P (A + D) Pᵀ = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
}

/// Cell ordering with small envelope: rows of the logical grid in order,
/// interleaved from both ends when direction 1 wraps around.
fn band_order(mesh: &Mesh) -> Vec<usize> {
    let n1 = mesh.grid.n1();
    let rank: Vec<usize> = if mesh.grid.periodic[0] {
        let mut r = vec![0; n1];
        let (mut lo, mut hi, mut k) = (0usize, n1, 0usize);
        while lo < hi {
            r[lo] = k;
            k += 1;
            lo += 1;
            if lo < hi {
                hi -= 1;
                r[hi] = k;
                k += 1;
            }
        }
        r
    } else {
        (0..n1).collect()
    };
    let mut order: Vec<usize> = (0..mesh.n_cells()).collect();
    order.sort_by_key(|&c| (rank[mesh.cells[c].i], mesh.cells[c].j));
    order
}

impl EnvelopeCholesky {
    /// Factors `A + diag(extra)`.
    pub fn factor(op: &NeumannOperator, mesh: &Mesh, extra: &[f64]) -> Result<Self> {
        let n = op.n;
        let perm = band_order(mesh);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(a, b, _) in &op.links {
            let (a, b) = (inv[a], inv[b]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            first[hi] = first[hi].min(lo);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut vals = vec![0.0; total];
        for old in 0..n {
            let i = inv[old];
            vals[start[i] + i - first[i]] = op.diag[old] + extra[old];
        }
        for &(a, b, w) in &op.links {
            let (a, b) = (inv[a], inv[b]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            vals[start[hi] + lo - first[hi]] -= w;
        }
        for i in 0..n {
            let (fi, si) = (first[i], start[i]);
            for j in fi..i {
                let (fj, sj) = (first[j], start[j]);
                let k0 = fi.max(fj);
                let mut s = vals[si + j - fi];
                for k in k0..j {
                    s -= vals[si + k - fi] * vals[sj + k - fj];
                }
                vals[si + j - fi] = s / vals[sj + j - fj];
            }
            let mut d = vals[si + i - fi];
            for k in fi..i {
                let l = vals[si + k - fi];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::LinearSolve(format!("matrix not positive definite at row {i}")));
            }
            vals[si + i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky { perm, first, start, vals })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let mut s = y[i];
            for k in fi..i {
                s -= self.vals[si + k - fi] * y[k];
            }
            y[i] = s / self.vals[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            y[i] /= self.vals[si + i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.vals[si + k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }
}

/// Solver for the singular Neumann problem `A x = b` with `Σ b = 0`,
/// returning the mass-mean-free solution.
#[derive(Clone, Debug)]
pub struct PoissonSolver {
    chol: EnvelopeCholesky,
    mass: Vec<f64>,
}

impl PoissonSolver {
    pub fn new(op: &NeumannOperator, mesh: &Mesh) -> Result<Self> {
        let mut extra = vec![0.0; op.n];
        // doubling one diagonal entry removes the kernel; for compatible data
        // the pinned value comes out zero
        let pin = band_order(mesh)[0];
        extra[pin] = op.diag[pin].max(f64::MIN_POSITIVE);
        let chol = EnvelopeCholesky::factor(op, mesh, &extra)?;
        Ok(PoissonSolver { chol, mass: op.mass.clone() })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.mass.len(), b.len())?;
        let sum: f64 = b.iter().sum();
        let scale: f64 = b.iter().map(|x| x.abs()).sum();
        if sum.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::LinearSolve(format!("right side not compatible: sum {sum:e}")));
        }
        let mut x = self.chol.solve(b);
        let m = crate::fields::mean(&x, &self.mass);
        for v in &mut x {
            *v -= m;
        }
        Ok(x)
    }
}
