//! Discrete Neumann Laplacian, its functional calculus and the Helmholtz
//! projection.

mod cache;
mod decomp;
mod probe;
mod solver;

pub use cache::{mesh_hash, read_cache, write_cache};
pub use decomp::{eigendecompose, DecompOptions, SpectralDecomp};
pub use probe::{elliptic_constant_probe, hessian_norm, ProbeEntry, ProbeReport};
pub use solver::{EnvelopeCholesky, PoissonSolver};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::staggered;

/// Finite-volume stiffness matrix of `−Δ` with zero-flux boundaries, stored
/// as a diagonal plus one weighted link per interior face, and the lumped
/// mass matrix (cell areas).
#[derive(Clone, Debug)]
pub struct NeumannOperator {
    pub n: usize,
    pub diag: Vec<f64>,
    pub links: Vec<(usize, usize, f64)>,
    pub mass: Vec<f64>,
}

impl NeumannOperator {
    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, x)| d * x).collect();
        for &(a, b, w) in &self.links {
            y[a] -= w * x[b];
            y[b] -= w * x[a];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
        }
        for &(a, b, w) in &self.links {
            m[(a, b)] -= w;
            m[(b, a)] -= w;
        }
        m
    }

    /// `−Δ_h x = M⁻¹ A x`.
    pub fn laplacian(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x).iter().zip(&self.mass).map(|(y, m)| y / m).collect()
    }

    /// Row-sum norm of `M^{-1/2} A M^{-1/2}`, the scale used for residuals.
    pub fn norm(&self) -> f64 {
        let mut row = vec![0.0; self.n];
        for i in 0..self.n {
            row[i] = self.diag[i] / self.mass[i];
        }
        for &(a, b, w) in &self.links {
            let s = w / (self.mass[a] * self.mass[b]).sqrt();
            row[a] += s;
            row[b] += s;
        }
        row.into_iter().fold(0.0, f64::max)
    }
}

pub fn assemble(mesh: &Mesh) -> Result<NeumannOperator> {
    let n = mesh.n_cells();
    let mut diag = vec![0.0; n];
    let mut links = Vec::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        if !(cell.area > 0.0 && cell.area.is_finite()) {
            return Err(Error::Assembly(format!("cell {c} has degenerate area {}", cell.area)));
        }
    }
    for (f, face) in mesh.faces.iter().enumerate() {
        if let (Some(a), Some(b)) = (face.minus, face.plus) {
            let w = face.length / face.dist;
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Assembly(format!("face {f} has degenerate geometry")));
            }
            diag[a] += w;
            diag[b] += w;
            links.push((a, b, w));
        }
    }
    Ok(NeumannOperator { n, diag, links, mass: mesh.areas() })
}

/// Solenoidal and gradient parts of a face vector field.
#[derive(Clone, Debug)]
pub struct Helmholtz {
    pub solenoidal: Vec<f64>,
    pub gradient: Vec<f64>,
    pub potential: Vec<f64>,
}

/// Reusable Helmholtz projector of one mesh.
#[derive(Clone, Debug)]
pub struct Projector {
    pub op: NeumannOperator,
    solver: PoissonSolver,
}

impl Projector {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let op = assemble(mesh)?;
        let solver = PoissonSolver::new(&op, mesh)?;
        Ok(Projector { op, solver })
    }

    pub fn solver(&self) -> &PoissonSolver {
        &self.solver
    }

    /// Splits `v` into `H[v] + ∇Φ`. The potential solves the Neumann problem
    /// whose boundary data is the normal trace of `v`, so `H[v]` has zero
    /// divergence and zero normal trace.
    pub fn project(&self, mesh: &Mesh, v: &[f64]) -> Result<Helmholtz> {
        crate::error::check_len(mesh.n_faces(), v.len())?;
        let mut rhs = vec![0.0; mesh.n_cells()];
        for (f, face) in mesh.faces.iter().enumerate() {
            if let (Some(a), Some(b)) = (face.minus, face.plus) {
                let flux = face.length * v[f];
                rhs[a] -= flux;
                rhs[b] += flux;
            }
        }
        // interior fluxes cancel in the sum up to rounding
        let drift = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|x| *x -= drift);
        let phi = self.solver.solve(&rhs)?;
        let mut gradient = staggered::grad(mesh, &phi);
        for (f, face) in mesh.faces.iter().enumerate() {
            if face.is_boundary() {
                gradient[f] = v[f];
            }
        }
        let solenoidal = v.iter().zip(&gradient).map(|(a, b)| a - b).collect();
        Ok(Helmholtz { solenoidal, gradient, potential: phi })
    }
}

pub fn helmholtz_project(mesh: &Mesh, v: &[f64]) -> Result<Helmholtz> {
    Projector::new(mesh)?.project(mesh, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::staggered::{div, face_inner, grad, sample_faces};

    #[test]
    fn three_cell_interval() {
        let m = Mesh::interval(3, 3.0, false).unwrap();
        let a = assemble(&m).unwrap().to_dense();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(a, expected);
    }

    #[test]
    fn kernel_and_symmetry() {
        let m = Mesh::annulus(vec![1.0, 1.3, 1.8, 2.2], 10).unwrap();
        let op = assemble(&m).unwrap();
        assert!(op.apply(&vec![1.0; op.n]).iter().all(|x| x.abs() < 1e-13));
        let a = op.to_dense();
        assert_eq!(a, a.transpose());
    }

    fn mesh() -> Mesh {
        Mesh::annulus((0..=16).map(|k| 1.0 + 0.125 * k as f64).collect(), 24).unwrap()
    }

    #[test]
    fn projector_algebra() {
        let m = mesh();
        let p = Projector::new(&m).unwrap();
        let v: Vec<f64> = (0..m.n_faces()).map(|f| ((f * 31 % 17) as f64 - 8.0) / 8.0).collect();
        let h = p.project(&m, &v).unwrap();
        assert!(div(&m, &h.solenoidal).iter().all(|d| d.abs() < 1e-10));
        for (f, face) in m.faces.iter().enumerate() {
            if face.is_boundary() {
                assert_eq!(h.solenoidal[f], 0.0);
            }
        }
        let hh = p.project(&m, &h.solenoidal).unwrap();
        let diff: f64 = hh.solenoidal.iter().zip(&h.solenoidal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
        assert!(face_inner(&m, &h.solenoidal, &h.gradient).abs() < 1e-10);
        // a discrete gradient is annihilated
        let phi: Vec<f64> = m.cells.iter().map(|c| c.center[0] * c.center[1]).collect();
        let g = grad(&m, &phi);
        let hg = p.project(&m, &g).unwrap();
        assert!(hg.solenoidal.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn rotation_is_solenoidal() {
        let m = mesh();
        let v = sample_faces(&m, |x| [-x[1], x[0]]);
        let h = helmholtz_project(&m, &v).unwrap();
        let diff: f64 = h.solenoidal.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }
}
