//! Empirical constant of the second-derivative estimate
//! `‖∇²φ‖ ≤ c₁‖Δφ‖ + c₂‖φ‖` for Neumann eigenfunctions.

use serde::Serialize;

use super::{assemble, eigendecompose, DecompOptions};
use crate::error::{Error, Result};
use crate::fields::l2_norm;
use crate::geometry::Mesh;

#[derive(Clone, Debug, Serialize)]
pub struct ProbeEntry {
    pub eps: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    /// `c₂ ε^{2β}`.
    pub normalized: f64,
    pub n_tests: usize,
    /// Largest `|‖Δφ‖ − λ‖φ‖| / (λ‖φ‖)` over the test set.
    pub laplacian_consistency: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub entries: Vec<ProbeEntry>,
    /// Ratio of largest to smallest nonzero normalized constant.
    pub normalized_spread: f64,
}

/// Neighbor value across the logical grid; inactive or missing neighbors
/// mirror the cell itself.
fn neighbor(mesh: &Mesh, i: usize, j: usize, axis: usize, step: isize) -> Option<usize> {
    let g = &mesh.grid;
    let (n, k) = if axis == 0 { (g.n1(), i) } else { (g.n2, j) };
    let k = k as isize + step;
    let k = if g.periodic[axis] {
        k.rem_euclid(n as isize) as usize
    } else if k < 0 || k >= n as isize {
        return None;
    } else {
        k as usize
    };
    if axis == 0 {
        mesh.cell_at(k, j)
    } else {
        mesh.cell_at(i, k)
    }
}

/// Center spacing from cell `i` to `i ± 1` in direction 1.
fn spacing1(mesh: &Mesh, i: usize, step: isize) -> f64 {
    let g = &mesh.grid;
    let n = g.n1();
    let k = i as isize + step;
    if (0..n as isize).contains(&k) {
        (g.c1(k as usize) - g.c1(i)).abs()
    } else if g.periodic[0] {
        0.5 * (g.dx1(i) + g.dx1(k.rem_euclid(n as isize) as usize))
    } else {
        g.dx1(i)
    }
}

/// First and second derivative from three points at distances `dl`, `dr`.
fn three_point(fl: f64, fc: f64, fr: f64, dl: f64, dr: f64) -> (f64, f64) {
    let d1 = (dl * dl * (fr - fc) + dr * dr * (fc - fl)) / (dl * dr * (dl + dr));
    let d2 = 2.0 * (dl * (fr - fc) - dr * (fc - fl)) / (dl * dr * (dl + dr));
    (d1, d2)
}

/// `∂₂φ` (logical) at every cell, with mirrored neighbors.
fn d2_all(mesh: &Mesh, phi: &[f64]) -> Vec<f64> {
    let d = mesh.grid.d2;
    mesh.cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let l = neighbor(mesh, cell.i, cell.j, 1, -1).map_or(phi[c], |k| phi[k]);
            let r = neighbor(mesh, cell.i, cell.j, 1, 1).map_or(phi[c], |k| phi[k]);
            (r - l) / (2.0 * d)
        })
        .collect()
}

/// `L²` norm of the Frobenius norm of the covariant Hessian, computed with
/// finite differences on the logical grid and mirror ghosts at boundaries.
pub fn hessian_norm(mesh: &Mesh, phi: &[f64]) -> Result<f64> {
    crate::error::check_len(mesh.n_cells(), phi.len())?;
    let g = &mesh.grid;
    let hp = g.h_prime();
    let dphi2 = d2_all(mesh, phi);
    let mut sq = Vec::with_capacity(phi.len());
    for (c, cell) in mesh.cells.iter().enumerate() {
        let (i, j) = (cell.i, cell.j);
        let h = g.h(cell.x1);
        let (dl, dr) = (spacing1(mesh, i, -1), spacing1(mesh, i, 1));
        let nl = neighbor(mesh, i, j, 0, -1);
        let nr = neighbor(mesh, i, j, 0, 1);
        let (p1, p11) = three_point(nl.map_or(phi[c], |k| phi[k]), phi[c], nr.map_or(phi[c], |k| phi[k]), dl, dr);
        let d = g.d2;
        let ml = neighbor(mesh, i, j, 1, -1).map_or(phi[c], |k| phi[k]);
        let mr = neighbor(mesh, i, j, 1, 1).map_or(phi[c], |k| phi[k]);
        let p2 = dphi2[c];
        let p22 = (mr - 2.0 * phi[c] + ml) / (d * d);
        let a = nl.map_or(dphi2[c], |k| dphi2[k]);
        let b = nr.map_or(dphi2[c], |k| dphi2[k]);
        let p12 = (dl * dl * (b - p2) + dr * dr * (p2 - a)) / (dl * dr * (dl + dr));
        let h11 = p11;
        let h12 = p12 / h - hp * p2 / (h * h);
        let h22 = p22 / (h * h) + hp * p1 / h;
        sq.push((h11 * h11 + 2.0 * h12 * h12 + h22 * h22).sqrt());
    }
    Ok(l2_norm(&sq, &mesh.areas()))
}

/// Fits `c₂` with `c₁ = 1` over the `n_tests` lowest nonconstant Neumann
/// eigenfunctions of each mesh. `family` holds `(ε, β, mesh)`.
pub fn elliptic_constant_probe(family: &[(f64, f64, &Mesh)], n_tests: usize) -> Result<ProbeReport> {
    if family.is_empty() || n_tests == 0 {
        return Err(Error::Input("probe needs at least one mesh and one test function".into()));
    }
    let mut entries = Vec::with_capacity(family.len());
    for &(eps, beta, mesh) in family {
        let op = assemble(mesh)?;
        let k = (n_tests + 1).min(op.n);
        let d = eigendecompose(&op, mesh, &DecompOptions { k: Some(k), ..Default::default() })?;
        let areas = mesh.areas();
        let (mut c2, mut consistency) = (0.0f64, 0.0f64);
        let mut used = 0;
        for jm in 0..d.len() {
            let lambda = d.eigenvalues()[jm];
            if lambda == 0.0 {
                continue;
            }
            let phi = d.mode_vector(jm);
            let norm = l2_norm(&phi, &areas);
            let lap = l2_norm(&op.laplacian(&phi), &areas);
            consistency = consistency.max((lap - lambda * norm).abs() / (lambda * norm));
            let hess = hessian_norm(mesh, &phi)?;
            c2 = c2.max((hess - lap).max(0.0) / norm);
            used += 1;
        }
        entries.push(ProbeEntry {
            eps,
            beta,
            c1: 1.0,
            c2,
            normalized: c2 * eps.powf(2.0 * beta),
            n_tests: used,
            laplacian_consistency: consistency,
        });
    }
    let nz: Vec<f64> = entries.iter().map(|e| e.normalized).filter(|&x| x > 0.0).collect();
    let normalized_spread = if nz.is_empty() {
        1.0
    } else {
        nz.iter().cloned().fold(0.0, f64::max) / nz.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(ProbeReport { entries, normalized_spread })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_in_box() {
        let m = Mesh::rectangle(80, 80, [1.0, 1.0], [false, false]).unwrap();
        let pi = std::f64::consts::PI;
        let phi: Vec<f64> = m.cells.iter().map(|c| (pi * c.center[0]).cos() * (pi * c.center[1]).cos()).collect();
        let h = hessian_norm(&m, &phi).unwrap();
        assert!((h - pi * pi).abs() < 0.02 * pi * pi, "{h}");
    }

    #[test]
    fn polar_hessian() {
        let edges: Vec<f64> = (0..=100).map(|k| 1.0 + k as f64 / 100.0).collect();
        let m = Mesh::annulus(edges, 256).unwrap();
        let pi = std::f64::consts::PI;
        let g = |r: f64| ((pi * (r - 1.0)).cos(), -pi * (pi * (r - 1.0)).sin(), -pi * pi * (pi * (r - 1.0)).cos());
        let phi: Vec<f64> = m
            .cells
            .iter()
            .map(|c| {
                let r = c.center[0].hypot(c.center[1]);
                g(r).0 * (2.0 * c.center[1].atan2(c.center[0])).cos()
            })
            .collect();
        let n = 2000;
        let mut exact = 0.0;
        for k in 0..n {
            let r = 1.0 + (k as f64 + 0.5) / n as f64;
            let (g0, g1, g2) = g(r);
            let cross = g1 / r - g0 / (r * r);
            let tt = -4.0 * g0 / (r * r) + g1 / r;
            exact += pi * r * (g2 * g2 + 8.0 * cross * cross + tt * tt) / n as f64;
        }
        let exact = exact.sqrt();
        let h = hessian_norm(&m, &phi).unwrap();
        assert!((h - exact).abs() < 0.02 * exact, "{h} vs {exact}");
    }

    #[test]
    fn eigenfunction_consistency() {
        let m = Mesh::annulus((0..=12).map(|k| 1.0 + 0.1 * k as f64).collect(), 32).unwrap();
        let r = elliptic_constant_probe(&[(0.5, 0.0, &m)], 4).unwrap();
        assert_eq!(r.entries[0].n_tests, 4);
        assert!(r.entries[0].laplacian_consistency < 1e-8);
        assert!(r.entries[0].c2.is_finite());
    }
}
