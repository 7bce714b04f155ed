use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{EnvelopeCholesky, NeumannOperator};
use crate::error::{Error, Result};
use crate::geometry::{Coords, Mesh};

#[derive(Clone, Copy, Debug)]
pub struct DecompOptions {
    /// Number of smallest eigenpairs to keep; `None` keeps all.
    pub k: Option<usize>,
    /// Largest cell count decomposed densely when the mesh is not separable.
    pub dense_limit: usize,
    /// Residual tolerance relative to the operator norm.
    pub tol: f64,
    /// Use the Fourier-radial factorization on full polar annuli.
    pub separable: bool,
    pub seed: u64,
}

impl Default for DecompOptions {
    fn default() -> Self {
        DecompOptions { k: None, dense_limit: 3000, tol: 1e-8, separable: true, seed: 0x5eed }
    }
}

/// Eigenpairs of `A ψ = λ M ψ` with `M`-orthonormal eigenvectors, sorted
/// by eigenvalue.
#[derive(Clone)]
pub struct SpectralDecomp {
    eigenvalues: Vec<f64>,
    mass: Vec<f64>,
    kind: Kind,
    residual: f64,
}

#[derive(Clone)]
pub(super) enum Kind {
    Dense { vectors: DMatrix<f64> },
    Separable(Separable),
}

/// Eigenfunctions `v(r)·b_s(φ)` of a full annulus, with `b_s` the real
/// orthonormal Fourier basis on the ring.
#[derive(Clone)]
pub(super) struct Separable {
    pub nr: usize,
    pub nt: usize,
    /// Radial eigenvectors per Fourier number `m = 0..=nt/2` (columns, area-orthonormal).
    pub radial: Vec<(Vec<f64>, DMatrix<f64>)>,
    pub ring_area: Vec<f64>,
    /// Kept modes `(m, sine, radial index)`.
    pub modes: Vec<(usize, bool, usize)>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Separable {
    fn slot(&self, m: usize, sine: bool) -> usize {
        if m == 0 {
            0
        } else if 2 * m == self.nt {
            self.nt - 1
        } else {
            2 * m - 1 + sine as usize
        }
    }

    fn forward(&self, ring: &[f64], out: &mut [f64]) {
        let n = self.nt;
        let mut buf: Vec<Complex64> = ring.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        let (s1, s2) = ((1.0 / n as f64).sqrt(), (2.0 / n as f64).sqrt());
        out[0] = buf[0].re * s1;
        for m in 1..n.div_ceil(2) {
            out[2 * m - 1] = s2 * buf[m].re;
            out[2 * m] = -s2 * buf[m].im;
        }
        if n.is_multiple_of(2) && n > 1 {
            out[n - 1] = buf[n / 2].re * s1;
        }
    }

    fn inverse(&self, coef: &[f64], out: &mut [f64]) {
        let n = self.nt;
        let (s1, s2) = ((1.0 / n as f64).sqrt(), (2.0 / n as f64).sqrt());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new(coef[0] * s1, 0.0);
        for m in 1..n.div_ceil(2) {
            let h = Complex64::new(coef[2 * m - 1], -coef[2 * m]) * (0.5 * s2);
            buf[m] = h;
            buf[n - m] = h.conj();
        }
        if n.is_multiple_of(2) && n > 1 {
            buf[n / 2] = Complex64::new(coef[n - 1] * s1, 0.0);
        }
        self.ifft.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re;
        }
    }

    fn analyze(&self, f: &[f64]) -> Vec<f64> {
        let (nr, nt) = (self.nr, self.nt);
        let mut hat = vec![0.0; nr * nt];
        for i in 0..nr {
            self.forward(&f[i * nt..(i + 1) * nt], &mut hat[i * nt..(i + 1) * nt]);
        }
        self.modes
            .iter()
            .map(|&(m, sine, k)| {
                let s = self.slot(m, sine);
                let v = &self.radial[m].1;
                (0..nr).map(|i| self.ring_area[i] * v[(i, k)] * hat[i * nt + s]).sum()
            })
            .collect()
    }

    fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let (nr, nt) = (self.nr, self.nt);
        let mut hat = vec![0.0; nr * nt];
        for (&(m, sine, k), &cj) in self.modes.iter().zip(c) {
            if cj == 0.0 {
                continue;
            }
            let s = self.slot(m, sine);
            let v = &self.radial[m].1;
            for i in 0..nr {
                hat[i * nt + s] += cj * v[(i, k)];
            }
        }
        let mut out = vec![0.0; nr * nt];
        for i in 0..nr {
            self.inverse(&hat[i * nt..(i + 1) * nt], &mut out[i * nt..(i + 1) * nt]);
        }
        out
    }
}

fn sorted_eigen(b: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(b);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// `M^{-1/2}`-scaled residual of one eigenpair.
fn residual(op: &NeumannOperator, lambda: f64, psi: &[f64]) -> f64 {
    op.apply(psi)
        .iter()
        .zip(psi)
        .zip(&op.mass)
        .map(|((a, p), m)| {
            let r = a - lambda * m * p;
            r * r / m
        })
        .sum::<f64>()
        .sqrt()
}

pub fn eigendecompose(op: &NeumannOperator, mesh: &Mesh, opts: &DecompOptions) -> Result<SpectralDecomp> {
    if op.n != mesh.n_cells() {
        return Err(Error::Shape { expected: mesh.n_cells(), got: op.n });
    }
    let k = opts.k.unwrap_or(op.n);
    if k == 0 || k > op.n {
        return Err(Error::Params(format!("requested {k} eigenpairs of a {}-cell operator", op.n)));
    }
    let norm = op.norm();
    let mut d = if opts.separable && mesh.is_full_annulus() && mesh.grid.coords == Coords::Polar {
        separable(op, mesh, k)?
    } else if op.n <= opts.dense_limit {
        dense(op, k)
    } else {
        subspace(op, mesh, k, opts, norm)?
    };
    // verify a spread of eigenpairs against the assembled operator
    let mut worst: f64 = 0.0;
    let stride = (d.len() / 24).max(1);
    for j in (0..d.len()).step_by(stride).chain(std::iter::once(d.len() - 1)) {
        let psi = d.mode_vector(j);
        worst = worst.max(residual(op, d.eigenvalues[j], &psi));
    }
    if worst > opts.tol * norm {
        return Err(Error::Spectral { reason: "eigenpair residual above tolerance".into(), residual: worst / norm });
    }
    d.residual = worst / norm;
    for l in &mut d.eigenvalues {
        if *l < 1e-10 * norm {
            *l = 0.0;
        }
    }
    Ok(d)
}

fn dense(op: &NeumannOperator, k: usize) -> SpectralDecomp {
    let n = op.n;
    let s: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut b = op.to_dense();
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] *= s[i] * s[j];
        }
    }
    let (vals, vecs) = sorted_eigen(b);
    let vectors = DMatrix::from_fn(n, k, |r, c| vecs[(r, c)] * s[r]);
    SpectralDecomp { eigenvalues: vals[..k].to_vec(), mass: op.mass.clone(), kind: Kind::Dense { vectors }, residual: 0.0 }
}

fn separable(op: &NeumannOperator, mesh: &Mesh, k: usize) -> Result<SpectralDecomp> {
    let g = &mesh.grid;
    let (nr, nt) = (g.n1(), g.n2);
    let ring_area: Vec<f64> = (0..nr).map(|i| mesh.cells[mesh.cell_at(i, 0).unwrap()].area).collect();
    let radial_w: Vec<f64> = (1..nr)
        .map(|ie| {
            let f = &mesh.faces[mesh.face1_at(ie, 0).unwrap()];
            f.length / f.dist
        })
        .collect();
    let angular_w: Vec<f64> = (0..nr)
        .map(|i| match mesh.face2_at(i, 0) {
            Some(f) if nt > 1 => mesh.faces[f].length / mesh.faces[f].dist,
            _ => 0.0,
        })
        .collect();
    let mut radial = Vec::with_capacity(nt / 2 + 1);
    let mut all = Vec::with_capacity(nr * nt);
    for m in 0..=nt / 2 {
        let s_m = 2.0 - 2.0 * (std::f64::consts::TAU * m as f64 / nt as f64).cos();
        let mut b = DMatrix::zeros(nr, nr);
        for i in 0..nr {
            b[(i, i)] = angular_w[i] * s_m;
        }
        for (ie, &w) in radial_w.iter().enumerate() {
            let (a, c) = (ie, ie + 1);
            b[(a, a)] += w;
            b[(c, c)] += w;
            b[(a, c)] -= w;
            b[(c, a)] -= w;
        }
        let s: Vec<f64> = ring_area.iter().map(|a| 1.0 / a.sqrt()).collect();
        for i in 0..nr {
            for j in 0..nr {
                b[(i, j)] *= s[i] * s[j];
            }
        }
        let (vals, mut vecs) = sorted_eigen(b);
        for i in 0..nr {
            for c in 0..nr {
                vecs[(i, c)] *= s[i];
            }
        }
        let kinds: &[bool] = if m == 0 || 2 * m == nt { &[false] } else { &[false, true] };
        for &sine in kinds {
            for (kr, &l) in vals.iter().enumerate() {
                all.push((l, m, sine, kr));
            }
        }
        radial.push((vals, vecs));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));
    all.truncate(k);
    let mut planner = FftPlanner::new();
    let sep = Separable {
        nr,
        nt,
        radial,
        ring_area,
        modes: all.iter().map(|&(_, m, s, kr)| (m, s, kr)).collect(),
        fft: planner.plan_fft_forward(nt),
        ifft: planner.plan_fft_inverse(nt),
    };
    Ok(SpectralDecomp {
        eigenvalues: all.iter().map(|a| a.0).collect(),
        mass: op.mass.clone(),
        kind: Kind::Separable(sep),
        residual: 0.0,
    })
}

/// Block inverse iteration with Rayleigh–Ritz for the `k` smallest pairs.
fn subspace(op: &NeumannOperator, mesh: &Mesh, k: usize, opts: &DecompOptions, norm: f64) -> Result<SpectralDecomp> {
    let n = op.n;
    let p = (k + (k / 2).max(8)).min(n);
    let sigma = 1e-6 * norm;
    let shift: Vec<f64> = op.mass.iter().map(|m| sigma * m).collect();
    let chol = EnvelopeCholesky::factor(op, mesh, &shift)?;
    let sq: Vec<f64> = op.mass.iter().map(|m| m.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
    let mut vals = vec![0.0; p];
    let mut worst = f64::INFINITY;
    for _ in 0..2000 {
        let mut y = DMatrix::zeros(n, p);
        for c in 0..p {
            let rhs: Vec<f64> = (0..n).map(|r| op.mass[r] * x[(r, c)]).collect();
            let sol = chol.solve(&rhs);
            for r in 0..n {
                y[(r, c)] = sol[r] * sq[r];
            }
        }
        // M-orthonormal basis through QR of M^{1/2} Y
        let q = y.qr().q();
        let basis = DMatrix::from_fn(n, p, |r, c| q[(r, c)] / sq[r]);
        let mut ar = DMatrix::zeros(p, p);
        let applied: Vec<Vec<f64>> = (0..p).map(|c| op.apply(basis.column(c).as_slice())).collect();
        for a in 0..p {
            for b in 0..p {
                ar[(a, b)] = basis.column(a).iter().zip(&applied[b]).map(|(u, v)| u * v).sum();
            }
        }
        let ar = (&ar + ar.transpose()) * 0.5;
        let (rv, rq) = sorted_eigen(ar);
        x = &basis * rq;
        vals = rv;
        worst = (0..k).map(|j| residual(op, vals[j], x.column(j).as_slice())).fold(0.0, f64::max);
        if worst < 0.1 * opts.tol * norm {
            break;
        }
    }
    if worst > opts.tol * norm {
        return Err(Error::Spectral { reason: "subspace iteration did not converge".into(), residual: worst / norm });
    }
    let vectors = x.columns(0, k).into_owned();
    Ok(SpectralDecomp { eigenvalues: vals[..k].to_vec(), mass: op.mass.clone(), kind: Kind::Dense { vectors }, residual: 0.0 })
}

impl SpectralDecomp {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Largest scaled residual found during verification.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.kind, Kind::Separable(_))
    }

    pub(super) fn kind(&self) -> &Kind {
        &self.kind
    }

    pub(super) fn from_parts(eigenvalues: Vec<f64>, mass: Vec<f64>, kind: Kind, residual: f64) -> Self {
        SpectralDecomp { eigenvalues, mass, kind, residual }
    }

    pub(super) fn separable_from_parts(
        nr: usize,
        nt: usize,
        radial: Vec<(Vec<f64>, DMatrix<f64>)>,
        ring_area: Vec<f64>,
        modes: Vec<(usize, bool, usize)>,
    ) -> Kind {
        let mut planner = FftPlanner::new();
        Kind::Separable(Separable {
            nr,
            nt,
            radial,
            ring_area,
            modes,
            fft: planner.plan_fft_forward(nt),
            ifft: planner.plan_fft_inverse(nt),
        })
    }

    /// Coefficients `⟨ψ_j, f⟩_M`.
    pub fn analyze(&self, f: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.mass.len(), f.len())?;
        Ok(match &self.kind {
            Kind::Dense { vectors } => {
                let mf = DVector::from_iterator(f.len(), f.iter().zip(&self.mass).map(|(a, m)| a * m));
                (vectors.transpose() * mf).as_slice().to_vec()
            }
            Kind::Separable(s) => s.analyze(f),
        })
    }

    /// `Σ c_j ψ_j`.
    pub fn synthesize(&self, c: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.len(), c.len())?;
        Ok(match &self.kind {
            Kind::Dense { vectors } => (vectors * DVector::from_column_slice(c)).as_slice().to_vec(),
            Kind::Separable(s) => s.synthesize(c),
        })
    }

    pub fn mode_vector(&self, j: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.len()];
        c[j] = 1.0;
        self.synthesize(&c).expect("coefficient length matches")
    }

    /// `Σ G(λ_j) ⟨ψ_j, f⟩ ψ_j`.
    pub fn apply_function(&self, g: impl Fn(f64) -> f64, f: &[f64]) -> Result<Vec<f64>> {
        let mut c = self.analyze(f)?;
        for (cj, &l) in c.iter_mut().zip(&self.eigenvalues) {
            let gl = g(l);
            if !gl.is_finite() {
                return Err(Error::Calculus(format!("function not finite at eigenvalue {l}")));
            }
            *cj *= gl;
        }
        self.synthesize(&c)
    }

    /// `(−Δ)^s f`; negative powers act on the mean-zero complement and
    /// require mean-zero input.
    pub fn apply_power(&self, s: f64, f: &[f64]) -> Result<Vec<f64>> {
        if s < 0.0 {
            self.check_mean_zero(f)?;
        }
        self.apply_function(|l| if l == 0.0 { if s == 0.0 { 1.0 } else { 0.0 } } else { l.powf(s) }, f)
    }

    pub fn check_mean_zero(&self, f: &[f64]) -> Result<()> {
        crate::error::check_len(self.mass.len(), f.len())?;
        let s: f64 = f.iter().zip(&self.mass).map(|(a, m)| a * m).sum();
        let scale: f64 = f.iter().zip(&self.mass).map(|(a, m)| a.abs() * m).sum();
        if s.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Calculus(format!("input has nonzero mean (integral {s:e})")));
        }
        Ok(())
    }

    /// `M`-inner product.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        crate::fields::inner(f, g, &self.mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::assemble;

    fn decomp(mesh: &Mesh, opts: DecompOptions) -> SpectralDecomp {
        eigendecompose(&assemble(mesh).unwrap(), mesh, &opts).unwrap()
    }

    #[test]
    fn interval_spectrum() {
        let n = 200;
        let h = std::f64::consts::PI / n as f64;
        let m = Mesh::interval(n, std::f64::consts::PI, false).unwrap();
        let d = decomp(&m, DecompOptions::default());
        assert!(d.eigenvalues()[0] == 0.0);
        for j in 1..6 {
            // exact discrete value 4/h² sin²(jh/2) and O(h²) from j²
            let l = d.eigenvalues()[j];
            let exact = 4.0 / (h * h) * (j as f64 * h / 2.0).sin().powi(2);
            assert!((l - exact).abs() < 1e-9 * exact);
            assert!((l - (j * j) as f64).abs() < 0.1 * (j * j * j * j) as f64 * h * h);
        }
        let v0 = d.mode_vector(0);
        assert!(v0.iter().all(|x| (x - v0[0]).abs() < 1e-10));
    }

    #[test]
    fn separable_matches_dense() {
        let m = Mesh::annulus(vec![1.0, 1.2, 1.5, 1.9, 2.4, 3.0], 16).unwrap();
        let a = decomp(&m, DecompOptions::default());
        let b = decomp(&m, DecompOptions { separable: false, ..Default::default() });
        assert!(a.is_separable() && !b.is_separable());
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            assert!((x - y).abs() < 1e-10 * (1.0 + y));
        }
        let f: Vec<f64> = m.cells.iter().map(|c| (c.center[0] * 1.3).sin() + c.center[1]).collect();
        let fa = a.apply_function(|l| (-l).exp(), &f).unwrap();
        let fb = b.apply_function(|l| (-l).exp(), &f).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            assert!((x - y).abs() < 1e-10);
        }
        // Parseval in the separable basis
        let c = a.analyze(&f).unwrap();
        let e1: f64 = c.iter().map(|x| x * x).sum();
        assert!((e1 - a.inner(&f, &f)).abs() < 1e-10 * e1);
    }

    #[test]
    fn odd_ring_count() {
        let m = Mesh::annulus(vec![1.0, 1.5, 2.0], 7).unwrap();
        let a = decomp(&m, DecompOptions::default());
        let b = decomp(&m, DecompOptions { separable: false, ..Default::default() });
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            assert!((x - y).abs() < 1e-10 * (1.0 + y));
        }
    }

    #[test]
    fn subspace_matches_dense() {
        let spec = crate::geometry::DomainSpec {
            eps: 0.25,
            delta: 1.5,
            beta: 0.125,
            r_obs: 1.0,
            amp: 0.2,
            freq: 3.0,
            cap_radius: Some(2.0),
            resolution: crate::geometry::Resolution { n_theta: 32, dr_fine: 0.1, fine_band: 0.2, growth: 1.2 },
        };
        let m = crate::geometry::build_domain(&spec).unwrap();
        let full = decomp(&m, DecompOptions::default());
        let part = decomp(&m, DecompOptions { k: Some(6), dense_limit: 10, ..Default::default() });
        for (x, y) in part.eigenvalues().iter().zip(full.eigenvalues()) {
            assert!((x - y).abs() < 1e-7 * (1.0 + y), "{x} vs {y}");
        }
    }

    #[test]
    fn calculus_identities() {
        let m = Mesh::annulus(vec![1.0, 1.25, 1.5, 1.75, 2.0], 12).unwrap();
        let d = decomp(&m, DecompOptions::default());
        let mut f: Vec<f64> = m.cells.iter().map(|c| c.center[0].powi(2) - 0.3 * c.center[1]).collect();
        let mean = crate::fields::mean(&f, d.mass());
        f.iter_mut().for_each(|x| *x -= mean);
        let half = d.apply_power(0.5, &d.apply_power(0.5, &f).unwrap()).unwrap();
        let one = d.apply_power(1.0, &f).unwrap();
        for (a, b) in half.iter().zip(&one) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        let back = d.apply_power(-1.0, &one).unwrap();
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).abs() < 1e-9);
        }
        let id = d.apply_function(|_| 1.0, &f).unwrap();
        for (a, b) in id.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut g = f.clone();
        g[0] += 1.0;
        assert!(matches!(d.apply_power(-0.5, &g), Err(Error::Calculus(_))));
        // support below the first nonzero eigenvalue keeps only the mean
        let l1 = d.eigenvalues()[1];
        let low = d.apply_function(|l| if l < 0.5 * l1 { 1.0 } else { 0.0 }, &g).unwrap();
        let mg = crate::fields::mean(&g, d.mass());
        assert!(low.iter().all(|x| (x - mg).abs() < 1e-12));
    }
}
