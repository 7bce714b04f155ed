//! Lighthill acoustic variables of a flow state, the wave group of the
//! Neumann Laplacian and local decay measurements.
//!
//! The acoustic system is `ε∂ₜS + ω div V = ε f¹`, `ε∂ₜV + ∇S = ε f²` with
//! `V·n = 0`. Writing `V = H[V] + ∇Φ` and `f² = H[f²] + ∇q`, each Neumann
//! eigenmode with `−Δψ = λψ` obeys `Φ' = −S/ε + q`, `S' = ωλΦ/ε + f¹`.

use serde::Serialize;

use crate::constitutive::LinearizedCoeffs;
use crate::error::{check_len, Error, Result};
use crate::fields::inner;
use crate::geometry::Mesh;
use crate::nsf::{NsfSolver, NsfState};
use crate::spectral::{PoissonSolver, Projector, SpectralDecomp};
use crate::staggered::{self, face_inner};

/// Acoustic variables and the constituents of both forcings at one time.
///
/// Cell fields: `s`, `phi`, `g1`, `g3`. Face fields: `v`, `solenoidal`,
/// `h1`, `h2`, `g4`, and the tensor terms, which are stored through their
/// discrete divergences: `g21 = div 𝕊` and `g22 = −div(ρu⊗u)`.
#[derive(Clone, Debug)]
pub struct AcousticData {
    pub t: f64,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    /// Mean-free potential of the gradient part of `v`.
    pub phi: Vec<f64>,
    pub solenoidal: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub g1: Vec<f64>,
    pub g21: Vec<f64>,
    pub g22: Vec<f64>,
    pub g3: Vec<f64>,
    pub g4: Vec<f64>,
}

impl AcousticData {
    /// `f¹ = div(H¹ + H²)`.
    pub fn f1(&self, mesh: &Mesh) -> Vec<f64> {
        let h: Vec<f64> = self.h1.iter().zip(&self.h2).map(|(a, b)| a + b).collect();
        staggered::div(mesh, &h)
    }

    /// `f² = ∇(G³ + G¹) + div 𝕊 − div(ρu⊗u) + G⁴` on faces.
    pub fn f2(&self, mesh: &Mesh) -> Vec<f64> {
        let pot: Vec<f64> = self.g3.iter().zip(&self.g1).map(|(a, b)| a + b).collect();
        let mut f = staggered::grad(mesh, &pot);
        for (i, x) in f.iter_mut().enumerate() {
            if !mesh.faces[i].is_boundary() {
                *x += self.g21[i] + self.g22[i] + self.g4[i];
            }
        }
        f
    }

    /// Largest face defect of `v = H[v] + ∇Φ`.
    pub fn helmholtz_defect(&self, mesh: &Mesh) -> f64 {
        let g = staggered::grad(mesh, &self.phi);
        (0..mesh.n_faces())
            .filter(|&f| !mesh.faces[f].is_boundary())
            .map(|f| (self.v[f] - self.solenoidal[f] - g[f]).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds the acoustic variables of `state`. `sigma_lift` is the cellwise
/// time integral `∫₀ᵗ σ` of the dissipation density; the entropy-production
/// term enters `S` as `−(B/ε)∫₀ᵗσ`.
pub fn assemble_acoustic_data(
    solver: &NsfSolver,
    state: &NsfState,
    sigma_lift: &[f64],
    coeffs: &LinearizedCoeffs,
    projector: &Projector,
) -> Result<AcousticData> {
    let mesh = &solver.mesh;
    let n = mesh.n_cells();
    if sigma_lift.is_empty() {
        return Err(Error::Input("entropy production lift is missing".into()));
    }
    check_len(n, sigma_lift.len())?;
    let p = &solver.params;
    let eps = solver.eps;
    let (rb, tb) = (p.rho_bar, p.theta_bar);
    let (sb, pb) = (p.entropy(rb, tb)?, p.pressure(rb, tb)?);
    let (a, b) = (coeffs.a, coeffs.b);
    let d = solver.derived(state)?;
    let force: Vec<f64> = mesh.cells.iter().map(|c| solver.force.value(c.center)).collect();

    let mut s = Vec::with_capacity(n);
    let mut g1 = Vec::with_capacity(n);
    let mut g3 = Vec::with_capacity(n);
    let mut defect = Vec::with_capacity(n);
    for c in 0..n {
        let (r, th) = (state.rho[c], d.theta[c]);
        let ent = p.entropy(r, th)?;
        let z = a * (r - rb) / eps + b * (r * ent - rb * sb) / eps;
        s.push(z - rb * force[c] - b * sigma_lift[c] / eps);
        g1.push(-b * sigma_lift[c] / (eps * eps));
        g3.push((z - (d.p[c] - pb) / eps) / eps);
        defect.push(r * (sb - ent));
    }

    let nf = mesh.n_faces();
    let (mut v, mut h1, mut h2, mut g4) = (vec![0.0; nf], vec![0.0; nf], vec![0.0; nf], vec![0.0; nf]);
    for (f, face) in mesh.faces.iter().enumerate() {
        let (Some(ca), Some(cb)) = (face.minus, face.plus) else { continue };
        let rf = 0.5 * (state.rho[ca] + state.rho[cb]);
        let uf = state.u[f];
        v[f] = rf * uf;
        h1[f] = b * 0.5 * (defect[ca] + defect[cb]) / eps * uf;
        let k_over_t = 0.5 * (d.kappa[ca] / d.theta[ca] + d.kappa[cb] / d.theta[cb]);
        h2[f] = b * k_over_t * (d.theta[cb] - d.theta[ca]) / (face.dist * eps);
        g4[f] = (rf - rb) / eps * (force[cb] - force[ca]) / face.dist;
    }
    let (g22, g21) = solver.momentum_terms(state)?;
    let split = projector.project(mesh, &v)?;
    Ok(AcousticData {
        t: state.t,
        s,
        v,
        phi: split.potential,
        solenoidal: split.solenoidal,
        h1,
        h2,
        g1,
        g21,
        g22,
        g3,
        g4,
    })
}

/// Smooth bump `(1 − |x−c|²/r²)³₊` used as a spatial test function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestBump {
    pub center: [f64; 2],
    pub radius: f64,
}

impl TestBump {
    pub fn value(&self, x: [f64; 2]) -> f64 {
        let q = 1.0 - ((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)) / (self.radius * self.radius);
        if q > 0.0 { q * q * q } else { 0.0 }
    }

    /// Cell samples; the support must stay clear of every boundary face.
    pub fn sample(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Input(format!("test function radius {} is not positive", self.radius)));
        }
        let touches = mesh.faces.iter().any(|f| f.is_boundary() && self.value(f.center) > 0.0);
        let out: Vec<f64> = mesh.cells.iter().map(|c| self.value(c.center)).collect();
        if touches || out.iter().all(|&x| x == 0.0) {
            return Err(Error::Input(format!(
                "test function at {:?} with radius {} is not supported inside the mesh",
                self.center, self.radius
            )));
        }
        Ok(out)
    }
}

/// Relative residuals of the two weak acoustic identities per test function.
#[derive(Clone, Debug, Serialize)]
pub struct WeakResidual {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub max_relative: f64,
}

/// Trapezoid rule over possibly uneven samples.
fn trapezoid(t: &[f64], g: &[f64]) -> f64 {
    t.windows(2).zip(g.windows(2)).map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1])).sum()
}

/// Tests both weak identities with `φ(t,x) = χ(t) b(x)`,
/// `χ(t) = ½(1 + cos(π t/T))`:
///
/// `ε∫⟨S,∂ₜφ⟩ + ω∫⟨∇Φ,∇φ⟩ + ε⟨S₀,φ(0)⟩ − ε∫⟨H¹+H²,∇φ⟩ = 0`, and with
/// `b̂ = b − mean b`, `Δψ = b̂`:
/// `ε∫⟨Φ,∂ₜφ⟩ − ∫⟨S,φ⟩ + ε⟨Φ₀,φ(0)⟩ − ε∫χ⟨f²,∇ψ⟩ = 0`.
///
/// Each residual is divided by the sum of the magnitudes of its terms.
pub fn acoustic_weak_residual(
    mesh: &Mesh,
    frames: &[AcousticData],
    eps: f64,
    omega: f64,
    tests: &[TestBump],
    poisson: &PoissonSolver,
) -> Result<WeakResidual> {
    if frames.len() < 2 {
        return Err(Error::Input("weak residual needs at least two frames".into()));
    }
    if frames.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::Input("frame times must increase".into()));
    }
    let t0 = frames[0].t;
    let big_t = frames[frames.len() - 1].t - t0;
    let times: Vec<f64> = frames.iter().map(|f| f.t - t0).collect();
    let chi: Vec<f64> = times.iter().map(|&t| 0.5 * (1.0 + (std::f64::consts::PI * t / big_t).cos())).collect();
    let dchi: Vec<f64> = times
        .iter()
        .map(|&t| -0.5 * std::f64::consts::PI / big_t * (std::f64::consts::PI * t / big_t).sin())
        .collect();
    let area = mesh.areas();
    let forcing: Vec<(Vec<f64>, Vec<f64>)> = frames
        .iter()
        .map(|fr| (fr.h1.iter().zip(&fr.h2).map(|(a, b)| a + b).collect(), fr.f2(mesh)))
        .collect();
    let rel = |terms: &[f64]| {
        let scale: f64 = terms.iter().map(|x| x.abs()).sum();
        if scale > 0.0 { terms.iter().sum::<f64>().abs() / scale } else { 0.0 }
    };

    let mut first = Vec::with_capacity(tests.len());
    let mut second = Vec::with_capacity(tests.len());
    for bump in tests {
        let b = bump.sample(mesh)?;
        let gb = staggered::grad(mesh, &b);
        let mean = crate::fields::mean(&b, &area);
        let bh: Vec<f64> = b.iter().map(|x| x - mean).collect();
        let rhs: Vec<f64> = bh.iter().zip(&area).map(|(x, a)| -x * a).collect();
        let psi = poisson.solve(&rhs)?;
        let gpsi = staggered::grad(mesh, &psi);

        let sb: Vec<f64> = frames.iter().map(|fr| inner(&fr.s, &b, &area)).collect();
        let wave: Vec<f64> = frames.iter().map(|fr| face_inner(mesh, &staggered::grad(mesh, &fr.phi), &gb)).collect();
        let heat: Vec<f64> = forcing.iter().map(|(h, _)| face_inner(mesh, h, &gb)).collect();
        let mul = |x: &[f64], w: &[f64]| -> Vec<f64> { x.iter().zip(w).map(|(a, b)| a * b).collect() };
        let t1 = [
            eps * trapezoid(&times, &mul(&sb, &dchi)),
            omega * trapezoid(&times, &mul(&wave, &chi)),
            eps * chi[0] * sb[0],
            -eps * trapezoid(&times, &mul(&heat, &chi)),
        ];
        first.push(rel(&t1));

        let pb: Vec<f64> = frames.iter().map(|fr| inner(&fr.phi, &bh, &area)).collect();
        let sbh: Vec<f64> = frames.iter().map(|fr| inner(&fr.s, &bh, &area)).collect();
        let mom: Vec<f64> = forcing.iter().map(|(_, f2)| face_inner(mesh, f2, &gpsi)).collect();
        let t2 = [
            eps * trapezoid(&times, &mul(&pb, &dchi)),
            -trapezoid(&times, &mul(&sbh, &chi)),
            eps * chi[0] * pb[0],
            -eps * trapezoid(&times, &mul(&mom, &chi)),
        ];
        second.push(rel(&t2));
    }
    let max_relative = first.iter().chain(&second).cloned().fold(0.0, f64::max);
    Ok(WeakResidual { first, second, max_relative })
}

/// Forcing samples on a uniform time grid starting at zero: `f1` per cell
/// and `q`, the potential of the gradient part of `f²`.
#[derive(Clone, Debug)]
pub struct ForcingSeries {
    pub times: Vec<f64>,
    pub f1: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// Multiplies both forcings.
    pub prefactor: f64,
}

impl ForcingSeries {
    pub fn from_fields(
        mesh: &Mesh,
        projector: &Projector,
        times: Vec<f64>,
        f1: Vec<Vec<f64>>,
        f2: &[Vec<f64>],
        prefactor: f64,
    ) -> Result<Self> {
        check_len(times.len(), f1.len())?;
        check_len(times.len(), f2.len())?;
        let q = f2.iter().map(|f| projector.project(mesh, f).map(|h| h.potential)).collect::<Result<Vec<_>>>()?;
        Ok(ForcingSeries { times, f1, q, prefactor })
    }

    /// Forcings of a sequence of acoustic frames, timed from the first.
    pub fn from_frames(mesh: &Mesh, projector: &Projector, frames: &[AcousticData]) -> Result<Self> {
        let t0 = frames.first().map_or(0.0, |f| f.t);
        let times = frames.iter().map(|f| f.t - t0).collect();
        let f1 = frames.iter().map(|f| f.f1(mesh)).collect();
        let f2: Vec<Vec<f64>> = frames.iter().map(|f| f.f2(mesh)).collect();
        Self::from_fields(mesh, projector, times, f1, &f2, 1.0)
    }

    /// Index `m` with `times[m] = t` on the uniform grid.
    fn grid_index(&self, t: f64) -> Result<usize> {
        let n = self.times.len();
        if n == 0 || self.times[0] != 0.0 {
            return Err(Error::Input("forcing samples must start at time zero".into()));
        }
        if t == 0.0 {
            return Ok(0);
        }
        if n < 2 {
            return Err(Error::Input("forcing grid does not reach the requested time".into()));
        }
        let h = self.times[1];
        if !(h > 0.0) || self.times.iter().enumerate().any(|(k, &s)| (s - k as f64 * h).abs() > 1e-9 * h.max(s)) {
            return Err(Error::Input("forcing samples must be uniformly spaced".into()));
        }
        let m = (t / h).round() as usize;
        if m >= n || (m as f64 * h - t).abs() > 1e-9 * t.max(h) {
            return Err(Error::Input(format!("time {t} is not a forcing sample time")));
        }
        Ok(m)
    }
}

/// Composite Simpson weights for `m` equal intervals of width `h`, closing
/// with the three-eighths rule when `m` is odd.
fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    match m {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let even = if m.is_multiple_of(2) { m } else { m - 3 };
            for k in (0..even).step_by(2) {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
            }
            if m % 2 == 1 {
                for (i, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                    w[even + i] += 3.0 * h / 8.0 * c;
                }
            }
        }
    }
    w
}

/// Acoustic potential and `S` at one time.
#[derive(Clone, Debug)]
pub struct AcousticPair {
    pub phi: Vec<f64>,
    pub s: Vec<f64>,
}

/// Two-branch Duhamel solution at time `t`. Per mode with `a = √(ωλ)` and
/// `ν = a/ε`:
/// `Φ(t) = cos(νt)Φ₀ − sin(νt)/a·S₀ + ∫₀ᵗ [cos(ν(t−s)) q − sin(ν(t−s))/a·f¹] ds`,
/// the companion formula giving `S`. The kernel mode of `Φ` is held at zero.
pub fn duhamel_evolve(
    phi0: &[f64],
    s0: &[f64],
    forcing: Option<&ForcingSeries>,
    t: f64,
    eps: f64,
    omega: f64,
    decomp: &SpectralDecomp,
) -> Result<AcousticPair> {
    if !(eps > 0.0 && omega > 0.0 && t.is_finite() && t >= 0.0) {
        return Err(Error::Params(format!("need eps, omega > 0 and t >= 0, got {eps}, {omega}, {t}")));
    }
    decomp.check_mean_zero(phi0)?;
    decomp.check_mean_zero(s0)?;
    let lam = decomp.eigenvalues();
    let cp0 = decomp.analyze(phi0)?;
    let cs0 = decomp.analyze(s0)?;
    let mut cp = vec![0.0; lam.len()];
    let mut cs = vec![0.0; lam.len()];
    let prop = |j: usize, tau: f64, p: f64, s: f64| -> (f64, f64) {
        if lam[j] == 0.0 {
            return (0.0, s);
        }
        let a = (omega * lam[j]).sqrt();
        let (sn, cn) = (a * tau / eps).sin_cos();
        (cn * p - sn / a * s, a * sn * p + cn * s)
    };
    for j in 0..lam.len() {
        (cp[j], cs[j]) = prop(j, t, cp0[j], cs0[j]);
    }
    if let Some(fs) = forcing {
        let m = fs.grid_index(t)?;
        let h = if m > 0 { fs.times[1] } else { 0.0 };
        let w = simpson_weights(m, h);
        for k in 0..=m {
            if w[k] == 0.0 {
                continue;
            }
            let cq = decomp.analyze(&fs.q[k])?;
            let cf = decomp.analyze(&fs.f1[k])?;
            let scale = w[k] * fs.prefactor;
            for j in 0..lam.len() {
                let (dp, ds) = prop(j, t - fs.times[k], cq[j], cf[j]);
                cp[j] += scale * dp;
                cs[j] += scale * ds;
            }
        }
    }
    Ok(AcousticPair { phi: decomp.synthesize(&cp)?, s: decomp.synthesize(&cs)? })
}

/// Störmer–Verlet integration of the acoustic system on the mesh, the
/// independent reference for the Duhamel formula. `forcing(t)` returns
/// `(f¹ per cell, f² per face)`.
#[allow(clippy::too_many_arguments)]
pub fn direct_evolve(
    mesh: &Mesh,
    s0: &[f64],
    v0: &[f64],
    forcing: impl Fn(f64) -> (Vec<f64>, Vec<f64>),
    t: f64,
    n_steps: usize,
    eps: f64,
    omega: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(mesh.n_cells(), s0.len())?;
    check_len(mesh.n_faces(), v0.len())?;
    if n_steps == 0 || !(eps > 0.0 && omega > 0.0) {
        return Err(Error::Params("direct evolution needs steps, eps > 0 and omega > 0".into()));
    }
    let dt = t / n_steps as f64;
    let interior: Vec<bool> = mesh.faces.iter().map(|f| !f.is_boundary()).collect();
    let kick = |v: &mut [f64], s: &[f64], f2: &[f64], h: f64| {
        let g = staggered::grad(mesh, s);
        for f in 0..v.len() {
            v[f] = if interior[f] { v[f] + h * (-g[f] / eps + f2[f]) } else { 0.0 };
        }
    };
    let mut s = s0.to_vec();
    let mut v = v0.to_vec();
    for k in 0..n_steps {
        let t0 = k as f64 * dt;
        kick(&mut v, &s, &forcing(t0).1, 0.5 * dt);
        let dv = staggered::div(mesh, &v);
        let f1 = forcing(t0 + 0.5 * dt).0;
        for c in 0..s.len() {
            s[c] += dt * (-omega * dv[c] / eps + f1[c]);
        }
        kick(&mut v, &s, &forcing(t0 + dt).1, 0.5 * dt);
    }
    Ok((s, v))
}

/// `exp(i√(−ωΔ) t/ε)` applied to `re + i·im`.
pub fn propagate(
    decomp: &SpectralDecomp,
    re: &[f64],
    im: &[f64],
    t: f64,
    eps: f64,
    omega: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cr = decomp.analyze(re)?;
    let mut ci = decomp.analyze(im)?;
    for (j, &l) in decomp.eigenvalues().iter().enumerate() {
        let (sn, cn) = ((omega * l).sqrt() * t / eps).sin_cos();
        (cr[j], ci[j]) = (cn * cr[j] - sn * ci[j], sn * cr[j] + cn * ci[j]);
    }
    Ok((decomp.synthesize(&cr)?, decomp.synthesize(&ci)?))
}

/// Twice the largest distance of a cell center from the area centroid.
pub fn domain_diameter(mesh: &Mesh) -> f64 {
    let area = mesh.areas();
    let tot: f64 = area.iter().sum();
    let mut c = [0.0; 2];
    for (cell, a) in mesh.cells.iter().zip(&area) {
        c[0] += a * cell.center[0] / tot;
        c[1] += a * cell.center[1] / tot;
    }
    2.0 * mesh.cells.iter().map(|k| (k.center[0] - c[0]).hypot(k.center[1] - c[1])).fold(0.0, f64::max)
}

/// Time for a wave of speed `√ω/ε` to cross the domain.
pub fn crossing_time(mesh: &Mesh, eps: f64, omega: f64) -> f64 {
    eps * domain_diameter(mesh) / omega.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayResult {
    pub eps: f64,
    pub t_end: f64,
    pub t_cross: f64,
    /// `I(ε) = ∫₀ᵀ |⟨exp(i√(−ωΔ)t/ε)Ψ, G(−Δ)φ⟩|² dt`.
    pub integral: f64,
    pub psi_norm_sq: f64,
    /// `I/(ε‖Ψ‖²)`.
    pub normalized: f64,
    /// Set when `T` exceeds the crossing time.
    pub contaminated: bool,
}

/// Evaluates `I(ε)`. With `a_j = Ψ_j G(λ_j) φ_j` the integral is
/// `Σ_{jk} a_j a_k sin((ν_j−ν_k)T)/(ν_j−ν_k)`, summed in closed form over the
/// modes where `a_j ≠ 0`.
#[allow(clippy::too_many_arguments)]
pub fn decay_experiment(
    psi: &[f64],
    phi: &[f64],
    g: &dyn Fn(f64) -> f64,
    eps: f64,
    t_end: f64,
    omega: f64,
    mesh: &Mesh,
    decomp: &SpectralDecomp,
) -> Result<DecayResult> {
    check_len(mesh.n_cells(), psi.len())?;
    check_len(mesh.n_cells(), phi.len())?;
    if !(eps > 0.0 && omega > 0.0 && t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Params(format!("need eps, omega, T > 0, got {eps}, {omega}, {t_end}")));
    }
    for face in mesh.faces.iter().filter(|f| f.is_boundary()) {
        if let Some((c, _)) = face.boundary_cell() {
            if phi[c] != 0.0 {
                return Err(Error::Input("observable must vanish on cells touching the boundary".into()));
            }
        }
    }
    let lam = decomp.eigenvalues();
    if decomp.len() < mesh.n_cells() && lam.last().is_some_and(|&l| g(l) != 0.0) {
        return Err(Error::Input("G does not vanish at the largest computed eigenvalue".into()));
    }
    let cp = decomp.analyze(psi)?;
    let cf = decomp.analyze(phi)?;
    let mut modes: Vec<(f64, f64)> = Vec::new();
    for j in 0..lam.len() {
        let gl = g(lam[j]);
        if !gl.is_finite() {
            return Err(Error::Calculus(format!("G not finite at eigenvalue {}", lam[j])));
        }
        let a = cp[j] * gl * cf[j];
        if a != 0.0 {
            modes.push(((omega * lam[j]).sqrt() / eps, a));
        }
    }
    let mut integral = 0.0;
    for &(nj, aj) in &modes {
        for &(nk, ak) in &modes {
            let d = nj - nk;
            let kern = if (d * t_end).abs() < 1e-8 { t_end } else { (d * t_end).sin() / d };
            integral += aj * ak * kern;
        }
    }
    let psi_norm_sq = inner(psi, psi, &mesh.areas());
    let t_cross = crossing_time(mesh, eps, omega);
    Ok(DecayResult {
        eps,
        t_end,
        t_cross,
        integral,
        psi_norm_sq,
        normalized: integral / (eps * psi_norm_sq),
        contaminated: t_end > t_cross,
    })
}

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of `log y` from the line.
    pub residual: f64,
}

pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    check_len(x.len(), y.len())?;
    if x.len() < 3 {
        return Err(Error::Input(format!("slope fit needs at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Input("slope fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("slope fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(SlopeFit { slope, intercept, residual: (ss / n).sqrt() })
}

/// One member of an ε-family: the mesh and its decomposition.
pub struct DecayCase<'a> {
    pub eps: f64,
    pub mesh: &'a Mesh,
    pub decomp: &'a SpectralDecomp,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySweep {
    pub results: Vec<DecayResult>,
    pub fit: SlopeFit,
}

/// Runs the decay experiment on each case with `T = t_fraction·T_cross`,
/// `Ψ` sampled and normalized to unit `L²` norm, and fits `log I` against
/// `log ε`.
pub fn decay_rate_sweep(
    cases: &[DecayCase],
    psi: &dyn Fn([f64; 2]) -> f64,
    phi: &dyn Fn([f64; 2]) -> f64,
    g: &dyn Fn(f64) -> f64,
    omega: f64,
    t_fraction: f64,
) -> Result<DecaySweep> {
    if cases.len() < 3 {
        return Err(Error::Input(format!("decay sweep needs at least 3 eps values, got {}", cases.len())));
    }
    let mut results = Vec::with_capacity(cases.len());
    for case in cases {
        let area = case.mesh.areas();
        let mut ps: Vec<f64> = case.mesh.cells.iter().map(|c| psi(c.center)).collect();
        let norm = inner(&ps, &ps, &area).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Input("Ψ vanishes on the mesh".into()));
        }
        ps.iter_mut().for_each(|x| *x /= norm);
        let ph: Vec<f64> = case.mesh.cells.iter().map(|c| phi(c.center)).collect();
        let t_end = t_fraction * crossing_time(case.mesh, case.eps, omega);
        results.push(decay_experiment(&ps, &ph, g, case.eps, t_end, omega, case.mesh, case.decomp)?);
    }
    let eps: Vec<f64> = results.iter().map(|r| r.eps).collect();
    let vals: Vec<f64> = results.iter().map(|r| r.integral).collect();
    let fit = fit_slope(&eps, &vals)?;
    Ok(DecaySweep { results, fit })
}

/// `eps,T,I,T_cross,flag` rows.
pub fn decay_csv(results: &[DecayResult]) -> String {
    let mut out = String::from("eps,T,I,T_cross,flag\n");
    for r in results {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{}\n",
            r.eps,
            r.t_end,
            r.integral,
            r.t_cross,
            if r.contaminated { "contaminated" } else { "ok" }
        ));
    }
    out
}

#[cfg(test)]
mod tests;
