//! Static density profile balancing the scaled driving force, its expansion
//! in ε, and ill-prepared initial data around it.
//!
//! The static state solves `∇p(ρ̃, θ̄) = ε ρ̃ ∇F`. Its first integral is
//! `Π(ρ̃) = ε(F − F_ref) + Π(ρ̄)` with `F_ref` from
//! [`PotentialField::reference`] and `Π′(ρ) = ∂ρp(ρ, θ̄)/ρ`. For the
//! pressure law in [`crate::constitutive`],
//! `Π(ρ) = c_lin θ̄ ln ρ + (5/2) c_deg ρ^{2/3}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constitutive::ThermoParams;
use crate::error::{Error, Result};
use crate::fields::{mean, Snapshot};
use crate::geometry::Mesh;
use crate::staggered;

/// Potential of the driving force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialField {
    Constant { value: f64 },
    /// `offset + g·x`.
    Linear { g: [f64; 2], #[serde(default)] offset: f64 },
    /// `amp · tanh(d·x / scale)`.
    Tanh { amp: f64, dir: [f64; 2], scale: f64 },
    /// `amp · exp(−|x − center|² / width²)`.
    Gaussian { amp: f64, center: [f64; 2], width: f64 },
}

impl Default for PotentialField {
    fn default() -> Self {
        PotentialField::Gaussian { amp: 1.0, center: [0.0, 2.0], width: 1.5 }
    }
}

impl PotentialField {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PotentialField::Constant { value } => value.is_finite(),
            PotentialField::Linear { g, offset } => g.iter().all(|v| v.is_finite()) && offset.is_finite(),
            PotentialField::Tanh { amp, dir, scale } => {
                amp.is_finite() && dir.iter().all(|v| v.is_finite()) && *scale > 0.0
            }
            PotentialField::Gaussian { amp, center, width } => {
                amp.is_finite() && center.iter().all(|v| v.is_finite()) && *width > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Params(format!("invalid potential {self:?}")))
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        match *self {
            PotentialField::Constant { value } => value,
            PotentialField::Linear { g, offset } => offset + g[0] * x[0] + g[1] * x[1],
            PotentialField::Tanh { amp, dir, scale } => amp * ((dir[0] * x[0] + dir[1] * x[1]) / scale).tanh(),
            PotentialField::Gaussian { amp, center, width } => {
                let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                amp * (-r2 / (width * width)).exp()
            }
        }
    }

    /// Level at which the static density equals `ρ̄`: the far-field value
    /// of a Gaussian, the value at the origin otherwise.
    pub fn reference(&self) -> f64 {
        match *self {
            PotentialField::Constant { value } => value,
            PotentialField::Linear { offset, .. } => offset,
            PotentialField::Tanh { .. } | PotentialField::Gaussian { .. } => 0.0,
        }
    }

    /// `F − F_ref`.
    pub fn relative(&self, x: [f64; 2]) -> f64 {
        self.value(x) - self.reference()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            PotentialField::Constant { .. } => [0.0, 0.0],
            PotentialField::Linear { g, .. } => g,
            PotentialField::Tanh { amp, dir, scale } => {
                let t = ((dir[0] * x[0] + dir[1] * x[1]) / scale).tanh();
                let k = amp * (1.0 - t * t) / scale;
                [k * dir[0], k * dir[1]]
            }
            PotentialField::Gaussian { center, width, .. } => {
                let f = self.value(x);
                let w2 = width * width;
                [-2.0 * (x[0] - center[0]) / w2 * f, -2.0 * (x[1] - center[1]) / w2 * f]
            }
        }
    }
}

/// `Π(ρ)` at temperature θ̄.
pub fn first_integral(params: &ThermoParams, rho: f64) -> f64 {
    params.p_law.c_lin * params.theta_bar * rho.ln() + 2.5 * params.p_law.c_deg * rho.powf(2.0 / 3.0)
}

/// `Π′(ρ) = ∂ρp(ρ, θ̄)/ρ`.
pub fn first_integral_slope(params: &ThermoParams, rho: f64) -> f64 {
    (params.p_law.c_lin * params.theta_bar + 5.0 / 3.0 * params.p_law.c_deg * rho.powf(2.0 / 3.0)) / rho
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticState {
    pub eps: f64,
    pub rho_tilde: Vec<f64>,
    pub theta_bar: f64,
    /// Filled by [`verify_expansion`].
    pub h_eps_norm: Option<f64>,
}

/// Newton in `ln ρ`, where `Π` is convex and increasing.
fn solve_first_integral(params: &ThermoParams, target: f64, cell: usize) -> Result<f64> {
    let mut u = params.rho_bar.ln();
    let tol = 1e-12 * (1.0 + target.abs());
    for _ in 0..100 {
        let rho = u.exp();
        let r = first_integral(params, rho) - target;
        if r.abs() < tol {
            return if rho > 0.0 && rho.is_finite() {
                Ok(rho)
            } else {
                Err(Error::Equilibrium { cell, reason: format!("density {rho} is not positive") })
            };
        }
        u -= r / (first_integral_slope(params, rho) * rho);
        if !u.is_finite() {
            break;
        }
    }
    Err(Error::Equilibrium { cell, reason: format!("Newton did not converge for target {target}") })
}

pub fn static_state(f: &PotentialField, eps: f64, params: &ThermoParams, mesh: &Mesh) -> Result<StaticState> {
    params.validate()?;
    f.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Params(format!("eps must be positive, got {eps}")));
    }
    let base = first_integral(params, params.rho_bar);
    let rho_tilde = mesh
        .cells
        .iter()
        .enumerate()
        .map(|(c, cell)| solve_first_integral(params, eps * f.relative(cell.center) + base, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(StaticState { eps, rho_tilde, theta_bar: params.theta_bar, h_eps_norm: None })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionReport {
    /// `sup |h_ε|` with `h_ε = (ρ̃ − ρ̄ − εF/Π′(ρ̄)) / (ε²F)`, `F` taken
    /// relative to its reference level.
    pub h_eps_norm: f64,
    /// Cells with `|F|` below the guard.
    pub skipped: usize,
    /// `‖ρ̃ − ρ̄‖∞ / ε`.
    pub leading: f64,
    /// `|F|∞ / Π′(ρ̄)`, the limit of `leading`.
    pub leading_limit: f64,
    /// `max |∂ₙρ̃| / (ε |∇F|∞)` over interior faces; zero when `∇F ≡ 0`.
    pub gradient_ratio: f64,
}

pub fn verify_expansion(
    state: &mut StaticState,
    f: &PotentialField,
    params: &ThermoParams,
    mesh: &Mesh,
) -> Result<ExpansionReport> {
    crate::error::check_len(mesh.n_cells(), state.rho_tilde.len())?;
    let eps = state.eps;
    let rb = params.rho_bar;
    let slope = first_integral_slope(params, rb);
    let guard = 1e-8;
    let (mut h, mut skipped, mut dev, mut fmax) = (0.0f64, 0usize, 0.0f64, 0.0f64);
    for (cell, &r) in mesh.cells.iter().zip(&state.rho_tilde) {
        let fv = f.relative(cell.center);
        dev = dev.max((r - rb).abs());
        fmax = fmax.max(fv.abs());
        if fv.abs() < guard {
            skipped += 1;
            continue;
        }
        h = h.max(((r - rb - eps * fv / slope) / (eps * eps * fv)).abs());
    }
    let grad_f = mesh
        .faces
        .iter()
        .map(|face| {
            let g = f.gradient(face.center);
            g[0].hypot(g[1])
        })
        .fold(0.0, f64::max);
    let gr = staggered::grad(mesh, &state.rho_tilde).iter().map(|g| g.abs()).fold(0.0, f64::max);
    let gradient_ratio = if grad_f > 0.0 { gr / (eps * grad_f) } else { 0.0 };
    state.h_eps_norm = Some(h);
    Ok(ExpansionReport { h_eps_norm: h, skipped, leading: dev / eps, leading_limit: fmax / slope, gradient_ratio })
}

/// Scalar perturbation profile in physical coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum Profile {
    #[default]
    Zero,
    /// `amp · sin(k·x + phase)`.
    Sin { amp: f64, k: [f64; 2], #[serde(default)] phase: f64 },
    Gaussian { amp: f64, center: [f64; 2], width: f64 },
    /// Sum of `modes` seeded random plane waves with wavenumbers up to `kmax`,
    /// scaled to sup amplitude at most `amp`.
    Random { amp: f64, seed: u64, #[serde(default = "default_modes")] modes: usize, #[serde(default = "default_kmax")] kmax: f64 },
}

fn default_modes() -> usize {
    12
}

fn default_kmax() -> f64 {
    3.0
}


/// Plane-wave sum `Σ a_m sin(k_m·x + φ_m)` with `Σ |a_m| = amp`.
fn random_waves(amp: f64, seed: u64, modes: usize, kmax: f64) -> Vec<(f64, [f64; 2], f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<(f64, [f64; 2], f64)> = (0..modes)
        .map(|_| {
            let a = rng.random::<f64>() - 0.5;
            let k = kmax * rng.random::<f64>().sqrt();
            let ang = std::f64::consts::TAU * rng.random::<f64>();
            let ph = std::f64::consts::TAU * rng.random::<f64>();
            (a, [k * ang.cos(), k * ang.sin()], ph)
        })
        .collect();
    let s: f64 = w.iter().map(|m| m.0.abs()).sum();
    if s > 0.0 {
        w.iter_mut().for_each(|m| m.0 *= amp / s);
    }
    w
}

impl Profile {
    pub fn sampler(&self) -> Box<dyn Fn([f64; 2]) -> f64 + Send + Sync> {
        match *self {
            Profile::Zero => Box::new(|_| 0.0),
            Profile::Sin { amp, k, phase } => Box::new(move |x| amp * (k[0] * x[0] + k[1] * x[1] + phase).sin()),
            Profile::Gaussian { amp, center, width } => Box::new(move |x| {
                amp * (-((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (width * width)).exp()
            }),
            Profile::Random { amp, seed, modes, kmax } => {
                let w = random_waves(amp, seed, modes, kmax);
                Box::new(move |x| w.iter().map(|(a, k, p)| a * (k[0] * x[0] + k[1] * x[1] + p).sin()).sum())
            }
        }
    }

    pub fn sup_bound(&self) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Sin { amp, .. } | Profile::Gaussian { amp, .. } | Profile::Random { amp, .. } => amp.abs(),
        }
    }
}

/// Velocity profile in physical coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum VelocityProfile {
    #[default]
    Zero,
    Uniform { u: [f64; 2] },
    /// Gaussian vortex `amp · e^{−r²/w²} (−y, x)/w` about `center`.
    Vortex { amp: f64, center: [f64; 2], width: f64 },
    /// Gaussian source `amp · e^{−r²/w²} (x, y)/w` about `center`, a purely
    /// compressive field.
    Source { amp: f64, center: [f64; 2], width: f64 },
    /// Independent random plane-wave sums per component.
    Random { amp: f64, seed: u64, #[serde(default = "default_modes")] modes: usize, #[serde(default = "default_kmax")] kmax: f64 },
}


impl VelocityProfile {
    pub fn sampler(&self) -> Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync> {
        match *self {
            VelocityProfile::Zero => Box::new(|_| [0.0, 0.0]),
            VelocityProfile::Uniform { u } => Box::new(move |_| u),
            VelocityProfile::Vortex { amp, center, width } | VelocityProfile::Source { amp, center, width } => {
                let swirl = matches!(self, VelocityProfile::Vortex { .. });
                Box::new(move |x| {
                    let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                    let g = amp * (-(dx * dx + dy * dy) / (width * width)).exp() / width;
                    if swirl {
                        [-dy * g, dx * g]
                    } else {
                        [dx * g, dy * g]
                    }
                })
            }
            VelocityProfile::Random { amp, seed, modes, kmax } => {
                let a = random_waves(amp, seed, modes, kmax);
                let b = random_waves(amp, seed.wrapping_add(0x9e37_79b9), modes, kmax);
                let eval = |w: &[(f64, [f64; 2], f64)], x: [f64; 2]| -> f64 {
                    w.iter().map(|(a, k, p)| a * (k[0] * x[0] + k[1] * x[1] + p).sin()).sum()
                };
                Box::new(move |x| [eval(&a, x), eval(&b, x)])
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    #[serde(default)]
    pub rho1: Profile,
    #[serde(default)]
    pub theta1: Profile,
    #[serde(default)]
    pub u0: VelocityProfile,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub rho0: Vec<f64>,
    /// Face-normal velocity, zero on boundary faces.
    pub u0: Vec<f64>,
    pub theta0: Vec<f64>,
    pub rho1: Vec<f64>,
    pub theta1: Vec<f64>,
}

impl InitialData {
    pub fn snapshot(&self, mesh: &Mesh) -> Snapshot {
        let v = staggered::cell_cartesian(mesh, &self.u0);
        Snapshot {
            t: 0.0,
            rho: self.rho0.clone(),
            ux: v.iter().map(|w| w[0]).collect(),
            uy: v.iter().map(|w| w[1]).collect(),
            theta: self.theta0.clone(),
        }
    }
}

/// `ρ₀ = ρ̃ + ερ⁽¹⁾`, `θ₀ = θ̄ + εθ⁽¹⁾` with both perturbations projected to
/// zero discrete mean, and `u₀` sampled without any projection.
pub fn make_initial_data(state: &StaticState, pert: &Perturbation, mesh: &Mesh) -> Result<InitialData> {
    crate::error::check_len(mesh.n_cells(), state.rho_tilde.len())?;
    let areas = mesh.areas();
    let sample = |p: &Profile| -> Vec<f64> {
        let s = p.sampler();
        let mut v: Vec<f64> = mesh.cells.iter().map(|c| s(c.center)).collect();
        let m = mean(&v, &areas);
        v.iter_mut().for_each(|x| *x -= m);
        v
    };
    let rho1 = sample(&pert.rho1);
    let theta1 = sample(&pert.theta1);
    let eps = state.eps;
    let rho0: Vec<f64> = state.rho_tilde.iter().zip(&rho1).map(|(r, d)| r + eps * d).collect();
    let theta0: Vec<f64> = theta1.iter().map(|d| state.theta_bar + eps * d).collect();
    if let Some(c) = rho0.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Input(format!("initial density {} at cell {c} is not positive", rho0[c])));
    }
    if let Some(c) = theta0.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Input(format!("initial temperature {} at cell {c} is not positive", theta0[c])));
    }
    let u0 = staggered::sample_faces(mesh, pert.u0.sampler());
    Ok(InitialData { rho0, u0, theta0, rho1, theta1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(n: usize) -> Mesh {
        Mesh::interval(n, 4.0, false).unwrap()
    }

    #[test]
    fn constant_potential_is_uniform() {
        let p = ThermoParams::default();
        let m = column(10);
        let s = static_state(&PotentialField::Constant { value: 3.0 }, 0.1, &p, &m).unwrap();
        assert!(s.rho_tilde.iter().all(|&r| (r - 1.0).abs() < 1e-14));
    }

    /// Classical RK4 for `ρ′ = ε ρ F′ / ∂ρp(ρ, θ̄)` along a line.
    fn ode_oracle(p: &ThermoParams, eps: f64, fp: f64, x: f64) -> f64 {
        let rhs = |r: f64| {
            let dp = p.derivs(r, p.theta_bar).unwrap().dp_drho;
            eps * r * fp / dp
        };
        let n = 20_000;
        let h = x / n as f64;
        let mut r = p.rho_bar;
        for _ in 0..n {
            let k1 = rhs(r);
            let k2 = rhs(r + 0.5 * h * k1);
            let k3 = rhs(r + 0.5 * h * k2);
            let k4 = rhs(r + h * k3);
            r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        r
    }

    #[test]
    fn column_matches_ode() {
        let p = ThermoParams::default();
        let m = column(16);
        let f = PotentialField::Linear { g: [-1.0, 0.0], offset: 0.0 };
        let s = static_state(&f, 0.1, &p, &m).unwrap();
        for (c, cell) in m.cells.iter().enumerate() {
            let r = ode_oracle(&p, 0.1, -1.0, cell.center[0]);
            assert!((s.rho_tilde[c] - r).abs() < 1e-8, "{} vs {r}", s.rho_tilde[c]);
        }
    }

    #[test]
    fn expansion_remainder_is_bounded() {
        let p = ThermoParams::default();
        let m = column(32);
        let f = PotentialField::Linear { g: [-1.0, 0.0], offset: 0.0 };
        let mut hs = vec![];
        let mut lead = vec![];
        for k in 2..=6 {
            let eps = 0.5f64.powi(k);
            let mut s = static_state(&f, eps, &p, &m).unwrap();
            let r = verify_expansion(&mut s, &f, &p, &m).unwrap();
            hs.push(r.h_eps_norm);
            lead.push((r.leading, r.leading_limit));
            assert!(r.gradient_ratio < 1.0);
        }
        let (lo, hi) = hs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &h| (a.min(h), b.max(h)));
        assert!(hi / lo < 1.2, "{hs:?}");
        let (l, lim) = *lead.last().unwrap();
        assert!((l - lim).abs() < 0.05 * lim);
    }

    #[test]
    fn deviation_linear_in_eps() {
        let p = ThermoParams::default();
        let m = Mesh::annulus(vec![1.0, 1.5, 2.0, 3.0], 16).unwrap();
        let f = PotentialField::default();
        let dev = |eps: f64| {
            let s = static_state(&f, eps, &p, &m).unwrap();
            s.rho_tilde.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max)
        };
        let ratio = dev(0.02) / dev(0.01);
        assert!((ratio - 2.0).abs() < 0.02);
    }

    #[test]
    fn zero_potential_expansion() {
        let p = ThermoParams::default();
        let m = column(4);
        let f = PotentialField::Constant { value: 0.0 };
        let mut s = static_state(&f, 0.25, &p, &m).unwrap();
        let r = verify_expansion(&mut s, &f, &p, &m).unwrap();
        assert_eq!(r.skipped, 4);
        assert_eq!(r.gradient_ratio, 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = [0.3, -0.7];
        for f in [
            PotentialField::Linear { g: [0.5, 2.0], offset: 1.0 },
            PotentialField::Tanh { amp: 2.0, dir: [0.6, 0.8], scale: 0.7 },
            PotentialField::default(),
        ] {
            let g = f.gradient(x);
            let h = 1e-6;
            for k in 0..2 {
                let (mut a, mut b) = (x, x);
                a[k] += h;
                b[k] -= h;
                let fd = (f.value(a) - f.value(b)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-8);
            }
        }
    }

    fn perturbed(eps: f64) -> (Mesh, InitialData, StaticState) {
        let p = ThermoParams::default();
        let m = Mesh::annulus((0..=8).map(|k| 1.0 + 0.25 * k as f64).collect(), 24).unwrap();
        let s = static_state(&PotentialField::default(), eps, &p, &m).unwrap();
        let pert = Perturbation {
            rho1: Profile::Sin { amp: 1.0, k: [1.0, 0.5], phase: 0.2 },
            theta1: Profile::Random { amp: 0.5, seed: 3, modes: 8, kmax: 2.0 },
            u0: VelocityProfile::Source { amp: 1.0, center: [0.0, 2.0], width: 1.0 },
        };
        let d = make_initial_data(&s, &pert, &m).unwrap();
        (m, d, s)
    }

    #[test]
    fn initial_data_means_and_scaling() {
        let (m, d, s) = perturbed(0.1);
        let a = m.areas();
        assert!(mean(&d.rho1, &a).abs() < 1e-15);
        assert!(mean(&d.theta1, &a).abs() < 1e-15);
        let dev = |d: &InitialData, s: &StaticState| {
            d.rho0.iter().zip(&s.rho_tilde).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (_, d2, s2) = perturbed(0.05);
        assert!((dev(&d, &s) / dev(&d2, &s2) - 2.0).abs() < 1e-10);
        assert!(staggered::div(&m, &d.u0).iter().any(|x| x.abs() > 1e-3));
        for (f, face) in m.faces.iter().enumerate() {
            if face.is_boundary() {
                assert_eq!(d.u0[f], 0.0);
            }
        }
    }

    #[test]
    fn zero_profiles_give_static_state() {
        let p = ThermoParams::default();
        let m = column(8);
        let s = static_state(&PotentialField::default(), 0.2, &p, &m).unwrap();
        let d = make_initial_data(&s, &Perturbation::default(), &m).unwrap();
        assert_eq!(d.rho0, s.rho_tilde);
        assert!(d.theta0.iter().all(|&t| t == 1.0));
        assert!(d.u0.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn oversized_perturbation_rejected() {
        let p = ThermoParams::default();
        let m = column(8);
        let s = static_state(&PotentialField::Constant { value: 0.0 }, 0.5, &p, &m).unwrap();
        let pert = Perturbation { rho1: Profile::Sin { amp: 10.0, k: [1.0, 0.0], phase: 0.0 }, ..Default::default() };
        assert!(matches!(make_initial_data(&s, &pert, &m), Err(Error::Input(_))));
    }
}
