//! Explicit finite-volume solver for the scaled compressible
//! Navier–Stokes–Fourier system on a staggered mesh.
//!
//! Unknowns are the cell density `ρ`, the face-normal velocity `u` and the
//! cell total energy `𝓔 = ρe + ε²ρ|u|²/2 − ερF` (the total energy density
//! scaled by `ε²`). The energy is updated in conservation form, so
//! `∫(½ρ|u|² + ε⁻²ρe − ε⁻¹ρF)` is constant up to rounding; the temperature
//! is recovered from `𝓔` at every stage. Momentum uses the vector-invariant
//! form, with the pressure gradient and the driving force combined as
//! `−ε⁻²∇p/ρ + ε⁻²∇p̃/ρ̃`, which vanishes identically on the static state.
//! Walls are impermeable, thermally insulated and free of viscous work.

mod monitors;

pub use monitors::{
    dissipation_balance, entropy_production, uniform_bound_monitor, BalanceReport, BoundMonitor,
    BoundsReport, EntropyReport, Sample, Trajectory,
};

use serde::{Deserialize, Serialize};

use crate::constitutive::ThermoParams;
use crate::equilibrium::{InitialData, PotentialField, StaticState};
use crate::error::{Error, Result};
use crate::fields::Snapshot;
use crate::geometry::{Axis, Mesh};
use crate::staggered::{self, Staggered, WallMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxConfig {
    /// Safety factor of the acoustic bound, in `(0, 1]`.
    pub cfl_acoustic: f64,
    /// Safety factor applied to the viscous and thermal bounds.
    pub cfl_diffusive: f64,
    pub wall: WallMode,
    /// Step rejections (each halving `dt`) before giving up.
    pub max_halvings: u32,
}

impl Default for FluxConfig {
    fn default() -> Self {
        FluxConfig { cfl_acoustic: 0.5, cfl_diffusive: 1.0, wall: WallMode::Slip, max_halvings: 10 }
    }
}

impl FluxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_acoustic > 0.0 && self.cfl_acoustic <= 1.0) {
            return Err(Error::Params(format!("cfl_acoustic must lie in (0,1], got {}", self.cfl_acoustic)));
        }
        if !(self.cfl_diffusive > 0.0 && self.cfl_diffusive <= 1.0) {
            return Err(Error::Params(format!("cfl_diffusive must lie in (0,1], got {}", self.cfl_diffusive)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NsfState {
    pub t: f64,
    pub rho: Vec<f64>,
    /// Face-normal velocity; zero on boundary faces.
    pub u: Vec<f64>,
    /// `𝓔 = ρe + ε²ρK − ερF`.
    pub energy: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CflBounds {
    pub acoustic: f64,
    pub viscous: f64,
    pub thermal: f64,
}

impl CflBounds {
    pub fn dt(&self) -> f64 {
        self.acoustic.min(self.viscous).min(self.thermal)
    }
}

/// Precomputed geometry, static state and coefficients for one run.
#[derive(Clone, Debug)]
pub struct NsfSolver {
    pub mesh: Mesh,
    pub params: ThermoParams,
    pub eps: f64,
    pub force: PotentialField,
    pub cfg: FluxConfig,
    pub stag: Staggered,
    pub rho_tilde: Vec<f64>,
    area: Vec<f64>,
    weight: Vec<f64>,
    force_cell: Vec<f64>,
    /// `ε⁻²(p̃_b − p̃_a)/(d ρ̃_f)` on interior faces.
    balance: Vec<f64>,
    interior: Vec<bool>,
    /// Shortest cell extent per cell.
    h_cell: Vec<f64>,
}

/// Cell quantities derived from the conserved state at one stage.
pub(crate) struct Derived {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl NsfSolver {
    pub fn new(
        mesh: &Mesh,
        params: &ThermoParams,
        eps: f64,
        force: &PotentialField,
        state: &StaticState,
        cfg: &FluxConfig,
    ) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        force.validate()?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Params(format!("eps must be positive, got {eps}")));
        }
        crate::error::check_len(mesh.n_cells(), state.rho_tilde.len())?;
        let tb = params.theta_bar;
        let p_tilde = state
            .rho_tilde
            .iter()
            .map(|&r| params.pressure(r, tb))
            .collect::<Result<Vec<_>>>()?;
        let balance = mesh
            .faces
            .iter()
            .map(|f| match (f.minus, f.plus) {
                (Some(a), Some(b)) => {
                    let rf = 0.5 * (state.rho_tilde[a] + state.rho_tilde[b]);
                    (p_tilde[b] - p_tilde[a]) / (f.dist * rf * eps * eps)
                }
                _ => 0.0,
            })
            .collect();
        let g = &mesh.grid;
        let h_cell = mesh.cells.iter().map(|c| g.dx1(c.i).min(c.h * g.d2)).collect();
        Ok(NsfSolver {
            mesh: mesh.clone(),
            params: *params,
            eps,
            force: force.clone(),
            cfg: *cfg,
            stag: Staggered::new(mesh, cfg.wall),
            rho_tilde: state.rho_tilde.clone(),
            area: mesh.areas(),
            weight: mesh.face_weights(),
            force_cell: mesh.cells.iter().map(|c| force.value(c.center)).collect(),
            balance,
            interior: mesh.faces.iter().map(|f| !f.is_boundary()).collect(),
            h_cell,
        })
    }

    /// Kinetic energy per unit mass `K_c = (1/|K|) Σ_f ¼ w_f u_f²`.
    pub fn kinetic(&self, u: &[f64]) -> Vec<f64> {
        let mut k = vec![0.0; self.mesh.n_cells()];
        for (f, face) in self.mesh.faces.iter().enumerate() {
            let e = 0.25 * self.weight[f] * u[f] * u[f];
            for c in [face.minus, face.plus].into_iter().flatten() {
                k[c] += e;
            }
        }
        k.iter_mut().zip(&self.area).for_each(|(k, a)| *k /= a);
        k
    }

    /// Conserved energy of a primitive state.
    pub fn energy_from_primitive(&self, rho: &[f64], u: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let k = self.kinetic(u);
        let e2 = self.eps * self.eps;
        (0..rho.len())
            .map(|c| {
                let e = self.params.internal_energy(rho[c], theta[c])?;
                Ok(rho[c] * e + e2 * rho[c] * k[c] - self.eps * rho[c] * self.force_cell[c])
            })
            .collect()
    }

    pub fn state_from_initial(&self, init: &InitialData) -> Result<NsfState> {
        let n = self.mesh.n_cells();
        crate::error::check_len(n, init.rho0.len())?;
        crate::error::check_len(n, init.theta0.len())?;
        crate::error::check_len(self.mesh.n_faces(), init.u0.len())?;
        let mut u = init.u0.clone();
        for (x, &i) in u.iter_mut().zip(&self.interior) {
            if !i {
                *x = 0.0;
            }
        }
        let energy = self.energy_from_primitive(&init.rho0, &u, &init.theta0)?;
        Ok(NsfState { t: 0.0, rho: init.rho0.clone(), u, energy, theta: init.theta0.clone() })
    }

    pub fn snapshot(&self, s: &NsfState) -> Snapshot {
        let v = staggered::cell_cartesian(&self.mesh, &s.u);
        Snapshot {
            t: s.t,
            rho: s.rho.clone(),
            ux: v.iter().map(|w| w[0]).collect(),
            uy: v.iter().map(|w| w[1]).collect(),
            theta: s.theta.clone(),
        }
    }

    fn derive(&self, t: f64, rho: &[f64], u: &[f64], energy: &[f64], guess: &[f64]) -> Result<Derived> {
        let n = rho.len();
        let k = self.kinetic(u);
        let e2 = self.eps * self.eps;
        let mut d = Derived {
            theta: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            mu: Vec::with_capacity(n),
            eta: Vec::with_capacity(n),
            kappa: Vec::with_capacity(n),
        };
        for c in 0..n {
            let r = rho[c];
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Step { t, reason: format!("density {r} at cell {c} is not positive") });
            }
            let e = (energy[c] - e2 * r * k[c] + self.eps * r * self.force_cell[c]) / r;
            let th = self
                .params
                .theta_from_energy(r, e, guess[c])
                .map_err(|err| Error::Step { t, reason: format!("temperature lost at cell {c}: {err}") })?;
            let tr = self.params.transport(th)?;
            d.p.push(self.params.p_raw(r, th));
            d.theta.push(th);
            d.mu.push(tr.mu);
            d.eta.push(tr.eta);
            d.kappa.push(tr.kappa);
        }
        Ok(d)
    }

    /// Viscous stresses: cell normal components `(S₁₁, S₂₂)` and vertex shear `S₁₂`.
    pub(crate) fn stresses(&self, u: &[f64], d: &Derived) -> staggered::Stresses {
        let strain = staggered::normal_strains(&self.mesh, u);
        let s_n: Vec<[f64; 2]> = strain
            .iter()
            .enumerate()
            .map(|(c, e)| {
                let div = e[0] + e[1];
                let lam = d.eta[c] - 2.0 / 3.0 * d.mu[c];
                [2.0 * d.mu[c] * e[0] + lam * div, 2.0 * d.mu[c] * e[1] + lam * div]
            })
            .collect();
        let shear = self.stag.shear(u);
        let mu_v = self.stag.cell_to_vertex(&d.mu);
        let s12: Vec<f64> = shear.iter().zip(&mu_v).map(|(g, m)| m * g).collect();
        (s_n, s12, strain, shear)
    }

    /// Time derivatives of `(ρ, u, 𝓔)`.
    fn rhs(&self, rho: &[f64], u: &[f64], energy: &[f64], d: &Derived) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mesh = &self.mesh;
        let (n, nf) = (mesh.n_cells(), mesh.n_faces());
        let e2 = self.eps * self.eps;
        let (s_n, s12, _, _) = self.stresses(u, d);
        let mut visc = vec![0.0; nf];
        staggered::normal_strain_transpose(mesh, &s_n, &mut visc);
        self.stag.shear_transpose(&s12, &mut visc);
        let k = self.kinetic(u);
        let omega = self.stag.vertex_to_face(&self.stag.vorticity(u));
        let ut = self.stag.cross_average(u);
        let s12_f = self.stag.vertex_to_face(&s12);

        let mut drho = vec![0.0; n];
        let mut den = vec![0.0; n];
        let mut du = vec![0.0; nf];
        for (f, face) in mesh.faces.iter().enumerate() {
            let (Some(a), Some(b)) = (face.minus, face.plus) else { continue };
            let rf = 0.5 * (rho[a] + rho[b]);
            let uf = u[f];
            let mass = face.length * rf * uf;
            drho[a] -= mass;
            drho[b] += mass;

            let snn = match face.axis {
                Axis::One => 0.5 * (s_n[a][0] + s_n[b][0]),
                Axis::Two => 0.5 * (s_n[a][1] + s_n[b][1]),
            };
            let kf = 0.5 * (d.kappa[a] + d.kappa[b]);
            let flux = face.length
                * ((0.5 * (energy[a] + energy[b] + d.p[a] + d.p[b])) * uf
                    - kf * (d.theta[b] - d.theta[a]) / face.dist
                    - e2 * (snn * uf + s12_f[f] * ut[f]));
            den[a] -= flux;
            den[b] += flux;

            let rot = match face.axis {
                Axis::One => omega[f] * ut[f],
                Axis::Two => -omega[f] * ut[f],
            };
            du[f] = -(k[b] - k[a]) / face.dist + rot - (d.p[b] - d.p[a]) / (face.dist * rf * e2)
                + self.balance[f]
                + visc[f] / (rf * self.weight[f]);
        }
        for c in 0..n {
            drho[c] /= self.area[c];
            den[c] /= self.area[c];
        }
        (drho, du, den)
    }

    /// The three stable time-step bounds at a state.
    pub fn cfl_dt(&self, s: &NsfState) -> Result<CflBounds> {
        let comps = staggered::cell_components(&self.mesh, &s.u);
        let (mut ac, mut vi, mut th) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for c in 0..s.rho.len() {
            let (r, t) = (s.rho[c], s.theta[c]);
            if !(r > 0.0 && t > 0.0 && r.is_finite() && t.is_finite()) {
                return Err(Error::Step { t: s.t, reason: format!("invalid state at cell {c}") });
            }
            let d = self.params.derivs(r, t)?;
            let cs = crate::constitutive::sound_speed_sq_from(&d, r, t).sqrt();
            let speed = comps[c][0].hypot(comps[c][1]);
            let h = self.h_cell[c];
            ac = ac.min(self.cfg.cfl_acoustic * h / (speed + cs / self.eps));
            let tr = self.params.transport(t)?;
            let mu_eff = 4.0 / 3.0 * tr.mu + tr.eta;
            vi = vi.min(self.cfg.cfl_diffusive * h * h * r / (4.0 * mu_eff));
            th = th.min(self.cfg.cfl_diffusive * h * h * r * d.de_dtheta / (4.0 * tr.kappa));
        }
        Ok(CflBounds { acoustic: ac, viscous: vi, thermal: th })
    }

    /// One SSP-RK3 step of size `dt`.
    pub fn step(&self, s: &NsfState, dt: f64) -> Result<NsfState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Step { t: s.t, reason: format!("invalid time step {dt}") });
        }
        let stage = |base: &NsfState, from: &NsfState, wb: f64, t: f64| -> Result<NsfState> {
            let d = self.derive(t, &from.rho, &from.u, &from.energy, &from.theta)?;
            let (dr, du, de) = self.rhs(&from.rho, &from.u, &from.energy, &d);
            let wf = 1.0 - wb;
            let comb = |b: &[f64], f: &[f64], df: &[f64]| -> Vec<f64> {
                b.iter().zip(f).zip(df).map(|((b, f), d)| wb * b + wf * (f + dt * d)).collect()
            };
            let mut u = comb(&base.u, &from.u, &du);
            for (x, &i) in u.iter_mut().zip(&self.interior) {
                if !i {
                    *x = 0.0;
                }
            }
            let rho = comb(&base.rho, &from.rho, &dr);
            let energy = comb(&base.energy, &from.energy, &de);
            if rho.iter().chain(&energy).chain(&u).any(|x| !x.is_finite()) {
                return Err(Error::Step { t, reason: "non-finite value".into() });
            }
            Ok(NsfState { t, rho, u, energy, theta: d.theta })
        };
        let s1 = stage(s, s, 0.0, s.t)?;
        let s2 = stage(s, &s1, 0.75, s.t + dt)?;
        let mut s3 = stage(s, &s2, 1.0 / 3.0, s.t + 0.5 * dt)?;
        let d = self.derive(s.t + dt, &s3.rho, &s3.u, &s3.energy, &s3.theta)?;
        s3.theta = d.theta;
        s3.t = s.t + dt;
        Ok(s3)
    }

    /// Attempts a step of `dt`, halving on failure up to `max_halvings`
    /// times. Returns the new state and the step actually taken.
    pub fn advance(&self, s: &NsfState, dt: f64) -> Result<(NsfState, f64)> {
        let mut dt = dt;
        let mut last = None;
        for _ in 0..=self.cfg.max_halvings {
            match self.step(s, dt) {
                Ok(n) => return Ok((n, dt)),
                Err(e @ Error::Step { .. }) => {
                    last = Some(e);
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or_else(|| Error::Step { t: s.t, reason: "no step attempted".into() }))
    }

    /// `∫ρ`.
    pub fn mass(&self, s: &NsfState) -> f64 {
        s.rho.iter().zip(&self.area).map(|(r, a)| r * a).sum()
    }

    /// `∫(½ρ|u|² + ε⁻²ρe − ε⁻¹ρF) = ε⁻² ∫𝓔`.
    pub fn total_energy(&self, s: &NsfState) -> f64 {
        s.energy.iter().zip(&self.area).map(|(e, a)| e * a).sum::<f64>() / (self.eps * self.eps)
    }

    /// `½ Σ_f w_f ρ_f u_f²`, the kinetic energy the momentum update dissipates.
    pub fn kinetic_energy(&self, s: &NsfState) -> f64 {
        let rf = staggered::cell_to_face(&self.mesh, &s.rho);
        s.u.iter().zip(&rf).zip(&self.weight).map(|((u, r), w)| 0.5 * w * r * u * u).sum()
    }

    pub fn areas(&self) -> &[f64] {
        &self.area
    }

    /// Cell temperatures, pressure and transport at a state.
    pub(crate) fn derived(&self, s: &NsfState) -> Result<Derived> {
        self.derive(s.t, &s.rho, &s.u, &s.energy, &s.theta)
    }

    /// Face momentum forces of the scheme: the convective part
    /// `−div(ρu⊗u)` and the viscous part `div 𝕊`.
    pub(crate) fn momentum_terms(&self, s: &NsfState) -> Result<(Vec<f64>, Vec<f64>)> {
        let mesh = &self.mesh;
        let d = self.derived(s)?;
        let (s_n, s12, _, _) = self.stresses(&s.u, &d);
        let mut visc = vec![0.0; mesh.n_faces()];
        staggered::normal_strain_transpose(mesh, &s_n, &mut visc);
        self.stag.shear_transpose(&s12, &mut visc);
        let k = self.kinetic(&s.u);
        let omega = self.stag.vertex_to_face(&self.stag.vorticity(&s.u));
        let ut = self.stag.cross_average(&s.u);
        let mut drho = vec![0.0; mesh.n_cells()];
        for (f, face) in mesh.faces.iter().enumerate() {
            let (Some(a), Some(b)) = (face.minus, face.plus) else { continue };
            let mass = face.length * 0.5 * (s.rho[a] + s.rho[b]) * s.u[f];
            drho[a] -= mass / self.area[a];
            drho[b] += mass / self.area[b];
        }
        let mut conv = vec![0.0; mesh.n_faces()];
        for (f, face) in mesh.faces.iter().enumerate() {
            let (Some(a), Some(b)) = (face.minus, face.plus) else {
                visc[f] = 0.0;
                continue;
            };
            let rf = 0.5 * (s.rho[a] + s.rho[b]);
            let rot = match face.axis {
                Axis::One => omega[f] * ut[f],
                Axis::Two => -omega[f] * ut[f],
            };
            conv[f] = rf * (rot - (k[b] - k[a]) / face.dist) + 0.5 * s.u[f] * (drho[a] + drho[b]);
            visc[f] /= self.weight[f];
        }
        Ok((conv, visc))
    }

    pub fn max_boundary_normal_velocity(&self, s: &NsfState) -> f64 {
        s.u.iter().zip(&self.interior).filter(|(_, &i)| !i).map(|(u, _)| u.abs()).fold(0.0, f64::max)
    }

    /// Runs to `t_end`, recording `n_samples + 1` equally spaced samples
    /// (including the initial state) and accumulating entropy production.
    pub fn run(&self, init: NsfState, t_end: f64, n_samples: usize) -> Result<Trajectory> {
        monitors::run(self, init, t_end, n_samples)
    }
}
