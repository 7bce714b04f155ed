//! Incompressible Oberbeck–Boussinesq limit system
//!
//! `ρ̄(∂ₜU + div(U⊗U)) + ∇P = μΔU + r∇F`, `div U = 0`,
//! `ρ̄c_p(∂ₜΘ + div(UΘ)) − div(κ∇Θ) − ρ̄θ̄α div(FU) = 0`, `r = −ρ̄αΘ`,
//!
//! with μ and κ frozen at θ̄, on the same staggered mesh as the compressible
//! solver.

use serde::Serialize;

use crate::constitutive::ThermoParams;
use crate::equilibrium::PotentialField;
use crate::error::{check_len, Error, Result};
use crate::fields::{inner, l2_norm};
use crate::geometry::{Axis, Mesh};
use crate::spectral::Projector;
use crate::staggered::{self, face_inner, Staggered, WallMode};

/// Constant coefficients of the limit system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObCoeffs {
    pub rho_bar: f64,
    pub theta_bar: f64,
    pub alpha: f64,
    pub c_p: f64,
    pub mu: f64,
    pub kappa: f64,
}

impl ObCoeffs {
    pub fn from_params(params: &ThermoParams) -> Result<Self> {
        let lin = params.linearized_coeffs()?;
        let tr = params.transport(params.theta_bar)?;
        Ok(ObCoeffs {
            rho_bar: params.rho_bar,
            theta_bar: params.theta_bar,
            alpha: lin.alpha,
            c_p: lin.c_p,
            mu: tr.mu,
            kappa: tr.kappa,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObState {
    pub t: f64,
    /// Face-normal velocity.
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ObSolver {
    pub mesh: Mesh,
    pub coeffs: ObCoeffs,
    pub force: PotentialField,
    pub stag: Staggered,
    pub projector: Projector,
    pub cfl: f64,
    area: Vec<f64>,
    weight: Vec<f64>,
    force_cell: Vec<f64>,
    h_min: f64,
}

/// Velocity rate with its pressure, and temperature rate.
struct Rates {
    du: Vec<f64>,
    p: Vec<f64>,
    dtheta: Vec<f64>,
}

impl ObSolver {
    pub fn new(mesh: &Mesh, coeffs: ObCoeffs, force: &PotentialField, wall: WallMode) -> Result<Self> {
        force.validate()?;
        let c = coeffs;
        if ![c.rho_bar, c.theta_bar, c.c_p].iter().all(|&x| x > 0.0 && x.is_finite())
            || !(c.mu >= 0.0 && c.kappa >= 0.0 && c.alpha.is_finite())
        {
            return Err(Error::Params(format!("invalid limit-system coefficients {c:?}")));
        }
        let g = &mesh.grid;
        let h_min = mesh.cells.iter().map(|k| g.dx1(k.i).min(k.h * g.d2)).fold(f64::INFINITY, f64::min);
        Ok(ObSolver {
            mesh: mesh.clone(),
            coeffs,
            force: force.clone(),
            stag: Staggered::new(mesh, wall),
            projector: Projector::new(mesh)?,
            cfl: 0.4,
            area: mesh.areas(),
            weight: mesh.face_weights(),
            force_cell: mesh.cells.iter().map(|k| force.value(k.center)).collect(),
            h_min,
        })
    }

    pub fn closure(&self, theta: &[f64]) -> Vec<f64> {
        let k = -self.coeffs.rho_bar * self.coeffs.alpha;
        theta.iter().map(|t| k * t).collect()
    }

    /// Cell normal stresses `2μe` and vertex shear stresses `μγ`.
    fn stresses(&self, u: &[f64]) -> staggered::Stresses {
        let mu = self.coeffs.mu;
        let strain = staggered::normal_strains(&self.mesh, u);
        let s_n = strain.iter().map(|e| [2.0 * mu * e[0], 2.0 * mu * e[1]]).collect();
        let shear = self.stag.shear(u);
        let s12 = shear.iter().map(|g| mu * g).collect();
        (s_n, s12, strain, shear)
    }

    /// `∫ 2μ|e(U)|²`, the rate at which the viscous operator removes kinetic energy.
    pub fn viscous_dissipation(&self, u: &[f64]) -> f64 {
        let (s_n, s12, strain, shear) = self.stresses(u);
        let cells: f64 = (0..s_n.len()).map(|c| self.area[c] * (s_n[c][0] * strain[c][0] + s_n[c][1] * strain[c][1])).sum();
        let verts: f64 = self.stag.vertices.iter().enumerate().map(|(v, vx)| vx.weight * s12[v] * shear[v]).sum();
        cells + verts
    }

    /// Unprojected momentum rate per unit mass.
    fn momentum_rate(&self, u: &[f64], theta: &[f64]) -> Vec<f64> {
        let mesh = &self.mesh;
        let c = &self.coeffs;
        let (s_n, s12, _, _) = self.stresses(u);
        let mut visc = vec![0.0; mesh.n_faces()];
        staggered::normal_strain_transpose(mesh, &s_n, &mut visc);
        self.stag.shear_transpose(&s12, &mut visc);
        let k = self.kinetic(u);
        let omega = self.stag.vertex_to_face(&self.stag.vorticity(u));
        let ut = self.stag.cross_average(u);
        let r = self.closure(theta);
        let mut du = vec![0.0; mesh.n_faces()];
        for (f, face) in mesh.faces.iter().enumerate() {
            let (Some(a), Some(b)) = (face.minus, face.plus) else { continue };
            let rot = match face.axis {
                Axis::One => omega[f] * ut[f],
                Axis::Two => -omega[f] * ut[f],
            };
            let buoy = 0.5 * (r[a] + r[b]) * (self.force_cell[b] - self.force_cell[a]) / face.dist;
            du[f] = rot - (k[b] - k[a]) / face.dist + (visc[f] / self.weight[f] + buoy) / c.rho_bar;
        }
        du
    }

    fn kinetic(&self, u: &[f64]) -> Vec<f64> {
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

    fn temperature_rate(&self, u: &[f64], theta: &[f64]) -> Vec<f64> {
        let c = &self.coeffs;
        let diff = c.kappa / (c.rho_bar * c.c_p);
        let src = c.theta_bar * c.alpha / c.c_p;
        let mut out = vec![0.0; theta.len()];
        for (f, face) in self.mesh.faces.iter().enumerate() {
            let (Some(a), Some(b)) = (face.minus, face.plus) else { continue };
            let tf = 0.5 * (theta[a] + theta[b]);
            let ff = 0.5 * (self.force_cell[a] + self.force_cell[b]);
            let flux = face.length * ((tf - src * ff) * u[f] - diff * (theta[b] - theta[a]) / face.dist);
            out[a] -= flux;
            out[b] += flux;
        }
        out.iter_mut().zip(&self.area).for_each(|(o, a)| *o /= a);
        out
    }

    fn rates(&self, u: &[f64], theta: &[f64]) -> Result<Rates> {
        let raw = self.momentum_rate(u, theta);
        let split = self.projector.project(&self.mesh, &raw)?;
        let p = split.potential.iter().map(|x| self.coeffs.rho_bar * x).collect();
        Ok(Rates { du: split.solenoidal, p, dtheta: self.temperature_rate(u, theta) })
    }

    /// Largest stable step at a velocity.
    pub fn cfl_dt(&self, u: &[f64]) -> f64 {
        let c = &self.coeffs;
        let umax = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let nu = (c.mu / c.rho_bar).max(c.kappa / (c.rho_bar * c.c_p));
        let h = self.h_min;
        let adv = if umax > 0.0 { self.cfl * h / umax } else { f64::INFINITY };
        let dif = if nu > 0.0 { self.cfl * h * h / (4.0 * nu) } else { f64::INFINITY };
        adv.min(dif)
    }

    /// Discrete divergence of a face field, largest magnitude.
    pub fn max_divergence(&self, u: &[f64]) -> f64 {
        staggered::div(&self.mesh, u).iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Initial state: the Helmholtz projection of `u0_raw`, `Θ₀`, and the closure.
pub fn ob_init(solver: &ObSolver, u0_raw: &[f64], theta0: &[f64]) -> Result<ObState> {
    check_len(solver.mesh.n_faces(), u0_raw.len())?;
    check_len(solver.mesh.n_cells(), theta0.len())?;
    let mut u = solver.projector.project(&solver.mesh, u0_raw)?.solenoidal;
    for (x, f) in u.iter_mut().zip(&solver.mesh.faces) {
        if f.is_boundary() {
            *x = 0.0;
        }
    }
    let rates = solver.rates(&u, theta0)?;
    Ok(ObState { t: 0.0, u, theta: theta0.to_vec(), p: rates.p, r: solver.closure(theta0) })
}

/// One SSP-RK3 step. Every stage rate is projected onto solenoidal fields,
/// so every stage stays divergence free; `P` is the Lagrange multiplier of
/// the first stage.
pub fn ob_step(solver: &ObSolver, s: &ObState, dt: f64) -> Result<ObState> {
    let bound = solver.cfl_dt(&s.u);
    if !(dt > 0.0 && dt.is_finite()) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::Step { t: s.t, reason: format!("step {dt} exceeds the stable bound {bound}") });
    }
    let axpy = |x: &[f64], y: &[f64], a: f64, b: f64, r: &[f64]| -> Vec<f64> {
        (0..x.len()).map(|i| a * x[i] + b * (y[i] + dt * r[i])).collect()
    };
    let r0 = solver.rates(&s.u, &s.theta)?;
    let u1 = axpy(&s.u, &s.u, 0.0, 1.0, &r0.du);
    let t1 = axpy(&s.theta, &s.theta, 0.0, 1.0, &r0.dtheta);
    let r1 = solver.rates(&u1, &t1)?;
    let u2 = axpy(&s.u, &u1, 0.75, 0.25, &r1.du);
    let t2 = axpy(&s.theta, &t1, 0.75, 0.25, &r1.dtheta);
    let r2 = solver.rates(&u2, &t2)?;
    let u = axpy(&s.u, &u2, 1.0 / 3.0, 2.0 / 3.0, &r2.du);
    let theta = axpy(&s.theta, &t2, 1.0 / 3.0, 2.0 / 3.0, &r2.dtheta);
    if u.iter().chain(&theta).any(|x| !x.is_finite()) {
        return Err(Error::Step { t: s.t, reason: "non-finite limit-system state".into() });
    }
    let r = solver.closure(&theta);
    Ok(ObState { t: s.t + dt, u, theta, p: r0.p, r })
}

#[derive(Clone, Debug)]
pub struct ObTrajectory {
    pub samples: Vec<ObState>,
    pub steps: usize,
    /// Largest post-step divergence met.
    pub max_divergence: f64,
}

/// Runs to `t_end` recording `n_samples + 1` equally spaced samples.
pub fn ob_run(solver: &ObSolver, init: ObState, t_end: f64, n_samples: usize) -> Result<ObTrajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) || n_samples == 0 {
        return Err(Error::Params("run needs t_end >= 0 and at least one sample".into()));
    }
    let t0 = init.t;
    let mut traj = ObTrajectory { samples: vec![init.clone()], steps: 0, max_divergence: solver.max_divergence(&init.u) };
    let mut s = init;
    for k in 1..=n_samples {
        let target = t0 + t_end * k as f64 / n_samples as f64;
        while target - s.t > 1e-12 * t_end.max(1.0) {
            let dt = solver.cfl_dt(&s.u).min(target - s.t);
            s = ob_step(solver, &s, dt)?;
            traj.steps += 1;
            traj.max_divergence = traj.max_divergence.max(solver.max_divergence(&s.u));
        }
        s.t = target;
        traj.samples.push(s.clone());
    }
    Ok(traj)
}

#[derive(Clone, Debug, Serialize)]
pub struct ObEnergyReport {
    pub times: Vec<f64>,
    pub u_l2: Vec<f64>,
    /// `(∫2|e(U)|²)^{1/2}`, equal to `‖∇U‖` for solenoidal fields with
    /// periodic or no-slip walls.
    pub grad_u_l2: Vec<f64>,
    pub theta_l2: Vec<f64>,
    pub grad_theta_l2: Vec<f64>,
    pub kinetic: Vec<f64>,
    /// `∫ r∇F·U`.
    pub work: Vec<f64>,
    /// Per interval: `ΔE/Δt + μ‖∇U‖² − ∫r∇F·U` with trapezoid averages.
    pub inequality_residual: Vec<f64>,
    pub max_violation: f64,
}

pub fn ob_energy_report(solver: &ObSolver, traj: &ObTrajectory) -> Result<ObEnergyReport> {
    let mesh = &solver.mesh;
    let c = &solver.coeffs;
    let n = traj.samples.len();
    let mut rep = ObEnergyReport {
        times: Vec::with_capacity(n),
        u_l2: Vec::with_capacity(n),
        grad_u_l2: Vec::with_capacity(n),
        theta_l2: Vec::with_capacity(n),
        grad_theta_l2: Vec::with_capacity(n),
        kinetic: Vec::with_capacity(n),
        work: Vec::with_capacity(n),
        inequality_residual: Vec::new(),
        max_violation: 0.0,
    };
    let mut diss = Vec::with_capacity(n);
    for s in &traj.samples {
        let u2 = face_inner(mesh, &s.u, &s.u);
        let d = solver.viscous_dissipation(&s.u);
        let gt = staggered::grad(mesh, &s.theta);
        let rf = staggered::cell_to_face(mesh, &s.r);
        let gf = staggered::grad(mesh, &solver.force_cell);
        let buoy: Vec<f64> = rf.iter().zip(&gf).map(|(a, b)| a * b).collect();
        rep.times.push(s.t);
        rep.u_l2.push(u2.sqrt());
        rep.grad_u_l2.push(if c.mu > 0.0 { (d / c.mu).sqrt() } else { 0.0 });
        rep.theta_l2.push(l2_norm(&s.theta, &solver.area));
        rep.grad_theta_l2.push(face_inner(mesh, &gt, &gt).sqrt());
        rep.kinetic.push(0.5 * c.rho_bar * u2);
        rep.work.push(face_inner(mesh, &buoy, &s.u));
        diss.push(d);
    }
    for k in 1..n {
        let dt = rep.times[k] - rep.times[k - 1];
        let de = (rep.kinetic[k] - rep.kinetic[k - 1]) / dt;
        let res = de + 0.5 * (diss[k] + diss[k - 1]) - 0.5 * (rep.work[k] + rep.work[k - 1]);
        rep.inequality_residual.push(res);
    }
    rep.max_violation = rep.inequality_residual.iter().cloned().fold(0.0, f64::max);
    Ok(rep)
}

/// `∫Θ`.
pub fn theta_integral(solver: &ObSolver, s: &ObState) -> f64 {
    inner(&s.theta, &vec![1.0; s.theta.len()], &solver.area)
}
