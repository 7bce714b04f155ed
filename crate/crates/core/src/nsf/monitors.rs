//! Time integration driver, entropy production, the total dissipation
//! balance and the uniform-bound monitors.

use serde::Serialize;

use super::{NsfSolver, NsfState};
use crate::constitutive::EssResWindow;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Sample {
    pub state: NsfState,
    /// `∫₀ᵗ ∫ σ` up to the sample time.
    pub sigma_integral: f64,
    /// Cellwise lift `∫₀ᵗ σ`.
    pub sigma_lift: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Smallest cellwise dissipation density met along the run.
    pub sigma_min: f64,
}

impl Trajectory {
    pub fn last(&self) -> &NsfState {
        &self.samples.last().expect("trajectory has samples").state
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }
}

/// Cellwise dissipation density `(1/θ)(ε² S:∇u + κ|∇θ|²/θ)`.
pub(crate) fn dissipation(solver: &NsfSolver, s: &NsfState) -> Result<Vec<f64>> {
    let mesh = &solver.mesh;
    let d = solver.derived(s)?;
    let (s_n, s12, strain, shear) = solver.stresses(&s.u, &d);
    let e2 = solver.eps * solver.eps;
    let area = solver.areas();
    let mut visc: Vec<f64> = (0..mesh.n_cells())
        .map(|c| s_n[c][0] * strain[c][0] + s_n[c][1] * strain[c][1])
        .collect();
    for (v, vert) in solver.stag.vertices.iter().enumerate() {
        let cells: Vec<usize> = vert.cells.iter().flatten().copied().collect();
        let share = vert.weight * s12[v] * shear[v] / cells.len() as f64;
        for c in cells {
            visc[c] += share / area[c];
        }
    }
    let mut sigma: Vec<f64> = visc.iter().zip(&d.theta).map(|(v, t)| e2 * v / t).collect();
    for face in &mesh.faces {
        let (Some(a), Some(b)) = (face.minus, face.plus) else { continue };
        let g = (d.theta[b] - d.theta[a]) / face.dist;
        let kf = 0.5 * (d.kappa[a] + d.kappa[b]);
        let tf = 0.5 * (d.theta[a] + d.theta[b]);
        let q = 0.5 * face.weight() * kf * g * g / (tf * tf);
        sigma[a] += q / area[a];
        sigma[b] += q / area[b];
    }
    Ok(sigma)
}

fn integral(f: &[f64], area: &[f64]) -> f64 {
    f.iter().zip(area).map(|(x, a)| x * a).sum()
}

pub(super) fn run(solver: &NsfSolver, init: NsfState, t_end: f64, n_samples: usize) -> Result<Trajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) || n_samples == 0 {
        return Err(Error::Params("run needs t_end >= 0 and at least one sample".into()));
    }
    let t0 = init.t;
    let area = solver.areas().to_vec();
    let mut sig_prev = dissipation(solver, &init)?;
    let mut sigma_min = sig_prev.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut traj = Trajectory {
        samples: vec![Sample { state: init.clone(), sigma_integral: 0.0, sigma_lift: vec![0.0; area.len()] }],
        steps: 0,
        dt_min: f64::INFINITY,
        dt_max: 0.0,
        sigma_min,
    };
    let mut s = init;
    let mut acc = 0.0;
    let mut lift = vec![0.0; area.len()];
    for k in 1..=n_samples {
        let target = t0 + t_end * k as f64 / n_samples as f64;
        let tol = 1e-12 * t_end.max(1.0);
        while target - s.t > tol {
            let dt = solver.cfl_dt(&s)?.dt().min(target - s.t);
            let (next, taken) = solver.advance(&s, dt)?;
            let sig = dissipation(solver, &next)?;
            acc += 0.5 * taken * (integral(&sig_prev, &area) + integral(&sig, &area));
            for ((l, a), b) in lift.iter_mut().zip(&sig_prev).zip(&sig) {
                *l += 0.5 * taken * (a + b);
            }
            sigma_min = sig.iter().cloned().fold(sigma_min, f64::min);
            sig_prev = sig;
            traj.steps += 1;
            traj.dt_min = traj.dt_min.min(taken);
            traj.dt_max = traj.dt_max.max(taken);
            s = next;
        }
        s.t = target;
        traj.samples.push(Sample { state: s.clone(), sigma_integral: acc, sigma_lift: lift.clone() });
    }
    traj.sigma_min = sigma_min;
    Ok(traj)
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    /// Dissipation density per cell at the later state.
    pub sigma: Vec<f64>,
    pub total: f64,
    pub min: f64,
    /// `(∫ρs(after) − ∫ρs(before))/dt − ½(Σσ(before) + Σσ(after))`.
    pub balance_residual: f64,
}

pub fn entropy_production(solver: &NsfSolver, before: &NsfState, after: &NsfState, dt: f64) -> Result<EntropyReport> {
    let area = solver.areas();
    let s0 = dissipation(solver, before)?;
    let sigma = dissipation(solver, after)?;
    let entropy = |s: &NsfState| -> Result<f64> {
        let mut tot = 0.0;
        for c in 0..s.rho.len() {
            tot += area[c] * s.rho[c] * solver.params.entropy(s.rho[c], s.theta[c])?;
        }
        Ok(tot)
    };
    let total = integral(&sigma, area);
    let balance_residual = (entropy(after)? - entropy(before)?) / dt - 0.5 * (integral(&s0, area) + total);
    let min = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(EntropyReport { sigma, total, min, balance_residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct BalanceReport {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: f64,
    /// `|LHS(t) − RHS| / RHS`, or the absolute difference when `RHS = 0`.
    pub drift: Vec<f64>,
    pub max_drift: f64,
}

/// `∫½ρ|u|² + ε⁻²∫(relative ballistic energy) + ε⁻²θ̄ ∫₀ᵗ∫σ` along the run.
pub fn dissipation_balance(solver: &NsfSolver, traj: &Trajectory) -> Result<BalanceReport> {
    let area = solver.areas();
    let e2 = solver.eps * solver.eps;
    let tb = solver.params.theta_bar;
    let mut lhs = Vec::with_capacity(traj.samples.len());
    for smp in &traj.samples {
        let s = &smp.state;
        let k = solver.kinetic(&s.u);
        let mut tot = 0.0;
        for c in 0..s.rho.len() {
            let h = solver.params.ballistic_free_energy(s.rho[c], s.theta[c], solver.rho_tilde[c])?;
            tot += area[c] * (s.rho[c] * k[c] + h / e2);
        }
        lhs.push(tot + tb * smp.sigma_integral / e2);
    }
    let rhs = lhs[0];
    let drift: Vec<f64> =
        lhs.iter().map(|l| if rhs != 0.0 { (l - rhs).abs() / rhs.abs() } else { (l - rhs).abs() }).collect();
    let max_drift = drift.iter().cloned().fold(0.0, f64::max);
    Ok(BalanceReport { times: traj.times(), lhs, rhs, drift, max_drift })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundMonitor {
    pub name: &'static str,
    pub raw: f64,
    /// Exponent `k` of the expected `εᵏ` scaling.
    pub power: i32,
    /// `raw / εᵏ`.
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub eps: f64,
    pub monitors: Vec<BoundMonitor>,
}

impl BoundsReport {
    pub fn get(&self, name: &str) -> Option<&BoundMonitor> {
        self.monitors.iter().find(|m| m.name == name)
    }
}

fn scalar_gradient_sq(solver: &NsfSolver, f: &[f64]) -> f64 {
    solver
        .mesh
        .faces
        .iter()
        .map(|face| match (face.minus, face.plus) {
            (Some(a), Some(b)) => face.weight() * ((f[b] - f[a]) / face.dist).powi(2),
            _ => 0.0,
        })
        .sum()
}

/// `‖u‖² + ‖∇u‖²` with `|∇u|² = e₁₁² + e₂₂² + ((2e₁₂)² + ω²)/2`.
fn velocity_w12_sq(solver: &NsfSolver, u: &[f64]) -> f64 {
    let mesh = &solver.mesh;
    let l2: f64 = mesh.faces.iter().zip(u).map(|(f, x)| f.weight() * x * x).sum();
    let strain = crate::staggered::normal_strains(mesh, u);
    let normal: f64 = strain.iter().zip(solver.areas()).map(|(e, a)| a * (e[0] * e[0] + e[1] * e[1])).sum();
    let shear = solver.stag.shear(u);
    let vort = solver.stag.vorticity(u);
    let rot: f64 = solver
        .stag
        .vertices
        .iter()
        .zip(shear.iter().zip(&vort))
        .map(|(v, (g, w))| 0.5 * v.weight * (g * g + w * w))
        .sum();
    l2 + normal + rot
}

/// Sup-in-time and time-integrated bounds of the scaled perturbations,
/// each divided by its expected power of ε.
pub fn uniform_bound_monitor(solver: &NsfSolver, traj: &Trajectory, window: &EssResWindow) -> Result<BoundsReport> {
    let eps = solver.eps;
    let area = solver.areas();
    let tb = solver.params.theta_bar;
    let n = solver.mesh.n_cells();
    let (mut kin, mut rho_ess, mut th_ess, mut res_e, mut res_pow, mut res_meas, mut rho_res) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut series = Vec::with_capacity(traj.samples.len());
    for smp in &traj.samples {
        let s = &smp.state;
        let k = solver.kinetic(&s.u);
        let (mut a_kin, mut a_re, mut a_te, mut a_res_e, mut a_pow, mut a_meas, mut a_rr) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for c in 0..n {
            let (r, t, w) = (s.rho[c], s.theta[c], area[c]);
            let chi = window.chi(r, t);
            let dr = (r - solver.rho_tilde[c]) / eps;
            let dt = (t - tb) / eps;
            a_kin += w * 2.0 * r * k[c];
            a_re += w * (chi * dr).powi(2);
            a_te += w * (chi * dt).powi(2);
            let d = solver.params.derivs(r, t)?;
            let res = 1.0 - chi;
            a_res_e += w * res * ((r * d.e).abs() + d.p.abs() + (r * d.s).abs());
            a_pow += w * ((res * r).powf(5.0 / 3.0) + (res * t).powi(4));
            if !window.in_ess(r, t) {
                a_meas += w;
            }
            a_rr += w * (res * dr).abs();
        }
        kin = kin.max(a_kin.sqrt());
        rho_ess = rho_ess.max(a_re.sqrt());
        th_ess = th_ess.max(a_te.sqrt());
        res_e = res_e.max(a_res_e);
        res_pow = res_pow.max(a_pow);
        res_meas = res_meas.max(a_meas);
        rho_res = rho_res.max(a_rr);
        let dth: Vec<f64> = s.theta.iter().map(|t| (t - tb) / eps).collect();
        let dlog: Vec<f64> = s.theta.iter().map(|t| (t.ln() - tb.ln()) / eps).collect();
        let w12 = |f: &[f64]| integral(&f.iter().map(|x| x * x).collect::<Vec<_>>(), area) + scalar_gradient_sq(solver, f);
        series.push((s.t, w12(&dth), w12(&dlog), velocity_w12_sq(solver, &s.u)));
    }
    let trap = |k: usize| -> f64 {
        series
            .windows(2)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                let (fa, fb) = match k {
                    0 => (a.1, b.1),
                    1 => (a.2, b.2),
                    _ => (a.3, b.3),
                };
                0.5 * (b.0 - a.0) * (fa + fb)
            })
            .sum()
    };
    let sigma_total = traj.samples.last().map_or(0.0, |s| s.sigma_integral);
    let mk = |name, raw: f64, power: i32| BoundMonitor { name, raw, power, normalized: raw / eps.powi(power) };
    Ok(BoundsReport {
        eps,
        monitors: vec![
            mk("kinetic_l2", kin, 0),
            mk("rho_ess_l2", rho_ess, 0),
            mk("theta_ess_l2", th_ess, 0),
            mk("sigma_total", sigma_total, 2),
            mk("res_energy", res_e, 2),
            mk("res_powers", res_pow, 2),
            mk("res_measure", res_meas, 2),
            mk("rho_res_l1", rho_res, 1),
            mk("theta_w12", trap(0), 0),
            mk("log_theta_w12", trap(1), 0),
            mk("u_w12", trap(2), 0),
        ],
    })
}
