//! Convergence metrics on the common comparison grid over `K`.

use std::f64::consts::TAU;

use serde::Serialize;

use limitlab_core::geometry::{Coords, Mesh};
use limitlab_core::nsf::{NsfSolver, Trajectory};
use limitlab_core::oberbeck::ObTrajectory;
use limitlab_core::staggered;
use limitlab_core::{Error, Result};

use crate::config::KRegion;

/// Polar grid over `K` with a conservative piecewise-constant remap from
/// polar source meshes.
#[derive(Clone, Debug)]
pub struct KGrid {
    pub region: KRegion,
    pub r_edges: Vec<f64>,
    pub areas: Vec<f64>,
    pub centers: Vec<[f64; 2]>,
}

/// Overlap weights of one source mesh: `(target, source, area)`.
#[derive(Clone, Debug)]
pub struct Remap {
    entries: Vec<(usize, usize, f64)>,
    target_area: Vec<f64>,
    n_source: usize,
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Length of the intersection of two angular intervals on the circle.
fn angular_overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    [-TAU, 0.0, TAU].iter().map(|s| overlap(a, (b.0 + s, b.1 + s))).sum()
}

impl KGrid {
    pub fn new(region: KRegion) -> Result<Self> {
        let KRegion { r_inner, r_outer, n_r, n_theta } = region;
        if !(r_inner > 0.0 && r_outer > r_inner) || n_r == 0 || n_theta == 0 {
            return Err(Error::Params("K needs 0 < r_inner < r_outer and positive cell counts".into()));
        }
        let r_edges: Vec<f64> = (0..=n_r).map(|i| r_inner + (r_outer - r_inner) * i as f64 / n_r as f64).collect();
        let dphi = TAU / n_theta as f64;
        let mut areas = Vec::with_capacity(n_r * n_theta);
        let mut centers = Vec::with_capacity(n_r * n_theta);
        for j in 0..n_theta {
            for i in 0..n_r {
                let (r0, r1) = (r_edges[i], r_edges[i + 1]);
                areas.push(0.5 * (r1 * r1 - r0 * r0) * dphi);
                let (r, p) = (0.5 * (r0 + r1), (j as f64 + 0.5) * dphi);
                centers.push([r * p.cos(), r * p.sin()]);
            }
        }
        Ok(KGrid { region, r_edges, areas, centers })
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    fn cell_box(&self, k: usize) -> ((f64, f64), (f64, f64)) {
        let n_r = self.region.n_r;
        let (i, j) = (k % n_r, k / n_r);
        let dphi = TAU / self.region.n_theta as f64;
        ((self.r_edges[i], self.r_edges[i + 1]), (j as f64 * dphi, (j + 1) as f64 * dphi))
    }

    /// Overlaps of every `K` cell with the active cells of a polar mesh.
    /// Fails when part of `K` is not covered by the mesh.
    pub fn remap_from(&self, mesh: &Mesh) -> Result<Remap> {
        let g = &mesh.grid;
        if g.coords != Coords::Polar {
            return Err(Error::Input("the comparison grid needs a polar mesh".into()));
        }
        let mut entries = Vec::new();
        let mut covered = vec![0.0; self.len()];
        for k in 0..self.len() {
            let (rk, pk) = self.cell_box(k);
            for (c, cell) in mesh.cells.iter().enumerate() {
                let rs = (g.e1[cell.i], g.e1[cell.i + 1]);
                let dr = overlap(rk, rs);
                if dr == 0.0 {
                    continue;
                }
                let dp = angular_overlap(pk, (g.edge2(cell.j), g.edge2(cell.j + 1)));
                if dp == 0.0 {
                    continue;
                }
                let (lo, hi) = (rk.0.max(rs.0), rk.1.min(rs.1));
                let a = 0.5 * (hi * hi - lo * lo) * dp;
                covered[k] += a;
                entries.push((k, c, a));
            }
        }
        if let Some(k) = (0..self.len()).find(|&k| covered[k] < self.areas[k] * (1.0 - 1e-9)) {
            return Err(Error::Input(format!(
                "K cell {k} at {:?} is only {:.3} covered by the mesh",
                self.centers[k],
                covered[k] / self.areas[k]
            )));
        }
        Ok(Remap { entries, target_area: self.areas.clone(), n_source: mesh.n_cells() })
    }
}

impl Remap {
    /// Area average of a cell field over every `K` cell.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        limitlab_core::error::check_len(self.n_source, f.len())?;
        let mut out = vec![0.0; self.target_area.len()];
        for &(k, c, a) in &self.entries {
            out[k] += a * f[c];
        }
        out.iter_mut().zip(&self.target_area).for_each(|(o, a)| *o /= a);
        Ok(out)
    }
}

/// Cell fields of a compressible run on `K`, one frame per sample time.
#[derive(Clone, Debug)]
pub struct CompressibleSeries {
    pub times: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub ux: Vec<Vec<f64>>,
    pub uy: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub div_u: Vec<Vec<f64>>,
    pub rho_tilde: Vec<f64>,
}

/// Cell fields of the limit run on `K`.
#[derive(Clone, Debug)]
pub struct LimitSeries {
    pub times: Vec<f64>,
    pub ux: Vec<Vec<f64>>,
    pub uy: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
}

struct Frames {
    rho: Vec<Vec<f64>>,
    ux: Vec<Vec<f64>>,
    uy: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    div_u: Vec<Vec<f64>>,
}

fn remap_frames<'a>(
    mesh: &Mesh,
    remap: &Remap,
    frames: impl Iterator<Item = (Option<&'a [f64]>, &'a [f64], &'a [f64])>,
) -> Result<Frames> {
    let mut out = Frames { rho: vec![], ux: vec![], uy: vec![], theta: vec![], div_u: vec![] };
    for (rho, u, theta) in frames {
        let v = staggered::cell_cartesian(mesh, u);
        let vx: Vec<f64> = v.iter().map(|w| w[0]).collect();
        let vy: Vec<f64> = v.iter().map(|w| w[1]).collect();
        if let Some(r) = rho {
            out.rho.push(remap.apply(r)?);
        }
        out.ux.push(remap.apply(&vx)?);
        out.uy.push(remap.apply(&vy)?);
        out.theta.push(remap.apply(theta)?);
        out.div_u.push(remap.apply(&staggered::div(mesh, u))?);
    }
    Ok(out)
}

impl CompressibleSeries {
    pub fn from_trajectory(solver: &NsfSolver, traj: &Trajectory, k: &KGrid) -> Result<Self> {
        let remap = k.remap_from(&solver.mesh)?;
        let f = remap_frames(
            &solver.mesh,
            &remap,
            traj.samples.iter().map(|s| (Some(&s.state.rho[..]), &s.state.u[..], &s.state.theta[..])),
        )?;
        Ok(CompressibleSeries {
            times: traj.times(),
            rho: f.rho,
            ux: f.ux,
            uy: f.uy,
            theta: f.theta,
            div_u: f.div_u,
            rho_tilde: remap.apply(&solver.rho_tilde)?,
        })
    }
}

impl LimitSeries {
    pub fn from_trajectory(mesh: &Mesh, traj: &ObTrajectory, k: &KGrid) -> Result<Self> {
        let remap = k.remap_from(mesh)?;
        let f = remap_frames(mesh, &remap, traj.samples.iter().map(|s| (None, &s.u[..], &s.theta[..])))?;
        Ok(LimitSeries { times: traj.samples.iter().map(|s| s.t).collect(), ux: f.ux, uy: f.uy, theta: f.theta })
    }
}

/// Reference state of the comparison.
#[derive(Clone, Copy, Debug)]
pub struct Reference {
    pub rho_bar: f64,
    pub theta_bar: f64,
    pub alpha: f64,
}

/// Smooth compactly supported vector test fields in `K`: four centers on the
/// mid circle, each with a radial and a tangential direction.
pub fn test_battery(region: &KRegion) -> Vec<TestField> {
    let rm = 0.5 * (region.r_inner + region.r_outer);
    let radius = 0.45 * (region.r_outer - region.r_inner);
    (0..8)
        .map(|m| {
            let p = TAU * (m / 2) as f64 / 4.0 + 0.3;
            let center = [rm * p.cos(), rm * p.sin()];
            let dir = if m % 2 == 0 { [p.cos(), p.sin()] } else { [-p.sin(), p.cos()] };
            TestField { center, radius, dir }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestField {
    pub center: [f64; 2],
    pub radius: f64,
    pub dir: [f64; 2],
}

impl TestField {
    pub fn value(&self, x: [f64; 2]) -> [f64; 2] {
        let q = ((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)) / (self.radius * self.radius);
        let b = if q < 1.0 { (1.0 - q).powi(3) } else { 0.0 };
        [b * self.dir[0], b * self.dir[1]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRecord {
    pub eps: f64,
    /// `sup_t ‖ρ − ρ̄‖_{L^{5/3}(K)}`.
    pub m1: f64,
    /// `‖u − U‖_{L²((0,T)×K)}`.
    pub m2: f64,
    /// `‖(θ − θ̄)/ε − Θ‖_{L²((0,T)×K)}`.
    pub m3: f64,
    /// `‖div u‖_{L²((0,T)×K)}`.
    pub m4: f64,
    /// `‖(ρ − ρ̃)/ε + ρ̄α(θ − θ̄)/ε‖_{L²((0,T)×K)}`.
    pub m5: f64,
    /// `(Σ_m ‖∫ρu·φ_m − ρ̄∫U·φ_m‖²_{L²(0,T)})^{1/2}` over the test battery.
    pub m6: f64,
    pub m6_per_field: Vec<f64>,
}

impl MetricRecord {
    pub const NAMES: [&'static str; 6] = ["M1", "M2", "M3", "M4", "M5", "M6"];

    pub fn values(&self) -> [f64; 6] {
        [self.m1, self.m2, self.m3, self.m4, self.m5, self.m6]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES.iter().position(|n| *n == name).map(|i| self.values()[i])
    }
}

/// Trapezoid rule over sample times.
fn time_integral(times: &[f64], v: &[f64]) -> f64 {
    times.windows(2).zip(v.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

fn weighted_sq(area: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    (0..area.len()).map(|c| area[c] * f(c).powi(2)).sum()
}

/// The metrics M1 to M6 of one ε against the limit run.
pub fn convergence_metrics(
    nsf: &CompressibleSeries,
    ob: &LimitSeries,
    eps: f64,
    reference: Reference,
    k: &KGrid,
) -> Result<MetricRecord> {
    let n = nsf.times.len();
    if n == 0 || ob.times.len() != n {
        return Err(Error::Input(format!("sample counts differ: {} vs {}", n, ob.times.len())));
    }
    if let Some(i) = (0..n).find(|&i| (nsf.times[i] - ob.times[i]).abs() > 1e-9 * nsf.times[n - 1].abs().max(1.0)) {
        return Err(Error::Input(format!("sample times differ at {i}: {} vs {}", nsf.times[i], ob.times[i])));
    }
    let a = &k.areas;
    let Reference { rho_bar, theta_bar, alpha } = reference;
    let battery = test_battery(&k.region);
    let phis: Vec<Vec<[f64; 2]>> = battery.iter().map(|t| k.centers.iter().map(|&x| t.value(x)).collect()).collect();
    let mut m1 = 0.0f64;
    let (mut s2, mut s3, mut s4, mut s5) = (vec![], vec![], vec![], vec![]);
    let mut s6 = vec![Vec::with_capacity(n); battery.len()];
    for i in 0..n {
        let (rho, th) = (&nsf.rho[i], &nsf.theta[i]);
        let lp: f64 = (0..a.len()).map(|c| a[c] * (rho[c] - rho_bar).abs().powf(5.0 / 3.0)).sum();
        m1 = m1.max(lp.powf(0.6));
        s2.push(weighted_sq(a, |c| (nsf.ux[i][c] - ob.ux[i][c]).hypot(nsf.uy[i][c] - ob.uy[i][c])));
        s3.push(weighted_sq(a, |c| (th[c] - theta_bar) / eps - ob.theta[i][c]));
        s4.push(weighted_sq(a, |c| nsf.div_u[i][c]));
        s5.push(weighted_sq(a, |c| (rho[c] - nsf.rho_tilde[c]) / eps + rho_bar * alpha * (th[c] - theta_bar) / eps));
        for (m, phi) in phis.iter().enumerate() {
            let d: f64 = (0..a.len())
                .map(|c| {
                    let pu = rho[c] * (nsf.ux[i][c] * phi[c][0] + nsf.uy[i][c] * phi[c][1]);
                    let pv = rho_bar * (ob.ux[i][c] * phi[c][0] + ob.uy[i][c] * phi[c][1]);
                    a[c] * (pu - pv)
                })
                .sum();
            s6[m].push(d * d);
        }
    }
    let t = &nsf.times;
    let norm = |s: &[f64]| if n == 1 { s[0].sqrt() } else { time_integral(t, s).sqrt() };
    let m6_per_field: Vec<f64> = s6.iter().map(|s| norm(s)).collect();
    Ok(MetricRecord {
        eps,
        m1,
        m2: norm(&s2),
        m3: norm(&s3),
        m4: norm(&s4),
        m5: norm(&s5),
        m6: m6_per_field.iter().map(|x| x * x).sum::<f64>().sqrt(),
        m6_per_field,
    })
}
