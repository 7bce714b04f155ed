//! The ε-sweep pipeline: geometry checks, equilibrium, one compressible run
//! per ε, one limit run, metrics and the acoustic decay sweep.

use rayon::prelude::*;
use serde::Serialize;

use limitlab_core::acoustics::{decay_rate_sweep, DecayCase, DecaySweep, TestBump};
use limitlab_core::constitutive::EssResWindow;
use limitlab_core::equilibrium::{make_initial_data, static_state};
use limitlab_core::fields::mean;
use limitlab_core::geometry::{
    boundary_graph_report, build_domain, check_ball_condition, check_cone_condition, BallReport, BoundaryGraphReport,
    ConeReport,
};
use limitlab_core::nsf::{uniform_bound_monitor, BoundsReport, NsfSolver};
use limitlab_core::oberbeck::{ob_init, ob_run, ObCoeffs, ObSolver};
use limitlab_core::spectral::{assemble, eigendecompose, DecompOptions};
use limitlab_core::staggered;
use limitlab_core::{Error, Result};

use crate::config::{DecayConfig, SweepConfig};
use crate::metrics::{convergence_metrics, CompressibleSeries, KGrid, LimitSeries, MetricRecord, Reference};

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryEntry {
    pub eps: f64,
    pub n_cells: usize,
    pub outer_radius: f64,
    pub ball: BallReport,
    pub cone: ConeReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryReport {
    pub entries: Vec<GeometryEntry>,
    pub family: BoundaryGraphReport,
}

impl GeometryReport {
    pub fn passes(&self) -> bool {
        self.entries.iter().all(|e| e.ball.passes && e.cone.passes)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsResult {
    pub metrics: MetricRecord,
    pub bounds: BoundsReport,
    pub steps: usize,
    pub n_cells: usize,
    pub max_boundary_normal_velocity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsOutcome {
    pub eps: f64,
    pub result: std::result::Result<EpsResult, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitRunInfo {
    pub n_cells: usize,
    pub steps: usize,
    pub max_divergence: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub outcomes: Vec<EpsOutcome>,
    pub limit: std::result::Result<LimitRunInfo, String>,
    pub decay: Option<std::result::Result<DecaySweep, String>>,
    pub geometry: std::result::Result<GeometryReport, String>,
}

impl SweepReport {
    pub fn is_partial(&self) -> bool {
        self.outcomes.iter().any(|o| o.result.is_err()) || self.limit.is_err()
    }

    pub fn metrics(&self) -> Vec<&MetricRecord> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok()).map(|r| &r.metrics).collect()
    }
}

/// Thread pool sized by `LIMITLAB_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("LIMITLAB_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Error::Params(format!("LIMITLAB_THREADS=`{v}` is not a count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Params(e.to_string()))
}

pub fn geometry_report(cfg: &SweepConfig) -> Result<GeometryReport> {
    let g = &cfg.geometry;
    let specs: Vec<_> = cfg.eps_list.iter().map(|&e| cfg.domain.spec(e)).collect();
    let entries = specs
        .par_iter()
        .map(|spec| {
            let mesh = build_domain(spec)?;
            let curve = spec.curve();
            Ok(GeometryEntry {
                eps: spec.eps,
                n_cells: mesh.n_cells(),
                outer_radius: spec.outer_radius(),
                ball: check_ball_condition(&curve, spec.eps, spec.beta, g.c_b, g.samples)?,
                cone: check_cone_condition(&curve, g.cone_gamma, g.cone_alpha, 4.0 * g.cone_alpha)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeometryReport { entries, family: boundary_graph_report(&specs)? })
}

struct LimitRun {
    series: LimitSeries,
    info: LimitRunInfo,
}

fn limit_run(cfg: &SweepConfig, k: &KGrid) -> Result<LimitRun> {
    let eps_min = *cfg.eps_list.last().expect("validated eps_list");
    let mesh = build_domain(&cfg.domain.limit_spec(eps_min))?;
    let mut solver = ObSolver::new(&mesh, ObCoeffs::from_params(&cfg.thermo)?, &cfg.force, cfg.limit.wall)?;
    solver.cfl = cfg.limit.cfl;
    let u0 = staggered::sample_faces(&mesh, cfg.perturbation.u0.sampler());
    let th = cfg.perturbation.theta1.sampler();
    let mut theta0: Vec<f64> = mesh.cells.iter().map(|c| th(c.center)).collect();
    let m = mean(&theta0, &mesh.areas());
    theta0.iter_mut().for_each(|x| *x -= m);
    let s0 = ob_init(&solver, &u0, &theta0)?;
    let traj = ob_run(&solver, s0, cfg.t_end, cfg.n_samples)?;
    let series = LimitSeries::from_trajectory(&mesh, &traj, k)?;
    let info = LimitRunInfo { n_cells: mesh.n_cells(), steps: traj.steps, max_divergence: traj.max_divergence };
    Ok(LimitRun { series, info })
}

/// Compressible run at one ε, resampled on `K`.
fn compressible_run(cfg: &SweepConfig, eps: f64, k: &KGrid) -> Result<(CompressibleSeries, BoundsReport, usize, usize, f64)> {
    let mesh = build_domain(&cfg.domain.spec(eps))?;
    let st = static_state(&cfg.force, eps, &cfg.thermo, &mesh)?;
    let init = make_initial_data(&st, &cfg.perturbation, &mesh)?;
    let solver = NsfSolver::new(&mesh, &cfg.thermo, eps, &cfg.force, &st, &cfg.flux)?;
    let traj = solver.run(solver.state_from_initial(&init)?, cfg.t_end, cfg.n_samples)?;
    let bounds = uniform_bound_monitor(&solver, &traj, &EssResWindow::from_params(&cfg.thermo))?;
    let series = CompressibleSeries::from_trajectory(&solver, &traj, k)?;
    let wall = solver.max_boundary_normal_velocity(traj.last());
    Ok((series, bounds, traj.steps, mesh.n_cells(), wall))
}

/// Smooth bump on `(lo, hi)` with unit peak.
pub fn band_cutoff(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |l| {
        if l <= lo || l >= hi {
            0.0
        } else {
            let x = (l - lo) / (hi - lo);
            (4.0 - 1.0 / (x * (1.0 - x))).exp()
        }
    }
}

/// Decay integral sweep over the decay ε ladder, with full decompositions
/// of each rough domain.
pub fn decay_sweep(cfg: &SweepConfig, d: &DecayConfig) -> Result<DecaySweep> {
    let fam = d.domain.unwrap_or(cfg.domain);
    let built = d
        .eps_list
        .par_iter()
        .map(|&eps| {
            let mesh = build_domain(&fam.spec(eps))?;
            let decomp = eigendecompose(&assemble(&mesh)?, &mesh, &DecompOptions::default())?;
            Ok((eps, mesh, decomp))
        })
        .collect::<Result<Vec<_>>>()?;
    let bump = TestBump { center: d.phi_center, radius: d.phi_radius };
    for (_, mesh, _) in &built {
        bump.sample(mesh)?;
    }
    let cases: Vec<DecayCase> = built.iter().map(|(eps, mesh, decomp)| DecayCase { eps: *eps, mesh, decomp }).collect();
    let psi = d.psi.sampler();
    let g = band_cutoff(d.band[0], d.band[1]);
    decay_rate_sweep(&cases, &*psi, &|x| bump.value(x), &g, d.omega, d.t_fraction)
}

/// Runs the whole pipeline. Failures of a single ε are recorded and the
/// remaining ε still run.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let k = KGrid::new(cfg.k)?;
    let lin = cfg.thermo.linearized_coeffs()?;
    let reference = Reference { rho_bar: cfg.thermo.rho_bar, theta_bar: cfg.thermo.theta_bar, alpha: lin.alpha };
    let pool = thread_pool()?;
    let (geometry, ((limit, runs), decay)) = pool.install(|| {
        rayon::join(
            || geometry_report(cfg),
            || {
                rayon::join(
                    || {
                        rayon::join(
                            || limit_run(cfg, &k),
                            || cfg.eps_list.par_iter().map(|&eps| compressible_run(cfg, eps, &k)).collect::<Vec<_>>(),
                        )
                    },
                    || cfg.decay.as_ref().map(|d| decay_sweep(cfg, d)),
                )
            },
        )
    });
    let outcomes = cfg
        .eps_list
        .iter()
        .zip(runs)
        .map(|(&eps, run)| {
            let result = run.and_then(|(series, bounds, steps, n_cells, wall)| {
                let lim = limit.as_ref().map_err(|e| Error::Input(format!("limit run failed: {e}")))?;
                Ok(EpsResult {
                    metrics: convergence_metrics(&series, &lim.series, eps, reference, &k)?,
                    bounds,
                    steps,
                    n_cells,
                    max_boundary_normal_velocity: wall,
                })
            });
            EpsOutcome { eps, result: result.map_err(|e| e.to_string()) }
        })
        .collect();
    Ok(SweepReport {
        provenance: Provenance {
            schema: cfg.schema.clone(),
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").into(),
        },
        outcomes,
        limit: limit.map(|l| l.info).map_err(|e| e.to_string()),
        decay: decay.map(|r| r.map_err(|e| e.to_string())),
        geometry: geometry.map_err(|e| e.to_string()),
    })
}
