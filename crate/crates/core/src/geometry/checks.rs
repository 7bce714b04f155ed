use serde::Serialize;

use super::{DomainSpec, ObstacleCurve, ObstacleShape};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct ConeReport {
    pub gamma: f64,
    pub alpha_requested: f64,
    /// Smallest cone height admitted over all boundary samples.
    pub alpha_worst: f64,
    pub worst_point: [f64; 2],
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallReport {
    pub eps: f64,
    pub threshold: f64,
    /// Smallest of the interior and exterior tangent-ball radii.
    pub radius_min: f64,
    pub worst_point: [f64; 2],
    pub passes: bool,
    /// Where `c_b ε^β` overtakes the ball radius if it scales like `ε^{2β}`.
    pub crossover_eps: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphEntry {
    pub eps: f64,
    pub sup_deviation: f64,
    pub lipschitz: f64,
    /// Quantiles 0, 0.25, 0.5, 0.75, 1 of the sampled boundary slope.
    pub slope_quantiles: [f64; 5],
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryGraphReport {
    pub r_obs: f64,
    pub entries: Vec<GraphEntry>,
    /// Uniform bound of the slope across the family.
    pub lipschitz_uniform: f64,
    /// In two dimensions the tangent space of the boundary is a line, so the
    /// requirement of two independent slope directions cannot be met.
    pub dimension_degenerate: bool,
}

const CONE_SAMPLES: usize = 96;
const ORIENTATIONS: usize = 33;

fn cone_clear(shape: &dyn ObstacleShape, x: [f64; 2], xi: [f64; 2], gamma: f64, alpha: f64) -> bool {
    const RADII: [f64; 8] = [0.01, 0.04, 0.1, 0.25, 0.4, 0.6, 0.8, 1.0];
    const SPREAD: [f64; 7] = [-1.0, -2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    for &s in &SPREAD {
        let (sn, cs) = (s * gamma).sin_cos();
        let d = [cs * xi[0] - sn * xi[1], sn * xi[0] + cs * xi[1]];
        for &t in &RADII {
            let p = [x[0] + alpha * t * d[0], x[1] + alpha * t * d[1]];
            if shape.inside(p) {
                return false;
            }
        }
    }
    true
}

fn cone_admits(shape: &dyn ObstacleShape, t0: f64, gamma: f64, alpha: f64) -> bool {
    let (x0, n0) = shape.boundary_point(t0);
    // nearby points: boundary points within α of x0 and points along the normal
    let mut nearby = vec![x0];
    let fine = 4096;
    for dir in [-1.0, 1.0] {
        let mut arc = Vec::new();
        for k in 1..fine / 2 {
            let (p, _) = shape.boundary_point((t0 + dir * k as f64 / fine as f64).rem_euclid(1.0));
            if (p[0] - x0[0]).hypot(p[1] - x0[1]) > alpha {
                break;
            }
            arc.push(p);
        }
        // keep a few interior points and always the farthest one
        let stride = (arc.len() / 12).max(1);
        nearby.extend(arc.iter().step_by(stride).copied());
        nearby.extend(arc.last().copied());
    }
    for s in [0.25, 0.5, 0.75] {
        nearby.push([x0[0] + s * alpha * n0[0], x0[1] + s * alpha * n0[1]]);
    }
    (0..ORIENTATIONS).any(|k| {
        let tilt = std::f64::consts::PI * (k as f64 / (ORIENTATIONS - 1) as f64 - 0.5);
        let (sn, cs) = tilt.sin_cos();
        let xi = [cs * n0[0] - sn * n0[1], sn * n0[0] + cs * n0[1]];
        nearby.iter().all(|&x| cone_clear(shape, x, xi, gamma, alpha))
    })
}

/// Searches, for sampled boundary points, the tallest cone of aperture
/// `gamma` that fits into the fluid from every nearby point with a common axis.
pub fn check_cone_condition(
    shape: &dyn ObstacleShape,
    gamma: f64,
    alpha_requested: f64,
    alpha_max: f64,
) -> Result<ConeReport> {
    if !(gamma > 0.0 && gamma < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Params("cone aperture must lie in (0, π/2)".into()));
    }
    if !(alpha_requested > 0.0 && alpha_max >= alpha_requested) {
        return Err(Error::Params("cone heights must be positive and ordered".into()));
    }
    let mut worst = (f64::INFINITY, [0.0; 2]);
    for k in 0..CONE_SAMPLES {
        let t0 = k as f64 / CONE_SAMPLES as f64;
        let best = if cone_admits(shape, t0, gamma, alpha_max) {
            alpha_max
        } else {
            let (mut lo, mut hi) = (0.0, alpha_max);
            for _ in 0..24 {
                let mid = 0.5 * (lo + hi);
                if cone_admits(shape, t0, gamma, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if best < worst.0 {
            worst = (best, shape.boundary_point(t0).0);
        }
    }
    Ok(ConeReport {
        gamma,
        alpha_requested,
        alpha_worst: worst.0,
        worst_point: worst.1,
        passes: worst.0 >= alpha_requested,
    })
}

fn tangent_ball(curve: &ObstacleCurve, x0: [f64; 2], n: [f64; 2], outside: bool, r_max: f64) -> f64 {
    let sign = if outside { 1.0 } else { -1.0 };
    let fits = |r: f64| {
        let c = [x0[0] + sign * r * n[0], x0[1] + sign * r * n[1]];
        curve.inside(c) != outside && curve.distance(c, 4096) >= r * (1.0 - 1e-2)
    };
    if fits(r_max) {
        return r_max;
    }
    let (mut lo, mut hi) = (0.0, r_max);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Interior and exterior tangent balls at sampled boundary points against
/// the threshold `c_b ε^β`.
pub fn check_ball_condition(
    curve: &ObstacleCurve,
    eps: f64,
    beta: f64,
    c_b: f64,
    samples: usize,
) -> Result<BallReport> {
    if !(eps > 0.0 && beta > 0.0 && c_b > 0.0) || samples == 0 {
        return Err(Error::Params("ball check needs positive eps, beta, c_b and samples".into()));
    }
    let r_max = curve.r_obs;
    let mut worst = (f64::INFINITY, [0.0; 2]);
    for k in 0..samples {
        let (x0, n) = curve.boundary_point(k as f64 / samples as f64);
        let r = tangent_ball(curve, x0, n, true, r_max).min(tangent_ball(curve, x0, n, false, r_max));
        if r < worst.0 {
            worst = (r, x0);
        }
    }
    let threshold = c_b * eps.powf(beta);
    let crossover_eps = (curve.amp_eff > 0.0)
        .then(|| (c_b * eps.powf(2.0 * beta) / worst.0).powf(1.0 / beta));
    Ok(BallReport {
        eps,
        threshold,
        radius_min: worst.0,
        worst_point: worst.1,
        passes: worst.0 >= threshold,
        crossover_eps,
    })
}

fn quantiles(mut v: Vec<f64>) -> [f64; 5] {
    v.sort_by(f64::total_cmp);
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)]
}

/// Uniform convergence and slope statistics of the obstacle boundaries of a
/// family sharing one base circle.
pub fn boundary_graph_report(specs: &[DomainSpec]) -> Result<BoundaryGraphReport> {
    let first = specs.first().ok_or_else(|| Error::Input("empty domain family".into()))?;
    let r_obs = first.r_obs;
    if specs.iter().any(|s| s.r_obs != r_obs) {
        return Err(Error::Input("domains do not share a base profile".into()));
    }
    let n = 8192;
    let mut entries = Vec::with_capacity(specs.len());
    for s in specs {
        let c = s.curve();
        let mut sup: f64 = 0.0;
        let mut slopes = Vec::with_capacity(n);
        for k in 0..n {
            let phi = std::f64::consts::TAU * k as f64 / n as f64;
            sup = sup.max((c.radius(phi) - r_obs).abs());
            // slope of the boundary written as a graph over the base circle
            slopes.push(c.radius_slope(phi) / r_obs);
        }
        let lipschitz = slopes.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        entries.push(GraphEntry { eps: s.eps, sup_deviation: sup, lipschitz, slope_quantiles: quantiles(slopes) });
    }
    let lipschitz_uniform = entries.iter().map(|e| e.lipschitz).fold(0.0, f64::max);
    Ok(BoundaryGraphReport { r_obs, entries, lipschitz_uniform, dimension_degenerate: true })
}
