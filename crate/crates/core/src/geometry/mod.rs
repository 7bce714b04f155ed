//! Rough-obstacle domains and their meshes.
//!
//! A domain is the annular region between an oscillating obstacle curve
//! `r(φ) = r_obs(1 + A_ε sin(m_ε φ))` and an outer circle. Both the amplitude
//! `A_ε = amp·ε^{2β}` and the wavelength shrink like `ε^{2β}`, so the slope of
//! the curve stays bounded while the curve converges uniformly to the base
//! circle.

mod checks;
mod io;
mod mesh;

pub use checks::{
    boundary_graph_report, check_ball_condition, check_cone_condition, BallReport,
    BoundaryGraphReport, ConeReport, GraphEntry,
};
pub use io::{read_mesh, write_mesh};
pub use mesh::{Axis, CellInfo, Coords, Face, FaceTag, Grid, Mesh};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial/angular resolution of the boundary-fitted polar grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub n_theta: usize,
    /// Radial spacing in the uniform band around the obstacle.
    pub dr_fine: f64,
    /// Extra uniform band beyond the outermost obstacle excursion.
    pub fine_band: f64,
    /// Geometric growth of the radial spacing beyond the band.
    pub growth: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { n_theta: 96, dr_fine: 0.05, fine_band: 0.5, growth: 1.08 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub eps: f64,
    /// Outer radius is `ε^{−δ}` before capping.
    pub delta: f64,
    /// Rugosity exponent.
    pub beta: f64,
    pub r_obs: f64,
    pub amp: f64,
    pub freq: f64,
    pub cap_radius: Option<f64>,
    pub resolution: Resolution,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Params(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if !(self.delta > 1.0) {
            return Err(Error::Params(format!("delta must exceed 1, got {}", self.delta)));
        }
        if !(self.beta > 0.0 && self.beta < 0.25) {
            return Err(Error::Params(format!("beta must lie in (0,1/4), got {}", self.beta)));
        }
        if !(self.r_obs > 0.0) {
            return Err(Error::Params("r_obs must be positive".into()));
        }
        if !(self.amp >= 0.0 && self.freq > 0.0) {
            return Err(Error::Params("amp must be >= 0 and freq > 0".into()));
        }
        if let Some(c) = self.cap_radius {
            if !(c > 0.0) {
                return Err(Error::Params("cap_radius must be positive".into()));
            }
        }
        let r = &self.resolution;
        if r.n_theta < 4 || !(r.dr_fine > 0.0) || !(r.growth >= 1.0) || !(r.fine_band >= 0.0) {
            return Err(Error::Params("invalid resolution".into()));
        }
        let curve = self.curve();
        if curve.amp_eff >= 1.0 {
            return Err(Error::Geometry(format!(
                "obstacle amplitude {} reaches the origin; the curve self-intersects",
                curve.amp_eff
            )));
        }
        if curve.max_radius() >= self.outer_radius() {
            return Err(Error::Geometry(format!(
                "obstacle (max radius {}) not strictly inside the outer circle {}",
                curve.max_radius(),
                self.outer_radius()
            )));
        }
        Ok(())
    }

    /// `min(ε^{−δ}, cap_radius)`.
    pub fn outer_radius(&self) -> f64 {
        let r = self.eps.powf(-self.delta);
        match self.cap_radius {
            Some(c) => r.min(c),
            None => r,
        }
    }

    pub fn rugosity_scale(&self) -> f64 {
        self.eps.powf(2.0 * self.beta)
    }

    pub fn curve(&self) -> ObstacleCurve {
        let s = self.rugosity_scale();
        // closing the curve needs an integer number of bumps
        let m = if self.amp > 0.0 { (self.freq / s).round().max(1.0) as u32 } else { 0 };
        ObstacleCurve { r_obs: self.r_obs, amp_eff: self.amp * s, wavenumber: m }
    }

    /// The ε-independent limit obstacle (the base circle).
    pub fn base_curve(&self) -> ObstacleCurve {
        ObstacleCurve { r_obs: self.r_obs, amp_eff: 0.0, wavenumber: 0 }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let r = x[0].hypot(x[1]);
        !self.curve().inside(x) && r < self.outer_radius()
    }

    /// Radial edges shared by every member of a family with common
    /// `r_obs`, `amp` and resolution; only the outermost edge depends on ε.
    pub fn radial_edges(&self) -> Vec<f64> {
        radial_edges(self.r_obs, self.amp, &self.resolution, self.outer_radius())
    }
}

pub(crate) fn radial_edges(r_obs: f64, amp: f64, res: &Resolution, r_out: f64) -> Vec<f64> {
    let amp = amp.min(0.999);
    let mut edges = Vec::new();
    let dr = if amp > 0.0 {
        let below = (r_obs * amp / res.dr_fine).ceil().max(1.0);
        let dr = r_obs * amp / below;
        for k in 0..below as usize {
            edges.push(r_obs * (1.0 - amp) + k as f64 * dr);
        }
        dr
    } else {
        res.dr_fine
    };
    edges.push(r_obs);
    let band_end = r_obs * (1.0 + amp) + res.fine_band;
    let mut r = r_obs;
    while r + dr < band_end.min(r_out) - 1e-12 {
        r += dr;
        edges.push(r);
    }
    let mut step = dr;
    while r < r_out - 1e-12 {
        step *= res.growth;
        let next = r + step;
        if next >= r_out - 0.5 * step {
            break;
        }
        r = next;
        edges.push(r);
    }
    edges.push(r_out);
    edges
}

/// Anything the cone and ball checks can probe.
pub trait ObstacleShape {
    fn inside(&self, x: [f64; 2]) -> bool;
    /// Boundary point and unit normal pointing into the fluid, at parameter `t ∈ [0,1)`.
    fn boundary_point(&self, t: f64) -> ([f64; 2], [f64; 2]);
}

/// Star-shaped obstacle `r(φ) = r_obs(1 + amp_eff sin(wavenumber·φ))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleCurve {
    pub r_obs: f64,
    pub amp_eff: f64,
    pub wavenumber: u32,
}

impl ObstacleCurve {
    pub fn radius(&self, phi: f64) -> f64 {
        self.r_obs * (1.0 + self.amp_eff * (self.wavenumber as f64 * phi).sin())
    }

    pub fn radius_slope(&self, phi: f64) -> f64 {
        let m = self.wavenumber as f64;
        self.r_obs * self.amp_eff * m * (m * phi).cos()
    }

    pub fn max_radius(&self) -> f64 {
        self.r_obs * (1.0 + self.amp_eff)
    }

    pub fn min_radius(&self) -> f64 {
        self.r_obs * (1.0 - self.amp_eff)
    }

    /// Largest deviation from the base circle.
    pub fn max_deviation(&self) -> f64 {
        if self.wavenumber == 0 {
            0.0
        } else {
            self.r_obs * self.amp_eff
        }
    }

    /// Distance from `x` to a dense polyline of the curve.
    pub fn distance(&self, x: [f64; 2], samples: usize) -> f64 {
        let mut best = f64::INFINITY;
        let pt = |k: usize| {
            let phi = std::f64::consts::TAU * k as f64 / samples as f64;
            let r = self.radius(phi);
            [r * phi.cos(), r * phi.sin()]
        };
        let mut prev = pt(0);
        for k in 1..=samples {
            let cur = pt(k % samples);
            best = best.min(segment_distance(x, prev, cur));
            prev = cur;
        }
        best
    }
}

impl ObstacleShape for ObstacleCurve {
    fn inside(&self, x: [f64; 2]) -> bool {
        let r = x[0].hypot(x[1]);
        r < self.radius(x[1].atan2(x[0]))
    }

    fn boundary_point(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let phi = std::f64::consts::TAU * t;
        let (s, c) = phi.sin_cos();
        let r = self.radius(phi);
        let dr = self.radius_slope(phi);
        // tangent d/dφ (r e_r) = r' e_r + r e_φ ; outward normal = r e_r − r' e_φ
        let n = [r * c + dr * s, r * s - dr * c];
        let len = n[0].hypot(n[1]);
        ([r * c, r * s], [n[0] / len, n[1] / len])
    }
}

/// Flat wall `{x·n_in < offset}` is the obstacle; used as a test geometry.
#[derive(Clone, Copy, Debug)]
pub struct HalfPlane {
    /// Unit normal pointing into the fluid.
    pub normal: [f64; 2],
    pub extent: f64,
}

impl ObstacleShape for HalfPlane {
    fn inside(&self, x: [f64; 2]) -> bool {
        x[0] * self.normal[0] + x[1] * self.normal[1] < 0.0
    }

    fn boundary_point(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let tang = [-self.normal[1], self.normal[0]];
        let s = (t - 0.5) * self.extent;
        ([tang[0] * s, tang[1] * s], self.normal)
    }
}

pub(crate) fn segment_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ax = [x[0] - a[0], x[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 { ((ax[0] * ab[0] + ax[1] * ab[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let d = [ax[0] - t * ab[0], ax[1] - t * ab[1]];
    d[0].hypot(d[1])
}

/// Builds the staircase polar mesh of a domain spec.
pub fn build_domain(spec: &DomainSpec) -> Result<Mesh> {
    spec.validate()?;
    Mesh::from_domain(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec(eps: f64, amp: f64) -> DomainSpec {
        DomainSpec {
            eps,
            delta: 1.5,
            beta: 0.125,
            r_obs: 1.0,
            amp,
            freq: 4.0,
            cap_radius: Some(4.0),
            resolution: Resolution { n_theta: 64, dr_fine: 0.05, fine_band: 0.3, growth: 1.1 },
        }
    }

    #[test]
    fn validation() {
        assert!(spec(0.25, 0.1).validate().is_ok());
        assert!(DomainSpec { beta: 0.3, ..spec(0.25, 0.1) }.validate().is_err());
        assert!(DomainSpec { delta: 1.0, ..spec(0.25, 0.1) }.validate().is_err());
        assert!(spec(1.0, 0.1).validate().is_err());
        assert!(matches!(spec(0.25, 1.5).validate(), Err(Error::Geometry(_))));
    }

    #[test]
    fn profile_deviation() {
        let s = spec(0.25, 0.1);
        let c = s.curve();
        let expected = 0.1 * 0.25f64.powf(0.25);
        assert!((c.max_deviation() - expected).abs() < 1e-15);
        let sampled = (0..20000)
            .map(|k| (c.radius(std::f64::consts::TAU * k as f64 / 20000.0) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!((sampled - expected).abs() < 1e-6);
        let half = spec(0.125, 0.1).curve();
        let ratio = c.max_deviation() / half.max_deviation();
        assert!((ratio - 2f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn radial_edges_shared_across_eps() {
        let a = spec(0.25, 0.1);
        let b = DomainSpec { eps: 0.5, ..a };
        let ea = a.radial_edges();
        let eb = b.radial_edges();
        assert!(ea.contains(&1.0));
        assert_eq!(*ea.last().unwrap(), a.outer_radius());
        let common = ea.len().min(eb.len()) - 1;
        assert_eq!(ea[..common], eb[..common]);
        assert!(ea.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn point_in_domain_for_compact_set() {
        // K = {1.3 ≤ |x| ≤ 1.8} is inside every Ω_ε of the family
        for &eps in &[0.5, 0.25, 0.125, 0.0625] {
            let s = spec(eps, 0.2);
            for k in 0..64 {
                let phi = std::f64::consts::TAU * k as f64 / 64.0;
                for &r in &[1.3, 1.55, 1.8] {
                    assert!(s.contains([r * phi.cos(), r * phi.sin()]));
                }
            }
        }
    }

    #[test]
    fn normal_points_into_fluid() {
        let c = spec(0.25, 0.2).curve();
        for k in 0..50 {
            let (x, n) = c.boundary_point(k as f64 / 50.0);
            assert!(!c.inside([x[0] + 1e-6 * n[0], x[1] + 1e-6 * n[1]]));
            assert!(c.inside([x[0] - 1e-6 * n[0], x[1] - 1e-6 * n[1]]));
        }
    }
}
