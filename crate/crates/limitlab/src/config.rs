//! Sweep configuration, read from TOML.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use limitlab_core::constitutive::{ThermoParams, TransportLaw};
use limitlab_core::equilibrium::{Perturbation, PotentialField, Profile, VelocityProfile};
use limitlab_core::geometry::{DomainSpec, Resolution};
use limitlab_core::nsf::FluxConfig;
use limitlab_core::staggered::WallMode;
use limitlab_core::{Error, Result};

pub const SCHEMA: &str = "limitlab/1";

/// The ε-independent part of a domain spec.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFamily {
    pub delta: f64,
    pub beta: f64,
    pub r_obs: f64,
    pub amp: f64,
    pub freq: f64,
    pub cap_radius: Option<f64>,
    pub resolution: Resolution,
}

impl DomainFamily {
    pub fn spec(&self, eps: f64) -> DomainSpec {
        DomainSpec {
            eps,
            delta: self.delta,
            beta: self.beta,
            r_obs: self.r_obs,
            amp: self.amp,
            freq: self.freq,
            cap_radius: self.cap_radius,
            resolution: self.resolution,
        }
    }

    /// The limit domain at the outer radius of `eps`: the base circle without roughness.
    pub fn limit_spec(&self, eps: f64) -> DomainSpec {
        DomainSpec { amp: 0.0, ..self.spec(eps) }
    }
}

/// Annular comparison region `r_inner ≤ |x| ≤ r_outer` and its polar grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KRegion {
    pub r_inner: f64,
    pub r_outer: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitConfig {
    pub wall: WallMode,
    pub cfl: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig { wall: WallMode::Slip, cfl: 0.4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryChecks {
    /// Ball-condition constant `c_b` of the threshold `c_b ε^β`.
    pub c_b: f64,
    pub cone_gamma: f64,
    pub cone_alpha: f64,
    pub samples: usize,
}

impl Default for GeometryChecks {
    fn default() -> Self {
        GeometryChecks { c_b: 0.05, cone_gamma: 0.5, cone_alpha: 0.05, samples: 2048 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub eps_list: Vec<f64>,
    /// `T` as a fraction of the crossing time.
    pub t_fraction: f64,
    pub omega: f64,
    /// Support `(λ_lo, λ_hi)` of the smooth spectral cutoff `G`.
    pub band: [f64; 2],
    pub psi: Profile,
    /// Observable bump: center and radius.
    pub phi_center: [f64; 2],
    pub phi_radius: f64,
    /// Domain family of the decay meshes; defaults to the sweep family.
    pub domain: Option<DomainFamily>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Acceptance {
    /// Required ratio of the first to the last value of each tracked metric.
    pub min_factor: f64,
    /// Largest allowed max/min ratio of a normalized monitor across the sweep.
    pub max_monitor_spread: f64,
    /// Admitted range of the fitted decay slope.
    pub decay_slope: [f64; 2],
}

impl Default for Acceptance {
    fn default() -> Self {
        Acceptance { min_factor: 1.5, max_monitor_spread: 10.0, decay_slope: [0.8, 1.2] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema: String,
    pub eps_list: Vec<f64>,
    pub t_end: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub domain: DomainFamily,
    #[serde(default)]
    pub thermo: ThermoParams,
    pub force: PotentialField,
    pub perturbation: Perturbation,
    #[serde(default)]
    pub flux: FluxConfig,
    #[serde(default)]
    pub limit: LimitConfig,
    pub k: KRegion,
    #[serde(default)]
    pub geometry: GeometryChecks,
    pub decay: Option<DecayConfig>,
    #[serde(default)]
    pub acceptance: Acceptance,
}

fn default_output() -> PathBuf {
    PathBuf::from("limitlab-out")
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Params(format!("unsupported schema `{}`, expected `{SCHEMA}`", self.schema)));
        }
        strictly_decreasing("eps_list", &self.eps_list)?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) || self.n_samples == 0 {
            return Err(Error::Params("t_end must be positive and n_samples at least 1".into()));
        }
        self.thermo.validate()?;
        self.force.validate()?;
        self.flux.validate()?;
        if !(self.limit.cfl > 0.0 && self.limit.cfl <= 1.0) {
            return Err(Error::Params(format!("limit cfl must lie in (0,1], got {}", self.limit.cfl)));
        }
        let k = &self.k;
        if !(k.r_inner > 0.0 && k.r_outer > k.r_inner) || k.n_r == 0 || k.n_theta == 0 {
            return Err(Error::Params("K needs 0 < r_inner < r_outer and positive cell counts".into()));
        }
        for &eps in &self.eps_list {
            let spec = self.domain.spec(eps);
            spec.validate()?;
            let curve = spec.curve();
            if k.r_inner <= curve.max_radius() || k.r_outer >= spec.outer_radius() {
                return Err(Error::Params(format!(
                    "K = [{}, {}] is not inside the domain at eps = {eps} (obstacle up to {}, outer radius {})",
                    k.r_inner,
                    k.r_outer,
                    curve.max_radius(),
                    spec.outer_radius()
                )));
            }
        }
        if let Some(d) = &self.decay {
            strictly_decreasing("decay.eps_list", &d.eps_list)?;
            if !(d.t_fraction > 0.0 && d.omega > 0.0 && d.band[0] >= 0.0 && d.band[1] > d.band[0] && d.phi_radius > 0.0) {
                return Err(Error::Params("decay needs t_fraction, omega, phi_radius > 0 and an ordered band".into()));
            }
            let fam = d.domain.unwrap_or(self.domain);
            for &eps in &d.eps_list {
                fam.spec(eps).validate()?;
            }
        }
        let a = &self.acceptance;
        if !(a.min_factor >= 1.0 && a.max_monitor_spread >= 1.0 && a.decay_slope[0] <= a.decay_slope[1]) {
            return Err(Error::Params("acceptance factors must be at least 1 and the slope range ordered".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Smoke-sized default: the full ε ladder at coarse resolution.
    pub fn example() -> Self {
        SweepConfig {
            schema: SCHEMA.into(),
            eps_list: vec![0.5, 0.25, 0.125, 0.0625],
            t_end: 0.5,
            n_samples: 20,
            seed: 7,
            output_dir: default_output(),
            domain: DomainFamily {
                delta: 1.5,
                beta: 0.125,
                r_obs: 1.0,
                amp: 0.1,
                freq: 1.0,
                cap_radius: Some(12.0),
                resolution: Resolution { n_theta: 48, dr_fine: 0.08, fine_band: 0.4, growth: 1.15 },
            },
            thermo: ThermoParams {
                transport: TransportLaw { mu0: 0.05, eta0: 0.05, kappa0: 0.05 },
                ..ThermoParams::default()
            },
            force: PotentialField::default(),
            perturbation: Perturbation {
                rho1: Profile::Gaussian { amp: 0.5, center: [0.0, 1.9], width: 0.4 },
                theta1: Profile::Gaussian { amp: 0.5, center: [0.0, -1.9], width: 0.4 },
                u0: VelocityProfile::Vortex { amp: 1.0, center: [1.9, 0.0], width: 0.4 },
            },
            flux: FluxConfig::default(),
            limit: LimitConfig::default(),
            k: KRegion { r_inner: 1.5, r_outer: 2.3, n_r: 8, n_theta: 48 },
            geometry: GeometryChecks::default(),
            decay: Some(DecayConfig {
                eps_list: vec![0.25, 0.125, 0.0625, 0.03125],
                t_fraction: 0.5,
                omega: 1.0,
                band: [2.0, 30.0],
                psi: Profile::Random { amp: 1.0, seed: 7, modes: 40, kmax: 6.0 },
                phi_center: [1.9, 0.0],
                phi_radius: 0.35,
                domain: Some(DomainFamily {
                    delta: 1.5,
                    beta: 0.125,
                    r_obs: 1.0,
                    amp: 0.1,
                    freq: 1.0,
                    cap_radius: Some(3.0),
                    resolution: Resolution { n_theta: 48, dr_fine: 0.08, fine_band: 0.3, growth: 1.15 },
                }),
            }),
            acceptance: Acceptance::default(),
        }
    }
}

fn strictly_decreasing(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Params(format!("{name} is empty")));
    }
    if v.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::Params(format!("{name} entries must lie in (0,1)")));
    }
    if v.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Params(format!("{name} must be strictly decreasing")));
    }
    Ok(())
}
