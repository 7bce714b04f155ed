//! Thermodynamic state functions and transport coefficients.
//!
//! The pressure follows the structural form
//! `p(ρ,θ) = θ^{5/2} P(ρ/θ^{3/2}) + (a/3) θ⁴` with the two-term law
//! `P(Z) = c_lin·Z + c_deg·Z^{5/3}`. With this `P` the state functions
//! collapse to
//!
//! ```text
//! p = c_lin ρθ + c_deg ρ^{5/3} + (a/3)θ⁴
//! e = (3/2)c_lin θ + (3/2)c_deg ρ^{2/3} + aθ⁴/ρ
//! s = -c_lin ln(ρ θ^{-3/2}) + s_norm + (4/3)aθ³/ρ
//! ```
//!
//! and every partial derivative has a closed form. Finite differences are
//! only used by the tests.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{check_len, Error, Result};

/// Structural function `P(Z) = c_lin·Z + c_deg·Z^{5/3}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureLaw {
    pub c_lin: f64,
    pub c_deg: f64,
}

impl Default for PressureLaw {
    fn default() -> Self {
        Self { c_lin: 1.0, c_deg: 1.5 }
    }
}

impl PressureLaw {
    pub fn p(&self, z: f64) -> f64 {
        self.c_lin * z + self.c_deg * z.powf(5.0 / 3.0)
    }

    pub fn dp(&self, z: f64) -> f64 {
        self.c_lin + 5.0 / 3.0 * self.c_deg * z.powf(2.0 / 3.0)
    }

    /// `(5/3·P(Z) − P'(Z)Z)/Z`, identically `2/3·c_lin` for this family.
    pub fn structural_ratio(&self, z: f64) -> f64 {
        (5.0 / 3.0 * self.p(z) - self.dp(z) * z) / z
    }

    /// `S'(Z) = −3/2 (5/3 P − Z P')/Z²`.
    pub fn entropy_slope(&self, z: f64) -> f64 {
        -1.5 * (5.0 / 3.0 * self.p(z) - z * self.dp(z)) / (z * z)
    }

    /// `lim P(Z)/Z^{5/3}`.
    pub fn p_infinity(&self) -> f64 {
        self.c_deg
    }
}

/// Growth constants of the transport sandwich bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportBounds {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub eta_hi: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
}

impl TransportBounds {
    pub fn admits(&self, theta: f64, mu: f64, eta: f64, kappa: f64) -> bool {
        let lin = 1.0 + theta;
        let cub = 1.0 + theta.powi(3);
        let tol = 1e-12 * (1.0 + lin + cub);
        self.mu_lo * lin <= mu + tol
            && mu <= self.mu_hi * lin + tol
            && 0.0 <= eta + tol
            && eta <= self.eta_hi * lin + tol
            && self.kappa_lo * cub <= kappa + tol
            && kappa <= self.kappa_hi * cub + tol
    }
}

/// `μ = μ₀(1+θ)`, `η = η₀(1+θ)`, `κ = κ₀(1+θ³)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportLaw {
    pub mu0: f64,
    pub eta0: f64,
    pub kappa0: f64,
}

impl Default for TransportLaw {
    fn default() -> Self {
        Self { mu0: 1.0, eta0: 1.0, kappa0: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transport {
    pub mu: f64,
    pub eta: f64,
    pub kappa: f64,
}

impl TransportLaw {
    pub fn bounds(&self) -> TransportBounds {
        TransportBounds {
            mu_lo: self.mu0,
            mu_hi: self.mu0,
            eta_hi: self.eta0,
            kappa_lo: self.kappa0,
            kappa_hi: self.kappa0,
        }
    }

    pub fn eval(&self, theta: f64) -> Result<Transport> {
        if !(theta >= 0.0) {
            return Err(Error::Domain(format!("transport needs theta >= 0, got {theta}")));
        }
        Ok(self.eval_unchecked(theta))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, theta: f64) -> Transport {
        Transport {
            mu: self.mu0 * (1.0 + theta),
            eta: self.eta0 * (1.0 + theta),
            kappa: self.kappa0 * (1.0 + theta * theta * theta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoParams {
    /// Radiation constant.
    pub a: f64,
    pub rho_bar: f64,
    pub theta_bar: f64,
    #[serde(default)]
    pub p_law: PressureLaw,
    /// Fixes `S(1)`.
    #[serde(default)]
    pub s_norm: f64,
    #[serde(default)]
    pub transport: TransportLaw,
}

impl Default for ThermoParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            rho_bar: 1.0,
            theta_bar: 1.0,
            p_law: PressureLaw::default(),
            s_norm: 0.0,
            transport: TransportLaw::default(),
        }
    }
}

/// Values and first partials of `p`, `e`, `s` at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivs {
    pub p: f64,
    pub e: f64,
    pub s: f64,
    pub dp_drho: f64,
    pub dp_dtheta: f64,
    pub de_drho: f64,
    pub de_dtheta: f64,
    pub ds_drho: f64,
    pub ds_dtheta: f64,
}

impl ThermoParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Params(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("a", self.a)?;
        pos("rho_bar", self.rho_bar)?;
        pos("theta_bar", self.theta_bar)?;
        pos("p_law.c_lin", self.p_law.c_lin)?;
        pos("p_law.c_deg", self.p_law.c_deg)?;
        pos("transport.mu0", self.transport.mu0)?;
        pos("transport.kappa0", self.transport.kappa0)?;
        if !(self.transport.eta0 >= 0.0) {
            return Err(Error::Params("transport.eta0 must be non-negative".into()));
        }
        if !self.s_norm.is_finite() {
            return Err(Error::Params("s_norm must be finite".into()));
        }
        Ok(())
    }

    fn check_state(rho: f64, theta: f64) -> Result<()> {
        if rho > 0.0 && theta > 0.0 && rho.is_finite() && theta.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("state (rho={rho}, theta={theta}) is not positive")))
        }
    }

    /// Pressure. Defined down to `ρ = 0` because `P(0) = 0`.
    pub fn pressure(&self, rho: f64, theta: f64) -> Result<f64> {
        if !(rho >= 0.0 && theta > 0.0 && rho.is_finite() && theta.is_finite()) {
            return Err(Error::Domain(format!(
                "pressure needs rho >= 0 and theta > 0, got ({rho}, {theta})"
            )));
        }
        Ok(self.p_raw(rho, theta))
    }

    #[inline]
    pub(crate) fn p_raw(&self, rho: f64, theta: f64) -> f64 {
        let law = &self.p_law;
        law.c_lin * rho * theta + law.c_deg * rho.powf(5.0 / 3.0) + self.a / 3.0 * theta.powi(4)
    }

    #[inline]
    pub(crate) fn e_raw(&self, rho: f64, theta: f64) -> f64 {
        let law = &self.p_law;
        1.5 * law.c_lin * theta + 1.5 * law.c_deg * rho.powf(2.0 / 3.0) + self.a * theta.powi(4) / rho
    }

    #[inline]
    pub(crate) fn s_raw(&self, rho: f64, theta: f64) -> f64 {
        let z = rho * theta.powf(-1.5);
        -self.p_law.c_lin * z.ln() + self.s_norm + 4.0 / 3.0 * self.a * theta.powi(3) / rho
    }

    pub fn internal_energy(&self, rho: f64, theta: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        Ok(self.e_raw(rho, theta))
    }

    pub fn entropy(&self, rho: f64, theta: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        Ok(self.s_raw(rho, theta))
    }

    /// `S(Z) = −c_lin ln Z + s_norm`.
    pub fn entropy_profile(&self, z: f64) -> f64 {
        -self.p_law.c_lin * z.ln() + self.s_norm
    }

    pub fn derivs(&self, rho: f64, theta: f64) -> Result<StateDerivs> {
        Self::check_state(rho, theta)?;
        Ok(self.derivs_raw(rho, theta))
    }

    pub(crate) fn derivs_raw(&self, rho: f64, theta: f64) -> StateDerivs {
        let (c1, c2, a) = (self.p_law.c_lin, self.p_law.c_deg, self.a);
        let r23 = rho.powf(2.0 / 3.0);
        let t3 = theta.powi(3);
        StateDerivs {
            p: self.p_raw(rho, theta),
            e: self.e_raw(rho, theta),
            s: self.s_raw(rho, theta),
            dp_drho: c1 * theta + 5.0 / 3.0 * c2 * r23,
            dp_dtheta: c1 * rho + 4.0 / 3.0 * a * t3,
            de_drho: c2 / rho.cbrt() - a * t3 * theta / (rho * rho),
            de_dtheta: 1.5 * c1 + 4.0 * a * t3 / rho,
            ds_drho: -c1 / rho - 4.0 / 3.0 * a * t3 / (rho * rho),
            ds_dtheta: 1.5 * c1 / theta + 4.0 * a * theta * theta / rho,
        }
    }

    /// Adiabatic sound speed squared `∂ρp + θ(∂θp)²/(ρ²∂θe)`.
    pub fn sound_speed_sq(&self, rho: f64, theta: f64) -> Result<f64> {
        let d = self.derivs(rho, theta)?;
        Ok(sound_speed_sq_from(&d, rho, theta))
    }

    pub fn transport(&self, theta: f64) -> Result<Transport> {
        self.transport.eval(theta)
    }

    /// Temperature with `e(ρ,θ) = e_target`, by safeguarded Newton from `guess`.
    pub fn theta_from_energy(&self, rho: f64, e_target: f64, guess: f64) -> Result<f64> {
        if !(rho > 0.0 && rho.is_finite() && e_target.is_finite()) {
            return Err(Error::Domain(format!("cannot invert energy at rho={rho}, e={e_target}")));
        }
        // e is strictly increasing in θ with e(ρ, 0⁺) = (3/2)c_deg ρ^{2/3}.
        let floor = 1.5 * self.p_law.c_deg * rho.powf(2.0 / 3.0);
        if e_target <= floor {
            return Err(Error::Domain(format!(
                "internal energy {e_target} below the cold floor {floor} at rho={rho}"
            )));
        }
        let mut lo = 0.0_f64;
        let mut hi = (e_target / (1.5 * self.p_law.c_lin)).max(1e-300);
        let mut theta = if guess > 0.0 && guess.is_finite() { guess.min(hi) } else { hi };
        for _ in 0..100 {
            let f = self.e_raw(rho, theta) - e_target;
            if f == 0.0 {
                return Ok(theta);
            }
            if f > 0.0 {
                hi = hi.min(theta);
            } else {
                lo = lo.max(theta);
            }
            let dfdt = 1.5 * self.p_law.c_lin + 4.0 * self.a * theta.powi(3) / rho;
            let mut next = theta - f / dfdt;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - theta).abs() <= 4.0 * f64::EPSILON * theta {
                return Ok(next);
            }
            theta = next;
        }
        Err(Error::Domain(format!("energy inversion did not converge at rho={rho}")))
    }

    /// Ballistic free energy `H_θ̄(ρ,θ) = ρ(e − θ̄ s)`.
    pub fn ballistic(&self, rho: f64, theta: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        Ok(rho * (self.e_raw(rho, theta) - self.theta_bar * self.s_raw(rho, theta)))
    }

    fn ballistic_drho(&self, rho: f64, theta: f64) -> f64 {
        let d = self.derivs_raw(rho, theta);
        d.e + rho * d.de_drho - self.theta_bar * (d.s + rho * d.ds_drho)
    }

    /// Relative ballistic energy `H(ρ,θ) − (ρ−ρ̃)∂ρH(ρ̃,θ̄) − H(ρ̃,θ̄)`.
    pub fn ballistic_free_energy(&self, rho: f64, theta: f64, rho_tilde: f64) -> Result<f64> {
        Self::check_state(rho, theta)?;
        Self::check_state(rho_tilde, self.theta_bar)?;
        Ok(self.relative_ballistic_raw(rho, theta, rho_tilde))
    }

    pub(crate) fn relative_ballistic_raw(&self, rho: f64, theta: f64, rho_tilde: f64) -> f64 {
        let tb = self.theta_bar;
        let h = rho * (self.e_raw(rho, theta) - tb * self.s_raw(rho, theta));
        let h_ref = rho_tilde * (self.e_raw(rho_tilde, tb) - tb * self.s_raw(rho_tilde, tb));
        h - (rho - rho_tilde) * self.ballistic_drho(rho_tilde, tb) - h_ref
    }

    pub fn linearized_coeffs(&self) -> Result<LinearizedCoeffs> {
        self.validate()?;
        let (rb, tb) = (self.rho_bar, self.theta_bar);
        let d = self.derivs_raw(rb, tb);
        let alpha = d.dp_dtheta / (rb * d.dp_drho);
        let c_p = d.de_dtheta + alpha * tb / rb * d.dp_dtheta;
        let b = d.dp_dtheta / (rb * d.ds_dtheta);
        let drho_rhos = d.s + rb * d.ds_drho;
        let a = d.dp_drho - b * drho_rhos;
        let omega = d.dp_drho + d.dp_dtheta * d.dp_dtheta / (rb * rb * d.ds_dtheta);
        Ok(LinearizedCoeffs { alpha, c_p, a, b, omega })
    }

    /// Writes `rho,theta,p,e,s,mu,eta,kappa` rows for the tensor grid.
    pub fn write_table<W: Write>(&self, rhos: &[f64], thetas: &[f64], mut out: W) -> Result<()> {
        writeln!(out, "rho,theta,p,e,s,mu,eta,kappa")?;
        for &rho in rhos {
            for &theta in thetas {
                let d = self.derivs(rho, theta)?;
                let t = self.transport(theta)?;
                writeln!(
                    out,
                    "{rho:e},{theta:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                    d.p, d.e, d.s, t.mu, t.eta, t.kappa
                )?;
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sound_speed_sq_from(d: &StateDerivs, rho: f64, theta: f64) -> f64 {
    d.dp_drho + theta * d.dp_dtheta * d.dp_dtheta / (rho * rho * d.de_dtheta)
}

/// Linearization of the state functions at `(ρ̄, θ̄)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedCoeffs {
    /// Thermal expansion coefficient.
    pub alpha: f64,
    /// Specific heat at constant pressure.
    pub c_p: f64,
    pub a: f64,
    pub b: f64,
    /// Acoustic wave-speed factor.
    pub omega: f64,
}

/// Smooth cutoff window selecting the essential part of a field.
///
/// `χ = 1` on `[ρ̄/2, 2ρ̄]×[θ̄/2, 2θ̄]` and vanishes outside the support
/// rectangle; with `width = 1` the support is `[ρ̄/4, 4ρ̄]×[θ̄/4, 4θ̄]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssResWindow {
    pub rho_bar: f64,
    pub theta_bar: f64,
    /// Fraction in `(0, 1]` of the gap between the plateau and the widest support.
    pub width: f64,
}

impl EssResWindow {
    pub fn new(rho_bar: f64, theta_bar: f64, width: f64) -> Result<Self> {
        if !(rho_bar > 0.0 && theta_bar > 0.0) {
            return Err(Error::Params("window reference state must be positive".into()));
        }
        if !(width > 0.0 && width <= 1.0) {
            return Err(Error::Params(format!("window width must lie in (0,1], got {width}")));
        }
        Ok(Self { rho_bar, theta_bar, width })
    }

    pub fn from_params(params: &ThermoParams) -> Self {
        Self { rho_bar: params.rho_bar, theta_bar: params.theta_bar, width: 1.0 }
    }

    pub fn o_ess(&self) -> [(f64, f64); 2] {
        [
            (self.rho_bar / 2.0, 2.0 * self.rho_bar),
            (self.theta_bar / 2.0, 2.0 * self.theta_bar),
        ]
    }

    pub fn support(&self) -> [(f64, f64); 2] {
        let s = |c: f64| (c / 2.0 - self.width * c / 4.0, 2.0 * c + self.width * 2.0 * c);
        [s(self.rho_bar), s(self.theta_bar)]
    }

    pub fn chi(&self, rho: f64, theta: f64) -> f64 {
        let [sr, st] = self.support();
        let [or, ot] = self.o_ess();
        plateau(rho, sr, or) * plateau(theta, st, ot)
    }

    pub fn in_ess(&self, rho: f64, theta: f64) -> bool {
        let [or, ot] = self.o_ess();
        (or.0..=or.1).contains(&rho) && (ot.0..=ot.1).contains(&theta)
    }
}

/// C^∞ step, 0 for `t ≤ 0` and 1 for `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |x: f64| (-1.0 / x).exp();
    let a = f(t);
    a / (a + f(1.0 - t))
}

fn plateau(x: f64, support: (f64, f64), flat: (f64, f64)) -> f64 {
    if x <= support.0 || x >= support.1 {
        0.0
    } else if x < flat.0 {
        smooth_step((x - support.0) / (flat.0 - support.0))
    } else if x > flat.1 {
        smooth_step((support.1 - x) / (support.1 - flat.1))
    } else {
        1.0
    }
}

/// Splits `h` into `χ(ρ,θ)h` and `(1−χ(ρ,θ))h` cellwise.
pub fn ess_res_split(
    rho: &[f64],
    theta: &[f64],
    h: &[f64],
    window: &EssResWindow,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(h.len(), rho.len())?;
    check_len(h.len(), theta.len())?;
    let mut ess = Vec::with_capacity(h.len());
    let mut res = Vec::with_capacity(h.len());
    for ((&r, &t), &v) in rho.iter().zip(theta).zip(h) {
        let e = window.chi(r, t) * v;
        ess.push(e);
        // res = h − ess keeps the partition exact in floating point
        res.push(v - e);
    }
    Ok((ess, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ThermoParams {
        ThermoParams::default()
    }

    /// Central difference with one Richardson extrapolation step.
    fn richardson(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    #[test]
    fn pressure_examples() {
        let p = unit();
        assert!((p.pressure(1.0, 1.0).unwrap() - (2.5 + 1.0 / 3.0)).abs() < 1e-14);
        let no_rad = ThermoParams { a: 0.0, ..unit() };
        assert_eq!(no_rad.pressure(0.0, 1.0).unwrap(), 0.0);
        let fd = richardson(|r| p.p_raw(r, 1.0), 1.0, 1e-3);
        assert!((fd - 3.5).abs() < 1e-9);
        assert!((p.derivs(1.0, 1.0).unwrap().dp_drho - 3.5).abs() < 1e-14);
        assert!(p.pressure(-1.0, 1.0).is_err());
        assert!(p.pressure(1.0, 0.0).is_err());
    }

    #[test]
    fn pressure_matches_structural_form() {
        let p = ThermoParams { a: 0.7, ..unit() };
        for &(rho, theta) in &[(0.3f64, 2.0f64), (1.0, 1.0), (5.0, 0.4)] {
            let z = rho / theta.powf(1.5);
            let direct = theta.powf(2.5) * p.p_law.p(z) + p.a / 3.0 * theta.powi(4);
            assert!((direct - p.pressure(rho, theta).unwrap()).abs() < 1e-12 * direct);
            let e_direct = 1.5 * theta.powf(2.5) / rho * p.p_law.p(z) + p.a * theta.powi(4) / rho;
            assert!((e_direct - p.internal_energy(rho, theta).unwrap()).abs() < 1e-12 * e_direct);
        }
    }

    #[test]
    fn energy_and_entropy_examples() {
        let p = unit();
        assert!((p.internal_energy(1.0, 1.0).unwrap() - 4.75).abs() < 1e-14);
        let no_rad = ThermoParams { a: 0.0, ..unit() };
        assert!((no_rad.internal_energy(1.0, 1.0).unwrap() - 3.75).abs() < 1e-14);
        let fd = richardson(|t| p.e_raw(1.0, t), 1.0, 1e-3);
        assert!((fd - 5.5).abs() < 1e-9);
        assert!((p.p_law.entropy_slope(2.0) + 0.5).abs() < 1e-14);
        assert!((p.entropy(1.0, 1.0).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        let d = p.derivs(1.0, 1.0).unwrap();
        assert!((d.ds_dtheta - d.de_dtheta).abs() < 1e-8);
    }

    #[test]
    fn entropy_profile_matches_slope() {
        let p = unit();
        for &z in &[0.1, 0.5, 2.0, 7.0] {
            let fd = richardson(|x| p.entropy_profile(x), z, 1e-4 * z);
            assert!((fd - p.p_law.entropy_slope(z)).abs() < 1e-8);
        }
    }

    #[test]
    fn gibbs_on_log_grid() {
        let p = unit();
        let grid: Vec<f64> = (0..20).map(|k| 10f64.powf(-1.0 + 2.0 * k as f64 / 19.0)).collect();
        for &rho in &grid {
            for &theta in &grid {
                let ds_t = richardson(|t| p.s_raw(rho, t), theta, 1e-3 * theta);
                let de_t = richardson(|t| p.e_raw(rho, t), theta, 1e-3 * theta);
                let ds_r = richardson(|r| p.s_raw(r, theta), rho, 1e-3 * rho);
                let de_r = richardson(|r| p.e_raw(r, theta), rho, 1e-3 * rho);
                let pr = p.p_raw(rho, theta);
                let r1 = (theta * ds_t - de_t).abs() / de_t.abs();
                let r2 = (theta * ds_r - de_r + pr / (rho * rho)).abs()
                    / (de_r.abs() + pr / (rho * rho));
                assert!(r1 < 1e-7, "theta Gibbs at ({rho},{theta}): {r1}");
                assert!(r2 < 1e-7, "rho Gibbs at ({rho},{theta}): {r2}");
            }
        }
    }

    #[test]
    fn closed_form_partials_match_differences() {
        let p = ThermoParams { a: 0.3, s_norm: 0.2, ..unit() };
        for &(rho, theta) in &[(0.2, 0.5), (1.3, 2.2), (8.0, 0.3)] {
            let d = p.derivs(rho, theta).unwrap();
            let h = 1e-3;
            let checks = [
                (d.dp_drho, richardson(|r| p.p_raw(r, theta), rho, h * rho)),
                (d.dp_dtheta, richardson(|t| p.p_raw(rho, t), theta, h * theta)),
                (d.de_drho, richardson(|r| p.e_raw(r, theta), rho, h * rho)),
                (d.ds_drho, richardson(|r| p.s_raw(r, theta), rho, h * rho)),
                (d.ds_dtheta, richardson(|t| p.s_raw(rho, t), theta, h * theta)),
            ];
            for (exact, fd) in checks {
                assert!((exact - fd).abs() < 1e-8 * (1.0 + exact.abs()), "{exact} vs {fd}");
            }
            assert!(d.dp_drho > 0.0 && d.de_dtheta > 0.0);
        }
    }

    #[test]
    fn linearized_coefficients_at_unit_state() {
        let p = unit();
        let c = p.linearized_coeffs().unwrap();
        // finite-difference oracle
        let dpr = richardson(|r| p.p_raw(r, 1.0), 1.0, 1e-3);
        let dpt = richardson(|t| p.p_raw(1.0, t), 1.0, 1e-3);
        let dst = richardson(|t| p.s_raw(1.0, t), 1.0, 1e-3);
        let drs = richardson(|r| r * p.s_raw(r, 1.0), 1.0, 1e-3);
        let omega_fd = dpr + dpt * dpt / dst;
        assert!((c.omega - omega_fd).abs() < 1e-6);
        assert!((c.omega - 4.489_898_989_9).abs() < 1e-9);
        assert!((c.alpha - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.b - 0.424_242_424_24).abs() < 1e-10);
        assert!((c.a - 3.924_242_424_24).abs() < 1e-10);
        assert!((c.b * dst - dpt).abs() < 1e-8);
        assert!((c.a + c.b * drs - dpr).abs() < 1e-8);
        assert!((c.c_p - (5.5 + 2.0 / 3.0 * 7.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn transport_laws() {
        let law = TransportLaw::default();
        assert_eq!(law.eval(0.0).unwrap().mu, 1.0);
        assert_eq!(law.eval(1.0).unwrap().kappa, 2.0);
        let b = law.bounds();
        for &t in &[0.0, 1.0, 10.0, 100.0] {
            let tr = law.eval(t).unwrap();
            assert!(b.admits(t, tr.mu, tr.eta, tr.kappa));
        }
        assert!(law.eval(-0.1).is_err());
    }

    #[test]
    fn ballistic_relative_energy() {
        let p = unit();
        assert_eq!(p.ballistic_free_energy(1.0, 1.0, 1.0).unwrap(), 0.0);
        let v = p.ballistic_free_energy(1.1, 1.0, 1.0).unwrap();
        assert!(v > 0.0);
        // ∂²ρH(ρ,θ̄) = ∂ρp/ρ at θ = θ̄
        let d2 = richardson(|r| p.ballistic_drho(r, 1.0), 1.0, 1e-3);
        assert!((d2 - 3.5).abs() < 1e-8);
        let taylor = 0.5 * d2 * 0.01;
        assert!((v - taylor).abs() < 0.05 * taylor);
        let xs: Vec<f64> = (0..=60).map(|k| 0.5 + 1.5 * k as f64 / 60.0).collect();
        let hs: Vec<f64> = xs.iter().map(|&r| p.ballistic_free_energy(r, 1.0, 1.0).unwrap()).collect();
        for w in hs.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-14);
        }
        for &r in &[0.4, 0.9, 1.0, 1.7] {
            for &t in &[0.5, 1.0, 1.5] {
                let v = p.ballistic_free_energy(r, t, 1.0).unwrap();
                if r == 1.0 && t == 1.0 {
                    assert_eq!(v, 0.0);
                } else {
                    assert!(v > 0.0, "({r},{t}) -> {v}");
                }
            }
        }
    }

    #[test]
    fn energy_inversion() {
        let p = ThermoParams { a: 0.4, ..unit() };
        for &(rho, theta) in &[(0.2, 0.1), (1.0, 1.0), (3.0, 7.0)] {
            let e = p.e_raw(rho, theta);
            let t = p.theta_from_energy(rho, e, 1.0).unwrap();
            assert!((t - theta).abs() < 1e-12 * theta);
        }
        assert!(p.theta_from_energy(1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn window_split() {
        let w = EssResWindow::new(1.0, 1.0, 1.0).unwrap();
        let rho = [1.0, 10.0, 0.3, 3.0];
        let theta = [1.0, 1.0, 1.0, 1.0];
        let h = [2.0, 3.0, -1.5, 0.7];
        let (ess, res) = ess_res_split(&rho, &theta, &h, &w).unwrap();
        assert_eq!((ess[0], res[0]), (2.0, 0.0));
        assert_eq!((ess[1], res[1]), (0.0, 3.0));
        for i in 0..4 {
            assert_eq!(ess[i] + res[i], h[i]);
        }
        assert!(ess[2] != 0.0 && res[2] != 0.0);
        assert!(ess_res_split(&rho, &theta[..3], &h, &w).is_err());
        assert_eq!(w.support(), [(0.25, 4.0), (0.25, 4.0)]);
    }

    #[test]
    fn structural_ratio_is_constant() {
        let law = PressureLaw::default();
        for k in 0..200 {
            let z = 10f64.powf(-3.0 + 6.0 * k as f64 / 199.0);
            assert!((law.structural_ratio(z) - 2.0 / 3.0).abs() < 1e-12 * (1.0 + z.powf(2.0 / 3.0)));
        }
        assert_eq!(law.p(0.0), 0.0);
        assert!(law.dp(0.0) > 0.0);
        let big = 1e12;
        assert!((law.p(big) / big.powf(5.0 / 3.0) - law.p_infinity()).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn chi_partitions_any_field(rho in 0.01f64..20.0, theta in 0.01f64..20.0, h in -1e3f64..1e3) {
                let w = EssResWindow::new(1.3, 0.8, 0.6).unwrap();
                let (ess, res) = ess_res_split(&[rho], &[theta], &[h], &w).unwrap();
                prop_assert_eq!(ess[0] + res[0], h);
                let c = w.chi(rho, theta);
                prop_assert!((0.0..=1.0).contains(&c));
                if w.in_ess(rho, theta) { prop_assert_eq!(c, 1.0); }
            }

            #[test]
            fn relative_energy_nonnegative(rho in 0.05f64..10.0, theta in 0.05f64..10.0, rt in 0.2f64..5.0) {
                let p = ThermoParams::default();
                let v = p.ballistic_free_energy(rho, theta, rt).unwrap();
                prop_assert!(v >= -1e-10 * (1.0 + p.ballistic(rho, theta).unwrap().abs()));
            }
        }
    }
}
