//! THz link model: molecular absorption, deterministic path gain, and the
//! composite pointing-error / α-μ fading law with an exact sampler.
//!
//! Saturated vapor pressure uses the Buck (1996) equation over water with the
//! pressure enhancement factor
//!
//! ```text
//! t   = T − 273.15                     (°C)
//! e_w = 6.1121 exp((18.678 − t/234.5) · t / (257.14 + t))   (hPa)
//! f_e = 1.0007 + 3.46e-6 · p_hPa
//! p_w = 100 · f_e · e_w                (Pa)
//! ```

use std::f64::consts::PI;

use libm::erf;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{ln_gamma, ln_upper_incomplete_gamma, upper_incomplete_gamma};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MIN_CARRIER_HZ: f64 = 100e9;
pub const MAX_CARRIER_HZ: f64 = 450e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub temperature_k: f64,
    /// ψ/100.
    pub relative_humidity: f64,
    pub pressure_pa: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Environment { temperature_k: 296.0, relative_humidity: 0.5, pressure_pa: 101_325.0 }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature_k > 0.0) {
            return Err(Error::domain(format!("temperature must be positive, got {} K", self.temperature_k)));
        }
        if !(0.0..=1.0).contains(&self.relative_humidity) {
            return Err(Error::domain(format!("relative humidity must lie in [0, 1], got {}", self.relative_humidity)));
        }
        if !(self.pressure_pa > 0.0) {
            return Err(Error::domain(format!("pressure must be positive, got {} Pa", self.pressure_pa)));
        }
        Ok(())
    }
}

/// Coefficients of the simplified molecular absorption model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionConstants {
    pub q: [f64; 10],
    pub c1_cm_inv: f64,
    pub c2_cm_inv: f64,
    /// Cubic in f: j[0] f³ + j[1] f² + j[2] f + j[3].
    pub j: [f64; 4],
}

impl Default for AbsorptionConstants {
    fn default() -> Self {
        AbsorptionConstants {
            q: [0.2205, 0.1303, 0.0294, 0.4093, 0.0925, 2.014, 0.1702, 0.0303, 0.537, 0.0956],
            c1_cm_inv: 10.835,
            c2_cm_inv: 12.664,
            j: [5.54e-37, -3.94e-25, 9.06e-14, -6.36e-3],
        }
    }
}

impl AbsorptionConstants {
    /// `q(1)` is q1 and so on.
    pub fn q(&self, i: usize) -> f64 {
        self.q[i - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub distance_m: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub carrier_hz: f64,
    pub aperture_radius_m: f64,
    pub beam_footprint_m: f64,
    pub jitter_sigma_m: f64,
    pub alpha: f64,
    pub mu: f64,
    pub hf_hat: f64,
}

impl LinkConfig {
    pub fn bob_default() -> Self {
        LinkConfig {
            distance_m: 20.0,
            tx_gain_dbi: 55.0,
            rx_gain_dbi: 55.0,
            carrier_hz: 275e9,
            aperture_radius_m: 0.5,
            beam_footprint_m: 5.0,
            jitter_sigma_m: 1.0,
            alpha: 1.0,
            mu: 2.0,
            hf_hat: 1.0,
        }
    }

    pub fn eve_default() -> Self {
        LinkConfig { distance_m: 40.0, rx_gain_dbi: 50.0, ..Self::bob_default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("distance_m", self.distance_m),
            ("carrier_hz", self.carrier_hz),
            ("aperture_radius_m", self.aperture_radius_m),
            ("beam_footprint_m", self.beam_footprint_m),
            ("alpha", self.alpha),
            ("mu", self.mu),
            ("hf_hat", self.hf_hat),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.jitter_sigma_m >= 0.0) {
            return Err(Error::domain(format!("jitter_sigma_m must be non-negative, got {}", self.jitter_sigma_m)));
        }
        if !self.tx_gain_dbi.is_finite() || !self.rx_gain_dbi.is_finite() {
            return Err(Error::domain("antenna gains must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingFadingParams {
    pub zeta: f64,
    pub s: f64,
    pub phi: f64,
    pub alpha: f64,
    pub mu: f64,
    pub hf_hat: f64,
    pub h_l: f64,
}

impl PointingFadingParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.s > 0.0 && self.s <= 1.0 && self.phi > 0.0 && self.alpha > 0.0 && self.mu > 0.0;
        if !ok || !(self.hf_hat > 0.0) || !(self.h_l > 0.0) {
            return Err(Error::domain(format!("invalid pointing/fading parameters {self:?}")));
        }
        Ok(())
    }

    /// S ĥ_f, the scale of |h_pf|.
    pub fn scale(&self) -> f64 {
        self.s * self.hf_hat
    }
}

/// Saturated water-vapor partial pressure p_w(T, p) in pascal.
pub fn saturated_vapor_pressure(env: &Environment) -> Result<f64> {
    env.validate()?;
    if !(200.0..=350.0).contains(&env.temperature_k) {
        return Err(Error::domain(format!("Buck formula used on [200 K, 350 K], got {} K", env.temperature_k)));
    }
    let t = env.temperature_k - 273.15;
    let e_w = 6.1121 * ((18.678 - t / 234.5) * t / (257.14 + t)).exp();
    let enhancement = 1.0007 + 3.46e-6 * env.pressure_pa / 100.0;
    Ok(100.0 * enhancement * e_w)
}

/// Molecular absorption coefficient κ in m⁻¹.
pub fn absorption_coefficient(carrier_hz: f64, env: &Environment, k: &AbsorptionConstants) -> Result<f64> {
    if !(MIN_CARRIER_HZ..=MAX_CARRIER_HZ).contains(&carrier_hz) {
        return Err(Error::domain(format!("absorption model valid on 100–450 GHz, got {carrier_hz} Hz")));
    }
    let p_w = saturated_vapor_pressure(env)?;
    // ψ in percent: υ = ψ p_w / (100 p)
    let upsilon = 100.0 * env.relative_humidity * p_w / (100.0 * env.pressure_pa);
    let wavenumber = carrier_hz / (100.0 * SPEED_OF_LIGHT);
    let k1 = k.q(1) * upsilon * (k.q(2) * upsilon + k.q(3)) / ((k.q(4) * upsilon + k.q(5)).powi(2) + (wavenumber - k.c1_cm_inv).powi(2));
    let k2 = k.q(6) * upsilon * (k.q(7) * upsilon + k.q(8)) / ((k.q(9) * upsilon + k.q(10)).powi(2) + (wavenumber - k.c2_cm_inv).powi(2));
    let f = carrier_hz;
    let lambda = ((k.j[0] * f + k.j[1]) * f + k.j[2]) * f + k.j[3];
    Ok((k1 + k2 + lambda).max(0.0))
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Path gain with a given absorption coefficient.
pub fn path_gain_with_kappa(link: &LinkConfig, kappa: f64) -> Result<f64> {
    link.validate()?;
    let g = (db_to_linear(link.tx_gain_dbi) * db_to_linear(link.rx_gain_dbi)).sqrt();
    Ok(SPEED_OF_LIGHT * g / (4.0 * PI * link.carrier_hz * link.distance_m) * (-0.5 * kappa * link.distance_m).exp())
}

/// Deterministic amplitude path gain h_l.
pub fn path_gain(link: &LinkConfig, env: &Environment, k: &AbsorptionConstants) -> Result<f64> {
    let kappa = absorption_coefficient(link.carrier_hz, env, k)?;
    path_gain_with_kappa(link, kappa)
}

/// ζ, S and φ from the beam geometry, with h_l attached.
pub fn pointing_fading_params_with_gain(link: &LinkConfig, h_l: f64) -> Result<PointingFadingParams> {
    link.validate()?;
    if link.jitter_sigma_m == 0.0 {
        return Err(Error::Degenerate("zero jitter; use a large φ (small σ) instead".into()));
    }
    let w = link.beam_footprint_m;
    let zeta = PI.sqrt() * link.aperture_radius_m / (2f64.sqrt() * w);
    let e = erf(zeta);
    let phi = w * w * PI.sqrt() * e * (zeta * zeta).exp() / (8.0 * zeta * link.jitter_sigma_m.powi(2));
    let params = PointingFadingParams { zeta, s: e * e, phi, alpha: link.alpha, mu: link.mu, hf_hat: link.hf_hat, h_l };
    params.validate()?;
    Ok(params)
}

pub fn pointing_fading_params(link: &LinkConfig, env: &Environment, k: &AbsorptionConstants) -> Result<PointingFadingParams> {
    pointing_fading_params_with_gain(link, path_gain(link, env, k)?)
}

/// Density of |h_pf| at x > 0.
pub fn pf_density(x: f64, p: &PointingFadingParams) -> Result<f64> {
    Ok(ln_pf_density(x, p)?.exp())
}

/// ln f(x), finite in the far tail where the density itself underflows.
pub fn ln_pf_density(x: f64, p: &PointingFadingParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("pf_density needs x > 0, got {x}")));
    }
    let sh = p.scale();
    let a = (p.alpha * p.mu - p.phi) / p.alpha;
    let w = p.mu * (x / sh).powf(p.alpha);
    let ln_g = ln_upper_incomplete_gamma(a, w)?;
    let ln_pref = p.phi.ln() + p.phi / p.alpha * p.mu.ln() + (p.phi - 1.0) * x.ln() - p.phi * sh.ln() - ln_gamma(p.mu);
    Ok(ln_pref + ln_g)
}

/// Pr{|h_pf| ≤ x}.
///
/// With v = x/(S ĥ_f) and w = μ v^α,
/// F = 1 − [Γ(μ, w) − v^φ μ^{φ/α} Γ(μ − φ/α, w)] / Γ(μ).
pub fn pf_cdf(x: f64, p: &PointingFadingParams) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let v = x / p.scale();
    let w = p.mu * v.powf(p.alpha);
    if w > 700.0 {
        return Ok(1.0);
    }
    let ln_g = ln_gamma(p.mu);
    let head = upper_incomplete_gamma(p.mu, w)?;
    let k = p.mu - p.phi / p.alpha;
    let tail_g = upper_incomplete_gamma(k, w)?;
    let tail = (p.phi * v.ln() + p.phi / p.alpha * p.mu.ln()).exp() * tail_g;
    let ccdf = (head - tail) / ln_g.exp();
    Ok((1.0 - ccdf).clamp(0.0, 1.0))
}

/// One draw of |h_pf| = S U^{1/φ} · ĥ_f (G/μ)^{1/α}, G ~ Gamma(μ, 1).
pub fn sample_channel_gain<R: Rng + ?Sized>(p: &PointingFadingParams, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    // 1 − u ∈ (0, 1] keeps the pointing factor away from zero
    let h_p = p.s * (1.0 - u).powf(1.0 / p.phi);
    let g = Gamma::new(p.mu, 1.0).expect("validated μ > 0").sample(rng);
    h_p * p.hf_hat * (g / p.mu).powf(1.0 / p.alpha)
}

/// Reusable sampler with the Gamma distribution constructed once.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    s: f64,
    inv_phi: f64,
    hf_hat: f64,
    inv_alpha: f64,
    mu: f64,
    gamma: Gamma<f64>,
}

impl ChannelSampler {
    pub fn new(p: &PointingFadingParams) -> Result<Self> {
        p.validate()?;
        Ok(ChannelSampler {
            s: p.s,
            inv_phi: 1.0 / p.phi,
            hf_hat: p.hf_hat,
            inv_alpha: 1.0 / p.alpha,
            mu: p.mu,
            gamma: Gamma::new(p.mu, 1.0).map_err(|e| Error::domain(e.to_string()))?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let h_p = self.s * (1.0 - u).powf(self.inv_phi);
        let g = self.gamma.sample(rng);
        h_p * self.hf_hat * (g / self.mu).powf(self.inv_alpha)
    }
}
