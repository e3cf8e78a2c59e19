//! Moment generating function of the per-round eavesdropper information
//! Z = log2(1 + ρ h_l² |h_pf|²) and the large-deviations rate function.
//!
//! With τ = s/ln 2, E[e^{sZ}] = E[(1 + γ)^τ] and
//!
//! E[(1 + γ)^τ] = ξ (ρ h_l²)^{−φ/2} / (2Γ(−τ))
//!              · H^{3,1}_{2,3}[𝒞/(ρ^{α/2} h_l^α) | (1 − φ/2, α/2), (1, 1); (0, 1), (K, 1), (−φ/2 − τ, α/2)]
//!
//! where 𝒞 = μ (S ĥ)^{−α}, ξ = φ μ^{φ/α} (S ĥ)^{−φ} / Γ(μ) and K = μ − φ/α.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_half_line, integrate_to_inf, Tolerance};
use crate::specfun::{fox_h_scaled, ln_gamma, ContourConfig, FoxHSpec};
use crate::thz_channel::{ln_pf_density, pf_density, PointingFadingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MgfMethod {
    FoxH,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfConstants {
    pub xi: f64,
    pub k: f64,
    pub c_cal: f64,
}

impl MgfConstants {
    pub fn new(p: &PointingFadingParams) -> Self {
        let sh = p.scale();
        MgfConstants {
            xi: (p.phi.ln() + p.phi / p.alpha * p.mu.ln() - p.phi * sh.ln() - ln_gamma(p.mu)).exp(),
            k: p.mu - p.phi / p.alpha,
            c_cal: p.mu * sh.powf(-p.alpha),
        }
    }
}

fn quad_breaks(p: &PointingFadingParams, tau: f64) -> Vec<f64> {
    let sh = p.scale();
    let peak = (4.0 * tau.max(0.0) / (p.alpha * p.mu)).max(5.0).powf(1.0 / p.alpha);
    let mut b = vec![0.1 * sh, sh, 5.0 * sh];
    if peak > 5.0 {
        b.push(peak * sh);
    }
    b
}

/// ln E[(1 + γ)^τ] by quadrature, shifted by the integrand's peak so large
/// τ cannot overflow. Only the window where the integrand is within e^{−45}
/// of its peak is integrated, on a geometric grid in x.
fn ln_mgf_quadrature(tau: f64, rho: f64, p: &PointingFadingParams) -> Result<f64> {
    let g2 = rho * p.h_l * p.h_l;
    let ln_f = |x: f64| match ln_pf_density(x, p) {
        Ok(d) if d.is_finite() => tau * (g2 * x * x).ln_1p() + d,
        _ => f64::NEG_INFINITY,
    };
    let sh = p.scale();
    // the peak sits near x/sh = (2τ/(αμ))^{1/α}; scan well past it
    let reach = (4.0 * tau / (p.alpha * p.mu)).max(8.0).powf(1.0 / p.alpha).log2();
    let (bottom, top) = (-80, (8.0 * reach).ceil() as i32 + 16);
    let knot = |k: i32| sh * 2f64.powf(k as f64 / 8.0);
    let scan: Vec<f64> = (bottom..=top).map(|k| ln_f(knot(k))).collect();
    let (k_peak, coarse) = scan.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    if !coarse.is_finite() {
        return Err(Error::non_convergence("MGF integrand has no finite mass", coarse));
    }
    // refine the peak in ln x and read its width off the curvature
    let g = |u: f64| ln_f(u.exp());
    let k_peak = bottom + k_peak as i32;
    let (mut a, mut b) = (knot(k_peak - 1).ln(), knot(k_peak + 1).ln());
    for _ in 0..60 {
        let (m1, m2) = (b - GOLDEN * (b - a), a + GOLDEN * (b - a));
        if g(m1) < g(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let u_peak = 0.5 * (a + b);
    let shift = g(u_peak).max(coarse);
    let d = 1e-3;
    let curv = (2.0 * g(u_peak) - g(u_peak - d) - g(u_peak + d)) / (d * d);
    let width = if curv > 0.0 { curv.sqrt().recip().min(1.0) } else { 1.0 };
    let mass = u_peak.exp() * width;

    let live: Vec<i32> = (bottom..=top).filter(|&k| scan[(k - bottom) as usize] > shift - 45.0).collect();
    let (k_lo, k_hi) = (live[0].min(k_peak) - 1, live[live.len() - 1].max(k_peak) + 1);
    let f = |x: f64| (ln_f(x) - shift).exp();
    let tol = Tolerance::new(1e-13 * mass, 1e-11);
    let mut acc = 0.0;
    let mut lo = if k_lo <= bottom { 0.0 } else { knot(k_lo) };
    let mut k = k_lo + 1;
    while k < k_hi {
        let next = knot(k);
        acc += integrate(f, lo, next, tol)?.value;
        lo = next;
        k += 4;
    }
    if k_hi > top {
        acc += integrate_to_inf(f, lo, tol)?.value;
    } else {
        acc += integrate(f, lo, knot(k_hi), tol)?.value;
    }
    Ok(shift + acc.ln())
}

fn mgf_foxh(tau: f64, rho: f64, p: &PointingFadingParams, inner: &ContourConfig) -> Result<f64> {
    let frac = (tau - tau.round()).abs();
    if frac < 1e-6 {
        return Err(Error::Pole(format!("Fox H form of the MGF is singular at integer s/ln2 = {tau}")));
    }
    let k = MgfConstants::new(p);
    let c = |re: f64| Complex64::new(re, 0.0);
    let spec = FoxHSpec::new(
        vec![(c(1.0 - p.phi / 2.0), p.alpha / 2.0), (c(1.0), 1.0)],
        vec![(c(0.0), 1.0), (c(k.k), 1.0), (c(-p.phi / 2.0 - tau), p.alpha / 2.0)],
        3,
        1,
    )?;
    let z = k.c_cal / (rho.powf(p.alpha / 2.0) * p.h_l.powf(p.alpha));
    // 1/Γ(−τ) carries a sign; keep it outside the log scale
    let g = crate::specfun::gamma(-tau);
    let ln_pref = k.xi.ln() - p.phi / 2.0 * (rho * p.h_l * p.h_l).ln() - (2.0 * g.abs()).ln();
    let v = fox_h_scaled(&spec, z, c(ln_pref), inner)?;
    Ok(v.value.re * g.signum())
}

/// E[e^{sZ}] for s ≥ 0.
pub fn mgf(s: f64, rho: f64, eve: &PointingFadingParams, method: MgfMethod, inner: &ContourConfig) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("MGF argument must be a finite s ≥ 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    let tau = s / LN_2;
    match method {
        MgfMethod::Quadrature => Ok(ln_mgf_quadrature(tau, rho, eve)?.exp()),
        MgfMethod::FoxH => mgf_foxh(tau, rho, eve, inner),
    }
}

/// λ(s) = ln E[e^{sZ}], with λ(0) = 0.
pub fn log_mgf(s: f64, rho: f64, eve: &PointingFadingParams, method: MgfMethod) -> Result<f64> {
    if method == MgfMethod::Quadrature && s > 0.0 && s.is_finite() {
        return ln_mgf_quadrature(s / LN_2, rho, eve);
    }
    let inner = ContourConfig { tolerance: 1e-11, ..ContourConfig::default() };
    Ok(mgf(s, rho, eve, method, &inner)?.ln())
}

/// E[Z] in bits per channel use.
pub fn mean_information(rho: f64, p: &PointingFadingParams) -> Result<f64> {
    let g2 = rho * p.h_l * p.h_l;
    let v = integrate_half_line(
        |x| (g2 * x * x).ln_1p() / LN_2 * pf_density(x, p).unwrap_or(0.0),
        &quad_breaks(p, 0.0),
        Tolerance::new(0.0, 1e-12),
    )?;
    Ok(v.value)
}

/// Per-round log-MGF of the eavesdropper information at one SNR, memoized.
#[derive(Debug)]
pub struct LargeDeviationContext {
    pub rho: f64,
    pub eve: PointingFadingParams,
    pub method: MgfMethod,
    pub mean_z: f64,
    pub constants: MgfConstants,
    memo: Mutex<HashMap<u64, f64>>,
}

impl LargeDeviationContext {
    pub fn new(rho: f64, eve: &PointingFadingParams, method: MgfMethod) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::domain(format!("SNR must be positive, got {rho}")));
        }
        eve.validate()?;
        Ok(LargeDeviationContext {
            rho,
            eve: *eve,
            method,
            mean_z: mean_information(rho, eve)?,
            constants: MgfConstants::new(eve),
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn lambda(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        if let Some(&v) = self.memo.lock().expect("memo lock").get(&s.to_bits()) {
            return Ok(v);
        }
        let v = match log_mgf(s, self.rho, &self.eve, self.method) {
            Err(Error::Pole(_)) => log_mgf(s, self.rho, &self.eve, MgfMethod::Quadrature)?,
            other => other?,
        };
        self.memo.lock().expect("memo lock").insert(s.to_bits(), v);
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValue {
    pub rate: f64,
    pub s_star: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const S_MAX: f64 = 1e4;

/// 𝓘(r) = max_{s ≥ 0} {s r − λ(s)} with its maximizer. When the maximizer
/// lies past s = 10⁴ the supremum is taken over s ≤ 10⁴, which is still a
/// valid Chernoff exponent.
pub fn rate_function(r: f64, ld: &LargeDeviationContext) -> Result<RateValue> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("rate must be positive, got {r}")));
    }
    if r <= ld.mean_z {
        return Ok(RateValue { rate: 0.0, s_star: 0.0 });
    }
    let j = |s: f64| -> Result<f64> { Ok(s * r - ld.lambda(s)?) };

    // bracket [a, c] around the maximum of the concave objective
    let (mut a, mut b) = (0.0, 1.0);
    let mut jb = j(b)?;
    let mut c;
    if jb <= 0.0 {
        c = 1.0;
        b = 0.5;
    } else {
        c = 2.0;
        let mut jc = j(c)?;
        while jc > jb {
            a = b;
            b = c;
            jb = jc;
            c *= 2.0;
            if c > S_MAX {
                // any s gives a valid Chernoff exponent; stop at the cap
                return Ok(RateValue { rate: jb.max(0.0), s_star: b });
            }
            jc = j(c)?;
        }
    }

    let mut x1 = c - GOLDEN * (c - a);
    let mut x2 = a + GOLDEN * (c - a);
    let mut f1 = j(x1)?;
    let mut f2 = j(x2)?;
    for _ in 0..200 {
        if (c - a) <= 1e-10 * (1.0 + b.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (c - a);
            f2 = j(x2)?;
        } else {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - GOLDEN * (c - a);
            f1 = j(x1)?;
        }
    }
    let (s_star, best) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    Ok(RateValue { rate: best.max(0.0), s_star })
}
