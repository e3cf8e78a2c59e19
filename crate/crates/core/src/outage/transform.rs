//! Per-round transform g(t) = E[(1 + γ)^t] on a vertical line and the
//! Bromwich inversion of the accumulated mutual-information CDF.
//!
//! g(t) = φ/(2Γ(μ)) · Γ(−t)^{−1} · H^{1,3}_{3,2}[z | (1+t, ½), (1−μ, 1/α), (1−φ, 1); (0, ½), (−φ, 1)]
//! with z = √ρ h_l S ĥ μ^{−1/α}. The CDF of I(m) = Σ log2(1 + γ_j) is
//! Ψ^m(x) = (1/2πi) ∫_{c−i∞}^{c+i∞} e^{−x t ln 2}/(−t) Π_j g_j(t) dt, c < 0.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::specfun::{fox_h_scaled, ln_gamma, ln_gamma_c, ContourConfig, FoxHSpec};
use crate::thz_channel::PointingFadingParams;

/// Abscissae c_j = −¼·2^{j/2}, j = 0..ABSCISSA_STEPS.
pub(crate) const ABSCISSA_STEPS: usize = 11;

pub(crate) fn abscissa(j: usize) -> f64 {
    -0.25 * 2f64.powf(j as f64 / 2.0)
}

fn round_spec(p: &PointingFadingParams, t: Complex64) -> Result<FoxHSpec> {
    let c = |re: f64| Complex64::new(re, 0.0);
    FoxHSpec::new(vec![(t + 1.0, 0.5), (c(1.0 - p.mu), 1.0 / p.alpha), (c(1.0 - p.phi), 1.0)], vec![(c(0.0), 0.5), (c(-p.phi), 1.0)], 1, 3)
}

fn round_argument(p: &PointingFadingParams, rho: f64) -> f64 {
    rho.sqrt() * p.h_l * p.s * p.hf_hat * p.mu.powf(-1.0 / p.alpha)
}

/// g(t) for Re t < 0 through the Mellin–Barnes representation.
pub fn round_transform_value(p: &PointingFadingParams, rho: f64, t: Complex64, inner: &ContourConfig) -> Result<Complex64> {
    if !(t.re < 0.0) {
        return Err(Error::domain(format!("per-round transform needs Re t < 0, got {t}")));
    }
    let spec = round_spec(p, t)?;
    let ln_scale = Complex64::new((p.phi / 2.0).ln() - ln_gamma(p.mu), 0.0) - ln_gamma_c(-t);
    let v = fox_h_scaled(&spec, round_argument(p, rho), ln_scale, inner)?;
    Ok(v.value)
}

/// Samples g(c + ikh), k = 0, 1, ..., until the transform has decayed.
#[derive(Debug, Clone)]
pub(crate) struct RoundTransform {
    pub c: f64,
    pub h: f64,
    pub samples: Vec<Complex64>,
    /// True when the cap on Im t was reached before the decay criterion.
    pub capped: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SamplingRule {
    /// Stop once (|g_k|/g_0)²·|c|/|t_k| stays below this for `quiet` nodes.
    pub decay: f64,
    pub quiet: usize,
    pub tau_cap: f64,
    pub chunk: usize,
}

impl Default for SamplingRule {
    fn default() -> Self {
        SamplingRule { decay: 1e-9, quiet: 50, tau_cap: 600.0, chunk: 128 }
    }
}

impl RoundTransform {
    pub fn build(
        p: &PointingFadingParams,
        rho: f64,
        c: f64,
        h: f64,
        rule: &SamplingRule,
        inner: &ContourConfig,
        exec: Execution,
    ) -> Result<Self> {
        let mut samples: Vec<Complex64> = Vec::new();
        let mut quiet = 0usize;
        let mut g0 = 0.0;
        loop {
            let start = samples.len();
            let chunk =
                par::map_range(exec, rule.chunk, |i| round_transform_value(p, rho, Complex64::new(c, (start + i) as f64 * h), inner));
            for (i, v) in chunk.into_iter().enumerate() {
                let v = v?;
                let k = start + i;
                if k == 0 {
                    g0 = v.norm();
                }
                samples.push(v);
                let t = Complex64::new(c, k as f64 * h);
                let r = (v.norm() / g0).powi(2) * c.abs() / t.norm();
                if r < rule.decay {
                    quiet += 1;
                } else {
                    quiet = 0;
                }
                if quiet >= rule.quiet {
                    return Ok(RoundTransform { c, h, samples, capped: false });
                }
            }
            if samples.len() as f64 * h > rule.tau_cap {
                return Ok(RoundTransform { c, h, samples, capped: true });
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CdfValue {
    pub value: f64,
    pub error: f64,
    pub abscissa: f64,
}

/// Trapezoidal Bromwich sum for Ψ(x) from the per-round samples, which must
/// share c and h.
pub(crate) fn invert(transforms: &[&RoundTransform], x: f64) -> Result<CdfValue> {
    let first = transforms.first().ok_or_else(|| Error::domain("no rounds to invert"))?;
    let (c, h) = (first.c, first.h);
    if transforms.iter().any(|t| t.c != c || t.h != h) {
        return Err(Error::domain("per-round transforms sampled on different lines"));
    }
    let n = transforms.iter().map(|t| t.samples.len()).min().unwrap_or(0);
    let term = |k: usize| {
        let t = Complex64::new(c, k as f64 * h);
        let mut v = (-x * LN_2 * t).exp() / (-t);
        for tr in transforms {
            v *= tr.samples[k];
        }
        v
    };
    let f0 = term(0);
    let mut sum = 0.5 * f0.re;
    let mut comp = 0.0;
    let mut last = f0.norm();
    for k in 1..n {
        let v = term(k);
        let y = v.re - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        last = v.norm();
    }
    let value = sum * h / PI;
    // aliasing from images at x + 2πk/(h ln 2), where the CDF is at most 1,
    // plus the boundary term of the truncated oscillatory tail
    let alias = (2.0 * PI * c / h).exp();
    let tail = last / (PI * x * LN_2);
    let capped = transforms.iter().any(|t| t.capped);
    let error = alias + if capped { tail.max(last) } else { tail };
    Ok(CdfValue { value, error, abscissa: c })
}

/// Chernoff-optimal grid abscissa: minimizes Σ ln g_j(c) − x c ln 2 − ln|c|.
/// Returns (grid index, log of the bound at that point).
pub(crate) fn saddle_index(ln_g: &[Vec<f64>], x: f64) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..ABSCISSA_STEPS {
        let c = abscissa(j);
        let v: f64 = ln_g.iter().map(|row| row[j]).sum::<f64>() - x * c * LN_2 - c.abs().ln();
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

/// Step size for a given abscissa so that the aliasing error e^{2πc/h} sits
/// about e^{−margin} below the Chernoff bound e^{ln_bound}; quantized so
/// transforms can be shared across thresholds.
pub(crate) fn alias_level(ln_bound: f64) -> u32 {
    let need = 30.0 - ln_bound.min(0.0);
    (need / 8.0).ceil().clamp(5.0, 12.0) as u32
}

pub(crate) fn step_for(c: f64, level: u32) -> f64 {
    2.0 * PI * c.abs() / (8.0 * level as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_half_line, Tolerance};
    use crate::thz_channel::pf_density;

    pub(crate) fn bob() -> PointingFadingParams {
        PointingFadingParams {
            zeta: 0.125_331_413_731_550_025,
            s: 0.019_792_086_945_219_322_6,
            phi: 6.315_862_932_539_050_78,
            alpha: 1.0,
            mu: 2.0,
            hf_hat: 1.0,
            h_l: 1.366_342_021_734_425_495_36,
        }
    }

    fn direct(p: &PointingFadingParams, rho: f64, t: Complex64) -> Complex64 {
        let g2 = rho * p.h_l * p.h_l;
        let br = [0.1 * p.scale(), p.scale(), 5.0 * p.scale()];
        let re =
            integrate_half_line(|x| ((1.0 + g2 * x * x).ln() * t).exp().re * pf_density(x, p).unwrap(), &br, Tolerance::new(1e-15, 1e-12))
                .unwrap()
                .value;
        let im =
            integrate_half_line(|x| ((1.0 + g2 * x * x).ln() * t).exp().im * pf_density(x, p).unwrap(), &br, Tolerance::new(1e-15, 1e-12))
                .unwrap()
                .value;
        Complex64::new(re, im)
    }

    #[test]
    fn transform_matches_expectation() {
        let p = bob();
        let rho = 10f64.powf(4.5);
        let inner = ContourConfig { tolerance: 1e-11, ..ContourConfig::default() };
        for &t in &[Complex64::new(-1.0, 0.0), Complex64::new(-1.0, 2.5), Complex64::new(-2.8, 7.0), Complex64::new(-0.25, 0.4)] {
            let v = round_transform_value(&p, rho, t, &inner).unwrap();
            let d = direct(&p, rho, t);
            assert!((v - d).norm() < 1e-9 * d.norm().max(1e-3), "t={t}: {v} vs {d}");
        }
    }

    #[test]
    fn abscissa_grid() {
        assert_eq!(abscissa(0), -0.25);
        assert!((abscissa(4) + 1.0).abs() < 1e-15);
        assert!((abscissa(ABSCISSA_STEPS - 1) + 8.0).abs() < 1e-12);
    }
}
