//! The Meijer G-function G^{0,M}_{M,M}(z | 1+a, ..., 1+a; 0, 1, ..., 1)
//! that appears in high-SNR outage expansions.
//!
//! In the variable L = ln z the function is the inverse Laplace transform of
//! (1/p)[Γ(p − a)/Γ(p)]^M at L. It vanishes for z ≤ 1 and equals
//! (z − 1)^a / Γ(1 + a) for M = 1. The inversion uses the fixed Talbot
//! contour of Weideman and Trefethen, shifted past the singularity at p = a.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::foxh::ContourConfig;
use super::gamma::ln_gamma_c;
use crate::error::{Error, Result};

const TALBOT_NODES: usize = 32;

fn talbot(l: f64, n: usize, ln_f: &dyn Fn(Complex64) -> Complex64) -> f64 {
    // p(θ) = (N/L)(−0.6122 + 0.5017 θ cot(0.6407 θ) + 0.2645 iθ), midpoint rule on (−π, π);
    // conjugate pairs fold to (2/N) Σ_{θ>0} Im f(θ)
    let scale = n as f64 / l;
    let mut acc = 0.0;
    for k in n / 2..n {
        let theta = -PI + (k as f64 + 0.5) * 2.0 * PI / n as f64;
        let a = 0.6407 * theta;
        let cot = a.cos() / a.sin();
        let q = scale * Complex64::new(-0.6122 + 0.5017 * theta * cot, 0.2645 * theta);
        let dq = scale * Complex64::new(0.5017 * (cot - a / (a.sin() * a.sin())), 0.2645);
        let f = (q * l + ln_f(q)).exp() * dq;
        acc += f.im;
    }
    2.0 * acc / n as f64
}

/// G^{0,M}_{M,M}(z | 1+a, ...; 0, 1, ..., 1) for a > 0, M ≥ 1, z > 0.
///
/// `cfg.tolerance` bounds the discrepancy between the N = 32 and N = 64
/// Talbot rules, relative to max(1, |G|).
pub fn meijer_g_0m_mm(a: f64, order: usize, z: f64, cfg: &ContourConfig) -> Result<f64> {
    if !(a > 0.0) || order == 0 || !(z > 0.0) {
        return Err(Error::domain(format!("meijer_g_0m_mm needs a > 0, M ≥ 1, z > 0 (a={a}, M={order}, z={z})")));
    }
    if z <= 1.0 {
        return Ok(0.0);
    }
    let l = z.ln();
    if order == 1 {
        return Ok((l.exp_m1()).powf(a) * super::gamma::rgamma(1.0 + a));
    }
    let m = order as f64;
    // shift p = a + q so the rightmost singularity sits at q = 0
    let ln_f = |q: Complex64| m * (ln_gamma_c(q) - ln_gamma_c(q + a)) - (q + a).ln();
    let coarse = talbot(l, TALBOT_NODES, &ln_f);
    let fine = talbot(l, 2 * TALBOT_NODES, &ln_f);
    let value = (a * l).exp() * fine;
    let err = (a * l).exp() * (fine - coarse).abs();
    if !value.is_finite() || err > cfg.tolerance * value.abs().max(1.0) {
        return Err(Error::non_convergence("Talbot inversion of the Meijer G kernel", err));
    }
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tolerance};
    use crate::specfun::gamma::{gamma, rgamma};

    fn cfg() -> ContourConfig {
        ContourConfig { tolerance: 1e-9, ..ContourConfig::default() }
    }

    fn g1_residue(a: f64, z: f64) -> f64 {
        // Σ_k (−1)^k z^{a−k} / (k! Γ(1 + a − k)), z > 1
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 0..200 {
            if k > 0 {
                fact *= k as f64;
            }
            let term = (-1f64).powi(k) * z.powf(a - k as f64) * rgamma(1.0 + a - k as f64) / fact;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() && k > 5 {
                break;
            }
        }
        sum
    }

    fn g2_convolution(a: f64, z: f64) -> f64 {
        // y^{a−1}(z/(1+y) − 1)^a / a on (0, z − 1), times Γ(a)^{−2}
        let v = integrate(|y: f64| y.powf(a - 1.0) * (z / (1.0 + y) - 1.0).max(0.0).powf(a) / a, 0.0, z - 1.0, Tolerance::new(0.0, 1e-12))
            .unwrap()
            .value;
        v / (gamma(a) * gamma(a))
    }

    #[test]
    fn vanishes_below_one() {
        assert_eq!(meijer_g_0m_mm(1.0, 3, 0.9, &cfg()).unwrap(), 0.0);
        assert_eq!(meijer_g_0m_mm(1.0, 2, 1.0, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn order_one_against_residue_series() {
        for &(a, z) in &[(1.0, 3.0), (0.5, 1.5), (2.3, 9.0)] {
            let v = meijer_g_0m_mm(a, 1, z, &cfg()).unwrap();
            let o = g1_residue(a, z);
            assert!(((v - o) / o).abs() < 1e-10, "a={a} z={z}: {v} vs {o}");
        }
    }

    #[test]
    fn order_two_against_convolution() {
        for &(a, z) in &[(1.0, 4.0), (0.5, 2.0), (2.0, 40.0), (1.0, 1.05)] {
            let v = meijer_g_0m_mm(a, 2, z, &cfg()).unwrap();
            let o = g2_convolution(a, z);
            assert!(((v - o) / o).abs() < 1e-8, "a={a} z={z}: {v} vs {o}");
        }
    }

    #[test]
    fn order_one_through_talbot_agrees() {
        // the Talbot path for M = 1 against the closed form
        let a = 1.0;
        let z: f64 = 6.0;
        let l = z.ln();
        let ln_f = |q: Complex64| ln_gamma_c(q) - ln_gamma_c(q + a) - (q + a).ln();
        let v = (a * l).exp() * talbot(l, 64, &ln_f);
        assert!((v - (z - 1.0)).abs() < 1e-10, "{v}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(meijer_g_0m_mm(0.0, 2, 2.0, &cfg()).is_err());
        assert!(meijer_g_0m_mm(1.0, 0, 2.0, &cfg()).is_err());
    }
}
