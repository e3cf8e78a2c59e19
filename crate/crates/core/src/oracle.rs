//! Reference evaluations of the accumulated-information CDF that share no
//! code with the analytic path beyond the fading density itself.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::quad::{integrate, Tolerance};
use crate::thz_channel::{pf_density, PointingFadingParams};

/// Amplitude |h_pf| at which one round carries exactly `y` bits.
fn amplitude_for(p: &PointingFadingParams, rho: f64, y: f64) -> f64 {
    ((y * LN_2).exp_m1() / rho).sqrt() / p.h_l
}

fn density_mass(p: &PointingFadingParams, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    Ok(integrate(|t| pf_density(t, p).unwrap_or(0.0), a, b, tol)?.value)
}

/// Pr{log2(1 + ρ h_l² |h_pf|²) < x} by adaptive quadrature of the density.
pub fn single_round_cdf_quadrature(p: &PointingFadingParams, rho: f64, x: f64) -> Result<f64> {
    p.validate()?;
    if !(x > 0.0) || !(rho > 0.0) {
        return Err(Error::domain(format!("need x > 0 and ρ > 0, got x={x}, ρ={rho}")));
    }
    let top = amplitude_for(p, rho, x);
    let tol = Tolerance::new(1e-14, 1e-12);
    // split at the scale of the density so the peak is never straddled blindly
    let knots = [0.25, 0.5, 1.0, 2.0, 4.0].map(|k| k * p.scale());
    let mut acc = 0.0;
    let mut lo = 0.0;
    for &k in knots.iter().filter(|&&k| k < top) {
        acc += density_mass(p, lo, k, tol)?;
        lo = k;
    }
    acc += density_mass(p, lo, top, tol)?;
    Ok(acc.clamp(0.0, 1.0))
}

/// Ψ^m(x) for equal per-round SNR by m-fold numerical convolution on a grid
/// of spacing at most `step` over [0, x].
///
/// The single-round law enters through exact cell probabilities
/// Pr{y_j ≤ I < y_{j+1}}; each convolution averages the previous CDF over a
/// cell, so the error is second order in the spacing.
pub fn convolution_cdf(p: &PointingFadingParams, rho: f64, m: usize, x: f64, step: f64) -> Result<f64> {
    p.validate()?;
    if m == 0 || !(x > 0.0) || !(step > 0.0) || !(rho > 0.0) {
        return Err(Error::domain(format!("bad convolution request m={m}, x={x}, step={step}, ρ={rho}")));
    }
    let n = (x / step).ceil() as usize;
    let dy = x / n as f64;
    let tol = Tolerance::new(1e-15, 1e-10);
    let mut cells = Vec::with_capacity(n);
    let mut prev = 0.0;
    for j in 1..=n {
        let a = amplitude_for(p, rho, j as f64 * dy);
        cells.push(density_mass(p, prev, a, tol)?);
        prev = a;
    }
    // cdf[i] = Ψ^k(i dy)
    let mut cdf = vec![0.0; n + 1];
    for i in 1..=n {
        cdf[i] = cdf[i - 1] + cells[i - 1];
    }
    for _ in 1..m {
        let mut next = vec![0.0; n + 1];
        for (i, slot) in next.iter_mut().enumerate().skip(1) {
            let mut s = 0.0;
            for j in 0..i {
                s += cells[j] * 0.5 * (cdf[i - j] + cdf[i - j - 1]);
            }
            *slot = s;
        }
        cdf = next;
    }
    Ok(cdf[n].clamp(0.0, 1.0))
}
