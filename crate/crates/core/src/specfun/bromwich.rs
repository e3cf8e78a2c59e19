//! Numerical Bromwich (inverse Laplace) integration on a vertical line.
//!
//! With the conjugate symmetry F(t̄) = F̄(t) of real-valued originals,
//! (1/2πi) ∫_{c−i∞}^{c+i∞} F(t) dt = (1/π) ∫_0^∞ Re F(c + iτ) dτ, which is
//! evaluated with the trapezoidal rule. On a vertical line the trapezoid only
//! suffers aliasing; for a CDF in x with kernel e^{−x t ln 2} the aliasing
//! error is of order e^{2πc/h}.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::foxh::ContourConfig;
use crate::error::{Error, Result};

pub const DEFAULT_ABSCISSA: f64 = -1.0;

#[derive(Debug, Clone, Copy)]
pub struct BromwichValue {
    pub value: f64,
    pub error: f64,
}

/// (h/π)[½ Re F(c) + Σ_{k≥1} Re F(c + ikh)] for samples F(c + ikh), k = 0, 1, ...
pub fn trapezoid_from_samples<I: IntoIterator<Item = Complex64>>(h: f64, samples: I) -> f64 {
    let mut it = samples.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    let mut acc = KahanSum::new(0.5 * first.re);
    for v in it {
        acc.add(v.re);
    }
    acc.total() * h / PI
}

struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn new(v: f64) -> Self {
        Self { sum: v, comp: 0.0 }
    }
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
    fn total(&self) -> f64 {
        self.sum
    }
}

/// Σ_{k=lo}^{hi-1} Re F(c + i(k + offset)h).
fn node_sum(f: &dyn Fn(Complex64) -> Complex64, c: f64, h: f64, offset: f64, lo: usize, hi: usize) -> f64 {
    let mut acc = KahanSum::new(0.0);
    for k in lo..hi {
        acc.add(f(Complex64::new(c, (k as f64 + offset) * h)).re);
    }
    acc.total()
}

/// Value of (1/2πi)∫ F(t) dt along Re t = c, c = `cfg.abscissa` (default −1).
/// `transform` carries the kernel, e.g. e^{−x t ln 2}/(−t) times a product of
/// per-round transforms.
///
/// The step is halved until successive values agree to `cfg.tolerance`, then
/// the truncation point is doubled until the added tail is below it.
pub fn bromwich_inverse<F>(transform: F, cfg: &ContourConfig) -> Result<BromwichValue>
where
    F: Fn(Complex64) -> Complex64,
{
    cfg.validate()?;
    let c = cfg.abscissa.unwrap_or(DEFAULT_ABSCISSA);
    if c == 0.0 {
        return Err(Error::domain("Bromwich abscissa must avoid the pole at 0"));
    }
    let f: &dyn Fn(Complex64) -> Complex64 = &transform;
    let mut n = cfg.nodes;
    let mut h = cfg.truncation / n as f64;
    let mut sum = 0.5 * f(Complex64::new(c, 0.0)).re + node_sum(f, c, h, 0.0, 1, n + 1);
    let mut value = sum * h / PI;

    let mut drift = f64::INFINITY;
    for _ in 0..12 {
        let mid = node_sum(f, c, h, 0.5, 0, n);
        sum += mid;
        h *= 0.5;
        n *= 2;
        let fine = sum * h / PI;
        drift = (fine - value).abs();
        value = fine;
        if drift <= cfg.tolerance {
            break;
        }
    }
    if drift > cfg.tolerance {
        return Err(Error::non_convergence("Bromwich node doubling", drift));
    }

    for _ in 0..8 {
        let tail = node_sum(f, c, h, 0.0, n + 1, 2 * n + 1) * h / PI;
        value += tail;
        sum += tail * PI / h;
        n *= 2;
        if tail.abs() <= cfg.tolerance {
            return Ok(BromwichValue { value, error: drift + tail.abs() });
        }
    }
    Err(Error::non_convergence("Bromwich truncation", (value - sum * h / PI).abs().max(cfg.tolerance)))
}
