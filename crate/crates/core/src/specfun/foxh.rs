//! Fox H function by numerical Mellin–Barnes integration.
//!
//! H^{m,n}_{p,q}[z] = (1/2πi) ∫_L Θ(s) z^{-s} ds with
//!
//! Θ(s) = Π_{j≤m} Γ(b_j + B_j s) Π_{j≤n} Γ(1 − a_j − A_j s)
//!        / (Π_{j>m} Γ(1 − b_j − B_j s) Π_{j>n} Γ(a_j + A_j s)).
//!
//! L must keep the poles of the first product ("left" poles) on its left and
//! those of the second ("right" poles) on its right. The integral is taken on
//! a vertical line Re s = γ; when no vertical line separates the families, the
//! finitely many poles on the wrong side are accounted for by residues, each
//! computed on a small circle. All gamma products are formed in log space.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::gamma::ln_gamma_c;
use crate::error::{Error, Result};

/// Parameters of a Fox H function. `a`/`b` may be complex (the per-round
/// transform carries the Laplace variable in one of them); `A`/`B` are real
/// and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FoxHSpec {
    pub upper: Vec<(Complex64, f64)>,
    pub lower: Vec<(Complex64, f64)>,
    pub m: usize,
    pub n: usize,
}

impl FoxHSpec {
    pub fn new(upper: Vec<(Complex64, f64)>, lower: Vec<(Complex64, f64)>, m: usize, n: usize) -> Result<Self> {
        if m > lower.len() || n > upper.len() {
            return Err(Error::domain(format!("H^{{{m},{n}}}_{{{},{}}}: need m ≤ q and n ≤ p", upper.len(), lower.len())));
        }
        if upper.iter().chain(lower.iter()).any(|&(_, w)| !(w > 0.0)) {
            return Err(Error::domain("Fox H scale parameters must be positive"));
        }
        Ok(FoxHSpec { upper, lower, m, n })
    }

    /// Convenience constructor for real parameter pairs.
    pub fn real(upper: &[(f64, f64)], lower: &[(f64, f64)], m: usize, n: usize) -> Result<Self> {
        let c = |v: &[(f64, f64)]| v.iter().map(|&(a, w)| (Complex64::new(a, 0.0), w)).collect();
        Self::new(c(upper), c(lower), m, n)
    }

    /// log Θ(s) − s ln z.
    fn ln_integrand(&self, s: Complex64, ln_z: f64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let mut acc = -s * ln_z;
        for (j, &(b, w)) in self.lower.iter().enumerate() {
            if j < self.m {
                acc += ln_gamma_c(b + s * w);
            } else {
                acc -= ln_gamma_c(one - b - s * w);
            }
        }
        for (j, &(a, w)) in self.upper.iter().enumerate() {
            if j < self.n {
                acc += ln_gamma_c(one - a - s * w);
            } else {
                acc -= ln_gamma_c(a + s * w);
            }
        }
        acc
    }

    /// First pole of each left family: s = −b/B, then moving left by 1/B.
    fn left_families(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        self.lower[..self.m].iter().map(|&(b, w)| (-b / w, 1.0 / w))
    }

    /// First pole of each right family: s = (1 − a)/A, then moving right by 1/A.
    fn right_families(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        self.upper[..self.n].iter().map(|&(a, w)| ((1.0 - a) / w, 1.0 / w))
    }

    /// Left poles right of the line and right poles left of it.
    fn misplaced(&self, gamma0: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut left = Vec::new();
        for (p0, step) in self.left_families() {
            let mut p = p0;
            while p.re > gamma0 {
                left.push(p);
                p -= step;
            }
        }
        let mut right = Vec::new();
        for (p0, step) in self.right_families() {
            let mut p = p0;
            while p.re < gamma0 {
                right.push(p);
                p += step;
            }
        }
        (left, right)
    }

    fn poles_in(&self, lo: f64, hi: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut left = Vec::new();
        for (p0, step) in self.left_families() {
            let mut k = 0.0;
            loop {
                let p = p0 - k * step;
                if p.re < lo {
                    break;
                }
                if p.re <= hi {
                    left.push(p);
                }
                k += 1.0;
            }
        }
        let mut right = Vec::new();
        for (p0, step) in self.right_families() {
            let mut k = 0.0;
            loop {
                let p = p0 + k * step;
                if p.re > hi {
                    break;
                }
                if p.re >= lo {
                    right.push(p);
                }
                k += 1.0;
            }
        }
        (left, right)
    }
}

/// Contour quadrature settings shared by the Mellin–Barnes and Bromwich
/// integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConfig {
    /// Real part of the integration line; `None` lets the Mellin–Barnes
    /// integrator place it between the pole families.
    pub abscissa: Option<f64>,
    /// Largest |Im| visited on the line.
    pub truncation: f64,
    /// Minimum node count over the visited window.
    pub nodes: usize,
    pub tolerance: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { abscissa: None, truncation: 400.0, nodes: 64, tolerance: 1e-10 }
    }
}

impl ContourConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.truncation > 0.0) {
            return Err(Error::config("contour truncation must be positive"));
        }
        if self.nodes < 64 {
            return Err(Error::config("contour needs at least 64 nodes"));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            return Err(Error::config("contour tolerance must lie in (0, 1e-2]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContourValue {
    pub value: Complex64,
    /// Estimated absolute error (node doubling plus tail bound).
    pub error: f64,
    pub abscissa: f64,
}

const POLE_MERGE: f64 = 1e-9;
const TAIL_LOG_DROP: f64 = 38.0;
const ROUNDOFF_FACTOR: f64 = 64.0;

fn choose_abscissa(spec: &FoxHSpec) -> Result<f64> {
    let max_left = spec.left_families().map(|(p, _)| p.re).fold(f64::NEG_INFINITY, f64::max);
    let min_right = spec.right_families().map(|(p, _)| p.re).fold(f64::INFINITY, f64::min);
    if max_left < min_right {
        return Ok(match (max_left.is_finite(), min_right.is_finite()) {
            (true, true) => 0.5 * (max_left + min_right),
            (true, false) => max_left + 0.5,
            (false, true) => min_right - 0.5,
            (false, false) => 0.0,
        });
    }
    // interleaved families: pick the gap with the fewest poles on the wrong side
    let lo = min_right - 1.0;
    let hi = max_left + 1.0;
    let (left, right) = spec.poles_in(lo, hi);
    let mut reals: Vec<f64> = left.iter().chain(right.iter()).map(|p| p.re).collect();
    reals.sort_by(f64::total_cmp);
    reals.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut best: Option<(usize, f64, f64)> = None;
    for w in reals.windows(2) {
        let gap = w[1] - w[0];
        if gap < 1e-6 {
            continue;
        }
        let g = 0.5 * (w[0] + w[1]);
        let wrong = left.iter().filter(|p| p.re > g).count() + right.iter().filter(|p| p.re < g).count();
        let better = match best {
            None => true,
            Some((bw, bgap, _)) => wrong < bw || (wrong == bw && gap > bgap),
        };
        if better {
            best = Some((wrong, gap, g));
        }
    }
    best.map(|b| b.2).ok_or_else(|| Error::ContourSeparation("no usable gap between pole real parts".into()))
}

fn residue_on_circle<F: Fn(Complex64) -> Complex64>(f: &F, centre: Complex64, radius: f64) -> Complex64 {
    const N: usize = 64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..N {
        let e = Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / N as f64);
        acc += f(centre + e * radius) * e;
    }
    acc * (radius / N as f64)
}

/// Trapezoid sums over y ≥ 0 and y < 0 on the line, marching outward until
/// the integrand has decayed by e^{-TAIL_LOG_DROP} relative to its peak.
struct LineSum {
    sum: Complex64,
    /// Σ|terms|·h, the roundoff scale of `sum`.
    mass: f64,
    tail: f64,
}

fn line_sum<F: Fn(f64) -> Complex64>(f: &F, h: f64, offset: f64, cfg: &ContourConfig) -> LineSum {
    // nodes at y = offset + k h, k ∈ ℤ
    let stretch = 3.0f64.max(4.0 * h);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    let mut peak = f64::NEG_INFINITY;
    let mut tail = 0.0f64;
    for dir in [1.0, -1.0] {
        let mut k: i64 = if dir > 0.0 { 0 } else { -1 };
        let mut quiet_since: Option<f64> = None;
        loop {
            let y = offset + k as f64 * h;
            if y.abs() > cfg.truncation {
                let last = f(y.signum() * cfg.truncation).norm();
                tail = tail.max(last * cfg.truncation);
                break;
            }
            let v = f(y);
            let mag = v.norm();
            if mag.is_finite() {
                sum += v;
                mass += mag;
            }
            let lm = mag.ln();
            if lm > peak {
                peak = lm;
            }
            if lm < peak - TAIL_LOG_DROP || mag == 0.0 {
                let start = *quiet_since.get_or_insert(y);
                if (y - start).abs() >= stretch {
                    break;
                }
            } else {
                quiet_since = None;
            }
            k += if dir > 0.0 { 1 } else { -1 };
        }
    }
    LineSum { sum: sum * h, mass: mass * h, tail }
}

/// Fox H value with an extra complex log-scale folded into the integrand
/// before exponentiation (used when the value itself would under/overflow).
pub fn fox_h_scaled(spec: &FoxHSpec, z: f64, ln_scale: Complex64, cfg: &ContourConfig) -> Result<ContourValue> {
    if !(z > 0.0) {
        return Err(Error::domain(format!("Fox H argument must be positive, got {z}")));
    }
    cfg.validate()?;
    let ln_z = z.ln();
    let gamma0 = match cfg.abscissa {
        Some(g) => g,
        None => choose_abscissa(spec)?,
    };
    let integrand = |s: Complex64| (spec.ln_integrand(s, ln_z) + ln_scale).exp();

    // poles near the line decide the step and the residue corrections
    let window = 6.0;
    let (left, right) = spec.poles_in(gamma0 - window, gamma0 + window);
    for l in &left {
        if right.iter().any(|r| (r - l).norm() < POLE_MERGE) {
            return Err(Error::ContourSeparation(format!("left and right poles coincide at {l}")));
        }
    }
    let all: Vec<Complex64> = left.iter().chain(right.iter()).copied().collect();
    let dist = all.iter().map(|p| (p.re - gamma0).abs()).fold(1.0f64, f64::min);
    if dist < 1e-6 {
        return Err(Error::ContourSeparation(format!("pole on the line Re s = {gamma0}")));
    }

    let (misplaced_left, misplaced_right) = spec.misplaced(gamma0);
    let mut correction = Complex64::new(0.0, 0.0);
    let mut done: Vec<Complex64> = Vec::new();
    for (poles, sign) in [(&misplaced_left, 1.0), (&misplaced_right, -1.0)] {
        for &p in poles.iter() {
            if done.iter().any(|d| (d - p).norm() < POLE_MERGE) {
                continue;
            }
            done.push(p);
            let (nl, nr) = spec.poles_in(p.re - 2.0, p.re + 2.0);
            let others = nl.iter().chain(nr.iter()).map(|q| (q - p).norm()).filter(|&d| d >= POLE_MERGE).fold(0.5f64, f64::min);
            correction += residue_on_circle(&integrand, p, 0.5 * others) * sign;
        }
    }

    let on_line = |y: f64| integrand(Complex64::new(gamma0, y));
    let mut h = (0.4 * dist).min(32.0 / cfg.nodes as f64);
    let mut coarse = line_sum(&on_line, h, 0.0, cfg);
    let mut last_drift = f64::INFINITY;
    for _ in 0..8 {
        let mid = line_sum(&on_line, h, 0.5 * h, cfg);
        let fine = (coarse.sum + mid.sum) * 0.5;
        let drift = (fine - coarse.sum).norm() / (2.0 * PI);
        let value = fine / (2.0 * PI) + correction;
        let tail = coarse.tail.max(mid.tail) / (2.0 * PI);
        let scale = value.norm().max(f64::MIN_POSITIVE);
        // cancellation on the line puts a floor under the attainable error
        let floor = ROUNDOFF_FACTOR * f64::EPSILON * (coarse.mass + mid.mass) / (2.0 * PI);
        let target = (cfg.tolerance * scale).max(floor);
        if drift <= target && tail <= target {
            return Ok(ContourValue { value, error: drift + tail, abscissa: gamma0 });
        }
        if tail > target {
            return Err(Error::non_convergence("Mellin–Barnes line truncation", tail / scale));
        }
        last_drift = drift / scale;
        h *= 0.5;
        coarse = LineSum { sum: fine, mass: 0.5 * (coarse.mass + mid.mass), tail: coarse.tail.max(mid.tail) };
    }
    Err(Error::non_convergence("Mellin–Barnes node doubling", last_drift))
}

/// H^{m,n}_{p,q}[z] on the straight-line contour.
pub fn fox_h(spec: &FoxHSpec, z: f64, cfg: &ContourConfig) -> Result<Complex64> {
    fox_h_scaled(spec, z, Complex64::new(0.0, 0.0), cfg).map(|v| v.value)
}
