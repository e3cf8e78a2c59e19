//! Connection and secrecy outage, transmission-count law and secrecy
//! throughput for HARQ-IR over THz wiretap links.

mod mgf;
mod transform;

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::specfun::{ln_gamma, meijer_g_0m_mm, regularized_lower_gamma, upper_incomplete_gamma, ContourConfig};
use crate::thz_channel::PointingFadingParams;

pub use mgf::{log_mgf, mean_information, mgf, rate_function, LargeDeviationContext, MgfConstants, MgfMethod, RateValue};
pub use transform::{round_transform_value, CdfValue};
use transform::{RoundTransform, SamplingRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bob,
    Eve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdfMethod {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecrecyMethod {
    Exact,
    Upper,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LtatMethod {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarqConfig {
    pub max_rounds: usize,
    pub main_rate: f64,
    pub secrecy_rate: f64,
    pub per_round_snr: Vec<f64>,
    pub bob: PointingFadingParams,
    pub eve: PointingFadingParams,
}

impl HarqConfig {
    pub fn uniform(
        max_rounds: usize,
        main_rate: f64,
        secrecy_rate: f64,
        snr: f64,
        bob: PointingFadingParams,
        eve: PointingFadingParams,
    ) -> Self {
        HarqConfig { max_rounds, main_rate, secrecy_rate, per_round_snr: vec![snr; max_rounds], bob, eve }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::config("max_rounds must be at least 1"));
        }
        if !(self.secrecy_rate > 0.0 && self.secrecy_rate < self.main_rate) {
            return Err(Error::config(format!("need 0 < Rs < R0, got Rs={} R0={}", self.secrecy_rate, self.main_rate)));
        }
        if self.per_round_snr.len() != self.max_rounds {
            return Err(Error::config(format!("{} per-round SNRs given for M = {}", self.per_round_snr.len(), self.max_rounds)));
        }
        if self.per_round_snr.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::config("per-round SNRs must be positive and finite"));
        }
        self.bob.validate()?;
        self.eve.validate()
    }

    pub fn is_uniform(&self) -> bool {
        self.per_round_snr.windows(2).all(|w| w[0] == w[1])
    }

    pub fn params(&self, side: Side) -> &PointingFadingParams {
        match side {
            Side::Bob => &self.bob,
            Side::Eve => &self.eve,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzerOptions {
    /// Mellin–Barnes settings for the per-round transform.
    pub inner: ContourConfig,
    pub meijer: ContourConfig,
    pub mgf_method: MgfMethod,
    /// Stop sampling a per-round transform once (|g(t)|/g(c))²·|c|/|t| stays below this.
    pub decay: f64,
    /// Largest Im t sampled.
    pub tau_cap: f64,
    pub exec: Execution,
}

impl Default for AnalyzerOptions {
    fn default() -> Self {
        AnalyzerOptions {
            inner: ContourConfig { tolerance: 1e-9, ..ContourConfig::default() },
            meijer: ContourConfig { tolerance: 1e-9, ..ContourConfig::default() },
            mgf_method: MgfMethod::Quadrature,
            decay: SamplingRule::default().decay,
            tau_cap: SamplingRule::default().tau_cap,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutageReport {
    pub p_co_exact: f64,
    pub p_co_asymptotic: f64,
    pub p_so_exact: f64,
    /// `None` when the per-round SNRs are not uniform.
    pub p_so_upper: Option<f64>,
    pub p_so_approx: Option<f64>,
    pub ltat_exact: f64,
    pub ltat_lower: f64,
    pub expected_rounds: f64,
    pub pmf: Vec<f64>,
}

type TransformKey = (Side, u64, usize, u32);
type CdfKey = (Side, usize, u64);
type LnGridCache = HashMap<(Side, u64), Arc<Vec<f64>>>;

/// Caches that depend only on the channel parameters and per-round SNRs, so
/// analyzers derived for other rates or round limits can share them.
#[derive(Debug, Default)]
struct Shared {
    ln_g: RwLock<LnGridCache>,
    transforms: RwLock<HashMap<TransformKey, Arc<RoundTransform>>>,
    psi: RwLock<HashMap<CdfKey, CdfValue>>,
    asym: RwLock<HashMap<CdfKey, f64>>,
    chernoff: RwLock<HashMap<(usize, u64), f64>>,
    ld: OnceLock<Arc<LargeDeviationContext>>,
}

/// Evaluates every metric for one configuration, caching per-round
/// transforms and CDF values. Readers share the caches; an entry computed
/// twice by racing threads is identical, so last-writer-wins is harmless.
#[derive(Debug)]
pub struct Analyzer {
    cfg: HarqConfig,
    opts: AnalyzerOptions,
    shared: Arc<Shared>,
}

fn cached<K, V, F>(map: &RwLock<HashMap<K, V>>, key: K, f: F) -> Result<V>
where
    K: std::hash::Hash + Eq,
    V: Clone,
    F: FnOnce() -> Result<V>,
{
    if let Some(v) = map.read().expect("cache lock").get(&key) {
        return Ok(v.clone());
    }
    let v = f()?;
    map.write().expect("cache lock").insert(key, v.clone());
    Ok(v)
}

const CLAMP_SLACK: f64 = 1e-9;
const CHERNOFF_LATTICE: f64 = 68_719_476_736.0;

fn clamp_probability(v: f64, error: f64, what: &str) -> Result<f64> {
    let slack = CLAMP_SLACK.max(2.0 * error);
    if v < -slack || v > 1.0 + slack || !v.is_finite() {
        return Err(Error::non_convergence(format!("{what} left [0, 1] (value {v})"), error));
    }
    Ok(v.clamp(0.0, 1.0))
}

impl Analyzer {
    pub fn new(cfg: HarqConfig, opts: AnalyzerOptions) -> Result<Self> {
        cfg.validate()?;
        for side in [Side::Bob, Side::Eve] {
            let mu = cfg.params(side).mu;
            if mu.fract() != 0.0 {
                return Err(Error::domain(format!("analytic outage needs integer μ, got {mu}")));
            }
        }
        Ok(Analyzer { cfg, opts, shared: Arc::default() })
    }

    /// Same channel and SNRs with other rates and round limit, sharing caches.
    /// A different round limit needs uniform per-round SNR.
    pub fn derive(&self, max_rounds: usize, main_rate: f64, secrecy_rate: f64) -> Result<Analyzer> {
        let per_round_snr = if max_rounds == self.cfg.max_rounds {
            self.cfg.per_round_snr.clone()
        } else if self.cfg.is_uniform() {
            vec![self.cfg.per_round_snr[0]; max_rounds]
        } else {
            return Err(Error::config("changing the round limit needs uniform per-round SNR"));
        };
        let cfg = HarqConfig { max_rounds, main_rate, secrecy_rate, per_round_snr, ..self.cfg.clone() };
        cfg.validate()?;
        Ok(Analyzer { cfg, opts: self.opts, shared: self.shared.clone() })
    }

    pub fn config(&self) -> &HarqConfig {
        &self.cfg
    }

    fn sampling(&self) -> SamplingRule {
        SamplingRule { decay: self.opts.decay, tau_cap: self.opts.tau_cap, ..SamplingRule::default() }
    }

    fn ln_g_row(&self, side: Side, rho: f64) -> Result<Arc<Vec<f64>>> {
        cached(&self.shared.ln_g, (side, rho.to_bits()), || {
            let p = self.cfg.params(side);
            let mut row = Vec::with_capacity(transform::ABSCISSA_STEPS);
            for j in 0..transform::ABSCISSA_STEPS {
                let c = transform::abscissa(j);
                let g = round_transform_value(p, rho, num_complex::Complex64::new(c, 0.0), &self.opts.inner)?;
                row.push(g.re.max(f64::MIN_POSITIVE).ln());
            }
            Ok(Arc::new(row))
        })
    }

    fn round_transform(&self, side: Side, rho: f64, j: usize, level: u32) -> Result<Arc<RoundTransform>> {
        cached(&self.shared.transforms, (side, rho.to_bits(), j, level), || {
            let c = transform::abscissa(j);
            let h = transform::step_for(c, level);
            let t = RoundTransform::build(self.cfg.params(side), rho, c, h, &self.sampling(), &self.opts.inner, self.opts.exec)?;
            Ok(Arc::new(t))
        })
    }

    fn check_rounds(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.cfg.max_rounds {
            return Err(Error::domain(format!("round count {m} outside 1..={}", self.cfg.max_rounds)));
        }
        Ok(())
    }

    /// Ψ^m(x) = Pr{I(m) < x} with its error estimate.
    pub fn mi_cdf_detailed(&self, side: Side, m: usize, x: f64) -> Result<CdfValue> {
        self.check_rounds(m)?;
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::domain(format!("rate threshold must be positive, got {x}")));
        }
        cached(&self.shared.psi, (side, m, x.to_bits()), || self.mi_cdf_uncached(side, m, x))
    }

    fn mi_cdf_uncached(&self, side: Side, m: usize, x: f64) -> Result<CdfValue> {
        let p = self.cfg.params(side);
        if m == 1 {
            let value = single_round_cdf(p, self.cfg.per_round_snr[0], x)?;
            Ok(CdfValue { value, error: 1e-14, abscissa: f64::NAN })
        } else {
            let rhos = &self.cfg.per_round_snr[..m];
            let rows = rhos.iter().map(|&r| self.ln_g_row(side, r).map(|a| a.to_vec())).collect::<Result<Vec<_>>>()?;
            let (j, ln_bound) = transform::saddle_index(&rows, x);
            let level = transform::alias_level(ln_bound);
            let mut distinct: Vec<(u64, Arc<RoundTransform>)> = Vec::new();
            for &r in rhos {
                if !distinct.iter().any(|(b, _)| *b == r.to_bits()) {
                    distinct.push((r.to_bits(), self.round_transform(side, r, j, level)?));
                }
            }
            let refs: Vec<&RoundTransform> =
                rhos.iter().map(|r| distinct.iter().find(|(b, _)| *b == r.to_bits()).map(|(_, t)| t.as_ref()).expect("present")).collect();
            let raw = transform::invert(&refs, x)?;
            Ok(CdfValue { value: clamp_probability(raw.value, raw.error, "Bromwich CDF")?, ..raw })
        }
    }

    pub fn mi_cdf(&self, side: Side, m: usize, x: f64) -> Result<f64> {
        Ok(self.mi_cdf_detailed(side, m, x)?.value)
    }

    /// High-SNR expansion Ψ^{m,∞}(x). Not clamped: it may exceed 1 at low SNR.
    pub fn mi_cdf_asymptotic(&self, side: Side, m: usize, x: f64) -> Result<f64> {
        self.check_rounds(m)?;
        cached(&self.shared.asym, (side, m, x.to_bits()), || {
            asymptotic_cdf(self.cfg.params(side), &self.cfg.per_round_snr[..m], x, &self.opts.meijer)
        })
    }

    fn psi_b(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Ok(1.0);
        }
        self.mi_cdf(Side::Bob, m, self.cfg.main_rate)
    }

    fn psi_b_asym(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Ok(1.0);
        }
        Ok(self.mi_cdf_asymptotic(Side::Bob, m, self.cfg.main_rate)?.min(1.0))
    }

    /// Pr{𝓜 = m}, m = 1..M, with Ψ_B^0 = 1.
    pub fn tx_count_pmf(&self) -> Result<Vec<f64>> {
        let big_m = self.cfg.max_rounds;
        let psi = (0..big_m).map(|m| self.psi_b(m)).collect::<Result<Vec<_>>>()?;
        let mut pmf = Vec::with_capacity(big_m);
        for m in 1..big_m {
            pmf.push((psi[m - 1] - psi[m]).max(0.0));
        }
        pmf.push(psi[big_m - 1]);
        Ok(pmf)
    }

    pub fn connection_outage(&self, method: CdfMethod) -> Result<f64> {
        let m = self.cfg.max_rounds;
        match method {
            CdfMethod::Exact => self.psi_b(m),
            CdfMethod::Asymptotic => self.mi_cdf_asymptotic(Side::Bob, m, self.cfg.main_rate),
        }
    }

    pub fn large_deviation_context(&self) -> Result<Arc<LargeDeviationContext>> {
        if let Some(ld) = self.shared.ld.get() {
            return Ok(ld.clone());
        }
        let ld = Arc::new(LargeDeviationContext::new(self.cfg.per_round_snr[0], &self.cfg.eve, self.opts.mgf_method)?);
        Ok(self.shared.ld.get_or_init(|| ld).clone())
    }

    /// e^{−m𝓘((R0 − Rs)/m)}.
    pub fn chernoff_ccdf(&self, m: usize) -> Result<f64> {
        // snap to a 2^-36 lattice so rate pairs with the same gap share one entry
        let q = ((self.cfg.main_rate - self.cfg.secrecy_rate) / m as f64 * CHERNOFF_LATTICE).round();
        let r = q / CHERNOFF_LATTICE;
        cached(&self.shared.chernoff, (m, r.to_bits()), || {
            let ld = self.large_deviation_context()?;
            Ok((-(m as f64) * rate_function(r, &ld)?.rate).exp())
        })
    }

    fn eve_ccdf(&self, m: usize) -> Result<f64> {
        Ok(1.0 - self.mi_cdf(Side::Eve, m, self.cfg.main_rate - self.cfg.secrecy_rate)?)
    }

    pub fn secrecy_outage(&self, method: SecrecyMethod) -> Result<f64> {
        let big_m = self.cfg.max_rounds;
        if method != SecrecyMethod::Exact && !self.cfg.is_uniform() {
            return Err(Error::config("secrecy upper bound and approximation need uniform per-round SNR"));
        }
        if method == SecrecyMethod::Exact || big_m == 1 {
            let pmf = self.tx_count_pmf()?;
            let mut acc = 0.0;
            for (i, w) in pmf.iter().enumerate() {
                acc += w * self.eve_ccdf(i + 1)?;
            }
            return Ok(acc.clamp(0.0, 1.0));
        }
        let weights: Vec<f64> = match method {
            SecrecyMethod::Upper => self.tx_count_pmf()?,
            _ => {
                let mut w = vec![1.0 - self.psi_b(1)?];
                for m in 2..big_m {
                    w.push(self.psi_b_asym(m - 1)? - self.psi_b_asym(m)?);
                }
                w.push(self.psi_b_asym(big_m - 1)?);
                w
            }
        };
        let mut acc = weights[0] * self.eve_ccdf(1)?;
        for (i, w) in weights.iter().enumerate().skip(1) {
            acc += w * self.chernoff_ccdf(i + 1)?;
        }
        Ok(acc.clamp(0.0, 1.0))
    }

    /// (η, E[𝓜]).
    pub fn ltat(&self, method: LtatMethod) -> Result<(f64, f64)> {
        let big_m = self.cfg.max_rounds;
        let psi = |m: usize| match method {
            LtatMethod::Exact => self.psi_b(m),
            LtatMethod::LowerBound => self.psi_b_asym(m),
        };
        let mut expected = 1.0;
        for m in 1..big_m {
            expected += psi(m)?;
        }
        let eta = self.cfg.secrecy_rate * (1.0 - psi(big_m)?) / expected;
        Ok((eta, expected))
    }

    pub fn report(&self) -> Result<OutageReport> {
        let (ltat_exact, expected_rounds) = self.ltat(LtatMethod::Exact)?;
        let uniform = self.cfg.is_uniform();
        Ok(OutageReport {
            p_co_exact: self.connection_outage(CdfMethod::Exact)?,
            p_co_asymptotic: self.connection_outage(CdfMethod::Asymptotic)?.min(1.0),
            p_so_exact: self.secrecy_outage(SecrecyMethod::Exact)?,
            p_so_upper: if uniform { Some(self.secrecy_outage(SecrecyMethod::Upper)?) } else { None },
            p_so_approx: if uniform { Some(self.secrecy_outage(SecrecyMethod::Approx)?) } else { None },
            ltat_exact,
            ltat_lower: self.ltat(LtatMethod::LowerBound)?.0,
            expected_rounds,
            pmf: self.tx_count_pmf()?,
        })
    }
}

/// Single-round CDF Pr{log2(1 + ρ h_l² |h_pf|²) < x}.
///
/// With v = √((2^x − 1)/ρ)/(h_l S ĥ) and w = μ v^α,
/// Ψ^1(x) = P(μ, w) + v^φ μ^{φ/α} Γ(μ − φ/α, w)/Γ(μ),
/// a sum of non-negative terms.
pub fn single_round_cdf(p: &PointingFadingParams, rho: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("rate threshold must be positive, got {x}")));
    }
    let v = ((x * LN_2).exp_m1() / rho).sqrt() / (p.h_l * p.scale());
    let w = p.mu * v.powf(p.alpha);
    let head = regularized_lower_gamma(p.mu, w)?;
    if w > 700.0 {
        return Ok(head.min(1.0));
    }
    let k = p.mu - p.phi / p.alpha;
    let tail = (p.phi * v.ln() + p.phi / p.alpha * p.mu.ln() - ln_gamma(p.mu)).exp() * upper_incomplete_gamma(k, w)?;
    clamp_probability(head + tail, 1e-12, "single-round CDF")
}

/// The finite incomplete-gamma sum form of the single-round CDF for integer μ,
/// with the SNR threshold 2^x − 1.
pub fn single_round_cdf_series(p: &PointingFadingParams, rho: f64, x: f64) -> Result<f64> {
    if p.mu.fract() != 0.0 || p.mu < 1.0 {
        return Err(Error::domain(format!("series form needs a positive integer μ, got {}", p.mu)));
    }
    let y = (x * LN_2).exp_m1();
    let v = (y / rho).sqrt() / (p.h_l * p.scale());
    let w = p.mu * v.powf(p.alpha);
    let pref = p.phi * p.mu.powf(p.phi / p.alpha) * v.powf(p.phi) / p.alpha;
    let mut sum = 0.0;
    let mut fact = 1.0;
    for n in 0..p.mu as usize {
        if n > 0 {
            fact *= n as f64;
        }
        sum += upper_incomplete_gamma((p.alpha * n as f64 - p.phi) / p.alpha, w)? / fact;
    }
    Ok(1.0 - pref * sum)
}

/// Ψ^{m,∞}(x) for the rounds with SNRs `rhos`.
pub fn asymptotic_cdf(p: &PointingFadingParams, rhos: &[f64], x: f64, meijer: &ContourConfig) -> Result<f64> {
    let am = p.alpha * p.mu;
    if ((am - p.phi) / p.phi).abs() < 1e-12 {
        return Err(Error::Degenerate(format!("αμ = φ = {}; perturb μ by a relative 1e-6 to use the high-SNR expansion", p.phi)));
    }
    if !(x > 0.0) {
        return Err(Error::domain(format!("rate threshold must be positive, got {x}")));
    }
    let m = rhos.len();
    let theta = am.min(p.phi);
    let big_theta = am.max(p.phi);
    let ln_a = big_theta.ln() + (theta / p.alpha - 1.0) * p.mu.ln() + ln_gamma(theta / 2.0 + 1.0) + ln_gamma((am - theta) / p.alpha + 1.0)
        - (am - p.phi).abs().ln()
        - theta * (p.h_l * p.scale()).ln()
        - ln_gamma(p.mu);
    let g = meijer_g_0m_mm(theta / 2.0, m, (x * LN_2).exp(), meijer)?;
    if g == 0.0 {
        return Ok(0.0);
    }
    let ln_rho: f64 = rhos.iter().map(|r| r.ln()).sum();
    Ok((m as f64 * ln_a + g.ln() - theta / 2.0 * ln_rho).exp())
}

#[cfg(test)]
mod tests;
