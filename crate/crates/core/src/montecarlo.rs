//! Episode-level HARQ-IR wiretap simulator.
//!
//! Episodes are grouped into fixed blocks of [`BLOCK`] episodes; block `b`
//! draws from ChaCha8 stream `b` under the master seed. Tallies are integers,
//! so the estimates are bit-identical for any worker count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::outage::HarqConfig;
use crate::par::{self, Execution};
use crate::quad::{integrate, Tolerance};
use crate::thz_channel::{pf_density, ChannelSampler, PointingFadingParams};

pub const BLOCK: u64 = 1 << 14;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpisodeOutcome {
    pub rounds_used: usize,
    pub bob_decoded: bool,
    pub eve_intercepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub half_width_95: f64,
    pub n: u64,
}

impl EstimateWithCI {
    fn proportion(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        EstimateWithCI { point: p, half_width_95: Z95 * (p * (1.0 - p) / n as f64).sqrt(), n }
    }

    /// Standard error implied by the 95% half width.
    pub fn std_error(&self) -> f64 {
        self.half_width_95 / Z95
    }

    /// |value − point| in standard errors, with a floor of one count on the
    /// error so that zero-variance estimates compare sensibly.
    pub fn z_score(&self, value: f64) -> f64 {
        let se = self.std_error().max(1.0 / self.n as f64);
        (value - self.point).abs() / se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub p_co: EstimateWithCI,
    pub p_so: EstimateWithCI,
    pub ltat: EstimateWithCI,
    /// Fraction of episodes that used m rounds, m = 1..M.
    pub pmf: Vec<f64>,
    pub episodes: u64,
}

/// Per-round SNR-scaled path gains, precomputed for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: HarqConfig,
    bob: ChannelSampler,
    eve: ChannelSampler,
    bob_gain: Vec<f64>,
    eve_gain: Vec<f64>,
}

impl Simulator {
    pub fn new(cfg: &HarqConfig) -> Result<Self> {
        cfg.validate()?;
        let gains = |p: &PointingFadingParams| cfg.per_round_snr.iter().map(|r| r * p.h_l * p.h_l).collect();
        Ok(Simulator {
            cfg: cfg.clone(),
            bob: ChannelSampler::new(&cfg.bob)?,
            eve: ChannelSampler::new(&cfg.eve)?,
            bob_gain: gains(&cfg.bob),
            eve_gain: gains(&cfg.eve),
        })
    }

    /// One HARQ cycle: fresh fading per round for both receivers, stop at
    /// Bob's first success or after M rounds; Eve is judged at the stopping round.
    pub fn run_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> EpisodeOutcome {
        let (mut i_b, mut i_e) = (0.0, 0.0);
        let mut rounds = 0;
        let mut decoded = false;
        for m in 0..self.cfg.max_rounds {
            let hb = self.bob.sample(rng);
            let he = self.eve.sample(rng);
            i_b += (self.bob_gain[m] * hb * hb).ln_1p() / std::f64::consts::LN_2;
            i_e += (self.eve_gain[m] * he * he).ln_1p() / std::f64::consts::LN_2;
            rounds = m + 1;
            if i_b >= self.cfg.main_rate {
                decoded = true;
                break;
            }
        }
        EpisodeOutcome { rounds_used: rounds, bob_decoded: decoded, eve_intercepted: i_e > self.cfg.main_rate - self.cfg.secrecy_rate }
    }
}

pub fn run_episode<R: Rng + ?Sized>(cfg: &HarqConfig, rng: &mut R) -> Result<EpisodeOutcome> {
    Ok(Simulator::new(cfg)?.run_episode(rng))
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn blocks(n: u64) -> usize {
    n.div_ceil(BLOCK) as usize
}

fn block_len(n: u64, b: usize) -> u64 {
    BLOCK.min(n - b as u64 * BLOCK)
}

#[derive(Debug, Clone, Default)]
struct Tally {
    failed: u64,
    intercepted: u64,
    succeeded_rounds: u64,
    rounds: u64,
    rounds_sq: u64,
    per_round: Vec<u64>,
}

impl Tally {
    fn add(&mut self, o: &EpisodeOutcome) {
        let r = o.rounds_used as u64;
        self.failed += u64::from(!o.bob_decoded);
        self.intercepted += u64::from(o.eve_intercepted);
        self.rounds += r;
        self.rounds_sq += r * r;
        if o.bob_decoded {
            self.succeeded_rounds += r;
        }
        self.per_round[o.rounds_used - 1] += 1;
    }

    fn merge(mut self, other: &Tally) -> Tally {
        self.failed += other.failed;
        self.intercepted += other.intercepted;
        self.succeeded_rounds += other.succeeded_rounds;
        self.rounds += other.rounds;
        self.rounds_sq += other.rounds_sq;
        for (a, b) in self.per_round.iter_mut().zip(&other.per_round) {
            *a += b;
        }
        self
    }
}

fn simulate_block(sim: &Simulator, seed: u64, b: usize, len: u64, log: bool) -> (Tally, Vec<EpisodeOutcome>) {
    let mut rng = block_rng(seed, b as u64);
    let mut t = Tally { per_round: vec![0; sim.cfg.max_rounds], ..Tally::default() };
    let mut outcomes = Vec::new();
    for _ in 0..len {
        let o = sim.run_episode(&mut rng);
        t.add(&o);
        if log {
            outcomes.push(o);
        }
    }
    (t, outcomes)
}

fn summarize(cfg: &HarqConfig, t: &Tally, n: u64) -> EmpiricalReport {
    let nf = n as f64;
    let successes = n - t.failed;
    // renewal-reward ratio ā/b̄ with a = Rs·1{success}, b = rounds
    let a_bar = cfg.secrecy_rate * successes as f64 / nf;
    let b_bar = t.rounds as f64 / nf;
    let eta = a_bar / b_bar;
    // Var(a − ηb) from the integer moments
    let rs = cfg.secrecy_rate;
    let e_a2 = rs * rs * successes as f64 / nf;
    let e_ab = rs * t.succeeded_rounds as f64 / nf;
    let e_b2 = t.rounds_sq as f64 / nf;
    let var = (e_a2 - 2.0 * eta * e_ab + eta * eta * e_b2).max(0.0);
    EmpiricalReport {
        p_co: EstimateWithCI::proportion(t.failed, n),
        p_so: EstimateWithCI::proportion(t.intercepted, n),
        ltat: EstimateWithCI { point: eta, half_width_95: Z95 * (var / nf).sqrt() / b_bar, n },
        pmf: t.per_round.iter().map(|&c| c as f64 / nf).collect(),
        episodes: n,
    }
}

fn run(cfg: &HarqConfig, episodes: u64, seed: u64, exec: Execution, log: bool) -> Result<(EmpiricalReport, Vec<EpisodeOutcome>)> {
    if episodes == 0 {
        return Err(Error::config("need at least one episode"));
    }
    let sim = Simulator::new(cfg)?;
    let parts = par::map_range(exec, blocks(episodes), |b| simulate_block(&sim, seed, b, block_len(episodes, b), log));
    let empty = Tally { per_round: vec![0; cfg.max_rounds], ..Tally::default() };
    let total = parts.iter().fold(empty, |acc, (t, _)| acc.merge(t));
    let outcomes = if log { parts.into_iter().flat_map(|(_, o)| o).collect() } else { Vec::new() };
    Ok((summarize(cfg, &total, episodes), outcomes))
}

/// Empirical P_co, P_so and LTAT with 95% normal-approximation intervals.
pub fn estimate_metrics(cfg: &HarqConfig, episodes: u64, seed: u64, exec: Execution) -> Result<EmpiricalReport> {
    Ok(run(cfg, episodes, seed, exec, false)?.0)
}

/// As [`estimate_metrics`], also returning every episode in order.
pub fn estimate_with_log(cfg: &HarqConfig, episodes: u64, seed: u64, exec: Execution) -> Result<(EmpiricalReport, Vec<EpisodeOutcome>)> {
    run(cfg, episodes, seed, exec, true)
}

pub fn write_episode_log<W: Write>(mut w: W, outcomes: &[EpisodeOutcome]) -> Result<()> {
    writeln!(w, "episode_id,rounds_used,bob_decoded,eve_intercepted")?;
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(w, "{i},{},{},{}", o.rounds_used, u8::from(o.bob_decoded), u8::from(o.eve_intercepted))?;
    }
    Ok(())
}

/// Empirical Pr{I(m) < x}, m = 1..rounds, from `draws` independent
/// accumulations at per-round SNR `rho`.
pub fn mi_cdf_empirical(
    p: &PointingFadingParams,
    rho: f64,
    rounds: usize,
    x: f64,
    draws: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<EstimateWithCI>> {
    if rounds == 0 || draws == 0 {
        return Err(Error::domain("need at least one round and one draw"));
    }
    let sampler = ChannelSampler::new(p)?;
    let gain = rho * p.h_l * p.h_l;
    let counts = par::map_range(exec, blocks(draws), |b| {
        let mut rng = block_rng(seed, b as u64);
        let mut below = vec![0u64; rounds];
        for _ in 0..block_len(draws, b) {
            let mut acc = 0.0;
            for slot in below.iter_mut() {
                let h = sampler.sample(&mut rng);
                acc += (gain * h * h).ln_1p() / std::f64::consts::LN_2;
                *slot += u64::from(acc < x);
            }
        }
        below
    });
    let mut total = vec![0u64; rounds];
    for c in &counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|k| EstimateWithCI::proportion(k, draws)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Asymptotic Kolmogorov p-value with Stephens' finite-n correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut q = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        q += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * q).clamp(0.0, 1.0)
}

/// Two-sided KS test of `n` sampled |h_pf| against the law of `reference`,
/// whose CDF is built by integrating the density between sorted samples.
/// Sampling uses `sampled`, so a mismatch between the two is a negative control.
pub fn validate_sampler_against(sampled: &PointingFadingParams, reference: &PointingFadingParams, n: usize, seed: u64) -> Result<KsResult> {
    if n == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    reference.validate()?;
    let sampler = ChannelSampler::new(sampled)?;
    let mut rng = block_rng(seed, 0);
    let mut xs: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    let tol = Tolerance::new(1e-13, 1e-10);
    let density = |t: f64| pf_density(t, reference).unwrap_or(0.0);
    let mut cdf = 0.0;
    let mut prev = 0.0;
    let mut d = 0.0f64;
    let nf = n as f64;
    for (i, &x) in xs.iter().enumerate() {
        if x > prev {
            cdf += integrate(density, prev, x, tol)?.value;
            prev = x;
        }
        let f = cdf.min(1.0);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n), n })
}

pub fn validate_sampler(p: &PointingFadingParams, n: usize, seed: u64) -> Result<KsResult> {
    validate_sampler_against(p, p, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bob() -> PointingFadingParams {
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

    fn cfg(m: usize, snr_db: f64) -> HarqConfig {
        let eve = PointingFadingParams { h_l: 0.382_684_353_006_135_805, ..bob() };
        HarqConfig::uniform(m, 3.0, 2.0, 10f64.powf(snr_db / 10.0), bob(), eve)
    }

    #[test]
    fn ks_p_value_reference_points() {
        // Kolmogorov tail Q(λ): Q(1.36) ≈ 0.0494, Q(1.63) ≈ 0.0098
        let n = 1_000_000;
        let d = |lambda: f64| lambda / (n as f64).sqrt();
        assert!((ks_p_value(d(1.358), n) - 0.05).abs() < 1e-3);
        assert!((ks_p_value(d(1.628), n) - 0.01).abs() < 5e-4);
        assert_eq!(ks_p_value(0.0, n), 1.0);
    }

    #[test]
    fn episodes_respect_protocol() {
        let sim = Simulator::new(&cfg(4, 40.0)).unwrap();
        let mut rng = block_rng(1, 0);
        for _ in 0..10_000 {
            let o = sim.run_episode(&mut rng);
            assert!((1..=4).contains(&o.rounds_used));
            if !o.bob_decoded {
                assert_eq!(o.rounds_used, 4);
            }
        }
    }

    #[test]
    fn extreme_rates_and_snr() {
        let mut easy = cfg(3, 50.0);
        easy.main_rate = 1e-9;
        easy.secrecy_rate = 5e-10;
        let r = estimate_metrics(&easy, 20_000, 3, Execution::Sequential).unwrap();
        assert_eq!(r.pmf[0], 1.0);
        assert_eq!(r.p_co.point, 0.0);

        let hard = cfg(3, -200.0);
        let r = estimate_metrics(&hard, 20_000, 3, Execution::Sequential).unwrap();
        assert_eq!(r.p_co.point, 1.0);
        assert_eq!(r.pmf[2], 1.0);
        assert_eq!(r.ltat.point, 0.0);
    }

    #[test]
    fn worker_independent_and_reproducible() {
        let c = cfg(3, 45.0);
        let a = estimate_metrics(&c, 50_000, 11, Execution::Sequential).unwrap();
        let b = estimate_metrics(&c, 50_000, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let other = estimate_metrics(&c, 50_000, 12, Execution::Sequential).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn log_reproduces_estimates() {
        let c = cfg(3, 45.0);
        let (r, log) = estimate_with_log(&c, 40_000, 5, Execution::default()).unwrap();
        let failed = log.iter().filter(|o| !o.bob_decoded).count() as f64 / log.len() as f64;
        let rounds: usize = log.iter().map(|o| o.rounds_used).sum();
        let wins = log.iter().filter(|o| o.bob_decoded).count() as f64;
        assert_eq!(failed, r.p_co.point);
        assert!((c.secrecy_rate * wins / rounds as f64 - r.ltat.point).abs() < 1e-15);
        assert!(r.ltat.point <= c.secrecy_rate);
        let mut buf = Vec::new();
        write_episode_log(&mut buf, &log[..2]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("episode_id,rounds_used,bob_decoded,eve_intercepted\n0,"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn sampler_passes_and_negative_control_fails() {
        let ok = validate_sampler(&bob(), 20_000, 9).unwrap();
        assert!(ok.p_value > 0.01, "{ok:?}");
        let wrong = PointingFadingParams { phi: 2.0 * bob().phi, ..bob() };
        let bad = validate_sampler_against(&wrong, &bob(), 20_000, 9).unwrap();
        assert!(bad.p_value < 1e-6, "{bad:?}");
    }
}
