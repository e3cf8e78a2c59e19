//! Robust rate adaptation: choose (R0, Rs) to maximize the exact secrecy
//! throughput while the high-SNR connection outage and the approximate
//! secrecy outage stay under their ceilings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outage::{Analyzer, CdfMethod, HarqConfig, LtatMethod, SecrecyMethod};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstraints {
    pub eps_c: f64,
    pub eps_e: f64,
}

impl RateConstraints {
    /// Ceilings in (0, 1]; a ceiling of 1 switches that constraint off.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_c", self.eps_c), ("eps_e", self.eps_e)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Coarse lattice over 0 < Rs < R0 ≤ r0_max followed by `passes` local
/// refinements, each dividing the step by `shrink`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchGrid {
    pub r0_max: f64,
    pub step: f64,
    pub passes: u32,
    pub shrink: u32,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid { r0_max: 12.0, step: 0.25, passes: 3, shrink: 4 }
    }
}

impl SearchGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.r0_max >= 2.0 * self.step) || self.shrink < 2 {
            return Err(Error::config(format!("degenerate search grid {self:?}")));
        }
        Ok(())
    }

    /// Step of the last refinement pass.
    pub fn final_step(&self) -> f64 {
        self.step / f64::from(self.shrink).powi(self.passes as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub slack_c: f64,
    pub slack_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub r0_star: f64,
    pub rs_star: f64,
    pub eta_star: f64,
    pub slack_c: f64,
    pub slack_e: f64,
    pub feasible: bool,
    pub evaluations: usize,
    /// Candidates dropped because an evaluation failed.
    pub skipped: usize,
}

/// slack_c = ε_c − P_co^∞ and slack_e = ε_e − P_so^approx at (r0, rs).
pub fn check_feasibility(base: &Analyzer, r0: f64, rs: f64, c: &RateConstraints) -> Result<Feasibility> {
    if !(rs > 0.0 && rs < r0) {
        return Err(Error::domain(format!("need 0 < Rs < R0, got R0={r0}, Rs={rs}")));
    }
    let a = base.derive(base.config().max_rounds, r0, rs)?;
    let p_co = a.connection_outage(CdfMethod::Asymptotic)?.min(1.0);
    let p_so = a.secrecy_outage(SecrecyMethod::Approx)?;
    let slack_c = c.eps_c - p_co;
    let slack_e = c.eps_e - p_so;
    Ok(Feasibility { feasible: slack_c >= 0.0 && slack_e >= 0.0, slack_c, slack_e })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    r0: f64,
    rs: f64,
    f: Feasibility,
    eta: f64,
}

impl Candidate {
    fn violation(&self) -> f64 {
        (-self.f.slack_c).max(-self.f.slack_e)
    }

    /// Larger η, then smaller R0, then larger Rs; infeasible points rank by
    /// smallest violation and only below feasible ones.
    fn better_than(&self, other: &Candidate) -> bool {
        match (self.f.feasible, other.f.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => {
                if self.eta != other.eta {
                    return self.eta > other.eta;
                }
                if self.r0 != other.r0 {
                    return self.r0 < other.r0;
                }
                self.rs > other.rs
            }
            (false, false) => self.violation() < other.violation(),
        }
    }
}

fn evaluate(base: &Analyzer, r0: f64, rs: f64, c: &RateConstraints) -> Result<Candidate> {
    let f = check_feasibility(base, r0, rs, c)?;
    let eta = if f.feasible { base.derive(base.config().max_rounds, r0, rs)?.ltat(LtatMethod::Exact)?.0 } else { f64::NEG_INFINITY };
    Ok(Candidate { r0, rs, f, eta })
}

/// Evaluates all points and reduces to the best in a fixed order.
fn best_of(base: &Analyzer, points: &[(f64, f64)], c: &RateConstraints, exec: Execution) -> (Option<Candidate>, usize) {
    let evals = par::map_slice(exec, points, |&(r0, rs)| evaluate(base, r0, rs, c));
    let mut best: Option<Candidate> = None;
    let mut skipped = 0;
    for e in evals {
        match e {
            Ok(cand) => {
                if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                    best = Some(cand);
                }
            }
            Err(_) => skipped += 1,
        }
    }
    (best, skipped)
}

/// All lattice points i·step (R0) and j·step (Rs) with 0 < Rs < R0 ≤ r0_max.
pub fn lattice(step: f64, r0_max: f64) -> Vec<(f64, f64)> {
    let n = (r0_max / step + 1e-9).floor() as usize;
    let mut pts = Vec::new();
    for i in 2..=n {
        for j in 1..i {
            pts.push((i as f64 * step, j as f64 * step));
        }
    }
    pts
}

fn result_from(best: Option<Candidate>, evaluations: usize, skipped: usize) -> Result<OptimizationResult> {
    let b = best.ok_or_else(|| Error::non_convergence("rate search (every candidate failed to evaluate)", f64::NAN))?;
    Ok(OptimizationResult {
        r0_star: b.r0,
        rs_star: b.rs,
        eta_star: if b.f.feasible { b.eta } else { 0.0 },
        slack_c: b.f.slack_c,
        slack_e: b.f.slack_e,
        feasible: b.f.feasible,
        evaluations,
        skipped,
    })
}

/// Best point of the plain lattice with spacing `step`.
pub fn exhaustive_search(base: &Analyzer, c: &RateConstraints, step: f64, r0_max: f64, exec: Execution) -> Result<OptimizationResult> {
    c.validate()?;
    let pts = lattice(step, r0_max);
    if pts.is_empty() {
        return Err(Error::config("empty rate lattice"));
    }
    let (best, skipped) = best_of(base, &pts, c, exec);
    result_from(best, pts.len(), skipped)
}

/// Coarse lattice, then shrinking local lattices around the incumbent.
pub fn optimize_with(base: &Analyzer, c: &RateConstraints, grid: &SearchGrid, exec: Execution) -> Result<OptimizationResult> {
    c.validate()?;
    grid.validate()?;
    if !base.config().is_uniform() {
        return Err(Error::config("rate optimization needs uniform per-round SNR"));
    }
    let pts = lattice(grid.step, grid.r0_max);
    let (mut best, mut skipped) = best_of(base, &pts, c, exec);
    let mut evaluations = pts.len();
    let mut step = grid.step;
    for _ in 0..grid.passes {
        let Some(center) = best.filter(|b| b.f.feasible) else { break };
        let fine = step / f64::from(grid.shrink);
        let k = grid.shrink as i64;
        let mut local = Vec::new();
        for i in -k..=k {
            for j in -k..=k {
                let r0 = center.r0 + i as f64 * fine;
                let rs = center.rs + j as f64 * fine;
                if (i, j) != (0, 0) && rs > 0.0 && rs < r0 && r0 <= grid.r0_max + 1e-12 {
                    local.push((r0, rs));
                }
            }
        }
        let (cand, sk) = best_of(base, &local, c, exec);
        evaluations += local.len();
        skipped += sk;
        if let Some(cand) = cand {
            if cand.better_than(&center) {
                best = Some(cand);
            }
        }
        step = fine;
    }
    result_from(best, evaluations, skipped)
}

/// Builds an analyzer for `template` (its rates are ignored) and optimizes.
pub fn optimize_rates(template: &HarqConfig, c: &RateConstraints, grid: &SearchGrid, exec: Execution) -> Result<OptimizationResult> {
    let cfg = HarqConfig { main_rate: 2.0 * grid.step, secrecy_rate: grid.step, ..template.clone() };
    let base = Analyzer::new(cfg, Default::default())?;
    optimize_with(&base, c, grid, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outage::AnalyzerOptions;
    use crate::thz_channel::PointingFadingParams;

    fn base(m: usize, snr_db: f64) -> Analyzer {
        let bob = PointingFadingParams {
            zeta: 0.125_331_413_731_550_025,
            s: 0.019_792_086_945_219_322_6,
            phi: 6.315_862_932_539_050_78,
            alpha: 1.0,
            mu: 2.0,
            hf_hat: 1.0,
            h_l: 1.366_342_021_734_425_495_36,
        };
        let eve = PointingFadingParams { h_l: 0.382_684_353_006_135_805, ..bob };
        let cfg = HarqConfig::uniform(m, 3.0, 2.0, 10f64.powf(snr_db / 10.0), bob, eve);
        Analyzer::new(cfg, AnalyzerOptions::default()).unwrap()
    }

    const COARSE: SearchGrid = SearchGrid { r0_max: 12.0, step: 0.5, passes: 1, shrink: 4 };

    #[test]
    fn lattice_shape() {
        let pts = lattice(1.0, 3.0);
        assert_eq!(pts, vec![(2.0, 1.0), (3.0, 1.0), (3.0, 2.0)]);
        assert!(lattice(1.0, 1.5).is_empty());
    }

    #[test]
    fn feasibility_limits() {
        let a = base(2, 50.0);
        let c = RateConstraints { eps_c: 0.5, eps_e: 0.5 };
        let near_zero_gap = check_feasibility(&a, 3.0, 3.0 - 1e-6, &c).unwrap();
        assert!(!near_zero_gap.feasible && near_zero_gap.slack_e < 0.0);
        let beyond_capacity = check_feasibility(&a, 60.0, 1.0, &c).unwrap();
        assert!(!beyond_capacity.feasible && beyond_capacity.slack_c < 0.0);
        assert!(check_feasibility(&a, 3.0, 3.5, &c).is_err());
    }

    #[test]
    fn relaxing_constraints_never_hurts() {
        let a = base(2, 55.0);
        let mut prev = f64::NEG_INFINITY;
        for eps in [0.01, 0.1, 1.0] {
            let r = optimize_with(&a, &RateConstraints { eps_c: eps, eps_e: eps }, &COARSE, Execution::default()).unwrap();
            let eta = if r.feasible { r.eta_star } else { 0.0 };
            assert!(eta >= prev, "ε={eps}: {r:?}");
            if r.feasible {
                assert!(r.slack_c >= 0.0 && r.slack_e >= 0.0 && r.rs_star < r.r0_star);
            }
            prev = eta;
        }
    }

    #[test]
    fn unconstrained_optimum_is_lattice_max() {
        let a = base(2, 55.0);
        let c = RateConstraints { eps_c: 1.0, eps_e: 1.0 };
        let grid = SearchGrid { passes: 0, ..COARSE };
        let opt = optimize_with(&a, &c, &grid, Execution::default()).unwrap();
        let brute = exhaustive_search(&a, &c, COARSE.step, COARSE.r0_max, Execution::default()).unwrap();
        assert_eq!(opt.eta_star, brute.eta_star);
        let refined = optimize_with(&a, &c, &COARSE, Execution::default()).unwrap();
        assert!(refined.eta_star >= opt.eta_star);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = base(2, 55.0);
        assert!(optimize_with(&a, &RateConstraints { eps_c: 0.0, eps_e: 0.1 }, &COARSE, Execution::default()).is_err());
        let grid = SearchGrid { step: 0.0, ..COARSE };
        assert!(optimize_with(&a, &RateConstraints { eps_c: 0.1, eps_e: 0.1 }, &grid, Execution::default()).is_err());
    }
}
