//! Experiment runner behind the `harq-thz` binary: figure sweeps, the oracle
//! validation suite and the rate-optimization sweep.
//!
//! Every CSV starts with `#` comment lines carrying the scenario, the config
//! hash and the seed; the column header follows. Each CSV gets a gnuplot
//! script next to it that reads only that CSV.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::montecarlo::{self, EpisodeOutcome, EstimateWithCI};
use crate::optimizer::{optimize_with, RateConstraints};
use crate::oracle::{convolution_cdf, single_round_cdf_quadrature};
use crate::outage::{mgf, single_round_cdf, Analyzer, AnalyzerOptions, CdfMethod, LtatMethod, MgfMethod, SecrecyMethod, Side};
use crate::par::{self, Execution};
use crate::thz_channel::{absorption_coefficient, Environment, PointingFadingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Pco,
    Pso,
    Ltat,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Pco => "pco",
            Metric::Pso => "pso",
            Metric::Ltat => "ltat",
        }
    }

    fn analytic_columns(self) -> &'static [&'static str] {
        match self {
            Metric::Pco => &["exact", "asymptotic"],
            Metric::Pso => &["exact", "upper", "approx"],
            Metric::Ltat => &["exact", "lower"],
        }
    }

    fn ylabel(self) -> &'static str {
        match self {
            Metric::Pco => "connection outage probability",
            Metric::Pso => "secrecy outage probability",
            Metric::Ltat => "secrecy LTAT (bps/Hz)",
        }
    }

    fn analytic(self, a: &Analyzer) -> Result<Vec<f64>> {
        Ok(match self {
            Metric::Pco => vec![a.connection_outage(CdfMethod::Exact)?, a.connection_outage(CdfMethod::Asymptotic)?],
            Metric::Pso => {
                let exact = a.secrecy_outage(SecrecyMethod::Exact)?;
                vec![exact, a.secrecy_outage(SecrecyMethod::Upper)?, a.secrecy_outage(SecrecyMethod::Approx)?]
            }
            Metric::Ltat => vec![a.ltat(LtatMethod::Exact)?.0, a.ltat(LtatMethod::LowerBound)?.0],
        })
    }

    fn empirical(self, r: &montecarlo::EmpiricalReport) -> EstimateWithCI {
        match self {
            Metric::Pco => r.p_co,
            Metric::Pso => r.p_so,
            Metric::Ltat => r.ltat,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pco" => Ok(Metric::Pco),
            "pso" => Ok(Metric::Pso),
            "ltat" => Ok(Metric::Ltat),
            _ => Err(Error::config(format!("unknown metric {s:?}; expected pco, pso or ltat"))),
        }
    }
}

fn header(out: &mut String, cfg: &ExperimentConfig, what: &str) {
    let _ = writeln!(out, "# harq-thz {what} scenario={}", cfg.scenario);
    let _ = writeln!(out, "# config_sha256={}", cfg.hash());
    let _ = writeln!(out, "# seed={} episodes={}", cfg.monte_carlo.seed, cfg.monte_carlo.episodes);
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Evaluates `points` with `f` (possibly in parallel) and hands the results
/// to `emit` in order, stopping at the first failure after emitting
/// everything before it.
fn collect_in_order<R: Send>(
    exec: Execution,
    label: &str,
    points: &[f64],
    f: impl Fn(f64) -> Result<R> + Sync + Send,
    mut emit: impl FnMut(f64, R) -> Result<()>,
) -> Result<()> {
    let progress = std::io::stderr().is_terminal();
    let done = AtomicUsize::new(0);
    let total = points.len();
    let results = par::map_slice(exec, points, |&snr| {
        let r = f(snr);
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if progress {
            eprintln!("{label}: {k}/{total} points");
        }
        r
    });
    for (&snr, r) in points.iter().zip(results) {
        emit(snr, r.map_err(|e| Error::config(format!("at {snr} dB: {e}")))?)?;
    }
    Ok(())
}

fn analyzer_options(exec: Execution) -> AnalyzerOptions {
    AnalyzerOptions { exec, ..AnalyzerOptions::default() }
}

/// Analyzer at `snr_db` for the largest M of the sweep; smaller M derive from it.
fn base_analyzer(cfg: &ExperimentConfig, snr_db: f64, exec: Execution) -> Result<Analyzer> {
    let top = cfg.harq.rounds.iter().copied().max().unwrap_or(1).max(1);
    Analyzer::new(cfg.harq_config(top, snr_db)?, analyzer_options(exec))
}

struct SweepRow {
    values: Vec<f64>,
    logs: Vec<(usize, Vec<EpisodeOutcome>)>,
}

fn sweep_row(cfg: &ExperimentConfig, metric: Metric, snr_db: f64, exec: Execution) -> Result<SweepRow> {
    let base = base_analyzer(cfg, snr_db, exec)?;
    let (r0, rs) = (cfg.harq.main_rate, cfg.harq.secrecy_rate);
    let mc = &cfg.monte_carlo;
    let mut values = vec![metric.analytic(&base.derive(1, r0, rs)?)?[0]];
    let mut logs = Vec::new();
    for &m in &cfg.harq.rounds {
        let a = base.derive(m, r0, rs)?;
        values.extend(metric.analytic(&a)?);
        if mc.episodes > 0 {
            let (report, log) = if mc.episode_log {
                montecarlo::estimate_with_log(a.config(), mc.episodes, mc.seed, exec)?
            } else {
                (montecarlo::estimate_metrics(a.config(), mc.episodes, mc.seed, exec)?, Vec::new())
            };
            let e = metric.empirical(&report);
            values.extend([e.point, e.half_width_95]);
            if mc.episode_log {
                logs.push((m, log));
            }
        }
    }
    Ok(SweepRow { values, logs })
}

fn sweep_columns(cfg: &ExperimentConfig, metric: Metric) -> Vec<String> {
    let mut cols = vec!["snr_db".to_string(), "no_harq_exact".to_string()];
    for &m in &cfg.harq.rounds {
        cols.extend(metric.analytic_columns().iter().map(|c| format!("M{m}_{c}")));
        if cfg.monte_carlo.episodes > 0 {
            cols.extend([format!("M{m}_mc"), format!("M{m}_mc_ci95")]);
        }
    }
    cols
}

fn sweep_script(cfg: &ExperimentConfig, metric: Metric, cols: &[String]) -> String {
    let name = metric.name();
    let mut s = String::new();
    let _ = writeln!(s, "# harq-thz sweep plot, config_sha256={}", cfg.hash());
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 900,650");
    let _ = writeln!(s, "set output '{name}.png'");
    let _ = writeln!(s, "set xlabel 'transmit SNR (dB)'");
    let _ = writeln!(s, "set ylabel '{}'", metric.ylabel());
    let _ = writeln!(s, "set key outside right");
    if metric != Metric::Ltat {
        let _ = writeln!(s, "set logscale y");
        let _ = writeln!(s, "set format y '10^{{%L}}'");
    }
    let mut plots = vec![format!("'{name}.csv' using 1:2 skip 4 with lines dt 3 lw 2 title 'No HARQ'")];
    for (i, col) in cols.iter().enumerate().skip(2) {
        let idx = i + 1;
        let (m, kind) = col.split_once('_').unwrap_or((col, ""));
        let m = m.replacen('M', "M=", 1);
        match kind {
            "exact" => plots.push(format!("'' using 1:{idx} skip 4 with lines lw 2 title '{m} exact'")),
            "mc" => plots.push(format!("'' using 1:{idx}:{} skip 4 with yerrorbars pt 6 title '{m} sim.'", idx + 1)),
            "mc_ci95" => {}
            other => plots.push(format!("'' using 1:{idx} skip 4 with linespoints dt 2 title '{m} {other}'")),
        }
    }
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// Writes `<metric>.csv` and `<metric>.gp` (plus per-point episode logs when
/// enabled) under the output directory and returns the paths written.
pub fn cmd_sweep(cfg: &ExperimentConfig, metric: Metric, exec: Execution) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let name = metric.name();
    let cols = sweep_columns(cfg, metric);
    let csv_path = dir.join(format!("{name}.csv"));
    let script_path = dir.join(format!("{name}.gp"));
    let mut csv = String::new();
    header(&mut csv, cfg, &format!("sweep metric={name}"));
    let _ = writeln!(csv, "{}", cols.join(","));
    let mut written = vec![csv_path.clone(), script_path.clone()];
    write_file(&script_path, &sweep_script(cfg, metric, &cols))?;
    let result = collect_in_order(
        exec,
        &format!("sweep {name}"),
        &cfg.snr.points(),
        |snr| sweep_row(cfg, metric, snr, exec),
        |snr, row| {
            let mut line = format!("{snr}");
            for v in &row.values {
                let _ = write!(line, ",{v}");
            }
            let _ = writeln!(csv, "{line}");
            for (m, log) in &row.logs {
                let path = dir.join(format!("{name}_episodes_M{m}_{snr}dB.csv"));
                montecarlo::write_episode_log(BufWriter::new(File::create(&path)?), log)?;
                written.push(path);
            }
            Ok(())
        },
    );
    write_file(&csv_path, &csv)?;
    result.map(|_| written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// `<=`: measured must not exceed `threshold`; `>=`: must reach it.
    pub comparison: &'static str,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, measured: f64, threshold: f64, detail: String) -> Self {
        Check { name: name.into(), passed: measured <= threshold, measured, comparison: "<=", threshold, detail }
    }

    fn at_least(name: &str, measured: f64, threshold: f64, detail: String) -> Self {
        Check { name: name.into(), passed: measured >= threshold, measured, comparison: ">=", threshold, detail }
    }

    fn failed(name: &str, err: &Error) -> Self {
        Check { name: name.into(), passed: false, measured: f64::NAN, comparison: "<=", threshold: 0.0, detail: err.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Absorption coefficient at 275 GHz in the reference atmosphere with the
/// stock constants.
pub const REFERENCE_ABSORPTION: f64 = 3.888_431_124_659_495_5e-4;
pub const KS_SAMPLES: usize = 100_000;
pub const MGF_POINTS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const MC_DRAWS: u64 = 1_000_000;

fn check(name: &str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::failed(name, &e))
}

fn max_by_abs<I: IntoIterator<Item = (f64, String)>>(it: I) -> (f64, String) {
    it.into_iter().fold((0.0, String::new()), |acc, (v, d)| if v.abs() > acc.0 || v.is_nan() { (v.abs(), d) } else { acc })
}

/// Runs the oracle suite at the configured scenario.
pub fn cmd_validate(cfg: &ExperimentConfig, exec: Execution) -> Result<ValidationReport> {
    cfg.validate()?;
    let (bob, eve) = cfg.link_params()?;
    let snrs = cfg.snr.points();
    let mid = snrs[snrs.len() / 2];
    let rho_mid = crate::config::db_to_linear(mid);
    let r0 = cfg.harq.main_rate;
    let seed = cfg.monte_carlo.seed;
    let mut checks = Vec::new();

    checks.push(check("absorption_constants", || {
        let k = absorption_coefficient(275e9, &Environment::default(), &cfg.absorption)?;
        let rel = (k / REFERENCE_ABSORPTION - 1.0).abs();
        Ok(Check::at_most("absorption_constants", rel, 1e-12, format!("kappa(275 GHz) = {k} per m")))
    }));

    // the sampled law is |h_pf|, which does not involve h_l
    let same_law = PointingFadingParams { h_l: bob.h_l, ..eve } == bob;
    let sides: &[(&str, &PointingFadingParams)] =
        if same_law { &[("sampler_ks", &bob)] } else { &[("sampler_ks_bob", &bob), ("sampler_ks_eve", &eve)] };
    for &(name, p) in sides {
        checks.push(check(name, || {
            let ks = montecarlo::validate_sampler(p, KS_SAMPLES, seed)?;
            Ok(Check::at_least(name, ks.p_value, 0.01, format!("D = {}, n = {}", ks.statistic, ks.n)))
        }));
    }

    checks.push(check("mgf_dual_method", || {
        let inner = AnalyzerOptions::default().inner;
        let mut worst = Vec::new();
        for s in MGF_POINTS {
            let fox = mgf(s, rho_mid, &eve, MgfMethod::FoxH, &inner)?;
            let quad = mgf(s, rho_mid, &eve, MgfMethod::Quadrature, &inner)?;
            worst.push((fox / quad - 1.0, format!("s = {s}: Fox H {fox}, quadrature {quad}")));
        }
        let (v, d) = max_by_abs(worst);
        Ok(Check::at_most("mgf_dual_method", v, 1e-6, format!("worst at {mid} dB, {d}")))
    }));

    checks.push(check("single_round_cdf", || {
        let mut worst = Vec::new();
        for &snr in &snrs {
            for x in [0.5, 1.0, r0, 5.0, 8.0] {
                let rho = crate::config::db_to_linear(snr);
                let closed = single_round_cdf(&bob, rho, x)?;
                let quad = single_round_cdf_quadrature(&bob, rho, x)?;
                worst.push((closed - quad, format!("{snr} dB, x = {x}")));
            }
        }
        let (v, d) = max_by_abs(worst);
        Ok(Check::at_most("single_round_cdf", v, 1e-8, format!("worst at {d}")))
    }));

    let top = cfg.harq.rounds.iter().copied().max().unwrap_or(1);
    let base = Analyzer::new(cfg.harq_config(top.max(2), mid)?, analyzer_options(exec))?;
    checks.push(check("multi_round_convolution", || {
        let mut worst = Vec::new();
        for m in 2..=top.clamp(2, 3) {
            let exact = base.mi_cdf(Side::Bob, m, r0)?;
            let conv = convolution_cdf(&bob, rho_mid, m, r0, 1e-3)?;
            worst.push((exact - conv, format!("m = {m}: {exact} vs {conv}")));
        }
        let (v, d) = max_by_abs(worst);
        Ok(Check::at_most("multi_round_convolution", v, 1e-4, format!("{mid} dB, {d}")))
    }));

    checks.push(check("multi_round_monte_carlo", || {
        let rounds = top.max(2);
        let est = montecarlo::mi_cdf_empirical(&bob, rho_mid, rounds, r0, MC_DRAWS, seed, exec)?;
        let mut worst = Vec::new();
        for (i, e) in est.iter().enumerate() {
            let exact = base.mi_cdf(Side::Bob, i + 1, r0)?;
            worst.push((e.z_score(exact), format!("m = {}: exact {exact}, simulated {}", i + 1, e.point)));
        }
        let (v, d) = max_by_abs(worst);
        Ok(Check::at_most("multi_round_monte_carlo", v, 3.0, format!("standard errors at {mid} dB, {MC_DRAWS} draws, {d}")))
    }));

    checks.push(check("bound_dominance", || {
        let mut worst = Vec::new();
        for &snr in &snrs {
            let b = base_analyzer(cfg, snr, exec)?;
            for &m in &cfg.harq.rounds {
                let a = b.derive(m, cfg.harq.main_rate, cfg.harq.secrecy_rate)?;
                let so = a.secrecy_outage(SecrecyMethod::Exact)?;
                let up = a.secrecy_outage(SecrecyMethod::Upper)?;
                let eta = a.ltat(LtatMethod::Exact)?.0;
                let low = a.ltat(LtatMethod::LowerBound)?.0;
                worst.push(((so - up).max(0.0), format!("P_so upper at {snr} dB, M = {m}")));
                worst.push(((low - eta).max(0.0), format!("LTAT lower bound at {snr} dB, M = {m}")));
            }
        }
        let (v, d) = max_by_abs(worst);
        let detail = if v > 0.0 { format!("largest violation: {d}") } else { "no violation".into() };
        Ok(Check::at_most("bound_dominance", v, 1e-9, detail))
    }));

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { scenario: cfg.scenario.clone(), config_sha256: cfg.hash(), seed, passed, checks })
}

/// Writes the report as `validation.json` and returns its path.
pub fn write_validation(cfg: &ExperimentConfig, report: &ValidationReport) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("validation.json");
    write_file(&path, &(serde_json::to_string_pretty(report)? + "\n"))?;
    Ok(path)
}

fn optimize_stem(c: &RateConstraints) -> String {
    format!("optimize_ec{}_ee{}", c.eps_c, c.eps_e)
}

/// Optimizes (R0, Rs) at every sweep point for every M and writes
/// `optimize_ec<eps_c>_ee<eps_e>.csv` with its plot script.
pub fn cmd_optimize(cfg: &ExperimentConfig, c: &RateConstraints, exec: Execution) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    c.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let stem = optimize_stem(c);
    let csv_path = dir.join(format!("{stem}.csv"));
    let script_path = dir.join(format!("{stem}.gp"));
    let mut csv = String::new();
    header(&mut csv, cfg, &format!("optimize eps_c={} eps_e={}", c.eps_c, c.eps_e));
    let g = &cfg.search;
    let _ = writeln!(csv, "# search r0_max={} step={} passes={} shrink={}", g.r0_max, g.step, g.passes, g.shrink);
    let _ = writeln!(csv, "snr_db,M,r0_star,rs_star,eta_star,slack_c,slack_e,feasible,evaluations");
    let result = collect_in_order(
        exec,
        &stem,
        &cfg.snr.points(),
        |snr| {
            let base = base_analyzer(cfg, snr, exec)?;
            cfg.harq
                .rounds
                .iter()
                .map(|&m| {
                    let a = base.derive(m, cfg.harq.main_rate, cfg.harq.secrecy_rate)?;
                    Ok((m, optimize_with(&a, c, &cfg.search, exec)?))
                })
                .collect::<Result<Vec<_>>>()
        },
        |snr, rows| {
            for (m, r) in rows {
                let _ = writeln!(
                    csv,
                    "{snr},{m},{},{},{},{},{},{},{}",
                    r.r0_star,
                    r.rs_star,
                    r.eta_star,
                    r.slack_c,
                    r.slack_e,
                    u8::from(r.feasible),
                    r.evaluations
                );
            }
            Ok(())
        },
    );
    write_file(&csv_path, &csv)?;
    let mut s = String::new();
    let _ = writeln!(s, "# harq-thz optimize plot, config_sha256={}", cfg.hash());
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 900,650");
    let _ = writeln!(s, "set output '{stem}.png'");
    let _ = writeln!(s, "set xlabel 'transmit SNR (dB)'");
    let _ = writeln!(s, "set ylabel 'optimal secrecy LTAT (bps/Hz)'");
    let plots: Vec<String> = cfg
        .harq
        .rounds
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let src = if i == 0 { format!("'{stem}.csv'") } else { "''".into() };
            format!("{src} using 1:($2=={m} ? $5 : 1/0) skip 5 with linespoints title 'M={m}'")
        })
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    write_file(&script_path, &s)?;
    result.map(|_| vec![csv_path, script_path])
}
