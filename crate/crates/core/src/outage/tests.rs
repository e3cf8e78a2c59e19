use super::*;
use crate::oracle::{convolution_cdf, single_round_cdf_quadrature};

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

pub(crate) fn eve() -> PointingFadingParams {
    PointingFadingParams { h_l: 0.382_684_353_006_135_805, ..bob() }
}

fn db(v: f64) -> f64 {
    10f64.powf(v / 10.0)
}

fn analyzer(m: usize, snr_db: f64) -> Analyzer {
    Analyzer::new(HarqConfig::uniform(m, 3.0, 2.0, db(snr_db), bob(), eve()), AnalyzerOptions::default()).unwrap()
}

#[test]
fn single_round_forms_agree() {
    for &(snr, x) in &[(40.0, 3.0), (55.0, 3.0), (55.0, 0.2), (70.0, 6.0), (30.0, 1.0)] {
        let closed = single_round_cdf(&bob(), db(snr), x).unwrap();
        let series = single_round_cdf_series(&bob(), db(snr), x).unwrap();
        let quad = single_round_cdf_quadrature(&bob(), db(snr), x).unwrap();
        assert!((closed - quad).abs() < 1e-10, "{snr} dB, x={x}: {closed} vs {quad}");
        assert!((series - quad).abs() < 1e-8, "{snr} dB, x={x}: series {series} vs {quad}");
    }
}

#[test]
fn frozen_single_round_and_asymptote() {
    let a = analyzer(1, 55.0);
    assert!((a.mi_cdf(Side::Bob, 1, 3.0).unwrap() - 0.066_155_003_031_757_59).abs() < 1e-12);
    assert!((a.mi_cdf_asymptotic(Side::Bob, 1, 3.0).unwrap() - 0.088_591_296_578_841_77).abs() < 1e-9);
}

#[test]
fn multi_round_matches_convolution() {
    let a = analyzer(3, 50.0);
    for m in 2..=3 {
        let exact = a.mi_cdf(Side::Bob, m, 3.0).unwrap();
        let conv = convolution_cdf(&bob(), db(50.0), m, 3.0, 1e-3).unwrap();
        assert!((exact - conv).abs() < 1e-6, "m={m}: {exact} vs {conv}");
    }
}

#[test]
fn cdf_monotone_in_rounds_and_threshold() {
    let a = analyzer(4, 45.0);
    for side in [Side::Bob, Side::Eve] {
        for &x in &[1.0, 3.0, 5.0] {
            let psi: Vec<f64> = (1..=4).map(|m| a.mi_cdf(side, m, x).unwrap()).collect();
            assert!(psi.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{side:?} x={x}: {psi:?}");
        }
        for m in 1..=4 {
            let psi: Vec<f64> = [0.5, 1.0, 2.0, 3.0, 4.0].iter().map(|&x| a.mi_cdf(side, m, x).unwrap()).collect();
            assert!(psi.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{side:?} m={m}: {psi:?}");
        }
    }
}

#[test]
fn rejects_bad_arguments() {
    let a = analyzer(2, 50.0);
    assert!(a.mi_cdf(Side::Bob, 0, 3.0).is_err());
    assert!(a.mi_cdf(Side::Bob, 3, 3.0).is_err());
    assert!(a.mi_cdf(Side::Bob, 1, 0.0).is_err());
    let mut p = bob();
    p.mu = 1.5;
    assert!(Analyzer::new(HarqConfig::uniform(2, 3.0, 2.0, db(50.0), p, eve()), AnalyzerOptions::default()).is_err());
}

#[test]
fn degenerate_asymptote_is_reported() {
    let p = PointingFadingParams { phi: 2.0, ..bob() };
    let err = asymptotic_cdf(&p, &[db(50.0)], 3.0, &ContourConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)));
}

#[test]
fn diversity_slope_is_exact() {
    let theta = (bob().alpha * bob().mu).min(bob().phi);
    let meijer = AnalyzerOptions::default().meijer;
    for m in [1usize, 3] {
        let lo = asymptotic_cdf(&bob(), &vec![db(60.0); m], 3.0, &meijer).unwrap();
        let hi = asymptotic_cdf(&bob(), &vec![db(70.0); m], 3.0, &meijer).unwrap();
        let slope = (hi.log10() - lo.log10()) / 10.0;
        assert!((slope + m as f64 * theta / 20.0).abs() < 1e-9, "m={m}: {slope}");
    }
}

#[test]
fn asymptote_ratio_approaches_one() {
    let mut last = f64::INFINITY;
    for snr in [45.0, 55.0, 65.0] {
        let a = analyzer(2, snr);
        let ratio = a.mi_cdf_asymptotic(Side::Bob, 2, 3.0).unwrap() / a.mi_cdf(Side::Bob, 2, 3.0).unwrap();
        let gap = (ratio - 1.0).abs();
        assert!(gap < last, "{snr} dB: ratio {ratio}");
        last = gap;
    }
    assert!(last < 0.25);
}

#[test]
fn pmf_and_report_invariants() {
    let a = analyzer(4, 50.0);
    let r = a.report().unwrap();
    assert!((r.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(r.pmf.iter().all(|&w| w >= 0.0));
    assert!(r.p_so_exact <= r.p_so_upper.unwrap() + 1e-9);
    assert!(r.ltat_lower <= r.ltat_exact + 1e-9);
    assert!(r.ltat_exact <= 2.0);
    assert!((1.0..=4.0).contains(&r.expected_rounds));
    for v in [r.p_co_exact, r.p_co_asymptotic, r.p_so_exact, r.p_so_approx.unwrap()] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert_eq!(analyzer(1, 50.0).tx_count_pmf().unwrap(), vec![1.0]);
}

#[test]
fn derived_analyzer_matches_fresh() {
    let base = analyzer(3, 55.0);
    base.report().unwrap();
    let derived = base.derive(2, 4.0, 1.5).unwrap();
    let fresh = Analyzer::new(HarqConfig::uniform(2, 4.0, 1.5, db(55.0), bob(), eve()), AnalyzerOptions::default()).unwrap();
    assert_eq!(derived.report().unwrap(), fresh.report().unwrap());
}

#[test]
fn bounds_need_uniform_snr() {
    let cfg = HarqConfig { per_round_snr: vec![db(50.0), db(53.0)], ..HarqConfig::uniform(2, 3.0, 2.0, db(50.0), bob(), eve()) };
    let a = Analyzer::new(cfg, AnalyzerOptions::default()).unwrap();
    assert!(a.secrecy_outage(SecrecyMethod::Exact).is_ok());
    assert!(matches!(a.secrecy_outage(SecrecyMethod::Upper), Err(Error::Config(_))));
    assert!(a.derive(3, 3.0, 2.0).is_err());
}

#[test]
fn limiting_regimes() {
    // vanishing dummy rate: Eve always clears the threshold
    let a = Analyzer::new(HarqConfig::uniform(2, 3.0, 3.0 - 1e-9, db(50.0), bob(), eve()), AnalyzerOptions::default()).unwrap();
    assert!(a.secrecy_outage(SecrecyMethod::Exact).unwrap() > 1.0 - 1e-6);
    // very high SNR: one round suffices
    let a = analyzer(2, 110.0);
    let (eta, rounds) = a.ltat(LtatMethod::Exact).unwrap();
    assert!((eta - 2.0).abs() < 1e-6 && (rounds - 1.0).abs() < 1e-6, "{eta} {rounds}");
}
