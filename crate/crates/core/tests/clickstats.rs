use proptest::prelude::*;
use snspd::clickstats::*;

fn bernoulli(p: f64, n: usize, seed: u64) -> ClickTrain {
    generate_clicks(&SourceModel::constant_qe(0.0, 1.0, p, 0.0), n, seed).unwrap()
}

#[test]
fn independent_trains_are_flat() {
    for (p, n) in [(0.1, 1_000_000), (0.5, 1_000_000)] {
        let g = autocorrelation(&bernoulli(p, n, 11), 20).unwrap();
        for (lag, v) in g.iter().enumerate() {
            assert!((v - 1.0).abs() < 0.05, "p {p} lag {}: {v}", lag + 1);
        }
    }
    // at p = 0.01 single lags are noisy; their mean is not
    let g = autocorrelation(&bernoulli(0.01, 10_000_000, 12), 20).unwrap();
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn alternating_sequence_closed_form() {
    let n = 1000;
    let train = ClickTrain {
        bins: (0..n).map(|k| k % 2 == 0).collect(),
        bin_width: 1.0,
        mode: TrainMode::Gm,
        phases: None,
    };
    let g = autocorrelation(&train, 10).unwrap();
    for (k, v) in g.iter().enumerate() {
        let expect = if (k + 1) % 2 == 0 { 2.0 } else { 0.0 };
        assert_eq!(*v, expect);
    }
}

#[test]
fn qe_interval_coverage() {
    let (mu, qe, dark, f) = (0.1, 0.2, 1e-3, 625e6);
    let n = 200_000;
    let mut covered = 0;
    let mut dcr_covered = 0;
    for run in 0..100u64 {
        let light = generate_clicks(&SourceModel::constant_qe(mu, qe, dark, 0.0), n, 2 * run).unwrap();
        let dark_train = generate_clicks(&SourceModel::constant_qe(0.0, qe, dark, 0.0), n, 2 * run + 1).unwrap();
        let est = estimate_qe_dcr(&light, &dark_train, mu, f, 0.95).unwrap();
        // the light gate clicks with 1 - (1 - p_photon)(1 - dark); QE is
        // defined on the photon part alone
        let p_photon = -(-mu * qe).exp_m1();
        let p_light = 1.0 - (1.0 - p_photon) * (1.0 - dark);
        if est.qe.contains((p_light - dark) / mu) {
            covered += 1;
        }
        if est.dcr.contains(dark * f) {
            dcr_covered += 1;
        }
    }
    assert!(covered >= 90, "QE covered {covered}/100");
    assert!(dcr_covered >= 90, "DCR covered {dcr_covered}/100");
}

fn pulsed(ap: f64) -> SourceModel {
    SourceModel {
        kind: SourceKind::Pulsed,
        mean_photons_per_gate: 3.0,
        pulse_divisor: 20,
        qe_curve: QeCurve::Constant(0.5),
        dark_prob_per_gate: 1e-4,
        afterpulse_prob: ap,
        ..Default::default()
    }
}

#[test]
fn afterpulse_is_recovered() {
    let train = generate_clicks(&pulsed(0.003), 10_000_000, 5).unwrap();
    let g = autocorrelation(&train, 60).unwrap();
    // jumps at every pulse period
    assert!(g[19] > 5.0 * g[9]);
    let est = afterpulse_probability(&g, 20, train.click_probability()).unwrap();
    assert!((est.probability - 0.003).abs() < 0.2 * 0.003, "{est:?}");
    assert!(est.flat);
}

#[test]
fn no_afterpulse_is_consistent_with_zero() {
    let train = generate_clicks(&pulsed(0.0), 2_000_000, 6).unwrap();
    let g = autocorrelation(&train, 60).unwrap();
    let est = afterpulse_probability(&g, 20, train.click_probability()).unwrap();
    assert!(est.probability.abs() < 3.0 * est.std_error.max(1e-5), "{est:?}");
}

#[test]
fn single_photon_regime_is_linear() {
    let f = 625e6;
    let n = 2_000_000;
    let rates: Vec<(f64, f64)> = [0.002, 0.004, 0.008, 0.016, 0.032]
        .iter()
        .enumerate()
        .map(|(k, &mu)| {
            let t = generate_clicks(&SourceModel::constant_qe(mu, 0.3, 0.0, 0.0), n, 40 + k as u64).unwrap();
            (mu, t.click_probability() * f)
        })
        .collect();
    let fit = linearity_check(&rates).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.05, "{fit:?}");
    assert!(fit.single_photon);

    let strong: Vec<(f64, f64)> = [1.0, 3.0, 10.0, 30.0]
        .iter()
        .map(|&mu| {
            let t = generate_clicks(&SourceModel::constant_qe(mu, 0.3, 0.0, 0.0), 200_000, 7).unwrap();
            (mu, t.click_probability() * f)
        })
        .collect();
    assert!(linearity_check(&strong).unwrap().saturated);
}

#[test]
fn dark_count_ceiling_is_the_gate_frequency() {
    let f = 625e6;
    let always = bernoulli(1.0, 10_000, 1);
    let light = bernoulli(1.0, 10_000, 2);
    let est = estimate_qe_dcr(&light, &always, 1.0, f, 0.95).unwrap();
    assert_eq!(est.dcr.value, f);
    assert!(est.dcr.hi <= f);
}

#[test]
fn cw_phase_histogram_is_flat() {
    let n = 1_000_000;
    let t = generate_clicks(&SourceModel::constant_qe(0.05, 0.5, 0.0, 0.0), n, 9).unwrap();
    let bins = 20;
    let hist = gate_phase_histogram(&t, bins).unwrap();
    let mean = hist.iter().sum::<f64>() / bins as f64;
    let per_bin = t.clicks() as f64 / bins as f64;
    let sigma = mean / per_bin.sqrt();
    for (k, h) in hist.iter().enumerate() {
        assert!((h - mean).abs() < 3.0 * sigma, "bin {k}: {h} vs {mean}");
    }
}

#[test]
fn current_dependent_qe_narrows_the_histogram() {
    let model = SourceModel {
        mean_photons_per_gate: 0.05,
        qe_curve: QeCurve::Sigmoid {
            qe_max: 0.5,
            i_half: 14e-6,
            width: 1e-6,
        },
        i_min: -2e-6,
        i_max: 18e-6,
        ..Default::default()
    };
    let t = generate_clicks(&model, 1_000_000, 10).unwrap();
    let hist = gate_phase_histogram(&t, 40).unwrap();
    let width = flat_top_width(&hist, model.gate_period, 0.2);
    assert!(width < 0.6 * model.gate_period && width > 0.0, "{width}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gamma_is_non_negative_and_seed_stable(p in 0.02f64..0.9, seed in 0u64..1000) {
        let a = bernoulli(p, 20_000, seed);
        let b = bernoulli(p, 20_000, seed);
        prop_assert_eq!(&a, &b);
        let g = autocorrelation(&a, 10).unwrap();
        prop_assert!(g.iter().all(|v| *v >= 0.0));
    }
}
