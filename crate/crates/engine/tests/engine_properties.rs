use lift3d_core::rng::seeded;
use lift3d_engine::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Percentile bootstrap 95% interval of `mean(b) − mean(a)`.
fn bootstrap_diff_ci(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let mut rng = seeded(seed);
    let mut diffs: Vec<f64> = (0..resamples)
        .map(|_| {
            let ma = (0..a.len()).map(|_| a[rng.random_range(0..a.len())]).sum::<f64>() / a.len() as f64;
            let mb = (0..b.len()).map(|_| b[rng.random_range(0..b.len())]).sum::<f64>() / b.len() as f64;
            mb - ma
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    (diffs[resamples * 25 / 1000], diffs[resamples * 975 / 1000])
}

#[test]
fn single_iteration_matches_order_statistics() {
    let config = EngineConfig {
        n: 8,
        inputs_per_iteration: 6000,
        curriculum: vec![0.0],
        annotator: AnnotatorModel::noiseless(),
        ..Default::default()
    };
    let summary = run_engine(&config, &mut seeded(11)).unwrap();
    let observed = summary.iterations[0].mean_accepted_quality.unwrap();

    // mixture weights mean^4 over (current, auxiliaries)
    let dists: Vec<QualityDist> = std::iter::once(config.current_model).chain(config.auxiliaries.iter().map(|g| g.quality)).collect();
    let w: Vec<f64> = dists.iter().map(|d| d.mean.powi(4)).collect();
    let total: f64 = w.iter().sum();
    let betas: Vec<Beta> = dists.iter().map(|d| Beta::new(d.shape().0, d.shape().1).unwrap()).collect();
    let cdf = |x: f64| betas.iter().zip(&w).map(|(b, wi)| wi / total * b.cdf(x)).sum::<f64>();
    // E[max] = ∫ (1 − F(x)^8) dx by the midpoint rule
    let steps = 20_000;
    let expected: f64 = (0..steps).map(|i| 1.0 - cdf((i as f64 + 0.5) / steps as f64).powi(8)).sum::<f64>() / steps as f64;
    // sd of the max is below 0.15, so the standard error is below 0.002
    assert!((observed - expected).abs() < 0.008, "{observed} vs {expected}");
}

#[test]
fn selected_quality_is_non_decreasing_in_n() {
    let dist = QualityDist::new(0.3, 8.0).unwrap();
    let mut rng = seeded(21);
    let samples: Vec<Vec<f64>> = [2, 4, 8, 16, 50]
        .iter()
        .map(|&n| selected_quality_trials(&dist, n, 1000, &AnnotatorModel::noiseless(), &mut rng).unwrap())
        .collect();
    for (k, pair) in samples.windows(2).enumerate() {
        assert!(mean(&pair[1]) >= mean(&pair[0]));
        let (lo, _) = bootstrap_diff_ci(&pair[0], &pair[1], 2000, k as u64);
        assert!(lo > 0.0, "interval for step {k} reaches {lo}");
    }
}

#[test]
fn recovery_yield_grows_with_best_of_n() {
    let run = |n_recover| {
        let config =
            EngineConfig { recovery: Some(RecoveryConfig { n_recover, reward: RewardModel::calibrated() }), ..EngineConfig::low_quality() };
        let it = &run_engine(&config, &mut seeded(31)).unwrap().iterations[0];
        (it.recovered as f64 / it.recovery_attempts as f64, it.collected_accepted)
    };
    let (y2, a2) = run(2);
    let (y50, a50) = run(50);
    assert!(y50 > y2, "{y2} vs {y50}");
    assert!(a50 > a2);
}

#[test]
fn rising_bar_raises_accepted_quality() {
    let config = EngineConfig { curriculum: vec![0.3, 0.4, 0.5, 0.6, 0.7], update_fraction: 0.0, ..Default::default() };
    let s = run_engine(&config, &mut seeded(41)).unwrap();
    let means: Vec<f64> = s.iterations.iter().map(|r| r.mean_accepted_quality.unwrap()).collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}

#[test]
fn noiseless_preferences_are_ordered_and_noisy_violations_follow_logistic() {
    let mut rng = seeded(51);
    let dist = QualityDist::new(0.5, 4.0).unwrap();
    for _ in 0..500 {
        let cands: Vec<Demonstration> =
            (0..6).map(|i| Demonstration { input: 0, payload: i, quality: dist.sample(&mut rng), source: 0 }).collect();
        let s = knockout_select(&cands, &AnnotatorModel::noiseless(), &mut rng).unwrap();
        let record = PreferenceRecord { chosen: s.best, rejected: s.rejected, rating: 1.0 };
        assert!(record.pairs().all(|(c, r)| c.quality >= r.quality));
    }

    let annotator = AnnotatorModel { temperature: 0.1, equal_margin: 0.0, rating_noise: 0.0 };
    let (hi, lo) = (Quality::new(0.6).unwrap(), Quality::new(0.45).unwrap());
    let n = 20_000;
    let violations = (0..n)
        .filter(|_| {
            let cands = [
                Demonstration { input: 0, payload: 0, quality: hi, source: 0 },
                Demonstration { input: 0, payload: 1, quality: lo, source: 0 },
            ];
            knockout_select(&cands, &annotator, &mut rng).unwrap().best.quality == lo
        })
        .count() as f64
        / n as f64;
    let expected = 1.0 / (1.0 + 1.5f64.exp());
    // binomial sd ~ 0.0029
    assert!((violations - expected).abs() < 0.012, "{violations} vs {expected}");
}

fn simulate(true_ratings: &[f64], games_per_pair: usize, seed: u64) -> Vec<Outcome> {
    let mut rng = seeded(seed);
    let mut out = Vec::new();
    for i in 0..true_ratings.len() {
        for j in i + 1..true_ratings.len() {
            let p = win_probability(true_ratings[i] - true_ratings[j]);
            for _ in 0..games_per_pair {
                let w = if rng.random::<f64>() < p { Winner::A } else { Winner::B };
                out.push(Outcome::new(format!("m{i}"), format!("m{j}"), w));
            }
        }
    }
    out
}

#[test]
fn three_model_gaps_are_recovered() {
    let fit = elo_fit(&simulate(&[0.0, 200.0, 400.0], 10_000, 61)).unwrap();
    assert!(fit.converged);
    assert!((fit.gap("m1", "m0").unwrap() - 200.0).abs() < 25.0);
    assert!((fit.gap("m2", "m0").unwrap() - 400.0).abs() < 25.0);
    assert!((fit.gap("m2", "m1").unwrap() - 200.0).abs() < 25.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_depends_only_on_gaps(shift in -2000.0..2000.0f64, g1 in -300.0..300.0f64, g2 in -300.0..300.0f64, seed in 0u64..1000) {
        let a = elo_fit(&simulate(&[0.0, g1, g2], 60, seed)).unwrap();
        let b = elo_fit(&simulate(&[shift, g1 + shift, g2 + shift], 60, seed)).unwrap();
        for (x, y) in [("m0", "m1"), ("m0", "m2"), ("m1", "m2")] {
            prop_assert!((win_probability(a.gap(x, y).unwrap()) - win_probability(b.gap(x, y).unwrap())).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_ignores_outcome_order(seed in 0u64..1000) {
        let mut o = simulate(&[0.0, 100.0, -50.0, 250.0], 30, seed);
        let a = elo_fit(&o).unwrap();
        o.shuffle(&mut seeded(seed + 1));
        let b = elo_fit(&o).unwrap();
        for (k, v) in &a.ratings {
            prop_assert!((v - b.ratings[k]).abs() < 1e-6);
        }
        prop_assert!((a.ratings.values().sum::<f64>() / 4.0 - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_knockout_finds_argmax_for_any_order(qs in prop::collection::vec(0.0..=1.0f64, 2..20), seed in any::<u64>()) {
        let cands: Vec<Demonstration> = qs.iter().enumerate().map(|(i, &q)| Demonstration { input: 0, payload: i as u64, quality: Quality::new(q).unwrap(), source: 0 }).collect();
        let s = knockout_select(&cands, &AnnotatorModel::noiseless(), &mut seeded(seed)).unwrap();
        let max = qs.iter().copied().fold(f64::MIN, f64::max);
        prop_assert_eq!(s.best.quality.get(), max);
        prop_assert_eq!(s.comparisons, qs.len() - 1);
        prop_assert_eq!(s.rejected.len(), qs.len() - 1);
    }
}
