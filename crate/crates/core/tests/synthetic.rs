use cmab_select::bandits::{global_winner_baseline, run_replay, PolicyKind, ReplayConfig};
use cmab_select::binning::BinConfig;
use cmab_select::data::{summarize, BanditLog, Column};
use cmab_select::scoring::{score_all_features, CombineConfig};
use cmab_select::synth::{generate, true_best_arm, FeatureClass, GeneratorConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn continuous(log: &BanditLog, index: usize) -> &[f64] {
    match log.column(index) {
        Column::Continuous(v) => v,
        Column::Categorical { .. } => panic!("expected continuous column"),
    }
}

#[test]
fn null_effect_scores_vanish() {
    let config = GeneratorConfig { effect: 0.0, seed: 3, ..GeneratorConfig::default() };
    let (log, _) = generate(&config).unwrap();
    let reports = score_all_features(&log, &BinConfig::default(), &CombineConfig::default()).unwrap();
    for r in &reports {
        assert!(r.hie.abs() < 0.01, "{}: hie {}", r.feature, r.hie);
        assert!(r.hdd.abs() < 0.01, "{}: hdd {}", r.feature, r.hdd);
    }
    let summary = summarize(&log);
    let rates: Vec<f64> = summary.arms.iter().map(|a| a.rate.unwrap()).collect();
    for r in &rates {
        assert!((r - 0.5).abs() < 0.015, "{rates:?}");
    }
}

#[test]
fn segment_winners_match_construction() {
    let config = GeneratorConfig { seed: 17, ..GeneratorConfig::default() };
    let (log, truth) = generate(&config).unwrap();
    let k = config.k;
    let mut matches = 0;
    let mut segments = 0;
    for j in 0..config.d_hte {
        let x = continuous(&log, j);
        let mut pulls = vec![vec![0u64; k]; k];
        let mut wins = vec![vec![0u64; k]; k];
        let mut labels = vec![vec![0u64; k]; k];
        for e in 0..log.len() {
            let s = ((x[e] * k as f64) as usize).min(k - 1);
            pulls[s][log.arms()[e]] += 1;
            wins[s][log.arms()[e]] += u64::from(log.rewards()[e]);
            labels[s][truth.best_arm[e]] += 1;
        }
        for s in 0..k {
            let rate = |a: usize| wins[s][a] as f64 / pulls[s][a] as f64;
            let empirical = (0..k).max_by(|&a, &b| rate(a).total_cmp(&rate(b))).unwrap();
            let majority = (0..k).max_by_key(|&a| labels[s][a]).unwrap();
            segments += 1;
            if empirical == majority && empirical == (s + j) % k {
                matches += 1;
            }
        }
    }
    assert!(matches as f64 >= 0.95 * segments as f64, "{matches}/{segments}");
}

/// Independent evaluation of the documented closed form for one arm.
fn closed_form(config: &GeneratorConfig, x: &[f64], arm: usize) -> f64 {
    let k = config.k as f64;
    let mut hte = 0.0;
    for (j, &xj) in x.iter().take(config.d_hte).enumerate() {
        let segment = (xj * k).floor().min(k - 1.0) as usize;
        hte += if (segment + j) % config.k == arm { 1.0 } else { -1.0 / (k - 1.0) };
    }
    let mut corr = 0.0;
    for c in 0..config.d_corr {
        corr += (x[config.d_hte + c] - 0.5) * 2.0;
    }
    let p = config.base + config.effect / config.d_corr as f64 * corr + config.effect * hte / config.d_hte as f64;
    p.clamp(0.01, 0.99)
}

#[test]
fn best_arm_matches_enumeration() {
    let config = GeneratorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let x: Vec<f64> = (0..config.features()).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let probs: Vec<f64> = (0..config.k).map(|a| closed_form(&config, &x, a)).collect();
        let mut expected = 0;
        for a in 1..config.k {
            if probs[a] > probs[expected] {
                expected = a;
            }
        }
        assert_eq!(true_best_arm(&config, &x), expected);
    }
}

#[test]
fn logging_is_uniform() {
    for seed in 0..5 {
        let config = GeneratorConfig { seed, ..GeneratorConfig::default() };
        let (log, _) = generate(&config).unwrap();
        let n = log.len() as f64;
        let p = 1.0 / config.k as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        for pulls in log.arm_pulls() {
            assert!((pulls as f64 - n * p).abs() <= 3.0 * sd, "seed {seed}: {pulls}");
        }
    }
}

fn pearson(x: &[f64], y: &[u8]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, f64::from(b) - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn correlational_features_move_reward_but_not_hie() {
    let config = GeneratorConfig { seed: 8, ..GeneratorConfig::default() };
    let (log, truth) = generate(&config).unwrap();
    let reports = score_all_features(&log, &BinConfig::default(), &CombineConfig::default()).unwrap();
    let hie = |name: &str| reports.iter().find(|r| r.feature == name).unwrap().hie;
    let weakest_hte = truth
        .features
        .iter()
        .filter(|f| f.class == FeatureClass::Hte)
        .map(|f| hie(&f.feature))
        .fold(f64::INFINITY, f64::min);
    for (i, f) in truth.features.iter().enumerate() {
        if f.class == FeatureClass::Correlational {
            let r = pearson(continuous(&log, i), log.rewards());
            assert!(r.abs() > 0.02, "{}: corr {r}", f.feature);
            assert!(hie(&f.feature) < 0.2 * weakest_hte, "{}", f.feature);
        }
    }
}

#[test]
fn replay_matches_about_n_over_k() {
    let mut counts = Vec::new();
    for seed in 0..4 {
        let config = GeneratorConfig { n: 20_000, seed, ..GeneratorConfig::default() };
        let (log, _) = generate(&config).unwrap();
        let n = log.len() as f64;
        let p = 1.0 / config.k as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        for policy in PolicyKind::ALL {
            let result =
                run_replay(&log, &ReplayConfig { seed, ..ReplayConfig::new(policy, vec!["x0".into()]) }).unwrap();
            assert!((result.matched_count as f64 - n * p).abs() <= 3.0 * sd, "{policy}: {}", result.matched_count);
            assert!(result.flags.is_empty(), "{:?}", result.flags);
            counts.push(result.matched_count);
        }
    }
    assert!(counts.iter().all(|&c| c > 0));
}

#[test]
fn replay_is_reproducible() {
    let config = GeneratorConfig { n: 5_000, seed: 2, ..GeneratorConfig::default() };
    let (log, _) = generate(&config).unwrap();
    for policy in PolicyKind::ALL {
        let replay = ReplayConfig { seed: 77, ..ReplayConfig::new(policy, vec!["x1".into(), "x8".into()]) };
        let a = run_replay(&log, &replay).unwrap();
        let b = run_replay(&log, &replay).unwrap();
        assert!(a.same_outcome(&b), "{policy}");
    }
}

#[test]
fn hte_feature_beats_irrelevant_in_replay() {
    let mut gap = 0.0;
    for seed in 0..3 {
        let config = GeneratorConfig { seed, ..GeneratorConfig::default() };
        let (log, _) = generate(&config).unwrap();
        let run = |f: &str| {
            run_replay(&log, &ReplayConfig { seed, ..ReplayConfig::new(PolicyKind::CohortTs, vec![f.into()]) }).unwrap()
        };
        gap += run("x0").average_reward - run("x9").average_reward;
        assert!(run("x0").average_reward > global_winner_baseline(&log).average_reward);
    }
    assert!(gap > 0.0);
}

#[test]
fn permuted_feature_falls_below_hte_features() {
    for seed in 0..3u64 {
        let config = GeneratorConfig { seed, ..GeneratorConfig::default() };
        let (log, truth) = generate(&config).unwrap();
        let mut permuted = continuous(&log, 0).to_vec();
        permuted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 1000));
        let mut columns = log.columns().to_vec();
        columns.push(Column::Continuous(permuted));
        let mut names: Vec<String> = log.descriptors().iter().map(|d| d.name.clone()).collect();
        names.push("x0_permuted".into());
        let augmented = BanditLog::new(log.k(), names, log.arms().to_vec(), log.rewards().to_vec(), columns).unwrap();

        let reports = score_all_features(&augmented, &BinConfig::default(), &CombineConfig::default()).unwrap();
        let get = |name: &str| reports.iter().find(|r| r.feature == name).unwrap();
        let null = get("x0_permuted");
        for f in truth.features.iter().filter(|f| f.class == FeatureClass::Hte) {
            assert!(null.hie < get(&f.feature).hie, "seed {seed}: {}", f.feature);
            assert!(null.hdd < get(&f.feature).hdd, "seed {seed}: {}", f.feature);
        }
    }
}
