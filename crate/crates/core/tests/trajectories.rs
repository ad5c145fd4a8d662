use maser_ldp::model::{stationary, MaserParams};
use maser_ldp::spectral::{cumulants, spectral_bound, spectral_gap};
use maser_ldp::trajectories::{dwell_times, ensemble, simulate, Initial, JumpType, Phase};
use proptest::prelude::*;

fn params(nex: f64, alpha: f64) -> MaserParams {
    MaserParams::from_alpha(nex, alpha, 0.15).unwrap()
}

#[test]
fn ensemble_mean_and_variance_rates() {
    let p = params(10.0, 2.0);
    let c = cumulants(&p, 2).unwrap();
    let n = 10_000;
    let stats = ensemble(&p, Initial::Stationary, 200.0, n, &[], 11).unwrap();
    let t = stats.t_final;
    // SE of the mean of Λ_t/t, and of a sample variance under near-normality
    let se_mean = (stats.var_rate / t / n as f64).sqrt();
    let se_var = stats.var_rate * (2.0 / (n as f64 - 1.0)).sqrt();
    let z_mean = (stats.mean_rate - c.m) / se_mean;
    let z_var = (stats.var_rate - c.v) / se_var;
    println!("mean z = {z_mean:.3}, variance z = {z_var:.3}");
    assert!(z_mean.abs() <= 3.0, "mean {} vs {}", stats.mean_rate, c.m);
    assert!(z_var.abs() <= 5.0, "variance {} vs {}", stats.var_rate, c.v);
}

#[test]
fn bistable_paths_dwell_in_both_phases() {
    let p = params(50.0, 6.6);
    let ss = stationary(&p, 1e-14).unwrap();
    let peaks = ss.local_maxima();
    assert_eq!(peaks.len(), 2);
    let threshold = (peaks[0]..=peaks[1])
        .min_by(|&a, &b| ss.probs[a].total_cmp(&ss.probs[b]))
        .unwrap();
    let traj = simulate(&p, 0, 20_000.0, 5).unwrap();
    let dwells = dwell_times(&traj, threshold);
    let mean_of = |ph: Phase| {
        let d: Vec<f64> = dwells
            .iter()
            .filter(|d| d.phase == ph)
            .map(|d| d.duration)
            .collect();
        (d.len(), d.iter().sum::<f64>() / d.len().max(1) as f64)
    };
    let (n_low, low) = mean_of(Phase::Low);
    let (n_high, high) = mean_of(Phase::High);
    let mixing = 1.0 / spectral_gap(&params(50.0, 3.0), 0.0).unwrap();
    println!("low {n_low} x {low:.1}, high {n_high} x {high:.1}, mixing at alpha=3 {mixing:.3}");
    assert!(n_low >= 2 && n_high >= 2);
    assert!(low >= 10.0 * mixing && high >= 10.0 * mixing);
    // the two phases count at clearly different rates
    let rate_in = |ph: Phase| {
        let mut time = 0.0;
        let mut counts = 0usize;
        let mut start = 0.0;
        let mut level = traj.initial;
        let below = |n: usize| n < threshold;
        for e in &traj.events {
            if (below(level) == (ph == Phase::Low)) && e.kind == JumpType::GroundDetection {
                counts += 1;
            }
            if below(level) == (ph == Phase::Low) {
                time += e.time - start;
            }
            start = e.time;
            level = e.level;
        }
        counts as f64 / time
    };
    assert!(rate_in(Phase::High) > 2.0 * rate_in(Phase::Low));
}

#[test]
fn occupation_converges_to_stationary_law() {
    let p = params(10.0, 2.0);
    let ss = stationary(&p, 1e-14).unwrap();
    let traj = simulate(&p, 0, 1e4, 3).unwrap();
    let occ = traj.occupation(ss.dim);
    let outside = 1.0 - occ.iter().sum::<f64>();
    let tv = 0.5
        * (occ
            .iter()
            .zip(&ss.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            + outside);
    println!("total variation {tv:.4}");
    assert!(tv < 0.02);
}

#[test]
fn counting_consistency_at_small_field() {
    let p = params(10.0, 2.0);
    let t = 50.0;
    let s_list = [-0.05, 0.05];
    let stats = ensemble(&p, Initial::Stationary, t, 20_000, &s_list, 99).unwrap();
    for est in &stats.mgf_estimates {
        let lambda = spectral_bound(&p, est.s, 1e-12).unwrap().lambda_s;
        let empirical = est.estimate.ln() / t;
        let tol = 3.0 * est.standard_error / est.estimate / t + 1.0 / t;
        println!("s = {}: {empirical} vs {lambda} (tol {tol:e})", est.s);
        assert!((empirical - lambda).abs() <= tol);
    }
}

#[test]
fn ensembles_are_reproducible() {
    let p = params(10.0, 2.0);
    let a = ensemble(&p, Initial::Level(0), 5.0, 200, &[0.3], 42).unwrap();
    let b = ensemble(&p, Initial::Level(0), 5.0, 200, &[0.3], 42).unwrap();
    assert_eq!(a, b);
    let c = ensemble(&p, Initial::Level(0), 5.0, 200, &[0.3], 43).unwrap();
    assert_ne!(a.counts, c.counts);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn paths_respect_jump_rules(
        nex in 0.0f64..30.0,
        alpha in 0.0f64..9.0,
        initial in 0usize..20,
        seed in any::<u64>(),
    ) {
        let p = params(nex, alpha);
        let traj = simulate(&p, initial, 20.0, seed).unwrap();
        let mut level = traj.initial;
        let mut last = 0.0;
        let mut ones = 0;
        for e in &traj.events {
            prop_assert!(e.time > last && e.time <= traj.t_final);
            let expected = match e.kind {
                JumpType::GroundDetection => { ones += 1; level + 1 }
                JumpType::ThermalGain => level + 1,
                JumpType::Loss => { prop_assert!(level > 0); level - 1 }
            };
            prop_assert_eq!(e.level, expected);
            level = e.level;
            last = e.time;
        }
        prop_assert_eq!(traj.count_1, ones);
        let total: f64 = traj.segments().iter().map(|(a, b, _)| b - a).sum();
        prop_assert!((total - traj.t_final).abs() <= 1e-9 * traj.t_final);
    }
}
