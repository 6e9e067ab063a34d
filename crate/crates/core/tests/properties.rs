use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rjpt_core::analysis::{
    bridge_log_factors, bridge_partition, free_energy, model_posterior_from_partitions, model_posterior_marginal,
    summarize_peaks,
};
use rjpt_core::model::{energy, synthetic_priors, KPrior, ModelConfiguration, Peak};
use rjpt_core::sampler::{
    self, birth_log_ratio, death_log_ratio, exchange_log_ratio, MoveStats, RungTrace, Snapshot, TraceSet,
};
use rjpt_core::synth::{generate, three_peak_truth};
use rjpt_core::{Execution, Ladder, SamplerConfig, SamplerSchedule};

fn small_run(seed: u64, k_min: usize, k_max: usize, exec: Execution) -> (rjpt_core::SpectralDataset, TraceSet) {
    let data = generate(&three_peak_truth(24, seed ^ 0x55)).unwrap();
    let mut cfg = SamplerConfig::new(
        synthetic_priors(k_min, k_max).unwrap(),
        Ladder::new(vec![0.0, 1.0, 10.0, 100.0]).unwrap(),
    );
    cfg.seed = seed;
    cfg.execution = exec;
    cfg.schedule = SamplerSchedule {
        burnin_mcs: 3,
        sampling_mcs: 12,
        inner_repeats: 2,
        thinning: 1,
        record_rungs: vec![0, 1, 2, 3],
        snapshot_thinning: 1,
    };
    let t = sampler::run(&data, &cfg).unwrap();
    (data, t)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn recorded_states_are_coherent_and_in_bounds(seed in any::<u64>(), k_min in 0usize..3, extra in 0usize..4) {
        let k_max = k_min + extra;
        let (data, t) = small_run(seed, k_min, k_max, Execution::Parallel);
        for r in &t.rungs {
            prop_assert!(r.k.iter().all(|k| (k_min..=k_max).contains(&(*k as usize))));
            for (s, (e, k)) in r.snapshots.as_ref().unwrap().iter().zip(r.energy.iter().zip(&r.k)) {
                prop_assert_eq!(s.config.peak_count(), *k as usize);
                prop_assert_eq!(energy(&s.config, &data), *e);
            }
        }
    }

    #[test]
    fn outputs_are_finite_and_ladder_monotone(seed in any::<u64>()) {
        let (_, t) = small_run(seed, 0, 4, Execution::Sequential);
        let log_z = bridge_partition(&t).unwrap();
        prop_assert_eq!(log_z[0], 0.0);
        prop_assert!(log_z.iter().all(|v| v.is_finite()));
        prop_assert!(log_z.windows(2).all(|w| w[1] <= w[0]));
        let energies: Vec<&[f64]> = t.rungs.iter().map(|r| r.energy.as_slice()).collect();
        for f in bridge_log_factors(&energies, &t.betas, t.n).unwrap() {
            prop_assert!(f <= 0.0 && f.is_finite());
        }
        let curve = free_energy(&log_z, &t.betas, t.n);
        prop_assert!(curve.free_energy[0].is_none());
        prop_assert!(curve.free_energy[1..].iter().all(|f| f.is_some_and(f64::is_finite)));
        let post = model_posterior_marginal(&t).unwrap();
        for p in &post.probs {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn results_do_not_depend_on_execution(seed in any::<u64>()) {
        let (_, a) = small_run(seed, 0, 3, Execution::Sequential);
        let (_, b) = small_run(seed, 0, 3, Execution::Parallel);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn acceptance_probabilities_stay_in_unit_interval(
        n in 1usize..5000,
        b in 0.0f64..1e6,
        db in 0.0f64..1e6,
        e1 in 0.0f64..1e8,
        e2 in 0.0f64..1e8,
        k in 0usize..15,
    ) {
        let kp = KPrior::uniform(0, 15).unwrap();
        let ratios = [
            exchange_log_ratio(n, b, b + db, e1, e2),
            birth_log_ratio(n, b, e1, e2, k, &kp),
            death_log_ratio(n, b, e1, e2, k + 1, &kp),
        ];
        for r in ratios {
            prop_assert!(!r.is_nan());
            let p = r.min(0.0).exp();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn partition_posterior_is_normalised(log_z in prop::collection::vec(-1e4f64..1e4, 1..16)) {
        let kp = KPrior::uniform(0, log_z.len() - 1).unwrap();
        let p = model_posterior_from_partitions(&log_z, &kp);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn peak_summary_ignores_labels(
        configs in prop::collection::vec(
            prop::collection::vec((0.1f64..3.0, 1.0f64..500.0, 0.0f64..3.0), 3),
            1..12,
        ),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snaps = |shuffle: bool, rng: &mut ChaCha8Rng| -> Vec<Snapshot> {
            configs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let mut peaks: Vec<Peak> = c.iter().map(|&(a, r, m)| Peak::new(a, r, m)).collect();
                    if shuffle {
                        peaks.shuffle(rng);
                    }
                    Snapshot { mcs: i as u64, config: ModelConfiguration::gaussian(peaks) }
                })
                .collect()
        };
        let trace = |s: Vec<Snapshot>| TraceSet {
            betas: vec![1.0],
            n: 8,
            k_min: 0,
            k_max: 5,
            rungs: vec![RungTrace { snapshots: Some(s), ..Default::default() }],
            burnin_stats: MoveStats::default(),
            sampling_stats: MoveStats::default(),
            step_sizes: Vec::new(),
        };
        let a = summarize_peaks(&trace(snaps(false, &mut rng)), 3, 0).unwrap();
        let b = summarize_peaks(&trace(snaps(true, &mut rng)), 3, 0).unwrap();
        prop_assert_eq!(a, b);
    }
}
