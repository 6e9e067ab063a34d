use rjpt_core::analysis::{bridge_partition, empirical_bayes_select, free_energy, model_posterior_marginal, summarize_peaks};
use rjpt_core::model::{energy, synthetic_priors};
use rjpt_core::sampler;
use rjpt_core::synth::{generate, s4_truth, three_peak_truth};
use rjpt_core::{Ladder, SamplerConfig, SamplerSchedule};

#[test]
fn three_separated_peaks_are_recovered() {
    let truth = three_peak_truth(128, 7);
    let data = generate(&truth).unwrap();
    let ladder = Ladder::geometric(144.0, 1.4, 24, true).unwrap();
    let mut cfg = SamplerConfig::new(synthetic_priors(0, 6).unwrap(), ladder);
    cfg.seed = 11;
    cfg.schedule = SamplerSchedule {
        burnin_mcs: 1500,
        sampling_mcs: 3000,
        thinning: 5,
        record_rungs: (16..24).collect(),
        ..SamplerSchedule::default()
    };
    let t = sampler::run(&data, &cfg).unwrap();
    let curve = free_energy(&bridge_partition(&t).unwrap(), &t.betas, t.n);
    let post = model_posterior_marginal(&t).unwrap();
    let sel = empirical_bayes_select(&curve, &post).unwrap();
    assert_eq!(sel.k_star, 3, "{sel:?}");
    assert!(sel.rung >= 16, "{sel:?}");
    let summary = summarize_peaks(&t, 3, sel.rung).unwrap();
    let mut centers: Vec<f64> = truth.config.peaks.iter().map(|p| p.center).collect();
    centers.sort_by(f64::total_cmp);
    for (s, c) in summary.peaks.iter().zip(centers) {
        assert!((s.center.mean - c).abs() <= 3.0 * s.center.sd, "{:?} vs {c}", s.center);
    }
}

#[test]
fn s4_residual_energy_matches_noise_level() {
    let truth = s4_truth();
    let data = generate(&truth).unwrap();
    let e = energy(&truth.config, &data);
    let expect = 1.0 / (2.0 * truth.b0);
    assert!((e - expect).abs() <= 0.1 * expect, "{e} vs {expect}");
}
