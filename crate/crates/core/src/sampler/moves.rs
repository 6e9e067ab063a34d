//! Within-rung moves: Metropolis-Hastings scans over every scalar parameter
//! and the birth/death pair of reversible jumps.

use rand::Rng;
use rand_distr::StandardNormal;

use super::chain::{ChainState, ParamKind, ReplicaState};
use super::trace::RungStats;
use crate::model::{KPrior, Peak, PriorSpec, SpectralDataset};

/// Metropolis decision in log space. One uniform is drawn per call.
#[inline]
pub(crate) fn metropolis<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    if log_ratio >= 0.0 {
        true
    } else {
        u < log_ratio.exp()
    }
}

/// `-n b (E' - E)`, zero at `b = 0` regardless of the energies.
#[inline]
pub(crate) fn tempered_delta(n: usize, b: f64, e_new: f64, e_old: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        -(n as f64) * b * (e_new - e_old)
    }
}

/// Probability of proposing a birth at count `k`: 1 at `K_min`, 0 at
/// `K_max`, 1/2 in between.
pub fn birth_probability(k: usize, k_prior: &KPrior) -> f64 {
    let (lo, hi) = (k_prior.k_min(), k_prior.k_max());
    if lo == hi {
        0.0
    } else if k <= lo {
        1.0
    } else if k >= hi {
        0.0
    } else {
        0.5
    }
}

/// Probability of proposing a death at count `k`.
pub fn death_probability(k: usize, k_prior: &KPrior) -> f64 {
    let (lo, hi) = (k_prior.k_min(), k_prior.k_max());
    if lo == hi {
        0.0
    } else {
        1.0 - birth_probability(k, k_prior)
    }
}

/// Per-kind acceptance flags of one local scan: `(accepted, attempted)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanOutcome {
    pub accepted: [u32; 5],
    pub attempted: [u32; 5],
}

impl ScanOutcome {
    fn record(&mut self, kind: ParamKind, ok: bool) {
        self.attempted[kind.index()] += 1;
        if ok {
            self.accepted[kind.index()] += 1;
        }
    }
}

/// One Metropolis-Hastings update of every scalar parameter of the replica,
/// peaks first in list order (amplitude, precision, center), then the
/// continuum offset and slope.
pub fn local_update<R: Rng + ?Sized>(
    state: &mut ReplicaState,
    b: f64,
    data: &SpectralDataset,
    priors: &PriorSpec,
    rng: &mut R,
) -> ScanOutcome {
    let mut out = ScanOutcome::default();
    let n = data.len();
    let steps = state.step_sizes;
    let chain = &mut state.chain;
    for k in 0..chain.peak_count() {
        for kind in [ParamKind::Amplitude, ParamKind::Precision, ParamKind::Center] {
            let old = chain.config().peaks[k];
            let eps: f64 = rng.sample(StandardNormal);
            let mut p = old;
            let (lp_old, lp_new) = match kind {
                ParamKind::Amplitude => {
                    p.amplitude += steps.get(kind) * eps;
                    (priors.amplitude.ln_pdf(old.amplitude), priors.amplitude.ln_pdf(p.amplitude))
                }
                ParamKind::Precision => {
                    p.precision += steps.get(kind) * eps;
                    (priors.precision.ln_pdf(old.precision), priors.precision.ln_pdf(p.precision))
                }
                _ => {
                    p.center += steps.get(kind) * eps;
                    (priors.center.ln_pdf(old.center), priors.center.ln_pdf(p.center))
                }
            };
            let in_support = lp_new > f64::NEG_INFINITY && p.amplitude > 0.0 && p.precision > 0.0;
            let ok = if in_support {
                let e_new = chain.propose_peak(data, k, &p);
                let lr = tempered_delta(n, b, e_new, chain.energy()) + (lp_new - lp_old);
                let ok = metropolis(lr, rng);
                if ok {
                    chain.commit_peak(k, p, e_new);
                }
                ok
            } else {
                let _: f64 = rng.random();
                false
            };
            out.record(kind, ok);
        }
    }
    if let (Some(c), Some(cp)) = (chain.config().continuum, priors.continuum) {
        let eps: f64 = rng.sample(StandardNormal);
        let offset = c.offset + steps.get(ParamKind::Offset) * eps;
        let e_new = chain.propose_continuum(data, offset, c.slope);
        let lr = tempered_delta(n, b, e_new, chain.energy()) + cp.offset.ln_pdf(offset) - cp.offset.ln_pdf(c.offset);
        let ok = metropolis(lr, rng);
        if ok {
            chain.commit_continuum(offset, c.slope, e_new);
        }
        out.record(ParamKind::Offset, ok);

        let c = chain.config().continuum.expect("continuum present");
        let eps: f64 = rng.sample(StandardNormal);
        let slope = c.slope + steps.get(ParamKind::Slope) * eps;
        let lp_new = cp.slope.ln_pdf(slope);
        let ok = if slope >= 0.0 && lp_new > f64::NEG_INFINITY {
            let e_new = chain.propose_continuum(data, c.offset, slope);
            let lr = tempered_delta(n, b, e_new, chain.energy()) + lp_new - cp.slope.ln_pdf(c.slope);
            let ok = metropolis(lr, rng);
            if ok {
                chain.commit_continuum(c.offset, slope, e_new);
            }
            ok
        } else {
            let _: f64 = rng.random();
            false
        };
        out.record(ParamKind::Slope, ok);
    }
    out
}

/// Log acceptance ratio of appending a peak that moves the energy from
/// `e_old` to `e_new` at count `k`.
pub fn birth_log_ratio(n: usize, b: f64, e_old: f64, e_new: f64, k: usize, k_prior: &KPrior) -> f64 {
    tempered_delta(n, b, e_new, e_old) + death_probability(k + 1, k_prior).ln() - birth_probability(k, k_prior).ln()
        + k_prior.ln_prob(k + 1)
        - k_prior.ln_prob(k)
}

/// Log acceptance ratio of deleting a peak at count `k`. Inverse of
/// [`birth_log_ratio`] taken from `k - 1`.
pub fn death_log_ratio(n: usize, b: f64, e_old: f64, e_new: f64, k: usize, k_prior: &KPrior) -> f64 {
    tempered_delta(n, b, e_new, e_old) + birth_probability(k - 1, k_prior).ln() - death_probability(k, k_prior).ln()
        + k_prior.ln_prob(k - 1)
        - k_prior.ln_prob(k)
}

/// Appends a peak drawn from its prior. No-op returning `false` at `K_max`.
pub fn birth_move<R: Rng + ?Sized>(
    chain: &mut ChainState,
    b: f64,
    data: &SpectralDataset,
    priors: &PriorSpec,
    rng: &mut R,
) -> bool {
    let k = chain.peak_count();
    if k >= priors.k.k_max() {
        return false;
    }
    let p: Peak = crate::model::sample_peak_from_prior(priors, rng);
    let e_new = chain.propose_birth(data, &p);
    let lr = birth_log_ratio(data.len(), b, chain.energy(), e_new, k, &priors.k);
    let ok = metropolis(lr, rng);
    if ok {
        chain.commit_birth(p, e_new);
    }
    ok
}

/// Removes a uniformly chosen peak. No-op returning `false` at `K_min`.
pub fn death_move<R: Rng + ?Sized>(
    chain: &mut ChainState,
    b: f64,
    data: &SpectralDataset,
    priors: &PriorSpec,
    rng: &mut R,
) -> bool {
    let k = chain.peak_count();
    if k <= priors.k.k_min() || k == 0 {
        return false;
    }
    let j = rng.random_range(0..k);
    let e_new = chain.propose_death(j);
    let lr = death_log_ratio(data.len(), b, chain.energy(), e_new, k, &priors.k);
    let ok = metropolis(lr, rng);
    if ok {
        chain.commit_death(j, e_new);
    }
    ok
}

/// Which half of a jump was attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    Birth,
    Death,
    None,
}

/// Birth with probability `r_m(K)`, otherwise death.
pub fn jump_move<R: Rng + ?Sized>(
    chain: &mut ChainState,
    b: f64,
    data: &SpectralDataset,
    priors: &PriorSpec,
    rng: &mut R,
) -> (JumpKind, bool) {
    let k = chain.peak_count();
    let pb = birth_probability(k, &priors.k);
    let pd = death_probability(k, &priors.k);
    let kind = if pb == 1.0 {
        JumpKind::Birth
    } else if pd == 1.0 {
        JumpKind::Death
    } else if pb == 0.0 && pd == 0.0 {
        JumpKind::None
    } else if rng.random::<f64>() < pb {
        JumpKind::Birth
    } else {
        JumpKind::Death
    };
    let ok = match kind {
        JumpKind::Birth => birth_move(chain, b, data, priors, rng),
        JumpKind::Death => death_move(chain, b, data, priors, rng),
        JumpKind::None => false,
    };
    (kind, ok)
}

pub(crate) fn record_jump(stats: &mut RungStats, kind: JumpKind, ok: bool) {
    match kind {
        JumpKind::Birth => {
            stats.birth.attempted += 1;
            stats.birth.accepted += ok as u64;
        }
        JumpKind::Death => {
            stats.death.attempted += 1;
            stats.death.accepted += ok as u64;
        }
        JumpKind::None => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{energy, synthetic_priors, ModelConfiguration, SpectralDataset};
    use crate::sampler::chain::StepSizes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_point() -> SpectralDataset {
        SpectralDataset::new(vec![1.0, 2.0], vec![1.0, 0.5]).unwrap()
    }

    #[test]
    fn proposal_probabilities() {
        let kp = KPrior::uniform(0, 15).unwrap();
        assert_eq!(birth_probability(0, &kp), 1.0);
        assert_eq!(death_probability(0, &kp), 0.0);
        assert_eq!(birth_probability(15, &kp), 0.0);
        assert_eq!(death_probability(15, &kp), 1.0);
        assert_eq!(birth_probability(7, &kp), 0.5);
        assert_eq!(death_probability(7, &kp), 0.5);
        let pinned = KPrior::uniform(3, 3).unwrap();
        assert_eq!(birth_probability(3, &pinned), 0.0);
        assert_eq!(death_probability(3, &pinned), 0.0);
    }

    #[test]
    fn neutral_birth_and_death_accept_with_probability_one() {
        let kp = KPrior::uniform(0, 15).unwrap();
        // interior K, unchanged energy, uniform p(K)
        assert_eq!(birth_log_ratio(10, 3.0, 0.4, 0.4, 5, &kp), 0.0);
        assert_eq!(death_log_ratio(10, 3.0, 0.4, 0.4, 5, &kp), 0.0);
        // forced birth from K_min: r_d(1) / r_b(0) = 1/2
        assert!((birth_log_ratio(10, 3.0, 0.4, 0.4, 0, &kp) - 0.5f64.ln()).abs() < 1e-15);
        assert!((death_log_ratio(10, 3.0, 0.4, 0.4, 1, &kp) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn death_ratio_by_hand_on_two_points() {
        // Data y = (1, 0.5) at x = (1, 2); one peak sits on the first point.
        let d = two_point();
        let kp = KPrior::uniform(0, 4).unwrap();
        let peak = Peak::new(1.0, 1e6, 1.0);
        let with = ModelConfiguration::gaussian(vec![peak]);
        let e1 = energy(&with, &d); // residuals (0, 0.5) -> 0.25/4
        let e0 = energy(&ModelConfiguration::empty(), &d); // (1 + 0.25)/4
        assert!((e1 - 0.0625).abs() < 1e-15);
        assert!((e0 - 0.3125).abs() < 1e-15);
        let b = 2.0;
        // exp(-n b (e0 - e1)) * r_b(0)/r_d(1) = exp(-2*2*0.25) * 1/0.5
        let hand = (-1.0f64).exp() * 2.0;
        let lr = death_log_ratio(2, b, e1, e0, 1, &kp);
        assert!((lr.exp() - hand).abs() < 1e-14);
        // at an interior count the r-ratio is 1
        let lr = death_log_ratio(2, b, e1, e0, 2, &kp);
        assert!((lr.exp() - (-1.0f64).exp()).abs() < 1e-14);
    }

    /// The death acceptance written with the explicit selection factors and
    /// the prior-density proposal for the reverse birth equals the reduced
    /// formula.
    #[test]
    fn death_ratio_matches_full_density_ratio() {
        let priors = synthetic_priors(0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| (2.0 * v).cos()).collect();
        let d = SpectralDataset::new(x, y).unwrap();
        let (n, b) = (d.len(), 4.0);
        for _ in 0..50 {
            let k = rng.random_range(1..=6usize);
            let peaks: Vec<Peak> = (0..k).map(|_| crate::model::sample_peak_from_prior(&priors, &mut rng)).collect();
            let j = rng.random_range(0..k);
            let before = ModelConfiguration::gaussian(peaks.clone());
            let mut rest = peaks.clone();
            let removed = rest.remove(j);
            let after = ModelConfiguration::gaussian(rest);
            let log_target = |c: &ModelConfiguration| {
                crate::model::prior_logdensity(c, &priors) - n as f64 * b * energy(c, &d)
            };
            // forward: death chosen, peak j picked with 1/k
            let fwd = death_probability(k, &priors.k).ln() - (k as f64).ln();
            // reverse: birth chosen, draw from prior g = phi, placed at slot j with 1/k
            let rev = birth_probability(k - 1, &priors.k).ln() + priors.peak_ln_pdf(&removed) - (k as f64).ln();
            let full = log_target(&after) - log_target(&before) + rev - fwd;
            let reduced = death_log_ratio(n, b, energy(&before, &d), energy(&after, &d), k, &priors.k);
            assert!((full - reduced).abs() < 1e-8, "{full} vs {reduced}");
        }
    }

    #[test]
    fn birth_then_death_restores_configuration() {
        let x: Vec<f64> = (0..64).map(|i| i as f64 * 3.0 / 63.0).collect();
        let d = SpectralDataset::new(x.clone(), vec![0.0; 64]).unwrap();
        let start = ModelConfiguration::gaussian(vec![Peak::new(1.0, 100.0, 1.0), Peak::new(0.5, 60.0, 2.0)]);
        let mut c = ChainState::new(start.clone(), &d);
        let e0 = c.energy();
        let p = Peak::new(0.8, 120.0, 0.5);
        let e = c.propose_birth(&d, &p);
        c.commit_birth(p, e);
        let e = c.propose_death(2);
        c.commit_death(2, e);
        assert_eq!(c.config(), &start);
        assert!((c.energy() - e0).abs() < 1e-14);
    }

    #[test]
    fn jump_choice_at_bounds() {
        let priors = synthetic_priors(2, 4).unwrap();
        let d = SpectralDataset::new(vec![0.5, 1.0], vec![0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Peak::new(1.0, 100.0, 1.0);
        let mut lo = ChainState::new(ModelConfiguration::gaussian(vec![p; 2]), &d);
        let mut hi = ChainState::new(ModelConfiguration::gaussian(vec![p; 4]), &d);
        let mut births = 0;
        for _ in 0..200 {
            assert_eq!(jump_move(&mut lo.clone(), 1.0, &d, &priors, &mut rng).0, JumpKind::Birth);
            assert_eq!(jump_move(&mut hi.clone(), 1.0, &d, &priors, &mut rng).0, JumpKind::Death);
            let mut mid = ChainState::new(ModelConfiguration::gaussian(vec![p; 3]), &d);
            if jump_move(&mut mid, 1.0, &d, &priors, &mut rng).0 == JumpKind::Birth {
                births += 1;
            }
        }
        assert!((70..=130).contains(&births), "{births}");
        assert!(!birth_move(&mut hi, 1.0, &d, &priors, &mut rng));
        assert!(!death_move(&mut lo, 1.0, &d, &priors, &mut rng));
        assert_eq!(hi.peak_count(), 4);
        assert_eq!(lo.peak_count(), 2);
    }

    #[test]
    fn local_update_rejects_out_of_support_and_accepts_improvements() {
        let priors = synthetic_priors(0, 15).unwrap();
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.06).collect();
        let truth = Peak::new(1.0, 100.0, 1.5);
        let y = x.iter().map(|v| truth.eval(*v)).collect();
        let d = SpectralDataset::new(x, y).unwrap();

        // enormous center step: almost every center proposal leaves [0, 3]
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = ReplicaState {
            rung_index: 0,
            chain: ChainState::new(ModelConfiguration::gaussian(vec![truth]), &d),
            step_sizes: StepSizes([1e-9, 1e-9, 1e6, 0.1, 0.1]),
        };
        let mut outside = 0;
        for _ in 0..100 {
            let before = st.chain.config().peaks[0].center;
            let out = local_update(&mut st, 1.0, &d, &priors, &mut rng);
            let after = st.chain.config().peaks[0].center;
            assert!((0.0..=3.0).contains(&after));
            if out.accepted[ParamKind::Center.index()] == 0 {
                assert_eq!(before, after);
                outside += 1;
            }
        }
        assert!(outside > 95);

        // b = 0: acceptance only depends on the prior ratio, so a flat prior
        // direction (center) always accepts inside support
        let mut st = ReplicaState {
            rung_index: 0,
            chain: ChainState::new(ModelConfiguration::gaussian(vec![Peak::new(1.0, 100.0, 1.5)]), &d),
            step_sizes: StepSizes([1e-9, 1e-9, 1e-3, 0.1, 0.1]),
        };
        for _ in 0..100 {
            let out = local_update(&mut st, 0.0, &d, &priors, &mut rng);
            assert_eq!(out.accepted[ParamKind::Center.index()], 1);
        }

        // a move towards the truth with higher prior density is always accepted
        let far = Peak::new(1.0, 100.0, 1.6);
        let c = ChainState::new(ModelConfiguration::gaussian(vec![far]), &d);
        let mut c2 = c.clone();
        let e_new = c2.propose_peak(&d, 0, &truth);
        assert!(e_new < c.energy());
        let lr = tempered_delta(d.len(), 10.0, e_new, c.energy());
        assert!(lr > 0.0);
        assert!((0..100).all(|_| metropolis(lr, &mut rng)));
    }
}
