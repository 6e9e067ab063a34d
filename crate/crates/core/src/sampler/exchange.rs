use rand::Rng;

use super::chain::ReplicaState;
use super::moves::metropolis;

/// Log acceptance of swapping the states of rungs `(l, l + 1)`:
/// `n (b_{l+1} - b_l)(E_{l+1} - E_l)`. Prior and `p(K)` factors cancel
/// because whole states move.
#[inline]
pub fn exchange_log_ratio(n: usize, b_lo: f64, b_hi: f64, e_lo: f64, e_hi: f64) -> f64 {
    n as f64 * (b_hi - b_lo) * (e_hi - e_lo)
}

/// One deterministic sweep over adjacent pairs `l = 0 .. L - 2`. Chains
/// (configuration and caches) swap; step sizes stay with their rung.
pub fn exchange_sweep<R: Rng + ?Sized>(replicas: &mut [ReplicaState], betas: &[f64], n: usize, rng: &mut R) -> Vec<bool> {
    debug_assert_eq!(replicas.len(), betas.len());
    let mut flags = Vec::with_capacity(replicas.len().saturating_sub(1));
    for l in 0..replicas.len().saturating_sub(1) {
        let lr = exchange_log_ratio(n, betas[l], betas[l + 1], replicas[l].chain.energy(), replicas[l + 1].chain.energy());
        let ok = metropolis(lr, rng);
        if ok {
            let (a, b) = replicas.split_at_mut(l + 1);
            std::mem::swap(&mut a[l].chain, &mut b[0].chain);
        }
        flags.push(ok);
    }
    flags
}
