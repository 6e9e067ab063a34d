//! Conventional baseline: an independent fixed-`K` exchange Monte Carlo run
//! for every candidate count, combined through the per-`K` partition
//! functions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{self, FreeEnergyCurve, ModelPosterior};
use crate::error::Result;
use crate::model::{KPrior, SpectralDataset};
use crate::parallel::{self, Execution};
use crate::sampler::{self, SamplerConfig, TraceSet};

/// Result of one fixed-`K` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerK {
    pub k: usize,
    /// `ln z_n(K, b_l)`: the partition function without the likelihood prefactor.
    pub log_z: Vec<f64>,
    pub seconds: f64,
    #[serde(skip)]
    pub traces: Option<TraceSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub betas: Vec<f64>,
    pub n: usize,
    pub per_k: Vec<PerK>,
    /// `ln sum_K p(K) z_n(K, b)` per rung and the free energies derived from it.
    pub combined: FreeEnergyCurve,
    pub posterior: ModelPosterior,
    pub total_seconds: f64,
}

/// How the per-`K` runs are scheduled. Benchmarks use `Sequential` so the
/// reported total is the sum of the per-`K` costs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Sequential,
    ParallelK,
}

/// Seed of the run pinned at `k`.
pub fn pinned_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Sampler configuration of the run pinned at `k`: jumps off and a point-mass
/// count prior.
pub fn pinned_config(cfg: &SamplerConfig, k: usize) -> Result<SamplerConfig> {
    let mut c = cfg.clone();
    c.priors.k = KPrior::new(k, vec![1.0])?;
    c.jumps = false;
    c.seed = pinned_seed(cfg.seed, k);
    Ok(c)
}

/// Runs every `K` in `cfg.priors.k` and combines the partition functions.
/// `keep_traces` retains each per-`K` [`TraceSet`] in the report.
pub fn run_sweep(data: &SpectralDataset, cfg: &SamplerConfig, mode: SweepMode, keep_traces: bool) -> Result<SweepReport> {
    cfg.validate(data)?;
    let ks: Vec<usize> = (cfg.priors.k.k_min()..=cfg.priors.k.k_max()).collect();
    let configs = ks.iter().map(|&k| pinned_config(cfg, k)).collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let one = |c: &SamplerConfig| -> Result<PerK> {
        let t0 = Instant::now();
        let traces = sampler::run(data, c)?;
        let seconds = t0.elapsed().as_secs_f64();
        let log_z = analysis::bridge_partition(&traces)?;
        Ok(PerK {
            k: c.priors.k.k_min(),
            log_z,
            seconds,
            traces: keep_traces.then_some(traces),
        })
    };
    let per_k = match mode {
        SweepMode::Sequential => configs.iter().map(one).collect::<Result<Vec<_>>>()?,
        SweepMode::ParallelK => parallel::map(&configs, Execution::Parallel, one)
            .into_iter()
            .collect::<Result<Vec<_>>>()?,
    };
    let total_seconds = start.elapsed().as_secs_f64();
    let (combined, posterior) = combine(&per_k, &cfg.priors.k, cfg.ladder.betas(), data.len());
    Ok(SweepReport {
        betas: cfg.ladder.betas().to_vec(),
        n: data.len(),
        per_k,
        combined,
        posterior,
        total_seconds,
    })
}

/// `z_n(b) = sum_K p(K) z_n(K, b)` and `p(K | D, b)` from the per-`K` estimates.
pub fn combine(per_k: &[PerK], k_prior: &KPrior, betas: &[f64], n: usize) -> (FreeEnergyCurve, ModelPosterior) {
    let mut log_z = Vec::with_capacity(betas.len());
    let mut probs = Vec::with_capacity(betas.len());
    for l in 0..betas.len() {
        let col: Vec<f64> = per_k.iter().map(|p| p.log_z[l]).collect();
        let weighted: Vec<f64> = per_k.iter().map(|p| k_prior.ln_prob(p.k) + p.log_z[l]).collect();
        log_z.push(analysis::log_sum_exp(&weighted));
        probs.push(analysis::model_posterior_from_partitions(&col, k_prior));
    }
    (
        analysis::free_energy(&log_z, betas, n),
        ModelPosterior {
            k_min: k_prior.k_min(),
            probs,
        },
    )
}
