//! Replica-exchange sampler over the union of models with `K_min..=K_max` peaks.
//!
//! One Monte Carlo step (MCS) runs `inner_repeats` rounds of
//! (reversible jump, full local scan) on every rung, then one exchange sweep
//! across adjacent rungs. Per-rung work is independent within an MCS and runs
//! on the rayon pool when the `parallel` feature is enabled. Every rung owns a
//! deterministic random stream, so traces do not depend on scheduling.

mod chain;
mod exchange;
mod moves;
mod trace;
mod tuner;

pub use chain::{ChainState, ParamKind, ReplicaState, StepSizes};
pub use exchange::{exchange_log_ratio, exchange_sweep};
pub use moves::{
    birth_log_ratio, birth_move, birth_probability, death_log_ratio, death_move, death_probability, jump_move,
    local_update, JumpKind, ScanOutcome,
};
pub use trace::{Counter, MoveStats, RungStats, RungTrace, Snapshot, TraceSet};
pub use tuner::{robbins_monro, tune_step_sizes, TunerParams};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_configuration, PriorSpec, SpectralDataset};
use crate::parallel::{for_each_pair_mut, Execution};
use tuner::Adapter;

/// Strictly increasing inverse temperatures `b_1 < ... < b_L`, `b_1 >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    betas: Vec<f64>,
}

impl Ladder {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Config("ladder is empty".into()));
        }
        if betas.iter().any(|b| !b.is_finite()) || betas[0] < 0.0 {
            return Err(Error::Config("ladder values must be finite and >= 0".into()));
        }
        if betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("ladder must be strictly increasing".into()));
        }
        Ok(Self { betas })
    }

    /// `b_l = b_max * ratio^(l - L)` for `l = 1..=L`, with `b_1 = 0` when
    /// `first_zero` is set.
    pub fn geometric(b_max: f64, ratio: f64, len: usize, first_zero: bool) -> Result<Self> {
        if !(ratio > 1.0) || !(b_max > 0.0) || len == 0 {
            return Err(Error::Config(format!(
                "geometric ladder needs b_max > 0, ratio > 1, L >= 1 (got {b_max}, {ratio}, {len})"
            )));
        }
        let betas = (1..=len)
            .map(|l| {
                if l == 1 && first_zero {
                    0.0
                } else {
                    b_max / ratio.powi((len - l) as i32)
                }
            })
            .collect();
        Self::new(betas)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Index of the rung whose inverse temperature is closest to `b`.
    pub fn nearest(&self, b: f64) -> usize {
        self.betas
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - b).abs().total_cmp(&(y.1 - b).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSchedule {
    pub burnin_mcs: u64,
    pub sampling_mcs: u64,
    pub inner_repeats: u32,
    /// Record every `thinning`-th sampling MCS.
    pub thinning: u64,
    /// Rungs (0-based) whose full configurations are recorded.
    pub record_rungs: Vec<usize>,
    /// Keep a configuration on every `snapshot_thinning`-th recorded sample.
    pub snapshot_thinning: u64,
}

impl Default for SamplerSchedule {
    fn default() -> Self {
        Self {
            burnin_mcs: 1000,
            sampling_mcs: 1000,
            inner_repeats: 10,
            thinning: 1,
            record_rungs: Vec::new(),
            snapshot_thinning: 1,
        }
    }
}

impl SamplerSchedule {
    fn validate(&self, rungs: usize) -> Result<()> {
        if self.inner_repeats == 0 || self.thinning == 0 || self.snapshot_thinning == 0 {
            return Err(Error::Config("inner_repeats, thinning and snapshot_thinning must be >= 1".into()));
        }
        if let Some(r) = self.record_rungs.iter().find(|r| **r >= rungs) {
            return Err(Error::Config(format!("record rung {r} outside a ladder of {rungs} rungs")));
        }
        Ok(())
    }
}

/// Everything [`run`] needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub priors: PriorSpec,
    pub ladder: Ladder,
    pub schedule: SamplerSchedule,
    pub tuner: TunerParams,
    pub seed: u64,
    /// Reversible jumps on/off. Off pins every replica at its initial `K`.
    pub jumps: bool,
    pub execution: Execution,
    /// Initial step sizes for every rung; defaults to half the prior sds.
    pub initial_steps: Option<StepSizes>,
}

impl SamplerConfig {
    pub fn new(priors: PriorSpec, ladder: Ladder) -> Self {
        Self {
            priors,
            ladder,
            schedule: SamplerSchedule::default(),
            tuner: TunerParams::default(),
            seed: 0,
            jumps: true,
            execution: Execution::default(),
            initial_steps: None,
        }
    }

    pub fn validate(&self, data: &SpectralDataset) -> Result<()> {
        self.priors.validate()?;
        self.tuner.validate()?;
        self.schedule.validate(self.ladder.len())?;
        data.check_basis(self.priors.basis())?;
        if let Some(s) = &self.initial_steps {
            if s.0.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config("initial step sizes must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Independent stream for rung `l`; stream `L` drives exchange decisions.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-rung sampler state that never moves between rungs.
struct Rung {
    b: f64,
    rng: ChaCha8Rng,
    adapter: Adapter,
    stats: RungStats,
}

impl Rung {
    fn step(&mut self, state: &mut ReplicaState, data: &SpectralDataset, cfg: &SamplerConfig, adapt: bool) {
        for _ in 0..cfg.schedule.inner_repeats {
            if cfg.jumps {
                let (kind, ok) = jump_move(&mut state.chain, self.b, data, &cfg.priors, &mut self.rng);
                moves::record_jump(&mut self.stats, kind, ok);
            }
            let scan = local_update(state, self.b, data, &cfg.priors, &mut self.rng);
            for kind in ParamKind::ALL {
                let c = &mut self.stats.local[kind.index()];
                c.accepted += scan.accepted[kind.index()] as u64;
                c.attempted += scan.attempted[kind.index()] as u64;
            }
            if adapt {
                self.adapter.observe(&scan, &mut state.step_sizes, &cfg.tuner);
            }
        }
        state.chain.refresh(data);
    }
}

/// Runs burnin then sampling and returns the recorded traces.
pub fn run(data: &SpectralDataset, cfg: &SamplerConfig) -> Result<TraceSet> {
    cfg.validate(data)?;
    let betas = cfg.ladder.betas().to_vec();
    let l_count = betas.len();
    let initial = cfg.initial_steps.unwrap_or_else(|| StepSizes::from_priors(&cfg.priors));

    let (mut rungs, mut states): (Vec<Rung>, Vec<ReplicaState>) = betas
        .iter()
        .enumerate()
        .map(|(l, &b)| {
            let mut rng = substream(cfg.seed, l as u64);
            let config = sample_configuration(&cfg.priors, &mut rng);
            let state = ReplicaState {
                rung_index: l,
                chain: ChainState::new(config, data),
                step_sizes: initial,
            };
            let rung = Rung {
                b,
                rng,
                adapter: Adapter::new(initial),
                stats: RungStats::default(),
            };
            (rung, state)
        })
        .unzip();
    let mut exchange_rng = substream(cfg.seed, l_count as u64);

    let mut traces = TraceSet {
        betas: betas.clone(),
        n: data.len(),
        k_min: cfg.priors.k.k_min(),
        k_max: cfg.priors.k.k_max(),
        rungs: (0..l_count)
            .map(|l| RungTrace {
                snapshots: cfg.schedule.record_rungs.contains(&l).then(Vec::new),
                ..Default::default()
            })
            .collect(),
        burnin_stats: MoveStats::new(l_count),
        sampling_stats: MoveStats::new(l_count),
        step_sizes: Vec::new(),
    };

    let mut exchange_stats = vec![Counter::default(); l_count.saturating_sub(1)];
    let total = cfg.schedule.burnin_mcs + cfg.schedule.sampling_mcs;
    for mcs in 0..total {
        let burnin = mcs < cfg.schedule.burnin_mcs;
        for_each_pair_mut(&mut rungs, &mut states, cfg.execution, |r, s| r.step(s, data, cfg, burnin));
        let flags = exchange_sweep(&mut states, &betas, data.len(), &mut exchange_rng);
        for (c, ok) in exchange_stats.iter_mut().zip(flags) {
            c.attempted += 1;
            c.accepted += ok as u64;
        }

        if mcs + 1 == cfg.schedule.burnin_mcs {
            flush_stats(&mut rungs, &mut exchange_stats, &mut traces.burnin_stats);
        }
        if !burnin {
            let idx = mcs - cfg.schedule.burnin_mcs;
            if idx.is_multiple_of(cfg.schedule.thinning) {
                let keep_snapshot = (idx / cfg.schedule.thinning).is_multiple_of(cfg.schedule.snapshot_thinning);
                for (st, t) in states.iter().zip(traces.rungs.iter_mut()) {
                    t.mcs.push(idx);
                    t.k.push(st.chain.peak_count() as u32);
                    t.energy.push(st.chain.energy());
                    if let Some(s) = t.snapshots.as_mut().filter(|_| keep_snapshot) {
                        s.push(Snapshot {
                            mcs: idx,
                            config: st.chain.config().clone(),
                        });
                    }
                }
            }
        }
    }
    if cfg.schedule.sampling_mcs > 0 {
        flush_stats(&mut rungs, &mut exchange_stats, &mut traces.sampling_stats);
    }
    traces.step_sizes = states.iter().map(|s| s.step_sizes).collect();
    Ok(traces)
}

fn flush_stats(rungs: &mut [Rung], exchange: &mut [Counter], into: &mut MoveStats) {
    for (r, dst) in rungs.iter_mut().zip(into.rungs.iter_mut()) {
        *dst = std::mem::take(&mut r.stats);
    }
    for (c, dst) in exchange.iter_mut().zip(into.exchange.iter_mut()) {
        *dst = std::mem::take(c);
    }
}
