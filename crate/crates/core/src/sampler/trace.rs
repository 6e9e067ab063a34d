use serde::{Deserialize, Serialize};

use super::chain::{ParamKind, StepSizes};
use crate::model::ModelConfiguration;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub accepted: u64,
    pub attempted: u64,
}

impl Counter {
    pub fn rate(&self) -> Option<f64> {
        (self.attempted > 0).then(|| self.accepted as f64 / self.attempted as f64)
    }

    fn merge(&mut self, other: &Counter) {
        self.accepted += other.accepted;
        self.attempted += other.attempted;
    }
}

/// Move statistics of one rung.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RungStats {
    pub local: [Counter; 5],
    pub birth: Counter,
    pub death: Counter,
}

impl RungStats {
    pub fn local(&self, kind: ParamKind) -> Counter {
        self.local[kind.index()]
    }

    /// Acceptance pooled over every local parameter kind.
    pub fn local_rate(&self) -> Option<f64> {
        let mut c = Counter::default();
        for l in &self.local {
            c.merge(l);
        }
        c.rate()
    }
}

/// Acceptance counts by move kind for one phase of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub rungs: Vec<RungStats>,
    /// Exchange counters for the pairs `(l, l + 1)`.
    pub exchange: Vec<Counter>,
}

impl MoveStats {
    pub(crate) fn new(rungs: usize) -> Self {
        Self {
            rungs: vec![RungStats::default(); rungs],
            exchange: vec![Counter::default(); rungs.saturating_sub(1)],
        }
    }
}

/// A recorded configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub mcs: u64,
    pub config: ModelConfiguration,
}

/// Samples recorded at one rung.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RungTrace {
    pub mcs: Vec<u64>,
    pub k: Vec<u32>,
    pub energy: Vec<f64>,
    /// Full configurations; present only for designated rungs.
    pub snapshots: Option<Vec<Snapshot>>,
}

impl RungTrace {
    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }
}

/// Everything a run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    /// Inverse temperatures of the ladder.
    pub betas: Vec<f64>,
    /// Number of observations the energies refer to.
    pub n: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub rungs: Vec<RungTrace>,
    pub burnin_stats: MoveStats,
    pub sampling_stats: MoveStats,
    /// Step sizes per rung at the end of the run.
    pub step_sizes: Vec<StepSizes>,
}

impl TraceSet {
    pub fn rung_count(&self) -> usize {
        self.betas.len()
    }
}
