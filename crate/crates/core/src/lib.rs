//! Bayesian deconvolution of 1-D spectra with an unknown number of peaks.
//!
//! The peak count and the peak parameters are sampled jointly by
//! reversible-jump birth/death moves inside a replica-exchange Monte Carlo
//! run. The traces yield Bayesian free energies, posterior probabilities of
//! the peak count and label-invariant peak summaries. A fixed-`K` sweep
//! ([`sweep`]) provides the conventional baseline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod model;
pub mod parallel;
pub mod sampler;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    BasisKind, CenterPrior, Continuum, ContinuumPrior, GammaPrior, KPrior, ModelConfiguration, NormalPrior, Peak,
    PriorSpec, SpectralDataset, Transform,
};
pub use parallel::Execution;
pub use sampler::{Ladder, SamplerConfig, SamplerSchedule, TraceSet, TunerParams};
