//! Flat key-value run configuration (TOML) and the bundled presets.

use std::path::{Path, PathBuf};

use rjpt_core::model::{
    CenterPrior, ContinuumPrior, GammaPrior, KPrior, ModelConfiguration, NormalPrior, PriorSpec,
    SpectralDataset, Transform,
};
use rjpt_core::sampler::{Ladder, SamplerConfig, SamplerSchedule, TunerParams};
use rjpt_core::synth::{self, GroundTruth};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const PRESETS: [(&str, &str); 3] = [
    ("synthetic-s4", include_str!("../presets/synthetic-s4.toml")),
    ("olivine-s5", include_str!("../presets/olivine-s5.toml")),
    ("desk-k3", include_str!("../presets/desk-k3.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Gaussian,
    Mgm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterKind {
    Uniform,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderKind {
    Geometric,
    Explicit,
}

/// Generating model used by `synth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthKind {
    /// The bundled ten-peak spectrum: 512 points on [0, 3], `b0 = 100`.
    S4,
    ThreePeak,
    OlivineLike,
    /// No peaks: pure noise.
    Empty,
}

/// Every setting of a run. Missing keys take the defaults of
/// [`RunConfig::default`]; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub basis: Basis,
    pub k_min: usize,
    pub k_max: usize,

    pub amplitude_shape: f64,
    pub amplitude_rate: f64,
    pub precision_shape: f64,
    pub precision_rate: f64,
    pub center_prior: CenterKind,
    pub center_lo: f64,
    pub center_hi: f64,
    pub center_mean: f64,
    pub center_sd: f64,
    /// Continuum offset prior mean. Absent: `y` (after the transform) at the
    /// grid point nearest `offset_anchor`.
    pub offset_mean: Option<f64>,
    pub offset_anchor: f64,
    pub offset_sd: f64,
    pub slope_shape: f64,
    pub slope_rate: f64,

    pub ladder: LadderKind,
    pub b_max: f64,
    pub ratio: f64,
    pub rungs: usize,
    pub b1_zero: bool,
    pub betas: Vec<f64>,

    pub burnin_mcs: u64,
    pub sampling_mcs: u64,
    pub inner_repeats: u32,
    pub thinning: u64,
    /// Number of highest rungs whose configurations are recorded.
    pub snapshot_top: usize,
    pub snapshot_thinning: u64,

    pub tuner_target: f64,
    pub tuner_t0: f64,
    pub tuner_window: u32,
    pub tuner_floor: f64,
    pub tuner_gain: Option<f64>,
    /// Gain as a multiple of each kind's initial step when `tuner_gain` is unset.
    pub tuner_gain_scale: f64,

    pub seed: u64,
    /// Independent runs; run `r` uses seed `seed + r`.
    pub runs: usize,
    /// Batch count for batch-means standard errors of single runs.
    pub batches: usize,
    pub jumps: bool,

    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub truth: TruthKind,
    pub truth_points: Option<usize>,
    pub truth_b0: Option<f64>,
    pub truth_seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            basis: Basis::Gaussian,
            k_min: 0,
            k_max: 15,
            amplitude_shape: 5.0,
            amplitude_rate: 5.0,
            precision_shape: 5.0,
            precision_rate: 0.04,
            center_prior: CenterKind::Uniform,
            center_lo: 0.0,
            center_hi: 3.0,
            center_mean: 1.25,
            center_sd: 0.4,
            offset_mean: None,
            offset_anchor: 2.5,
            offset_sd: 0.1,
            slope_shape: 1.0,
            slope_rate: 10.0,
            ladder: LadderKind::Geometric,
            b_max: 144.0,
            ratio: 1.2,
            rungs: 60,
            b1_zero: true,
            betas: Vec::new(),
            burnin_mcs: 1000,
            sampling_mcs: 1000,
            inner_repeats: 10,
            thinning: 1,
            snapshot_top: 12,
            snapshot_thinning: 1,
            tuner_target: 0.5,
            tuner_t0: 10.0,
            tuner_window: 50,
            tuner_floor: 1e-6,
            tuner_gain: None,
            tuner_gain_scale: 10.0,
            seed: 1,
            runs: 1,
            batches: 10,
            jumps: true,
            data: None,
            out: None,
            truth: TruthKind::S4,
            truth_points: None,
            truth_b0: None,
            truth_seed: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown preset {name:?}; available: {}", names.join(", ")))
        })?;
        Self::from_toml(text)
    }

    pub fn k_prior(&self) -> Result<KPrior> {
        Ok(KPrior::uniform(self.k_min, self.k_max)?)
    }

    /// Priors for fitting `data`; the MGM offset mean may depend on the data.
    pub fn priors(&self, data: &SpectralDataset) -> Result<PriorSpec> {
        let center = match self.center_prior {
            CenterKind::Uniform => CenterPrior::Uniform {
                lo: self.center_lo,
                hi: self.center_hi,
            },
            CenterKind::Normal => CenterPrior::Normal {
                mean: self.center_mean,
                sd: self.center_sd,
            },
        };
        let continuum = match self.basis {
            Basis::Gaussian => None,
            Basis::Mgm => Some(ContinuumPrior {
                offset: NormalPrior::new(
                    self.offset_mean.unwrap_or_else(|| data.y_nearest(self.offset_anchor)),
                    self.offset_sd,
                ),
                slope: GammaPrior::new(self.slope_shape, self.slope_rate),
            }),
        };
        let p = PriorSpec {
            amplitude: GammaPrior::new(self.amplitude_shape, self.amplitude_rate),
            precision: GammaPrior::new(self.precision_shape, self.precision_rate),
            center,
            continuum,
            k: self.k_prior()?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn build_ladder(&self) -> Result<Ladder> {
        Ok(match self.ladder {
            LadderKind::Geometric => Ladder::geometric(self.b_max, self.ratio, self.rungs, self.b1_zero)?,
            LadderKind::Explicit => Ladder::new(self.betas.clone())?,
        })
    }

    /// Sampler configuration of run `run` (0-based).
    pub fn sampler_config(&self, data: &SpectralDataset, run: usize) -> Result<SamplerConfig> {
        if self.runs == 0 {
            return Err(CliError::Config("runs must be >= 1".into()));
        }
        let ladder = self.build_ladder()?;
        let l = ladder.len();
        let mut cfg = SamplerConfig::new(self.priors(data)?, ladder);
        cfg.schedule = SamplerSchedule {
            burnin_mcs: self.burnin_mcs,
            sampling_mcs: self.sampling_mcs,
            inner_repeats: self.inner_repeats,
            thinning: self.thinning,
            record_rungs: (l.saturating_sub(self.snapshot_top)..l).collect(),
            snapshot_thinning: self.snapshot_thinning,
        };
        cfg.tuner = TunerParams {
            gain: self.tuner_gain,
            gain_scale: self.tuner_gain_scale,
            t0: self.tuner_t0,
            target: self.tuner_target,
            window: self.tuner_window,
            floor: self.tuner_floor,
        };
        cfg.seed = self.seed.wrapping_add(run as u64);
        cfg.jumps = self.jumps;
        cfg.validate(data)?;
        Ok(cfg)
    }

    /// Ground truth for `synth`; `truth_*` keys override the preset values.
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let seed = self.truth_seed.unwrap_or(self.seed);
        let mut t = match self.truth {
            TruthKind::S4 => {
                let mut t = synth::s4_truth();
                t.seed = seed;
                t
            }
            TruthKind::ThreePeak => synth::three_peak_truth(128, seed),
            TruthKind::OlivineLike => synth::olivine_like_truth(seed),
            TruthKind::Empty => GroundTruth {
                config: ModelConfiguration::empty(),
                b0: 100.0,
                x_grid: synth::linspace(0.0, 3.0, 512),
                seed,
                transform: Transform::Identity,
            },
        };
        if let Some(n) = self.truth_points {
            if n == 0 {
                return Err(CliError::Config("truth_points must be >= 1".into()));
            }
            let (lo, hi) = (t.x_grid[0], *t.x_grid.last().unwrap());
            t.x_grid = synth::linspace(lo, hi, n);
        }
        if let Some(b0) = self.truth_b0 {
            t.b0 = b0;
        }
        t.validate()?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_roundtrip() {
        for (name, _) in PRESETS {
            let c = RunConfig::preset(name).unwrap();
            assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c, "{name}");
        }
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn default_roundtrips_with_every_optional_key() {
        let c = RunConfig {
            offset_mean: Some(0.25),
            tuner_gain: Some(0.1),
            betas: vec![0.0, 0.5, 1.0 / 3.0],
            data: Some("a/b.csv".into()),
            truth_b0: Some(1e-7),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_and_mistyped_keys_are_config_errors() {
        assert!(matches!(RunConfig::from_toml("kmax = 3"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_toml("k_max = \"three\""), Err(CliError::Config(_))));
    }

    #[test]
    fn s4_preset_ladder() {
        let c = RunConfig::preset("synthetic-s4").unwrap();
        let l = c.build_ladder().unwrap();
        let b = l.betas();
        assert_eq!(b.len(), 60);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[59], 144.0);
        assert!((b[58] - 120.0).abs() < 1e-12);
        assert!((b[1] - 144.0 * 1.2f64.powi(-58)).abs() < 1e-15);
        assert_eq!((c.k_min, c.k_max), (0, 15));
    }

    #[test]
    fn mgm_offset_mean_defaults_to_the_anchor_value() {
        let c = RunConfig::preset("olivine-s5").unwrap();
        let d = synth::generate(&c.ground_truth().unwrap()).unwrap();
        let p = c.priors(&d).unwrap();
        let cp = p.continuum.unwrap();
        assert_eq!(cp.offset.mean, d.y_nearest(2.5));
        assert_eq!(cp.offset.sd, 0.1);
        assert_eq!((cp.slope.shape, cp.slope.rate), (1.0, 10.0));
    }

    #[test]
    fn run_seeds_are_offsets() {
        let mut c = RunConfig::preset("desk-k3").unwrap();
        c.seed = 40;
        let d = synth::generate(&c.ground_truth().unwrap()).unwrap();
        assert_eq!(c.sampler_config(&d, 3).unwrap().seed, 43);
        c.runs = 0;
        assert!(c.sampler_config(&d, 0).is_err());
    }
}
