//! Robbins-Monro step-size adaptation.
//!
//! After every window of `window` local scans the step size of each
//! parameter kind moves by `gain * (p - target) / (t0 + t)`, where `p` is the
//! kind's acceptance rate over the window and `t` counts completed windows.
//! Adaptation only runs during burnin.

use serde::{Deserialize, Serialize};

use super::chain::{ParamKind, StepSizes};
use super::moves::ScanOutcome;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunerParams {
    /// Gain `c_t` shared by every kind. `None` uses `gain_scale` times each
    /// kind's initial step size.
    pub gain: Option<f64>,
    pub gain_scale: f64,
    pub t0: f64,
    pub target: f64,
    /// Local scans per adaptation window.
    pub window: u32,
    /// Lower clamp on every step size.
    pub floor: f64,
}

impl Default for TunerParams {
    fn default() -> Self {
        Self {
            gain: None,
            gain_scale: 10.0,
            t0: 10.0,
            target: 0.5,
            window: 50,
            floor: 1e-6,
        }
    }
}

impl TunerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::Config(format!("tuner target {} not in (0, 1)", self.target)));
        }
        if !(self.t0 > 0.0) || self.window == 0 || !(self.floor > 0.0) {
            return Err(Error::Config("tuner needs t0 > 0, window >= 1 and floor > 0".into()));
        }
        if !(self.gain_scale > 0.0 && self.gain_scale.is_finite()) {
            return Err(Error::Config(format!("tuner gain_scale {} must be positive", self.gain_scale)));
        }
        if let Some(g) = self.gain {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("tuner gain {g} must be positive")));
            }
        }
        Ok(())
    }
}

/// One Robbins-Monro update of a single step size.
#[inline]
pub fn robbins_monro(step: f64, gain: f64, acceptance: f64, target: f64, t0: f64, t: u64, floor: f64) -> f64 {
    (step + gain * (acceptance - target) / (t0 + t as f64)).max(floor)
}

/// Applies one update to every kind with an observed acceptance rate.
/// Kinds without attempts in the window keep their step size.
pub fn tune_step_sizes(
    steps: &StepSizes,
    acceptance: &[Option<f64>; 5],
    t: u64,
    gains: &StepSizes,
    params: &TunerParams,
) -> StepSizes {
    let mut out = *steps;
    for kind in ParamKind::ALL {
        if let Some(p) = acceptance[kind.index()] {
            let g = params.gain.unwrap_or(params.gain_scale * gains.get(kind));
            out.set(kind, robbins_monro(steps.get(kind), g, p, params.target, params.t0, t, params.floor));
        }
    }
    out
}

/// Window bookkeeping for one rung.
#[derive(Debug, Clone)]
pub(crate) struct Adapter {
    gains: StepSizes,
    accepted: [u64; 5],
    attempted: [u64; 5],
    scans: u32,
    t: u64,
}

impl Adapter {
    pub fn new(initial: StepSizes) -> Self {
        Self {
            gains: initial,
            accepted: [0; 5],
            attempted: [0; 5],
            scans: 0,
            t: 0,
        }
    }

    /// Records a scan; updates `steps` when the window closes.
    pub fn observe(&mut self, scan: &ScanOutcome, steps: &mut StepSizes, params: &TunerParams) {
        for i in 0..5 {
            self.accepted[i] += scan.accepted[i] as u64;
            self.attempted[i] += scan.attempted[i] as u64;
        }
        self.scans += 1;
        if self.scans >= params.window {
            let rates: [Option<f64>; 5] =
                std::array::from_fn(|i| (self.attempted[i] > 0).then(|| self.accepted[i] as f64 / self.attempted[i] as f64));
            *steps = tune_step_sizes(steps, &rates, self.t, &self.gains, params);
            self.t += 1;
            self.scans = 0;
            self.accepted = [0; 5];
            self.attempted = [0; 5];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_update_arithmetic() {
        let s = robbins_monro(0.5, 1.0, 0.8, 0.5, 10.0, 0, 1e-6);
        assert!((s - 0.53).abs() < 1e-15);
        assert_eq!(robbins_monro(0.5, 1.0, 0.5, 0.5, 10.0, 7, 1e-6), 0.5);
        assert_eq!(robbins_monro(1e-3, 1.0, 0.0, 0.5, 10.0, 0, 1e-6), 1e-6);
    }

    #[test]
    fn always_accepting_grows_like_harmonic_sum() {
        let (gain, t0) = (0.2, 10.0);
        let mut s = 0.1;
        let mut expected = 0.1;
        for t in 0..10_000u64 {
            s = robbins_monro(s, gain, 1.0, 0.5, t0, t, 1e-6);
            expected += gain * 0.5 / (t0 + t as f64);
            assert!(s.is_finite());
        }
        assert!((s - expected).abs() < 1e-10);
        // partial harmonic sum ~ ln((t0 + T) / t0)
        let approx = 0.1 + gain * 0.5 * ((t0 + 10_000.0) / t0).ln();
        assert!((s - approx).abs() < 0.02);
    }

    #[test]
    fn kinds_without_attempts_are_untouched() {
        let steps = StepSizes([0.1, 10.0, 0.2, 0.05, 0.05]);
        let rates = [Some(1.0), Some(0.0), None, None, None];
        let out = tune_step_sizes(&steps, &rates, 0, &steps, &TunerParams::default());
        assert!(out.get(ParamKind::Amplitude) > 0.1);
        assert!(out.get(ParamKind::Precision) < 10.0);
        assert_eq!(out.get(ParamKind::Center), 0.2);
        assert_eq!(out.get(ParamKind::Slope), 0.05);
    }

    #[test]
    fn validation() {
        assert!(TunerParams::default().validate().is_ok());
        assert!(TunerParams { target: 1.0, ..Default::default() }.validate().is_err());
        assert!(TunerParams { window: 0, ..Default::default() }.validate().is_err());
    }
}
