use serde::{Deserialize, Serialize};

use crate::model::{energy_from_residuals, ModelConfiguration, Peak, SpectralDataset};

/// Scalar parameter kinds, each with its own proposal step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Amplitude,
    Precision,
    Center,
    Offset,
    Slope,
}

impl ParamKind {
    pub const ALL: [ParamKind; 5] = [
        ParamKind::Amplitude,
        ParamKind::Precision,
        ParamKind::Center,
        ParamKind::Offset,
        ParamKind::Slope,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Amplitude => "amplitude",
            ParamKind::Precision => "precision",
            ParamKind::Center => "center",
            ParamKind::Offset => "offset",
            ParamKind::Slope => "slope",
        }
    }
}

/// Per-kind Gaussian random-walk step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes(pub [f64; 5]);

impl StepSizes {
    #[inline]
    pub fn get(&self, kind: ParamKind) -> f64 {
        self.0[kind.index()]
    }

    #[inline]
    pub fn set(&mut self, kind: ParamKind, value: f64) {
        self.0[kind.index()] = value;
    }

    /// Half the prior standard deviation of each kind.
    pub fn from_priors(priors: &crate::model::PriorSpec) -> Self {
        let (off, slope) = match &priors.continuum {
            Some(c) => (c.offset.sd, c.slope.sd()),
            None => (0.1, 0.1),
        };
        StepSizes([
            0.5 * priors.amplitude.sd(),
            0.5 * priors.precision.sd(),
            0.5 * priors.center.sd(),
            0.5 * off,
            0.5 * slope,
        ])
    }
}

/// The movable part of a replica: the configuration plus its residual cache.
///
/// `shapes[k][i]` holds `exp(-(rho_k / 2)(x_i - mu_k)^2)`, so peak `k`
/// contributes `amplitude_k * shapes[k][i]` at `x_i`. `residuals` and
/// `energy` track `y - predict` and `E_n`; [`ChainState::refresh`] rebuilds
/// them with the exact arithmetic of [`crate::model::energy`].
#[derive(Debug, Clone)]
pub struct ChainState {
    config: ModelConfiguration,
    energy: f64,
    residuals: Vec<f64>,
    shapes: Vec<Vec<f64>>,
    continuum: Vec<f64>,
    scratch: Vec<f64>,
    pool: Vec<Vec<f64>>,
}

impl ChainState {
    pub fn new(config: ModelConfiguration, data: &SpectralDataset) -> Self {
        let n = data.len();
        let mut s = Self {
            shapes: Vec::with_capacity(config.peaks.len()),
            config,
            energy: 0.0,
            residuals: vec![0.0; n],
            continuum: Vec::new(),
            scratch: vec![0.0; n],
            pool: Vec::new(),
        };
        s.refresh(data);
        s
    }

    #[inline]
    pub fn config(&self) -> &ModelConfiguration {
        &self.config
    }

    #[inline]
    pub fn energy(&self) -> f64 {
        self.energy
    }

    #[inline]
    pub fn peak_count(&self) -> usize {
        self.config.peaks.len()
    }

    /// Recomputes every cache from the configuration.
    pub fn refresh(&mut self, data: &SpectralDataset) {
        let n = data.len();
        let x = data.x();
        let k = self.config.peaks.len();
        while self.shapes.len() > k {
            let v = self.shapes.pop().unwrap();
            self.pool.push(v);
        }
        while self.shapes.len() < k {
            let v = self.pool.pop().unwrap_or_else(|| vec![0.0; n]);
            self.shapes.push(v);
        }
        for (p, shape) in self.config.peaks.iter().zip(self.shapes.iter_mut()) {
            fill_shape(p, x, shape);
        }
        match &self.config.continuum {
            Some(c) => {
                self.continuum.clear();
                self.continuum.extend(x.iter().map(|&xi| c.eval(xi)));
            }
            None => self.continuum.clear(),
        }
        let has_cont = self.config.continuum.is_some();
        for i in 0..n {
            // same order as ModelConfiguration::predict_unchecked
            let mut s = if has_cont { self.continuum[i] } else { 0.0 };
            for (p, shape) in self.config.peaks.iter().zip(&self.shapes) {
                s += p.amplitude * shape[i];
            }
            self.residuals[i] = data.y()[i] - s;
        }
        self.energy = energy_from_residuals(&self.residuals);
    }

    /// Energy after replacing peak `k` by `p`. Leaves the new shape in scratch
    /// when `p` moves or reshapes the peak.
    pub(crate) fn propose_peak(&mut self, data: &SpectralDataset, k: usize, p: &Peak) -> f64 {
        let old = self.config.peaks[k];
        let r = &self.residuals;
        let shape = &self.shapes[k];
        let mut s = 0.0;
        if p.precision == old.precision && p.center == old.center {
            for i in 0..r.len() {
                let d = (r[i] + old.amplitude * shape[i]) - p.amplitude * shape[i];
                s += d * d;
            }
        } else {
            fill_shape(p, data.x(), &mut self.scratch);
            let g = &self.scratch;
            for i in 0..r.len() {
                let d = (r[i] + old.amplitude * shape[i]) - p.amplitude * g[i];
                s += d * d;
            }
        }
        s / (2.0 * r.len() as f64)
    }

    pub(crate) fn commit_peak(&mut self, k: usize, p: Peak, energy: f64) {
        let old = self.config.peaks[k];
        let reshaped = !(p.precision == old.precision && p.center == old.center);
        {
            let shape = &self.shapes[k];
            let g = if reshaped { &self.scratch } else { shape };
            for i in 0..self.residuals.len() {
                self.residuals[i] = (self.residuals[i] + old.amplitude * shape[i]) - p.amplitude * g[i];
            }
        }
        if reshaped {
            std::mem::swap(&mut self.shapes[k], &mut self.scratch);
        }
        self.config.peaks[k] = p;
        self.energy = energy;
    }

    /// Energy after appending `p`; its shape is left in scratch.
    pub(crate) fn propose_birth(&mut self, data: &SpectralDataset, p: &Peak) -> f64 {
        fill_shape(p, data.x(), &mut self.scratch);
        let mut s = 0.0;
        for (r, g) in self.residuals.iter().zip(&self.scratch) {
            let d = r - p.amplitude * g;
            s += d * d;
        }
        s / (2.0 * self.residuals.len() as f64)
    }

    pub(crate) fn commit_birth(&mut self, p: Peak, energy: f64) {
        for (r, g) in self.residuals.iter_mut().zip(&self.scratch) {
            *r -= p.amplitude * g;
        }
        let n = self.scratch.len();
        let fresh = self.pool.pop().unwrap_or_else(|| vec![0.0; n]);
        let shape = std::mem::replace(&mut self.scratch, fresh);
        self.shapes.push(shape);
        self.config.peaks.push(p);
        self.energy = energy;
    }

    /// Energy after removing peak `k`.
    pub(crate) fn propose_death(&self, k: usize) -> f64 {
        let a = self.config.peaks[k].amplitude;
        let mut s = 0.0;
        for (r, g) in self.residuals.iter().zip(&self.shapes[k]) {
            let d = r + a * g;
            s += d * d;
        }
        s / (2.0 * self.residuals.len() as f64)
    }

    pub(crate) fn commit_death(&mut self, k: usize, energy: f64) {
        let a = self.config.peaks[k].amplitude;
        for (r, g) in self.residuals.iter_mut().zip(&self.shapes[k]) {
            *r += a * g;
        }
        let shape = self.shapes.remove(k);
        self.pool.push(shape);
        self.config.peaks.remove(k);
        self.energy = energy;
    }

    /// Energy after changing the continuum offset/slope; new values in scratch.
    pub(crate) fn propose_continuum(&mut self, data: &SpectralDataset, offset: f64, slope: f64) -> f64 {
        let c = crate::model::Continuum { offset, slope };
        let mut s = 0.0;
        for (i, &xi) in data.x().iter().enumerate() {
            let v = c.eval(xi);
            self.scratch[i] = v;
            let d = (self.residuals[i] + self.continuum[i]) - v;
            s += d * d;
        }
        s / (2.0 * self.residuals.len() as f64)
    }

    pub(crate) fn commit_continuum(&mut self, offset: f64, slope: f64, energy: f64) {
        for i in 0..self.residuals.len() {
            self.residuals[i] = (self.residuals[i] + self.continuum[i]) - self.scratch[i];
        }
        std::mem::swap(&mut self.continuum, &mut self.scratch);
        self.config.continuum = Some(crate::model::Continuum { offset, slope });
        self.energy = energy;
    }
}

#[inline]
fn fill_shape(p: &Peak, x: &[f64], out: &mut [f64]) {
    let h = -0.5 * p.precision;
    for (o, &xi) in out.iter_mut().zip(x) {
        let d = xi - p.center;
        // same expression as Peak::eval with the amplitude factored out
        *o = (h * d * d).exp();
    }
}

/// One tempered chain: the rung it sits on, its movable state, and the
/// rung's step sizes.
#[derive(Debug, Clone)]
pub struct ReplicaState {
    pub rung_index: usize,
    pub chain: ChainState,
    pub step_sizes: StepSizes,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{energy, Continuum};

    fn data() -> SpectralDataset {
        let x: Vec<f64> = (1..=40).map(|i| i as f64 * 0.07).collect();
        let y = x.iter().map(|v| (3.0 * v).sin() + 0.5).collect();
        SpectralDataset::new(x, y).unwrap()
    }

    #[test]
    fn refresh_matches_energy_bitwise() {
        let d = data();
        let cfg = ModelConfiguration::mgm(
            Continuum { offset: 0.2, slope: 0.05 },
            vec![Peak::new(1.0, 30.0, 1.0), Peak::new(0.4, 80.0, 2.1)],
        );
        let c = ChainState::new(cfg.clone(), &d);
        assert_eq!(c.energy(), energy(&cfg, &d));
    }

    #[test]
    fn incremental_updates_track_energy() {
        let d = data();
        let cfg = ModelConfiguration::mgm(Continuum { offset: 0.1, slope: 0.2 }, vec![Peak::new(1.0, 30.0, 1.0)]);
        let mut c = ChainState::new(cfg, &d);

        let p = Peak::new(1.5, 30.0, 1.0);
        let e = c.propose_peak(&d, 0, &p);
        c.commit_peak(0, p, e);
        assert!((c.energy() - energy(c.config(), &d)).abs() < 1e-13);

        let p = Peak::new(1.5, 12.0, 1.4);
        let e = c.propose_peak(&d, 0, &p);
        c.commit_peak(0, p, e);
        assert!((c.energy() - energy(c.config(), &d)).abs() < 1e-13);

        let q = Peak::new(0.7, 50.0, 2.0);
        let e = c.propose_birth(&d, &q);
        c.commit_birth(q, e);
        assert_eq!(c.peak_count(), 2);
        assert!((c.energy() - energy(c.config(), &d)).abs() < 1e-13);

        let e = c.propose_continuum(&d, 0.3, 0.1);
        c.commit_continuum(0.3, 0.1, e);
        assert!((c.energy() - energy(c.config(), &d)).abs() < 1e-13);

        let e = c.propose_death(0);
        c.commit_death(0, e);
        assert_eq!(c.config().peaks, vec![q]);
        assert!((c.energy() - energy(c.config(), &d)).abs() < 1e-13);

        c.refresh(&d);
        assert_eq!(c.energy(), energy(c.config(), &d));
    }
}
