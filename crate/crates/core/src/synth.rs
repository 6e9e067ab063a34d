//! Synthetic spectra drawn from the forward model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Continuum, ModelConfiguration, Peak, SpectralDataset, Transform};

/// Generating parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: ModelConfiguration,
    /// Inverse noise variance.
    pub b0: f64,
    pub x_grid: Vec<f64>,
    pub seed: u64,
    /// `NegativeLog` emits reflectances `exp(-y)` instead of `y`.
    pub transform: Transform,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        if !(self.b0 > 0.0) {
            return Err(Error::Config(format!("b0 must be positive, got {}", self.b0)));
        }
        if self.x_grid.is_empty() || self.x_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("x grid must be non-empty and sorted".into()));
        }
        if self.config.continuum.is_some() && self.x_grid[0] <= 0.0 {
            return Err(Error::Domain("MGM truth needs x > 0".into()));
        }
        Ok(())
    }
}

/// `n` equidistant points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `y_i = predict(x_i) + eps_i`, `eps_i ~ N(0, 1 / b0)`, deterministic per seed.
pub fn generate(truth: &GroundTruth) -> Result<SpectralDataset> {
    truth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(truth.seed);
    let noise = Normal::new(0.0, truth.b0.sqrt().recip()).map_err(|e| Error::Config(e.to_string()))?;
    let y: Vec<f64> = truth
        .x_grid
        .iter()
        .map(|&x| truth.config.predict_unchecked(x) + noise.sample(&mut rng))
        .collect();
    match truth.transform {
        Transform::Identity => SpectralDataset::new(truth.x_grid.clone(), y),
        Transform::NegativeLog => {
            SpectralDataset::from_reflectance(truth.x_grid.clone(), y.iter().map(|v| (-v).exp()).collect())
        }
    }
}

const S4_PEAKS: &str = include_str!("../fixtures/synthetic_s4_peaks.csv");

/// Peaks of the bundled ten-peak preset, parsed from the fixture file.
pub fn s4_peaks() -> Vec<Peak> {
    S4_PEAKS
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty() && !l.starts_with("amplitude"))
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.trim().parse().expect("fixture is numeric")).collect();
            Peak::new(v[0], v[1], v[2])
        })
        .collect()
}

/// Ten peaks, `b0 = 100`, 512 points on `[0, 3]`.
pub fn s4_truth() -> GroundTruth {
    GroundTruth {
        config: ModelConfiguration::gaussian(s4_peaks()),
        b0: 100.0,
        x_grid: linspace(0.0, 3.0, 512),
        seed: 20_200_512,
        transform: Transform::Identity,
    }
}

/// Three well-separated peaks for desk-scale checks.
pub fn three_peak_truth(n: usize, seed: u64) -> GroundTruth {
    GroundTruth {
        config: ModelConfiguration::gaussian(vec![
            Peak::new(1.2, 120.0, 0.6),
            Peak::new(0.8, 80.0, 1.5),
            Peak::new(1.0, 150.0, 2.3),
        ]),
        b0: 100.0,
        x_grid: linspace(0.0, 3.0, n),
        seed,
        transform: Transform::Identity,
    }
}

/// Olivine-like reflectance: three MGM bands near 0.9, 1.1 and 1.3 um on a
/// `c0 + c1 / x` continuum, 381 points on `[0.6, 2.5]`.
pub fn olivine_like_truth(seed: u64) -> GroundTruth {
    GroundTruth {
        config: ModelConfiguration::mgm(
            Continuum { offset: 0.3, slope: 0.08 },
            vec![
                Peak::new(0.35, 110.0, 0.9),
                Peak::new(0.55, 140.0, 1.1),
                Peak::new(0.6, 90.0, 1.3),
            ],
        ),
        b0: 1e4,
        x_grid: linspace(0.6, 2.5, 381),
        seed,
        transform: Transform::NegativeLog,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{energy, predict};

    #[test]
    fn s4_preset_shape() {
        let t = s4_truth();
        assert_eq!(t.config.peak_count(), 10);
        let d = generate(&t).unwrap();
        assert_eq!(d.len(), 512);
        assert_eq!(d.x()[0], 0.0);
        assert_eq!(d.x()[511], 3.0);
        let dx = d.x()[1] - d.x()[0];
        assert!(d.x().windows(2).all(|w| ((w[1] - w[0]) - dx).abs() < 1e-12));
        // energy of the truth concentrates near 1 / (2 b0)
        let e = energy(&t.config, &d);
        assert!((e - 0.005).abs() < 0.0005, "{e}");
    }

    #[test]
    fn vanishing_noise() {
        let mut t = three_peak_truth(200, 1);
        t.b0 = 1e12;
        let d = generate(&t).unwrap();
        for (x, y) in d.x().iter().zip(d.y()) {
            assert!((y - predict(&t.config, *x).unwrap()).abs() < 1e-4);
        }
    }

    #[test]
    fn noise_variance() {
        let t = GroundTruth {
            config: ModelConfiguration::empty(),
            b0: 25.0,
            x_grid: linspace(0.0, 1.0, 100_000),
            seed: 3,
            transform: Transform::Identity,
        };
        let d = generate(&t).unwrap();
        let n = d.len() as f64;
        let mean = d.y().iter().sum::<f64>() / n;
        let var = d.y().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var * 25.0 - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn deterministic_and_validated() {
        let t = three_peak_truth(64, 9);
        assert_eq!(generate(&t).unwrap(), generate(&t).unwrap());
        let mut bad = t.clone();
        bad.b0 = 0.0;
        assert!(generate(&bad).is_err());
        bad = t;
        bad.x_grid = vec![1.0, 0.0];
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn olivine_reflectance_roundtrip() {
        let t = olivine_like_truth(1);
        let d = generate(&t).unwrap();
        assert_eq!(d.transform(), Transform::NegativeLog);
        assert_eq!(d.len(), 381);
        assert!(d.raw_y().iter().all(|r| *r > 0.0 && *r < 1.0));
        let e = energy(&t.config, &d);
        assert!((e * 2e4 - 1.0).abs() < 0.2, "{e}");
    }
}
