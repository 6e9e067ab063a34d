//! Peak basis functions, the regression energy, the tempered likelihood and
//! the prior densities the sampler draws from.
//!
//! Two bases are supported. The plain Gaussian basis models `y` as a sum of
//! `K` Gaussian peaks. The modified Gaussian model (MGM) adds a continuum
//! `c0 + c1 / x` and is meant for negative-log reflectance spectra.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Parameters of a single Gaussian peak `a * exp(-(rho / 2) (x - mu)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub amplitude: f64,
    pub precision: f64,
    pub center: f64,
}

impl Peak {
    pub fn new(amplitude: f64, precision: f64, center: f64) -> Self {
        Self {
            amplitude,
            precision,
            center,
        }
    }

    /// Value of the peak at `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.amplitude * (-0.5 * self.precision * d * d).exp()
    }
}

/// Evaluates one basis function at `x`.
#[inline]
pub fn evaluate_basis(peak: &Peak, x: f64) -> f64 {
    peak.eval(x)
}

/// Linear-in-energy continuum `offset + slope / x` of the MGM basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuum {
    pub offset: f64,
    pub slope: f64,
}

impl Continuum {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.slope / x
    }
}

/// Which regression function the configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Gaussian,
    Mgm,
}

/// A complete regression state: the peaks and, for the MGM basis, the continuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfiguration {
    pub peaks: Vec<Peak>,
    pub continuum: Option<Continuum>,
}

impl ModelConfiguration {
    pub fn empty() -> Self {
        Self {
            peaks: Vec::new(),
            continuum: None,
        }
    }

    pub fn gaussian(peaks: Vec<Peak>) -> Self {
        Self {
            peaks,
            continuum: None,
        }
    }

    pub fn mgm(continuum: Continuum, peaks: Vec<Peak>) -> Self {
        Self {
            peaks,
            continuum: Some(continuum),
        }
    }

    /// Number of peaks `K`.
    #[inline]
    pub fn peak_count(&self) -> usize {
        self.peaks.len()
    }

    pub fn basis(&self) -> BasisKind {
        if self.continuum.is_some() {
            BasisKind::Mgm
        } else {
            BasisKind::Gaussian
        }
    }

    /// Regression function without the domain check. The summation order
    /// (continuum first, then peaks in list order) is shared with the
    /// sampler's residual cache so both produce identical bits.
    #[inline]
    pub(crate) fn predict_unchecked(&self, x: f64) -> f64 {
        let mut s = match &self.continuum {
            Some(c) => c.eval(x),
            None => 0.0,
        };
        for p in &self.peaks {
            s += p.eval(x);
        }
        s
    }
}

/// Regression function at `x`. The MGM continuum is only defined for `x > 0`.
pub fn predict(config: &ModelConfiguration, x: f64) -> Result<f64> {
    if config.continuum.is_some() && x <= 0.0 {
        return Err(Error::Domain(format!(
            "MGM continuum evaluated at x = {x}; requires x > 0"
        )));
    }
    Ok(config.predict_unchecked(x))
}

/// How raw observations were mapped onto `y` before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    #[serde(rename = "neglog")]
    NegativeLog,
}

/// Observations `(x_i, y_i)`; `y` is always in model space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDataset {
    x: Vec<f64>,
    y: Vec<f64>,
    transform: Transform,
    /// Raw reflectances, kept for lossless re-emission of negative-log data.
    raw: Option<Vec<f64>>,
}

impl SpectralDataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_points(&x, &y)?;
        Ok(Self {
            x,
            y,
            transform: Transform::Identity,
            raw: None,
        })
    }

    /// Builds a dataset from reflectances, fitting `-ln(reflectance)`.
    pub fn from_reflectance(x: Vec<f64>, reflectance: Vec<f64>) -> Result<Self> {
        check_points(&x, &reflectance)?;
        if let Some((i, r)) = reflectance.iter().enumerate().find(|(_, r)| **r <= 0.0) {
            return Err(Error::Data(format!(
                "reflectance at row {i} is {r}; negative-log transform needs values > 0"
            )));
        }
        let y = reflectance.iter().map(|r| -r.ln()).collect();
        Ok(Self {
            x,
            y,
            transform: Transform::NegativeLog,
            raw: Some(reflectance),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    /// Observations as they were supplied, before any transform.
    pub fn raw_y(&self) -> &[f64] {
        self.raw.as_deref().unwrap_or(&self.y)
    }

    /// Model-space `y` at the grid point closest to `x`.
    pub fn y_nearest(&self, x: f64) -> f64 {
        let (i, _) = self
            .x
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .expect("dataset is non-empty");
        self.y[i]
    }

    /// Checks that every configuration of `basis` can be evaluated on this grid.
    pub fn check_basis(&self, basis: BasisKind) -> Result<()> {
        if basis == BasisKind::Mgm {
            if let Some(x) = self.x.iter().find(|x| **x <= 0.0) {
                return Err(Error::Domain(format!(
                    "MGM basis requires x > 0, dataset contains x = {x}"
                )));
            }
        }
        Ok(())
    }
}

fn check_points(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Data("dataset has no points".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Data(format!(
            "x and y lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Data(format!("non-finite value at row {i}")));
        }
    }
    Ok(())
}

/// Sum of squared residuals over `2n`. Shared by [`energy`] and the sampler cache.
#[inline]
pub(crate) fn energy_from_residuals(residuals: &[f64]) -> f64 {
    let mut s = 0.0;
    for r in residuals {
        s += r * r;
    }
    s / (2.0 * residuals.len() as f64)
}

/// Regression energy `E_n = (1 / 2n) sum_i (y_i - predict(x_i))^2`.
pub fn energy(config: &ModelConfiguration, data: &SpectralDataset) -> f64 {
    let mut s = 0.0;
    for (&x, &y) in data.x.iter().zip(&data.y) {
        let r = y - config.predict_unchecked(x);
        s += r * r;
    }
    s / (2.0 * data.len() as f64)
}

/// Exponent `-n b E_n` of the tempered likelihood. Zero at `b = 0`.
#[inline]
pub fn tempered_exponent(energy: f64, n: usize, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        -(n as f64) * b * energy
    }
}

/// Full log likelihood `(n/2) ln(b / 2 pi) - n b E_n`.
///
/// The prefactor diverges at `b = 0`, where this returns `-inf`; move
/// ratios use [`tempered_exponent`] instead.
pub fn log_likelihood(config: &ModelConfiguration, data: &SpectralDataset, b: f64) -> f64 {
    let n = data.len();
    if b == 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * n as f64 * (b / (2.0 * PI)).ln() + tempered_exponent(energy(config, data), n, b)
}

/// `Gam(x; shape, rate) = rate^shape x^(shape-1) exp(-rate x) / Gamma(shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.shape * self.rate.ln() + (self.shape - 1.0) * x.ln()
                - self.rate * x
                - ln_gamma(self.shape)
        } else if x == 0.0 && self.shape == 1.0 {
            self.rate.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn sd(&self) -> f64 {
        self.shape.sqrt() / self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Marsaglia-Tsang; exact. rand_distr parameterises by scale.
        Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated gamma parameters")
            .sample(rng)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.shape > 0.0 && self.rate > 0.0 && self.shape.is_finite() && self.rate.is_finite())
        {
            return Err(Error::Config(format!(
                "{what} prior needs positive finite shape and rate, got ({}, {})",
                self.shape, self.rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -0.5 * z * z - self.sd.ln() - 0.5 * (2.0 * PI).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mean, self.sd)
            .expect("validated normal parameters")
            .sample(rng)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.sd > 0.0 && self.sd.is_finite() && self.mean.is_finite()) {
            return Err(Error::Config(format!(
                "{what} prior needs finite mean and positive sd, got ({}, {})",
                self.mean, self.sd
            )));
        }
        Ok(())
    }
}

/// Prior on peak centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CenterPrior {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl CenterPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            CenterPrior::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            CenterPrior::Normal { mean, sd } => NormalPrior::new(mean, sd).ln_pdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CenterPrior::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            CenterPrior::Normal { mean, sd } => NormalPrior::new(mean, sd).sample(rng),
        }
    }

    /// Prior standard deviation, used to seed proposal step sizes.
    pub fn sd(&self) -> f64 {
        match *self {
            CenterPrior::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            CenterPrior::Normal { sd, .. } => sd,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CenterPrior::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Config(format!(
                        "uniform center prior needs lo < hi, got [{lo}, {hi}]"
                    )));
                }
                Ok(())
            }
            CenterPrior::Normal { mean, sd } => NormalPrior::new(mean, sd).validate("center"),
        }
    }
}

/// Priors on the MGM continuum: `c0 ~ N`, `c1 ~ Gam`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumPrior {
    pub offset: NormalPrior,
    pub slope: GammaPrior,
}

impl ContinuumPrior {
    pub fn ln_pdf(&self, c: &Continuum) -> f64 {
        self.offset.ln_pdf(c.offset) + self.slope.ln_pdf(c.slope)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Continuum {
        let offset = self.offset.sample(rng);
        let slope = self.slope.sample(rng);
        Continuum { offset, slope }
    }
}

/// Prior probabilities of the peak count over `[k_min, k_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPrior {
    k_min: usize,
    probs: Vec<f64>,
}

impl KPrior {
    pub fn uniform(k_min: usize, k_max: usize) -> Result<Self> {
        if k_min > k_max {
            return Err(Error::Config(format!("K_min = {k_min} exceeds K_max = {k_max}")));
        }
        let m = k_max - k_min + 1;
        Ok(Self {
            k_min,
            probs: vec![1.0 / m as f64; m],
        })
    }

    /// Explicit probabilities for `K = k_min, k_min + 1, ...`; must sum to one.
    pub fn new(k_min: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config("K prior is empty".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("K prior entries must be finite and >= 0".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("K prior sums to {s}, not 1")));
        }
        Ok(Self { k_min, probs })
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_min + self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn contains(&self, k: usize) -> bool {
        (self.k_min..=self.k_max()).contains(&k)
    }

    pub fn prob(&self, k: usize) -> f64 {
        if self.contains(k) {
            self.probs[k - self.k_min]
        } else {
            0.0
        }
    }

    pub fn ln_prob(&self, k: usize) -> f64 {
        self.prob(k).ln()
    }

    /// Inverse-CDF draw; always consumes exactly one uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return self.k_min + i;
            }
        }
        // u landed in the rounding gap above the last partial sum
        self.k_min + self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

/// All prior densities of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub amplitude: GammaPrior,
    pub precision: GammaPrior,
    pub center: CenterPrior,
    pub continuum: Option<ContinuumPrior>,
    pub k: KPrior,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        self.amplitude.validate("amplitude")?;
        self.precision.validate("precision")?;
        self.center.validate()?;
        if let Some(c) = &self.continuum {
            c.offset.validate("continuum offset")?;
            c.slope.validate("continuum slope")?;
        }
        Ok(())
    }

    pub fn basis(&self) -> BasisKind {
        if self.continuum.is_some() {
            BasisKind::Mgm
        } else {
            BasisKind::Gaussian
        }
    }

    /// Log prior density of a single peak.
    #[inline]
    pub fn peak_ln_pdf(&self, p: &Peak) -> f64 {
        self.amplitude.ln_pdf(p.amplitude) + self.precision.ln_pdf(p.precision) + self.center.ln_pdf(p.center)
    }
}

/// `ln p(K) + sum_k ln phi(theta_k)` plus the continuum terms; `-inf` off support.
pub fn prior_logdensity(config: &ModelConfiguration, priors: &PriorSpec) -> f64 {
    let mut lp = priors.k.ln_prob(config.peak_count());
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    for p in &config.peaks {
        lp += priors.peak_ln_pdf(p);
    }
    match (&config.continuum, &priors.continuum) {
        (Some(c), Some(cp)) => lp += cp.ln_pdf(c),
        (None, None) => {}
        _ => return f64::NEG_INFINITY,
    }
    lp
}

/// Independent draws of amplitude, precision and center from their priors.
pub fn sample_peak_from_prior<R: Rng + ?Sized>(priors: &PriorSpec, rng: &mut R) -> Peak {
    let amplitude = priors.amplitude.sample(rng);
    let precision = priors.precision.sample(rng);
    let center = priors.center.sample(rng);
    Peak {
        amplitude,
        precision,
        center,
    }
}

/// Draws a full configuration: `K` from the count prior, then peaks and continuum.
pub fn sample_configuration<R: Rng + ?Sized>(priors: &PriorSpec, rng: &mut R) -> ModelConfiguration {
    let k = priors.k.sample(rng);
    let continuum = priors.continuum.as_ref().map(|cp| cp.sample(rng));
    let peaks = (0..k).map(|_| sample_peak_from_prior(priors, rng)).collect();
    ModelConfiguration { peaks, continuum }
}

/// Priors of the synthetic experiment: `a ~ Gam(5, 5)`, `rho ~ Gam(5, 0.04)`,
/// `mu ~ U[0, 3]` and a uniform count prior over `[k_min, k_max]`.
pub fn synthetic_priors(k_min: usize, k_max: usize) -> Result<PriorSpec> {
    Ok(PriorSpec {
        amplitude: GammaPrior::new(5.0, 5.0),
        precision: GammaPrior::new(5.0, 0.04),
        center: CenterPrior::Uniform { lo: 0.0, hi: 3.0 },
        continuum: None,
        k: KPrior::uniform(k_min, k_max)?,
    })
}

/// MGM priors for olivine reflectance: `a ~ Gam(3, 2)`, `rho ~ Gam(5, 0.04)`,
/// `mu ~ N(1.25, 0.4^2)`, `c0 ~ N(offset_mean, 0.1^2)`, `c1 ~ Gam(1, 10)`.
pub fn olivine_priors(offset_mean: f64, k_min: usize, k_max: usize) -> Result<PriorSpec> {
    Ok(PriorSpec {
        amplitude: GammaPrior::new(3.0, 2.0),
        precision: GammaPrior::new(5.0, 0.04),
        center: CenterPrior::Normal { mean: 1.25, sd: 0.4 },
        continuum: Some(ContinuumPrior {
            offset: NormalPrior::new(offset_mean, 0.1),
            slope: GammaPrior::new(1.0, 10.0),
        }),
        k: KPrior::uniform(k_min, k_max)?,
    })
}
