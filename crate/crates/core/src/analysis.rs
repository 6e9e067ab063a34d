//! Partition functions, free energies, posterior model probabilities,
//! empirical-Bayes selection and peak summaries computed from traces.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::KPrior;
use crate::sampler::TraceSet;

/// `ln(mean(exp(v)))`, shifted by the maximum.
pub fn log_mean_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return f64::NAN;
    }
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    m + (s / v.len() as f64).ln()
}

/// `ln(sum(exp(v)))`, shifted by the maximum.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log bridge factors `ln E_l[exp(-n (b_{l+1} - b_l) E_n)]` for every
/// adjacent pair, estimated from the energies recorded at the lower rung.
pub fn bridge_log_factors(energies: &[&[f64]], betas: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(betas.len().saturating_sub(1));
    for l in 0..betas.len().saturating_sub(1) {
        let e = energies[l];
        if e.is_empty() {
            return Err(Error::Analysis(format!(
                "rung {l} has no recorded energies; bridge sampling needs samples at every rung below the top"
            )));
        }
        let db = betas[l + 1] - betas[l];
        if db == 0.0 {
            out.push(0.0);
            continue;
        }
        let scale = -(n as f64) * db;
        out.push(log_mean_exp(e.iter().map(|&x| scale * x)));
    }
    Ok(out)
}

/// Cumulative log partition function `ln z_n(b_l)` with `ln z_n(b_1) = 0`.
pub fn bridge_partition(traces: &TraceSet) -> Result<Vec<f64>> {
    let e: Vec<&[f64]> = traces.rungs.iter().map(|r| r.energy.as_slice()).collect();
    Ok(cumulative(&bridge_log_factors(&e, &traces.betas, traces.n)?))
}

fn cumulative(factors: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(factors.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for f in factors {
        acc += f;
        out.push(acc);
    }
    out
}

/// `ln z_n` estimated separately on `batches` contiguous blocks of every rung.
pub fn bridge_partition_batches(traces: &TraceSet, batches: usize) -> Result<Vec<Vec<f64>>> {
    if batches == 0 {
        return Err(Error::Analysis("batch count must be positive".into()));
    }
    let mut out = Vec::with_capacity(batches);
    for j in 0..batches {
        let e: Vec<&[f64]> = traces
            .rungs
            .iter()
            .map(|r| {
                let len = r.energy.len();
                &r.energy[j * len / batches..(j + 1) * len / batches]
            })
            .collect();
        out.push(cumulative(&bridge_log_factors(&e, &traces.betas, traces.n)?));
    }
    Ok(out)
}

/// Per-rung log partition function and free energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyCurve {
    pub betas: Vec<f64>,
    pub log_z: Vec<f64>,
    /// `None` where `b = 0` and the likelihood prefactor is undefined.
    pub free_energy: Vec<Option<f64>>,
    pub standard_error: Vec<f64>,
}

impl FreeEnergyCurve {
    /// Index and value of the defined rung with the smallest free energy.
    /// Ties go to the larger `b`.
    pub fn argmin(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (l, f) in self.free_energy.iter().enumerate() {
            if let Some(f) = *f {
                match best {
                    Some((_, bf)) if f > bf => {}
                    _ => best = Some((l, f)),
                }
            }
        }
        best
    }
}

/// `F_n(b_l) = -(n/2) ln(b_l / 2 pi) - ln z_n(b_l)`; undefined at `b = 0`.
pub fn free_energy(log_z: &[f64], betas: &[f64], n: usize) -> FreeEnergyCurve {
    let free_energy = log_z
        .iter()
        .zip(betas)
        .map(|(&lz, &b)| (b > 0.0).then(|| -0.5 * n as f64 * (b / (2.0 * PI)).ln() - lz))
        .collect();
    FreeEnergyCurve {
        betas: betas.to_vec(),
        log_z: log_z.to_vec(),
        free_energy,
        standard_error: vec![0.0; log_z.len()],
    }
}

/// Mean and standard error over replicate estimates.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Curve from independent runs: mean `ln z` per rung, standard error across runs.
pub fn free_energy_from_runs(log_z_runs: &[Vec<f64>], betas: &[f64], n: usize) -> Result<FreeEnergyCurve> {
    if log_z_runs.is_empty() {
        return Err(Error::Analysis("no runs to combine".into()));
    }
    let l = betas.len();
    let mut mean = vec![0.0; l];
    let mut se = vec![0.0; l];
    for i in 0..l {
        let col: Vec<f64> = log_z_runs.iter().map(|r| r[i]).collect();
        (mean[i], se[i]) = mean_and_se(&col);
    }
    let mut curve = free_energy(&mean, betas, n);
    curve.standard_error = se;
    Ok(curve)
}

/// Single-run curve with batch-means standard errors.
pub fn free_energy_with_batches(traces: &TraceSet, batches: usize) -> Result<FreeEnergyCurve> {
    let log_z = bridge_partition(traces)?;
    let mut curve = free_energy(&log_z, &traces.betas, traces.n);
    if batches >= 2 && traces.rungs.iter().all(|r| r.len() >= batches) {
        let per_batch = bridge_partition_batches(traces, batches)?;
        for l in 0..log_z.len() {
            let col: Vec<f64> = per_batch.iter().map(|b| b[l]).collect();
            curve.standard_error[l] = mean_and_se(&col).1;
        }
    }
    Ok(curve)
}

/// Posterior probability of every `K` in `[k_min, k_max]`, per rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPosterior {
    pub k_min: usize,
    pub probs: Vec<Vec<f64>>,
}

impl ModelPosterior {
    pub fn k_max(&self) -> usize {
        self.k_min + self.probs.first().map_or(1, |p| p.len()) - 1
    }

    /// Most probable `K` at `rung`; ties go to the smaller `K`.
    pub fn mode(&self, rung: usize) -> usize {
        let p = &self.probs[rung];
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        self.k_min + best
    }
}

/// Empirical frequency of each `K` among a rung's samples.
pub fn model_posterior_marginal(traces: &TraceSet) -> Result<ModelPosterior> {
    let m = traces.k_max - traces.k_min + 1;
    let mut probs = Vec::with_capacity(traces.rungs.len());
    for (l, r) in traces.rungs.iter().enumerate() {
        if r.k.is_empty() {
            return Err(Error::Analysis(format!("rung {l} has no recorded samples")));
        }
        let mut counts = vec![0u64; m];
        for &k in &r.k {
            counts[k as usize - traces.k_min] += 1;
        }
        let total = r.k.len() as f64;
        probs.push(counts.iter().map(|c| *c as f64 / total).collect());
    }
    Ok(ModelPosterior {
        k_min: traces.k_min,
        probs,
    })
}

/// Marginal posteriors on `batches` contiguous blocks of every rung.
pub fn model_posterior_marginal_batches(traces: &TraceSet, batches: usize) -> Result<Vec<ModelPosterior>> {
    if batches == 0 {
        return Err(Error::Analysis("batch count must be positive".into()));
    }
    let m = traces.k_max - traces.k_min + 1;
    let mut out = Vec::with_capacity(batches);
    for j in 0..batches {
        let mut probs = Vec::with_capacity(traces.rungs.len());
        for (l, r) in traces.rungs.iter().enumerate() {
            let len = r.k.len();
            let block = &r.k[j * len / batches..(j + 1) * len / batches];
            if block.is_empty() {
                return Err(Error::Analysis(format!("rung {l} has too few samples for {batches} batches")));
            }
            let mut counts = vec![0u64; m];
            for &k in block {
                counts[k as usize - traces.k_min] += 1;
            }
            probs.push(counts.iter().map(|c| *c as f64 / block.len() as f64).collect());
        }
        out.push(ModelPosterior {
            k_min: traces.k_min,
            probs,
        });
    }
    Ok(out)
}

/// Element-wise mean and standard error over replicate posteriors.
pub fn posterior_mean_and_se(replicates: &[ModelPosterior]) -> Result<(ModelPosterior, Vec<Vec<f64>>)> {
    let first = replicates
        .first()
        .ok_or_else(|| Error::Analysis("no posteriors to combine".into()))?;
    let mut probs = first.probs.clone();
    let mut se = first.probs.clone();
    for l in 0..probs.len() {
        for i in 0..probs[l].len() {
            let col: Vec<f64> = replicates.iter().map(|r| r.probs[l][i]).collect();
            (probs[l][i], se[l][i]) = mean_and_se(&col);
        }
    }
    Ok((
        ModelPosterior {
            k_min: first.k_min,
            probs,
        },
        se,
    ))
}

/// Softmax of `ln p(K) + ln Z_n(K, b)` over the candidate counts.
pub fn model_posterior_from_partitions(log_z_per_k: &[f64], k_prior: &KPrior) -> Vec<f64> {
    let w: Vec<f64> = log_z_per_k
        .iter()
        .enumerate()
        .map(|(i, lz)| k_prior.ln_prob(k_prior.k_min() + i) + lz)
        .collect();
    let norm = log_sum_exp(&w);
    w.iter().map(|x| (x - norm).exp()).collect()
}

/// Empirical-Bayes choice of `(b*, K*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub rung: usize,
    pub b_star: f64,
    pub k_star: usize,
}

/// `b*` minimises the free energy over defined rungs (ties to larger `b`),
/// `K*` maximises the posterior at `b*` (ties to smaller `K`).
pub fn empirical_bayes_select(curve: &FreeEnergyCurve, posterior: &ModelPosterior) -> Result<Selection> {
    let (rung, _) = curve
        .argmin()
        .ok_or_else(|| Error::Analysis("free-energy curve has no defined rung".into()))?;
    Ok(Selection {
        rung,
        b_star: curve.betas[rung],
        k_star: posterior.mode(rung),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        // shifted by the first value so identical inputs reproduce it exactly
        let mean = v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, sd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakStat {
    pub amplitude: Stat,
    pub precision: Stat,
    pub center: Stat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumStat {
    pub offset: Stat,
    pub slope: Stat,
}

/// Posterior summary of the peaks at `(K*, b*)`, slots sorted by center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub k_star: usize,
    pub b_star: f64,
    pub rung: usize,
    pub samples: usize,
    pub peaks: Vec<PeakStat>,
    pub continuum: Option<ContinuumStat>,
}

/// Accumulates snapshots with `K = K*` at `rung`; peaks are matched across
/// snapshots by sorting each snapshot on center.
pub fn summarize_peaks(traces: &TraceSet, k_star: usize, rung: usize) -> Result<PeakSummary> {
    let snaps = traces
        .rungs
        .get(rung)
        .and_then(|r| r.snapshots.as_ref())
        .ok_or_else(|| Error::Analysis(format!("no configurations recorded at rung {rung}; add it to record_rungs")))?;
    let mut slots: Vec<[Vec<f64>; 3]> = (0..k_star).map(|_| Default::default()).collect();
    let mut offset = Vec::new();
    let mut slope = Vec::new();
    let mut samples = 0;
    for s in snaps.iter().filter(|s| s.config.peak_count() == k_star) {
        samples += 1;
        let mut peaks = s.config.peaks.clone();
        peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
        for (slot, p) in slots.iter_mut().zip(&peaks) {
            slot[0].push(p.amplitude);
            slot[1].push(p.precision);
            slot[2].push(p.center);
        }
        if let Some(c) = s.config.continuum {
            offset.push(c.offset);
            slope.push(c.slope);
        }
    }
    if samples == 0 {
        return Err(Error::Analysis(format!(
            "no recorded configuration at rung {rung} has K = {k_star}; run longer"
        )));
    }
    Ok(PeakSummary {
        k_star,
        b_star: traces.betas[rung],
        rung,
        samples,
        peaks: slots
            .iter()
            .map(|s| PeakStat {
                amplitude: Stat::of(&s[0]),
                precision: Stat::of(&s[1]),
                center: Stat::of(&s[2]),
            })
            .collect(),
        continuum: (!offset.is_empty()).then(|| ContinuumStat {
            offset: Stat::of(&offset),
            slope: Stat::of(&slope),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfiguration, Peak};
    use crate::sampler::{MoveStats, RungTrace, Snapshot};

    fn traces_with(betas: Vec<f64>, energies: Vec<Vec<f64>>, ks: Vec<Vec<u32>>, n: usize) -> TraceSet {
        let rungs = energies
            .into_iter()
            .zip(ks)
            .map(|(e, k)| RungTrace {
                mcs: (0..e.len() as u64).collect(),
                k,
                energy: e,
                snapshots: None,
            })
            .collect();
        TraceSet {
            n,
            k_min: 0,
            k_max: 4,
            rungs,
            burnin_stats: MoveStats::default(),
            sampling_stats: MoveStats::default(),
            step_sizes: vec![],
            betas,
        }
    }

    #[test]
    fn constant_energy_telescopes() {
        let betas = vec![0.0, 0.5, 1.3, 4.0, 10.0];
        let c = 0.37;
        let n = 20;
        let t = traces_with(betas.clone(), vec![vec![c; 7]; 5], vec![vec![0; 7]; 5], n);
        let lz = bridge_partition(&t).unwrap();
        assert_eq!(lz[0], 0.0);
        for (l, b) in betas.iter().enumerate() {
            assert!((lz[l] - (-(n as f64) * b * c)).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_neighbour_betas_contribute_nothing() {
        let e = [0.5, 0.8, 1.1];
        let f = bridge_log_factors(&[&e, &e], &[2.0, 2.0], 10).unwrap();
        assert_eq!(f, vec![0.0]);
    }

    #[test]
    fn empty_rung_is_an_error() {
        let t = traces_with(vec![0.0, 1.0, 2.0], vec![vec![0.1], vec![], vec![]], vec![vec![0], vec![], vec![]], 3);
        assert!(matches!(bridge_partition(&t), Err(Error::Analysis(_))));
        assert!(model_posterior_marginal(&t).is_err());
    }

    #[test]
    fn free_energy_cases() {
        let c = free_energy(&[0.0, 0.0, 0.0], &[0.0, 2.0 * PI, 100.0], 512);
        assert_eq!(c.free_energy[0], None);
        assert!(c.free_energy[1].unwrap().abs() < 1e-12);
        let expected = -256.0 * (100.0 / (2.0 * PI)).ln();
        assert!((c.free_energy[2].unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn marginal_posterior_counts() {
        let t = traces_with(vec![0.0], vec![vec![0.0; 4]], vec![vec![2, 2, 3, 2]], 1);
        let p = model_posterior_marginal(&t).unwrap();
        assert_eq!(p.probs[0], vec![0.0, 0.0, 0.75, 0.25, 0.0]);
        assert_eq!(p.mode(0), 2);
        let t = traces_with(vec![0.0], vec![vec![0.0; 3]], vec![vec![4, 4, 4]], 1);
        assert_eq!(model_posterior_marginal(&t).unwrap().probs[0][4], 1.0);
    }

    #[test]
    fn partition_posterior_cases() {
        let kp = KPrior::uniform(0, 1).unwrap();
        let p = model_posterior_from_partitions(&[1f64.ln(), 3f64.ln()], &kp);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let kp = KPrior::uniform(3, 5).unwrap();
        let p = model_posterior_from_partitions(&[-1000.0, -950.0, -1010.0], &kp);
        assert!(p[1] >= 1.0 - 1e-20);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn selection_and_ties() {
        let curve = FreeEnergyCurve {
            betas: vec![0.0, 1.0, 2.0, 3.0],
            log_z: vec![0.0; 4],
            free_energy: vec![None, Some(3.0), Some(1.0), Some(2.0)],
            standard_error: vec![0.0; 4],
        };
        let post = ModelPosterior {
            k_min: 4,
            probs: vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.1, 0.7, 0.2], vec![1.0, 0.0, 0.0]],
        };
        let s = empirical_bayes_select(&curve, &post).unwrap();
        assert_eq!((s.rung, s.k_star, s.b_star), (2, 5, 2.0));

        let tied = FreeEnergyCurve {
            free_energy: vec![None, Some(1.0), Some(1.0), Some(2.0)],
            ..curve.clone()
        };
        let post = ModelPosterior {
            k_min: 4,
            probs: vec![vec![0.5, 0.5, 0.0]; 4],
        };
        let s = empirical_bayes_select(&tied, &post).unwrap();
        assert_eq!((s.rung, s.k_star), (2, 4));

        let undefined = FreeEnergyCurve {
            free_energy: vec![None; 4],
            ..curve
        };
        assert!(empirical_bayes_select(&undefined, &post).is_err());
    }

    fn snapshot_traces(configs: Vec<ModelConfiguration>) -> TraceSet {
        let mut t = traces_with(vec![0.0, 1.0], vec![vec![0.0; 1], vec![0.0; 1]], vec![vec![0], vec![0]], 1);
        t.rungs[1].snapshots = Some(
            configs
                .into_iter()
                .enumerate()
                .map(|(i, config)| Snapshot { mcs: i as u64, config })
                .collect(),
        );
        t
    }

    #[test]
    fn summary_of_identical_and_permuted_snapshots() {
        let p1 = Peak::new(1.0, 100.0, 2.0);
        let p2 = Peak::new(0.5, 50.0, 0.7);
        let same = snapshot_traces(vec![ModelConfiguration::gaussian(vec![p1, p2]); 3]);
        let s = summarize_peaks(&same, 2, 1).unwrap();
        assert_eq!(s.samples, 3);
        assert_eq!(s.peaks[0].center, Stat { mean: 0.7, sd: 0.0 });
        assert_eq!(s.peaks[1].amplitude, Stat { mean: 1.0, sd: 0.0 });

        let permuted = snapshot_traces(vec![
            ModelConfiguration::gaussian(vec![p2, p1]),
            ModelConfiguration::gaussian(vec![p1, p2]),
            ModelConfiguration::gaussian(vec![p2, p1]),
        ]);
        assert_eq!(summarize_peaks(&permuted, 2, 1).unwrap(), s);

        assert!(matches!(summarize_peaks(&same, 3, 1), Err(Error::Analysis(_))));
        assert!(matches!(summarize_peaks(&same, 2, 0), Err(Error::Analysis(_))));
    }

    #[test]
    fn batch_posteriors_average_to_the_full_one() {
        let t = traces_with(vec![0.0, 1.0], vec![vec![0.0; 4]; 2], vec![vec![0, 1, 1, 1], vec![1, 1, 0, 0]], 1);
        let b = model_posterior_marginal_batches(&t, 2).unwrap();
        assert_eq!(b[0].probs[0], vec![0.5, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(b[1].probs[0], vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let (m, se) = posterior_mean_and_se(&b).unwrap();
        assert_eq!(m, model_posterior_marginal(&t).unwrap());
        assert!((se[0][0] - 0.25).abs() < 1e-15);
        assert!(model_posterior_marginal_batches(&t, 5).is_err());
    }

    #[test]
    fn log_mean_exp_is_stable() {
        let v = [-1000.0, -1000.0];
        assert!((log_mean_exp(v) + 1000.0).abs() < 1e-12);
        assert!((log_sum_exp(&[700.0, 700.0]) - (700.0 + 2f64.ln())).abs() < 1e-12);
    }
}
