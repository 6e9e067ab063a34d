//! Fit and sweep drivers shared by the subcommands and the test suites.

use std::time::Instant;

use rjpt_core::analysis::{
    self, bridge_partition, bridge_partition_batches, empirical_bayes_select, free_energy_from_runs,
    free_energy_with_batches, model_posterior_from_partitions, model_posterior_marginal,
    model_posterior_marginal_batches, posterior_mean_and_se, summarize_peaks, ModelPosterior,
};
use rjpt_core::model::SpectralDataset;
use rjpt_core::sampler::{self, RungTrace, TraceSet};
use rjpt_core::sweep::{self, SweepMode, SweepReport};

use crate::bundle::{DatasetInfo, FitBundle, RunStats, SweepBundle, SweepSection, Timing};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub fn dataset_info(data: &SpectralDataset, sha256: &str) -> DatasetInfo {
    DatasetInfo {
        sha256: sha256.to_string(),
        n: data.len(),
        transform: data.transform(),
    }
}

/// Runs `cfg.runs` independent samplers one after another.
pub fn sample(data: &SpectralDataset, cfg: &RunConfig) -> Result<(Vec<TraceSet>, Timing)> {
    let start = Instant::now();
    let mut traces = Vec::with_capacity(cfg.runs);
    let mut run_seconds = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs.max(1) {
        let sc = cfg.sampler_config(data, run)?;
        let t0 = Instant::now();
        traces.push(sampler::run(data, &sc)?);
        run_seconds.push(t0.elapsed().as_secs_f64());
    }
    let timing = Timing {
        kind: "fit".into(),
        total_seconds: start.elapsed().as_secs_f64(),
        run_seconds,
        per_k_seconds: Vec::new(),
    };
    Ok((traces, timing))
}

/// Analysis of sampled traces. A failed peak summary is recorded in the
/// bundle and returned alongside it.
pub fn analyze_fit(
    info: DatasetInfo,
    cfg: &RunConfig,
    traces: &[TraceSet],
) -> Result<(FitBundle, Option<CliError>)> {
    let first = traces
        .first()
        .ok_or_else(|| CliError::Analysis("no runs to analyse".into()))?;
    let log_z_runs = traces.iter().map(bridge_partition).collect::<rjpt_core::Result<Vec<_>>>()?;
    let (free_energy, posterior, posterior_se) = if traces.len() >= 2 {
        let curve = free_energy_from_runs(&log_z_runs, &first.betas, first.n)?;
        let reps = traces
            .iter()
            .map(model_posterior_marginal)
            .collect::<rjpt_core::Result<Vec<_>>>()?;
        let (p, se) = posterior_mean_and_se(&reps)?;
        (curve, p, se)
    } else {
        let curve = free_energy_with_batches(first, cfg.batches)?;
        let p = model_posterior_marginal(first)?;
        let se = batch_posterior_se(first, cfg.batches, &p)?;
        (curve, p, se)
    };
    let selection = empirical_bayes_select(&free_energy, &posterior)?;
    let pooled = pool_snapshots(traces, selection.rung);
    let (peaks, peaks_error) = match summarize_peaks(&pooled, selection.k_star, selection.rung) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(CliError::from(e))),
    };
    let bundle = FitBundle {
        dataset: info,
        config: cfg.clone(),
        betas: first.betas.clone(),
        log_z_runs,
        free_energy,
        posterior,
        posterior_se,
        selection,
        peaks,
        peaks_error: peaks_error.as_ref().map(|e| e.to_string()),
        move_stats: traces
            .iter()
            .map(|t| RunStats {
                burnin: t.burnin_stats.clone(),
                sampling: t.sampling_stats.clone(),
                step_sizes: t.step_sizes.clone(),
            })
            .collect(),
    };
    Ok((bundle, peaks_error))
}

fn batch_posterior_se(t: &TraceSet, batches: usize, p: &ModelPosterior) -> Result<Vec<Vec<f64>>> {
    if batches >= 2 && t.rungs.iter().all(|r| r.len() >= batches) {
        Ok(posterior_mean_and_se(&model_posterior_marginal_batches(t, batches)?)?.1)
    } else {
        Ok(p.probs.iter().map(|r| vec![0.0; r.len()]).collect())
    }
}

/// Metadata of the first run with the snapshots of every run at `rung`.
fn pool_snapshots(traces: &[TraceSet], rung: usize) -> TraceSet {
    let t = &traces[0];
    let mut rungs = vec![RungTrace::default(); t.rungs.len()];
    if traces.iter().any(|t| t.rungs[rung].snapshots.is_some()) {
        rungs[rung].snapshots = Some(
            traces
                .iter()
                .flat_map(|t| t.rungs[rung].snapshots.iter().flatten().cloned())
                .collect(),
        );
    }
    TraceSet {
        betas: t.betas.clone(),
        n: t.n,
        k_min: t.k_min,
        k_max: t.k_max,
        rungs,
        burnin_stats: Default::default(),
        sampling_stats: Default::default(),
        step_sizes: Vec::new(),
    }
}

/// Runs the fixed-`K` baseline `cfg.runs` times with per-`K` runs in sequence.
pub fn sweep(data: &SpectralDataset, cfg: &RunConfig) -> Result<(Vec<SweepReport>, Timing)> {
    let start = Instant::now();
    let keep = cfg.runs < 2;
    let mut reports = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs.max(1) {
        let mut sc = cfg.sampler_config(data, run)?;
        sc.schedule.record_rungs.clear();
        reports.push(sweep::run_sweep(data, &sc, SweepMode::Sequential, keep)?);
    }
    let ks: Vec<usize> = (cfg.k_min..=cfg.k_max).collect();
    let timing = Timing {
        kind: "sweep".into(),
        total_seconds: start.elapsed().as_secs_f64(),
        run_seconds: reports.iter().map(|r| r.total_seconds).collect(),
        per_k_seconds: ks
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, reports.iter().map(|r| r.per_k[i].seconds).sum()))
            .collect(),
    };
    Ok((reports, timing))
}

pub fn analyze_sweep(info: DatasetInfo, cfg: &RunConfig, reports: &[SweepReport]) -> Result<SweepBundle> {
    let first = reports
        .first()
        .ok_or_else(|| CliError::Analysis("no runs to analyse".into()))?;
    let k_prior = cfg.k_prior()?;
    let (betas, n) = (first.betas.clone(), first.n);
    let (free_energy, posterior, posterior_se, per_k) = if reports.len() >= 2 {
        let combined: Vec<Vec<f64>> = reports.iter().map(|r| r.combined.log_z.clone()).collect();
        let curve = free_energy_from_runs(&combined, &betas, n)?;
        let (p, se) = posterior_mean_and_se(&reports.iter().map(|r| r.posterior.clone()).collect::<Vec<_>>())?;
        let per_k = (0..first.per_k.len())
            .map(|i| {
                let runs: Vec<Vec<f64>> = reports.iter().map(|r| r.per_k[i].log_z.clone()).collect();
                let c = free_energy_from_runs(&runs, &betas, n)?;
                Ok(SweepSection {
                    k: first.per_k[i].k,
                    log_z: c.log_z,
                    log_z_se: c.standard_error,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (curve, p, se, per_k)
    } else {
        // batch means: split every per-K trace into the same blocks
        let batches = cfg.batches;
        let per_batch: Option<Vec<Vec<Vec<f64>>>> = (batches >= 2)
            .then(|| {
                first
                    .per_k
                    .iter()
                    .map(|p| {
                        let t = p.traces.as_ref()?;
                        t.rungs
                            .iter()
                            .all(|r| r.len() >= batches)
                            .then(|| bridge_partition_batches(t, batches).ok())
                            .flatten()
                    })
                    .collect::<Option<Vec<_>>>()
            })
            .flatten();
        let mut curve = first.combined.clone();
        let mut se = first.posterior.probs.iter().map(|r| vec![0.0; r.len()]).collect();
        let mut per_k: Vec<SweepSection> = first
            .per_k
            .iter()
            .map(|p| SweepSection {
                k: p.k,
                log_z: p.log_z.clone(),
                log_z_se: vec![0.0; betas.len()],
            })
            .collect();
        if let Some(pb) = per_batch {
            let mut combined_batches = Vec::with_capacity(batches);
            let mut post_batches = Vec::with_capacity(batches);
            for j in 0..batches {
                let mut lz = Vec::with_capacity(betas.len());
                let mut probs = Vec::with_capacity(betas.len());
                for l in 0..betas.len() {
                    let col: Vec<f64> = pb.iter().map(|k| k[j][l]).collect();
                    let w: Vec<f64> = col
                        .iter()
                        .zip(&first.per_k)
                        .map(|(z, p)| k_prior.ln_prob(p.k) + z)
                        .collect();
                    lz.push(analysis::log_sum_exp(&w));
                    probs.push(model_posterior_from_partitions(&col, &k_prior));
                }
                combined_batches.push(lz);
                post_batches.push(ModelPosterior {
                    k_min: k_prior.k_min(),
                    probs,
                });
            }
            curve.standard_error = free_energy_from_runs(&combined_batches, &betas, n)?.standard_error;
            se = posterior_mean_and_se(&post_batches)?.1;
            for (sec, batches_k) in per_k.iter_mut().zip(&pb) {
                sec.log_z_se = free_energy_from_runs(batches_k, &betas, n)?.standard_error;
            }
        }
        (curve, first.posterior.clone(), se, per_k)
    };
    let selection = empirical_bayes_select(&free_energy, &posterior)?;
    Ok(SweepBundle {
        dataset: info,
        config: cfg.clone(),
        betas,
        per_k,
        free_energy,
        posterior,
        posterior_se,
        selection,
    })
}
