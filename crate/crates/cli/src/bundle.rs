//! Results bundles: `results.json` (deterministic), `timing.json`, and the
//! raw traces as CSV.

use std::fmt::Write as _;
use std::path::Path;

use rjpt_core::analysis::{FreeEnergyCurve, ModelPosterior, PeakSummary, Selection};
use rjpt_core::model::{Continuum, ModelConfiguration, Peak, Transform};
use rjpt_core::sampler::{MoveStats, RungTrace, Snapshot, StepSizes, TraceSet};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{csv_error, csv_field, csv_reader};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub sha256: String,
    pub n: usize,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub burnin: MoveStats,
    pub sampling: MoveStats,
    pub step_sizes: Vec<StepSizes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitBundle {
    pub dataset: DatasetInfo,
    pub config: RunConfig,
    pub betas: Vec<f64>,
    pub log_z_runs: Vec<Vec<f64>>,
    pub free_energy: FreeEnergyCurve,
    pub posterior: ModelPosterior,
    pub posterior_se: Vec<Vec<f64>>,
    pub selection: Selection,
    pub peaks: Option<PeakSummary>,
    pub peaks_error: Option<String>,
    pub move_stats: Vec<RunStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub k: usize,
    /// Mean over runs of `ln z_n(K, b_l)`.
    pub log_z: Vec<f64>,
    pub log_z_se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBundle {
    pub dataset: DatasetInfo,
    pub config: RunConfig,
    pub betas: Vec<f64>,
    pub per_k: Vec<SweepSection>,
    pub free_energy: FreeEnergyCurve,
    pub posterior: ModelPosterior,
    pub posterior_se: Vec<Vec<f64>>,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Bundle {
    Fit(FitBundle),
    Sweep(SweepBundle),
}

impl Bundle {
    pub fn dataset(&self) -> &DatasetInfo {
        match self {
            Bundle::Fit(b) => &b.dataset,
            Bundle::Sweep(b) => &b.dataset,
        }
    }

    pub fn free_energy(&self) -> &FreeEnergyCurve {
        match self {
            Bundle::Fit(b) => &b.free_energy,
            Bundle::Sweep(b) => &b.free_energy,
        }
    }

    pub fn posterior(&self) -> (&ModelPosterior, &[Vec<f64>]) {
        match self {
            Bundle::Fit(b) => (&b.posterior, &b.posterior_se),
            Bundle::Sweep(b) => (&b.posterior, &b.posterior_se),
        }
    }

    pub fn selection(&self) -> Selection {
        match self {
            Bundle::Fit(b) => b.selection,
            Bundle::Sweep(b) => b.selection,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Bundle::Fit(_) => "fit",
            Bundle::Sweep(_) => "sweep",
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("results bundle: {e}")))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(RESULTS);
        let text = std::fs::read_to_string(&p).map_err(|e| CliError::read(&p, e))?;
        Self::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
    }
}

/// Wall-clock record kept apart from the deterministic results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub kind: String,
    pub total_seconds: f64,
    pub run_seconds: Vec<f64>,
    /// `(K, seconds summed over runs)` for sweeps.
    pub per_k_seconds: Vec<(usize, f64)>,
}

impl Timing {
    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(TIMING);
        let text = std::fs::read_to_string(&p).map_err(|e| CliError::read(&p, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
    }
}

pub const RESULTS: &str = "results.json";
pub const TIMING: &str = "timing.json";
pub const TRACES: &str = "traces.csv";
pub const SNAPSHOTS: &str = "snapshots.csv";

/// `run,rung,mcs,k,energy`, one row per recorded sample.
pub fn traces_csv(traces: &[TraceSet]) -> String {
    let mut s = String::from("run,rung,mcs,k,energy\n");
    for (run, t) in traces.iter().enumerate() {
        for (l, r) in t.rungs.iter().enumerate() {
            for i in 0..r.len() {
                writeln!(s, "{run},{l},{},{},{:e}", r.mcs[i], r.k[i], r.energy[i]).unwrap();
            }
        }
    }
    s
}

/// One row per peak of every recorded configuration; configurations without
/// peaks get one row with the peak columns empty.
pub fn snapshots_csv(traces: &[TraceSet]) -> String {
    let mut s = String::from("run,rung,mcs,k,slot,amplitude,precision,center,offset,slope\n");
    for (run, t) in traces.iter().enumerate() {
        for (l, r) in t.rungs.iter().enumerate() {
            for snap in r.snapshots.iter().flatten() {
                let c = &snap.config;
                let (off, slope) = match c.continuum {
                    Some(c) => (format!("{:e}", c.offset), format!("{:e}", c.slope)),
                    None => (String::new(), String::new()),
                };
                let k = c.peak_count();
                if k == 0 {
                    writeln!(s, "{run},{l},{},0,,,,,{off},{slope}", snap.mcs).unwrap();
                }
                for (slot, p) in c.peaks.iter().enumerate() {
                    writeln!(
                        s,
                        "{run},{l},{},{k},{slot},{:e},{:e},{:e},{off},{slope}",
                        snap.mcs, p.amplitude, p.precision, p.center
                    )
                    .unwrap();
                }
            }
        }
    }
    s
}

/// Rebuilds the per-run traces of a fit bundle from its CSV files. Move
/// statistics are not part of the CSV and come back empty.
pub fn read_traces(bundle: &FitBundle, traces: &str, snapshots: &str) -> Result<Vec<TraceSet>> {
    let runs = bundle.log_z_runs.len();
    let l_count = bundle.betas.len();
    let record: Vec<bool> = {
        let top = bundle.config.snapshot_top.min(l_count);
        (0..l_count).map(|l| l >= l_count - top).collect()
    };
    let mut out: Vec<TraceSet> = (0..runs)
        .map(|_| TraceSet {
            betas: bundle.betas.clone(),
            n: bundle.dataset.n,
            k_min: bundle.config.k_min,
            k_max: bundle.config.k_max,
            rungs: (0..l_count)
                .map(|l| RungTrace {
                    snapshots: record[l].then(Vec::new),
                    ..Default::default()
                })
                .collect(),
            burnin_stats: MoveStats::default(),
            sampling_stats: MoveStats::default(),
            step_sizes: Vec::new(),
        })
        .collect();
    let locate = |out: &Vec<TraceSet>, run: usize, rung: usize, c: &csv::StringRecord| -> Result<()> {
        if run >= out.len() || rung >= l_count {
            return Err(CliError::Data(format!(
                "line {}: run {run} / rung {rung} out of range",
                line_of(c)
            )));
        }
        Ok(())
    };
    let mut reader = csv_reader(traces);
    for rec in reader.records() {
        let c = rec.map_err(csv_error)?;
        let (run, rung): (usize, usize) = (csv_field(&c, 0)?, csv_field(&c, 1)?);
        locate(&out, run, rung, &c)?;
        let r = &mut out[run].rungs[rung];
        r.mcs.push(csv_field(&c, 2)?);
        r.k.push(csv_field(&c, 3)?);
        r.energy.push(csv_field(&c, 4)?);
    }
    let mut reader = csv_reader(snapshots);
    for rec in reader.records() {
        let c = rec.map_err(csv_error)?;
        let (run, rung): (usize, usize) = (csv_field(&c, 0)?, csv_field(&c, 1)?);
        locate(&out, run, rung, &c)?;
        let mcs: u64 = csv_field(&c, 2)?;
        let k: usize = csv_field(&c, 3)?;
        let continuum = if c.get(8).is_some_and(|v| !v.is_empty()) {
            Some(Continuum {
                offset: csv_field(&c, 8)?,
                slope: csv_field(&c, 9)?,
            })
        } else {
            None
        };
        let snaps = out[run].rungs[rung].snapshots.get_or_insert_with(Vec::new);
        if k == 0 || csv_field::<usize>(&c, 4)? == 0 {
            snaps.push(Snapshot {
                mcs,
                config: ModelConfiguration {
                    peaks: Vec::with_capacity(k),
                    continuum,
                },
            });
        }
        if k > 0 {
            let last = snaps
                .last_mut()
                .ok_or_else(|| CliError::Data(format!("line {}: peak row before slot 0", line_of(&c))))?;
            last.config
                .peaks
                .push(Peak::new(csv_field(&c, 5)?, csv_field(&c, 6)?, csv_field(&c, 7)?));
        }
    }
    Ok(out)
}

fn line_of(c: &csv::StringRecord) -> u64 {
    c.position().map_or(0, |p| p.line())
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::write(path, e))
}
