//! The subcommands. Each writes its files under an output directory and
//! returns the lines it prints.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rjpt_core::analysis::Selection;
use serde::{Deserialize, Serialize};

use crate::bundle::{self, Bundle, Timing};
use crate::config::RunConfig;
use crate::data;
use crate::error::{CliError, Result};
use crate::pipeline;
use crate::plot;

#[derive(Debug, Parser)]
#[command(name = "rjpt", version, about = "Peak deconvolution of 1-D spectra with an unknown number of peaks")]
pub struct Cli {
    /// Worker threads; changes speed only, never results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its ground-truth sidecar.
    Synth(RunArgs),
    /// Sample with birth/death moves inside replica exchange and analyse.
    Fit(RunArgs),
    /// Fixed-K baseline over every K in [k_min, k_max].
    Sweep(RunArgs),
    /// Compare two results bundles computed on the same dataset.
    Compare(CompareArgs),
    /// Re-run the analysis of a fit bundle from its saved traces.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled configuration: synthetic-s4, olivine-s5 or desk-k3.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset CSV; overrides `data` in the configuration.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Directory of the fit bundle.
    #[arg(long)]
    pub fit: PathBuf,
    /// Directory of the sweep bundle.
    #[arg(long)]
    pub sweep: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Directory of a fit bundle with its traces.
    #[arg(long)]
    pub bundle: PathBuf,
    /// Defaults to the bundle directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset CSV, needed only for the fit plot.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}

pub fn run(cli: &Cli) -> Result<Vec<String>> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Analyze(a) => analyze(a),
    }
}

/// Preset or config file, then the command-line overrides.
pub fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --config or --preset, not both".into())),
        (Some(p), None) => RunConfig::load(p)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::write(&dir, e))?;
    Ok(dir)
}

fn data_path(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.data
        .clone()
        .ok_or_else(|| CliError::Config("no dataset: pass --data or set `data` in the config".into()))
}

/// The configuration as stored in bundles: paths stripped so the bundle
/// depends only on the dataset contents and the settings.
fn stored(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        data: None,
        out: None,
        ..cfg.clone()
    }
}

pub fn synth(args: &RunArgs) -> Result<Vec<String>> {
    let cfg = resolve(args)?;
    let truth = cfg.ground_truth()?;
    let ds = rjpt_core::synth::generate(&truth)?;
    let dir = out_dir(&cfg)?;
    let csv = data::to_csv(&ds);
    bundle::write(&dir.join("data.csv"), &csv)?;
    let mut sidecar = serde_json::to_string_pretty(&truth).expect("truth serialises");
    sidecar.push('\n');
    bundle::write(&dir.join("truth.json"), &sidecar)?;
    Ok(vec![format!(
        "wrote {} points, {} peaks, sha256 {}",
        ds.len(),
        truth.config.peak_count(),
        data::sha256_hex(csv.as_bytes())
    )])
}

pub fn fit(args: &RunArgs) -> Result<Vec<String>> {
    let cfg = resolve(args)?;
    let path = data_path(&cfg)?;
    let (ds, sha) = data::read(&path)?;
    let (traces, timing) = pipeline::sample(&ds, &cfg)?;
    let (b, peaks_error) = pipeline::analyze_fit(pipeline::dataset_info(&ds, &sha), &stored(&cfg), &traces)?;
    let dir = out_dir(&cfg)?;
    bundle::write(&dir.join(bundle::TRACES), &bundle::traces_csv(&traces))?;
    bundle::write(&dir.join(bundle::SNAPSHOTS), &bundle::snapshots_csv(&traces))?;
    write_timing(&dir, &timing)?;
    let lines = emit_fit(&dir, &b, Some(&ds), args.plot)?;
    match peaks_error {
        Some(e) => Err(e),
        None => Ok(lines),
    }
}

fn emit_fit(dir: &Path, b: &bundle::FitBundle, ds: Option<&rjpt_core::SpectralDataset>, plot: bool) -> Result<Vec<String>> {
    let bundle = Bundle::Fit(b.clone());
    bundle::write(&dir.join(bundle::RESULTS), &bundle.to_json())?;
    if plot {
        let s = b.selection;
        if let Some(ds) = ds {
            let title = format!("K* = {}, b* = {}", s.k_star, s.b_star);
            bundle::write(&dir.join("fit.svg"), &plot::fit_svg(ds, b.peaks.as_ref(), &title))?;
        }
        bundle::write(&dir.join("free_energy.svg"), &plot::free_energy_svg(&b.free_energy, "free energy"))?;
        let title = format!("p(K | D, b = {})", s.b_star);
        bundle::write(&dir.join("posterior.svg"), &plot::posterior_svg(&b.posterior, s.rung, &title))?;
    }
    Ok(summary_lines(&bundle))
}

fn write_timing(dir: &Path, t: &Timing) -> Result<()> {
    let mut s = serde_json::to_string_pretty(t).expect("timing serialises");
    s.push('\n');
    bundle::write(&dir.join(bundle::TIMING), &s)
}

fn summary_lines(b: &Bundle) -> Vec<String> {
    let s = b.selection();
    let f = b.free_energy();
    let mut lines = vec![format!(
        "{}: b* = {} (rung {}), K* = {}, F(b*) = {:.4} +- {:.4}",
        b.kind(),
        s.b_star,
        s.rung + 1,
        s.k_star,
        f.free_energy[s.rung].unwrap_or(f64::NAN),
        f.standard_error[s.rung]
    )];
    if let Bundle::Fit(fb) = b {
        if let Some(p) = &fb.peaks {
            for (i, pk) in p.peaks.iter().enumerate() {
                lines.push(format!(
                    "peak {}: center {:.4} +- {:.4}, amplitude {:.4} +- {:.4}, precision {:.2} +- {:.2}",
                    i + 1,
                    pk.center.mean,
                    pk.center.sd,
                    pk.amplitude.mean,
                    pk.amplitude.sd,
                    pk.precision.mean,
                    pk.precision.sd
                ));
            }
        }
    }
    lines
}

pub fn sweep(args: &RunArgs) -> Result<Vec<String>> {
    let cfg = resolve(args)?;
    let path = data_path(&cfg)?;
    let (ds, sha) = data::read(&path)?;
    let (reports, timing) = pipeline::sweep(&ds, &cfg)?;
    let b = pipeline::analyze_sweep(pipeline::dataset_info(&ds, &sha), &stored(&cfg), &reports)?;
    let dir = out_dir(&cfg)?;
    write_timing(&dir, &timing)?;
    let bundle = Bundle::Sweep(b.clone());
    bundle::write(&dir.join(bundle::RESULTS), &bundle.to_json())?;
    if args.plot {
        bundle::write(&dir.join("free_energy.svg"), &plot::free_energy_svg(&b.free_energy, "free energy (sweep)"))?;
        let s = b.selection;
        let title = format!("p(K | D, b = {}) (sweep)", s.b_star);
        bundle::write(&dir.join("posterior.svg"), &plot::posterior_svg(&b.posterior, s.rung, &title))?;
    }
    Ok(summary_lines(&bundle))
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Vec<String>> {
    let Bundle::Fit(old) = Bundle::load(&args.bundle)? else {
        return Err(CliError::Data(format!("{}: not a fit bundle", args.bundle.display())));
    };
    let read = |name: &str| {
        let p = args.bundle.join(name);
        std::fs::read_to_string(&p).map_err(|e| CliError::read(&p, e))
    };
    let traces = bundle::read_traces(&old, &read(bundle::TRACES)?, &read(bundle::SNAPSHOTS)?)?;
    let (mut b, peaks_error) = pipeline::analyze_fit(old.dataset.clone(), &old.config, &traces)?;
    b.move_stats = old.move_stats.clone();
    let ds = match &args.data {
        Some(p) => {
            let (ds, sha) = data::read(p)?;
            if sha != old.dataset.sha256 {
                return Err(CliError::Data(format!("{}: dataset hash differs from the bundle's", p.display())));
            }
            Some(ds)
        }
        None => None,
    };
    let dir = args.out.clone().unwrap_or_else(|| args.bundle.clone());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::write(&dir, e))?;
    let lines = emit_fit(&dir, &b, ds.as_ref(), args.plot)?;
    match peaks_error {
        Some(e) => Err(e),
        None => Ok(lines),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRow {
    pub k: usize,
    pub fit: f64,
    pub fit_se: f64,
    pub sweep: f64,
    pub sweep_se: f64,
    pub diff: f64,
    pub combined_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset_sha256: String,
    pub kinds: (String, String),
    pub b_top: f64,
    pub free_energy_top: (f64, f64),
    pub delta_free_energy: f64,
    pub delta_free_energy_se: f64,
    /// `p(K | D, b_L)` side by side.
    pub posterior_top: Vec<PosteriorRow>,
    pub max_abs_posterior_diff: f64,
    pub selection: (Selection, Selection),
    pub misselection: bool,
    pub seconds: (Option<f64>, Option<f64>),
    /// Sweep seconds over fit seconds.
    pub speedup: Option<f64>,
}

pub fn compare(a: &Bundle, b: &Bundle, ta: Option<&Timing>, tb: Option<&Timing>) -> Result<Comparison> {
    if a.dataset().sha256 != b.dataset().sha256 {
        return Err(CliError::Data(format!(
            "bundles were computed on different datasets ({} vs {})",
            a.dataset().sha256,
            b.dataset().sha256
        )));
    }
    let (pa, sa) = a.posterior();
    let (pb, sb) = b.posterior();
    if pa.k_min != pb.k_min || pa.k_max() != pb.k_max() {
        return Err(CliError::Config("bundles cover different K ranges".into()));
    }
    let (fa, fb) = (a.free_energy(), b.free_energy());
    let (la, lb) = (fa.betas.len() - 1, fb.betas.len() - 1);
    if fa.betas[la] != fb.betas[lb] {
        return Err(CliError::Config("bundles end at different b_L".into()));
    }
    let top = |f: &rjpt_core::analysis::FreeEnergyCurve, l: usize| {
        f.free_energy[l].ok_or_else(|| CliError::Analysis("free energy undefined at b_L".into()))
    };
    let (f1, f2) = (top(fa, la)?, top(fb, lb)?);
    let rows: Vec<PosteriorRow> = (0..pa.probs[la].len())
        .map(|i| {
            let (x, y) = (pa.probs[la][i], pb.probs[lb][i]);
            let (xs, ys) = (sa[la][i], sb[lb][i]);
            PosteriorRow {
                k: pa.k_min + i,
                fit: x,
                fit_se: xs,
                sweep: y,
                sweep_se: ys,
                diff: x - y,
                combined_se: xs.hypot(ys),
            }
        })
        .collect();
    let (sel_a, sel_b) = (a.selection(), b.selection());
    let (secs_a, secs_b) = (ta.map(|t| t.total_seconds), tb.map(|t| t.total_seconds));
    Ok(Comparison {
        dataset_sha256: a.dataset().sha256.clone(),
        kinds: (a.kind().into(), b.kind().into()),
        b_top: fa.betas[la],
        free_energy_top: (f1, f2),
        delta_free_energy: f1 - f2,
        delta_free_energy_se: fa.standard_error[la].hypot(fb.standard_error[lb]),
        max_abs_posterior_diff: rows.iter().map(|r| r.diff.abs()).fold(0.0, f64::max),
        posterior_top: rows,
        selection: (sel_a, sel_b),
        misselection: sel_a.k_star != sel_b.k_star,
        seconds: (secs_a, secs_b),
        speedup: match (secs_a, secs_b) {
            (Some(x), Some(y)) if x > 0.0 => Some(y / x),
            _ => None,
        },
    })
}

/// Human-readable report; `timing` adds the wall-clock ratio.
pub fn comparison_text(c: &Comparison, timing: bool) -> String {
    let mut s = String::new();
    writeln!(s, "dataset {}", c.dataset_sha256).unwrap();
    writeln!(
        s,
        "F(b_L = {}): {} {:.4}, {} {:.4}, diff {:.4} +- {:.4}",
        c.b_top, c.kinds.0, c.free_energy_top.0, c.kinds.1, c.free_energy_top.1, c.delta_free_energy, c.delta_free_energy_se
    )
    .unwrap();
    writeln!(s, "{:>4} {:>16} {:>16} {:>10}", "K", c.kinds.0, c.kinds.1, "diff").unwrap();
    for r in &c.posterior_top {
        writeln!(
            s,
            "{:>4} {:>8.4}+-{:<6.4} {:>8.4}+-{:<6.4} {:>10.4}",
            r.k, r.fit, r.fit_se, r.sweep, r.sweep_se, r.diff
        )
        .unwrap();
    }
    writeln!(
        s,
        "K*: {} {} (b* = {}), {} {} (b* = {}); misselection {}",
        c.kinds.0, c.selection.0.k_star, c.selection.0.b_star, c.kinds.1, c.selection.1.k_star, c.selection.1.b_star, c.misselection
    )
    .unwrap();
    if let (true, Some(x)) = (timing, c.speedup) {
        writeln!(s, "wall-clock ratio {}/{}: {x:.3}", c.kinds.1, c.kinds.0).unwrap();
    }
    s
}

fn compare_cmd(args: &CompareArgs) -> Result<Vec<String>> {
    let a = Bundle::load(&args.fit)?;
    let b = Bundle::load(&args.sweep)?;
    let ta = Timing::load(&args.fit).ok();
    let tb = Timing::load(&args.sweep).ok();
    let c = compare(&a, &b, ta.as_ref(), tb.as_ref())?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
        let mut json = serde_json::to_string_pretty(&c).expect("comparison serialises");
        json.push('\n');
        bundle::write(&dir.join("compare.json"), &json)?;
        bundle::write(&dir.join("compare.txt"), &comparison_text(&c, true))?;
    }
    Ok(comparison_text(&c, false).lines().map(String::from).collect())
}
