//! Minimal static SVG charts written without a plotting dependency.

use std::fmt::Write as _;

use rjpt_core::analysis::{FreeEnergyCurve, ModelPosterior, PeakSummary};
use rjpt_core::model::{Continuum, ModelConfiguration, Peak, SpectralDataset};

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_x: bool,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone, log_x: bool) -> Self {
        let (mut x0, mut x1) = bounds(xs.map(|x| if log_x { x.log10() } else { x }));
        let (mut y0, mut y1) = bounds(ys);
        if x1 <= x0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        Frame {
            x0,
            x1,
            y0: y0 - pad,
            y1: y1 + pad,
            log_x,
        }
    }

    fn px(&self, x: f64) -> f64 {
        let x = if self.log_x { x.log10() } else { x };
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

fn open(s: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title)).unwrap();
    let (xa, xb, ya, yb) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    writeln!(
        s,
        r#"<rect x="{xa}" y="{ya}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        xb - xa,
        yb - ya
    )
    .unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let label = if f.log_x { format!("1e{xv:.1}") } else { format!("{xv:.3}") };
        let px = xa + t * (xb - xa);
        writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, yb + 16.0).unwrap();
        let yv = f.y0 + t * (f.y1 - f.y0);
        let py = yb - t * (yb - ya);
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#, xa - 6.0, py + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel)).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    )
    .unwrap();
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(s: &mut String, f: &Frame, pts: impl Iterator<Item = (f64, f64)>, stroke: &str) {
    let mut d = String::new();
    for (x, y) in pts {
        write!(d, "{:.2},{:.2} ", f.px(x), f.py(y)).unwrap();
    }
    writeln!(s, r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#, d.trim_end()).unwrap();
}

/// Data, the fit from the posterior-mean peaks, and one vertical arrow per
/// peak at its center with its height.
pub fn fit_svg(data: &SpectralDataset, summary: Option<&PeakSummary>, title: &str) -> String {
    let config = summary.map(|s| ModelConfiguration {
        peaks: s
            .peaks
            .iter()
            .map(|p| Peak::new(p.amplitude.mean, p.precision.mean, p.center.mean))
            .collect(),
        continuum: s.continuum.map(|c| Continuum {
            offset: c.offset.mean,
            slope: c.slope.mean,
        }),
    });
    let x = data.x();
    let lo = x[0];
    let hi = x[x.len() - 1];
    let grid: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).collect();
    let fit: Vec<f64> = match &config {
        Some(c) => grid
            .iter()
            .map(|&xi| {
                let base = c.continuum.map_or(0.0, |k| k.eval(xi));
                base + c.peaks.iter().map(|p| p.eval(xi)).sum::<f64>()
            })
            .collect(),
        None => Vec::new(),
    };
    let f = Frame::new(
        x.iter().copied(),
        data.y().iter().copied().chain(fit.iter().copied()).chain(std::iter::once(0.0)),
        false,
    );
    let mut s = String::new();
    open(&mut s, title, "x", "y", &f);
    for (xi, yi) in x.iter().zip(data.y()) {
        writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="#777"/>"##, f.px(*xi), f.py(*yi)).unwrap();
    }
    if let Some(c) = &config {
        polyline(&mut s, &f, grid.iter().copied().zip(fit.iter().copied()), "#c0392b");
        for p in &c.peaks {
            let base = c.continuum.map_or(0.0, |k| k.eval(p.center));
            let (px, y0, y1) = (f.px(p.center), f.py(base), f.py(base + p.amplitude));
            writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{y1:.2}" stroke="#1f4e9a" stroke-width="1.5"/>"##
            )
            .unwrap();
            let dir = if y1 < y0 { 1.0 } else { -1.0 };
            writeln!(
                s,
                r##"<polygon points="{px:.2},{y1:.2} {:.2},{:.2} {:.2},{:.2}" fill="#1f4e9a"/>"##,
                px - 4.0,
                y1 + dir * 8.0,
                px + 4.0,
                y1 + dir * 8.0
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Free energy against `b` on a log axis, with standard-error bars.
pub fn free_energy_svg(curve: &FreeEnergyCurve, title: &str) -> String {
    let pts: Vec<(f64, f64, f64)> = curve
        .betas
        .iter()
        .zip(&curve.free_energy)
        .zip(&curve.standard_error)
        .filter_map(|((b, f), se)| f.map(|f| (*b, f, *se)))
        .collect();
    let f = Frame::new(
        pts.iter().map(|p| p.0),
        pts.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2]),
        true,
    );
    let mut s = String::new();
    open(&mut s, title, "b", "F", &f);
    polyline(&mut s, &f, pts.iter().map(|p| (p.0, p.1)), "#1f4e9a");
    for (b, v, se) in &pts {
        if *se > 0.0 {
            writeln!(
                s,
                r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/>"#,
                f.px(*b),
                f.py(v - se),
                f.py(v + se)
            )
            .unwrap();
        }
        writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f4e9a"/>"##, f.px(*b), f.py(*v)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart of `p(K | D, b)` at one rung.
pub fn posterior_svg(posterior: &ModelPosterior, rung: usize, title: &str) -> String {
    let p = &posterior.probs[rung];
    let k0 = posterior.k_min as f64;
    let f = Frame {
        x0: k0 - 0.5,
        x1: k0 + p.len() as f64 - 0.5,
        y0: 0.0,
        y1: 1.0,
        log_x: false,
    };
    let mut s = String::new();
    open(&mut s, title, "K", "p(K | D, b)", &f);
    let w = (f.px(1.0) - f.px(0.0)) * 0.8;
    for (i, v) in p.iter().enumerate() {
        let k = k0 + i as f64;
        let (x, y) = (f.px(k) - w / 2.0, f.py(*v));
        writeln!(
            s,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}" fill="#1f4e9a"/>"##,
            f.py(0.0) - y
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, f.px(k), f.py(0.0) + 30.0, k).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rjpt_core::analysis::{free_energy, PeakStat, Stat};
    use rjpt_core::synth::{generate, three_peak_truth};

    fn stat(mean: f64) -> Stat {
        Stat { mean, sd: 0.0 }
    }

    #[test]
    fn fit_plot_has_one_arrow_per_peak() {
        let d = generate(&three_peak_truth(64, 1)).unwrap();
        let summary = PeakSummary {
            k_star: 2,
            b_star: 100.0,
            rung: 0,
            samples: 1,
            peaks: vec![
                PeakStat {
                    amplitude: stat(1.0),
                    precision: stat(100.0),
                    center: stat(0.6),
                },
                PeakStat {
                    amplitude: stat(0.8),
                    precision: stat(80.0),
                    center: stat(1.5),
                },
            ],
            continuum: None,
        };
        let svg = fit_svg(&d, Some(&summary), "fit <K=2>");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 64);
        assert!(svg.contains("fit &lt;K=2&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn free_energy_plot_skips_the_undefined_rung() {
        let c = free_energy(&[0.0, -1.0, -3.0], &[0.0, 1.0, 10.0], 8);
        let svg = free_energy_svg(&c, "F");
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn posterior_plot_has_one_bar_per_k() {
        let p = ModelPosterior {
            k_min: 2,
            probs: vec![vec![0.2, 0.5, 0.3]],
        };
        let svg = posterior_svg(&p, 0, "p");
        assert_eq!(svg.matches("<rect").count(), 2 + 3);
    }
}
