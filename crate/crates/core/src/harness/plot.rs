//! Dependency-free SVG line charts of the training metrics.
//!
//! Output depends only on the input rows, so re-plotting the same CSV gives
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::MetricsRow;
use crate::error::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 64.0;

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
}

/// Names and labels of the three charts written by [`write_plots`].
pub const CHARTS: [(&str, Chart<'static>); 3] = [
    (
        "normalized_reward.svg",
        Chart {
            title: "Mean normalized reward per episode",
            x_label: "Episode",
            y_label: "Normalized reward (fraction of oracle)",
        },
    ),
    (
        "policy_loss.svg",
        Chart {
            title: "Mean policy loss per episode",
            x_label: "Episode",
            y_label: "Policy loss (-Q, scaled EUR)",
        },
    ),
    (
        "critic_loss.svg",
        Chart {
            title: "Mean critic loss per episode",
            x_label: "Episode",
            y_label: "Critic loss (scaled EUR squared)",
        },
    ),
];

/// Writes the reward, policy-loss and critic-loss charts into `dir` and
/// returns their paths.
pub fn write_plots(rows: &[MetricsRow], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let series: [Vec<(f64, f64)>; 3] = [
        rows.iter()
            .map(|r| (r.episode as f64, r.mean_normalized_reward))
            .collect(),
        rows.iter().map(|r| (r.episode as f64, r.mean_policy_loss)).collect(),
        rows.iter().map(|r| (r.episode as f64, r.mean_critic_loss)).collect(),
    ];
    let mut paths = Vec::with_capacity(3);
    for ((name, chart), points) in CHARTS.iter().zip(&series) {
        let path = dir.join(name);
        std::fs::write(&path, render(chart, points))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Renders one line chart. Non-finite points are left out of the line.
pub fn render(chart: &Chart<'_>, points: &[(f64, f64)]) -> String {
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (x_lo, x_hi) = padded_range(finite.iter().map(|p| p.0));
    let (y_lo, y_hi) = padded_range(finite.iter().map(|p| p.1));
    let x_ticks = nice_ticks(x_lo, x_hi);
    let y_ticks = nice_ticks(y_lo, y_hi);
    let (x_lo, x_hi) = (x_lo.min(x_ticks[0]), x_hi.max(*x_ticks.last().unwrap()));
    let (y_lo, y_hi) = (y_lo.min(y_ticks[0]), y_hi.max(*y_ticks.last().unwrap()));

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<desc>{} points</desc>", finite.len());
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(chart.title)
    );

    for &t in &y_ticks {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t, &y_ticks)
        );
    }
    for &t in &x_ticks {
        let x = sx(t);
        let base = TOP + plot_h;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            base + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            base + 19.0,
            tick_label(t, &x_ticks)
        );
    }
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 18.0,
        escape(chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">{1}</text>"#,
        TOP + plot_h / 2.0,
        escape(chart.y_label)
    );

    if !finite.is_empty() {
        let mut pts = String::with_capacity(finite.len() * 16);
        for (i, &(x, y)) in finite.iter().enumerate() {
            if i > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", sx(x), sy(y));
        }
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{pts}"/>"##
        );
    }
    s.push_str("</svg>\n");
    s
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1e-300) {
        return (lo, hi);
    }
    let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
    (lo - pad, hi + pad)
}

/// Roughly five ticks at 1, 2 or 5 times a power of ten covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).floor();
    let last = (hi / step).ceil();
    (0..=((last - first) as usize))
        .map(|i| (first + i as f64) * step)
        .collect()
}

fn tick_label(v: f64, ticks: &[f64]) -> String {
    let step = if ticks.len() > 1 { ticks[1] - ticks[0] } else { 1.0 };
    let big = ticks.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if big >= 1e5 || step < 1e-3 {
        return format!("{v:.2e}");
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.decimals$}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<MetricsRow> {
        (1..=n)
            .map(|e| MetricsRow {
                episode: e,
                mean_normalized_reward: (e as f64 / 10.0).sin() * 0.5 + 0.5,
                mean_policy_loss: if e < 3 { f64::NAN } else { -(e as f64) },
                mean_critic_loss: 1e6 / e as f64,
                wall_seconds: 0.0,
            })
            .collect()
    }

    #[test]
    fn three_charts_with_all_points() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_plots(&rows(1000), dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let reward = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(reward.contains("<desc>1000 points</desc>"));
        let polyline = reward.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(polyline.matches(',').count(), 1000);
        assert!(reward.contains("Episode") && reward.contains("Normalized reward"));
        let policy = std::fs::read_to_string(&paths[1]).unwrap();
        assert!(policy.contains("<desc>998 points</desc>"));
    }

    #[test]
    fn rerun_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let r = rows(57);
        for (pa, pb) in write_plots(&r, a.path())
            .unwrap()
            .iter()
            .zip(write_plots(&r, b.path()).unwrap())
        {
            assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        }
    }

    #[test]
    fn empty_input_draws_axes_only() {
        let dir = tempfile::tempdir().unwrap();
        for p in write_plots(&[], dir.path()).unwrap() {
            let svg = std::fs::read_to_string(p).unwrap();
            assert!(svg.contains("<desc>0 points</desc>"));
            assert!(!svg.contains("<polyline"));
            assert!(svg.ends_with("</svg>\n"));
        }
    }

    #[test]
    fn ticks_cover_range() {
        for (lo, hi) in [(0.0, 1.0), (-3.2, 17.9), (1.0, 1000.0), (0.001, 0.0042), (-5e6, -1e6)] {
            let t = nice_ticks(lo, hi);
            assert!(t[0] <= lo && *t.last().unwrap() >= hi, "{lo} {hi} {t:?}");
            assert!((3..=12).contains(&t.len()), "{t:?}");
        }
        assert_eq!(padded_range([2.0, 2.0].into_iter()), (1.0, 3.0));
    }
}
