//! Learning-curve SVGs: mean ± standard error across trials, smoothed with
//! a trailing window, one series per input CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::metrics::{read_csv, MetricsRow};
use super::HarnessError;

/// Trailing-window mean: element `i` averages the last `min(window, i+1)`
/// values.
pub fn smooth_trailing(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(values.len());
    let mut running = 0.0;
    for i in 0..values.len() {
        running += values[i];
        if i >= window {
            running -= values[i - window];
        }
        let n = (i + 1).min(window);
        out.push(running / n as f64);
    }
    out
}

/// Mean and standard error (sample std over √n). `None` for n < 2, where
/// the sample standard deviation is undefined.
pub fn mean_stderr(samples: &[f64]) -> (f64, Option<f64>) {
    assert!(!samples.is_empty());
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, None);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt() / n.sqrt()))
}

/// Step interpolation: for each query x, the y of the last point at or
/// before x. Queries must not precede the first point.
pub fn sample_series(points: &[(f64, f64)], xs: &[f64]) -> Vec<f64> {
    assert!(!points.is_empty());
    xs.iter()
        .map(|&x| {
            assert!(
                x >= points[0].0,
                "query x {x} precedes first point {}",
                points[0].0
            );
            let idx = points.partition_point(|p| p.0 <= x);
            points[idx - 1].1
        })
        .collect()
}

/// One curve ready for drawing: common x grid, cross-trial mean, and
/// (when ≥2 trials) the standard error at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    pub xs: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

/// Number of grid points curves are resampled onto.
const GRID_POINTS: usize = 200;

/// Collapse one run's rows (1+ trials) into a drawable series for `metric`.
/// Each trial is smoothed over episodes, then resampled (step
/// interpolation) onto a grid covering the env-step range common to all
/// trials.
pub fn reduce_rows(
    rows: &[MetricsRow],
    window: usize,
    metric: impl Fn(&MetricsRow) -> f64,
) -> Result<SeriesData, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Other("CSV contains no data rows".into()));
    }
    let mut trials: BTreeMap<usize, Vec<&MetricsRow>> = BTreeMap::new();
    for row in rows {
        trials.entry(row.trial).or_default().push(row);
    }
    let mut per_trial: Vec<Vec<(f64, f64)>> = Vec::with_capacity(trials.len());
    for (_, mut trial_rows) in trials {
        trial_rows.sort_by_key(|r| r.episode);
        let ys: Vec<f64> = trial_rows.iter().map(|r| metric(r)).collect();
        let smoothed = smooth_trailing(&ys, window);
        per_trial.push(
            trial_rows
                .iter()
                .zip(smoothed)
                .map(|(r, y)| (r.env_step as f64, y))
                .collect(),
        );
    }
    let start = per_trial
        .iter()
        .map(|t| t[0].0)
        .fold(f64::NEG_INFINITY, f64::max);
    let end = per_trial
        .iter()
        .map(|t| t[t.len() - 1].0)
        .fold(f64::INFINITY, f64::min);
    if start > end {
        return Err(HarnessError::Other(
            "trials share no common env-step range".into(),
        ));
    }
    let xs: Vec<f64> = if start == end {
        vec![start]
    } else {
        (0..GRID_POINTS)
            .map(|i| start + (end - start) * i as f64 / (GRID_POINTS - 1) as f64)
            .collect()
    };
    let sampled: Vec<Vec<f64>> = per_trial.iter().map(|t| sample_series(t, &xs)).collect();
    let mut mean = Vec::with_capacity(xs.len());
    let mut stderr = Vec::with_capacity(xs.len());
    let mut any_stderr = false;
    for i in 0..xs.len() {
        let column: Vec<f64> = sampled.iter().map(|t| t[i]).collect();
        let (m, se) = mean_stderr(&column);
        mean.push(m);
        if let Some(se) = se {
            stderr.push(se);
            any_stderr = true;
        }
    }
    Ok(SeriesData {
        xs,
        mean,
        stderr: any_stderr.then_some(stderr),
    })
}

const PALETTE: [&str; 6] = [
    "#1b6ca8", "#c0392b", "#27874a", "#8e4fa8", "#b9770e", "#4a4a4a",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        return format!("{v:.0}");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Render one chart. Pure string assembly — deterministic for identical
/// inputs.
fn render_svg(title: &str, y_label: &str, series: &[(String, SeriesData)]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const LEFT: f64 = 78.0;
    const RIGHT: f64 = 24.0;
    const TOP: f64 = 48.0;
    const BOTTOM: f64 = 58.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, data) in series {
        x_min = x_min.min(data.xs[0]);
        x_max = x_max.max(*data.xs.last().unwrap());
        for i in 0..data.xs.len() {
            let half = data.stderr.as_ref().map_or(0.0, |s| s[i]);
            y_min = y_min.min(data.mean[i] - half);
            y_max = y_max.max(data.mean[i] + half);
        }
    }
    if x_min == x_max {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if y_min == y_max {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let y_pad = (y_max - y_min) * 0.05;
    y_min -= y_pad;
    y_max += y_pad;

    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"Menlo, Consolas, monospace\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        LEFT + plot_w / 2.0,
        xml_escape(title)
    ));

    // Grid and ticks: 5 divisions on each axis.
    for i in 0..=5 {
        let fx = x_min + (x_max - x_min) * i as f64 / 5.0;
        let gx = px(fx);
        svg.push_str(&format!(
            "<line x1=\"{gx:.2}\" y1=\"{TOP}\" x2=\"{gx:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            TOP + plot_h
        ));
        svg.push_str(&format!(
            "<text x=\"{gx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            TOP + plot_h + 20.0,
            fmt_tick(fx)
        ));
        let fy = y_min + (y_max - y_min) * i as f64 / 5.0;
        let gy = py(fy);
        svg.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" stroke=\"#dddddd\"/>\n",
            LEFT + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 8.0,
            gy + 4.0,
            fmt_tick(fy)
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333333\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">env steps</text>\n",
        LEFT + plot_w / 2.0,
        H - 14.0
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {:.1})\">{}</text>\n",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        xml_escape(y_label)
    ));

    for (si, (label, data)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if let Some(stderr) = &data.stderr {
            let mut d = String::from("M");
            for i in 0..data.xs.len() {
                d.push_str(&format!(
                    " {:.2},{:.2}",
                    px(data.xs[i]),
                    py(data.mean[i] + stderr[i])
                ));
            }
            for i in (0..data.xs.len()).rev() {
                d.push_str(&format!(
                    " L {:.2},{:.2}",
                    px(data.xs[i]),
                    py(data.mean[i] - stderr[i])
                ));
            }
            d.push_str(" Z");
            svg.push_str(&format!(
                "<path d=\"{d}\" fill=\"{color}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n"
            ));
        }
        let pts: Vec<String> = data
            .xs
            .iter()
            .zip(&data.mean)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            pts.join(" ")
        ));
        let ly = TOP + 16.0 + 18.0 * si as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"3\"/>\n",
            LEFT + plot_w - 150.0,
            LEFT + plot_w - 120.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            LEFT + plot_w - 112.0,
            ly + 4.0,
            xml_escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render learning curves for one or more runs. Each CSV becomes one series
/// (labelled by file stem) on two charts: mean step reward and episode
/// length, both against env steps. Returns the written SVG paths.
pub fn plot(csv_paths: &[PathBuf], out_dir: &Path, window: usize) -> Result<Vec<PathBuf>, HarnessError> {
    if csv_paths.is_empty() {
        return Err(HarnessError::Other("plot needs at least one CSV".into()));
    }
    if window == 0 {
        return Err(HarnessError::Other("window must be at least 1".into()));
    }
    let mut runs = Vec::new();
    for path in csv_paths {
        let rows = read_csv(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        runs.push((label, rows));
    }
    std::fs::create_dir_all(out_dir)?;
    let charts: [(&str, &str, &str, fn(&MetricsRow) -> f64); 2] = [
        (
            "reward.svg",
            "Mean step reward (trailing mean \u{00b1} stderr)",
            "mean step reward",
            |r| r.mean_step_reward,
        ),
        (
            "episode_length.svg",
            "Episode length (trailing mean \u{00b1} stderr)",
            "episode length",
            |r| r.episode_length as f64,
        ),
    ];
    let mut written = Vec::new();
    for (file, title, y_label, metric) in charts {
        let mut series = Vec::new();
        for (label, rows) in &runs {
            series.push((label.clone(), reduce_rows(rows, window, metric)?));
        }
        let svg = render_svg(title, y_label, &series);
        let path = out_dir.join(file);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
