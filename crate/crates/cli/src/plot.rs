//! Learning-curve summaries: moving averages, cross-seed aggregates and a
//! minimal SVG line chart.

use std::fmt::Write;

/// Trailing moving average; the first points average over what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (k, v) in values.iter().enumerate() {
        sum += v;
        if k >= window {
            sum -= values[k - window];
        }
        out.push(sum / (k + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStat {
    /// 1-based, inclusive
    pub first_episode: usize,
    pub last_episode: usize,
    pub mean: f64,
    pub std: f64,
}

/// Across seeds: the per-seed mean reward in each `window`-episode block,
/// summarized as mean and population standard deviation.
pub fn aggregate(per_seed: &[Vec<f64>], window: usize) -> Vec<WindowStat> {
    let len = per_seed.iter().map(Vec::len).min().unwrap_or(0);
    (0..len.div_ceil(window))
        .map(|w| {
            let lo = w * window;
            let hi = (lo + window).min(len);
            let means: Vec<f64> = per_seed
                .iter()
                .map(|r| r[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
                .collect();
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / means.len() as f64;
            WindowStat {
                first_episode: lo + 1,
                last_episode: hi,
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

pub fn aggregate_csv(stats: &[WindowStat], seeds: usize) -> String {
    let mut out = String::from("first_episode,last_episode,mean_reward,std_reward,seeds\n");
    for s in stats {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.first_episode, s.last_episode, s.mean, s.std, seeds
        );
    }
    out
}

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
    /// Optional symmetric band drawn around the line.
    pub band: Option<&'a [f64]>,
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Line chart of one or more series sharing the x axis (episode index).
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let n = series
        .iter()
        .map(|s| s.values.len())
        .max()
        .unwrap_or(0)
        .max(2);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (k, v) in s.values.iter().enumerate() {
            let b = s.band.map_or(0.0, |b| b[k]);
            lo = lo.min(v - b);
            hi = hi.max(v + b);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let x = |k: usize| MARGIN + (W - 2.0 * MARGIN) * k as f64 / (n - 1) as f64;
    let y = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            MARGIN - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{}" text-anchor="start">1</text>"#,
        H - MARGIN + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{n}</text>"#,
        W - MARGIN,
        H - MARGIN + 16.0
    );

    for (idx, s) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        if let Some(band) = s.band {
            let upper = s
                .values
                .iter()
                .zip(band)
                .enumerate()
                .map(|(k, (v, b))| (x(k), y(v + b)));
            let lower = s
                .values
                .iter()
                .zip(band)
                .enumerate()
                .rev()
                .map(|(k, (v, b))| (x(k), y(v - b)));
            let pts: Vec<String> = upper
                .chain(lower)
                .map(|(a, b)| format!("{a:.1},{b:.1}"))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{:.1},{:.1}", x(k), y(*v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            MARGIN + 16.0 + 14.0 * idx as f64,
            escape(s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
