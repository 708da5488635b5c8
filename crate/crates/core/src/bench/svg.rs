//! Convergence plot: relative gap on a log axis against elapsed seconds.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// One curve. Points with a nonpositive or undefined gap are skipped.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub failed: bool,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn plottable(s: &Series) -> impl Iterator<Item = (f64, f64)> + '_ {
    s.points
        .iter()
        .copied()
        .filter(|&(x, y)| x.is_finite() && y.is_finite() && y > 0.0)
}

/// Renders a standalone SVG document.
pub fn render(title: &str, series: &[Series]) -> String {
    let mut x_max: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (x, y) in plottable(s) {
            x_max = x_max.max(x);
            let e = y.log10();
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (-6.0, 0.0);
    }
    let mut d_lo = lo.floor() as i32;
    let mut d_hi = hi.ceil() as i32;
    if d_hi <= d_lo {
        d_lo -= 1;
        d_hi += 1;
    }
    if x_max <= 0.0 {
        x_max = 1.0;
    }
    let x_step = nice_step(x_max);
    x_max = (x_max / x_step).ceil() * x_step;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x / x_max * pw;
    let py = |e: f64| TOP + (d_hi as f64 - e) / (d_hi - d_lo) as f64 * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    // y axis: one tick per decade
    let _ = writeln!(
        svg,
        r##"<g class="y-axis" data-scale="log10" stroke="#ccc">"##
    );
    for d in d_lo..=d_hi {
        let y = py(d as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/><text x="{:.1}" y="{:.2}" text-anchor="end" stroke="none" fill="black">1e{d}</text>"#,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r##"<g class="x-axis" stroke="#ccc">"##);
    let ticks = (x_max / x_step).round() as usize;
    for i in 0..=ticks {
        let v = i as f64 * x_step;
        let x = px(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" stroke="none" fill="black">{}</text>"#,
            TOP + ph,
            TOP + ph + 16.0,
            format_tick(v, x_step)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>
<text x="{:.1}" y="{:.1}" text-anchor="middle">elapsed time, s</text>
<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">relative gap</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.failed {
            r#" stroke-dasharray="6 3""#
        } else {
            ""
        };
        let pts: Vec<String> = plottable(s)
            .map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y.log10())))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-label="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            escape(&s.label),
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let label = if s.failed {
            format!("{} (failed)", s.label)
        } else {
            s.label.clone()
        };
        let _ = writeln!(
            svg,
            r#"<line class="legend" x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 25.0,
            lx + 32.0,
            ly + 4.0,
            escape(&label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64, step: f64) -> String {
    if step >= 1.0 {
        format!("{v:.0}")
    } else {
        let digits = (-step.log10().floor()) as usize;
        format!("{v:.digits$}")
    }
}
