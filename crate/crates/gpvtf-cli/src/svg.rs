//! Self-contained SVG line charts for sweep reports. No interactivity,
//! no dependencies: the figures are static report artifacts.

use std::fmt::Write;
use std::path::Path;

use gpvtf::error::Result;

pub struct Series {
    pub name: String,
    /// (x, y) points, already sorted by x.
    pub points: Vec<(f64, f64)>,
    /// Optional symmetric error bar half-heights, one per point.
    pub err: Option<Vec<f64>>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    path: &Path,
) -> Result<()> {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let e = s.err.as_ref().map_or(0.0, |e| e[i]);
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y - e);
            y_max = y_max.max(y + e);
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    // A little headroom on y.
    let pad = ((y_max - y_min) * 0.08).max(0.01);
    y_min -= pad;
    y_max += pad;

    let plot_w = W - MARGIN_L - MARGIN_R;
    let plot_h = H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="28" font-size="16" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );

    // Axes.
    let _ = writeln!(
        out,
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        l = MARGIN_L,
        b = H - MARGIN_B,
        r = W - MARGIN_R
    );
    let _ = writeln!(
        out,
        r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#,
        l = MARGIN_L,
        t = MARGIN_T,
        b = H - MARGIN_B
    );

    // Ticks: 5 per axis.
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = sx(fx);
        let _ = writeln!(
            out,
            r#"<line x1="{px}" y1="{b}" x2="{px}" y2="{b2}" stroke="black"/><text x="{px}" y="{ty}" font-size="11" text-anchor="middle">{v}</text>"#,
            b = H - MARGIN_B,
            b2 = H - MARGIN_B + 5.0,
            ty = H - MARGIN_B + 20.0,
            v = format_tick(fx)
        );
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let py = sy(fy);
        let _ = writeln!(
            out,
            r#"<line x1="{l1}" y1="{py}" x2="{l}" y2="{py}" stroke="black"/><text x="{tx}" y="{py2}" font-size="11" text-anchor="end">{v}</text>"#,
            l1 = MARGIN_L - 5.0,
            l = MARGIN_L,
            tx = MARGIN_L - 8.0,
            py2 = py + 4.0,
            v = format_tick(fy)
        );
    }

    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );

    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
            if let Some(err) = &s.err {
                let e = err[i];
                if e > 0.0 {
                    let _ = writeln!(
                        out,
                        r#"<line x1="{x0:.2}" y1="{y1:.2}" x2="{x0:.2}" y2="{y2:.2}" stroke="{color}" stroke-width="1"/>"#,
                        x0 = sx(x),
                        y1 = sy(y - e),
                        y2 = sy(y + e),
                    );
                }
            }
        }
        // Legend entry.
        let ly = MARGIN_T + 8.0 + 18.0 * si as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x1}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}" font-size="12">{name}</text>"#,
            x1 = W - MARGIN_R - 150.0,
            x2 = W - MARGIN_R - 125.0,
            tx = W - MARGIN_R - 118.0,
            ty = ly + 4.0,
            name = escape(&s.name)
        );
    }

    let _ = writeln!(out, "</svg>");
    std::fs::write(path, out)?;
    Ok(())
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
