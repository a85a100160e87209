//! Minimal SVG rendering of convergence curves and density heatmaps.

use std::fmt::Write;

use crate::config::Metric;
use crate::record::{raw, ExperimentRecord, Heatmap};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: [f64; 4] = [70.0, 170.0, 40.0, 60.0]; // left, right, top, bottom
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Curve {
    label: String,
    points: Vec<(f64, f64)>,
    band: Vec<(f64, f64, f64)>,
    dashed: bool,
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn fit(curves: &[Curve]) -> Option<Self> {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for c in curves {
            for &(px, py) in &c.points {
                x = (x.0.min(px), x.1.max(px));
                y = (y.0.min(py), y.1.max(py));
            }
        }
        if !x.0.is_finite() || !y.0.is_finite() {
            return None;
        }
        let pad = |(lo, hi): (f64, f64)| {
            let (l, h) = (lo.log10(), hi.log10());
            if h - l < 1e-9 { (l - 0.5, h + 0.5) } else { (l, h) }
        };
        Some(Self { x: pad(x), y: pad(y) })
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN[0] + (x.log10() - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN[0] - MARGIN[1])
    }

    fn py(&self, y: f64) -> f64 {
        let t = (y.log10() - self.y.0) / (self.y.1 - self.y.0);
        HEIGHT - MARGIN[3] - t.clamp(-0.05, 1.05) * (HEIGHT - MARGIN[2] - MARGIN[3])
    }
}

fn usable(x: f64, y: f64) -> bool {
    x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()
}

fn curves_for(record: &ExperimentRecord, metric: Metric) -> Vec<Curve> {
    let mut out = Vec::new();
    for s in record.series.iter().filter(|s| s.metric == metric) {
        let mean = raw(&s.mean);
        let err = raw(&s.stderr);
        let mut points = Vec::new();
        let mut band = Vec::new();
        for ((&c, &m), &e) in s.checkpoints.iter().zip(&mean).zip(&err) {
            let x = c as f64;
            if usable(x, m) {
                points.push((x, m));
                if e.is_finite() && e > 0.0 && m - e > 0.0 {
                    band.push((x, m - e, m + e));
                }
            }
        }
        out.push(Curve { label: s.estimator.clone(), points, band, dashed: false });
    }
    for b in record.bounds.iter().filter(|b| b.metric == metric) {
        let points = b
            .checkpoints
            .iter()
            .zip(raw(&b.values))
            .map(|(&c, v)| (c as f64, v))
            .filter(|&(x, y)| usable(x, y))
            .collect();
        out.push(Curve { label: format!("{} ({})", b.bound, b.estimator), points, band: Vec::new(), dashed: true });
    }
    out
}

/// Log-log plot of every series and bound recorded for `metric`.
pub fn metric_plot(record: &ExperimentRecord, metric: Metric) -> String {
    let curves = curves_for(record, metric);
    let mut svg = header(WIDTH, HEIGHT);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{} : {}</text>"#,
        WIDTH / 2.0,
        escape(&record.config.name),
        metric.label()
    );
    let Some(axes) = Axes::fit(&curves) else {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no positive values to plot</text>"#, WIDTH / 2.0, HEIGHT / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    };
    draw_axes(&mut svg, &axes);
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if c.band.len() > 1 {
            let upper = c.band.iter().map(|&(x, _, hi)| format!("{:.2},{:.2}", axes.px(x), axes.py(hi)));
            let lower = c.band.iter().rev().map(|&(x, lo, _)| format!("{:.2},{:.2}", axes.px(x), axes.py(lo)));
            let pts: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, pts.join(" "));
        }
        let pts: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y))).collect();
        let dash = if c.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        if pts.len() == 1 {
            let (x, y) = c.points[0];
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, axes.px(x), axes.py(y));
        } else {
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                pts.join(" ")
            );
        }
        let ly = MARGIN[2] + 20.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN[1] + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}" font-size="11">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn draw_axes(svg: &mut String, axes: &Axes) {
    let (x0, x1) = (MARGIN[0], WIDTH - MARGIN[1]);
    let (y0, y1) = (HEIGHT - MARGIN[3], MARGIN[2]);
    let _ = writeln!(svg, r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#333"/>"##, x1 - x0, y0 - y1);
    for e in axes.x.0.ceil() as i32..=axes.x.1.floor() as i32 {
        let x = axes.px(10f64.powi(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{y1}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle" font-size="11">1e{e}</text>"##,
            y0 + 16.0
        );
    }
    for e in axes.y.0.ceil() as i32..=axes.y.1.floor() as i32 {
        let y = axes.py(10f64.powi(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end" font-size="11">1e{e}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">samples N</text>"#, (x0 + x1) / 2.0, HEIGHT - 18.0);
}

/// Heatmap of a density on its grid, row 0 at the bottom.
pub fn heatmap(h: &Heatmap) -> String {
    let side = 400.0;
    let cell = side / h.resolution as f64;
    let mut svg = header(side + 20.0, side + 50.0);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (side + 20.0) / 2.0, escape(&h.label));
    let max = h.values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    for (idx, &v) in h.values.iter().enumerate() {
        let (i, j) = (idx / h.resolution, idx % h.resolution);
        let t = if max > 0.0 && v.is_finite() { (v / max).clamp(0.0, 1.0) } else { 0.0 };
        let _ = write!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
            10.0 + i as f64 * cell,
            30.0 + side - (j + 1) as f64 * cell,
            cell + 0.05,
            cell + 0.05,
            shade(t)
        );
    }
    svg.push_str("\n</svg>\n");
    svg
}

fn shade(t: f64) -> String {
    // White through blue to dark red.
    let (r, g, b) = if t < 0.5 {
        let s = t * 2.0;
        (255.0 * (1.0 - s) + 40.0 * s, 255.0 * (1.0 - s) + 90.0 * s, 255.0 * (1.0 - s) + 200.0 * s)
    } else {
        let s = (t - 0.5) * 2.0;
        (40.0 + 140.0 * s, 90.0 * (1.0 - s), 200.0 * (1.0 - s) + 30.0 * s)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shade_endpoints() {
        assert_eq!(shade(0.0), "#ffffff");
        assert_eq!(shade(1.0).len(), 7);
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let h = Heatmap { label: "a<b".into(), resolution: 3, lo: [0.0, 0.0], hi: [1.0, 1.0], values: vec![1.0; 9] };
        let s = heatmap(&h);
        assert_eq!(s.matches("<rect").count(), 10);
        assert!(s.contains("a&lt;b"));
    }
}
