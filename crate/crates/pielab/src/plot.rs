//! Headless SVG charts for report figures.
//!
//! Hand-rolled line and grouped-bar charts rendered as deterministic SVG
//! text: no display server, no font metrics, byte-stable output. Every
//! number plotted here is also written to a CSV by the report builder.

use std::io::Write as _;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 62.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 52.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// One polyline with markers.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            dashed: true,
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        // Degenerate axis (single point): pad symmetrically.
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.06;
    (lo - pad, hi + pad)
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n<text x=\"{x}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{title}</text>\n",
        x = (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
    )
}

fn axes_and_ticks(
    out: &mut String,
    x_label: &str,
    y_label: &str,
    (x_lo, x_hi): (f64, f64),
    (y_lo, y_hi): (f64, f64),
) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    out.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#333333\"/>\n"
    ));
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x_lo + t * (x_hi - x_lo);
        let yv = y_lo + t * (y_hi - y_lo);
        let x = MARGIN_LEFT + t * plot_w;
        let y = HEIGHT - MARGIN_BOTTOM - t * plot_h;
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y1}\" x2=\"{x}\" y2=\"{y2}\" stroke=\"#333333\"/>\n<text x=\"{x}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{label}</text>\n",
            x = fmt(x),
            y1 = fmt(HEIGHT - MARGIN_BOTTOM),
            y2 = fmt(HEIGHT - MARGIN_BOTTOM + 5.0),
            ty = fmt(HEIGHT - MARGIN_BOTTOM + 18.0),
            label = fmt(xv),
        ));
        out.push_str(&format!(
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#333333\"/>\n<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            x1 = fmt(MARGIN_LEFT - 5.0),
            x2 = fmt(MARGIN_LEFT),
            y = fmt(y),
            tx = fmt(MARGIN_LEFT - 8.0),
            ty = fmt(y + 4.0),
            label = fmt(yv),
        ));
    }
    out.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>\n",
        x = fmt(MARGIN_LEFT + plot_w / 2.0),
        y = fmt(HEIGHT - 12.0),
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {y})\">{y_label}</text>\n",
        y = fmt(MARGIN_TOP + plot_h / 2.0),
    ));
}

fn legend(out: &mut String, labels: &[(String, &str, bool)]) {
    for (i, (label, color, dashed)) in labels.iter().enumerate() {
        let y = MARGIN_TOP + 12.0 + i as f64 * 16.0;
        let x = WIDTH - MARGIN_RIGHT + 12.0;
        let dash = if *dashed {
            " stroke-dasharray=\"5,3\""
        } else {
            ""
        };
        out.push_str(&format!(
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\n<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
            x1 = fmt(x),
            x2 = fmt(x + 22.0),
            y = fmt(y),
            tx = fmt(x + 28.0),
            ty = fmt(y + 4.0),
        ));
    }
}

/// Render a multi-series line chart. Series with a single point still render
/// (as a marker). `hline` draws a horizontal reference line, e.g. parity at
/// 1.0.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    hline: Option<f64>,
) -> std::io::Result<()> {
    let (x_lo, x_hi) = range_of(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let mut y_values: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .collect();
    if let Some(h) = hline {
        y_values.push(h);
    }
    let (y_lo, y_hi) = range_of(y_values.into_iter());

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |v: f64| MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |v: f64| HEIGHT - MARGIN_BOTTOM - (v - y_lo) / (y_hi - y_lo) * plot_h;

    let mut out = svg_header(title);
    axes_and_ticks(&mut out, x_label, y_label, (x_lo, x_hi), (y_lo, y_hi));
    if let Some(h) = hline {
        out.push_str(&format!(
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#000000\" stroke-width=\"1\"/>\n",
            x1 = fmt(MARGIN_LEFT),
            x2 = fmt(WIDTH - MARGIN_RIGHT),
            y = fmt(sy(h)),
        ));
    }
    let mut legend_rows = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        legend_rows.push((s.label.clone(), color, s.dashed));
        if s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y))))
                .collect();
            let dash = if s.dashed {
                " stroke-dasharray=\"5,3\""
            } else {
                ""
            };
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\n",
                pts.join(" ")
            ));
        }
        for &(x, y) in &s.points {
            out.push_str(&format!(
                "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{color}\"/>\n",
                cx = fmt(sx(x)),
                cy = fmt(sy(y)),
            ));
        }
    }
    legend(&mut out, &legend_rows);
    out.push_str("</svg>\n");

    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

/// Render a grouped bar chart: one cluster per category, one bar per group.
pub fn bar_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    categories: &[String],
    groups: &[(String, Vec<f64>)],
) -> std::io::Result<()> {
    let max_v = groups
        .iter()
        .flat_map(|(_, vs)| vs.iter().cloned())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let (y_lo, y_hi) = (0.0, max_v * 1.08);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let n_cat = categories.len().max(1) as f64;
    let n_grp = groups.len().max(1) as f64;
    let cluster_w = plot_w / n_cat;
    let bar_w = cluster_w * 0.8 / n_grp;
    let sy = |v: f64| HEIGHT - MARGIN_BOTTOM - (v - y_lo) / (y_hi - y_lo) * plot_h;

    let mut out = svg_header(title);
    axes_and_ticks(&mut out, x_label, y_label, (0.0, n_cat), (y_lo, y_hi));
    let mut legend_rows = Vec::new();
    for (gi, (label, values)) in groups.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        legend_rows.push((label.clone(), color, false));
        for (ci, &v) in values.iter().enumerate() {
            let x = MARGIN_LEFT + ci as f64 * cluster_w + cluster_w * 0.1 + gi as f64 * bar_w;
            let y = sy(v);
            let h = (HEIGHT - MARGIN_BOTTOM) - y;
            out.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" fill=\"{color}\"/>\n",
                x = fmt(x),
                y = fmt(y),
                w = fmt(bar_w),
                h = fmt(h.max(0.0)),
            ));
        }
    }
    for (ci, cat) in categories.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{cat}</text>\n",
            x = fmt(MARGIN_LEFT + (ci as f64 + 0.5) * cluster_w),
            y = fmt(HEIGHT - MARGIN_BOTTOM + 32.0),
        ));
    }
    legend(&mut out, &legend_rows);
    out.push_str("</svg>\n");

    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_deterministic_and_handles_single_points() {
        let dir = tempfile::tempdir().unwrap();
        let series = vec![
            Series::new("a", vec![(0.2, 0.5), (0.9, 0.8)]),
            Series::dashed("single", vec![(0.5, 0.4)]),
        ];
        let p1 = dir.path().join("a.svg");
        let p2 = dir.path().join("b.svg");
        line_chart(&p1, "t", "x", "y", &series, Some(1.0)).unwrap();
        line_chart(&p2, "t", "x", "y", &series, Some(1.0)).unwrap();
        let a = std::fs::read(&p1).unwrap();
        assert_eq!(a, std::fs::read(&p2).unwrap());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("<polyline"));
        assert!(text.contains("<circle"));
    }

    #[test]
    fn bar_chart_renders_groups() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bars.svg");
        bar_chart(
            &path,
            "dist",
            "class",
            "fraction",
            &["c0".into(), "c1".into()],
            &[
                ("all".into(), vec![0.6, 0.4]),
                ("pies".into(), vec![0.2, 0.8]),
            ],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("<rect").count(), 2 + 4); // background + frame + 4 bars
    }
}
