//! Minimal hand-rolled SVG line charts: axes, tick labels, one polyline per
//! series, and a legend. No plotting dependency; output is deterministic
//! byte-for-byte for a given input.

use super::fmt6;
use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn bounds(series: &[(String, Vec<(f64, f64)>)]) -> (f64, f64, f64, f64) {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, pts) in series {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x_min == x_max {
        x_max = x_min + 1.0;
    }
    if y_min == y_max {
        y_max = y_min + 1.0;
    }
    (x_min, x_max, y_min, y_max)
}

/// Renders a line chart with one polyline per series. Each series is a label
/// and a list of (x, y) points in data coordinates.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let (x_min, x_max, y_min, y_max) = bounds(series);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(out, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "  <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        fmt6(MARGIN_LEFT + plot_w / 2.0),
        title
    );

    // Axes.
    let x0 = fmt6(MARGIN_LEFT);
    let x1 = fmt6(MARGIN_LEFT + plot_w);
    let y0 = fmt6(MARGIN_TOP);
    let y1 = fmt6(MARGIN_TOP + plot_h);
    let _ = writeln!(out, "  <line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/>");
    let _ = writeln!(out, "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>");

    // Ticks: 5 per axis, labels in the shared 6-decimal format.
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = fmt6(sx(fx));
        let _ = writeln!(
            out,
            "  <line x1=\"{px}\" y1=\"{y1}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>",
            fmt6(MARGIN_TOP + plot_h + 5.0)
        );
        let _ = writeln!(
            out,
            "  <text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            fmt6(MARGIN_TOP + plot_h + 18.0),
            fmt6(fx)
        );
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let py = fmt6(sy(fy));
        let _ = writeln!(
            out,
            "  <line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>",
            fmt6(MARGIN_LEFT - 5.0)
        );
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{py}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>",
            fmt6(MARGIN_LEFT - 8.0),
            fmt6(fy)
        );
    }

    // Axis labels.
    let _ = writeln!(
        out,
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        fmt6(MARGIN_LEFT + plot_w / 2.0),
        fmt6(HEIGHT - 12.0),
        x_label
    );
    let _ = writeln!(
        out,
        "  <text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        fmt6(MARGIN_TOP + plot_h / 2.0),
        fmt6(MARGIN_TOP + plot_h / 2.0),
        y_label
    );

    // Series polylines and legend.
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{},{}", fmt6(sx(x)), fmt6(sy(y)))).collect();
        let _ = writeln!(
            out,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            coords.join(" ")
        );
        let ly = MARGIN_TOP + 14.0 * i as f64;
        let _ = writeln!(
            out,
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            fmt6(MARGIN_LEFT + plot_w + 12.0),
            fmt6(ly),
            fmt6(MARGIN_LEFT + plot_w + 32.0),
            fmt6(ly)
        );
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" dominant-baseline=\"middle\">{}</text>",
            fmt6(MARGIN_LEFT + plot_w + 38.0),
            fmt6(ly),
            label
        );
    }

    out.push_str("</svg>\n");
    out
}
