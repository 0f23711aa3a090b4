//! Minimal SVG 1.1 line charts: first column on x, one polyline per other
//! numeric column.

use std::fmt::Write as _;

use crate::table::ResultTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 64.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

/// Renders the numeric columns of `table`; `None` when there is nothing to plot.
pub fn render_chart(table: &ResultTable, title: &str) -> Option<String> {
    let x: Vec<f64> = table.rows.iter().filter_map(|r| r.first()?.as_f64()).collect();
    if x.len() != table.rows.len() || x.len() < 2 {
        return None;
    }
    let series: Vec<(usize, Vec<f64>)> = (1..table.headers.len())
        .filter_map(|c| {
            let ys: Option<Vec<f64>> = table.rows.iter().map(|r| r[c].as_f64()).collect();
            ys.map(|ys| (c, ys))
        })
        .collect();
    if series.is_empty() {
        return None;
    }
    let (x0, x1) = bounds(x.iter().copied())?;
    let (y0, y1) = bounds(series.iter().flat_map(|(_, ys)| ys.iter().copied()))?;
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    if y0 < 0.0 && y1 > 0.0 {
        let z = py(0.0);
        let _ = writeln!(out, r#"<line x1="{l}" y1="{z:.2}" x2="{r}" y2="{z:.2}" stroke="gray" stroke-dasharray="4 4"/>"#);
    }
    for (v, anchor, xpos) in [(x0, "start", l), (x1, "end", r)] {
        let _ = writeln!(
            out,
            r#"<text x="{xpos}" y="{}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{v:.4e}</text>"#,
            b + 16.0
        );
    }
    for (v, ypos) in [(y0, b), (y1, t)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ypos}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.3e}</text>"#,
            l - 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(&table.headers[0])
    );
    for (n, (col, ys)) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let points: Vec<String> = x.iter().zip(ys).map(|(&a, &v)| format!("{:.2},{:.2}", px(a), py(v))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            r - 150.0,
            t + 14.0 * (n as f64 + 1.0),
            escape(&table.headers[*col])
        );
    }
    out.push_str("</svg>\n");
    Some(out)
}
