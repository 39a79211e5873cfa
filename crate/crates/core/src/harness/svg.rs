//! Minimal self-contained SVG charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 40.0;
const PAD_B: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, xr: (f64, f64), yr: (f64, f64)) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>
<line x1="{PAD_L}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{PAD_L}" y1="{PAD_T}" x2="{PAD_L}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
        W / 2.0,
        escape(title),
        H - PAD_B,
        W - PAD_R,
        H - PAD_B,
        H - PAD_B,
        (PAD_L + W - PAD_R) / 2.0,
        H - 12.0,
        escape(x_label),
        (PAD_T + H - PAD_B) / 2.0,
        (PAD_T + H - PAD_B) / 2.0,
        escape(y_label),
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = PAD_L + f * (W - PAD_L - PAD_R);
        let y = H - PAD_B - f * (H - PAD_T - PAD_B);
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            H - PAD_B + 16.0,
            tick(xr.0 + f * (xr.1 - xr.0)),
            PAD_L - 6.0,
            y + 4.0,
            tick(yr.0 + f * (yr.1 - yr.0)),
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Line chart with markers, one polyline per series.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let xr = span(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let yr = span(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let sx = |x: f64| PAD_L + (x - xr.0) / (xr.1 - xr.0) * (W - PAD_L - PAD_R);
    let sy = |y: f64| H - PAD_B - (y - yr.0) / (yr.1 - yr.0) * (H - PAD_T - PAD_B);
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, xr, yr);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut sorted: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = sorted.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in &sorted {
            let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            PAD_L + 10.0,
            PAD_T + 14.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart of `counts[i]` for labels `i + offset`.
pub fn histogram(title: &str, x_label: &str, y_label: &str, counts: &[usize], offset: usize) -> String {
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let n = counts.len().max(1) as f64;
    let xr = (offset as f64, (offset + counts.len()) as f64);
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, xr, (0.0, max));
    let bw = (W - PAD_L - PAD_R) / n;
    for (i, &c) in counts.iter().enumerate() {
        let h = c as f64 / max * (H - PAD_T - PAD_B);
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4"><title>{}: {c}</title></rect>"##,
            PAD_L + i as f64 * bw,
            H - PAD_B - h,
            (bw - 1.0).max(0.5),
            h,
            i + offset
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grayscale heatmap of a square matrix, min-max scaled (dark = small).
pub fn heatmap(title: &str, cells: &[f32], side: usize) -> String {
    let (lo, hi) = span(cells.iter().map(|&v| v as f64));
    let size = 512.0;
    let c = size / side.max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="14">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        size + 20.0,
        size + 40.0,
        (size + 20.0) / 2.0,
        escape(title)
    );
    for i in 0..side {
        for j in 0..side {
            let v = ((cells[i * side + j] as f64 - lo) / (hi - lo)).clamp(0.0, 1.0);
            let g = (v * 255.0).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({g},{g},{g})"/>"#,
                10.0 + j as f64 * c,
                30.0 + i as f64 * c,
                c + 0.05,
                c + 0.05
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
