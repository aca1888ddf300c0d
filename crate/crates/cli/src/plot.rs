//! Log-log convergence plot as a standalone SVG: error against `h` with the
//! `h` axis reversed, one series per degree, and a slope triangle of slope
//! `k` beside the finest segment of each series.

use std::fmt::Write;

use crate::records::Row;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axes {
    x: [f64; 2],
    y: [f64; 2],
}

impl Axes {
    /// Larger `h` on the left.
    fn px(&self, h: f64) -> f64 {
        let t = (self.x[1] - h.log10()) / (self.x[1] - self.x[0]);
        LEFT + t * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, e: f64) -> f64 {
        let t = (e.log10() - self.y[0]) / (self.y[1] - self.y[0]);
        HEIGHT - BOTTOM - t * (HEIGHT - TOP - BOTTOM)
    }
}

/// Decade range covering `values`, padded to at least one decade.
fn decades(values: impl Iterator<Item = f64>) -> [f64; 2] {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return [0.0, 1.0];
    }
    let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
    [lo, if hi > lo { hi } else { lo + 1.0 }]
}

fn plottable(r: &Row) -> bool {
    r.h > 0.0 && r.error > 0.0 && r.h.is_finite() && r.error.is_finite()
}

pub fn convergence_svg(rows: &[Row]) -> String {
    let pts: Vec<&Row> = rows.iter().filter(|r| plottable(r)).collect();
    let axes = Axes { x: decades(pts.iter().map(|r| r.h)), y: decades(pts.iter().map(|r| r.error)) };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);

    for d in axes.x[0] as i32..=axes.x[1] as i32 {
        for m in 1..10 {
            let h = f64::from(m) * 10f64.powi(d);
            if h.log10() > axes.x[1] + 1e-12 {
                break;
            }
            let x = axes.px(h);
            let len = if m == 1 { 6.0 } else { 3.0 };
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y1 - len);
            if m == 1 {
                let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, y1 + 18.0);
            }
        }
    }
    for d in axes.y[0] as i32..=axes.y[1] as i32 {
        for m in 1..10 {
            let e = f64::from(m) * 10f64.powi(d);
            if e.log10() > axes.y[1] + 1e-12 {
                break;
            }
            let y = axes.py(e);
            let len = if m == 1 { 6.0 } else { 3.0 };
            let _ = writeln!(s, r#"<line x1="{x0}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#, x0 + len);
            if m == 1 {
                let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, x0 - 8.0, y + 4.0);
            }
        }
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">h</text>"#, 0.5 * (x0 + x1), HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">error</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1)
    );

    let mut orders: Vec<usize> = pts.iter().map(|r| r.order).collect();
    orders.sort_unstable();
    orders.dedup();
    for (i, &k) in orders.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut series: Vec<&Row> = pts.iter().copied().filter(|r| r.order == k).collect();
        series.sort_by(|a, b| b.h.total_cmp(&a.h));
        let path: Vec<String> = series.iter().map(|r| format!("{:.2},{:.2}", axes.px(r.h), axes.py(r.error))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        for r in &series {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, axes.px(r.h), axes.py(r.error));
        }
        if let [.., a, b] = series[..] {
            slope_triangle(&mut s, &axes, a, b, k, color);
        }
        let ly = y0 + 20.0 + 20.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"/>"#, x1 + 15.0, x1 + 40.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">k = {k}</text>"#, x1 + 46.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Right triangle of slope `k` under the segment from `a` (coarser) to `b`.
fn slope_triangle(s: &mut String, axes: &Axes, a: &Row, b: &Row, k: usize, color: &str) {
    let (ha, hb) = (a.h, b.h);
    let shift = 0.5;
    let ea = a.error.min(b.error * (ha / hb).powi(k as i32)) * shift;
    let eb = ea * (hb / ha).powi(k as i32);
    let (xa, ya, xb, yb) = (axes.px(ha), axes.py(ea), axes.px(hb), axes.py(eb));
    let _ = writeln!(
        s,
        r#"<polygon points="{xa:.2},{ya:.2} {xb:.2},{yb:.2} {xa:.2},{yb:.2}" fill="none" stroke="{color}" stroke-dasharray="4 2"/>"#
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="{color}">{k}</text>"#, xa - 4.0, 0.5 * (ya + yb) + 4.0);
}
