//! Static SVG plots written as plain markup: heatmaps from rects, traces
//! from polylines.

use std::f64::consts::PI;
use std::fmt::Write;

use semistiff::field::EnergyReport;
use semistiff::ComplexField;

const MAX_COLUMNS: usize = 360;
const MAX_ROWS: usize = 120;
const CELL: f64 = 2.0;
const MARGIN: f64 = 40.0;

/// Blocks of the node grid: (row range, column range) per plotted cell,
/// with the outer circle first.
fn blocks(n_r: usize, n_t: usize) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let split = |n: usize, max: usize| -> Vec<(usize, usize)> {
        let k = n.div_ceil(max);
        (0..n).step_by(k).map(|a| (a, (a + k).min(n))).collect()
    };
    let mut rows = split(n_r, MAX_ROWS);
    rows.reverse();
    (rows, split(n_t, MAX_COLUMNS))
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = width,
        h = height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn heatmap(u: &ComplexField, title: &str, color: impl Fn(&[num_complex::Complex64]) -> (u8, u8, u8)) -> String {
    let m = &u.mesh;
    let (rows, cols) = blocks(m.n_r(), m.n_t());
    let width = 2.0 * MARGIN + CELL * cols.len() as f64;
    let height = 2.0 * MARGIN + CELL * rows.len() as f64;
    let mut out = String::new();
    header(&mut out, width, height, title);
    let mut block = Vec::new();
    for (y, &(i0, i1)) in rows.iter().enumerate() {
        for (x, &(j0, j1)) in cols.iter().enumerate() {
            block.clear();
            for i in i0..i1 {
                block.extend_from_slice(&u.row(i)[j0..j1]);
            }
            let (r, g, b) = color(&block);
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                MARGIN + CELL * x as f64,
                MARGIN + CELL * y as f64,
            );
        }
    }
    let bottom = height - MARGIN + 16.0;
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{bottom}" font-family="sans-serif" font-size="11">θ from 0 to 2π (left to right), r from {:.4} (bottom) to {:.4} (top)</text>"#,
        m.annulus().r_inner(),
        m.annulus().r_outer()
    );
    out.push_str("</svg>\n");
    out
}

/// Piecewise-linear dark-to-bright ramp on [0, 1].
fn ramp(x: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, [f64; 3]); 4] = [
        (0.0, [0.05, 0.03, 0.25]),
        (0.4, [0.55, 0.15, 0.45]),
        (0.75, [0.95, 0.5, 0.2]),
        (1.0, [1.0, 0.97, 0.75]),
    ];
    let x = x.clamp(0.0, 1.0);
    let k = STOPS.windows(2).position(|w| x <= w[1].0).unwrap_or(2);
    let ((a, ca), (b, cb)) = (STOPS[k], STOPS[k + 1]);
    let t = (x - a) / (b - a);
    let c = |n: usize| ((ca[n] + t * (cb[n] - ca[n])) * 255.0).round() as u8;
    (c(0), c(1), c(2))
}

fn hue(angle: f64) -> (u8, u8, u8) {
    let h = (angle.rem_euclid(2.0 * PI) / (2.0 * PI)) * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as usize {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let c = |v: f64| (v * 230.0 + 10.0).round() as u8;
    (c(r), c(g), c(b))
}

/// |u| per cell, showing the smallest modulus of each block so that cores
/// survive downsampling.
pub fn modulus_map(u: &ComplexField, title: &str) -> String {
    heatmap(u, title, |block| {
        ramp(block.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min))
    })
}

/// arg u per cell, sampled at the first node of each block.
pub fn phase_map(u: &ComplexField, title: &str) -> String {
    heatmap(u, title, |block| hue(block[0].arg()))
}

/// Total energy against iteration.
pub fn energy_trace(trace: &[EnergyReport], record_every: usize, title: &str) -> String {
    let (w, h) = (640.0, 360.0);
    let mut out = String::new();
    header(&mut out, w, h, title);
    let values: Vec<f64> = trace.iter().map(|e| e.total).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = values.len().max(2) - 1;
    let (pw, ph) = (w - 2.0 * MARGIN, h - 2.0 * MARGIN);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>"##
    );
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let x = MARGIN + pw * k as f64 / n as f64;
            let y = MARGIN + ph * (1.0 - (v - lo) / span);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let font = r#"font-family="sans-serif" font-size="11""#;
    let _ = writeln!(out, r#"<text x="4" y="{}" {font}>{hi:.6}</text>"#, MARGIN + 4.0);
    let _ = writeln!(out, r#"<text x="4" y="{}" {font}>{lo:.6}</text>"#, h - MARGIN);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" {font}>iteration (samples every {record_every})</text>"#,
        h - MARGIN + 16.0
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use semistiff::{Annulus, Grid, Mesh};

    #[test]
    fn heatmaps_are_bounded_and_well_formed() {
        let m = Mesh::new(Annulus::reference(), Grid::new(500, 1000).unwrap());
        let u = ComplexField::from_polar(&m, |r, t| Complex64::from_polar(r / 3.0, t));
        let svg = modulus_map(&u, "a < b");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        let rects = svg.matches("<rect").count();
        assert!(rects <= MAX_ROWS * MAX_COLUMNS + 1);
        assert_eq!(phase_map(&u, "p").matches("<rect").count(), rects);
    }

    #[test]
    fn colors() {
        assert_eq!(ramp(-1.0), ramp(0.0));
        assert_eq!(ramp(1.0), (255, 247, 191));
        assert_eq!(hue(0.0), hue(2.0 * PI));
    }

    #[test]
    fn trace_polyline_has_one_point_per_sample() {
        let e = |t: f64| EnergyReport { dirichlet: t, potential: 0.0, total: t, epsilon: 0.1 };
        let svg = energy_trace(&[e(3.0), e(2.0), e(1.5)], 10, "trace");
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 3);
    }
}
