//! Minimal static SVG rendering: prediction fans, line charts and heatmaps.
//! Output is deterministic text so repeated runs are byte-identical.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit<'a>(xs: impl Iterator<Item = &'a f64>, ys: impl Iterator<Item = &'a f64>) -> Frame {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in xs.filter(|v| v.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
        }
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &y in ys.filter(|v| v.is_finite()) {
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let widen = |a: &mut f64, b: &mut f64| {
            if !a.is_finite() || !b.is_finite() {
                *a = 0.0;
                *b = 1.0;
            } else if *a == *b {
                *a -= 0.5;
                *b += 0.5;
            }
        };
        widen(&mut x0, &mut x1);
        widen(&mut y0, &mut y1);
        let pad = 0.05 * (y1 - y0);
        Frame {
            x0,
            x1,
            y0: y0 - pad,
            y1: y1 + pad,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>
"#,
        W / 2.0,
        esc(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        w = W - 2.0 * MARGIN,
        h = H - 2.0 * MARGIN
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            H - MARGIN + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN - 4.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        esc(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn polyline(out: &mut String, f: &Frame, xs: &[f64], ys: &[f64], color: &str, dashed: bool) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
        .collect();
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
        pts.join(" ")
    );
}

/// Mean curve with a symmetric band and optional measured points.
pub struct Fan<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub x: &'a [f64],
    pub mean: &'a [f64],
    pub half_width: &'a [f64],
    /// Full true trajectory.
    pub truth: Option<(&'a [f64], &'a [f64])>,
    /// Points conditioned on.
    pub observed: Option<(&'a [f64], &'a [f64])>,
}

pub fn fan_svg(fan: &Fan) -> String {
    let lo: Vec<f64> = fan.mean.iter().zip(fan.half_width).map(|(m, h)| m - h).collect();
    let hi: Vec<f64> = fan.mean.iter().zip(fan.half_width).map(|(m, h)| m + h).collect();
    let mut all_x: Vec<f64> = fan.x.to_vec();
    let mut all_y: Vec<f64> = lo.iter().chain(&hi).copied().collect();
    if let Some((tx, ty)) = fan.truth {
        all_x.extend_from_slice(tx);
        all_y.extend_from_slice(ty);
    }
    let f = Frame::fit(all_x.iter(), all_y.iter());
    let mut out = String::new();
    header(&mut out, fan.title);
    let mut band: Vec<String> = fan
        .x
        .iter()
        .zip(&hi)
        .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
        .collect();
    band.extend(
        fan.x
            .iter()
            .zip(&lo)
            .rev()
            .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y))),
    );
    let _ = writeln!(
        out,
        r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.6" stroke="none"/>"##,
        band.join(" ")
    );
    polyline(&mut out, &f, fan.x, fan.mean, PALETTE[0], false);
    if let Some((tx, ty)) = fan.truth {
        polyline(&mut out, &f, tx, ty, PALETTE[1], false);
    }
    if let Some((ox, oy)) = fan.observed {
        for (&x, &y) in ox.iter().zip(oy) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#,
                f.px(x),
                f.py(y)
            );
        }
    }
    axes(&mut out, &f, fan.xlabel, fan.ylabel);
    out.push_str("</svg>\n");
    out
}

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub dashed: bool,
}

/// Line chart with a legend; `diagonal` draws the reference `y = x`.
pub fn lines_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series], diagonal: bool) -> String {
    let f = Frame::fit(
        series.iter().flat_map(|s| s.x.iter()),
        series.iter().flat_map(|s| s.y.iter()),
    );
    let mut out = String::new();
    header(&mut out, title);
    if diagonal {
        let lo = f.x0.max(f.y0);
        let hi = f.x1.min(f.y1);
        if lo < hi {
            polyline(&mut out, &f, &[lo, hi], &[lo, hi], "black", true);
        }
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut out, &f, s.x, s.y, color, s.dashed);
        for (&x, &y) in s.x.iter().zip(s.y) {
            if x.is_finite() && y.is_finite() {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                    f.px(x),
                    f.py(y)
                );
            }
        }
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            MARGIN + 10.0,
            MARGIN + 30.0,
            MARGIN + 36.0,
            ly + 4.0,
            esc(s.label)
        );
    }
    axes(&mut out, &f, xlabel, ylabel);
    out.push_str("</svg>\n");
    out
}

fn heat_color(t: f64) -> String {
    // white → dark blue
    let t = t.clamp(0.0, 1.0);
    let c = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(255.0, 8.0), c(255.0, 48.0), c(255.0, 107.0))
}

/// Square matrix image. Values are mapped linearly between the matrix
/// minimum and maximum.
pub fn heatmap_svg(title: &str, m: &nalgebra::DMatrix<f64>) -> String {
    let n = m.nrows().max(1);
    let (lo, hi) = m
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let side = (H - 2.0 * MARGIN).min(W - 2.0 * MARGIN);
    let cell = side / n as f64;
    let mut out = String::new();
    header(&mut out, title);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let t = (m[(i, j)] - lo) / span;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN + j as f64 * cell,
                MARGIN + i as f64 * cell,
                cell + 0.05,
                cell + 0.05,
                heat_color(t)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}">min {}</text><text x="{:.1}" y="{:.1}">max {}</text>"#,
        MARGIN + side + 12.0,
        MARGIN + 12.0,
        tick(lo),
        MARGIN + side + 12.0,
        MARGIN + 30.0,
        tick(hi)
    );
    out.push_str("</svg>\n");
    out
}
