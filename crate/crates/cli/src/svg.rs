//! Hand-written SVG: quiver plots and value heatmaps.
//!
//! Heatmap colours interpolate linearly between five fixed stops, low to
//! high: `#440154`, `#3b528b`, `#21918c`, `#5ec962`, `#fde725`.

use std::fmt::Write;

use lipflow::dynamics::Lattice;
use lipflow::geometry::Point;

use crate::output::Header;

pub const SIZE: f64 = 480.0;
const MARGIN: f64 = 20.0;
const COLORMAP: [(u8, u8, u8); 5] = [(0x44, 0x01, 0x54), (0x3b, 0x52, 0x8b), (0x21, 0x91, 0x8c), (0x5e, 0xc9, 0x62), (0xfd, 0xe7, 0x25)];

/// Axis-aligned data window mapped onto the canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl View {
    /// Smallest square-padded window holding every point's first two coordinates.
    pub fn around<'a>(points: impl IntoIterator<Item = &'a Point>, pad: f64) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            let (x, y) = (p[0], if p.dim() > 1 { p[1] } else { 0.0 });
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return Self { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 };
        }
        Self {
            x_min: x0 - pad,
            x_max: x1 + pad,
            y_min: y0 - pad,
            y_max: y1 + pad,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min).max(1e-12) * (SIZE - 2.0 * MARGIN)
    }

    // svg y grows downwards
    fn sy(&self, y: f64) -> f64 {
        SIZE - MARGIN - (y - self.y_min) / (self.y_max - self.y_min).max(1e-12) * (SIZE - 2.0 * MARGIN)
    }
}

fn open(header: &Header, title: &str) -> String {
    let mut s = header.xml_comment();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn xy(p: &Point) -> (f64, f64) {
    (p[0], if p.dim() > 1 { p[1] } else { 0.0 })
}

/// Real points as squares, particles as circles, and `∇f` arrows drawn
/// from each particle. Arrow lengths share one scale, the longest spanning
/// a tenth of the window width.
pub fn quiver(header: &Header, title: &str, view: &View, real: &[Point], arrows: &[(Point, Vec<f64>)]) -> String {
    let mut s = open(header, title);
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    for p in real {
        let (x, y) = xy(p);
        let _ = writeln!(
            s,
            r##"<rect x="{:.3}" y="{:.3}" width="6" height="6" fill="#d62728"/>"##,
            view.sx(x) - 3.0,
            view.sy(y) - 3.0
        );
    }
    let longest = arrows
        .iter()
        .map(|(_, g)| g.iter().take(2).map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let scale = if longest > 0.0 { 0.1 * (view.x_max - view.x_min) / longest } else { 0.0 };
    for (p, g) in arrows {
        let (x, y) = xy(p);
        let (gx, gy) = (g[0], if g.len() > 1 { g[1] } else { 0.0 });
        let (x0, y0) = (view.sx(x), view.sy(y));
        let (x1, y1) = (view.sx(x + scale * gx), view.sy(y + scale * gy));
        let _ = writeln!(s, r##"<circle cx="{x0:.3}" cy="{y0:.3}" r="3" fill="#1f77b4"/>"##);
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        if len > 1e-9 {
            let _ = writeln!(
                s,
                r##"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" stroke="#333333" stroke-width="1"/>"##
            );
            let (ux, uy) = ((x1 - x0) / len, (y1 - y0) / len);
            let head = 5.0f64.min(len);
            let (bx, by) = (x1 - head * ux, y1 - head * uy);
            let (px, py) = (-uy * head * 0.5, ux * head * 0.5);
            let _ = writeln!(
                s,
                r##"<polygon points="{x1:.3},{y1:.3} {:.3},{:.3} {:.3},{:.3}" fill="#333333"/>"##,
                bx + px,
                by + py,
                bx - px,
                by - py
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Colour for `t ∈ [0, 1]`; values outside are clamped.
pub fn colormap(t: f64) -> (u8, u8, u8) {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (COLORMAP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(COLORMAP.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (COLORMAP[i], COLORMAP[i + 1]);
    let mix = |u: u8, v: u8| (u as f64 + f * (v as f64 - u as f64)).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// One rectangle per lattice node, coloured by the min-max normalised value,
/// with the clouds overlaid. `values[j][i]` sits at `(x(i), y(j))`.
pub fn heatmap(header: &Header, title: &str, lattice: &Lattice, values: &[Vec<f64>], real: &[Point], fake: &[Point]) -> String {
    let view = View {
        x_min: lattice.x_min,
        x_max: lattice.x_max,
        y_min: lattice.y_min,
        y_max: lattice.y_max,
    };
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cw = (SIZE - 2.0 * MARGIN) / (lattice.nx - 1).max(1) as f64;
    let ch = (SIZE - 2.0 * MARGIN) / (lattice.ny - 1).max(1) as f64;
    let mut s = open(header, title);
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    for (j, row) in values.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let (r, g, b) = colormap((v - lo) / span);
            let _ = writeln!(
                s,
                r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                view.sx(lattice.x(i)) - cw / 2.0,
                view.sy(lattice.y(j)) - ch / 2.0,
                cw,
                ch
            );
        }
    }
    for p in real {
        let (x, y) = xy(p);
        let _ = writeln!(
            s,
            r##"<rect x="{:.3}" y="{:.3}" width="6" height="6" fill="#d62728" stroke="#ffffff"/>"##,
            view.sx(x) - 3.0,
            view.sy(y) - 3.0
        );
    }
    for p in fake {
        let (x, y) = xy(p);
        let _ = writeln!(s, r##"<circle cx="{:.3}" cy="{:.3}" r="3" fill="#1f77b4" stroke="#ffffff"/>"##, view.sx(x), view.sy(y));
    }
    let _ = writeln!(s, r##"<text x="{MARGIN}" y="14" font-size="11" fill="#000000">min {lo:.4} max {hi:.4}</text>"##);
    s.push_str("</svg>\n");
    s
}
