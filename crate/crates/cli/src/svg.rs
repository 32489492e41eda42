//! Minimal SVG charts: line charts and color-mapped grids with contour lines.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// Viridis sampled at five stops.
const COLORMAP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log2,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub series: Vec<Series>,
}

/// Values on a rectilinear grid; `values[i][j]` sits at `(x[i], y[j])`.
#[derive(Debug, Clone)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Levels drawn as contour lines.
    pub levels: Vec<f64>,
    /// Extra polylines in data coordinates, drawn in blue.
    pub overlays: Vec<Vec<(f64, f64)>>,
    pub markers: Vec<(f64, f64)>,
}

struct Axis {
    lo: f64,
    hi: f64,
    scale: Scale,
    pixel_lo: f64,
    pixel_hi: f64,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        let t = match self.scale {
            Scale::Linear => (v - self.lo) / (self.hi - self.lo),
            Scale::Log2 => (v.log2() - self.lo.log2()) / (self.hi.log2() - self.lo.log2()),
        };
        self.pixel_lo + t * (self.pixel_hi - self.pixel_lo)
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log2 => {
                let mut t = 2f64.powi(self.lo.log2().ceil() as i32);
                let mut out = vec![];
                while t <= self.hi * (1.0 + 1e-12) {
                    out.push(t);
                    t *= 2.0;
                }
                out
            }
            Scale::Linear => {
                let step = nice_step((self.hi - self.lo) / 6.0);
                let mut t = (self.lo / step).ceil() * step;
                let mut out = vec![];
                while t <= self.hi + 1e-9 * step {
                    out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
                    t += step;
                }
                out
            }
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(v: f64) -> String {
    if v == v.round() && v.abs() < 1e6 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        escape(title)
    );
}

fn frame(out: &mut String, xa: &Axis, ya: &Axis, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in xa.ticks() {
        let px = xa.map(t);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y0:.1}" x2="{px:.2}" y2="{:.1}" stroke="black"/><text x="{px:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 19.0,
            tick_label(t)
        );
    }
    for t in ya.ticks() {
        let py = ya.map(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{py:.2}" x2="{x0:.1}" y2="{py:.2}" stroke="black"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn polyline(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (i, (x, y)) in points.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

impl LineChart {
    pub fn render(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in all() {
            xlo = xlo.min(x);
            xhi = xhi.max(x);
            ylo = ylo.min(y);
            yhi = yhi.max(y);
        }
        if xlo > xhi {
            (xlo, xhi, ylo, yhi) = (0.0, 1.0, 0.0, 1.0);
        }
        let (ylo, yhi) = padded_range(ylo, yhi);
        let (xlo, xhi) = match self.x_scale {
            Scale::Linear if xhi <= xlo => padded_range(xlo, xhi),
            _ => (xlo, xhi),
        };
        let xa = Axis {
            lo: xlo,
            hi: xhi,
            scale: self.x_scale,
            pixel_lo: LEFT,
            pixel_hi: WIDTH - RIGHT,
        };
        let ya = Axis {
            lo: ylo,
            hi: yhi,
            scale: Scale::Linear,
            pixel_lo: HEIGHT - BOTTOM,
            pixel_hi: TOP,
        };

        let mut out = String::new();
        header(&mut out, &self.title);
        frame(&mut out, &xa, &ya, &self.x_label, &self.y_label);
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{}"/>"#,
                polyline(s.points.iter().map(|&(x, y)| (xa.map(x), ya.map(y))))
            );
            let ly = TOP + 14.0 + 20.0 * i as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.8"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (COLORMAP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(COLORMAP.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (COLORMAP[i], COLORMAP[i + 1]);
    let mix = |u: f64, v: f64| (u + f * (v - u)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Cell edges around grid points: midpoints between neighbours, extended at the ends.
fn edges(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n == 1 {
        return vec![axis[0] - 0.5, axis[0] + 0.5];
    }
    let mut e = Vec::with_capacity(n + 1);
    e.push(axis[0] - 0.5 * (axis[1] - axis[0]));
    for w in axis.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(axis[n - 1] + 0.5 * (axis[n - 1] - axis[n - 2]));
    e
}

/// Contour segments of one level by marching squares, in data coordinates.
pub fn contour_segments(x: &[f64], y: &[f64], v: &[Vec<f64>], level: f64) -> Vec<[(f64, f64); 2]> {
    let mut segments = vec![];
    let cross = |(xa, ya, va): (f64, f64, f64), (xb, yb, vb): (f64, f64, f64)| {
        let t = if vb == va { 0.5 } else { (level - va) / (vb - va) };
        (xa + t * (xb - xa), ya + t * (yb - ya))
    };
    for i in 0..x.len().saturating_sub(1) {
        for j in 0..y.len().saturating_sub(1) {
            let corners = [
                (x[i], y[j], v[i][j]),
                (x[i + 1], y[j], v[i + 1][j]),
                (x[i + 1], y[j + 1], v[i + 1][j + 1]),
                (x[i], y[j + 1], v[i][j + 1]),
            ];
            let mut points = vec![];
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                if (a.2 >= level) != (b.2 >= level) {
                    points.push(cross(a, b));
                }
            }
            match points.len() {
                2 => segments.push([points[0], points[1]]),
                4 => {
                    let centre = corners.iter().map(|c| c.2).sum::<f64>() / 4.0;
                    if (centre >= level) == (corners[0].2 >= level) {
                        segments.push([points[0], points[3]]);
                        segments.push([points[1], points[2]]);
                    } else {
                        segments.push([points[0], points[1]]);
                        segments.push([points[2], points[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

impl Heatmap {
    pub fn render(&self) -> String {
        let (xe, ye) = (edges(&self.x), edges(&self.y));
        let xa = Axis {
            lo: xe[0],
            hi: xe[xe.len() - 1],
            scale: Scale::Linear,
            pixel_lo: LEFT,
            pixel_hi: WIDTH - RIGHT,
        };
        let ya = Axis {
            lo: ye[0],
            hi: ye[ye.len() - 1],
            scale: Scale::Linear,
            pixel_lo: HEIGHT - BOTTOM,
            pixel_hi: TOP,
        };
        let finite = self.values.iter().flatten().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
        let norm = |v: f64| (v - lo) / (hi - lo);

        let mut out = String::new();
        header(&mut out, &self.title);
        out.push_str("<g shape-rendering=\"crispEdges\">\n");
        for (i, row) in self.values.iter().enumerate() {
            let (px0, px1) = (xa.map(xe[i]), xa.map(xe[i + 1]));
            for (j, &v) in row.iter().enumerate() {
                let (py0, py1) = (ya.map(ye[j + 1]), ya.map(ye[j]));
                let _ = writeln!(
                    out,
                    r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    px1 - px0 + 0.3,
                    py1 - py0 + 0.3,
                    color(norm(v))
                );
            }
        }
        out.push_str("</g>\n");

        for &level in &self.levels {
            let segs = contour_segments(&self.x, &self.y, &self.values, level);
            if segs.is_empty() {
                continue;
            }
            let mut d = String::new();
            for [a, b] in segs {
                let _ = write!(
                    d,
                    "M{:.2} {:.2}L{:.2} {:.2}",
                    xa.map(a.0),
                    ya.map(a.1),
                    xa.map(b.0),
                    ya.map(b.1)
                );
            }
            let _ = writeln!(
                out,
                r#"<path fill="none" stroke="white" stroke-width="1" d="{d}"><title>{}</title></path>"#,
                tick_label(level)
            );
        }
        for line in &self.overlays {
            let _ = writeln!(
                out,
                r##"<polyline fill="none" stroke="#1f4fff" stroke-width="2" points="{}"/>"##,
                polyline(line.iter().map(|&(x, y)| (xa.map(x), ya.map(y))))
            );
        }
        for &(x, y) in &self.markers {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="red" stroke="black"/>"#,
                xa.map(x),
                ya.map(y)
            );
        }
        frame(&mut out, &xa, &ya, &self.x_label, &self.y_label);

        // Color bar with the contour levels marked.
        let (bx, bw, btop, bbot) = (WIDTH - RIGHT + 30.0, 18.0, TOP, HEIGHT - BOTTOM);
        let steps = 64;
        for s in 0..steps {
            let t0 = s as f64 / steps as f64;
            let y = bbot - (t0 + 1.0 / steps as f64) * (bbot - btop);
            let _ = writeln!(
                out,
                r#"<rect x="{bx:.1}" y="{y:.2}" width="{bw:.1}" height="{:.2}" fill="{}"/>"#,
                (bbot - btop) / steps as f64 + 0.3,
                color(t0 + 0.5 / steps as f64)
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{bx:.1}" y="{btop:.1}" width="{bw:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            bbot - btop
        );
        let mut marks: Vec<f64> = vec![lo, hi];
        marks.extend(self.levels.iter().copied().filter(|l| *l > lo && *l < hi));
        for m in marks {
            let y = bbot - norm(m) * (bbot - btop);
            let _ = writeln!(
                out,
                r#"<line x1="{bx:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="black"/><text x="{:.1}" y="{:.2}">{}</text>"#,
                bx + bw + 4.0,
                bx + bw + 7.0,
                y + 4.0,
                tick_label(m)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// `count` evenly spaced levels strictly inside the value range, plus `extra`
/// levels that fall inside it.
pub fn contour_levels(values: &[Vec<f64>], count: usize, extra: &[f64]) -> Vec<f64> {
    let finite = values.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return vec![];
    }
    let step = nice_step((hi - lo) / count as f64);
    let mut levels = vec![];
    let mut l = (lo / step).floor() * step + step;
    while l < hi {
        levels.push((l / step).round() * step);
        l += step;
    }
    for &e in extra {
        if e > lo && e < hi && !levels.iter().any(|&x| (x - e).abs() < 1e-12) {
            levels.push(e);
        }
    }
    levels.sort_by(f64::total_cmp);
    levels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contour_of_a_plane_is_a_straight_line() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let y = x.clone();
        let v: Vec<Vec<f64>> = x.iter().map(|&a| y.iter().map(|&b| a + b).collect()).collect();
        let segs = contour_segments(&x, &y, &v, 1.05);
        assert!(!segs.is_empty());
        for [a, b] in segs {
            assert!((a.0 + a.1 - 1.05).abs() < 1e-12);
            assert!((b.0 + b.1 - 1.05).abs() < 1e-12);
        }
    }

    #[test]
    fn levels_are_inside_the_range() {
        let v = vec![vec![0.155, 0.2], vec![0.3, 0.41]];
        let levels = contour_levels(&v, 8, &[0.0, 0.25]);
        assert!(levels.iter().all(|&l| l > 0.155 && l < 0.41));
        assert!(levels.contains(&0.25));
        assert!(levels.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn charts_are_well_formed() {
        let chart = LineChart {
            title: "P1 <vs> m".into(),
            x_label: "m".into(),
            y_label: "P1".into(),
            x_scale: Scale::Log2,
            series: vec![Series {
                name: "a".into(),
                points: vec![(2.0, 0.2), (4.0, 0.3), (256.0, 0.35)],
                dashed: false,
            }],
        };
        let svg = chart.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("&lt;vs&gt;"));
        assert!(svg.contains(">256</text>"));
        let map = Heatmap {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x: vec![0.0, 1.0],
            y: vec![0.0, 1.0],
            values: vec![vec![0.0, 1.0], vec![1.0, 2.0]],
            levels: vec![1.0],
            overlays: vec![vec![(0.0, 0.0), (1.0, 1.0)]],
            markers: vec![(0.5, 0.5)],
        };
        let svg = map.render();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("<path"));
    }
}
