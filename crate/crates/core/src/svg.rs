//! Static SVG plots: leaf samples as dot clouds, grids as heatmaps (2-D) or
//! line plots (1-D).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::op::GridFunction;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 24.0;

struct Frame {
    bx: Aabb,
}

impl Frame {
    fn new(bx: &Aabb) -> Self {
        let mut bx = bx.clone();
        for k in 0..bx.dim() {
            if bx.hi[k] <= bx.lo[k] {
                bx.lo[k] -= 0.5;
                bx.hi[k] += 0.5;
            }
        }
        Self { bx }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.bx.lo[0]) / (self.bx.hi[0] - self.bx.lo[0]) * (SIZE - 2.0 * MARGIN)
    }

    /// Vertical axis points up.
    fn y(&self, v: f64, lo: f64, hi: f64) -> f64 {
        SIZE - MARGIN - (v - lo) / (hi - lo) * (SIZE - 2.0 * MARGIN)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    s
}

fn close(mut s: String) -> String {
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Dot plot of leaf samples inside the chart box. One-dimensional charts are
/// drawn as a strip.
pub fn leaf_plot(points: &[Vec<f64>], chart: &Aabb, title: &str) -> Result<String> {
    if chart.dim() == 0 || chart.dim() > 2 {
        return Err(Error::Invalid(format!("cannot plot a leaf in dimension {}", chart.dim())));
    }
    let fr = Frame::new(chart);
    let mut s = open(title);
    let (x0, x1) = (fr.x(fr.bx.lo[0]), fr.x(fr.bx.hi[0]));
    let _ = writeln!(
        s,
        r##"<rect x="{x0:.2}" y="{MARGIN:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#999"/>"##,
        x1 - x0,
        SIZE - 2.0 * MARGIN
    );
    for p in points {
        if p.len() != chart.dim() {
            return Err(Error::DimensionMismatch { expected: chart.dim(), found: p.len() });
        }
        let cx = fr.x(p[0]);
        let cy = if chart.dim() == 2 { fr.y(p[1], fr.bx.lo[1], fr.bx.hi[1]) } else { SIZE / 2.0 };
        let _ = writeln!(s, r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="1.2" fill="#1f4e99"/>"##);
    }
    Ok(close(s))
}

/// Diverging blue/white/red scale on `[-m, m]`.
fn colour(v: f64, m: f64) -> String {
    if v.is_nan() {
        return "#bbbbbb".into();
    }
    let t = if m > 0.0 { (v / m).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 * (1.0 - t.abs()) + c * t.abs()).round() as u8;
    let (r, g, b) = if t >= 0.0 { (fade(178.0), fade(24.0), fade(43.0)) } else { (fade(33.0), fade(102.0), fade(172.0)) };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heatmap of a 2-D grid or line plot of a 1-D grid. Masked values are grey
/// cells (2-D) or gaps (1-D).
pub fn grid_plot(g: &GridFunction, title: &str) -> Result<String> {
    let grid = g.grid();
    let m = g.max_abs();
    let fr = Frame::new(&grid.bx);
    let mut s = open(title);
    match grid.dim() {
        1 => {
            let (lo, hi) = if m > 0.0 { (-m * 1.05, m * 1.05) } else { (-1.0, 1.0) };
            let zero = fr.y(0.0, lo, hi);
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN:.2}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#999"/>"##,
                SIZE - MARGIN
            );
            let mut run: Vec<String> = Vec::new();
            let flush = |run: &mut Vec<String>, s: &mut String| {
                if run.len() > 1 {
                    let _ = writeln!(s, r##"<polyline fill="none" stroke="#b2182b" points="{}"/>"##, run.join(" "));
                }
                run.clear();
            };
            for (i, v) in g.values().iter().enumerate() {
                if v.is_nan() {
                    flush(&mut run, &mut s);
                    continue;
                }
                let x = grid.point(i)[0];
                run.push(format!("{:.2},{:.2}", fr.x(x), fr.y(*v, lo, hi)));
            }
            flush(&mut run, &mut s);
        }
        2 => {
            let h = grid.spacing();
            let w = (SIZE - 2.0 * MARGIN) / grid.res[0] as f64;
            let ht = (SIZE - 2.0 * MARGIN) / grid.res[1] as f64;
            for (i, v) in g.values().iter().enumerate() {
                let p = grid.point(i);
                let cx = MARGIN + ((p[0] - grid.bx.lo[0]) / h[0]) * w;
                let cy = SIZE - MARGIN - ((p[1] - grid.bx.lo[1]) / h[1] + 1.0) * ht;
                let _ = writeln!(
                    s,
                    r#"<rect x="{cx:.2}" y="{cy:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    w + 0.05,
                    ht + 0.05,
                    colour(*v, m)
                );
            }
        }
        d => return Err(Error::Invalid(format!("cannot plot a grid in dimension {d}"))),
    }
    Ok(close(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::op::Grid;

    #[test]
    fn heatmap_has_one_cell_per_node() {
        let g = Grid::uniform(Aabb::from_intervals(&[[-1.0, 1.0], [0.0, 1.0]]).unwrap(), 4).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|p| p[0] - p[1]).collect();
        let svg = grid_plot(&GridFunction::new(g, vals).unwrap(), "a<b").unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 16);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn masked_values_break_line_plots() {
        let g = Grid::uniform(Aabb::from_intervals(&[[0.0, 1.0]]).unwrap(), 5).unwrap();
        let gf = GridFunction::with_mask(g, vec![0.0, 1.0, f64::NAN, 0.5, 0.2]);
        let svg = grid_plot(&gf, "line").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn colours_are_symmetric() {
        assert_eq!(colour(0.0, 1.0), "#ffffff");
        assert_eq!(colour(1.0, 1.0), "#b2182b");
        assert_eq!(colour(-2.0, 1.0), "#2166ac");
        let leaf = leaf_plot(&[vec![0.0, 1.0], vec![1.0, 0.0]], &Aabb::from_intervals(&[[-2.0, 2.0]; 2]).unwrap(), "R")
            .unwrap();
        assert_eq!(leaf.matches("<circle").count(), 2);
    }
}
