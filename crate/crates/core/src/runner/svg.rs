//! Minimal SVG overlays: final paths drawn over a rasterized cost field.

use std::fmt::Write;

use crate::sigcore::Path;
use crate::worlds::{PointMassConfig, TerrainField};

const SIZE: f64 = 400.0;

struct Canvas {
    lo: [f64; 2],
    hi: [f64; 2],
    body: String,
}

impl Canvas {
    fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Canvas { lo, hi, body: String::new() }
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let x = (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * SIZE;
        // SVG y grows downward.
        let y = (self.hi[1] - p[1]) / (self.hi[1] - self.lo[1]) * SIZE;
        (x, y)
    }

    fn scale(&self, r: f64) -> f64 {
        r / (self.hi[0] - self.lo[0]) * SIZE
    }

    fn polyline(&mut self, pts: impl Iterator<Item = [f64; 2]>, stroke: &str, width: f64) {
        let coords: Vec<String> = pts.map(|p| self.px(p)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-opacity="0.8"/>"#,
            coords.join(" ")
        );
    }

    fn circle(&mut self, c: [f64; 2], r: f64, fill: &str) {
        let (x, y) = self.px(c);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{fill}"/>"#, self.scale(r));
    }

    fn heat(&mut self, n: usize, f: impl Fn([f64; 2]) -> f64) {
        let w = [(self.hi[0] - self.lo[0]) / n as f64, (self.hi[1] - self.lo[1]) / n as f64];
        let vals: Vec<f64> = (0..n * n)
            .map(|k| f([self.lo[0] + (k % n) as f64 * w[0] + 0.5 * w[0], self.lo[1] + (k / n) as f64 * w[1] + 0.5 * w[1]]))
            .collect();
        let max = vals.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let cell = SIZE / n as f64;
        for (k, v) in vals.iter().enumerate() {
            let shade = (255.0 * (1.0 - v / max)).round() as u8;
            let (x, y) = ((k % n) as f64 * cell, (n - 1 - k / n) as f64 * cell);
            let _ = writeln!(
                self.body,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
                cell + 0.5,
                cell + 0.5
            );
        }
    }

    fn finish(self, header: &str) -> String {
        format!(
            "<!-- {header} -->\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n{}</svg>\n",
            self.body
        )
    }
}

fn xy(path: &Path) -> impl Iterator<Item = [f64; 2]> + '_ {
    (0..path.len()).map(|i| [path.vertex(i)[0], path.vertex(i)[1]])
}

/// Particle paths over the terrain density; the best path in red.
pub fn terrain_svg(header: &str, field: &TerrainField, paths: &[Path], best: usize) -> String {
    let mut c = Canvas::new([0.0, 0.0], [1.0, 1.0]);
    c.heat(50, |p| field.density(p));
    for (i, p) in paths.iter().enumerate() {
        if i != best {
            c.polyline(xy(p), "#1f77b4", 1.0);
        }
    }
    if let Some(p) = paths.get(best) {
        c.polyline(xy(p), "#d62728", 2.5);
        c.circle([p.vertex(0)[0], p.vertex(0)[1]], 0.012, "#2ca02c");
        let l = p.len() - 1;
        c.circle([p.vertex(l)[0], p.vertex(l)[1]], 0.012, "#ff7f0e");
    }
    c.finish(header)
}

/// Executed point-mass trajectory among the obstacles.
pub fn pointmass_svg(header: &str, world: &PointMassConfig, positions: &[[f64; 2]]) -> String {
    let w = world.wall;
    let mut c = Canvas::new([-w, -w], [w, w]);
    let _ = writeln!(c.body, r##"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#f7f7f7"/>"##);
    for o in &world.obstacles {
        c.circle(o.center, o.radius, "#555555");
    }
    c.circle(world.goal, world.goal_radius, "#ff7f0e");
    c.circle(world.start, 0.05, "#2ca02c");
    let mut pts = vec![world.start];
    pts.extend_from_slice(positions);
    c.polyline(pts.into_iter(), "#d62728", 2.0);
    c.finish(header)
}
