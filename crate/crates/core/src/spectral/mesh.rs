//! Triangular meshes of rectangles with horizontal slits.
//!
//! Meshes are built on a structured grid whose lines pass through every slit
//! tip, then graded radially toward the tips by `r ↦ ρ (r/ρ)^γ` inside the
//! disk of radius `ρ`. Refinement is red (each triangle split into four at
//! edge midpoints), so refined finite-element spaces are nested.
//!
//! Text format (one record per line, `#` starts a comment):
//!
//! ```text
//! vertices <n>
//! <x> <y> <marker>          n lines; marker 1 = Dirichlet, 0 = free
//! triangles <m>
//! <i> <j> <k>               m lines, counter-clockwise, 0-based
//! ```

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ON_LINE: f64 = 1e-12;

/// Domains with Dirichlet conditions on the whole boundary, including both
/// sides of every slit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Axis-parallel rectangle `[x0, x1] × [y0, y1]`.
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// The strip `0 < y < π` with the slits `y = π/2, |x| ≥ π`, its arms
    /// truncated at `|x| = X` by Dirichlet caps.
    SlitStrip { truncation: f64 },
}

impl Geometry {
    /// The calibration square `(−π/2, π/2) × (0, π)`.
    pub fn calibration_square() -> Self {
        Geometry::Rectangle { x0: -FRAC_PI_2, x1: FRAC_PI_2, y0: 0.0, y1: PI }
    }

    fn bounds(&self) -> [f64; 4] {
        match *self {
            Geometry::Rectangle { x0, x1, y0, y1 } => [x0, x1, y0, y1],
            Geometry::SlitStrip { truncation } => [-truncation, truncation, 0.0, PI],
        }
    }

    /// Slit tips, where the mesh is graded.
    pub fn tips(&self) -> Vec<[f64; 2]> {
        match self {
            Geometry::Rectangle { .. } => Vec::new(),
            Geometry::SlitStrip { .. } => vec![[-PI, FRAC_PI_2], [PI, FRAC_PI_2]],
        }
    }

    /// Whether `p` lies on the outer boundary or on a slit.
    pub fn on_dirichlet(&self, p: [f64; 2]) -> bool {
        let [x0, x1, y0, y1] = self.bounds();
        let near = |u: f64, v: f64| (u - v).abs() <= ON_LINE * (1.0 + v.abs());
        if near(p[0], x0) || near(p[0], x1) || near(p[1], y0) || near(p[1], y1) {
            return true;
        }
        match self {
            Geometry::Rectangle { .. } => false,
            Geometry::SlitStrip { .. } => near(p[1], FRAC_PI_2) && p[0].abs() >= PI - ON_LINE * PI,
        }
    }

    fn validate(&self, controls: &MeshControls) -> Result<()> {
        let [x0, x1, y0, y1] = self.bounds();
        if !(x0 < x1 && y0 < y1 && [x0, x1, y0, y1].iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput(format!("empty or non-finite domain {self:?}")));
        }
        if let Geometry::SlitStrip { truncation } = *self {
            if truncation < PI + controls.grading_radius {
                return Err(Error::InvalidInput(format!(
                    "truncation {truncation} must exceed pi plus the grading radius {}",
                    controls.grading_radius
                )));
            }
        }
        Ok(())
    }
}

/// Resolution and grading of the initial structured mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshControls {
    /// Grid cells across a length of `π/2`.
    pub resolution: usize,
    /// Grading exponent `γ`; `1` disables grading.
    pub grading_exponent: f64,
    /// Radius `ρ` of the graded disk around each slit tip.
    pub grading_radius: f64,
    /// Smallest admissible interior angle, in degrees.
    pub min_angle_deg: f64,
}

impl Default for MeshControls {
    fn default() -> Self {
        Self { resolution: 16, grading_exponent: 2.0, grading_radius: 1.0, min_angle_deg: 10.0 }
    }
}

/// Summary statistics of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub free_vertices: usize,
    pub min_angle_deg: f64,
    pub h_min: f64,
    pub h_max: f64,
}

/// A conforming triangulation with Dirichlet markers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub dirichlet: Vec<bool>,
}

/// Grid coordinates on `[lo, hi]` with spacing close to `h`, passing through
/// every entry of `stops` that lies strictly inside.
fn axis(lo: f64, hi: f64, h: f64, stops: &[f64]) -> Vec<f64> {
    let mut knots = vec![lo];
    knots.extend(stops.iter().copied().filter(|s| *s > lo && *s < hi));
    knots.push(hi);
    let mut out = vec![lo];
    for w in knots.windows(2) {
        let cells = ((w[1] - w[0]) / h).round().max(1.0) as usize;
        for j in 1..=cells {
            out.push(if j == cells { w[1] } else { w[0] + (w[1] - w[0]) * j as f64 / cells as f64 });
        }
    }
    out
}

/// Grid coordinates for the slit strip arms: uniform spacing `h` measured from
/// `±π`, so extending the truncation only appends cells.
fn arm_axis(truncation: f64, h: f64, center_cells: usize) -> (Vec<f64>, f64) {
    let arm_cells = ((truncation - PI) / h).round().max(1.0) as usize;
    let cap = PI + arm_cells as f64 * h;
    let mut out: Vec<f64> = (0..arm_cells).map(|j| -(PI + (arm_cells - j) as f64 * h)).collect();
    for j in 0..=center_cells {
        out.push(-PI + 2.0 * PI * j as f64 / center_cells as f64);
    }
    out.extend((1..=arm_cells).map(|j| PI + j as f64 * h));
    (out, cap)
}

impl Mesh {
    /// Structured, graded mesh of `geometry`. For the slit strip the cap is
    /// moved to the nearest grid line; the effective truncation is returned.
    pub fn build(geometry: &Geometry, controls: &MeshControls) -> Result<(Self, Geometry)> {
        geometry.validate(controls)?;
        if controls.resolution == 0 || !(controls.grading_exponent >= 1.0) || !(controls.grading_radius > 0.0) {
            return Err(Error::InvalidInput(format!("invalid mesh controls {controls:?}")));
        }
        let h = FRAC_PI_2 / controls.resolution as f64;
        let [x0, x1, y0, y1] = geometry.bounds();
        let (xs, ys, geometry) = match *geometry {
            Geometry::Rectangle { .. } => (axis(x0, x1, h, &[]), axis(y0, y1, h, &[]), *geometry),
            Geometry::SlitStrip { truncation } => {
                if controls.grading_radius >= FRAC_PI_2 {
                    return Err(Error::InvalidInput("grading radius must stay below pi/2".into()));
                }
                let (xs, cap) = arm_axis(truncation, h, 4 * controls.resolution);
                (xs, axis(0.0, PI, h, &[FRAC_PI_2]), Geometry::SlitStrip { truncation: cap })
            }
        };
        let ny = ys.len();
        let mut vertices = Vec::with_capacity(xs.len() * ny);
        for x in &xs {
            for y in &ys {
                vertices.push([*x, *y]);
            }
        }
        let id = |i: usize, j: usize| i * ny + j;
        let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let mut triangles = Vec::with_capacity(2 * (xs.len() - 1) * (ny - 1));
        for i in 0..xs.len() - 1 {
            for j in 0..ny - 1 {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                let left = 0.5 * (xs[i] + xs[i + 1]) < xm;
                let low = 0.5 * (ys[j] + ys[j + 1]) < ym;
                // alternate diagonals by quadrant so the mesh shares the domain's mirror symmetries
                if left == low {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        for tip in geometry.tips() {
            for v in vertices.iter_mut() {
                *v = grade(*v, tip, controls.grading_radius, controls.grading_exponent);
            }
        }
        let dirichlet = vertices.iter().map(|v| geometry.on_dirichlet(*v)).collect();
        let mesh = Mesh { vertices, triangles, dirichlet };
        mesh.check_quality(controls.min_angle_deg)?;
        Ok((mesh, geometry))
    }

    /// Red refinement: every triangle is split into four congruent children.
    pub fn refine(&self, geometry: &Geometry) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut dirichlet = self.dirichlet.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>, dirichlet: &mut Vec<bool>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let p = [0.5 * (vertices[a][0] + vertices[b][0]), 0.5 * (vertices[a][1] + vertices[b][1])];
                vertices.push(p);
                dirichlet.push(dirichlet[a] && dirichlet[b] && geometry.on_dirichlet(p));
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices, &mut dirichlet);
            let bc = midpoint(b, c, &mut vertices, &mut dirichlet);
            let ca = midpoint(c, a, &mut vertices, &mut dirichlet);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        Mesh { vertices, triangles, dirichlet }
    }

    /// Signed area of triangle `t`.
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    fn angles(&self, t: usize) -> [f64; 3] {
        let p = self.triangles[t].map(|i| self.vertices[i]);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let (o, u, v) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let (du, dv) = ([u[0] - o[0], u[1] - o[1]], [v[0] - o[0], v[1] - o[1]]);
            let cross = du[0] * dv[1] - du[1] * dv[0];
            let dot = du[0] * dv[0] + du[1] * dv[1];
            out[k] = cross.abs().atan2(dot).to_degrees();
        }
        out
    }

    fn edge_lengths(&self, t: usize) -> impl Iterator<Item = f64> + '_ {
        let p = self.triangles[t].map(|i| self.vertices[i]);
        (0..3).map(move |k| {
            let (u, v) = (p[k], p[(k + 1) % 3]);
            (u[0] - v[0]).hypot(u[1] - v[1])
        })
    }

    pub fn stats(&self) -> MeshStats {
        let mut min_angle = f64::INFINITY;
        let (mut h_min, mut h_max) = (f64::INFINITY, 0.0f64);
        for t in 0..self.triangles.len() {
            min_angle = self.angles(t).into_iter().fold(min_angle, f64::min);
            for l in self.edge_lengths(t) {
                h_min = h_min.min(l);
                h_max = h_max.max(l);
            }
        }
        MeshStats {
            vertices: self.vertices.len(),
            triangles: self.triangles.len(),
            free_vertices: self.dirichlet.iter().filter(|d| !**d).count(),
            min_angle_deg: min_angle,
            h_min,
            h_max,
        }
    }

    /// Rejects inverted triangles and angles below `min_angle_deg`.
    pub fn check_quality(&self, min_angle_deg: f64) -> Result<()> {
        if let Some(t) = (0..self.triangles.len()).find(|t| self.area(*t) <= 0.0) {
            return Err(Error::MeshQualityFailure(format!("triangle {t} is inverted or degenerate")));
        }
        let stats = self.stats();
        if stats.min_angle_deg < min_angle_deg {
            return Err(Error::MeshQualityFailure(format!(
                "minimum angle {:.3} deg below {min_angle_deg} deg",
                stats.min_angle_deg
            )));
        }
        Ok(())
    }

    /// Mirror image under `y ↦ −y`, with orientation restored.
    pub fn mirrored(&self) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|[x, y]| [*x, -*y]).collect(),
            triangles: self.triangles.iter().map(|[a, b, c]| [*a, *c, *b]).collect(),
            dirichlet: self.dirichlet.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# triangle mesh: vertices (x y marker), triangles (i j k)");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for (v, d) in self.vertices.iter().zip(&self.dirichlet) {
            let _ = writeln!(s, "{} {} {}", v[0], v[1], u8::from(*d));
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for [a, b, c] in &self.triangles {
            let _ = writeln!(s, "{a} {b} {c}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let bad = |msg: String| Error::InvalidInput(format!("mesh text: {msg}"));
        let mut body = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let nv = header(&mut body, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        let mut dirichlet = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = body.next().ok_or_else(|| bad("truncated vertex list".into()))?;
            let (x, y, marker) = match line.split_whitespace().collect::<Vec<_>>()[..] {
                [x, y, m] => (x.parse::<f64>(), y.parse::<f64>(), m),
                _ => return Err(bad(format!("vertex line '{line}'"))),
            };
            let (Ok(x), Ok(y)) = (x, y) else {
                return Err(bad(format!("vertex line '{line}'")));
            };
            dirichlet.push(match marker {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("marker '{other}'"))),
            });
            vertices.push([x, y]);
        }
        let nt = header(&mut body, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = body.next().ok_or_else(|| bad("truncated triangle list".into()))?;
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad(format!("triangle line '{line}'"))))
                .collect::<Result<_>>()?;
            if ids.len() != 3 || ids.iter().any(|i| *i >= nv) {
                return Err(bad(format!("triangle line '{line}'")));
            }
            triangles.push([ids[0], ids[1], ids[2]]);
        }
        if body.next().is_some() {
            return Err(bad("trailing records".into()));
        }
        Ok(Mesh { vertices, triangles, dirichlet })
    }
}

fn header<'a>(body: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<usize> {
    let bad = |msg: String| Error::InvalidInput(format!("mesh text: {msg}"));
    let line = body.next().ok_or_else(|| bad(format!("missing '{name}' header")))?;
    match line.split_whitespace().collect::<Vec<_>>()[..] {
        [key, n] if key == name => n.parse().map_err(|_| bad(format!("bad count in '{line}'"))),
        _ => Err(bad(format!("expected '{name} <count>', found '{line}'"))),
    }
}

/// Radial grading toward `tip`: `r ↦ ρ (r/ρ)^γ` for `r < ρ`.
fn grade(p: [f64; 2], tip: [f64; 2], radius: f64, exponent: f64) -> [f64; 2] {
    let d = [p[0] - tip[0], p[1] - tip[1]];
    let r = d[0].hypot(d[1]);
    if r >= radius || r == 0.0 {
        return p;
    }
    let s = (r / radius).powf(exponent - 1.0);
    [tip[0] + d[0] * s, tip[1] + d[1] * s]
}
