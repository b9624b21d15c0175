use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{clear_base_points, Diagram, MeromorphicForm};
use crate::error::{Error, Result};
use crate::quad;
use crate::specfun::TorusModulus;

/// One piece of a contour in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Piece {
    Segment { from: C64, to: C64 },
    /// `turns` counter-clockwise traversals (negative for clockwise).
    Circle { center: C64, radius: f64, turns: i32 },
}

/// What a contour represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleRole {
    A,
    B,
    PoleCircle(usize),
    ZeroCircle(usize),
    CylinderCore(usize),
    /// Cycle with intersection number one against the core of the same index.
    Complement(usize),
    /// Open path from the base zero to zero `j`.
    RelativePath(usize),
}

/// A contour: pieces in chart coordinates, the lattice translation between
/// its end and its start (genus one), and the orientation relative to the
/// catalog's convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub role: CycleRole,
    pub pieces: Vec<Piece>,
    pub lattice_shift: (i64, i64),
    pub reversed: bool,
    /// Whether an open path had to leave the straight segment.
    pub detour: bool,
}

impl Cycle {
    pub fn segment(role: CycleRole, from: C64, to: C64, lattice_shift: (i64, i64)) -> Self {
        Self { role, pieces: vec![Piece::Segment { from, to }], lattice_shift, reversed: false, detour: false }
    }

    pub fn circle(role: CycleRole, center: C64, radius: f64) -> Self {
        Self {
            role,
            pieces: vec![Piece::Circle { center, radius, turns: 1 }],
            lattice_shift: (0, 0),
            reversed: false,
            detour: false,
        }
    }

    pub fn polyline(role: CycleRole, vertices: &[C64], lattice_shift: (i64, i64)) -> Self {
        let pieces = vertices.windows(2).map(|w| Piece::Segment { from: w[0], to: w[1] }).collect();
        Self { role, pieces, lattice_shift, reversed: false, detour: false }
    }

    /// The same contour traversed backwards.
    pub fn reversed(&self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .rev()
            .map(|p| match *p {
                Piece::Segment { from, to } => Piece::Segment { from: to, to: from },
                Piece::Circle { center, radius, turns } => Piece::Circle { center, radius, turns: -turns },
            })
            .collect();
        Self {
            role: self.role,
            pieces,
            lattice_shift: (-self.lattice_shift.0, -self.lattice_shift.1),
            reversed: !self.reversed,
            detour: self.detour,
        }
    }

    /// Appends `turns` copies of a small circle (used for homology corrections).
    pub fn with_circle(mut self, center: C64, radius: f64, turns: i32) -> Self {
        if turns != 0 {
            self.pieces.push(Piece::Circle { center, radius, turns });
        }
        self
    }

    /// The contour with every point mapped through `map`.
    pub fn mapped(&self, map: impl Fn(C64) -> C64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| match *p {
                Piece::Segment { from, to } => Piece::Segment { from: map(from), to: map(to) },
                Piece::Circle { center, radius, turns } => Piece::Circle { center: map(center), radius, turns },
            })
            .collect();
        Self { pieces, ..self.clone() }
    }

    /// Straight segments of the contour, ignoring circles.
    pub fn segments(&self) -> Vec<(C64, C64)> {
        self.pieces
            .iter()
            .filter_map(|p| match *p {
                Piece::Segment { from, to } => Some((from, to)),
                Piece::Circle { .. } => None,
            })
            .collect()
    }

    fn chain_gap(&self, modulus: Option<&TorusModulus>) -> f64 {
        let segs = self.segments();
        let mut gap: f64 = 0.0;
        for w in segs.windows(2) {
            gap = gap.max((w[0].1 - w[1].0).norm());
        }
        if let (Some(first), Some(last)) = (segs.first(), segs.last()) {
            let shift = match modulus {
                Some(t) => t.b() * self.lattice_shift.1 as f64 + self.lattice_shift.0 as f64,
                None => C64::new(0.0, 0.0),
            };
            if !matches!(self.role, CycleRole::RelativePath(_)) {
                gap = gap.max((last.1 - first.0 - shift).norm());
            }
        }
        gap
    }

    /// Whether the contour closes up (modulo its recorded lattice shift).
    pub fn is_closed(&self, modulus: Option<&TorusModulus>) -> bool {
        !matches!(self.role, CycleRole::RelativePath(_)) && self.chain_gap(modulus) < 1e-12
    }

    /// Smallest distance from the contour to any of `points` (and their lattice translates).
    pub fn clearance(&self, points: &[C64], modulus: Option<&TorusModulus>) -> f64 {
        let mut best = f64::INFINITY;
        for piece in &self.pieces {
            for p in points {
                let d = match *piece {
                    Piece::Segment { from, to } => translates(*p, modulus, 2)
                        .into_iter()
                        .map(|q| point_segment_distance(q, from, to))
                        .fold(f64::INFINITY, f64::min),
                    Piece::Circle { center, radius, .. } => translates(*p, modulus, 2)
                        .into_iter()
                        .map(|q| ((q - center).norm() - radius).abs())
                        .fold(f64::INFINITY, f64::min),
                };
                best = best.min(d);
            }
        }
        best
    }

    /// `∮ g dz` along the contour.
    pub fn integrate<G: FnMut(C64) -> Result<C64>>(&self, mut g: G, tol: f64) -> Result<C64> {
        let mut failure = None;
        let mut total = C64::new(0.0, 0.0);
        for piece in &self.pieces {
            let mut h = |z: C64| match g(z) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    C64::new(f64::NAN, f64::NAN)
                }
            };
            let v = match *piece {
                Piece::Segment { from, to } => quad::segment(&mut h, from, to, tol * (to - from).norm().max(1.0)),
                Piece::Circle { center, radius, turns } => {
                    quad::circle(&mut h, center, radius, tol).map(|v| v * turns as f64)
                }
            };
            if let Some(e) = failure.take() {
                return Err(e);
            }
            total += v?;
        }
        Ok(total)
    }
}

pub(crate) fn translates(p: C64, modulus: Option<&TorusModulus>, reach: i64) -> Vec<C64> {
    match modulus {
        None => vec![p],
        Some(t) => {
            let mut out = Vec::with_capacity(((2 * reach + 1) * (2 * reach + 1)) as usize);
            for m in -reach..=reach {
                for n in -reach..=reach {
                    out.push(p + m as f64 + t.b() * n as f64);
                }
            }
            out
        }
    }
}

pub(crate) fn point_segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Signed count of crossings of `path` with `delta` and its lattice translates.
/// A crossing counts `+1` when the path direction turns counter-clockwise
/// onto the direction of `delta`.
pub fn crossing_number(path: &[(C64, C64)], delta: (C64, C64), modulus: Option<&TorusModulus>) -> i32 {
    let mut count = 0;
    let s = delta.1 - delta.0;
    for (a, b) in path {
        let r = b - a;
        let denom = cross(r, s);
        if denom == 0.0 {
            continue;
        }
        for q in translates(delta.0, modulus, 3) {
            let t = cross(q - a, s) / denom;
            let u = cross(q - a, r) / denom;
            if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&u) {
                count += if denom > 0.0 { 1 } else { -1 };
            }
        }
    }
    count
}

/// `x, y, g` with `a·x + b·y = g = gcd(a, b)`.
pub fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a.signum(), 0, a.abs())
    } else {
        let (x, y, g) = extended_gcd(b, a.rem_euclid(b));
        (y, x - a.div_euclid(b) * y, g)
    }
}

/// `∫ ω` over a contour or open path, after checking pole clearance.
pub fn integrate_form(form: &MeromorphicForm, path: &Cycle) -> Result<C64> {
    let s = form.surface();
    let clearance = path.clearance(s.points(), s.modulus());
    if clearance < form.tolerances().clearance {
        return Err(Error::ClearanceViolation { distance: clearance, clearance: form.tolerances().clearance });
    }
    path.integrate(|z| form.coefficient(z), form.tolerances().quad)
}

/// Radius for a small circle around `center` that stays well away from the
/// other divisor points.
pub(crate) fn small_radius(center: C64, others: &[C64], modulus: Option<&TorusModulus>) -> f64 {
    let d = others
        .iter()
        .flat_map(|p| translates(*p, modulus, 1))
        .map(|q| (q - center).norm())
        .filter(|d| *d > 1e-12)
        .fold(f64::INFINITY, f64::min);
    let d = if d.is_finite() { d } else { 1.0 };
    0.3 * d.min(1.0)
}

/// Every divisor point of the diagram, poles first.
pub(crate) fn divisor_points(diagram: &Diagram) -> Vec<C64> {
    let mut pts: Vec<C64> = diagram.form.surface().points().to_vec();
    pts.extend(diagram.zeros.iter().map(|z| z.position));
    pts
}

/// Kink of an open path: the path runs through the point at fraction `at`
/// of the straight segment, displaced sideways by `offset` segment lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bend {
    pub at: f64,
    pub offset: f64,
}

impl Bend {
    pub const STRAIGHT: Bend = Bend { at: 0.5, offset: 0.0 };

    /// Candidates in search order: straight, then growing offsets.
    fn candidates() -> impl Iterator<Item = Bend> {
        std::iter::once(Bend::STRAIGHT).chain((1..=8).flat_map(|k| {
            let size = 0.15 * k as f64;
            [0.5, 0.25, 0.75].into_iter().flat_map(move |at| [Bend { at, offset: size }, Bend { at, offset: -size }])
        }))
    }
}

/// Open path from `from` to `to`: straight when it clears the divisor,
/// otherwise kinked through a displaced point.  `bend` forces a particular
/// kink; `None` searches for one.
pub(crate) fn relative_path(
    role: CycleRole,
    from: C64,
    to: C64,
    avoid: &[C64],
    modulus: Option<&TorusModulus>,
    clearance: f64,
    bend: Option<Bend>,
) -> Result<(Cycle, Bend)> {
    let build = |b: Bend| -> Cycle {
        if b.offset == 0.0 {
            Cycle::segment(role, from, to, (0, 0))
        } else {
            let kink = from + (to - from) * C64::new(b.at, b.offset);
            Cycle { detour: true, ..Cycle::polyline(role, &[from, kink, to], (0, 0)) }
        }
    };
    if let Some(b) = bend {
        return Ok((build(b), b));
    }
    let others: Vec<C64> = avoid
        .iter()
        .copied()
        .filter(|p| {
            translates(*p, modulus, 2).into_iter().all(|q| (q - from).norm() > 1e-9 && (q - to).norm() > 1e-9)
        })
        .collect();
    // a divisor point close to an endpoint caps the achievable clearance
    let nearest = others
        .iter()
        .flat_map(|p| translates(*p, modulus, 2))
        .map(|q| (q - from).norm().min((q - to).norm()))
        .fold(f64::INFINITY, f64::min);
    let margin = (0.05 * (to - from).norm()).min(0.5 * nearest).max(clearance);
    let mut best: Option<(f64, Bend)> = None;
    for b in Bend::candidates() {
        let d = build(b).clearance(&others, modulus);
        if d > margin {
            return Ok((build(b), b));
        }
        if best.map_or(true, |(bd, _)| d > bd) {
            best = Some((d, b));
        }
    }
    match best {
        Some((d, b)) if d > clearance => Ok((build(b), b)),
        _ => Err(Error::ClearanceViolation { distance: best.map_or(0.0, |(d, _)| d), clearance: margin }),
    }
}

/// Straight contour of class `(r, s)` (that is `r·a + s·b`) through a base
/// point chosen to maximize clearance, sweeping the base along `sweep`.
pub(crate) fn straight_class_representative(
    role: CycleRole,
    class: (i64, i64),
    sweep: C64,
    avoid: &[C64],
    t: &TorusModulus,
    clearance: f64,
) -> Result<Cycle> {
    let v = t.b() * class.1 as f64 + class.0 as f64;
    let mut best: Option<(f64, Cycle)> = None;
    for k in 0..64 {
        let start = sweep * ((k as f64 + 0.5) / 64.0);
        let c = Cycle::segment(role, start, start + v, class);
        let d = c.clearance(avoid, Some(t));
        if best.as_ref().map_or(true, |(bd, _)| d > *bd + 1e-12) {
            best = Some((d, c));
        }
    }
    let (d, c) = best.expect("non-empty sweep");
    if d < clearance {
        return Err(Error::ClearanceViolation { distance: d, clearance });
    }
    Ok(c)
}

/// A closed vertical trajectory of the flat structure: a cylinder core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCycle {
    /// Vertices along the level curve; the last equals the first plus the lattice shift.
    pub vertices: Vec<C64>,
    pub class: (i64, i64),
    /// Horizontal flat coordinate of the level curve, relative to the base zero.
    pub level: f64,
    /// Accumulated `Im ω` along the traced curve.
    pub traced_height: f64,
}

/// Traces the level curve `Re w = level` through `seed` along `dz/ds = i/f`.
fn trace_level(diagram: &Diagram, t: &TorusModulus, seed: C64, level: f64) -> Result<SampledCycle> {
    let form = &diagram.form;
    let g = |z: C64| -> Result<f64> { Ok(diagram.flat_re(z)? - level) };
    let project = |mut z: C64| -> Result<C64> {
        for _ in 0..3 {
            let f = form.coefficient(z)?;
            z -= f.inv() * g(z)?;
        }
        Ok(z)
    };
    let vel = |z: C64| -> Result<C64> { Ok(C64::new(0.0, 1.0) / form.coefficient(z)?) };
    let mut z = project(seed)?;
    let start = z;
    let mut vertices = vec![z];
    let mut s_total = 0.0;
    for _ in 0..40_000 {
        let f = form.coefficient(z)?;
        let ds = (0.02 * f.norm()).clamp(1e-5, 0.05);
        let k1 = vel(z)?;
        let k2 = vel(z + k1 * (ds / 2.0))?;
        let k3 = vel(z + k2 * (ds / 2.0))?;
        let k4 = vel(z + k3 * ds)?;
        let next = project(z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0))?;
        s_total += ds;
        let (_, m, n) = t.reduce(next - start);
        let target = start + m as f64 + t.b() * n as f64;
        let step = next - z;
        let along = ((target - z) * step.conj()).re / step.norm_sqr();
        if s_total > 4.0 * ds && (0.0..1.0).contains(&along) && point_segment_distance(target, z, next) < 0.5 * step.norm() {
            // close exactly on the lattice translate of the start
            let f_end = form.coefficient(z)?;
            s_total -= ds;
            s_total += (f_end * (target - z)).im;
            vertices.push(target);
            return Ok(SampledCycle { vertices, class: (m, n), level, traced_height: s_total });
        }
        vertices.push(next);
        z = next;
    }
    Err(Error::QuadratureFailure("level curve did not close".into()))
}

fn thin(vertices: &[C64], max_vertices: usize) -> Vec<C64> {
    if vertices.len() <= max_vertices {
        return vertices.to_vec();
    }
    let stride = vertices.len().div_ceil(max_vertices);
    let mut out: Vec<C64> = vertices.iter().step_by(stride).copied().collect();
    let last = *vertices.last().expect("non-empty");
    if *out.last().expect("non-empty") != last {
        out.push(last);
    }
    out
}

/// Interior cylinder core for a genus-one diagram: the shortest closed level
/// curve whose homology class on the torus is nontrivial.
pub(crate) fn trace_core(diagram: &Diagram) -> Result<SampledCycle> {
    let form = &diagram.form;
    let t = *form.surface().modulus().ok_or_else(|| Error::InvalidInput("core tracing needs genus one".into()))?;
    let mut levels: Vec<f64> =
        diagram.zeros.iter().map(|z| diagram.flat_re(z.position)).collect::<Result<Vec<_>>>()?;
    levels.sort_by(f64::total_cmp);
    let divisor = divisor_points(diagram);
    for w in levels.windows(2) {
        if w[1] - w[0] < 1e-9 {
            continue;
        }
        let level = 0.5 * (w[0] + w[1]);
        let mut found: Vec<SampledCycle> = Vec::new();
        for seed in level_seeds(diagram, &t, level, &divisor)? {
            let on_existing = found.iter().any(|c| {
                c.vertices.windows(2).any(|s| {
                    translates(seed, Some(&t), 1).into_iter().any(|q| point_segment_distance(q, s[0], s[1]) < 1e-4)
                })
            });
            if on_existing {
                continue;
            }
            found.push(trace_level(diagram, &t, seed, level)?);
        }
        let mut cores: Vec<SampledCycle> = found.into_iter().filter(|c| c.class != (0, 0)).collect();
        cores.sort_by(|a, b| a.traced_height.total_cmp(&b.traced_height));
        if let Some(mut core) = cores.into_iter().next() {
            core.vertices = thin(&core.vertices, 48);
            return Ok(core);
        }
    }
    Err(Error::DegenerateSurface("no interior cylinder core found".into()))
}

fn level_seeds(diagram: &Diagram, t: &TorusModulus, level: f64, divisor: &[C64]) -> Result<Vec<C64>> {
    const LINES: usize = 12;
    const SAMPLES: usize = 128;
    let b = t.b();
    let mut seeds = Vec::new();
    let avoid = |z: C64| divisor.iter().any(|p| t.lattice_distance(z - p) < 1e-3);
    for family in 0..2 {
        for k in 0..LINES {
            let fixed = (k as f64 + 0.5) / LINES as f64;
            let at = |u: f64| if family == 0 { b * fixed + u } else { b * u + fixed };
            let mut prev: Option<(C64, f64)> = None;
            for j in 0..=SAMPLES {
                let z = at(j as f64 / SAMPLES as f64);
                if avoid(z) {
                    prev = None;
                    continue;
                }
                let v = diagram.flat_re(z)? - level;
                if let Some((zp, vp)) = prev {
                    if vp.signum() != v.signum() {
                        let (mut lo, mut hi, mut vlo) = (zp, z, vp);
                        for _ in 0..60 {
                            let mid = (lo + hi) * 0.5;
                            let vm = diagram.flat_re(mid)? - level;
                            if vm.signum() == vlo.signum() {
                                lo = mid;
                                vlo = vm;
                            } else {
                                hi = mid;
                            }
                        }
                        seeds.push((lo + hi) * 0.5);
                    }
                }
                prev = Some((z, v));
            }
        }
    }
    Ok(seeds)
}

/// Counter-clockwise small circle around zero `l`.
pub fn zero_circle(diagram: &Diagram, l: usize) -> Cycle {
    let z = diagram.zeros[l].position;
    Cycle::circle(CycleRole::ZeroCircle(l), z, small_radius(z, &divisor_points(diagram), diagram.form.surface().modulus()))
}

/// Small circles around all divisor points, straight a/b representatives and
/// the interior core (genus one).
pub fn cycle_catalog(diagram: &Diagram) -> Result<Vec<Cycle>> {
    let form = &diagram.form;
    let s = form.surface();
    let modulus = s.modulus();
    let divisor = divisor_points(diagram);
    let mut out = Vec::new();
    for (m, p) in s.points().iter().enumerate() {
        out.push(Cycle::circle(CycleRole::PoleCircle(m), *p, small_radius(*p, &divisor, modulus)));
    }
    for (l, z) in diagram.zeros.iter().enumerate() {
        out.push(Cycle::circle(CycleRole::ZeroCircle(l), z.position, small_radius(z.position, &divisor, modulus)));
    }
    if let Some(t) = modulus {
        let (a_start, b_start) = clear_base_points(t, &divisor);
        let a = Cycle::segment(CycleRole::A, a_start, a_start + 1.0, (1, 0));
        let b = Cycle::segment(CycleRole::B, b_start, b_start + t.b(), (0, 1));
        let tol = form.tolerances().clearance;
        for c in [&a, &b] {
            let d = c.clearance(&divisor, modulus);
            if d < tol {
                return Err(Error::ClearanceViolation { distance: d, clearance: tol });
            }
        }
        out.push(a);
        out.push(b);
        let core = trace_core(diagram)?;
        out.push(Cycle::polyline(CycleRole::CylinderCore(0), &core.vertices, core.class));
    }
    Ok(out)
}
