//! Mandelstam diagrams as meromorphic differentials with real residues and
//! purely imaginary periods on the sphere or a torus.

mod coords;
mod cycles;
mod jets;
mod zeros;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::settings::Tolerances;
use crate::specfun::{log_theta, theta_constants, ThetaJet, TorusModulus};

pub use coords::{forward_coordinates, CoordinateFrame, CoordinateKind, CoordinateSpec, DiagramCoordinates};
pub use cycles::{
    crossing_number, cycle_catalog, extended_gcd, integrate_form, zero_circle, Bend, Cycle, CycleRole, Piece, SampledCycle,
};
pub use jets::{distinguished_frame, Diagram, DivisorKind, DivisorPoint};
pub use zeros::{find_zeros, refine_zeros};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Marked points with real residues on the sphere (finite chart) or on the
/// torus `C/(Z + B·Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedSurface {
    modulus: Option<TorusModulus>,
    points: Vec<C64>,
    residues: Vec<f64>,
}

impl MarkedSurface {
    pub fn sphere(points: Vec<C64>, residues: Vec<f64>) -> Result<Self> {
        Self::validated(None, points, residues)
    }

    pub fn torus(modulus: TorusModulus, points: Vec<C64>, residues: Vec<f64>) -> Result<Self> {
        Self::validated(Some(modulus), points, residues)
    }

    fn validated(modulus: Option<TorusModulus>, points: Vec<C64>, residues: Vec<f64>) -> Result<Self> {
        if points.len() != residues.len() {
            return Err(Error::InvalidInput(format!(
                "{} marked points but {} residues",
                points.len(),
                residues.len()
            )));
        }
        if points.len() < 2 {
            return Err(Error::InvalidInput("at least two marked points are required".into()));
        }
        if residues.iter().any(|a| *a == 0.0 || !a.is_finite()) {
            return Err(Error::InvalidInput("residues must be finite and nonzero".into()));
        }
        if points.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("marked point"));
        }
        let total: f64 = residues.iter().sum();
        let size: f64 = residues.iter().map(|a| a.abs()).sum();
        if total.abs() > 1e-14 * size.max(1.0) {
            return Err(Error::InvalidInput(format!("residues must sum to zero, sum = {total:e}")));
        }
        let s = Self { modulus, points, residues };
        for i in 0..s.points.len() {
            for j in 0..i {
                if s.separation(s.points[i], s.points[j]) < 1e-10 {
                    return Err(Error::DegenerateSurface(format!("marked points {j} and {i} coincide")));
                }
            }
        }
        Ok(s)
    }

    pub fn genus(&self) -> usize {
        usize::from(self.modulus.is_some())
    }

    pub fn modulus(&self) -> Option<&TorusModulus> {
        self.modulus.as_ref()
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn residues(&self) -> &[f64] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of zeros of ω, `2g − 2 + n`.
    pub fn zero_count(&self) -> usize {
        2 * self.genus() + self.len() - 2
    }

    /// Circumference `2π|α|` of the end attached to marked point `m`.
    pub fn circumference(&self, m: usize) -> f64 {
        2.0 * PI * self.residues[m].abs()
    }

    /// Chart distance, modulo the lattice in genus one.
    pub fn separation(&self, a: C64, b: C64) -> f64 {
        match &self.modulus {
            Some(t) => t.lattice_distance(a - b),
            None => (a - b).norm(),
        }
    }

    pub fn with_points(&self, points: Vec<C64>) -> Result<Self> {
        Self::validated(self.modulus, points, self.residues.clone())
    }

    pub fn with_modulus(&self, modulus: TorusModulus) -> Result<Self> {
        Self::validated(Some(modulus), self.points.clone(), self.residues.clone())
    }

    pub fn with_residues(&self, residues: Vec<f64>) -> Result<Self> {
        Self::validated(self.modulus, self.points.clone(), residues)
    }
}

/// The differential ω attached to a marked surface.
///
/// Genus 0: `ω = Σ α_m dz/(z − z_m)`.
/// Genus 1: `ω = [Σ α_m (log θ₁)′(z − z_m) + c] dz` with `c` making all periods imaginary.
#[derive(Debug, Clone, PartialEq)]
pub struct MeromorphicForm {
    surface: MarkedSurface,
    constant: C64,
    theta: Option<ThetaJet>,
    tol: Tolerances,
}

impl MeromorphicForm {
    pub fn surface(&self) -> &MarkedSurface {
        &self.surface
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Normalization constant `c` (zero in genus 0).
    pub fn constant(&self) -> C64 {
        self.constant
    }

    pub fn theta_constants(&self) -> Option<&ThetaJet> {
        self.theta.as_ref()
    }

    fn check_clear(&self, z: C64) -> Result<()> {
        let d = self.surface.points.iter().map(|p| self.surface.separation(z, *p)).fold(f64::INFINITY, f64::min);
        if d < self.tol.lattice_exclusion {
            return Err(Error::ClearanceViolation { distance: d, clearance: self.tol.lattice_exclusion });
        }
        Ok(())
    }

    /// Chart coefficient `f` of ω together with `f′` and `f″`.
    pub fn jet(&self, z: C64) -> Result<[C64; 3]> {
        self.check_clear(z)?;
        let s = &self.surface;
        let mut out = [C64::new(0.0, 0.0); 3];
        match &s.modulus {
            None => {
                for (p, a) in s.points.iter().zip(&s.residues) {
                    let r = (z - p).inv();
                    out[0] += r * *a;
                    out[1] -= r * r * *a;
                    out[2] += r * r * r * (2.0 * a);
                }
            }
            Some(t) => {
                for (p, a) in s.points.iter().zip(&s.residues) {
                    let lt = log_theta(z - p, t, self.tol.series)?;
                    out[0] += lt.d1 * *a;
                    out[1] += lt.d2 * *a;
                    out[2] += lt.d3 * *a;
                }
                out[0] += self.constant;
            }
        }
        Ok(out)
    }

    pub fn coefficient(&self, z: C64) -> Result<C64> {
        Ok(self.jet(z)?[0])
    }

    /// A branch of the primitive `F` with `F′ = f`.  Real part is single valued.
    pub fn primitive(&self, z: C64) -> Result<C64> {
        self.check_clear(z)?;
        let s = &self.surface;
        match &s.modulus {
            None => Ok(s.points.iter().zip(&s.residues).map(|(p, a)| (z - p).ln() * *a).sum()),
            Some(t) => {
                let mut acc = self.constant * z;
                for (p, a) in s.points.iter().zip(&s.residues) {
                    acc += log_theta(z - p, t, self.tol.series)?.log * *a;
                }
                Ok(acc)
            }
        }
    }

    /// `Re F(z)`, the horizontal flat coordinate up to an additive constant.
    pub fn primitive_re(&self, z: C64) -> Result<f64> {
        Ok(self.primitive(z)?.re)
    }

    /// Regular part of `F` at pole `m`: `lim_{z→z_m} F(z) − α_m log(z − z_m)`.
    pub fn primitive_regular_part(&self, m: usize) -> Result<C64> {
        let s = &self.surface;
        let zp = s.points[m];
        match &s.modulus {
            None => Ok(s
                .points
                .iter()
                .zip(&s.residues)
                .enumerate()
                .filter(|(j, _)| *j != m)
                .map(|(_, (p, a))| (zp - p).ln() * *a)
                .sum()),
            Some(t) => {
                let th = self.theta.as_ref().expect("genus one form carries theta constants");
                let mut acc = self.constant * zp + th.d1.ln() * s.residues[m];
                for (j, (p, a)) in s.points.iter().zip(&s.residues).enumerate() {
                    if j != m {
                        acc += log_theta(zp - p, t, self.tol.series)?.log * *a;
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// Chooses the midpoint of the widest gap among values taken modulo 1.
pub(crate) fn widest_gap_midpoint(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.5;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.rem_euclid(1.0)).collect();
    v.sort_by(f64::total_cmp);
    let mut best = (v[0] + 1.0 - v[v.len() - 1], v[v.len() - 1]);
    for w in v.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], w[0]);
        }
    }
    (best.1 + best.0 / 2.0).rem_euclid(1.0)
}

/// Lattice coordinates `(s, t)` with `z = s + t·B`.
pub(crate) fn lattice_coords(t: &TorusModulus, z: C64) -> (f64, f64) {
    let tt = z.im / t.b().im;
    (z.re - tt * t.b().re, tt)
}

/// Straight a- and b-cycle base points clearing the given points.
pub(crate) fn clear_base_points(t: &TorusModulus, avoid: &[C64]) -> (C64, C64) {
    let (ss, ts): (Vec<f64>, Vec<f64>) = avoid.iter().map(|z| lattice_coords(t, *z)).unzip();
    let a_start = t.b() * widest_gap_midpoint(&ts);
    let b_start = C64::new(widest_gap_midpoint(&ss), 0.0);
    (a_start, b_start)
}

/// Builds the unique differential with the prescribed residues and purely
/// imaginary periods.
pub fn build_form(surface: MarkedSurface, tol: &Tolerances) -> Result<MeromorphicForm> {
    tol.validate()?;
    let Some(t) = surface.modulus else {
        return Ok(MeromorphicForm { surface, constant: C64::new(0.0, 0.0), theta: None, tol: *tol });
    };
    if t.b().im < tol.b_min {
        return Err(Error::ModulusOutOfDomain { im_b: t.b().im, min: tol.b_min });
    }
    let theta = theta_constants(&t)?;
    let third_kind = MeromorphicForm { surface, constant: C64::new(0.0, 0.0), theta: Some(theta), tol: *tol };
    let (a_start, b_start) = clear_base_points(&t, third_kind.surface.points());
    let f = |z: C64| third_kind.coefficient(z).unwrap_or(C64::new(f64::NAN, f64::NAN));
    let a0 = quad::segment(f, a_start, a_start + 1.0, tol.quad)?;
    let c0 = quad::segment(f, b_start, b_start + t.b(), tol.quad)?;
    let re_c = -a0.re;
    let im_c = (c0.re + re_c * t.b().re) / t.b().im;
    Ok(MeromorphicForm { constant: C64::new(re_c, im_c), ..third_kind })
}

/// Closed form of the genus-one constant, `c = −2πi Σ α_m Im z_m / Im B`.
pub fn genus_one_constant(surface: &MarkedSurface) -> Option<C64> {
    let t = surface.modulus?;
    let k: f64 = surface.points.iter().zip(&surface.residues).map(|(p, a)| a * p.im).sum();
    Some(-2.0 * PI * I * k / t.b().im)
}
