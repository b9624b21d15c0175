use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::cycles::{divisor_points, relative_path, small_radius, CycleRole};
use super::{find_zeros, refine_zeros, MeromorphicForm};
use crate::error::{Error, Result};
use crate::quad;

/// Zero or pole of ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivisorKind {
    Zero,
    Pole,
}

/// A divisor point with its distinguished-parameter jet `λ = dζ/dz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisorPoint {
    pub kind: DivisorKind,
    pub position: C64,
    /// Residue `α` (poles only).
    pub residue: Option<f64>,
    pub jet: C64,
    /// Zeros: `w(R)` relative to the base zero.  Poles: `h* = lim w(z) − α log(z − z_p)`.
    pub flat_value: C64,
}

impl DivisorPoint {
    /// Circumference `2π|α|` of the end at a pole.
    pub fn circumference(&self) -> Option<f64> {
        self.residue.map(|a| 2.0 * std::f64::consts::PI * a.abs())
    }
}

/// A form together with its zeros, poles and distinguished jets.  The flat
/// coordinate `w` is normalized to vanish at the base zero, the zero with the
/// smallest horizontal coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagram {
    pub form: MeromorphicForm,
    pub zeros: Vec<DivisorPoint>,
    pub poles: Vec<DivisorPoint>,
    base: C64,
}

impl Diagram {
    /// Locates zeros from scratch and fills every jet.  With `cross_check`
    /// the pole constants are re-derived from circle means of quadrature values.
    pub fn new(form: MeromorphicForm, cross_check: bool) -> Result<Self> {
        let zeros = find_zeros(&form)?;
        Self::assemble(form, &zeros, cross_check, true)
    }

    /// Refines zeros from previous positions, keeping their order.
    pub fn tracking(form: MeromorphicForm, previous: &[C64]) -> Result<Self> {
        let zeros = refine_zeros(&form, previous)?;
        Self::assemble(form, &zeros, false, false)
    }

    fn assemble(form: MeromorphicForm, zeros: &[C64], cross_check: bool, flat_values: bool) -> Result<Self> {
        let base = match zeros.first() {
            Some(z) => form.primitive(*z)?,
            None => C64::new(0.0, 0.0),
        };
        let mut d = Diagram { form, zeros: Vec::new(), poles: Vec::new(), base };
        d.zeros = zeros
            .iter()
            .map(|z| DivisorPoint {
                kind: DivisorKind::Zero,
                position: *z,
                residue: None,
                jet: C64::new(0.0, 0.0),
                flat_value: C64::new(0.0, 0.0),
            })
            .collect();
        let s = d.form.surface();
        d.poles = s
            .points()
            .iter()
            .zip(s.residues())
            .map(|(p, a)| DivisorPoint {
                kind: DivisorKind::Pole,
                position: *p,
                residue: Some(*a),
                jet: C64::new(0.0, 0.0),
                flat_value: C64::new(0.0, 0.0),
            })
            .collect();
        let zeros_filled =
            d.zeros.iter().map(|z| distinguished_frame(&d, z, flat_values)).collect::<Result<Vec<_>>>()?;
        let poles_filled = d.poles.iter().map(|p| distinguished_frame(&d, p, cross_check)).collect::<Result<Vec<_>>>()?;
        d.zeros = zeros_filled;
        d.poles = poles_filled;
        Ok(d)
    }

    /// Position of the base zero, if there are zeros.
    pub fn base_zero(&self) -> Option<C64> {
        self.zeros.first().map(|z| z.position)
    }

    /// `F(R₀)`, the primitive at the base zero.
    pub fn base_primitive(&self) -> C64 {
        self.base
    }

    /// `Re w(z)`, single valued on the surface minus the poles.
    pub fn flat_re(&self, z: C64) -> Result<f64> {
        Ok(self.form.primitive_re(z)? - self.base.re)
    }

    /// Interaction times `Re w(R_l)` of the zeros, in zero order.
    pub fn interaction_times(&self) -> Result<Vec<f64>> {
        self.zeros.iter().map(|z| self.flat_re(z.position)).collect()
    }
}

/// Fills the distinguished jet of a zero or pole.
///
/// Zeros: `λ = √(f′(R)/2)` (principal branch); with `extra` the flat value is
/// integrated along a path from the base zero.  Poles: `h*` from the regular
/// part of the primitive and `λ = exp(h*/α)`, so that `ζ = exp(w/α)` vanishes
/// at the pole for either sign of `α`; with `extra` the real part of `h*` is
/// re-derived from circle means of quadrature values of `Re w` at two radii.
pub fn distinguished_frame(diagram: &Diagram, d: &DivisorPoint, extra: bool) -> Result<DivisorPoint> {
    let form = &diagram.form;
    let s = form.surface();
    match d.kind {
        DivisorKind::Zero => {
            let [_, df, _] = form.jet(d.position)?;
            let jet = (df / 2.0).sqrt();
            if jet.norm() == 0.0 || !jet.re.is_finite() {
                return Err(Error::NonSimpleZero { distance: 0.0 });
            }
            let mut flat_value = C64::new(0.0, 0.0);
            if extra {
                if let Some(base) = diagram.base_zero() {
                    if (base - d.position).norm() > 0.0 {
                        let divisor = divisor_points(diagram);
                        let (path, _) = relative_path(
                            CycleRole::RelativePath(0),
                            base,
                            d.position,
                            &divisor,
                            s.modulus(),
                            form.tolerances().clearance,
                            None,
                        )?;
                        flat_value = path.integrate(|z| form.coefficient(z), form.tolerances().quad)?;
                    }
                }
            }
            Ok(DivisorPoint { jet, flat_value, ..*d })
        }
        DivisorKind::Pole => {
            let m = s
                .points()
                .iter()
                .position(|p| *p == d.position)
                .ok_or_else(|| Error::InvalidInput("pole is not a marked point".into()))?;
            let alpha = s.residues()[m];
            let h_star = form.primitive_regular_part(m)? - diagram.base;
            if extra {
                check_pole_constant(diagram, d.position, alpha, h_star.re)?;
            }
            let jet = (h_star / alpha).exp();
            if !(jet.norm().is_finite() && jet.norm() > 0.0) {
                return Err(Error::NonFinite("pole jet"));
            }
            Ok(DivisorPoint { jet, flat_value: h_star, ..*d })
        }
    }
}

fn check_pole_constant(diagram: &Diagram, zp: C64, alpha: f64, expected: f64) -> Result<()> {
    let form = &diagram.form;
    let s = form.surface();
    let divisor = divisor_points(diagram);
    let r0 = small_radius(zp, &divisor, s.modulus());
    // reference point for Re w: the base zero, or a point on the outer circle
    let reference = diagram.base_zero().unwrap_or(zp + r0 * 2.0);
    let reference_value = diagram.flat_re(reference)?;
    let tol = form.tolerances();
    let re_w = |z: C64| -> Result<f64> {
        let v = quad::segment(
            |x| form.coefficient(x).unwrap_or(C64::new(f64::NAN, f64::NAN)),
            reference,
            z,
            tol.quad,
        )?;
        Ok(reference_value + v.re)
    };
    let mut estimates = Vec::new();
    for radius in [r0, r0 / 2.0] {
        let n = 32;
        let mut mean = 0.0;
        for k in 0..n {
            let z = zp + C64::from_polar(radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64);
            mean += re_w(z)? - alpha * radius.ln();
        }
        estimates.push(mean / n as f64);
    }
    let spread = estimates.iter().map(|e| (e - expected).abs()).fold(0.0, f64::max) / expected.abs().max(1.0);
    if spread > tol.jet {
        return Err(Error::JetUnstable { spread, tol: tol.jet });
    }
    Ok(())
}
