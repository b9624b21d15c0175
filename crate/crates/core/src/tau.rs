//! Bergman tau function of genus-0 and genus-1 diagrams and the determinant
//! `det Im B · |τ|²` (up to a moduli-independent constant).

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::weierstrass_with;
use crate::surface::{Diagram, MeromorphicForm};

/// Tau-function evaluation of one diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub tau12: C64,
    /// `|τ|² = |τ¹²|^{1/6}`.
    pub abs_tau_sq: f64,
    /// `Im B` in genus one, `1` in genus zero.
    pub det_im_b: f64,
    pub determinant_up_to_c: f64,
    /// Relative spread of the genus-zero evaluand over the sample points.
    pub constancy_spread: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

/// Sampling controls for the genus-zero evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for TauOptions {
    fn default() -> Self {
        Self { samples: 24, seed: 7 }
    }
}

/// Chart coefficient of the canonical bidifferential `W(P, Q)`.
pub fn bidifferential_w(form: &MeromorphicForm, p: C64, q: C64) -> Result<C64> {
    let s = form.surface();
    if s.separation(p, q) < form.tolerances().lattice_exclusion {
        return Err(Error::CoincidentPoints);
    }
    match s.modulus() {
        None => Ok((p - q).powi(-2)),
        Some(t) => {
            let th = form.theta_constants().expect("genus one form carries theta constants");
            // ℘(u) − (4πi/3) ∂_B log θ₁′(0) with ∂_B log θ₁′(0) = θ₁‴(0)/(4πi θ₁′(0))
            let w = weierstrass_with(p - q, t, form.tolerances().lattice_exclusion)
                .map_err(|_| Error::CoincidentPoints)?;
            Ok(w.p - th.d3 / (th.d1 * 3.0))
        }
    }
}

/// `W(D, Q)` in the distinguished parameter at the divisor point `D`.
fn w_at_divisor(form: &MeromorphicForm, position: C64, jet: C64, q: C64) -> Result<C64> {
    Ok(bidifferential_w(form, position, q)? / jet)
}

/// The genus-zero evaluand at one sample point `Q`.
pub fn tau12_genus0_at(diagram: &Diagram, q: C64) -> Result<C64> {
    let f = diagram.form.coefficient(q)?;
    let mut v = (f * f).inv();
    for p in &diagram.poles {
        v *= w_at_divisor(&diagram.form, p.position, p.jet, q)?;
    }
    for r in &diagram.zeros {
        v /= w_at_divisor(&diagram.form, r.position, r.jet, q)?;
    }
    Ok(v)
}

/// `τ¹²` of a genus-zero diagram: mean of the evaluand over seeded sample
/// points and its relative spread.
pub fn tau12_genus0(diagram: &Diagram, opts: &TauOptions) -> Result<(C64, f64)> {
    if diagram.form.surface().genus() != 0 {
        return Err(Error::InvalidInput("tau12_genus0 needs a genus-zero diagram".into()));
    }
    let mut divisor: Vec<C64> = diagram.poles.iter().map(|p| p.position).collect();
    divisor.extend(diagram.zeros.iter().map(|z| z.position));
    let center = divisor.iter().sum::<C64>() / divisor.len() as f64;
    let extent = divisor.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let mut min_sep = f64::INFINITY;
    for i in 0..divisor.len() {
        for j in 0..i {
            min_sep = min_sep.min((divisor[i] - divisor[j]).norm());
        }
    }
    let keep_out = 0.1 * min_sep.min(1.0);
    let radius = 1.0 + 2.0 * extent;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut values = Vec::with_capacity(opts.samples);
    while values.len() < opts.samples {
        let r = radius * rng.gen::<f64>().sqrt();
        let q = center + C64::from_polar(r, 2.0 * std::f64::consts::PI * rng.gen::<f64>());
        if divisor.iter().any(|d| (q - d).norm() < keep_out) {
            continue;
        }
        values.push(tau12_genus0_at(diagram, q)?);
    }
    let mean = values.iter().sum::<C64>() / values.len() as f64;
    let spread = values.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max) / mean.norm();
    if !spread.is_finite() {
        return Err(Error::NonFinite("tau evaluand"));
    }
    Ok((mean, spread))
}

/// Closed form of the genus-zero `τ¹²`: the evaluand's limit as `Q → ∞`,
/// `∏λ_R / (c² ∏λ_P)` with `c = Σ α_m z_m`.
pub fn tau12_genus0_closed(diagram: &Diagram) -> Result<C64> {
    let s = diagram.form.surface();
    let c: C64 = s.points().iter().zip(s.residues()).map(|(p, a)| p * *a).sum();
    let num: C64 = diagram.zeros.iter().map(|z| z.jet).product();
    let den: C64 = diagram.poles.iter().map(|p| p.jet).product();
    Ok(num / (c * c * den))
}

/// `τ¹² = θ₁′(0|B)⁸ · ∏_P v(P) / ∏_R v(R)` with `v(D) = 1/λ_D`.
pub fn tau12_genus1(diagram: &Diagram) -> Result<C64> {
    let th = diagram
        .form
        .theta_constants()
        .ok_or_else(|| Error::InvalidInput("tau12_genus1 needs a genus-one diagram".into()))?;
    let num: C64 = diagram.zeros.iter().map(|z| z.jet).product();
    let den: C64 = diagram.poles.iter().map(|p| p.jet).product();
    Ok(th.d1.powi(8) * num / den)
}

/// `log |τ|²`, using the closed forms in both genera.
pub fn log_abs_tau_sq(diagram: &Diagram) -> Result<f64> {
    let t12 = match diagram.form.surface().genus() {
        0 => tau12_genus0_closed(diagram)?,
        _ => tau12_genus1(diagram)?,
    };
    let v = t12.norm().ln() / 6.0;
    if !v.is_finite() {
        return Err(Error::NonFinite("log |tau|^2"));
    }
    Ok(v)
}

/// Assembles the determinant report; genus zero is evaluated at sample points
/// and rejected if the evaluand is not constant to the configured tolerance.
pub fn determinant_up_to_c(diagram: &Diagram, opts: &TauOptions) -> Result<TauReport> {
    let s = diagram.form.surface();
    let (tau12, spread, det_im_b) = match s.modulus() {
        None => {
            let (mean, spread) = tau12_genus0(diagram, opts)?;
            let tol = diagram.form.tolerances().constancy;
            if spread > tol {
                return Err(Error::ConstancyViolation { spread, tol });
            }
            (mean, Some(spread), 1.0)
        }
        Some(t) => (tau12_genus1(diagram)?, None, t.b().im),
    };
    let abs_tau_sq = tau12.norm().powf(1.0 / 6.0);
    if !(abs_tau_sq.is_finite() && abs_tau_sq > 0.0) {
        return Err(Error::NonFinite("|tau|^2"));
    }
    Ok(TauReport {
        tau12,
        abs_tau_sq,
        det_im_b,
        determinant_up_to_c: det_im_b * abs_tau_sq,
        constancy_spread: spread,
        samples: if s.genus() == 0 { opts.samples } else { 0 },
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests;
