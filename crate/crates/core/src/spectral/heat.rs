//! Heat kernels of the infinite flat cylinder and of the flat cone of total
//! angle 4π, and the small-time constant of the relative heat trace.

use std::f64::consts::PI;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidInput(format!("heat kernels need t > 0, got {t}")));
    }
    Ok(())
}

/// Heat kernel of the cylinder `ℝ × (ℝ / aℤ)`.
///
/// The circle factor is summed as a Fourier series when `4π²t/a² ≥ 1` and by
/// images otherwise; both are truncated once terms drop below machine precision.
pub fn heat_kernel_cylinder(x: f64, y: f64, xp: f64, yp: f64, t: f64, a: f64) -> Result<f64> {
    check_time(t)?;
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidInput(format!("circumference must be positive, got {a}")));
    }
    let dx = x - xp;
    let axial = (-dx * dx / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
    let dy = (y - yp).rem_euclid(a);
    let decay = 4.0 * PI * PI * t / (a * a);
    let circle = if decay >= 1.0 {
        let mut sum = 1.0;
        for n in 1.. {
            let nf = n as f64;
            let weight = (-decay * nf * nf).exp();
            sum += 2.0 * weight * (2.0 * PI * nf * dy / a).cos();
            if weight < 1e-18 {
                break;
            }
        }
        sum / a
    } else {
        // dy ∈ [0, a): images m = 0, −1 are nearest, others decay outward
        let gauss = |m: i64| {
            let d = dy + m as f64 * a;
            (-d * d / (4.0 * t)).exp()
        };
        let mut sum = gauss(0) + gauss(-1);
        for m in 1.. {
            let next = gauss(m) + gauss(-1 - m);
            sum += next;
            if next < 1e-18 * sum {
                break;
            }
        }
        sum / (4.0 * PI * t).sqrt()
    };
    Ok(axial * circle)
}

/// Heat kernel of the flat cone of angle 4π (the two-sheeted cover of the
/// plane branched at the origin), in polar coordinates with `θ ∈ ℝ / 4πℤ`.
///
/// `K = G(p, p′; t) · ½ erfc(−√(rr′/t) · cos(Δθ/2))` where `G` is the planar
/// Gaussian of the projected points.
pub fn cone_kernel(r: f64, theta: f64, rp: f64, thetap: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(r >= 0.0 && rp >= 0.0) {
        return Err(Error::InvalidInput("cone radii must be nonnegative".into()));
    }
    let dtheta = theta - thetap;
    let dist_sq = r * r + rp * rp - 2.0 * r * rp * dtheta.cos();
    let planar = (-dist_sq.max(0.0) / (4.0 * t)).exp() / (4.0 * PI * t);
    Ok(planar * 0.5 * erfc(-(r * rp / t).sqrt() * (0.5 * dtheta).cos()))
}

/// `K(p, p; t) − 1/(4πt)` on the 4π-cone at distance `r` from the tip.
pub fn cone_diagonal_excess(r: f64, t: f64) -> f64 {
    -0.5 * erfc(r / t.sqrt()) / (4.0 * PI * t)
}

/// `∫_cone [K(p, p; t) − 1/(4πt)] dA` by adaptive radial quadrature.
pub fn cone_defect(t: f64) -> Result<f64> {
    check_time(t)?;
    // the excess is below 1e−45 relative beyond 10√t
    let r_max = 12.0 * t.sqrt();
    let radial = quad::integrate(
        |r| num_complex::Complex64::new(cone_diagonal_excess(r, t) * r, 0.0),
        0.0,
        r_max,
        1e-17,
        1e-14,
    )?;
    Ok(4.0 * PI * radial.re)
}

/// Constant term of the relative heat trace: each of the `2K` extra cone
/// points of a diagram with `K` interior slits contributes [`cone_defect`].
pub fn relative_trace_constant(interior_slits: usize) -> Result<f64> {
    Ok(2.0 * interior_slits as f64 * cone_defect(1.0)?)
}

/// Cylinder-kernel property diagnostics at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderCheck {
    pub t: f64,
    pub a: f64,
    /// `|∫∫ H dA − 1|`.
    pub mass_error: f64,
    /// `|H(y′ + a) − H(y′)|`.
    pub periodicity_error: f64,
    /// Minimum sampled value.
    pub min_value: f64,
}

/// Trapezoid nodes and weights for the periodic circle `[0, a)`.
fn circle_nodes(a: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = a / n as f64;
    (0..n).map(move |j| (j as f64 * h, h))
}

/// Trapezoid nodes and weights on `[center − half, center + half]`.
fn line_nodes(center: f64, half: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = 2.0 * half / n as f64;
    (0..=n).map(move |j| (center - half + j as f64 * h, h))
}

/// Total mass `∫_ℝ ∫_0^a H(x, y, x′, y′, t) dy′ dx′`.
pub fn cylinder_mass(x: f64, y: f64, t: f64, a: f64) -> Result<f64> {
    let mut mass = 0.0;
    for (xp, wx) in line_nodes(x, 14.0 * t.sqrt(), 400) {
        for (yp, wy) in circle_nodes(a, 256) {
            mass += wx * wy * heat_kernel_cylinder(x, y, xp, yp, t, a)?;
        }
    }
    Ok(mass)
}

/// `∫ H(p, q; t) H(q, p′; s) dq` by product trapezoid quadrature.
pub fn cylinder_convolution(p: (f64, f64), pp: (f64, f64), t: f64, s: f64, a: f64) -> Result<f64> {
    let center = 0.5 * (p.0 + pp.0);
    let mut total = 0.0;
    let half = 0.5 * (p.0 - pp.0).abs() + 14.0 * t.max(s).sqrt();
    for (qx, wx) in line_nodes(center, half, 800) {
        for (qy, wy) in circle_nodes(a, 256) {
            total += wx * wy * heat_kernel_cylinder(p.0, p.1, qx, qy, t, a)? * heat_kernel_cylinder(qx, qy, pp.0, pp.1, s, a)?;
        }
    }
    Ok(total)
}

/// Mass, periodicity and positivity diagnostics for the cylinder kernel.
pub fn cylinder_check(t: f64, a: f64) -> Result<CylinderCheck> {
    let (x, y) = (0.3, 0.2 * a);
    let mass_error = (cylinder_mass(x, y, t, a)? - 1.0).abs();
    let mut periodicity_error = 0.0f64;
    let mut min_value = f64::INFINITY;
    for j in 0..16 {
        let yp = a * j as f64 / 16.0;
        let xp = x + 0.25 * j as f64;
        let h = heat_kernel_cylinder(x, y, xp, yp, t, a)?;
        periodicity_error = periodicity_error.max((heat_kernel_cylinder(x, y, xp, yp + a, t, a)? - h).abs());
        min_value = min_value.min(h);
    }
    Ok(CylinderCheck { t, a, mass_error, periodicity_error, min_value })
}
