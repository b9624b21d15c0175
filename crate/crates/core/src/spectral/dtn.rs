//! Dirichlet-to-Neumann operator of the model surface: an infinite cylinder
//! of circumference `a` cut along the two circles `x = ±R`.
//!
//! Fourier mode `ℓ` in the circle variable reduces the operator to a 2×2
//! block acting on the traces at `x = −R` and `x = +R`. The exterior
//! half-cylinders contribute the decaying solution `e^{−κ|x|}`, i.e. `κ` on the
//! diagonal, and the interior cylinder `[−R, R]` contributes its own
//! Dirichlet-to-Neumann matrix `κ [[coth 2κR, −csch 2κR], [−csch 2κR, coth 2κR]]`,
//! with `κ = √((2πℓ/a)² − μ²)`. The block is diagonal in the basis `(1, 1)`,
//! `(1, −1)` with eigenvalues `κ(1 + tanh κR)` and `κ(1 + coth κR)`.
//!
//! The zeta-regularized determinant with the zero mode removed is split into
//! the divergent leading part `∏_{ℓ≠0} (2k_ℓ)²` (handled by
//! [`regularized_product`]) and the exponentially convergent correction
//! `∏_{ℓ≥1} c_ℓ²` with `c_ℓ = (1 + tanh k_ℓR)(1 + coth k_ℓR)/4 = 1/(1 − e^{−4k_ℓR})`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::regularized_product;

/// One Fourier block of the model operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtnBlock {
    pub mode: usize,
    /// `κ_ℓ(μ) ≥ 0`; real because `μ² ≤ 0`.
    pub kappa: f64,
    /// Block acting on the traces `(f(−R), f(R))`.
    pub matrix: [[f64; 2]; 2],
    /// Eigenvalues on `(1, 1)` and `(1, −1)`, in that order.
    pub eigenvalues: [f64; 2],
}

fn check_geometry(a: f64, r: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0 && r.is_finite() && r > 0.0) {
        return Err(Error::InvalidInput(format!("circumference and half-length must be positive, got a = {a}, R = {r}")));
    }
    Ok(())
}

fn mode_wavenumber(a: f64, mode: usize) -> f64 {
    2.0 * PI * mode as f64 / a
}

/// `κ coth(κL)`, continuous at `κ = 0` where it equals `1/L`.
fn kappa_coth(kappa: f64, len: f64) -> f64 {
    let x = kappa * len;
    if x < 1e-6 {
        (1.0 + x * x / 3.0) / len
    } else {
        kappa / x.tanh()
    }
}

/// `κ csch(κL)`, continuous at `κ = 0` where it equals `1/L`.
fn kappa_csch(kappa: f64, len: f64) -> f64 {
    let x = kappa * len;
    if x < 1e-6 {
        (1.0 - x * x / 6.0) / len
    } else {
        kappa / x.sinh()
    }
}

/// Eigenvalues `κ(1 + tanh κR)` and `κ(1 + coth κR)` of a block.
fn block_eigenvalues(kappa: f64, r: f64) -> [f64; 2] {
    [kappa * (1.0 + (kappa * r).tanh()), kappa + kappa_coth(kappa, r)]
}

/// Blocks `ℓ = 0..=l_max` at spectral parameter `μ² ≤ 0`.
pub fn dtn_blocks(a: f64, r: f64, mu_sq: f64, l_max: usize) -> Result<Vec<DtnBlock>> {
    check_geometry(a, r)?;
    if !(mu_sq.is_finite() && mu_sq <= 0.0) {
        return Err(Error::InvalidInput(format!("the model needs mu^2 <= 0, got {mu_sq}")));
    }
    Ok((0..=l_max)
        .map(|mode| {
            let k = mode_wavenumber(a, mode);
            let kappa = (k * k - mu_sq).sqrt();
            let diag = kappa + kappa_coth(kappa, 2.0 * r);
            let off = -kappa_csch(kappa, 2.0 * r);
            DtnBlock { mode, kappa, matrix: [[diag, off], [off, diag]], eigenvalues: block_eigenvalues(kappa, r) }
        })
        .collect())
}

/// Lowest eigenvalue `λ₁(μ) = s(1 + tanh sR)` at `μ = i·s`, `s > 0`.
pub fn lowest_eigenvalue(a: f64, r: f64, s: f64) -> Result<f64> {
    check_geometry(a, r)?;
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::InvalidInput(format!("expected mu = i*s with s >= 0, got s = {s}")));
    }
    Ok(block_eigenvalues(s, r)[0])
}

/// `ln c_ℓ` for `x = k_ℓR`.
fn log_correction(x: f64) -> f64 {
    -(-(-4.0 * x).exp()).ln_1p()
}

/// `det* 𝒩(0)`: zeta-regularized determinant with the zero eigenvalue excluded.
pub fn dtn_det_star(a: f64, r: f64) -> Result<f64> {
    check_geometry(a, r)?;
    // every ℓ ≥ 1 appears for ±ℓ with eigenvalue product (2k_ℓ)² c_ℓ
    let leading = regularized_product(4.0 * PI / a)?.powi(4);
    let mut log_corr = 0.0;
    for mode in 1.. {
        let term = log_correction(mode_wavenumber(a, mode) * r);
        log_corr += 2.0 * term;
        if term < 1e-18 {
            break;
        }
    }
    Ok(leading * log_corr.exp() / r)
}

/// `det 𝒩(μ²) / (−iμ · det* 𝒩(0))` at `μ = i·s`, `s > 0`, as a convergent
/// product of eigenvalue ratios.
///
/// The factor `∏_{ℓ≥1} (κ_ℓ/k_ℓ)⁴ = (sinh πx / πx)²` with `x = sa/2π` is summed
/// in closed form; the remaining hyperbolic ratios converge exponentially.
pub fn dtn_det_ratio(a: f64, r: f64, s: f64) -> Result<f64> {
    check_geometry(a, r)?;
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidInput(format!("expected mu = i*s with s > 0, got s = {s}")));
    }
    let [lo, hi] = block_eigenvalues(s, r);
    let mut log_ratio = (lo * hi * r / s).ln();
    let x = s * a / (2.0 * PI);
    let px = PI * x;
    log_ratio += 2.0 * if px < 1e-4 { px * px / 6.0 } else { (px.sinh() / px).ln() };
    for mode in 1.. {
        let k = mode_wavenumber(a, mode);
        let kappa = (k * k + s * s).sqrt();
        // λ⁺λ⁻ = κ²(1 + tanh κR)(1 + coth κR) = 4κ² c(κR)
        let term = 2.0 * (log_correction(kappa * r) - log_correction(k * r));
        log_ratio += term;
        if term.abs() < 1e-18 && log_correction(k * r) < 1e-18 {
            break;
        }
    }
    Ok(log_ratio.exp())
}

/// `det 𝒩(μ²)` at `μ = i·s` in the ratio form, i.e. `s · det* 𝒩(0) · ratio`.
pub fn dtn_det(a: f64, r: f64, s: f64) -> Result<f64> {
    Ok(s * dtn_det_star(a, r)? * dtn_det_ratio(a, r, s)?)
}

/// One row of the `μ`-grid table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtnRow {
    /// `μ = i·s`.
    pub s: f64,
    pub lambda1: f64,
    /// `λ₁(μ)/(−iμ)`.
    pub lambda1_over_s: f64,
    /// `det 𝒩(μ²) / (−iμ)`.
    pub det_over_s: f64,
}

/// Tabulates `λ₁` and the reduced determinant over imaginary `μ = i·s`.
pub fn dtn_table(a: f64, r: f64, grid: &[f64]) -> Result<Vec<DtnRow>> {
    let det_star = dtn_det_star(a, r)?;
    grid.iter()
        .map(|&s| {
            let lambda1 = lowest_eigenvalue(a, r, s)?;
            Ok(DtnRow { s, lambda1, lambda1_over_s: lambda1 / s, det_over_s: det_star * dtn_det_ratio(a, r, s)? })
        })
        .collect()
}
