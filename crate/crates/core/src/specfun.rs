//! Jacobi θ₁, Weierstrass functions on the lattice `Z + B·Z`, and the
//! zeta-regularized product `∏_{ℓ≥1} cℓ`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const MAX_TERMS: usize = 400;

/// Period ratio `B` of the lattice `Z + B·Z`, with `Im B` bounded below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusModulus {
    b: C64,
}

impl TorusModulus {
    pub const DEFAULT_MIN_IM: f64 = 0.05;

    pub fn new(b: C64) -> Result<Self> {
        Self::with_min(b, Self::DEFAULT_MIN_IM)
    }

    pub fn with_min(b: C64, min_im: f64) -> Result<Self> {
        if !(b.re.is_finite() && b.im.is_finite()) {
            return Err(Error::NonFinite("modulus"));
        }
        if b.im < min_im {
            return Err(Error::ModulusOutOfDomain { im_b: b.im, min: min_im });
        }
        Ok(Self { b })
    }

    pub fn b(&self) -> C64 {
        self.b
    }

    /// Nome `q = exp(iπB)`.
    pub fn q(&self) -> C64 {
        (I * PI * self.b).exp()
    }

    /// Splits `u = u0 + m + n·B` with `u0` in the parallelogram centred at the origin.
    pub fn reduce(&self, u: C64) -> (C64, i64, i64) {
        let n = (u.im / self.b.im).round();
        let v = u - self.b * n;
        let m = v.re.round();
        (v - m, m as i64, n as i64)
    }

    /// Distance from `u` to the nearest lattice point.
    pub fn lattice_distance(&self, u: C64) -> f64 {
        let (u0, _, _) = self.reduce(u);
        let mut best = f64::INFINITY;
        for dm in -1..=1 {
            for dn in -1..=1 {
                best = best.min((u0 - (dm as f64) - self.b * dn as f64).norm());
            }
        }
        best
    }
}

/// `θ₁` at a point together with its first three `z`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaJet {
    pub value: C64,
    pub d1: C64,
    pub d2: C64,
    pub d3: C64,
    /// `∂_B log θ₁′(0|B)`; only populated by [`theta_constants`].
    pub dlog_d1_db: C64,
}

/// `℘`, `℘′` and `ζ_W` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeierstrassValues {
    pub p: C64,
    pub dp: C64,
    pub zeta: C64,
}

/// All four derivatives `θ₁^{(k)}(z|B)`, `k = 0..3`, from the q-series
/// `θ₁ = 2 Σ (−1)ⁿ q^{(n+½)²} sin((2n+1)πz)`.
pub fn theta1_all(z: C64, b: &TorusModulus, rel_tol: f64) -> Result<[C64; 4]> {
    let mut acc = [C64::new(0.0, 0.0); 4];
    let mut scale = 0.0;
    let mut quiet = 0;
    for n in 0..MAX_TERMS {
        let nf = n as f64 + 0.5;
        let k = 2.0 * nf * PI;
        let coef = (I * PI * b.b() * nf * nf).exp() * if n % 2 == 0 { 2.0 } else { -2.0 };
        let (s, c) = ((k * z).sin(), (k * z).cos());
        let terms = [coef * s, coef * c * k, -coef * s * (k * k), -coef * c * (k * k * k)];
        let bound = coef.norm() * (k * z.im).cosh() * (1.0 + k).powi(3);
        for (a, t) in acc.iter_mut().zip(terms) {
            *a += t;
        }
        scale += bound;
        if !scale.is_finite() {
            return Err(Error::NonFinite("theta series"));
        }
        if bound < rel_tol * scale {
            quiet += 1;
            if quiet == 2 {
                return Ok(acc);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonFinite("theta series did not settle"))
}

/// The `order`-th `z`-derivative of `θ₁(z|B)`.
pub fn theta1(z: C64, b: &TorusModulus, order: usize) -> Result<C64> {
    if order > 3 {
        return Err(Error::InvalidInput(format!("theta1 derivative order {order} > 3")));
    }
    Ok(theta1_all(z, b, 1e-15)?[order])
}

/// `θ₁′(0)`, `θ₁‴(0)` and `∂_B log θ₁′(0|B)` from the term-wise differentiated series.
pub fn theta_constants(b: &TorusModulus) -> Result<ThetaJet> {
    let mut d1 = C64::new(0.0, 0.0);
    let mut d3 = C64::new(0.0, 0.0);
    let mut d1_db = C64::new(0.0, 0.0);
    let mut quiet = 0;
    let mut scale = 0.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64 + 0.5;
        let k = 2.0 * nf * PI;
        let coef = (I * PI * b.b() * nf * nf).exp() * if n % 2 == 0 { 2.0 } else { -2.0 };
        d1 += coef * k;
        d3 -= coef * k * k * k;
        d1_db += coef * k * I * PI * nf * nf;
        let bound = coef.norm() * k.powi(3);
        scale += bound;
        if bound < 1e-16 * scale {
            quiet += 1;
            if quiet == 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    if !(d1.norm().is_finite() && d3.norm().is_finite()) {
        return Err(Error::NonFinite("theta constants"));
    }
    Ok(ThetaJet { value: C64::new(0.0, 0.0), d1, d2: C64::new(0.0, 0.0), d3, dlog_d1_db: d1_db / d1 })
}

/// Like [`theta_constants`], but also recomputes `∂_B log θ₁′(0|B)` by
/// Richardson-extrapolated central differences in `B` and fails if the two
/// disagree by more than `rel_tol`.
pub fn theta_constants_checked(b: &TorusModulus, rel_tol: f64) -> Result<ThetaJet> {
    let jet = theta_constants(b)?;
    let log_d1 = |db: C64| -> Result<C64> {
        let shifted = TorusModulus::with_min(b.b() + db, 0.0)?;
        Ok(theta_constants(&shifted)?.d1.ln())
    };
    let h = 1e-3 * b.b().im.min(1.0);
    let central = |h: f64| -> Result<C64> { Ok((log_d1(C64::new(h, 0.0))? - log_d1(C64::new(-h, 0.0))?) / (2.0 * h)) };
    let d_h = central(h)?;
    let d_h2 = central(h / 2.0)?;
    let extrapolated = (d_h2 * 4.0 - d_h) / 3.0;
    let rel = (extrapolated - jet.dlog_d1_db).norm() / jet.dlog_d1_db.norm().max(1e-300);
    if rel > rel_tol {
        return Err(Error::JetUnstable { spread: rel, tol: rel_tol });
    }
    Ok(jet)
}

/// Logarithmic derivatives of `θ₁(u|B)` and `log|θ₁(u|B)|`, evaluated after
/// reducing `u` into the central period cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogTheta {
    /// A branch of `log θ₁(u)`, continuous in `u` inside each period cell.
    pub log: C64,
    /// `(log θ₁)′`.
    pub d1: C64,
    /// `(log θ₁)″`.
    pub d2: C64,
    /// `(log θ₁)‴`.
    pub d3: C64,
}

pub fn log_theta(u: C64, b: &TorusModulus, rel_tol: f64) -> Result<LogTheta> {
    let (u0, m, n) = b.reduce(u);
    let [t0, t1, t2, t3] = theta1_all(u0, b, rel_tol)?;
    if t0.norm() == 0.0 {
        return Err(Error::LatticePoint(format!("{u}")));
    }
    let r1 = t1 / t0;
    let r2 = t2 / t0;
    let r3 = t3 / t0;
    let nf = n as f64;
    let log = t0.ln() + I * PI * (m + n) as f64 - I * PI * nf * nf * b.b() - 2.0 * PI * I * nf * u0;
    Ok(LogTheta {
        log,
        d1: r1 - 2.0 * PI * I * nf,
        d2: r2 - r1 * r1,
        d3: r3 - r2 * r1 * 3.0 + r1 * r1 * r1 * 2.0,
    })
}

/// Weierstrass `℘`, `℘′`, `ζ_W` for the lattice `Z + B·Z`.
pub fn weierstrass(u: C64, b: &TorusModulus) -> Result<WeierstrassValues> {
    weierstrass_with(u, b, 1e-12)
}

pub fn weierstrass_with(u: C64, b: &TorusModulus, exclusion: f64) -> Result<WeierstrassValues> {
    if b.lattice_distance(u) < exclusion {
        return Err(Error::LatticePoint(format!("{u}")));
    }
    let c = theta_constants(b)?;
    let shift = c.d3 / (c.d1 * 3.0);
    let lt = log_theta(u, b, 1e-15)?;
    Ok(WeierstrassValues { p: -lt.d2 + shift, dp: -lt.d3, zeta: lt.d1 - shift * u })
}

/// Quasi-period `η₁ = ζ_W(½)` for the period `1`.
pub fn eta1(b: &TorusModulus) -> Result<C64> {
    let c = theta_constants(b)?;
    Ok(-c.d3 / (c.d1 * 6.0))
}

/// Zeta-regularized `∏_{ℓ≥1} cℓ = exp(−ζ′(0))·c^{ζ(0)} = √(2π/c)`.
pub fn regularized_product(c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidInput(format!("regularized_product needs c > 0, got {c}")));
    }
    const ZETA_0: f64 = -0.5;
    let zeta_prime_0 = -0.5 * (2.0 * PI).ln();
    Ok((-zeta_prime_0).exp() * c.powf(ZETA_0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tm(re: f64, im: f64) -> TorusModulus {
        TorusModulus::new(C64::new(re, im)).unwrap()
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn theta_vanishes_at_origin() {
        assert_eq!(theta1(C64::new(0.0, 0.0), &tm(0.0, 1.0), 0).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn theta_is_odd() {
        let b = tm(0.2, 1.1);
        let z = C64::new(0.3, 0.1);
        assert!(rel(theta1(-z, &b, 0).unwrap(), -theta1(z, &b, 0).unwrap()) < 1e-14);
    }

    #[test]
    fn theta_antiperiodic_in_one() {
        let b = tm(0.0, 1.0);
        let z = C64::new(0.25, 0.0);
        assert!(rel(theta1(z + 1.0, &b, 0).unwrap(), -theta1(z, &b, 0).unwrap()) < 1e-13);
    }

    #[test]
    fn second_derivative_vanishes_at_origin() {
        for b in [tm(0.0, 1.0), tm(0.4, 0.3), tm(-0.2, 2.0)] {
            let t2 = theta1(C64::new(0.0, 0.0), &b, 2).unwrap();
            assert_eq!(t2, C64::new(0.0, 0.0));
            assert_eq!(theta_constants(&b).unwrap().d2, C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn heat_equation() {
        let b = tm(0.0, 1.2);
        let z = C64::new(0.3, 0.0);
        let h = 1e-4;
        let at = |db: f64| theta1(z, &TorusModulus::new(b.b() + C64::new(db, 0.0)).unwrap(), 0).unwrap();
        let d1 = (at(h) - at(-h)) / (2.0 * h);
        let d2 = (at(h / 2.0) - at(-h / 2.0)) / h;
        let lhs = (d2 * 4.0 - d1) / 3.0;
        let rhs = theta1(z, &b, 2).unwrap() / (4.0 * PI * I);
        assert!(rel(lhs, rhs) < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn derivative_magnitude_invariant_under_t() {
        let b = tm(0.3, 0.9);
        let b1 = tm(1.3, 0.9);
        let d = theta_constants(&b).unwrap().d1;
        let d_shift = theta_constants(&b1).unwrap().d1;
        assert!((d.norm() - d_shift.norm()).abs() < 1e-13 * d.norm());
        let phase = C64::from_polar(1.0, PI / 4.0);
        assert!(rel(d_shift, d * phase) < 1e-13);
    }

    #[test]
    fn b_derivative_cross_check() {
        for b in [tm(0.0, 1.0), tm(0.3, 0.7), tm(-0.45, 1.6)] {
            theta_constants_checked(&b, 1e-9).unwrap();
        }
    }

    #[test]
    fn constants_match_direct_series() {
        let b = tm(0.1, 0.8);
        let c = theta_constants(&b).unwrap();
        let z = C64::new(0.0, 0.0);
        assert!(rel(c.d1, theta1(z, &b, 1).unwrap()) < 1e-14);
        assert!(rel(c.d3, theta1(z, &b, 3).unwrap()) < 1e-14);
    }

    #[test]
    fn out_of_domain() {
        assert!(matches!(
            TorusModulus::new(C64::new(0.0, 0.01)),
            Err(Error::ModulusOutOfDomain { .. })
        ));
    }

    #[test]
    fn weierstrass_parity() {
        let b = tm(0.0, 1.0);
        let u = C64::new(0.31, 0.17);
        let w = weierstrass(u, &b).unwrap();
        let wm = weierstrass(-u, &b).unwrap();
        assert!(rel(wm.p, w.p) < 1e-13);
        assert!(rel(wm.dp, -w.dp) < 1e-13);
        assert!(rel(wm.zeta, -w.zeta) < 1e-13);
    }

    /// Divisor sums σ_k(n) for the Eisenstein q-expansions.
    fn sigma(k: i32, n: u64) -> f64 {
        (1..=n).filter(|d| n % d == 0).map(|d| (d as f64).powi(k)).sum()
    }

    fn eisenstein_invariants(b: C64) -> (C64, C64) {
        let q2 = (2.0 * PI * I * b).exp();
        let mut e4 = C64::new(1.0, 0.0);
        let mut e6 = C64::new(1.0, 0.0);
        let mut qn = C64::new(1.0, 0.0);
        for n in 1..200u64 {
            qn *= q2;
            e4 += qn * 240.0 * sigma(3, n);
            e6 -= qn * 504.0 * sigma(5, n);
        }
        (e4 * (4.0 * PI.powi(4) / 3.0), e6 * (8.0 * PI.powi(6) / 27.0))
    }

    #[test]
    fn weierstrass_differential_equation() {
        let bval = C64::new(0.1, 1.3);
        let b = TorusModulus::new(bval).unwrap();
        let (g2, g3) = eisenstein_invariants(bval);
        let w = weierstrass(C64::new(0.3, 0.2), &b).unwrap();
        let resid = (w.dp * w.dp - (w.p * w.p * w.p * 4.0 - g2 * w.p - g3)).norm();
        assert!(resid < 1e-10 * w.p.norm().powi(3).max(1.0), "residual {resid}");
    }

    #[test]
    fn weierstrass_laurent_leading_term() {
        let b = tm(0.0, 1.0);
        let u = C64::new(1e-3, 0.0);
        let w = weierstrass(u, &b).unwrap();
        assert!((u * u * w.p - 1.0).norm() < 1e-5);
    }

    #[test]
    fn weierstrass_rejects_lattice_points() {
        let b = tm(0.2, 1.0);
        assert!(matches!(weierstrass(b.b() + 1.0, &b), Err(Error::LatticePoint(_))));
    }

    #[test]
    fn legendre_relation() {
        let b = tm(0.15, 0.95);
        let u = C64::new(0.21, 0.13);
        let z = |v: C64| weierstrass(v, &b).unwrap().zeta;
        let two_eta1 = z(u + 1.0) - z(u);
        let two_eta2 = z(u + b.b()) - z(u);
        assert!(rel(two_eta1 / 2.0, eta1(&b).unwrap()) < 1e-12);
        let legendre = two_eta1 / 2.0 * b.b() - two_eta2 / 2.0;
        assert!((legendre - PI * I).norm() < 1e-11, "{legendre}");
    }

    #[test]
    fn zeta_half_period() {
        let b = tm(-0.1, 1.4);
        let z = weierstrass(C64::new(0.5, 0.0), &b).unwrap().zeta;
        assert!(rel(z, eta1(&b).unwrap()) < 1e-12);
    }

    #[test]
    fn regularized_product_values() {
        assert!((regularized_product(1.0).unwrap() - 2.506_628_274_6).abs() < 1e-10);
        assert!((regularized_product(4.0).unwrap() - (2.0 * PI).sqrt() / 2.0).abs() < 1e-15);
        assert!(regularized_product(0.0).is_err());
    }

    proptest! {
        #[test]
        fn theta_quasi_periodicity(zr in -0.5f64..0.5, zi in -0.4f64..0.4, br in -0.5f64..0.5, bi in 0.5f64..2.0) {
            let b = tm(br, bi);
            let z = C64::new(zr, zi);
            let t = theta1(z, &b, 0).unwrap();
            prop_assume!(t.norm() > 1e-3);
            prop_assert!(rel(theta1(-z, &b, 0).unwrap(), -t) < 1e-10);
            prop_assert!(rel(theta1(z + 1.0, &b, 0).unwrap(), -t) < 1e-10);
            let factor = -(-I * PI * b.b() - 2.0 * PI * I * z).exp();
            prop_assert!(rel(theta1(z + b.b(), &b, 0).unwrap(), factor * t) < 1e-10);
        }

        #[test]
        fn log_theta_matches_direct_ratios(zr in -1.5f64..1.5, zi in -1.0f64..1.0, bi in 0.6f64..1.5) {
            let b = tm(0.1, bi);
            let z = C64::new(zr, zi);
            prop_assume!(b.lattice_distance(z) > 0.05);
            let lt = log_theta(z, &b, 1e-15).unwrap();
            let [t0, t1, _, _] = theta1_all(z, &b, 1e-16).unwrap();
            prop_assert!(rel(lt.d1, t1 / t0) < 1e-9);
            prop_assert!((lt.log.re - t0.norm().ln()).abs() < 1e-9 * (1.0 + t0.norm().ln().abs()));
        }

        #[test]
        fn regularized_product_reciprocity(c in 1e-3f64..1e3) {
            let p = regularized_product(c).unwrap() * regularized_product(1.0 / c).unwrap();
            prop_assert!((p - 2.0 * PI).abs() < 1e-13);
        }

        #[test]
        fn regularized_product_decreasing(c1 in 1e-3f64..1e3, f in 1.001f64..10.0) {
            prop_assert!(regularized_product(c1).unwrap() > regularized_product(c1 * f).unwrap());
        }
    }
}
