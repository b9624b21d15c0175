//! Adaptive Gauss–Kronrod quadrature for complex integrands and periodic
//! trapezoid sums on circles.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    Panel { a, b, value: k * h, error: ((k - g) * h).norm() }
}

/// Integrates `f` over `[a, b]` until the estimated absolute error is below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<C64> {
    let mut panels = vec![kronrod(&mut f, a, b)];
    loop {
        let total: C64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::NonFinite("quadrature"));
        }
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure(format!(
                "error estimate {err:e} after {MAX_INTERVALS} panels"
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(kronrod(&mut f, p.a, mid));
        panels.push(kronrod(&mut f, mid, p.b));
    }
}

/// Integrates a chart one-form coefficient `g` along the straight segment `from → to`.
pub fn segment<F: FnMut(C64) -> C64>(mut g: F, from: C64, to: C64, abs_tol: f64) -> Result<C64> {
    let d = to - from;
    integrate(|s| g(from + d * s) * d, 0.0, 1.0, abs_tol, 1e-14)
}

/// Counter-clockwise contour integral of `g` over the circle `|z − center| = radius`
/// by the periodic trapezoid rule, doubling the node count until two successive
/// sums agree to `tol`.
pub fn circle<F: FnMut(C64) -> C64>(mut g: F, center: C64, radius: f64, tol: f64) -> Result<C64> {
    // returns the weighted sum and the sum of magnitudes
    let sum = |g: &mut F, n: usize, offset: usize, stride: usize| -> (C64, f64) {
        let mut acc = C64::new(0.0, 0.0);
        let mut size = 0.0;
        let mut k = offset;
        while k < n {
            let e = C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            let v = g(center + e * radius);
            acc += v * e;
            size += v.norm();
            k += stride;
        }
        (acc, size)
    };
    let mut n = 32;
    let (mut raw, mut size) = sum(&mut g, n, 0, 1);
    let mut prev = raw * C64::new(0.0, radius * 2.0 * PI / n as f64);
    while n < 1 << 16 {
        // Reuse the previous nodes: the new nodes are the odd ones on the doubled grid.
        let (odd, odd_size) = sum(&mut g, 2 * n, 1, 2);
        raw += odd;
        size += odd_size;
        n *= 2;
        let weight = radius * 2.0 * PI / n as f64;
        let cur = raw * C64::new(0.0, weight);
        if !cur.re.is_finite() || !cur.im.is_finite() {
            return Err(Error::NonFinite("circle quadrature"));
        }
        // rounding floor of the sum itself
        let noise = 64.0 * f64::EPSILON * size * weight;
        if (cur - prev).norm() <= tol.max(1e-14 * cur.norm()).max(noise) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureFailure(format!("circle of radius {radius:e} did not converge")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| C64::new(x.powi(5), -x * x), 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - C64::new(64.0 / 6.0, -8.0 / 3.0)).norm() < 1e-13);
    }

    #[test]
    fn peaked_integrand_adapts() {
        let v = integrate(|x| C64::new(1.0 / (1e-4 + x * x), 0.0), -1.0, 1.0, 1e-12, 1e-13).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((v.re - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn circle_residue() {
        let z0 = C64::new(0.3, -0.2);
        let v = circle(|z| C64::new(2.5, 0.0) / (z - z0), z0 + 0.01, 0.5, 1e-14).unwrap();
        assert!((v - C64::new(0.0, 5.0 * PI)).norm() < 1e-12);
    }
}
