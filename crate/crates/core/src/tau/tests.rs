use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::settings::Tolerances;
use crate::specfun::TorusModulus;
use crate::surface::{build_form, MarkedSurface};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn sphere(points: &[C64], residues: &[f64]) -> Diagram {
    let s = MarkedSurface::sphere(points.to_vec(), residues.to_vec()).unwrap();
    Diagram::new(build_form(s, &Tolerances::default()).unwrap(), false).unwrap()
}

fn torus(b: C64, points: &[C64], residues: &[f64]) -> Diagram {
    let s = MarkedSurface::torus(TorusModulus::new(b).unwrap(), points.to_vec(), residues.to_vec()).unwrap();
    Diagram::new(build_form(s, &Tolerances::default()).unwrap(), false).unwrap()
}

fn four_point() -> Diagram {
    sphere(&[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.7, 0.9)], &[1.0, -2.0, 0.5, 0.5])
}

fn skew_torus() -> Diagram {
    torus(c(0.0, 1.1), &[c(0.0, 0.0), c(0.5, 0.13)], &[-1.0, 1.0])
}

#[test]
fn genus_zero_bidifferential_is_symmetric() {
    let d = four_point();
    let (p, q) = (c(0.3, -0.4), c(-1.2, 0.8));
    let pq = bidifferential_w(&d.form, p, q).unwrap();
    assert_eq!(pq, bidifferential_w(&d.form, q, p).unwrap());
    assert_eq!(pq, (p - q).powi(-2));
    assert!(matches!(bidifferential_w(&d.form, p, p), Err(Error::CoincidentPoints)));
}

#[test]
fn genus_one_bidifferential_double_pole_and_periodicity() {
    let d = skew_torus();
    let t = *d.form.surface().modulus().unwrap();
    let q = c(0.2, 0.3);
    let sep = c(1e-3, 0.0);
    let merged = bidifferential_w(&d.form, q + sep, q).unwrap() * sep * sep;
    assert!((merged - 1.0).norm() < 1e-5);
    let p = c(-0.1, 0.45);
    let base = bidifferential_w(&d.form, p, q).unwrap();
    for shifted in [p + 1.0, p + t.b()] {
        let w = bidifferential_w(&d.form, shifted, q).unwrap();
        assert!((w - base).norm() < 1e-10 * base.norm());
    }
    assert!(matches!(bidifferential_w(&d.form, q + t.b(), q), Err(Error::CoincidentPoints)));
}

#[test]
fn round_cylinder_tau() {
    for a in [1.0, 0.4, 2.5] {
        let d = sphere(&[c(0.0, 0.0), c(1.0, 0.0)], &[-a, a]);
        let circumference = 2.0 * PI * a;
        let expected = (2.0 * PI / circumference).powi(2);
        let (sampled, spread) = tau12_genus0(&d, &TauOptions::default()).unwrap();
        assert!(spread < 1e-12);
        assert_relative_eq!(sampled.norm(), expected, max_relative = 1e-12);
        assert_relative_eq!(tau12_genus0_closed(&d).unwrap().norm(), expected, max_relative = 1e-12);
        let report = determinant_up_to_c(&d, &TauOptions::default()).unwrap();
        assert_eq!(report.det_im_b, 1.0);
        assert_relative_eq!(report.determinant_up_to_c, expected.powf(1.0 / 6.0), max_relative = 1e-12);
    }
}

#[test]
fn four_point_evaluand_is_constant_and_matches_closed_form() {
    let d = four_point();
    let (mean, spread) = tau12_genus0(&d, &TauOptions::default()).unwrap();
    assert!(spread < 1e-8, "spread {spread}");
    let closed = tau12_genus0_closed(&d).unwrap();
    assert!((mean - closed).norm() < 1e-8 * closed.norm());
    let report = determinant_up_to_c(&d, &TauOptions { samples: 32, seed: 11 }).unwrap();
    assert_eq!(report.samples, 32);
    assert_eq!(report.seed, 11);
    assert!(report.constancy_spread.unwrap() < 1e-8);
    assert_relative_eq!(log_abs_tau_sq(&d).unwrap(), report.abs_tau_sq.ln(), max_relative = 1e-8);
}

#[test]
fn sampling_is_reproducible() {
    let d = four_point();
    let opts = TauOptions { samples: 24, seed: 99 };
    assert_eq!(tau12_genus0(&d, &opts).unwrap(), tau12_genus0(&d, &opts).unwrap());
}

#[test]
fn misplaced_zero_breaks_constancy() {
    let mut d = four_point();
    d.zeros[0].position += c(1e-3, 0.0);
    match determinant_up_to_c(&d, &TauOptions::default()) {
        Err(Error::ConstancyViolation { spread, tol }) => assert!(spread > tol),
        other => panic!("expected a constancy violation, got {other:?}"),
    }
}

fn scaling_exponent(points: &[C64], residues: &[f64], s: f64) -> f64 {
    let base = tau12_genus0_closed(&sphere(points, residues)).unwrap().norm();
    let scaled: Vec<f64> = residues.iter().map(|a| a * s).collect();
    let other = tau12_genus0_closed(&sphere(points, &scaled)).unwrap().norm();
    (other / base).ln() / s.ln()
}

#[test]
fn residue_scaling_exponent_is_configuration_independent() {
    let configs: [(&[C64], &[f64]); 3] = [
        (&[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.7, 0.9)], &[1.0, -2.0, 0.5, 0.5]),
        (&[c(0.0, 0.0), c(1.3, 0.2), c(-0.4, 1.1), c(0.9, -0.8)], &[0.7, 0.6, -1.5, 0.2]),
        (&[c(0.1, 0.0), c(3.0, 0.0), c(1.0, 2.0), c(-1.0, -1.0)], &[-0.3, -0.9, 0.4, 0.8]),
    ];
    let exponents: Vec<f64> = configs.iter().map(|(p, a)| scaling_exponent(p, a, 1.7)).collect();
    for e in &exponents {
        assert!((e - exponents[0]).abs() < 1e-8, "{exponents:?}");
    }
    assert!((exponents[0] + 1.0).abs() < 1e-8);
    // the exponent does not depend on the scale factor either
    assert!((scaling_exponent(configs[1].0, configs[1].1, 0.3) - exponents[0]).abs() < 1e-8);
}

#[test]
fn genus_zero_shift_invariance() {
    let d = four_point();
    let s = d.form.surface();
    let base = determinant_up_to_c(&d, &TauOptions::default()).unwrap().abs_tau_sq;
    let moved: Vec<C64> = s.points().iter().map(|p| p + c(0.37, -1.1)).collect();
    let other = determinant_up_to_c(&sphere(&moved, s.residues()), &TauOptions::default()).unwrap().abs_tau_sq;
    assert_relative_eq!(base, other, max_relative = 1e-10);
}

#[test]
fn genus_one_shift_invariance() {
    let d = skew_torus();
    let t = d.form.surface().modulus().unwrap().b();
    let base = log_abs_tau_sq(&d).unwrap();
    let moved = [c(0.21, 0.08), c(0.71, 0.21)];
    let other = log_abs_tau_sq(&torus(t, &moved, &[-1.0, 1.0])).unwrap();
    assert!((base - other).abs() < 1e-10 * base.abs().max(1.0));
}

#[test]
fn relabeling_leaves_tau_unchanged() {
    let d = four_point();
    let s = d.form.surface();
    let order = [2, 0, 3, 1];
    let pts: Vec<C64> = order.iter().map(|i| s.points()[*i]).collect();
    let res: Vec<f64> = order.iter().map(|i| s.residues()[*i]).collect();
    let a = tau12_genus0_closed(&d).unwrap();
    let b = tau12_genus0_closed(&sphere(&pts, &res)).unwrap();
    assert!((a - b).norm() < 1e-12 * a.norm());

    let d = skew_torus();
    let a = tau12_genus1(&d).unwrap();
    let b = tau12_genus1(&torus(c(0.0, 1.1), &[c(0.5, 0.13), c(0.0, 0.0)], &[1.0, -1.0])).unwrap();
    assert!((a - b).norm() < 1e-12 * a.norm());
}

#[test]
fn zero_branch_flip_changes_sign_only() {
    let mut d = skew_torus();
    let before = tau12_genus1(&d).unwrap();
    d.zeros[0].jet = -d.zeros[0].jet;
    let after = tau12_genus1(&d).unwrap();
    assert!((after + before).norm() < 1e-14 * before.norm());
}

#[test]
fn t_transform_invariance() {
    let pts = [c(0.0, 0.0), c(0.5, 0.13)];
    let a = determinant_up_to_c(&torus(c(0.3, 0.9), &pts, &[-1.0, 1.0]), &TauOptions::default()).unwrap();
    let b = determinant_up_to_c(&torus(c(1.3, 0.9), &pts, &[-1.0, 1.0]), &TauOptions::default()).unwrap();
    assert_relative_eq!(a.abs_tau_sq, b.abs_tau_sq, max_relative = 1e-10);
    assert_relative_eq!(a.determinant_up_to_c, b.determinant_up_to_c, max_relative = 1e-10);
}

#[test]
fn s_transform_consistency() {
    // the same marked torus presented with B′ = −1/B, chart rescaled by 1/B
    let b = c(0.0, 1.1);
    let pts = [c(0.0, 0.0), c(0.5, 0.13)];
    let a = determinant_up_to_c(&torus(b, &pts, &[-1.0, 1.0]), &TauOptions::default()).unwrap();
    let b2 = -b.inv();
    let pts2: Vec<C64> = pts.iter().map(|z| z / b).collect();
    let s = determinant_up_to_c(&torus(b2, &pts2, &[-1.0, 1.0]), &TauOptions::default()).unwrap();
    assert_relative_eq!(a.determinant_up_to_c, s.determinant_up_to_c, max_relative = 1e-8);
    assert!((a.abs_tau_sq - s.abs_tau_sq).abs() > 1e-3, "the presentations are genuinely different");
}

#[test]
fn genus_one_report() {
    let d = skew_torus();
    let r = determinant_up_to_c(&d, &TauOptions::default()).unwrap();
    assert_eq!(r.det_im_b, 1.1);
    assert!(r.constancy_spread.is_none());
    assert!(r.determinant_up_to_c > 0.0);
    assert!(matches!(tau12_genus0(&d, &TauOptions::default()), Err(Error::InvalidInput(_))));
}

fn sphere_config() -> impl Strategy<Value = (Vec<C64>, Vec<f64>)> {
    (prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 4..6), prop::collection::vec(-2.0..2.0f64, 4..6))
        .prop_filter_map("well separated, nondegenerate", |(pts, res)| {
            let n = pts.len().min(res.len());
            let pts: Vec<C64> = pts[..n].iter().map(|(x, y)| c(*x, *y)).collect();
            for i in 0..n {
                for j in 0..i {
                    if (pts[i] - pts[j]).norm() < 0.4 {
                        return None;
                    }
                }
            }
            let mut res = res[..n - 1].to_vec();
            res.push(-res.iter().sum::<f64>());
            if res.iter().any(|a| a.abs() < 0.2) {
                return None;
            }
            Some((pts, res))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn genus_zero_evaluand_is_constant((pts, res) in sphere_config()) {
        let s = MarkedSurface::sphere(pts, res).unwrap();
        let Ok(d) = Diagram::new(build_form(s, &Tolerances::default()).unwrap(), false) else {
            return Ok(());
        };
        let (mean, spread) = tau12_genus0(&d, &TauOptions::default()).unwrap();
        prop_assert!(spread < 1e-8, "spread {}", spread);
        let closed = tau12_genus0_closed(&d).unwrap();
        prop_assert!((mean - closed).norm() < 1e-8 * closed.norm());
    }
}
