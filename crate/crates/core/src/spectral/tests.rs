use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use super::eigen::{lanczos_lowest, reverse_cuthill_mckee, BandedSym};
use super::fem::{assemble, richardson, solve_mesh};
use super::heat::{cone_diagonal_excess, cylinder_convolution, cylinder_mass};
use super::*;
use crate::error::Error;
use crate::quad;
use crate::C64;

#[test]
fn zero_mode_at_zero_energy() {
    for r in [0.5, 1.0, 3.0] {
        let b = dtn_blocks(2.0 * PI, r, 0.0, 0).unwrap()[0];
        assert_eq!(b.kappa, 0.0);
        assert_eq!(b.eigenvalues[0], 0.0);
        assert_relative_eq!(b.eigenvalues[1], 1.0 / r, max_relative = 1e-15);
        // constants are in the kernel of the block itself
        assert!((b.matrix[0][0] + b.matrix[0][1]).abs() < 1e-15);
    }
}

#[test]
fn blocks_diagonalize_on_symmetric_and_antisymmetric_vectors() {
    for mu_sq in [0.0, -0.01, -4.0] {
        for b in dtn_blocks(3.0, 0.7, mu_sq, 12).unwrap() {
            let [[d, o], [o2, d2]] = b.matrix;
            assert_eq!((d, o), (d2, o2));
            let scale = b.eigenvalues[1];
            assert!((d + o - b.eigenvalues[0]).abs() < 1e-13 * scale, "{b:?}");
            assert!((d - o - b.eigenvalues[1]).abs() < 1e-13 * scale, "{b:?}");
            if mu_sq < 0.0 {
                assert!(b.eigenvalues[0] > 0.0);
            }
        }
    }
}

#[test]
fn blocks_grow_monotonically_toward_the_principal_symbol() {
    let (a, r) = (2.0, 0.8);
    let blocks = dtn_blocks(a, r, 0.0, 400).unwrap();
    for w in blocks.windows(2) {
        assert!(w[1].eigenvalues[0] > w[0].eigenvalues[0]);
        assert!(w[1].eigenvalues[1] > w[0].eigenvalues[1]);
    }
    let last = blocks.last().unwrap();
    let symbol = 2.0 * 2.0 * PI * last.mode as f64 / a;
    for v in last.eigenvalues {
        assert_relative_eq!(v, symbol, max_relative = 1e-14);
    }
}

#[test]
fn lowest_eigenvalue_is_linear_in_mu() {
    let (a, r) = (2.0 * PI, 1.0);
    for k in 0..=10 {
        let s = 1e-3 * 10f64.powf(k as f64 / 10.0);
        let ratio = lowest_eigenvalue(a, r, s).unwrap() / s;
        assert!(ratio >= 1.0 - 5.0 * s * r && ratio <= 1.0 + 5.0 * s * r, "{s}: {ratio}");
    }
    // finite slope R of the linear remainder
    let s = 1e-6;
    assert_relative_eq!((lowest_eigenvalue(a, r, s).unwrap() / s - 1.0) / s, r, max_relative = 1e-5);
}

#[test]
fn det_star_ratio_matches_truncated_products() {
    let a = 1.7;
    for (r, rp) in [(0.3, 0.9), (1.0, 0.05)] {
        let direct: f64 = (1..=10_000)
            .map(|l| {
                let k = 2.0 * PI * l as f64 / a;
                let c = |x: f64| (1.0 + x.tanh()) * (1.0 + 1.0 / x.tanh()) / 4.0;
                (c(k * r) / c(k * rp)).powi(2)
            })
            .product::<f64>()
            * rp
            / r;
        let ratio = dtn_det_star(a, r).unwrap() / dtn_det_star(a, rp).unwrap();
        assert_relative_eq!(ratio, direct, max_relative = 1e-8);
    }
}

#[test]
fn det_star_scales_with_a_fixed_power() {
    let (a, r) = (2.3, 0.6);
    let base = dtn_det_star(a, r).unwrap();
    let exponents: Vec<f64> =
        [0.5, 2.0, 7.0].iter().map(|s| (dtn_det_star(s * a, s * r).unwrap() / base).ln() / s.ln()).collect();
    for e in &exponents {
        assert!((e - exponents[0]).abs() < 1e-12, "{exponents:?}");
    }
    assert!((exponents[0] - 1.0).abs() < 1e-12);
}

#[test]
fn reduced_determinant_tends_to_det_star() {
    let (a, r) = (2.0 * PI, 1.0);
    let star = dtn_det_star(a, r).unwrap();
    for s in [1e-7, 1e-8] {
        assert_relative_eq!(dtn_det(a, r, s).unwrap() / s, star, max_relative = 1e-6);
    }
    let slope = (dtn_det_ratio(a, r, 1e-4).unwrap() - 1.0) / 1e-4;
    assert!(slope.is_finite() && slope.abs() < 10.0);
}

#[test]
fn ratio_product_matches_brute_force() {
    let (a, r, s) = (2.0, 0.7, 0.3);
    // direct product of the block eigenvalue ratios over ±ℓ, tail by ∑1/ℓ²
    let blocks_s = dtn_blocks(a, r, -s * s, 200_000).unwrap();
    let blocks_0 = dtn_blocks(a, r, 0.0, 200_000).unwrap();
    let mut log = (blocks_s[0].eigenvalues[0] * blocks_s[0].eigenvalues[1] * r / s).ln();
    for (bs, b0) in blocks_s.iter().zip(&blocks_0).skip(1) {
        log += 2.0 * ((bs.eigenvalues[0] / b0.eigenvalues[0]).ln() + (bs.eigenvalues[1] / b0.eigenvalues[1]).ln());
    }
    let x = s * a / (2.0 * PI);
    log += 2.0 * x * x / 200_000.5;
    assert_relative_eq!(dtn_det_ratio(a, r, s).unwrap(), log.exp(), max_relative = 1e-9);
}

#[test]
fn dtn_domain_errors() {
    assert!(matches!(dtn_blocks(0.0, 1.0, 0.0, 3), Err(Error::InvalidInput(_))));
    assert!(matches!(dtn_blocks(1.0, 1.0, 0.5, 3), Err(Error::InvalidInput(_))));
    assert!(matches!(dtn_det_ratio(1.0, 1.0, 0.0), Err(Error::InvalidInput(_))));
    assert!(matches!(dtn_det_star(1.0, -1.0), Err(Error::InvalidInput(_))));
}

#[test]
fn cone_defect_is_minus_one_eighth_at_every_scale() {
    let values: Vec<f64> = [0.1, 0.2, 0.5, 1.0].iter().map(|t| cone_defect(*t).unwrap()).collect();
    for v in &values {
        assert!((v + 0.125).abs() < 1e-6);
    }
    let spread = values.iter().fold(0.0f64, |m, v| m.max((v - values[0]).abs()));
    assert!(spread < 1e-8);
    assert!(matches!(cone_defect(0.0), Err(Error::InvalidInput(_))));
}

#[test]
fn cone_excess_tail_is_negligible() {
    for t in [0.1f64, 1.0, 4.0] {
        let r = 10.0 * t.sqrt();
        assert!((4.0 * PI * r * cone_diagonal_excess(r, t)).abs() < 1e-14);
    }
}

#[test]
fn relative_trace_constant_counts_slits() {
    assert_eq!(relative_trace_constant(0).unwrap(), 0.0);
    assert!((relative_trace_constant(1).unwrap() + 0.25).abs() < 1e-12);
    assert!((relative_trace_constant(3).unwrap() + 0.75).abs() < 1e-12);
}

#[test]
fn cone_kernel_projects_to_the_plane() {
    let (r, rp, t) = (0.8, 1.3, 0.4);
    for th in [0.0, 0.7, 2.0, 3.1, 5.5] {
        let both = cone_kernel(r, th, rp, 0.0, t).unwrap() + cone_kernel(r, th + 2.0 * PI, rp, 0.0, t).unwrap();
        let d2 = r * r + rp * rp - 2.0 * r * rp * th.cos();
        let planar = (-d2 / (4.0 * t)).exp() / (4.0 * PI * t);
        assert_relative_eq!(both, planar, max_relative = 1e-14);
        // symmetric and 4π-periodic
        assert_eq!(cone_kernel(r, th, rp, 0.0, t).unwrap(), cone_kernel(rp, 0.0, r, th, t).unwrap());
        assert_relative_eq!(
            cone_kernel(r, th + 4.0 * PI, rp, 0.0, t).unwrap(),
            cone_kernel(r, th, rp, 0.0, t).unwrap(),
            max_relative = 1e-12
        );
    }
    // far from the tip on one sheet the kernel is the planar one
    let far = cone_kernel(40.0, 0.01, 40.0, 0.0, 0.3).unwrap();
    let d2 = (2.0 * 40.0 * 0.005f64.sin()).powi(2);
    assert_relative_eq!(far, (-d2 / 1.2).exp() / (1.2 * PI), max_relative = 1e-12);
}

#[test]
fn cone_kernel_semigroup() {
    let (p, pp): ((f64, f64), (f64, f64)) = ((0.7, 0.3), (0.5, 2.0));
    let (t, s): (f64, f64) = (0.1, 0.2);
    // q = (u², φ): dA = 2u³ du dφ, smooth in u; the trapezoid rule is spectral in φ
    let n_phi = 512;
    let u_max = (p.0.max(pp.0) + 14.0 * (t + s).sqrt()).sqrt();
    let mut total = 0.0;
    for j in 0..n_phi {
        let phi = 4.0 * PI * j as f64 / n_phi as f64;
        let radial = quad::integrate(
            |u| {
                let rho = u * u;
                let v = cone_kernel(p.0, p.1, rho, phi, t).unwrap() * cone_kernel(rho, phi, pp.0, pp.1, s).unwrap();
                C64::new(v * 2.0 * u * u * u, 0.0)
            },
            0.0,
            u_max,
            1e-16,
            1e-13,
        )
        .unwrap();
        total += radial.re * 4.0 * PI / n_phi as f64;
    }
    let direct = cone_kernel(p.0, p.1, pp.0, pp.1, t + s).unwrap();
    assert!((total - direct).abs() < 1e-8 * direct, "{total} vs {direct}");
}

#[test]
fn cylinder_kernel_series_agree() {
    // 4π²t/a² straddles 1 between the two circumferences
    for (t, a) in [(0.02, 1.0), (0.05, 1.0), (0.1, 3.0), (0.3, 3.0), (1.0, 6.0)] {
        let h = heat_kernel_cylinder(0.1, 0.2, -0.3, 0.9 * a, t, a).unwrap();
        let images: f64 = (-50..=50)
            .map(|m| {
                let dy = 0.2 - 0.9 * a + m as f64 * a;
                (-dy * dy / (4.0 * t)).exp()
            })
            .sum::<f64>()
            / (4.0 * PI * t).sqrt();
        let fourier: f64 = (-400..=400)
            .map(|n| {
                let n = n as f64;
                (2.0 * PI * n * (0.2 - 0.9 * a) / a).cos() * (-4.0 * PI * PI * n * n * t / (a * a)).exp()
            })
            .sum::<f64>()
            / a;
        let axial = (-0.16 / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
        assert_relative_eq!(h, axial * images, max_relative = 1e-13);
        assert_relative_eq!(h, axial * fourier, max_relative = 1e-12);
    }
}

#[test]
fn cylinder_kernel_properties() {
    for (t, a) in [(0.1, 1.0), (0.5, 2.0 * PI), (2.0, 10.0)] {
        assert!((cylinder_mass(0.3, 0.1, t, a).unwrap() - 1.0).abs() < 1e-10);
        let check = cylinder_check(t, a).unwrap();
        assert!(check.min_value > 0.0);
        assert!(check.periodicity_error <= 4.0 * f64::EPSILON * heat_kernel_cylinder(0.3, 0.0, 0.3, 0.0, t, a).unwrap());
        // the circle marginal is the one-dimensional Gaussian
        let marginal: f64 = (0..256)
            .map(|j| heat_kernel_cylinder(0.0, 0.4, 0.7, a * j as f64 / 256.0, t, a).unwrap() * a / 256.0)
            .sum();
        assert_relative_eq!(marginal, (-0.49 / (4.0 * t)).exp() / (4.0 * PI * t).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(
            heat_kernel_cylinder(0.1, 0.2, 0.5, 0.6, t, a).unwrap(),
            heat_kernel_cylinder(0.5, 0.6, 0.1, 0.2, t, a).unwrap(),
            max_relative = 1e-14
        );
    }
    // dyadic shifts are exact in floating point
    assert_eq!(
        heat_kernel_cylinder(0.0, 0.25, 0.5, 0.375, 0.1, 2.0).unwrap(),
        heat_kernel_cylinder(0.0, 0.25, 0.5, 2.375, 0.1, 2.0).unwrap()
    );
    assert!(matches!(heat_kernel_cylinder(0.0, 0.0, 0.0, 0.0, -1.0, 1.0), Err(Error::InvalidInput(_))));
}

#[test]
fn cylinder_kernel_semigroup() {
    for a in [1.0, 2.0 * PI] {
        let (p, pp) = ((0.2, 0.1 * a), (-0.4, 0.7 * a));
        let conv = cylinder_convolution(p, pp, 0.1, 0.2, a).unwrap();
        let direct = heat_kernel_cylinder(p.0, p.1, pp.0, pp.1, 0.3, a).unwrap();
        assert!((conv - direct).abs() < 1e-8 * direct, "{conv} vs {direct}");
    }
}

fn square_mesh(resolution: usize) -> Mesh {
    let controls = MeshControls { resolution, ..MeshControls::default() };
    Mesh::build(&Geometry::calibration_square(), &controls).unwrap().0
}

fn strip_mesh(resolution: usize, truncation: f64) -> (Mesh, Geometry) {
    let controls = MeshControls { resolution, ..MeshControls::default() };
    Mesh::build(&Geometry::SlitStrip { truncation }, &controls).unwrap()
}

fn total_area(mesh: &Mesh) -> f64 {
    (0..mesh.triangles.len()).map(|t| mesh.area(t)).sum()
}

/// Every interior edge is shared by exactly two triangles, boundary edges by one.
fn assert_conforming(mesh: &Mesh) {
    let mut count = std::collections::HashMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    for ((a, b), c) in count {
        assert!(c == 1 || c == 2);
        if c == 1 {
            assert!(mesh.dirichlet[a] && mesh.dirichlet[b], "free boundary edge {a}-{b}");
        }
    }
}

#[test]
fn square_mesh_is_conforming_and_marked() {
    let m = square_mesh(4);
    assert_eq!(m.vertices.len(), 81);
    assert_eq!(m.triangles.len(), 128);
    assert_relative_eq!(total_area(&m), PI * PI, max_relative = 1e-14);
    assert_eq!(m.stats().free_vertices, 49);
    assert_conforming(&m);
    let fine = m.refine(&Geometry::calibration_square());
    assert_eq!(fine.triangles.len(), 512);
    assert_eq!(fine.vertices.len(), 289);
    assert_eq!(fine.stats().free_vertices, 225);
    assert_relative_eq!(total_area(&fine), PI * PI, max_relative = 1e-14);
    assert_conforming(&fine);
    assert!((fine.stats().min_angle_deg - 45.0).abs() < 1e-9);
}

#[test]
fn slit_strip_mesh_structure() {
    let (m, g) = strip_mesh(6, 6.0);
    let Geometry::SlitStrip { truncation } = g else { panic!() };
    assert!((truncation - 6.0).abs() <= 0.5 * FRAC_PI_2 / 6.0);
    assert_relative_eq!(total_area(&m), 2.0 * truncation * PI, max_relative = 1e-13);
    assert_conforming(&m);
    for (v, d) in m.vertices.iter().zip(&m.dirichlet) {
        let on_slit = (v[1] - FRAC_PI_2).abs() < 1e-12 && v[0].abs() >= PI - 1e-12;
        let on_boundary = v[1].abs() < 1e-12 || (v[1] - PI).abs() < 1e-12 || (v[0].abs() - truncation).abs() < 1e-12;
        assert_eq!(*d, on_slit || on_boundary, "{v:?}");
    }
    // mirror symmetric in x
    let mut sorted: Vec<(i64, i64)> = m.vertices.iter().map(|v| ((v[0] * 1e9).round() as i64, (v[1] * 1e9).round() as i64)).collect();
    let mut flipped: Vec<(i64, i64)> = sorted.iter().map(|(x, y)| (-x, *y)).collect();
    sorted.sort();
    flipped.sort();
    assert_eq!(sorted, flipped);
    let fine = m.refine(&g);
    assert_conforming(&fine);
    fine.check_quality(10.0).unwrap();
}

#[test]
fn grading_follows_the_declared_law() {
    let controls = MeshControls { resolution: 8, grading_exponent: 2.0, grading_radius: 1.0, ..MeshControls::default() };
    let (m, _) = Mesh::build(&Geometry::SlitStrip { truncation: 6.0 }, &controls).unwrap();
    let h = FRAC_PI_2 / 8.0;
    for tip in [[-PI, FRAC_PI_2], [PI, FRAC_PI_2]] {
        let mut dists: Vec<f64> = m.vertices.iter().map(|v| (v[0] - tip[0]).hypot(v[1] - tip[1])).filter(|d| *d > 0.0).collect();
        dists.sort_by(f64::total_cmp);
        // grid distances h and 2h map to h²/ρ and 4h²/ρ
        assert_relative_eq!(dists[0], h * h, max_relative = 1e-12);
        assert!(dists.iter().any(|d| (d - 4.0 * h * h).abs() < 1e-12));
    }
    let ungraded = MeshControls { grading_exponent: 1.0, ..controls };
    let (u, _) = Mesh::build(&Geometry::SlitStrip { truncation: 6.0 }, &ungraded).unwrap();
    assert!((u.stats().h_min - h).abs() < 1e-12);
}

#[test]
fn mesh_text_round_trip() {
    let (m, _) = strip_mesh(3, 5.0);
    let text = m.to_text();
    assert_eq!(Mesh::from_text(&text).unwrap(), m);
    assert!(Mesh::from_text("vertices 1\n0 0 2\ntriangles 0\n").is_err());
    assert!(Mesh::from_text("vertices 3\n0 0 0\n1 0 0\n0 1 0\ntriangles 1\n0 1 3\n").is_err());
    assert!(Mesh::from_text("vertices 0\ntriangles 0\nextra\n").is_err());
    let tiny = Mesh::from_text("# one triangle\nvertices 3\n0 0 1\n1 0 1\n0 1 0\ntriangles 1\n0 1 2\n").unwrap();
    assert_eq!(tiny.triangles, vec![[0, 1, 2]]);
    assert_eq!(tiny.dirichlet, vec![true, true, false]);
}

#[test]
fn degenerate_meshes_are_rejected() {
    let flat = Mesh { vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], triangles: vec![[0, 1, 2]], dirichlet: vec![false; 3] };
    assert!(matches!(flat.check_quality(10.0), Err(Error::MeshQualityFailure(_))));
    let sliver = Mesh { vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.01]], triangles: vec![[0, 1, 2]], dirichlet: vec![false; 3] };
    assert!(matches!(sliver.check_quality(10.0), Err(Error::MeshQualityFailure(_))));
    assert!(matches!(assemble(&flat), Err(Error::MeshQualityFailure(_))));
    assert!(matches!(Mesh::build(&Geometry::SlitStrip { truncation: 3.5 }, &MeshControls::default()), Err(Error::InvalidInput(_))));
}

#[test]
fn rcm_is_a_permutation_and_narrows_the_band() {
    // path graph numbered badly
    let n = 40;
    let label = |i: usize| (i * 17) % n;
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n - 1 {
        adjacency[label(i)].push(label(i + 1));
        adjacency[label(i + 1)].push(label(i));
    }
    let order = reverse_cuthill_mckee(&adjacency);
    let mut seen = order.clone();
    seen.sort();
    assert_eq!(seen, (0..n).collect::<Vec<_>>());
    let mut pos = vec![0; n];
    for (k, v) in order.iter().enumerate() {
        pos[*v] = k;
    }
    let bw = (0..n).flat_map(|a| adjacency[a].iter().map(move |b| (a, *b))).map(|(a, b)| pos[a].abs_diff(pos[b])).max();
    assert_eq!(bw, Some(1));
}

fn to_dense(b: &BandedSym) -> DMatrix<f64> {
    DMatrix::from_fn(b.dim(), b.dim(), |i, j| b.get(i, j))
}

#[test]
fn banded_cholesky_matches_dense_solve() {
    let sys = assemble(&square_mesh(5)).unwrap();
    let k = to_dense(&sys.stiffness);
    let rhs: Vec<f64> = (0..sys.stiffness.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut x = rhs.clone();
    sys.stiffness.cholesky().unwrap().solve(&mut x);
    let dense = k.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(rhs.clone()));
    for (a, b) in x.iter().zip(dense.iter()) {
        assert!((a - b).abs() < 1e-12 * dense.amax());
    }
    let mut y = vec![0.0; rhs.len()];
    sys.stiffness.mul_vec(&x, &mut y);
    for (a, b) in y.iter().zip(&rhs) {
        assert!((a - b).abs() < 1e-12);
    }
    let negative = sys.stiffness.shifted(1e3, &sys.mass).unwrap();
    assert!(matches!(negative.cholesky(), Err(Error::SolverNonConvergence(_))));
}

#[test]
fn lanczos_matches_dense_generalized_eigenvalues() {
    let sys = assemble(&square_mesh(3)).unwrap();
    let (k, m) = (to_dense(&sys.stiffness), to_dense(&sys.mass));
    let l = m.clone().cholesky().unwrap();
    let linv = l.l().try_inverse().unwrap();
    let c = &linv * k * linv.transpose();
    let mut dense: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    dense.sort_by(f64::total_cmp);
    let pairs = lanczos_lowest(&sys.stiffness, &sys.mass, 4, 0.0, 3, 1e-12).unwrap();
    for (a, b) in pairs.values.iter().zip(&dense) {
        assert_relative_eq!(*a, *b, max_relative = 1e-10);
    }
    // M-orthonormal Ritz vectors
    let mut mx = vec![0.0; sys.mass.dim()];
    for (i, x) in pairs.vectors.iter().enumerate() {
        sys.mass.mul_vec(x, &mut mx);
        for (j, y) in pairs.vectors.iter().enumerate() {
            let g: f64 = y.iter().zip(&mx).map(|(a, b)| a * b).sum();
            assert!((g - f64::from(u8::from(i == j))).abs() < 1e-10);
        }
    }
    assert_eq!(pairs.values, lanczos_lowest(&sys.stiffness, &sys.mass, 4, 0.0, 3, 1e-12).unwrap().values);
}

#[test]
fn calibration_square_converges_to_two_from_above() {
    let controls = SolverControls { mesh: MeshControls { resolution: 4, ..MeshControls::default() }, ..SolverControls::default() };
    let mut mesh = square_mesh(4);
    let mut values = Vec::new();
    for _ in 0..4 {
        values.push(solve_mesh(&mesh, 3, &controls).unwrap().values);
        mesh = mesh.refine(&Geometry::calibration_square());
    }
    for w in values.windows(2) {
        for (c, f) in w[0].iter().zip(&w[1]) {
            assert!(f < c, "refinement must lower every eigenvalue: {c} -> {f}");
        }
    }
    for v in &values {
        assert!(v[0] > 2.0 && v[1] > 5.0 && v[2] > 5.0);
    }
    let errs: Vec<f64> = values.iter().map(|v| v[0] - 2.0).collect();
    assert!((errs[2] / errs[3] - 4.0).abs() < 0.1, "{errs:?}");
    let extrapolated = richardson(values[2][0], values[3][0]);
    assert!((extrapolated - 2.0).abs() < 1e-4);
    assert!(extrapolated <= values[3][0]);
}

#[test]
fn dirichlet_eigs_report() {
    let controls = SolverControls { mesh: MeshControls { resolution: 8, ..MeshControls::default() }, ..SolverControls::default() };
    let (report, fine, sol) = dirichlet_eigs(&Geometry::calibration_square(), 2, &controls).unwrap();
    assert!((report.extrapolated[0] - 2.0).abs() < 1e-3);
    assert_eq!(report.richardson_order, 2);
    assert_eq!(report.truncation, None);
    assert_eq!(report.mesh.triangles, 4 * report.coarse_mesh.triangles);
    assert_eq!(sol.modes[0].len(), fine.vertices.len());
    assert!(report.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    // mode 1 is cos x sin y up to normalization
    let u = &sol.modes[0];
    let (i, _) = u.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    let peak = fine.vertices[i];
    assert!(peak[0].abs() < 0.3 && (peak[1] - FRAC_PI_2).abs() < 0.3);
}

#[test]
fn test_function_quotient_is_two() {
    assert!((test_function_rayleigh_quotient().unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn slit_strip_requires_two_eigenvalues() {
    assert!(matches!(slit_strip_eigs(8.0, 1, &SolverControls::default()), Err(Error::InvalidInput(_))));
}

#[test]
fn small_slit_strip_has_a_bound_state() {
    let controls = SolverControls { mesh: MeshControls { resolution: 6, ..MeshControls::default() }, ..SolverControls::default() };
    let (report, mesh, sol) = slit_strip_eigs(6.0, 2, &controls).unwrap();
    assert!(report.eigenvalues[0] > 0.0 && report.eigenvalues[0] < 2.0);
    assert!(report.below_threshold >= 1);
    let ext = embedded_mode_extension(&mesh, &sol.modes[0], 1e-12).unwrap();
    assert!(ext.jump < 1e-12);
    assert_relative_eq!(ext.norm_ratio, 2.0, max_relative = 1e-12);
    let n = mesh.vertices.len();
    for v in 0..n {
        assert_eq!(ext.values[v + n], -ext.values[v]);
        assert_eq!(ext.mesh.vertices[v + n], [mesh.vertices[v][0], -mesh.vertices[v][1]]);
        if mesh.vertices[v][1] == 0.0 {
            assert_eq!(ext.values[v], 0.0);
        }
    }
    assert!(matches!(embedded_mode_extension(&mesh, &sol.modes[0][1..], 1e-12), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn extension_rejects_a_non_odd_field() {
    let controls = SolverControls { mesh: MeshControls { resolution: 4, ..MeshControls::default() }, ..SolverControls::default() };
    let (_, mesh, sol) = slit_strip_eigs(5.0, 2, &controls).unwrap();
    // a field that does not vanish on the identified lines cannot be glued
    let bumped: Vec<f64> = sol.modes[0].iter().zip(&mesh.vertices).map(|(u, p)| u + 0.1 * p[0].cos()).collect();
    assert!(matches!(embedded_mode_extension(&mesh, &bumped, 1e-12), Err(Error::MatchingFailure(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dtn_eigenvalues_positive_off_zero(a in 0.2..10.0f64, r in 0.05..5.0f64, s in 1e-4..3.0f64) {
        for b in dtn_blocks(a, r, -s * s, 8).unwrap() {
            prop_assert!(b.eigenvalues[0] > 0.0 && b.eigenvalues[1] >= b.eigenvalues[0]);
        }
        let ratio = lowest_eigenvalue(a, r, s).unwrap() / s;
        prop_assert!((1.0..=1.0 + s * r + 1e-15).contains(&ratio));
    }

    #[test]
    fn cylinder_kernel_positive_and_periodic(x in -3.0..3.0f64, y in 0.0..1.0f64, yp in 0.0..1.0f64, t in 0.01..5.0f64, k in -3i32..3) {
        let a = 1.0;
        let h = heat_kernel_cylinder(x, y, 0.0, yp, t, a).unwrap();
        prop_assert!(h >= 0.0);
        let shifted = heat_kernel_cylinder(x, y, 0.0, yp + k as f64 * a, t, a).unwrap();
        prop_assert!((h - shifted).abs() <= 1e-14 * h.max(1e-300) + 1e-300);
    }
}
