use mandel_core::spectral::{
    embedded_mode_extension, slit_strip_eigs, truncation_study, Geometry, Mesh, SolverControls, CONTINUUM_THRESHOLD,
};

#[test]
fn slit_strip_has_a_bound_state_below_two() {
    let (report, _, _) = slit_strip_eigs(8.0, 3, &SolverControls::default()).unwrap();
    let lambda = report.extrapolated[0];
    assert!(lambda > 0.0 && lambda <= 2.0 + 1e-2, "{report:?}");
    assert!(report.eigenvalues[0] < CONTINUUM_THRESHOLD);
    assert!(report.below_threshold >= 1);
    // conforming elements approach from above
    for (c, f) in report.coarse_eigenvalues.iter().zip(&report.eigenvalues) {
        assert!(f < c);
    }
    // a simple eigenvalue: the next one is well separated
    assert!(report.eigenvalues[1] - report.eigenvalues[0] > 0.1);
}

#[test]
fn bound_state_is_insensitive_to_truncation() {
    let rows = truncation_study(&[8.0, 10.0, 12.0], &SolverControls::default()).unwrap();
    let base = rows[0].extrapolated;
    assert!((rows[1].extrapolated - base).abs() < 1e-6, "{rows:?}");
    assert!((rows[2].extrapolated - base).abs() < 1e-4, "{rows:?}");
    for w in rows.windows(2) {
        // extending the arms enlarges the domain, so the eigenvalue cannot rise
        assert!(w[1].lambda1 <= w[0].lambda1 + 1e-12);
    }
}

#[test]
fn bound_state_extends_oddly_to_the_doubled_diagram() {
    let (_, mesh, sol) = slit_strip_eigs(8.0, 2, &SolverControls::default()).unwrap();
    let ext = embedded_mode_extension(&mesh, &sol.modes[0], 1e-12).unwrap();
    assert!((ext.norm_ratio - 2.0).abs() < 1e-12);
    assert!(ext.jump < 1e-12);
    assert_eq!(ext.mesh.vertices.len(), 2 * mesh.vertices.len());
    ext.mesh.check_quality(10.0).unwrap();
}

#[test]
fn solves_are_deterministic_and_seed_independent() {
    let controls = SolverControls::default();
    let (a, mesh_a, _) = slit_strip_eigs(8.0, 2, &controls).unwrap();
    let (b, mesh_b, _) = slit_strip_eigs(8.0, 2, &controls).unwrap();
    assert_eq!(a, b);
    assert_eq!(mesh_a.to_text(), mesh_b.to_text());
    let (c, _, _) = slit_strip_eigs(8.0, 2, &SolverControls { seed: 99, ..controls }).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&c.eigenvalues) {
        assert!((x - y).abs() < 1e-9 * x);
    }
}

#[test]
fn exported_mesh_reimports() {
    let (_, mesh, _) = slit_strip_eigs(6.0, 2, &SolverControls::default()).unwrap();
    let back = Mesh::from_text(&mesh.to_text()).unwrap();
    assert_eq!(back, mesh);
    assert_eq!(Geometry::SlitStrip { truncation: 6.0 }.tips().len(), 2);
}
