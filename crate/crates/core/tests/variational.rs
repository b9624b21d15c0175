use mandel_core::surface::{build_form, Diagram};
use mandel_core::varcheck::{moduli_parameters, random_surface, verify_variational, ConventionTable, VarcheckConfig};
use mandel_core::Tolerances;

fn diagram(genus: usize, n: usize, seed: u64) -> Diagram {
    let s = random_surface(genus, n, seed).unwrap();
    Diagram::new(build_form(s, &Tolerances::default()).unwrap(), false).unwrap()
}

#[test]
fn seeded_configurations_satisfy_the_chain_rule() {
    for (genus, n) in [(0, 4), (1, 2)] {
        for seed in 0..10 {
            let d = diagram(genus, n, seed);
            let out = verify_variational(&d, &moduli_parameters(d.form.surface()), &VarcheckConfig::default()).unwrap();
            assert!(out.max_discrepancy < 1e-6, "genus {genus} seed {seed}: {}", out.max_discrepancy);
            assert!(out.converged, "genus {genus} seed {seed}: {} vs {}", out.fine_discrepancy, out.coarse_discrepancy);
            assert!(out.coarse_discrepancy >= 3.0 * out.fine_discrepancy);
        }
    }
}

#[test]
fn larger_configurations_pass() {
    for (genus, n) in [(0, 5), (0, 6), (1, 3)] {
        for seed in 0..3 {
            let d = diagram(genus, n, seed);
            let out = verify_variational(&d, &moduli_parameters(d.form.surface()), &VarcheckConfig::default()).unwrap();
            assert!(out.passed, "genus {genus} n {n} seed {seed}: {}", out.max_discrepancy);
        }
    }
}

#[test]
fn corrupted_table_fails_everywhere() {
    let config = VarcheckConfig { table: ConventionTable::corrupted(), ..VarcheckConfig::default() };
    for (genus, n) in [(0, 4), (1, 2)] {
        for seed in 0..4 {
            let d = diagram(genus, n, seed);
            let out = verify_variational(&d, &moduli_parameters(d.form.surface()), &config).unwrap();
            assert!(out.max_discrepancy > 1e-2, "genus {genus} seed {seed}: {}", out.max_discrepancy);
        }
    }
}
