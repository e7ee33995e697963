use catalytic_ou::dual_pde::{solve_dual, DualProblem, Forcing, SolveOptions};
use catalytic_ou::kernels::{HeatKernelParams, PeriodicGrid};
use catalytic_ou::superprocess::{simulate_sbm, CatalystPath, ParticleMeasure, SbmOptions};

#[test]
fn catalyst_export_round_trips_counts() {
    let dir = tempfile::tempdir().unwrap();
    let start = ParticleMeasure::point_mass(&[0.0], 1.0, 10);
    let opts = SbmOptions::new(10, 0.2, 0.1);
    let paths: Vec<CatalystPath> =
        (0..2).map(|s| simulate_sbm(&start, &opts, &HeatKernelParams::gaussian(1.0, 1), s).unwrap()).collect();
    CatalystPath::export(&paths, dir.path(), "cat").unwrap();
    let csv = std::fs::read_to_string(dir.path().join("cat.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    let particles: usize = paths.iter().flat_map(|p| p.states.iter().map(|s| s.count())).sum();
    assert_eq!(rows, particles);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cat.json")).unwrap()).unwrap();
    assert_eq!(meta["replicas"], 2);
    assert!(CatalystPath::export(&[], dir.path(), "none").is_err());
}

#[test]
fn dual_solution_export() {
    let dir = tempfile::tempdir().unwrap();
    let grid = PeriodicGrid::new(1, -4.0, 4.0, 32).unwrap();
    let p = DualProblem::new(grid, HeatKernelParams::gaussian(1.0, 1), vec![1.0; 32], Forcing::Zero, 1.0, 0.0, 0.5).unwrap();
    let sol = solve_dual(&p, &SolveOptions::new(0.1).recorded()).unwrap();
    sol.export(dir.path(), "dual").unwrap();
    assert!(dir.path().join("dual.csv").exists());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("dual.json")).unwrap()).unwrap();
    assert!(meta.is_object());
}
