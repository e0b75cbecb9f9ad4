use std::ffi::{CStr, CString};
use std::ptr;

use qmc_tsfp_ffi::*;

fn last_error() -> String {
    let p = qt_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn cbc_round_trip_through_handles() {
    let gamma = [1.0, 0.25, 1.0 / 9.0];
    let mut rule = ptr::null_mut();
    let status = unsafe { qt_cbc_construct(3, 64, gamma.as_ptr(), QtKernelSign::Standard, &mut rule) };
    assert_eq!(status, QtStatus::Ok);
    let (mut m, mut n) = (0usize, 0u64);
    assert_eq!(unsafe { qt_lattice_rule_shape(rule, &mut m, &mut n) }, QtStatus::Ok);
    assert_eq!((m, n), (3, 64));
    let mut z = [0u64; 3];
    assert_eq!(unsafe { qt_lattice_rule_vector(rule, z.as_mut_ptr(), 3) }, QtStatus::Ok);
    assert_eq!(z[0], 1);

    let mut direct = 0.0;
    let weights = qmc_tsfp::WeightVector::new(gamma.to_vec()).unwrap();
    let expected = qmc_tsfp::cbc_construct(3, 64, &weights, qmc_tsfp::KernelSign::Standard).unwrap();
    assert_eq!(z.as_slice(), expected.z());
    let status = unsafe {
        qt_worst_case_error(z.as_ptr(), gamma.as_ptr(), 3, 64, QtKernelSign::Standard, &mut direct)
    };
    assert_eq!(status, QtStatus::Ok);
    assert!(direct > 0.0);

    assert_eq!(
        unsafe { qt_lattice_rule_vector(rule, z.as_mut_ptr(), 2) },
        QtStatus::InvalidArgument
    );
    assert!(last_error().contains("dimension 3"));
    unsafe { qt_lattice_rule_free(rule) };
    unsafe { qt_lattice_rule_free(ptr::null_mut()) };
}

#[test]
fn invalid_inputs_report_status_and_message() {
    let mut out = 0.0;
    assert_eq!(unsafe { qt_bernoulli_kernel(1.5, &mut out) }, QtStatus::InvalidArgument);
    assert!(last_error().contains("outside [0, 1)"));
    assert_eq!(unsafe { qt_bernoulli_kernel(0.0, ptr::null_mut()) }, QtStatus::NullPointer);
    assert_eq!(unsafe { qt_bernoulli_kernel(0.0, &mut out) }, QtStatus::Ok);
    assert!((out - 1.0 / 6.0).abs() < 1e-16);
    assert!(qt_last_error_message().is_null());

    let mut rule = ptr::null_mut();
    let status = unsafe { qt_cbc_construct(2, 16, ptr::null(), QtKernelSign::Standard, &mut rule) };
    assert_eq!(status, QtStatus::NullPointer);
    assert!(rule.is_null());

    let mut solver = ptr::null_mut();
    let status = unsafe { qt_solver_new(3.0, 16, 0.3, 1.0, 1.0, &mut solver) };
    assert_eq!(status, QtStatus::InvalidArgument);
    assert!(solver.is_null());
}

#[test]
fn solver_and_potential_match_library() {
    let (half_width, nodes) = (std::f64::consts::PI, 32usize);
    let mut potential = ptr::null_mut();
    let status = unsafe { qt_potential_cosine_new(1.0, 1.0, 2.0, 3, half_width, nodes, &mut potential) };
    assert_eq!(status, QtStatus::Ok);
    let xi = [0.5, -0.25, 0.75];
    let mut v = vec![0.0; nodes];
    let status = unsafe { qt_potential_evaluate(potential, xi.as_ptr(), 3, 2.0, v.as_mut_ptr(), nodes) };
    assert_eq!(status, QtStatus::Ok);
    let outside = [1.5, 0.0, 0.0];
    let status = unsafe { qt_potential_evaluate(potential, outside.as_ptr(), 3, 2.0, v.as_mut_ptr(), nodes) };
    assert_eq!(status, QtStatus::InvalidArgument);
    unsafe { qt_potential_free(potential) };

    let grid = qmc_tsfp::Grid::new(half_width, nodes).unwrap();
    let psi0 = qmc_tsfp::WaveField::from_fn(grid, |x| (-2.0 * x * x).exp().into());
    let mut re: Vec<f64> = psi0.values().iter().map(|c| c.re).collect();
    let mut im: Vec<f64> = psi0.values().iter().map(|c| c.im).collect();

    let mut solver = ptr::null_mut();
    assert_eq!(unsafe { qt_solver_new(half_width, nodes, 0.01, 0.5, 1.0, &mut solver) }, QtStatus::Ok);
    let status = unsafe { qt_solver_run(solver, re.as_mut_ptr(), im.as_mut_ptr(), v.as_ptr(), nodes) };
    assert_eq!(status, QtStatus::Ok);
    unsafe { qt_solver_free(solver) };

    let config = qmc_tsfp::SolverConfig::new(grid, 0.01, 0.5, 1.0).unwrap();
    let expected = qmc_tsfp::Solver::new(config).solve_final(&psi0, &v).unwrap();
    for ((a, b), c) in re.iter().zip(&im).zip(expected.values()) {
        assert_eq!(a.to_bits(), c.re.to_bits());
        assert_eq!(b.to_bits(), c.im.to_bits());
    }
}

#[test]
fn run_experiment_writes_outputs_and_maps_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cbc.json");
    std::fs::write(
        &config,
        r#"{
            "grid": { "half_width_pi": 1.0, "nodes": 16 },
            "time": { "tau": 0.1, "final_time": 0.1 },
            "physics": {
                "alpha": 1.0,
                "initial": { "kind": "gaussian", "amplitude": 1.0, "beta": 1.0 },
                "potential": { "family": "cosine", "offset": 1.0, "decay": 2.0, "m": 4 }
            },
            "sampling": { "n": [32], "seed": 1 }
        }"#,
    )
    .unwrap();
    let out = dir.path().join("z.txt");
    let c = |s: &str| CString::new(s).unwrap();
    let (kind, cfg, path) = (c("construct-cbc"), c(config.to_str().unwrap()), c(out.to_str().unwrap()));
    let status = unsafe { qt_run_experiment(kind.as_ptr(), cfg.as_ptr(), path.as_ptr(), 1, false) };
    assert_eq!(status, QtStatus::Ok);
    assert!(out.exists());
    assert!(dir.path().join("z_summary.csv").exists());

    let bad = c("no-such-kind");
    let status = unsafe { qt_run_experiment(bad.as_ptr(), cfg.as_ptr(), path.as_ptr(), 1, false) };
    assert_eq!(status, QtStatus::Config);
    let missing = c(dir.path().join("missing.json").to_str().unwrap());
    let status = unsafe { qt_run_experiment(kind.as_ptr(), missing.as_ptr(), path.as_ptr(), 1, false) };
    assert_eq!(status, QtStatus::Config);
    let status = unsafe { qt_run_experiment(ptr::null(), cfg.as_ptr(), path.as_ptr(), 1, false) };
    assert_eq!(status, QtStatus::NullPointer);
}
