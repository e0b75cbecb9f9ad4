//! End-to-end use of the public API.

use std::f64::consts::PI;

use qmc_tsfp::{
    cbc_construct, collocation_estimate, evaluate_potential, generate_points, mc_estimate,
    qmc_estimate, reverse_check, solve, Grid, KernelSign, ParameterDomain, ParameterPoint,
    PotentialSpec, Result, SolverConfig, WaveField, WeightVector,
};

// E[prod_j (1 + c_j xi_j^2)] over xi uniform on [-1, 1]^m is prod_j (1 + c_j / 3).
fn integrand(c: &[f64]) -> impl Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync + '_ {
    move |p: &ParameterPoint| {
        Ok(vec![p
            .xi()
            .iter()
            .zip(c)
            .map(|(x, c)| 1.0 + c * x * x)
            .product()])
    }
}

#[test]
fn lattice_qmc_beats_monte_carlo_on_smooth_integrand() {
    let c = [1.0, 0.5, 0.25, 0.125];
    let exact: f64 = c.iter().map(|c| 1.0 + c / 3.0).product();
    let domain = ParameterDomain::scaled(2.0).unwrap();
    let weights = WeightVector::inverse_power(4, 2.0, 1.0).unwrap();

    let mut qmc_errors = Vec::new();
    for n in [128u64, 1024] {
        let rule = cbc_construct(4, n, &weights, KernelSign::Standard).unwrap();
        let points = generate_points(&rule, 8, 3).unwrap();
        let est = qmc_estimate(&points, domain, integrand(&c)).unwrap();
        let error = (est.mean_scalar() - exact).abs();
        assert!(error < 5.0 * est.rms_scalar() + 1e-15);
        qmc_errors.push(est.rms_scalar());
    }
    // Close to N^-1 for this smooth integrand.
    assert!(qmc_errors[1] < qmc_errors[0] / 4.0);

    let mc = mc_estimate(4, 8 * 1024, 3, domain, integrand(&c)).unwrap();
    assert!((mc.mean_scalar() - exact).abs() < 5.0 * mc.rms_scalar());
    assert!(mc.rms_scalar() > 10.0 * qmc_errors[1]);
}

#[test]
fn collocation_is_exact_for_polynomials() {
    let c = [0.3, 0.7];
    let exact: f64 = c.iter().map(|c| 1.0 + c / 3.0).product();
    let domain = ParameterDomain::scaled(2.0).unwrap();
    let est = collocation_estimate(2, 2, domain, integrand(&c)).unwrap();
    assert!((est.mean_scalar() - exact).abs() < 1e-14);
    assert_eq!(est.evaluations, 4);
}

#[test]
fn random_potential_solve_conserves_mass_and_reverses() {
    let grid = Grid::new(PI, 64).unwrap();
    let spec = PotentialSpec::cosine_family(1.0, 1.0, 2.0, 3).unwrap();
    let domain = ParameterDomain::scaled(2.0).unwrap();
    let point = ParameterPoint::new(vec![0.9, -0.4, 0.1], domain).unwrap();
    let potential = evaluate_potential(&spec, &point, &grid).unwrap();
    let psi0 = WaveField::from_fn(grid, |x| (-4.0 * x * x).exp().into());
    let config = SolverConfig::new(grid, 0.01, 1.0, 1.0).unwrap();

    let record = solve(&psi0, &potential, &config, &[0.5]).unwrap();
    assert_eq!(record.times, vec![0.5, 1.0]);
    let m0 = qmc_tsfp::spectral::discrete_mass(&psi0);
    for m in &record.mass {
        assert!((m - m0).abs() < 1e-13 * m0);
    }
    assert!(reverse_check(&psi0, &potential, &config).unwrap() < 1e-12);
}
