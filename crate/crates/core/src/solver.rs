//! Strang time-splitting Fourier pseudospectral integrator for
//! `i psi_t = -psi_xx / 2 + V psi + alpha |psi|^2 psi` on the torus.
//!
//! One step is `K(tau/2) o P(tau) o K(tau/2)` where `K` is the exact kinetic
//! flow in Fourier space and `P` the exact pointwise phase rotation
//! `exp(-i (V + alpha |psi|^2) tau)`. The phase uses `|psi|^2` after the first
//! kinetic half step; `P` preserves `|psi|`, so that is the exact flow.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{discrete_energy, discrete_h1_norm, discrete_mass, Fourier, Grid, WaveField};

/// Relative slack when matching a time against the lattice `n * tau`.
const TIME_LATTICE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    grid: Grid,
    tau: f64,
    final_time: f64,
    alpha: f64,
    steps: usize,
}

impl SolverConfig {
    pub fn new(grid: Grid, tau: f64, final_time: f64, alpha: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {tau}"
            )));
        }
        if !(final_time.is_finite() && final_time >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "final time must be nonnegative, got {final_time}"
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument("alpha must be finite".into()));
        }
        let steps = lattice_index(final_time, tau).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "final time {final_time} is not an integer multiple of tau = {tau}"
            ))
        })?;
        Ok(Self {
            grid,
            tau,
            final_time,
            alpha,
            steps,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `t_n = n * tau`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// Step index `n` with `t_n = t`, if `t` lies on the time lattice.
    pub fn step_of(&self, t: f64) -> Option<usize> {
        lattice_index(t, self.tau).filter(|&n| n <= self.steps)
    }
}

fn lattice_index(t: f64, tau: f64) -> Option<usize> {
    if !(t.is_finite() && t >= 0.0) {
        return None;
    }
    let ratio = t / tau;
    let n = ratio.round();
    if (ratio - n).abs() <= TIME_LATTICE_TOL * n.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

/// States and diagnostics recorded at the checkpoint times.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub fields: Vec<WaveField>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn final_field(&self) -> &WaveField {
        self.fields
            .last()
            .expect("a trajectory always holds the final state")
    }
}

/// Reusable integrator with precomputed kinetic multipliers.
#[derive(Debug, Clone)]
pub struct Solver {
    config: SolverConfig,
    fourier: Fourier,
    // exp(-i u^2 tau / 4) / M and exp(-i u^2 tau / 2) / M in FFT order
    half_kinetic: Vec<Complex64>,
    full_kinetic: Vec<Complex64>,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Self {
        let grid = config.grid;
        let u = grid.wavenumbers_by_slot();
        let phase = |fraction: f64| {
            u.iter()
                .map(|u| scaled_phase(-u * u * config.tau * fraction, grid.nodes()))
                .collect::<Vec<_>>()
        };
        Self {
            config,
            fourier: Fourier::new(grid),
            half_kinetic: phase(0.25),
            full_kinetic: phase(0.5),
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn kinetic(&mut self, psi: &mut [Complex64], multiplier: Multiplier) {
        self.fourier.forward_in_place(psi);
        let table = match multiplier {
            Multiplier::Half => &self.half_kinetic,
            Multiplier::Full => &self.full_kinetic,
        };
        for (c, m) in psi.iter_mut().zip(table) {
            *c *= m;
        }
        self.fourier.inverse_in_place(psi);
    }

    /// Pointwise `psi <- exp(-i (V + alpha |psi|^2) dt) psi`.
    fn phase_rotation(&self, psi: &mut [Complex64], potential: &[f64], dt: f64) -> Result<()> {
        let alpha = self.config.alpha;
        let mut finite = true;
        for (p, v) in psi.iter_mut().zip(potential) {
            let theta = -(v + alpha * p.norm_sqr()) * dt;
            finite &= theta.is_finite();
            let (s, c) = theta.sin_cos();
            *p *= Complex64::new(c, s);
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Numerical(
                "non-finite phase in potential step".into(),
            ))
        }
    }

    /// One unfused Strang step of signed size `dt` (negative runs backwards).
    fn step_signed(&mut self, psi: &mut [Complex64], potential: &[f64], dt: f64) -> Result<()> {
        if dt == self.config.tau {
            self.kinetic(psi, Multiplier::Half);
            self.phase_rotation(psi, potential, dt)?;
            self.kinetic(psi, Multiplier::Half);
        } else {
            let grid = self.config.grid;
            let half: Vec<Complex64> = grid
                .wavenumbers_by_slot()
                .iter()
                .map(|u| scaled_phase(-u * u * dt / 4.0, grid.nodes()))
                .collect();
            let apply = |solver: &mut Self, psi: &mut [Complex64]| {
                solver.fourier.forward_in_place(psi);
                psi.iter_mut().zip(&half).for_each(|(c, m)| *c *= m);
                solver.fourier.inverse_in_place(psi);
            };
            apply(self, psi);
            self.phase_rotation(psi, potential, dt)?;
            apply(self, psi);
        }
        Ok(())
    }

    pub fn strang_step(&mut self, field: &WaveField, potential: &[f64]) -> Result<WaveField> {
        self.check_inputs(field, potential)?;
        let mut psi = field.values().to_vec();
        self.step_signed(&mut psi, potential, self.config.tau)?;
        WaveField::new(self.config.grid, psi)
    }

    /// Advances `psi_in` to every step in `stops` (sorted, each `<= steps`),
    /// calling `observe(n, field)` there. Kinetic half steps between
    /// consecutive non-stop steps are fused into one full step.
    pub fn run(
        &mut self,
        psi_in: &WaveField,
        potential: &[f64],
        stops: &[usize],
        mut observe: impl FnMut(usize, &WaveField) -> Result<()>,
    ) -> Result<()> {
        self.check_inputs(psi_in, potential)?;
        let steps = self.config.steps;
        if let Some(&bad) = stops.iter().find(|&&n| n > steps) {
            return Err(Error::InvalidArgument(format!(
                "stop at step {bad} is beyond the final step {steps}"
            )));
        }
        let grid = self.config.grid;
        let mut stop_iter = stops.iter().copied().peekable();
        let mut field = psi_in.clone();
        while stop_iter.peek() == Some(&0) {
            stop_iter.next();
            observe(0, &field)?;
        }
        if steps == 0 || stop_iter.peek().is_none() {
            return Ok(());
        }
        let tau = self.config.tau;
        let mut psi = field.into_values();
        self.kinetic(&mut psi, Multiplier::Half);
        for n in 1..=steps {
            self.phase_rotation(&mut psi, potential, tau)
                .map_err(|e| Error::Numerical(format!("{e} at step {n}")))?;
            if stop_iter.peek() == Some(&n) {
                self.kinetic(&mut psi, Multiplier::Half);
                field = WaveField::new(grid, psi)?;
                while stop_iter.peek() == Some(&n) {
                    stop_iter.next();
                    observe(n, &field)?;
                }
                if stop_iter.peek().is_none() {
                    return Ok(());
                }
                psi = field.into_values();
                self.kinetic(&mut psi, Multiplier::Half);
            } else {
                self.kinetic(&mut psi, Multiplier::Full);
            }
        }
        Ok(())
    }

    /// Integrates to the configured final time and records the state, mass and
    /// energy at each checkpoint time. The final time is always recorded.
    pub fn solve(
        &mut self,
        psi_in: &WaveField,
        potential: &[f64],
        checkpoints: &[f64],
    ) -> Result<TrajectoryRecord> {
        let mut stops = checkpoints
            .iter()
            .map(|&t| {
                self.config.step_of(t).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "checkpoint {t} is not on the time lattice of step {} up to {}",
                        self.config.tau, self.config.final_time
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        stops.push(self.config.steps);
        stops.sort_unstable();
        stops.dedup();

        let alpha = self.config.alpha;
        let tau = self.config.tau;
        let mut record = TrajectoryRecord {
            times: Vec::with_capacity(stops.len()),
            fields: Vec::with_capacity(stops.len()),
            mass: Vec::with_capacity(stops.len()),
            energy: Vec::with_capacity(stops.len()),
        };
        self.run(psi_in, potential, &stops, |n, field| {
            field.ensure_finite("trajectory")?;
            record.times.push(n as f64 * tau);
            record.mass.push(discrete_mass(field));
            record
                .energy
                .push(discrete_energy(field, potential, alpha)?);
            record.fields.push(field.clone());
            Ok(())
        })?;
        Ok(record)
    }

    /// Final state only.
    pub fn solve_final(&mut self, psi_in: &WaveField, potential: &[f64]) -> Result<WaveField> {
        let mut out = None;
        self.run(psi_in, potential, &[self.config.steps], |_, field| {
            out = Some(field.clone());
            Ok(())
        })?;
        let out = out.expect("final step is always observed");
        out.ensure_finite("final state")?;
        Ok(out)
    }

    /// Steps forward by `tau` then backward by `tau`; returns the discrete
    /// `H^1` norm of the defect.
    pub fn reverse_check(&mut self, field: &WaveField, potential: &[f64]) -> Result<f64> {
        self.check_inputs(field, potential)?;
        let mut psi = field.values().to_vec();
        let tau = self.config.tau;
        self.step_signed(&mut psi, potential, tau)?;
        self.step_signed(&mut psi, potential, -tau)?;
        let defect: Vec<Complex64> = psi.iter().zip(field.values()).map(|(a, b)| a - b).collect();
        Ok(discrete_h1_norm(&WaveField::new(self.config.grid, defect)?))
    }

    fn check_inputs(&self, field: &WaveField, potential: &[f64]) -> Result<()> {
        let grid = self.config.grid;
        if *field.grid() != grid {
            return Err(Error::InvalidArgument(
                "field is not on the solver grid".into(),
            ));
        }
        grid.check_len(potential.len())
    }
}

#[derive(Clone, Copy)]
enum Multiplier {
    Half,
    Full,
}

pub fn strang_step(
    field: &WaveField,
    potential: &[f64],
    config: &SolverConfig,
) -> Result<WaveField> {
    Solver::new(*config).strang_step(field, potential)
}

pub fn solve(
    psi_in: &WaveField,
    potential: &[f64],
    config: &SolverConfig,
    checkpoints: &[f64],
) -> Result<TrajectoryRecord> {
    Solver::new(*config).solve(psi_in, potential, checkpoints)
}

pub fn reverse_check(field: &WaveField, potential: &[f64], config: &SolverConfig) -> Result<f64> {
    Solver::new(*config).reverse_check(field, potential)
}

/// `exp(i theta) / nodes`, nudged by a few ulps per component so that its
/// modulus matches `1 / nodes` far below double precision. A rounded
/// multiplier applied every step would otherwise drift the mass by about one
/// ulp per step.
fn scaled_phase(theta: f64, nodes: usize) -> Complex64 {
    let d = nodes as f64;
    let d2 = d * d;
    // 1 / d^2 as an unevaluated sum t1 + t2
    let t1 = 1.0 / d2;
    let t2 = (-d2).mul_add(t1, 1.0) / d2;
    let excess = |x: f64, y: f64| {
        let a1 = x * x;
        let a2 = x.mul_add(x, -a1);
        let b1 = y * y;
        let b2 = y.mul_add(y, -b1);
        let hi = a1 + b1;
        let bb = hi - a1;
        let lo = (a1 - (hi - bb)) + (b1 - bb);
        ((hi - t1) + (lo - t2) + a2 + b2).abs()
    };
    let (s, c) = theta.sin_cos();
    let (x0, y0) = (c / d, s / d);
    let mut best = (excess(x0, y0), x0, y0);
    for i in -4i64..=4 {
        for j in -4i64..=4 {
            let (x, y) = (nudge(x0, i), nudge(y0, j));
            let e = excess(x, y);
            if e < best.0 {
                best = (e, x, y);
            }
        }
    }
    Complex64::new(best.1, best.2)
}

/// Moves `v` by `k` units in the last place.
fn nudge(v: f64, k: i64) -> f64 {
    if v == 0.0 || k == 0 {
        return v;
    }
    let bits = v.to_bits() as i64;
    f64::from_bits((bits + k) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{evaluate_potential, ParameterDomain, ParameterPoint, PotentialSpec};
    use std::f64::consts::PI;

    fn pi_grid(m: usize) -> Grid {
        Grid::new(PI, m).unwrap()
    }

    fn gaussian(grid: Grid, amp: f64, beta: f64) -> WaveField {
        WaveField::from_fn(grid, |x| Complex64::new(amp * (-beta * x * x).exp(), 0.0))
    }

    fn max_diff(a: &WaveField, b: &WaveField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn config_validation() {
        let g = pi_grid(16);
        assert!(SolverConfig::new(g, 0.0, 1.0, 1.0).is_err());
        assert!(SolverConfig::new(g, 0.3, 1.0, 1.0).is_err());
        let c = SolverConfig::new(g, 1e-3, 1.0, 1.0).unwrap();
        assert_eq!(c.steps(), 1000);
        assert_eq!(
            SolverConfig::new(g, 1.0 / 320.0, 1.0, 0.0).unwrap().steps(),
            320
        );
        assert_eq!(c.step_of(0.5), Some(500));
        assert_eq!(c.step_of(0.5005), None);
        assert_eq!(c.step_of(2.0), None);
    }

    #[test]
    fn free_plane_wave_step() {
        let grid = pi_grid(16);
        let tau = 0.1;
        let config = SolverConfig::new(grid, tau, tau, 0.0).unwrap();
        let psi = WaveField::from_fn(grid, |x| Complex64::from_polar(1.0, x));
        let out = strang_step(&psi, &vec![0.0; 16], &config).unwrap();
        let exact = WaveField::from_fn(grid, |x| Complex64::from_polar(1.0, x - tau / 2.0));
        assert!(max_diff(&out, &exact) < 1e-13);
    }

    #[test]
    fn constant_potential_is_a_global_phase() {
        let grid = pi_grid(32);
        let tau = 0.05;
        let c = 1.7;
        let config = SolverConfig::new(grid, tau, tau, 0.0).unwrap();
        let psi = gaussian(grid, 1.0, 2.0);
        let out = strang_step(&psi, &vec![c; 32], &config).unwrap();
        let free = strang_step(&psi, &vec![0.0; 32], &config).unwrap();
        let rotation = Complex64::from_polar(1.0, -c * tau);
        for (a, b) in out.values().iter().zip(free.values()) {
            assert!((a - rotation * b).norm() < 1e-13);
        }
    }

    #[test]
    fn phase_rotation_preserves_modulus() {
        let grid = pi_grid(32);
        let config = SolverConfig::new(grid, 0.1, 0.1, 3.0).unwrap();
        let solver = Solver::new(config);
        let psi = gaussian(grid, 1.3, 1.0);
        let mut rotated = psi.values().to_vec();
        let v: Vec<f64> = grid.coordinates().iter().map(|x| x.sin() * 5.0).collect();
        solver.phase_rotation(&mut rotated, &v, 0.1).unwrap();
        for (a, b) in rotated.iter().zip(psi.values()) {
            assert!((a.norm() - b.norm()).abs() <= 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn nonlinear_plane_wave_matches_closed_form() {
        let grid = pi_grid(16);
        let a = 0.5;
        let alpha = 1.0;
        let omega = 0.5 + alpha * a * a;
        for tau in [1e-2, 5e-3] {
            let config = SolverConfig::new(grid, tau, 1.0, alpha).unwrap();
            let psi = WaveField::from_fn(grid, |x| Complex64::from_polar(a, x));
            let rec = solve(&psi, &vec![0.0; 16], &config, &[]).unwrap();
            let exact = WaveField::from_fn(grid, |x| Complex64::from_polar(a, x - omega));
            assert!(max_diff(rec.final_field(), &exact) < 10.0 * tau * tau);
        }
    }

    #[test]
    fn zero_final_time_records_initial_state() {
        let grid = pi_grid(16);
        let config = SolverConfig::new(grid, 0.1, 0.0, 1.0).unwrap();
        let psi = gaussian(grid, 1.0, 1.0);
        let rec = solve(&psi, &vec![0.0; 16], &config, &[]).unwrap();
        assert_eq!(rec.times, vec![0.0]);
        assert_eq!(rec.fields[0], psi);
    }

    #[test]
    fn checkpoint_must_be_on_time_lattice() {
        let grid = pi_grid(16);
        let config = SolverConfig::new(grid, 0.1, 1.0, 1.0).unwrap();
        let psi = gaussian(grid, 1.0, 1.0);
        assert!(solve(&psi, &vec![0.0; 16], &config, &[0.25]).is_err());
        let rec = solve(&psi, &vec![0.0; 16], &config, &[0.0, 0.5, 0.5]).unwrap();
        assert_eq!(rec.times.len(), 3);
        assert!(rec.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fused_run_matches_unfused_steps() {
        let grid = pi_grid(64);
        let spec = PotentialSpec::cosine_family(1.0, 1.0, 2.0, 3).unwrap();
        let point =
            ParameterPoint::new(vec![0.7, -0.4, 0.9], ParameterDomain::scaled(2.0).unwrap())
                .unwrap();
        let v = evaluate_potential(&spec, &point, &grid).unwrap();
        let config = SolverConfig::new(grid, 0.01, 0.5, 1.0).unwrap();
        let psi = gaussian(grid, (8.0 / PI).sqrt(), 8.0);
        let rec = solve(&psi, &v, &config, &[0.2, 0.37]).unwrap();

        let mut solver = Solver::new(config);
        let mut state = psi.clone();
        let mut unfused = Vec::new();
        for n in 1..=50 {
            state = solver.strang_step(&state, &v).unwrap();
            if n == 20 || n == 37 || n == 50 {
                unfused.push(state.clone());
            }
        }
        for (a, b) in rec.fields.iter().zip(&unfused) {
            assert!(max_diff(a, b) < 1e-13);
        }
    }

    #[test]
    fn mass_conserved() {
        let grid = pi_grid(64);
        let v: Vec<f64> = grid
            .coordinates()
            .iter()
            .map(|x| 2.0 + 3.0 * (2.0 * x).cos())
            .collect();
        let config = SolverConfig::new(grid, 1e-3, 1.0, 5.0).unwrap();
        let psi = WaveField::from_fn(grid, |x| {
            Complex64::new((-x * x).exp(), 0.5 * (x).sin() * (-x * x).exp())
        });
        let checkpoints: Vec<f64> = (1..10).map(|i| i as f64 * 0.1).collect();
        let rec = solve(&psi, &v, &config, &checkpoints).unwrap();
        let m0 = discrete_mass(&psi);
        for m in &rec.mass {
            assert!((m - m0).abs() <= 1e-12 * m0);
        }
    }

    #[test]
    fn reverse_defects() {
        let grid = pi_grid(64);
        let config = SolverConfig::new(grid, 1e-2, 1e-2, 1.0).unwrap();
        let zero = WaveField::zeros(grid);
        assert_eq!(reverse_check(&zero, &vec![0.0; 64], &config).unwrap(), 0.0);

        let v: Vec<f64> = grid.coordinates().iter().map(|x| 1.0 + x.cos()).collect();
        let psi = gaussian(grid, (8.0 / PI).sqrt(), 8.0);
        let linear = SolverConfig::new(grid, 1e-2, 1e-2, 0.0).unwrap();
        assert!(reverse_check(&psi, &v, &linear).unwrap() <= 1e-12);
        assert!(reverse_check(&psi, &v, &config).unwrap() <= 1e-11);
    }

    #[test]
    fn nan_input_is_reported() {
        let grid = pi_grid(16);
        let config = SolverConfig::new(grid, 0.1, 1.0, 1.0).unwrap();
        let mut psi = gaussian(grid, 1.0, 1.0);
        psi.values_mut()[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            solve(&psi, &vec![0.0; 16], &config, &[]),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn length_mismatch_rejected() {
        let grid = pi_grid(16);
        let config = SolverConfig::new(grid, 0.1, 0.1, 1.0).unwrap();
        let psi = gaussian(grid, 1.0, 1.0);
        assert!(matches!(
            strang_step(&psi, &vec![0.0; 15], &config),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn solution_is_lipschitz_in_parameters() {
        // difference quotients in xi_1 settle as the perturbation shrinks
        let grid = pi_grid(64);
        let spec = PotentialSpec::cosine_family(1.0, 1.0, 2.0, 2).unwrap();
        let domain = ParameterDomain::scaled(2.0).unwrap();
        let config = SolverConfig::new(grid, 1e-2, 1.0, 1.0).unwrap();
        let psi = gaussian(grid, (8.0 / PI).sqrt(), 8.0);
        let mut solver = Solver::new(config);
        let mut run = |xi1: f64| {
            let p = ParameterPoint::new(vec![xi1, 0.3], domain).unwrap();
            let v = evaluate_potential(&spec, &p, &grid).unwrap();
            solver.solve_final(&psi, &v).unwrap()
        };
        let base = run(0.2);
        let quotient = |delta: f64, other: &WaveField| {
            let diff: Vec<Complex64> = other
                .values()
                .iter()
                .zip(base.values())
                .map(|(a, b)| (a - b) / delta)
                .collect();
            discrete_h1_norm(&WaveField::new(grid, diff).unwrap())
        };
        let q1 = quotient(1e-2, &run(0.2 + 1e-2));
        let q2 = quotient(1e-3, &run(0.2 + 1e-3));
        let q3 = quotient(1e-4, &run(0.2 + 1e-4));
        assert!(q1.is_finite() && q1 > 0.0);
        assert!((q2 - q3).abs() < (q1 - q3).abs() + 1e-12);
        assert!((q2 - q3).abs() / q3 < 1e-2);
    }
}
