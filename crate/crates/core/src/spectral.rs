//! Uniform periodic grid on `[-L, L]`, discrete Fourier analysis/synthesis in
//! the symmetric band `l = -M/2 .. M/2-1`, and the discrete norms shared by the
//! solver and the observables.
//!
//! Coefficients follow the convention
//! `c_l = (1/M) sum_k psi_k exp(-i u_l (x_k + L))` with `u_l = pi l / L`, so the
//! `1/M` scaling lives in analysis and synthesis is a plain sum.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlannerScalar};

use crate::error::{Error, Result};

/// Uniform grid `x_k = -L + k h`, `h = 2L / M`, `k = 0 .. M-1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    half_width: f64,
    nodes: usize,
}

impl Grid {
    pub fn new(half_width: f64, nodes: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid half-width must be positive and finite, got {half_width}"
            )));
        }
        if nodes < 4 || !nodes.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "grid node count must be even and at least 4, got {nodes}"
            )));
        }
        Ok(Self { half_width, nodes })
    }

    /// Half-width `L` of the torus `[-L, L]`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of nodes `M`.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Mesh size `h = 2L / M`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.nodes as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        -self.half_width + 2.0 * self.half_width * k as f64 / self.nodes as f64
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes).map(|k| self.node(k)).collect()
    }

    /// Wavenumber `u_l = pi l / L`.
    pub fn wavenumber(&self, l: i64) -> f64 {
        PI * l as f64 / self.half_width
    }

    pub fn lowest_mode(&self) -> i64 {
        -(self.nodes as i64) / 2
    }

    /// Modes `l = -M/2 .. M/2-1` in increasing order.
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let half = self.nodes as i64 / 2;
        -half..half
    }

    /// Storage slot of mode `l` (FFT ordering).
    pub(crate) fn slot(&self, l: i64) -> usize {
        l.rem_euclid(self.nodes as i64) as usize
    }

    /// Mode stored in slot `i` (FFT ordering).
    pub(crate) fn mode_at(&self, i: usize) -> i64 {
        let half = self.nodes / 2;
        if i < half {
            i as i64
        } else {
            i as i64 - self.nodes as i64
        }
    }

    /// Wavenumbers in storage order.
    pub(crate) fn wavenumbers_by_slot(&self) -> Vec<f64> {
        (0..self.nodes)
            .map(|i| self.wavenumber(self.mode_at(i)))
            .collect()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.nodes {
            return Err(Error::LengthMismatch {
                expected: self.nodes,
                actual: len,
            });
        }
        Ok(())
    }
}

/// Complex samples of a wave function at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.nodes()],
        }
    }

    /// Samples `f(x_k)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.nodes()).map(|k| f(grid.node(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Evaluates the trigonometric interpolant `I_M psi` on another grid over
    /// the same torus. Modes the target grid cannot represent are dropped.
    pub fn resample(&self, target: Grid) -> Result<WaveField> {
        if (target.half_width() - self.grid.half_width()).abs() > 1e-14 * self.grid.half_width() {
            return Err(Error::InvalidArgument(
                "resampling requires grids on the same torus".into(),
            ));
        }
        let coeffs = analyze(self);
        let mut fine = SpectralCoefficients::zeros(target);
        for (l, c) in coeffs.iter() {
            if l >= target.lowest_mode() && l < -target.lowest_mode() {
                fine.set(l, c);
            }
        }
        Ok(synthesize(&fine))
    }

    pub(crate) fn ensure_finite(&self, context: &str) -> Result<()> {
        if let Some(k) = self
            .values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::Numerical(format!("{context}: node {k}")));
        }
        Ok(())
    }
}

/// Discrete Fourier coefficients indexed by `l = -M/2 .. M/2-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoefficients {
    grid: Grid,
    // FFT storage order: slot i holds mode `grid.mode_at(i)`.
    coeffs: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.nodes()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(i64) -> Complex64) -> Self {
        let coeffs = (0..grid.nodes()).map(|i| f(grid.mode_at(i))).collect();
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Coefficient of mode `l`. Panics if `l` is outside the band.
    pub fn get(&self, l: i64) -> Complex64 {
        self.assert_in_band(l);
        self.coeffs[self.grid.slot(l)]
    }

    pub fn set(&mut self, l: i64, value: Complex64) {
        self.assert_in_band(l);
        let slot = self.grid.slot(l);
        self.coeffs[slot] = value;
    }

    /// `(l, c_l)` pairs in increasing `l`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.grid.modes().map(move |l| (l, self.get(l)))
    }

    /// Euclidean norm of the coefficient vector.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Evaluates `I_M psi(x) = sum_l c_l exp(i u_l (x + L))` at an arbitrary point.
    pub fn evaluate(&self, x: f64) -> Complex64 {
        let shift = x + self.grid.half_width();
        self.iter()
            .map(|(l, c)| c * Complex64::from_polar(1.0, self.grid.wavenumber(l) * shift))
            .sum()
    }

    fn assert_in_band(&self, l: i64) {
        let low = self.grid.lowest_mode();
        assert!(
            l >= low && l < -low,
            "mode {l} outside band [{low}, {})",
            -low
        );
    }
}

/// Planned forward/inverse transforms for one grid size.
#[derive(Clone)]
pub struct Fourier {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlannerScalar::new();
        let forward = planner.plan_fft_forward(grid.nodes());
        let inverse = planner.plan_fft_inverse(grid.nodes());
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// In-place unnormalized forward DFT (storage order).
    pub(crate) fn forward_in_place(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// In-place unnormalized inverse DFT (storage order).
    pub(crate) fn inverse_in_place(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn analyze(&mut self, field: &WaveField) -> SpectralCoefficients {
        let mut coeffs = field.values.clone();
        self.forward_in_place(&mut coeffs);
        let scale = 1.0 / self.grid.nodes() as f64;
        coeffs.iter_mut().for_each(|c| *c *= scale);
        SpectralCoefficients {
            grid: field.grid,
            coeffs,
        }
    }

    pub fn synthesize(&mut self, coeffs: &SpectralCoefficients) -> WaveField {
        let mut values = coeffs.coeffs.clone();
        self.inverse_in_place(&mut values);
        WaveField {
            grid: coeffs.grid,
            values,
        }
    }
}

pub fn analyze(field: &WaveField) -> SpectralCoefficients {
    Fourier::new(field.grid).analyze(field)
}

pub fn synthesize(coeffs: &SpectralCoefficients) -> WaveField {
    Fourier::new(coeffs.grid).synthesize(coeffs)
}

/// Multiplies every coefficient by `phase(u_l)`. With `unitary` set, a
/// multiplier of non-unit modulus is rejected.
pub fn apply_multiplier(
    coeffs: &SpectralCoefficients,
    phase: impl Fn(f64) -> Complex64,
    unitary: bool,
) -> Result<SpectralCoefficients> {
    let grid = coeffs.grid;
    let mut out = coeffs.clone();
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        let u = grid.wavenumber(grid.mode_at(i));
        let p = phase(u);
        if unitary && (p.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "multiplier at u = {u} has modulus {}, expected 1",
                p.norm()
            )));
        }
        *c *= p;
    }
    Ok(out)
}

/// Spectral first derivative; the unmatched mode `l = -M/2` is zeroed.
pub fn spectral_derivative(field: &WaveField) -> WaveField {
    let grid = field.grid;
    let mut fourier = Fourier::new(grid);
    let mut coeffs = fourier.analyze(field);
    let nyquist = grid.slot(grid.lowest_mode());
    for (i, c) in coeffs.coeffs.iter_mut().enumerate() {
        if i == nyquist {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, grid.wavenumber(grid.mode_at(i)));
        }
    }
    fourier.synthesize(&coeffs)
}

/// `h * sum_k |psi_k|^2`.
pub fn discrete_mass(field: &WaveField) -> f64 {
    field.grid.spacing() * field.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

/// `h * sum_k [ |d_x psi_k|^2 / 2 + V_k |psi_k|^2 + alpha |psi_k|^4 / 2 ]`.
pub fn discrete_energy(field: &WaveField, potential: &[f64], alpha: f64) -> Result<f64> {
    field.grid.check_len(potential.len())?;
    let derivative = spectral_derivative(field);
    let sum: f64 = field
        .values
        .iter()
        .zip(derivative.values.iter())
        .zip(potential)
        .map(|((psi, dpsi), v)| {
            let rho = psi.norm_sqr();
            0.5 * dpsi.norm_sqr() + v * rho + 0.5 * alpha * rho * rho
        })
        .sum();
    Ok(field.grid.spacing() * sum)
}

/// `(2L * sum_l (1 + u_l^2) |c_l|^2)^(1/2)`.
pub fn discrete_h1_norm(field: &WaveField) -> f64 {
    let grid = field.grid;
    let coeffs = analyze(field);
    let sum: f64 = coeffs
        .iter()
        .map(|(l, c)| {
            let u = grid.wavenumber(l);
            (1.0 + u * u) * c.norm_sqr()
        })
        .sum();
    (2.0 * grid.half_width() * sum).sqrt()
}
