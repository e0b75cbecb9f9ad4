//! Truncated Karhunen–Loève random potential
//! `V_m(xi, x) = v0(x) + sigma * sum_j sqrt(lambda_j) xi_j v_j(x)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{discrete_h1_norm, Grid, WaveField};

/// Box `[-scale/2, scale/2]^m` holding the random parameters.
///
/// `scale = 1` is the unit-volume box the lattice rule lives on; the
/// experiments use `scale = 2`, i.e. `xi` uniform on `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    scale: f64,
}

impl ParameterDomain {
    pub fn theory() -> Self {
        Self { scale: 1.0 }
    }

    pub fn scaled(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "domain scale must be positive, got {scale}"
            )));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Largest admissible `|xi_j|`.
    pub fn half_width(&self) -> f64 {
        0.5 * self.scale
    }
}

impl Default for ParameterDomain {
    fn default() -> Self {
        Self::theory()
    }
}

/// A point `xi` of the parameter box.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterPoint {
    xi: Vec<f64>,
    domain: ParameterDomain,
}

impl ParameterPoint {
    pub fn new(xi: Vec<f64>, domain: ParameterDomain) -> Result<Self> {
        let half = domain.half_width();
        for (index, &value) in xi.iter().enumerate() {
            if !(value.abs() <= half * (1.0 + 1e-14)) {
                return Err(Error::OutOfDomain {
                    index,
                    value,
                    half_width: half,
                });
            }
        }
        Ok(Self { xi, domain })
    }

    /// Maps a point of `[-1/2, 1/2]^m` into `domain` by `xi -> scale * xi`.
    pub fn from_unit(unit: &[f64], domain: ParameterDomain) -> Result<Self> {
        Self::new(unit.iter().map(|u| u * domain.scale()).collect(), domain)
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn dimension(&self) -> usize {
        self.xi.len()
    }

    pub fn domain(&self) -> ParameterDomain {
        self.domain
    }

    /// The first `m` coordinates.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m > self.xi.len() {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.xi.len(),
            });
        }
        Ok(Self {
            xi: self.xi[..m].to_vec(),
            domain: self.domain,
        })
    }
}

/// Deterministic part `v0`.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseProfile {
    Constant(f64),
    /// Samples on the solver grid.
    Tabulated(Vec<f64>),
}

/// Spatial shape `v_j` of one mode.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeShape {
    /// `cos(frequency * x)`.
    Cosine { frequency: f64 },
    /// Samples on the solver grid.
    Tabulated(Vec<f64>),
}

/// One term `sqrt(lambda_j) v_j`; `amplitude` is `sqrt(lambda_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub shape: ModeShape,
}

impl ModeShape {
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            ModeShape::Cosine { frequency } => Ok((0..grid.nodes())
                .map(|k| (frequency * grid.node(k)).cos())
                .collect()),
            ModeShape::Tabulated(values) => {
                grid.check_len(values.len())?;
                Ok(values.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    base: BaseProfile,
    modes: Vec<Mode>,
    sigma: f64,
}

impl PotentialSpec {
    pub fn new(base: BaseProfile, modes: Vec<Mode>, sigma: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument(
                "potential needs at least one mode".into(),
            ));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "intensity sigma must be nonnegative, got {sigma}"
            )));
        }
        for (j, pair) in modes.windows(2).enumerate() {
            if pair[1].amplitude > pair[0].amplitude {
                return Err(Error::InvalidArgument(format!(
                    "mode strengths must be non-increasing (mode {} > mode {})",
                    j + 2,
                    j + 1
                )));
            }
        }
        if let Some(j) = modes
            .iter()
            .position(|mode| !(mode.amplitude.is_finite() && mode.amplitude > 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "mode {} has non-positive strength",
                j + 1
            )));
        }
        Ok(Self { base, modes, sigma })
    }

    /// `offset + sigma * sum_{j=1}^m j^(-decay) xi_j cos(j x)`.
    pub fn cosine_family(offset: f64, sigma: f64, decay: f64, m: usize) -> Result<Self> {
        let modes = (1..=m)
            .map(|j| Mode {
                amplitude: (j as f64).powf(-decay),
                shape: ModeShape::Cosine {
                    frequency: j as f64,
                },
            })
            .collect();
        Self::new(BaseProfile::Constant(offset), modes, sigma)
    }

    pub fn dimension(&self) -> usize {
        self.modes.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn base(&self) -> &BaseProfile {
        &self.base
    }

    /// `lambda_j` for `j = 1 ..= m`.
    pub fn strength(&self, j: usize) -> f64 {
        self.modes[j - 1].amplitude.powi(2)
    }

    /// True when the potential cannot depend on `xi`.
    pub fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }

    /// Keeps the first `m` terms.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.modes.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-term potential to {m} terms",
                self.modes.len()
            )));
        }
        Ok(Self {
            base: self.base.clone(),
            modes: self.modes[..m].to_vec(),
            sigma: self.sigma,
        })
    }

    fn base_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        match &self.base {
            BaseProfile::Constant(c) => Ok(vec![*c; grid.nodes()]),
            BaseProfile::Tabulated(values) => {
                grid.check_len(values.len())?;
                Ok(values.clone())
            }
        }
    }
}

/// A potential spec with its modes sampled on a fixed grid, for repeated
/// evaluation at many parameter points.
#[derive(Clone, Debug)]
pub struct PotentialTable {
    grid: Grid,
    base: Vec<f64>,
    // sigma * sqrt(lambda_j) * v_j(x_k), one row per mode
    scaled_modes: Vec<Vec<f64>>,
}

impl PotentialTable {
    pub fn new(spec: &PotentialSpec, grid: Grid) -> Result<Self> {
        let base = spec.base_values(&grid)?;
        let scaled_modes = spec
            .modes
            .iter()
            .map(|mode| {
                let values = mode.shape.sample(&grid)?;
                let factor = spec.sigma * mode.amplitude;
                Ok(values.into_iter().map(|v| factor * v).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self {
            grid,
            base,
            scaled_modes,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.scaled_modes.len()
    }

    pub fn evaluate(&self, point: &ParameterPoint) -> Result<Vec<f64>> {
        if point.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: point.dimension(),
            });
        }
        let mut values = self.base.clone();
        for (row, &xi) in self.scaled_modes.iter().zip(point.xi()) {
            for (v, m) in values.iter_mut().zip(row) {
                *v += xi * m;
            }
        }
        Ok(values)
    }
}

/// `V_k = v0(x_k) + sigma * sum_j sqrt(lambda_j) xi_j v_j(x_k)`.
pub fn evaluate_potential(
    spec: &PotentialSpec,
    point: &ParameterPoint,
    grid: &Grid,
) -> Result<Vec<f64>> {
    PotentialTable::new(spec, *grid)?.evaluate(point)
}

/// Worst case over the domain of the grid `H^1` norm of `V_{m2} - V_{m1}`:
/// `sigma * sum_{j=m1+1}^{m2} sqrt(lambda_j) * sup|xi_j| * ||v_j||_{H^1}`.
pub fn truncation_tail_bound(
    spec: &PotentialSpec,
    m1: usize,
    m2: usize,
    grid: &Grid,
    domain: ParameterDomain,
) -> Result<f64> {
    if m1 > m2 || m2 > spec.dimension() {
        return Err(Error::InvalidArgument(format!(
            "invalid truncation range {m1}..{m2} for a {}-term potential",
            spec.dimension()
        )));
    }
    let mut total = 0.0;
    for mode in &spec.modes[m1..m2] {
        let values = mode.shape.sample(grid)?;
        let field = WaveField::new(
            *grid,
            values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )?;
        total += mode.amplitude * domain.half_width() * discrete_h1_norm(&field);
    }
    Ok(spec.sigma * total)
}
