//! Linear functionals of the density `|psi|^2` and error measures on the grid.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spectral::{discrete_mass, Grid, WaveField};

/// A named observable value with the metadata needed to regenerate it.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableRecord {
    pub name: String,
    pub time: f64,
    pub value: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

/// `h * sum_k x_k^2 |psi_k|^2`.
pub fn second_spatial_moment(field: &WaveField) -> f64 {
    let grid = field.grid();
    let h = grid.spacing();
    h * field
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let x = grid.node(k);
            x * x * v.norm_sqr()
        })
        .sum::<f64>()
}

/// Pointwise `|psi_k|^2`.
pub fn density(field: &WaveField) -> Vec<f64> {
    field.values().iter().map(|v| v.norm_sqr()).collect()
}

/// `||f||_{L^2, grid} = (h * sum_k f_k^2)^(1/2)`.
pub fn grid_l2_norm(values: &[f64], grid: &Grid) -> f64 {
    (grid.spacing() * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub fn l2_relative_error(numeric: &[f64], reference: &[f64], grid: &Grid) -> Result<f64> {
    grid.check_len(numeric.len())?;
    grid.check_len(reference.len())?;
    let norm = grid_l2_norm(reference, grid);
    if norm == 0.0 {
        return Err(Error::InvalidArgument("reference has zero L2 norm".into()));
    }
    let diff: Vec<f64> = numeric.iter().zip(reference).map(|(a, b)| a - b).collect();
    Ok(grid_l2_norm(&diff, grid) / norm)
}

/// `h * sum_k x_k |psi_k|^2 / mass`.
pub fn center_of_mass(field: &WaveField) -> Result<f64> {
    let mass = discrete_mass(field);
    if mass == 0.0 {
        return Err(Error::InvalidArgument(
            "center of mass of a zero field".into(),
        ));
    }
    let grid = field.grid();
    let first: f64 = field
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| grid.node(k) * v.norm_sqr())
        .sum();
    Ok(grid.spacing() * first / mass)
}

/// Pointwise unbiased sample variance.
pub fn sample_variance_field(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut acc = VarianceAccumulator::default();
    for s in samples {
        acc.push(s)?;
    }
    acc.variance()
}

/// Streaming pointwise mean/variance (Welford), deterministic in push order.
#[derive(Clone, Debug, Default)]
pub struct VarianceAccumulator {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VarianceAccumulator {
    pub fn push(&mut self, sample: &[f64]) -> Result<()> {
        if self.count == 0 {
            self.mean = vec![0.0; sample.len()];
            self.m2 = vec![0.0; sample.len()];
        } else if sample.len() != self.mean.len() {
            return Err(Error::LengthMismatch {
                expected: self.mean.len(),
                actual: sample.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(sample) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::InvalidArgument(format!(
                "sample variance needs at least 2 samples, got {}",
                self.count
            )));
        }
        let d = (self.count - 1) as f64;
        Ok(self.m2.iter().map(|m| (m / d).max(0.0)).collect())
    }
}
