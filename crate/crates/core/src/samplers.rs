//! Expectation estimators over the parameter box: randomly shifted lattice
//! QMC, plain Monte Carlo and tensor Gauss–Legendre collocation.
//!
//! Evaluators return a vector (length 1 for scalar observables); estimates are
//! formed componentwise. Evaluations may run on the ambient rayon pool, but
//! every reduction happens afterwards in index order with compensated sums, so
//! results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{ShiftedPointSet, MONTE_CARLO_STREAM};
use crate::potential::{ParameterDomain, ParameterPoint};

/// Largest tensor grid `collocation_estimate` accepts.
pub const COLLOCATION_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorResult {
    pub mean: Vec<f64>,
    /// Componentwise root-mean-square error estimate.
    pub rms: Vec<f64>,
    /// QMC only: one estimate per random shift.
    pub per_shift_means: Vec<Vec<f64>>,
    pub evaluations: usize,
}

impl EstimatorResult {
    /// First component, for scalar observables.
    pub fn mean_scalar(&self) -> f64 {
        self.mean[0]
    }

    pub fn rms_scalar(&self) -> f64 {
        self.rms[0]
    }
}

/// Neumaier-compensated componentwise sum.
#[derive(Clone, Debug)]
pub struct CompensatedSum {
    sum: Vec<f64>,
    carry: Vec<f64>,
}

impl CompensatedSum {
    pub fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            carry: vec![0.0; len],
        }
    }

    pub fn add(&mut self, values: &[f64]) {
        for ((s, c), &v) in self.sum.iter_mut().zip(&mut self.carry).zip(values) {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    pub fn total(&self) -> Vec<f64> {
        self.sum
            .iter()
            .zip(&self.carry)
            .map(|(s, c)| s + c)
            .collect()
    }
}

fn mean_of<'a>(
    values: impl IntoIterator<Item = &'a Vec<f64>>,
    len: usize,
    count: usize,
) -> Vec<f64> {
    let mut acc = CompensatedSum::new(len);
    for v in values {
        acc.add(v);
    }
    acc.total().into_iter().map(|s| s / count as f64).collect()
}

/// `sqrt( sum_i (x_i - mean)^2 / (n (n - 1)) )` componentwise.
fn standard_error<'a>(
    values: impl IntoIterator<Item = &'a Vec<f64>>,
    mean: &[f64],
    count: usize,
) -> Vec<f64> {
    let mut acc = CompensatedSum::new(mean.len());
    let mut sq = vec![0.0; mean.len()];
    for v in values {
        for ((s, x), m) in sq.iter_mut().zip(v).zip(mean) {
            *s = (x - m) * (x - m);
        }
        acc.add(&sq);
    }
    let denom = (count * (count - 1)) as f64;
    acc.total()
        .into_iter()
        .map(|s| (s / denom).sqrt())
        .collect()
}

fn check_len(expected: &mut Option<usize>, value: &[f64]) -> Result<()> {
    match *expected {
        None => {
            *expected = Some(value.len());
            Ok(())
        }
        Some(len) if len == value.len() => Ok(()),
        Some(len) => Err(Error::LengthMismatch {
            expected: len,
            actual: value.len(),
        }),
    }
}

/// Randomly shifted QMC estimate. `sink(r, p, value)` sees every evaluation
/// in index order (`r` outer, `p = 1 ..= N` inner).
pub fn qmc_estimate_with<F, S>(
    points: &ShiftedPointSet,
    domain: ParameterDomain,
    evaluator: F,
    mut sink: S,
) -> Result<EstimatorResult>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync,
    S: FnMut(usize, u64, &[f64]),
{
    let shifts = points.shift_count();
    if shifts < 2 {
        return Err(Error::InvalidArgument(format!(
            "the shift-based rms estimate needs R >= 2, got R = {shifts}"
        )));
    }
    let n = points.rule().points();
    let mut len = None;
    let mut per_shift_means: Vec<Vec<f64>> = Vec::with_capacity(shifts);
    for r in 0..shifts {
        let values: Vec<Result<Vec<f64>>> = (1..=n)
            .into_par_iter()
            .map(|p| {
                let point = ParameterPoint::from_unit(&points.point(r, p), domain)?;
                evaluator(&point)
            })
            .collect();
        let mut acc: Option<CompensatedSum> = None;
        for (i, value) in values.into_iter().enumerate() {
            let p = i as u64 + 1;
            let value = value.map_err(|e| Error::Sample {
                shift: r,
                point: p as usize,
                source: Box::new(e),
            })?;
            check_len(&mut len, &value)?;
            acc.get_or_insert_with(|| CompensatedSum::new(value.len()))
                .add(&value);
            sink(r, p, &value);
        }
        let total = acc.expect("a lattice rule has at least two points").total();
        per_shift_means.push(total.into_iter().map(|s| s / n as f64).collect());
    }
    let width = per_shift_means[0].len();
    let mean = mean_of(&per_shift_means, width, shifts);
    let rms = standard_error(&per_shift_means, &mean, shifts);
    Ok(EstimatorResult {
        mean,
        rms,
        per_shift_means,
        evaluations: shifts * n as usize,
    })
}

pub fn qmc_estimate<F>(
    points: &ShiftedPointSet,
    domain: ParameterDomain,
    evaluator: F,
) -> Result<EstimatorResult>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync,
{
    qmc_estimate_with(points, domain, evaluator, |_, _, _| {})
}

/// The first `count` Monte Carlo points of the seeded stream, in `[-1/2, 1/2)^m`.
/// The stream is consumed point by point, so shorter draws are prefixes of
/// longer ones.
pub fn monte_carlo_points(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MONTE_CARLO_STREAM);
    (0..count)
        .map(|_| (0..m).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect()
}

/// Evaluates the evaluator at the first `count` Monte Carlo points.
pub fn monte_carlo_samples<F>(
    m: usize,
    count: usize,
    seed: u64,
    domain: ParameterDomain,
    evaluator: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync,
{
    let points = monte_carlo_points(m, count, seed);
    let values: Vec<Result<Vec<f64>>> = points
        .par_iter()
        .map(|unit| evaluator(&ParameterPoint::from_unit(unit, domain)?))
        .collect();
    let mut len = None;
    values
        .into_iter()
        .enumerate()
        .map(|(p, v)| {
            let v = v.map_err(|e| Error::Sample {
                shift: 0,
                point: p + 1,
                source: Box::new(e),
            })?;
            check_len(&mut len, &v)?;
            Ok(v)
        })
        .collect()
}

/// Mean and rms estimate of the first `count` samples.
pub fn monte_carlo_reduce(samples: &[Vec<f64>], count: usize) -> Result<EstimatorResult> {
    if count < 2 || count > samples.len() {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo reduction needs 2 <= N <= {}, got {count}",
            samples.len()
        )));
    }
    let used = &samples[..count];
    let width = used[0].len();
    let mean = mean_of(used, width, count);
    let rms = standard_error(used, &mean, count);
    Ok(EstimatorResult {
        mean,
        rms,
        per_shift_means: Vec::new(),
        evaluations: count,
    })
}

/// Plain Monte Carlo with `N_mc` i.i.d. uniform points.
pub fn mc_estimate<F>(
    m: usize,
    n_mc: usize,
    seed: u64,
    domain: ParameterDomain,
    evaluator: F,
) -> Result<EstimatorResult>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync,
{
    if n_mc < 2 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs N >= 2, got {n_mc}"
        )));
    }
    let samples = monte_carlo_samples(m, n_mc, seed, domain, evaluator)?;
    monte_carlo_reduce(&samples, n_mc)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `q`-point Gauss–Legendre rule by Newton iteration on `P_q`.
pub fn gauss_legendre_rule(q: usize) -> Result<QuadratureRule1D> {
    if !(1..=64).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "Gauss-Legendre order must be in 1..=64, got {q}"
        )));
    }
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    // roots come in +- pairs; compute the nonnegative half
    for i in 0..q.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(q, x);
            derivative = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(q, x);
        if dp.is_finite() {
            derivative = dp;
        }
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        nodes[q - 1 - i] = x;
        nodes[i] = -x;
        weights[q - 1 - i] = w;
        weights[i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    Ok(QuadratureRule1D { nodes, weights })
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, prev) = if q == 0 { (1.0, 0.0) } else { (p1, p0) };
    let dp = q as f64 * (x * p - prev) / (x * x - 1.0);
    (p, dp)
}

/// Tensor-product Gauss–Legendre expectation over the parameter box.
pub fn collocation_estimate<F>(
    m: usize,
    q: usize,
    domain: ParameterDomain,
    evaluator: F,
) -> Result<EstimatorResult>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync,
{
    if m == 0 {
        return Err(Error::InvalidArgument("collocation needs m >= 1".into()));
    }
    let total = (q as u64)
        .checked_pow(m as u32)
        .filter(|&t| t <= COLLOCATION_BUDGET)
        .ok_or_else(|| {
            Error::Budget(format!(
                "tensor grid {q}^{m} exceeds {COLLOCATION_BUDGET} points"
            ))
        })?;
    let rule = gauss_legendre_rule(q)?;
    let half = domain.half_width();
    let node_of = |index: u64| -> (Vec<f64>, f64) {
        // lexicographic multi-index, first coordinate slowest
        let mut rest = index;
        let mut xi = vec![0.0; m];
        let mut weight = 1.0;
        for j in (0..m).rev() {
            let i = (rest % q as u64) as usize;
            rest /= q as u64;
            xi[j] = half * rule.nodes[i];
            weight *= 0.5 * rule.weights[i];
        }
        (xi, weight)
    };
    let values: Vec<Result<(f64, Vec<f64>)>> = (0..total)
        .into_par_iter()
        .map(|index| {
            let (xi, weight) = node_of(index);
            let value = evaluator(&ParameterPoint::new(xi, domain)?)?;
            Ok((weight, value))
        })
        .collect();
    let mut len = None;
    let mut acc: Option<CompensatedSum> = None;
    let mut scaled = Vec::new();
    for (index, value) in values.into_iter().enumerate() {
        let (weight, value) = value.map_err(|e| Error::Sample {
            shift: 0,
            point: index,
            source: Box::new(e),
        })?;
        check_len(&mut len, &value)?;
        scaled.clear();
        scaled.extend(value.iter().map(|v| weight * v));
        acc.get_or_insert_with(|| CompensatedSum::new(value.len()))
            .add(&scaled);
    }
    let mean = acc.expect("q >= 1 gives at least one node").total();
    Ok(EstimatorResult {
        rms: vec![0.0; mean.len()],
        mean,
        per_shift_means: Vec::new(),
        evaluations: total as usize,
    })
}
