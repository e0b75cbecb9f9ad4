//! Randomly shifted rank-1 lattice rules.
//!
//! Points are `xi^(p) = frac(p z / N + Delta) - 1/2`, `p = 1 ..= N`. The
//! generating vector `z` is built component by component: `z_1 = 1`, then each
//! `z_s` minimizes the shift-averaged worst-case error
//! `e_s(z) = -1 + (1/N) sum_p prod_{j<=s} [1 + gamma_j B(frac(p z_j / N))]`
//! over `U_N = {1 <= x < N : gcd(x, N) = 1}`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the pseudorandom generator used for shifts and Monte Carlo draws.
pub const RNG_NAME: &str = "ChaCha8";
/// ChaCha stream carrying the random shifts.
pub const SHIFT_STREAM: u64 = 0;
/// ChaCha stream carrying Monte Carlo points.
pub const MONTE_CARLO_STREAM: u64 = 1;

/// Candidates within this relative distance of the minimum count as ties and
/// the smallest one wins.
pub const CBC_TIE_TOLERANCE: f64 = 1e-12;

/// Sign convention for the kernel `B`.
///
/// `Standard` uses `B = B_2(x) = x^2 - x + 1/6`, for which `e_s` is a squared
/// error and nonnegative. `Literal` uses `-B_2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSign {
    #[default]
    Standard,
    Literal,
}

impl KernelSign {
    fn factor(self) -> f64 {
        match self {
            KernelSign::Standard => 1.0,
            KernelSign::Literal => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelSign::Standard => "standard",
            KernelSign::Literal => "literal",
        }
    }
}

/// Product weights `gamma_1 .. gamma_m`, all positive.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidArgument("weight vector is empty".into()));
        }
        if let Some(j) = gamma.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weight gamma_{} = {} is not positive",
                j + 1,
                gamma[j]
            )));
        }
        Ok(Self(gamma))
    }

    /// `gamma_j = scale / j^exponent`.
    pub fn inverse_power(m: usize, exponent: f64, scale: f64) -> Result<Self> {
        Self::new(
            (1..=m)
                .map(|j| scale * (j as f64).powf(-exponent))
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `B_2(x) = x^2 - x + 1/6` on `[0, 1)`.
pub fn bernoulli_kernel(x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "Bernoulli kernel argument {x} outside [0, 1)"
        )));
    }
    Ok(b2(x))
}

fn b2(x: f64) -> f64 {
    x * x - x + 1.0 / 6.0
}

/// `sign * B_2(k / n)` for `k = 0 .. n-1`, mirrored so entries `k` and `n - k`
/// are bit-identical.
fn kernel_table(n: u64, sign: KernelSign) -> Vec<f64> {
    let n_us = n as usize;
    let mut table = vec![0.0; n_us];
    for k in 0..=n_us / 2 {
        let v = sign.factor() * b2(k as f64 / n as f64);
        table[k] = v;
        if k > 0 {
            table[n_us - k] = v;
        }
    }
    table
}

/// Shift-averaged worst-case error `e_s(z)` of the prefix `z` with weights
/// `gamma_1 .. gamma_s` (zero weights are accepted here).
pub fn worst_case_error(z: &[u64], n: u64, weights: &[f64], sign: KernelSign) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("lattice size {n} < 2")));
    }
    if z.is_empty() || weights.len() < z.len() {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= s <= number of weights, got s = {} with {} weights",
            z.len(),
            weights.len()
        )));
    }
    let table = kernel_table(n, sign);
    let mut excess = vec![0.0; n as usize];
    for (&zj, &gamma) in z.iter().zip(weights) {
        multiply_factor(&mut excess, &table, zj % n, gamma);
    }
    Ok(mean(&excess))
}

// The running products are stored as `q = prod - 1` and updated as
// `q + gamma t (1 + q)`, which avoids cancelling against 1 when the error is
// small.

/// `q[p] <- (1 + q[p]) (1 + gamma * table[p x mod n]) - 1` for `p = 0 .. n-1`.
fn multiply_factor(excess: &mut [f64], table: &[f64], x: u64, gamma: f64) {
    let n = table.len();
    let x = x as usize;
    let mut idx = 0usize;
    for q in excess.iter_mut() {
        *q += gamma * table[idx] * (1.0 + *q);
        idx += x;
        if idx >= n {
            idx -= n;
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `e_s` for candidate `x` given the running excess products of the first
/// `s-1` components.
fn candidate_error(excess: &[f64], table: &[f64], x: u64, gamma: f64) -> f64 {
    let n = table.len();
    let x = x as usize;
    let mut idx = 0usize;
    let mut sum = 0.0;
    for q in excess {
        sum += q + gamma * table[idx] * (1.0 + q);
        idx += x;
        if idx >= n {
            idx -= n;
        }
    }
    sum / n as f64
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Euler totient `phi(N) = |U_N|` by trial factorization.
pub fn euler_totient(n: u64) -> u64 {
    let mut result = n;
    let mut rest = n;
    let mut p = 2;
    while p * p <= rest {
        if rest.is_multiple_of(p) {
            while rest.is_multiple_of(p) {
                rest /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if rest > 1 {
        result -= result / rest;
    }
    result
}

/// Rank-1 lattice rule with generating vector `z` and `N` points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeRule {
    z: Vec<u64>,
    n: u64,
}

impl LatticeRule {
    pub fn new(z: Vec<u64>, n: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("lattice size {n} < 2")));
        }
        if z.first() != Some(&1) {
            return Err(Error::InvalidArgument(
                "generating vector must start with z_1 = 1".into(),
            ));
        }
        if let Some(&bad) = z.iter().find(|&&zj| zj == 0 || zj >= n || gcd(zj, n) != 1) {
            return Err(Error::InvalidArgument(format!(
                "component {bad} is not a unit modulo {n}"
            )));
        }
        Ok(Self { z, n })
    }

    pub fn z(&self) -> &[u64] {
        &self.z
    }

    pub fn points(&self) -> u64 {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.z.len()
    }

    /// First `m` components. CBC vectors are nested, so this is the CBC
    /// vector for dimension `m`.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.z.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot take a {m}-prefix of a {}-dimensional rule",
                self.z.len()
            )));
        }
        Ok(Self {
            z: self.z[..m].to_vec(),
            n: self.n,
        })
    }

    /// Plain-text form: a line `N m` followed by one component per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.z.len());
        for zj in &self.z {
            writeln!(out, "{zj}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace().map(|t| {
            t.parse::<u64>().map_err(|e| {
                Error::InvalidArgument(format!("bad generating vector entry {t:?}: {e}"))
            })
        });
        let mut next = |what: &str| {
            tokens
                .next()
                .unwrap_or_else(|| Err(Error::InvalidArgument(format!("missing {what}"))))
        };
        let n = next("N")?;
        let m = next("m")? as usize;
        let z = (0..m)
            .map(|j| next(&format!("component {}", j + 1)))
            .collect::<Result<Vec<_>>>()?;
        if tokens.next().is_some() {
            return Err(Error::InvalidArgument(
                "trailing entries after generating vector".into(),
            ));
        }
        Self::new(z, n)
    }
}

/// Component-by-component construction of an `m`-dimensional generating
/// vector for `N` points. Ties within [`CBC_TIE_TOLERANCE`] go to the smallest
/// candidate.
pub fn cbc_construct(
    m: usize,
    n: u64,
    weights: &WeightVector,
    sign: KernelSign,
) -> Result<LatticeRule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("lattice size {n} < 2")));
    }
    if m == 0 || weights.len() < m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= m <= {} weights, got m = {m}",
            weights.len()
        )));
    }
    let candidates: Vec<u64> = (1..n).filter(|&x| gcd(x, n) == 1).collect();
    let table = kernel_table(n, sign);
    let gamma = weights.as_slice();

    let mut z = vec![1u64];
    let mut excess = vec![0.0; n as usize];
    multiply_factor(&mut excess, &table, 1, gamma[0]);
    for &gamma_s in &gamma[1..m] {
        let errors: Vec<f64> = candidates
            .par_iter()
            .map(|&x| candidate_error(&excess, &table, x, gamma_s))
            .collect();
        let chosen = candidates[argmin_with_ties(&errors)];
        multiply_factor(&mut excess, &table, chosen, gamma_s);
        z.push(chosen);
    }
    LatticeRule::new(z, n)
}

/// Index of the first value within the tie tolerance of the minimum.
fn argmin_with_ties(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = CBC_TIE_TOLERANCE * best.abs().max(f64::MIN_POSITIVE);
    values
        .iter()
        .position(|&v| v <= best + slack)
        .expect("candidate set is nonempty")
}

/// `R` random shifts of a lattice rule. Points are generated on demand from
/// the defining formula, so the set stores only the shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedPointSet {
    rule: LatticeRule,
    shifts: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl ShiftedPointSet {
    /// Uses the given shifts, each in `[0, 1)^m`.
    pub fn with_shifts(rule: LatticeRule, shifts: Vec<Vec<f64>>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::InvalidArgument("need at least one shift".into()));
        }
        for shift in &shifts {
            if shift.len() != rule.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: rule.dimension(),
                    actual: shift.len(),
                });
            }
            if shift.iter().any(|d| !(0.0..1.0).contains(d)) {
                return Err(Error::InvalidArgument("shift outside [0, 1)".into()));
            }
        }
        Ok(Self {
            rule,
            shifts,
            seed: None,
        })
    }

    pub fn rule(&self) -> &LatticeRule {
        &self.rule
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    pub fn shift_count(&self) -> usize {
        self.shifts.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dimension(&self) -> usize {
        self.rule.dimension()
    }

    /// `frac(p z / N + Delta_r) - 1/2` for `p = 1 ..= N`.
    pub fn point(&self, r: usize, p: u64) -> Vec<f64> {
        let n = self.rule.n;
        self.rule
            .z
            .iter()
            .zip(&self.shifts[r])
            .map(|(&zj, &delta)| {
                let residue = ((p as u128 * zj as u128) % n as u128) as f64;
                let t = residue / n as f64 + delta;
                t - t.floor() - 0.5
            })
            .collect()
    }

    /// All `N` points of shift `r`, in order `p = 1 ..= N`.
    pub fn shift_points(&self, r: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        (1..=self.rule.n).map(move |p| self.point(r, p))
    }
}

/// Draws `R` shifts uniformly on `[0, 1)^m` from the seeded shift stream.
pub fn generate_points(rule: &LatticeRule, shifts: usize, seed: u64) -> Result<ShiftedPointSet> {
    if shifts == 0 {
        return Err(Error::InvalidArgument("need at least one shift".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SHIFT_STREAM);
    let m = rule.dimension();
    let deltas = (0..shifts)
        .map(|_| (0..m).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut set = ShiftedPointSet::with_shifts(rule.clone(), deltas)?;
    set.seed = Some(seed);
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(bernoulli_kernel(0.0).unwrap(), 1.0 / 6.0);
        assert!((bernoulli_kernel(0.5).unwrap() + 1.0 / 12.0).abs() < 1e-16);
        assert!(bernoulli_kernel(1.0).is_err());
        assert!(bernoulli_kernel(-0.1).is_err());
    }

    #[test]
    fn kernel_matches_fourier_series_at_point_three() {
        // (1/pi^2) sum_{l>=1} cos(2 pi l x) / l^2, summed smallest terms first
        let x: f64 = 0.3;
        let series: f64 = (1..=1_000_000u64)
            .rev()
            .map(|l| (2.0 * std::f64::consts::PI * l as f64 * x).cos() / (l as f64).powi(2))
            .sum::<f64>()
            / std::f64::consts::PI.powi(2);
        assert!((bernoulli_kernel(x).unwrap() - series).abs() < 1e-8);
    }

    #[test]
    fn kernel_table_is_symmetric() {
        for n in [7u64, 16, 30] {
            let t = kernel_table(n, KernelSign::Standard);
            for k in 1..n as usize {
                assert_eq!(t[k], t[n as usize - k]);
                assert!((t[k] - b2(k as f64 / n as f64)).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_error() {
        assert_eq!(
            worst_case_error(&[1, 3, 5], 16, &[0.0; 3], KernelSign::Standard).unwrap(),
            0.0
        );
    }

    #[test]
    fn two_point_rule_by_hand() {
        let e = worst_case_error(&[1], 2, &[1.0], KernelSign::Standard).unwrap();
        assert!((e - 1.0 / 24.0).abs() < 1e-16);
        let literal = worst_case_error(&[1], 2, &[1.0], KernelSign::Literal).unwrap();
        assert!((literal + 1.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn worst_case_error_is_linear_in_first_weight() {
        let e1 = worst_case_error(&[1], 32, &[0.3], KernelSign::Standard).unwrap();
        let e2 = worst_case_error(&[1], 32, &[0.9], KernelSign::Standard).unwrap();
        assert!((e2 - 3.0 * e1).abs() < 1e-14 * e2);
    }

    #[test]
    fn worst_case_error_permutation_invariant() {
        let a = worst_case_error(&[1, 7, 11], 64, &[1.0, 0.5, 0.2], KernelSign::Standard).unwrap();
        let b = worst_case_error(&[11, 1, 7], 64, &[0.2, 1.0, 0.5], KernelSign::Standard).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn totient_values() {
        assert_eq!(euler_totient(1), 1);
        assert_eq!(euler_totient(16), 8);
        assert_eq!(euler_totient(1 << 10), 512);
        assert_eq!(euler_totient(97), 96);
        assert_eq!(euler_totient(360), 96);
        for n in [1u64 << 10, 1 << 16, 1000, 30030] {
            assert!(1.0 / euler_totient(n) as f64 <= 9.0 / n as f64);
        }
    }

    #[test]
    fn cbc_first_component_is_one() {
        let w = WeightVector::inverse_power(1, 2.0, 1.0).unwrap();
        for n in [2u64, 3, 17, 64] {
            assert_eq!(
                cbc_construct(1, n, &w, KernelSign::Standard).unwrap().z(),
                &[1]
            );
        }
        assert!(cbc_construct(1, 1, &w, KernelSign::Standard).is_err());
        assert!(cbc_construct(2, 16, &w, KernelSign::Standard).is_err());
    }

    #[test]
    fn cbc_is_nested() {
        let w = WeightVector::inverse_power(5, 2.0, 1.0).unwrap();
        let full = cbc_construct(5, 128, &w, KernelSign::Standard).unwrap();
        let short = cbc_construct(3, 128, &w, KernelSign::Standard).unwrap();
        assert_eq!(full.prefix(3).unwrap(), short);
    }

    #[test]
    fn rule_validation_and_text_round_trip() {
        assert!(LatticeRule::new(vec![3, 5], 16).is_err());
        assert!(LatticeRule::new(vec![1, 4], 16).is_err());
        assert!(LatticeRule::new(vec![1, 17], 16).is_err());
        let rule = LatticeRule::new(vec![1, 7, 13], 64).unwrap();
        let text = rule.to_text();
        assert_eq!(text, "64 3\n1\n7\n13\n");
        assert_eq!(LatticeRule::from_text(&text).unwrap(), rule);
        assert_eq!(LatticeRule::from_text("64 3 1 7 13").unwrap(), rule);
        assert!(LatticeRule::from_text("64 3\n1\n7\n").is_err());
        assert!(LatticeRule::from_text("64 2\n1\n7\n9\n").is_err());
    }

    #[test]
    fn unshifted_points() {
        let rule = LatticeRule::new(vec![1], 4).unwrap();
        let set = ShiftedPointSet::with_shifts(rule, vec![vec![0.0]]).unwrap();
        assert_eq!(set.point(0, 1), vec![-0.25]);
        assert_eq!(set.point(0, 4), vec![-0.5]);
        let all: Vec<f64> = set.shift_points(0).map(|p| p[0]).collect();
        assert_eq!(all, vec![-0.25, 0.0, 0.25, -0.5]);
    }

    #[test]
    fn shifted_points_are_shifted_lattice() {
        let w = WeightVector::inverse_power(3, 2.0, 1.0).unwrap();
        let rule = cbc_construct(3, 64, &w, KernelSign::Standard).unwrap();
        let set = generate_points(&rule, 4, 99).unwrap();
        for r in 0..4 {
            for j in 0..3 {
                let mut coords: Vec<f64> = set.shift_points(r).map(|p| p[j]).collect();
                assert!(coords.iter().all(|c| (-0.5..0.5).contains(c)));
                coords.sort_by(f64::total_cmp);
                // every coordinate projection of a rank-1 rule with gcd(z_j, N) = 1
                // is a shifted copy of {0, 1/N, ..., (N-1)/N}
                for pair in coords.windows(2) {
                    assert!((pair[1] - pair[0] - 1.0 / 64.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn point_generation_is_reproducible() {
        let rule = LatticeRule::new(vec![1, 5, 11], 32).unwrap();
        let a = generate_points(&rule, 5, 1234).unwrap();
        let b = generate_points(&rule, 5, 1234).unwrap();
        let c = generate_points(&rule, 5, 1235).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.shifts(), c.shifts());
        for r in 0..5 {
            for p in 1..=32 {
                assert_eq!(
                    a.point(r, p)
                        .iter()
                        .map(|v| v.to_bits())
                        .collect::<Vec<_>>(),
                    b.point(r, p)
                        .iter()
                        .map(|v| v.to_bits())
                        .collect::<Vec<_>>()
                );
            }
        }
        assert!(generate_points(&rule, 0, 1).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        let w = WeightVector::inverse_power(3, 2.0, 1.0).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.25, 1.0 / 9.0]);
    }
}
