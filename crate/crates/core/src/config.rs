//! JSON experiment configuration. Unknown keys are rejected and everything is
//! validated before any computation starts.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{KernelSign, WeightVector};
use crate::potential::{BaseProfile, Mode, ModeShape, ParameterDomain, PotentialSpec};
use crate::solver::SolverConfig;
use crate::spectral::{Grid, WaveField};

/// Default ceiling on `samples * steps * nodes` per run.
pub const DEFAULT_MAX_WORK: f64 = 2e11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ConvergeQmc,
    ConvergeMc,
    ConvergeTau,
    ConvergeH,
    ConvergeM,
    Simulate,
    ConstructCbc,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::ConvergeQmc,
        ExperimentKind::ConvergeMc,
        ExperimentKind::ConvergeTau,
        ExperimentKind::ConvergeH,
        ExperimentKind::ConvergeM,
        ExperimentKind::Simulate,
        ExperimentKind::ConstructCbc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ConvergeQmc => "converge-qmc",
            ExperimentKind::ConvergeMc => "converge-mc",
            ExperimentKind::ConvergeTau => "converge-tau",
            ExperimentKind::ConvergeH => "converge-h",
            ExperimentKind::ConvergeM => "converge-m",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::ConstructCbc => "construct-cbc",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    /// Paper-scale runs that need `--allow-expensive`.
    #[serde(default)]
    pub expensive: bool,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub physics: PhysicsConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width `L` of `[-L, L]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Alternatively `L = half_width_pi * pi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width_pi: Option<f64>,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub tau: f64,
    pub final_time: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<f64>,
    /// Adds checkpoints at every multiple of this interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub alpha: f64,
    pub initial: InitialData,
    pub potential: PotentialConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// `amplitude * exp(-beta x^2)`.
    Gaussian { amplitude: f64, beta: f64 },
    /// `amplitude * exp(i wavenumber x)`.
    PlaneWave { amplitude: f64, wavenumber: f64 },
}

impl InitialData {
    pub fn sample(&self, grid: Grid) -> WaveField {
        match *self {
            InitialData::Gaussian { amplitude, beta } => WaveField::from_fn(grid, |x| {
                Complex64::new(amplitude * (-beta * x * x).exp(), 0.0)
            }),
            InitialData::PlaneWave {
                amplitude,
                wavenumber,
            } => WaveField::from_fn(grid, |x| Complex64::from_polar(amplitude, wavenumber * x)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `offset + sigma * sum_{j=1}^m j^(-decay) xi_j cos(j x)`.
    Cosine {
        offset: f64,
        #[serde(default = "one")]
        sigma: f64,
        decay: f64,
        m: usize,
    },
    /// Grid samples for `v0` and every `v_j`, with amplitudes `sqrt(lambda_j)`.
    Tabulated {
        base: Vec<f64>,
        amplitudes: Vec<f64>,
        modes: Vec<Vec<f64>>,
        #[serde(default = "one")]
        sigma: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl PotentialConfig {
    pub fn dimension(&self) -> usize {
        match self {
            PotentialConfig::Cosine { m, .. } => *m,
            PotentialConfig::Tabulated { amplitudes, .. } => amplitudes.len(),
        }
    }

    /// Builds the spec with `m` terms (at most the configured capacity for
    /// tabulated potentials; cosine families extend to any `m`).
    pub fn spec_with_dimension(&self, m: usize) -> Result<PotentialSpec> {
        match self {
            PotentialConfig::Cosine {
                offset,
                sigma,
                decay,
                ..
            } => PotentialSpec::cosine_family(*offset, *sigma, *decay, m),
            PotentialConfig::Tabulated {
                base,
                amplitudes,
                modes,
                sigma,
            } => {
                if amplitudes.len() != modes.len() {
                    return Err(Error::Config(
                        "tabulated potential needs one amplitude per mode".into(),
                    ));
                }
                let spec = PotentialSpec::new(
                    BaseProfile::Tabulated(base.clone()),
                    amplitudes
                        .iter()
                        .zip(modes)
                        .map(|(&amplitude, values)| Mode {
                            amplitude,
                            shape: ModeShape::Tabulated(values.clone()),
                        })
                        .collect(),
                    *sigma,
                )?;
                spec.truncated(m)
            }
        }
    }

    pub fn spec(&self) -> Result<PotentialSpec> {
        self.spec_with_dimension(self.dimension())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Lattice sizes `N` (points per shift).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<u64>,
    #[serde(default = "default_shifts")]
    pub shifts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo sample counts; defaults to `shifts * n` for each `n`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_mc: Vec<usize>,
    #[serde(default)]
    pub weights: WeightLaw,
    /// The parameters live in `[-scale/2, scale/2]^m`.
    #[serde(default = "default_domain_scale")]
    pub domain_scale: f64,
    #[serde(default)]
    pub kernel_sign: KernelSign,
    /// Replaces sampling by a single fixed parameter point (time/space sweeps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<Vec<f64>>,
}

fn default_shifts() -> usize {
    10
}

fn default_domain_scale() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightLaw {
    /// `gamma_j = scale / j^exponent`.
    InversePower {
        exponent: f64,
        scale: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl Default for WeightLaw {
    fn default() -> Self {
        WeightLaw::InversePower {
            exponent: 2.0,
            scale: 1.0,
        }
    }
}

impl WeightLaw {
    pub fn weights(&self, m: usize) -> Result<WeightVector> {
        match self {
            WeightLaw::InversePower { exponent, scale } => {
                WeightVector::inverse_power(m, *exponent, *scale)
            }
            WeightLaw::Explicit { values } => {
                if values.len() < m {
                    return Err(Error::Config(format!(
                        "{} explicit weights for dimension {m}",
                        values.len()
                    )));
                }
                WeightVector::new(values[..m].to_vec())
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            WeightLaw::InversePower { exponent, scale } => {
                format!("inverse-power exponent={exponent} scale={scale}")
            }
            WeightLaw::Explicit { values } => format!("explicit {values:?}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceConfig {
    #[default]
    None,
    /// Tensor Gauss–Legendre grid with `q` points per dimension.
    Collocation { q: usize },
    /// A large randomly shifted lattice rule.
    FineQmc {
        n: u64,
        shifts: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau: Vec<f64>,
    /// Grid node counts `M` (`h = 2L / M`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_m: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    /// Ceiling on `samples * steps * nodes` summed over the run.
    #[serde(default = "default_max_work")]
    pub max_work: f64,
}

fn default_max_work() -> f64 {
    DEFAULT_MAX_WORK
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            max_work: DEFAULT_MAX_WORK,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid_with_nodes(self.grid.nodes)
    }

    pub fn grid_with_nodes(&self, nodes: usize) -> Result<Grid> {
        let half_width = match (self.grid.half_width, self.grid.half_width_pi) {
            (Some(l), None) => l,
            (None, Some(k)) => k * PI,
            _ => {
                return Err(Error::Config(
                    "grid needs exactly one of half_width, half_width_pi".into(),
                ))
            }
        };
        Grid::new(half_width, nodes).map_err(config_error)
    }

    pub fn solver_config(&self, grid: Grid, tau: f64) -> Result<SolverConfig> {
        SolverConfig::new(grid, tau, self.time.final_time, self.physics.alpha).map_err(config_error)
    }

    pub fn domain(&self) -> Result<ParameterDomain> {
        ParameterDomain::scaled(self.sampling.domain_scale).map_err(config_error)
    }

    pub fn dimension(&self) -> usize {
        self.physics.potential.dimension()
    }

    /// Sorted checkpoint times, including 0 and the final time.
    pub fn checkpoint_times(&self) -> Result<Vec<f64>> {
        let t_end = self.time.final_time;
        let mut times = vec![0.0];
        times.extend(self.time.checkpoints.iter().copied());
        if let Some(dt) = self.time.checkpoint_every {
            if !(dt > 0.0) {
                return Err(Error::Config("checkpoint_every must be positive".into()));
            }
            let count = (t_end / dt + 1e-9).floor() as usize;
            times.extend((1..=count).map(|i| i as f64 * dt));
        }
        times.push(t_end);
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end.max(1.0));
        Ok(times)
    }

    /// Checks everything the given experiment kind needs.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(declared) = self.kind {
            if declared != kind {
                return Err(Error::Config(format!(
                    "config declares kind {declared} but {kind} was requested"
                )));
            }
        }
        let grid = self.grid()?;
        let solver = self.solver_config(grid, self.time.tau)?;
        let m = self.dimension();
        if m == 0 {
            return Err(Error::Config(
                "potential dimension m must be at least 1".into(),
            ));
        }
        self.physics.potential.spec().map_err(config_error)?;
        if let PotentialConfig::Tabulated { base, .. } = &self.physics.potential {
            grid.check_len(base.len()).map_err(config_error)?;
        }
        let domain = self.domain()?;
        self.sampling.weights.weights(m).map_err(config_error)?;
        for t in self.checkpoint_times()? {
            if solver.step_of(t).is_none() {
                return Err(Error::Config(format!(
                    "checkpoint {t} is not a multiple of tau = {} within [0, {}]",
                    self.time.tau, self.time.final_time
                )));
            }
        }
        if let Some(point) = &self.sampling.fixed_point {
            if point.len() != m {
                return Err(Error::Config(format!(
                    "fixed_point has {} coordinates, potential has m = {m}",
                    point.len()
                )));
            }
            crate::potential::ParameterPoint::new(point.clone(), domain).map_err(config_error)?;
        }

        let need_lattice = |what: &str| -> Result<()> {
            if self.sampling.n.is_empty() {
                return Err(Error::Config(format!("{what} needs sampling.n")));
            }
            if let Some(&bad) = self.sampling.n.iter().find(|&&n| n < 2) {
                return Err(Error::Config(format!("lattice size {bad} < 2")));
            }
            Ok(())
        };
        let need_shifts = || -> Result<()> {
            if self.sampling.shifts < 2 {
                return Err(Error::Config("sampling.shifts must be at least 2".into()));
            }
            Ok(())
        };
        let check_reference = || -> Result<()> {
            match &self.reference {
                ReferenceConfig::None => Ok(()),
                ReferenceConfig::Collocation { q } => {
                    if !(1..=64).contains(q) {
                        return Err(Error::Config(format!("collocation q = {q} outside 1..=64")));
                    }
                    Ok(())
                }
                ReferenceConfig::FineQmc { n, shifts, .. } => {
                    if *n < 2 || *shifts < 2 {
                        return Err(Error::Config(
                            "fine-qmc reference needs n >= 2 and shifts >= 2".into(),
                        ));
                    }
                    Ok(())
                }
            }
        };

        match kind {
            ExperimentKind::ConvergeQmc => {
                need_lattice("converge-qmc")?;
                need_shifts()?;
                check_reference()?;
                if self.reference == ReferenceConfig::None {
                    return Err(Error::Config("converge-qmc needs a reference".into()));
                }
            }
            ExperimentKind::ConvergeMc => {
                if self.sampling.n_mc.is_empty() {
                    need_lattice("converge-mc (without n_mc)")?;
                }
                if self.mc_sample_counts().iter().any(|&n| n < 2) {
                    return Err(Error::Config(
                        "Monte Carlo sample counts must be >= 2".into(),
                    ));
                }
                check_reference()?;
            }
            ExperimentKind::ConvergeTau | ExperimentKind::ConvergeH => {
                if self.sampling.fixed_point.is_none() {
                    need_lattice(kind.as_str())?;
                    need_shifts()?;
                }
                if kind == ExperimentKind::ConvergeTau {
                    if self.sweep.tau.is_empty() {
                        return Err(Error::Config("converge-tau needs sweep.tau".into()));
                    }
                    for &tau in self.sweep.tau.iter().chain(self.sweep.reference_tau.iter()) {
                        self.solver_config(grid, tau)?;
                    }
                } else {
                    if self.sweep.nodes.is_empty() {
                        return Err(Error::Config("converge-h needs sweep.nodes".into()));
                    }
                    let reference = self.reference_nodes();
                    for &nodes in self.sweep.nodes.iter().chain([reference].iter()) {
                        self.grid_with_nodes(nodes)?;
                        if nodes > reference {
                            return Err(Error::Config(format!(
                                "sweep grid {nodes} is finer than the reference {reference}"
                            )));
                        }
                    }
                }
            }
            ExperimentKind::ConvergeM => {
                need_lattice("converge-m")?;
                need_shifts()?;
                if self.sweep.m.is_empty() || self.sweep.m.contains(&0) {
                    return Err(Error::Config("converge-m needs a positive sweep.m".into()));
                }
                let m_ref = self.reference_dimension();
                if self.sweep.m.iter().any(|&m| m > m_ref) {
                    return Err(Error::Config(format!(
                        "sweep.m exceeds the reference dimension {m_ref}"
                    )));
                }
                if let PotentialConfig::Tabulated { .. } = self.physics.potential {
                    if m_ref > m {
                        return Err(Error::Config(format!(
                            "reference dimension {m_ref} exceeds the {m} tabulated modes"
                        )));
                    }
                }
                self.sampling.weights.weights(m_ref).map_err(config_error)?;
            }
            ExperimentKind::Simulate => {
                need_lattice("simulate")?;
                need_shifts()?;
            }
            ExperimentKind::ConstructCbc => {
                if self.sampling.n.len() != 1 {
                    return Err(Error::Config(
                        "construct-cbc needs exactly one lattice size in sampling.n".into(),
                    ));
                }
                need_lattice("construct-cbc")?;
            }
        }
        Ok(())
    }

    pub fn mc_sample_counts(&self) -> Vec<usize> {
        if self.sampling.n_mc.is_empty() {
            self.sampling
                .n
                .iter()
                .map(|&n| n as usize * self.sampling.shifts)
                .collect()
        } else {
            self.sampling.n_mc.clone()
        }
    }

    pub fn reference_nodes(&self) -> usize {
        self.sweep.reference_nodes.unwrap_or_else(|| {
            4 * self
                .sweep
                .nodes
                .iter()
                .copied()
                .max()
                .unwrap_or(self.grid.nodes)
        })
    }

    pub fn reference_tau(&self) -> f64 {
        self.sweep
            .reference_tau
            .unwrap_or_else(|| self.sweep.tau.iter().copied().fold(self.time.tau, f64::min) / 10.0)
    }

    pub fn reference_dimension(&self) -> usize {
        self.sweep
            .reference_m
            .unwrap_or_else(|| 2 * self.sweep.m.iter().copied().max().unwrap_or(1))
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_json() -> &'static str {
        r#"{
            "grid": {"half_width_pi": 1.0, "nodes": 64},
            "time": {"tau": 0.001, "final_time": 1.0},
            "physics": {
                "alpha": 1.0,
                "initial": {"kind": "gaussian", "amplitude": 1.5957691216057308, "beta": 8.0},
                "potential": {"family": "cosine", "offset": 1.0, "decay": 2.0, "m": 3}
            },
            "sampling": {"n": [512, 1024], "shifts": 10, "seed": 7},
            "reference": {"kind": "collocation", "q": 9}
        }"#
    }

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_json(sample_json()).unwrap();
        cfg.validate(ExperimentKind::ConvergeQmc).unwrap();
        assert_eq!(cfg.sampling.domain_scale, 2.0);
        assert_eq!(cfg.sampling.kernel_sign, KernelSign::Standard);
        assert_eq!(cfg.mc_sample_counts(), vec![5120, 10240]);
        assert!(cfg.validate(ExperimentKind::ConvergeTau).is_err());
        assert!(cfg.validate(ExperimentKind::ConstructCbc).is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = sample_json().replace("\"seed\": 7", "\"seed\": 7, \"sede\": 1");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_mismatched_kind() {
        let mut cfg = ExperimentConfig::from_json(sample_json()).unwrap();
        cfg.kind = Some(ExperimentKind::Simulate);
        assert!(cfg.validate(ExperimentKind::ConvergeQmc).is_err());
    }

    #[test]
    fn rejects_off_lattice_checkpoint() {
        let mut cfg = ExperimentConfig::from_json(sample_json()).unwrap();
        cfg.time.checkpoints = vec![0.0005];
        assert!(cfg.validate(ExperimentKind::ConvergeQmc).is_err());
        cfg.time.checkpoints = vec![0.5];
        cfg.time.checkpoint_every = Some(0.25);
        assert_eq!(
            cfg.checkpoint_times().unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json(sample_json()).unwrap();
        let b = ExperimentConfig::from_json(sample_json()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = b.clone();
        c.sampling.seed = 8;
        assert_ne!(a.hash(), c.hash());
        let round = ExperimentConfig::from_json(&a.to_json()).unwrap();
        assert_eq!(round, a);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ExperimentKind::ALL {
            assert_eq!(kind.as_str().parse::<ExperimentKind>().unwrap(), kind);
        }
        assert!("converge".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn grid_needs_one_width() {
        let text = sample_json().replace(
            "\"half_width_pi\": 1.0",
            "\"half_width_pi\": 1.0, \"half_width\": 3.0",
        );
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert!(cfg.grid().is_err());
    }
}
