//! Experiment pipelines behind the `qmc-tsfp` binary. Every pipeline checks
//! its work estimate against the budget before computing anything, evaluates
//! samples in parallel and reduces them in index order, so outputs do not
//! depend on the number of workers.

use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ExperimentKind, PotentialConfig, ReferenceConfig};
use crate::error::{Error, Result};
use crate::lattice::{
    cbc_construct, euler_totient, generate_points, worst_case_error, LatticeRule, ShiftedPointSet,
    MONTE_CARLO_STREAM, RNG_NAME, SHIFT_STREAM,
};
use crate::observables::{
    center_of_mass, density, grid_l2_norm, l2_relative_error, second_spatial_moment,
    VarianceAccumulator,
};
use crate::potential::{
    truncation_tail_bound, ParameterDomain, ParameterPoint, PotentialSpec, PotentialTable,
};
use crate::samplers::{
    collocation_estimate, monte_carlo_reduce, monte_carlo_samples, qmc_estimate, qmc_estimate_with,
};
use crate::solver::Solver;
use crate::spectral::{discrete_mass, Grid, WaveField};
use crate::table::{emit_csv, fit_log_log, ResultTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One realization of the random problem on a fixed grid and time step.
#[derive(Clone, Debug)]
pub struct SampleProblem {
    solver: Solver,
    table: PotentialTable,
    psi0: WaveField,
    deterministic: bool,
}

impl SampleProblem {
    pub fn new(
        config: &ExperimentConfig,
        grid: Grid,
        tau: f64,
        spec: &PotentialSpec,
    ) -> Result<Self> {
        Ok(Self {
            solver: Solver::new(config.solver_config(grid, tau)?),
            table: PotentialTable::new(spec, grid)?,
            psi0: config.physics.initial.sample(grid),
            deterministic: spec.is_deterministic(),
        })
    }

    pub fn grid(&self) -> Grid {
        *self.solver.config().grid()
    }

    pub fn steps(&self) -> usize {
        self.solver.config().steps()
    }

    pub fn dimension(&self) -> usize {
        self.table.dimension()
    }

    /// Solves for the potential at `point`, calling `probe` at each stop.
    pub fn run(
        &self,
        point: &ParameterPoint,
        stops: &[usize],
        probe: impl FnMut(usize, &WaveField) -> Result<()>,
    ) -> Result<()> {
        let potential = self.table.evaluate(point)?;
        let mut solver = self.solver.clone();
        solver.run(&self.psi0, &potential, stops, probe)
    }

    /// `[G(T), |psi_k(T)|^2 ...]`, the field first resampled onto `target`.
    pub fn final_observables(
        &self,
        point: &ParameterPoint,
        target: Option<Grid>,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        self.run(point, &[self.steps()], |_, field| {
            let field = match target {
                Some(g) if g != *field.grid() => field.resample(g)?,
                _ => field.clone(),
            };
            out.reserve(field.grid().nodes() + 1);
            out.push(second_spatial_moment(&field));
            out.extend(density(&field));
            Ok(())
        })?;
        Ok(out)
    }
}

/// Wraps `eval` so a deterministic potential is solved once and reused.
fn cached<F>(
    deterministic: bool,
    m: usize,
    domain: ParameterDomain,
    eval: F,
) -> Result<impl Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync,
{
    let fixed = if deterministic {
        Some(eval(&ParameterPoint::new(vec![0.0; m], domain)?)?)
    } else {
        None
    };
    Ok(move |p: &ParameterPoint| match &fixed {
        Some(v) => Ok(v.clone()),
        None => eval(p),
    })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    /// Required for configs flagged `expensive`.
    pub allow_expensive: bool,
}

/// Tables produced by a run. The first has an empty suffix and is the primary
/// output; the others are written next to it as `<stem>_<suffix>.csv`.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub tables: Vec<(String, ResultTable)>,
    pub lattice: Option<LatticeRule>,
}

impl ExperimentOutput {
    pub fn primary(&self) -> Option<&ResultTable> {
        self.tables.first().map(|(_, t)| t)
    }

    /// Writes every artifact; returns the paths written.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut written = Vec::new();
        if let Some(rule) = &self.lattice {
            std::fs::write(path, rule.to_text())?;
            written.push(path.to_path_buf());
        }
        for (suffix, table) in &self.tables {
            let target = if suffix.is_empty() && self.lattice.is_none() {
                path.to_path_buf()
            } else {
                sibling(path, suffix)
            };
            emit_csv(table, &target)?;
            written.push(target);
        }
        Ok(written)
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let name = if suffix.is_empty() {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{suffix}.csv")
    };
    path.with_file_name(name)
}

pub fn default_output_name(kind: ExperimentKind) -> String {
    match kind {
        ExperimentKind::ConstructCbc => "construct-cbc.txt".into(),
        other => format!("{other}.csv"),
    }
}

/// Validates, applies the budget guard and runs `kind` on a pool of
/// `options.workers` threads.
pub fn run_experiment(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    options: RunOptions,
) -> Result<ExperimentOutput> {
    config.validate(kind)?;
    if config.expensive && !options.allow_expensive {
        return Err(Error::Budget(
            "config is flagged expensive; pass --allow-expensive to run it".into(),
        ));
    }
    let work = estimate_work(kind, config)?;
    if work > config.budget.max_work {
        return Err(Error::Budget(format!(
            "estimated work {work:.3e} exceeds budget.max_work = {:.3e}",
            config.budget.max_work
        )));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = options.workers {
        if k == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(|| dispatch(kind, config))
}

fn dispatch(kind: ExperimentKind, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let single = |table: ResultTable| ExperimentOutput {
        tables: vec![(String::new(), table)],
        lattice: None,
    };
    match kind {
        ExperimentKind::ConvergeQmc => run_qmc_pipeline(config).map(single),
        ExperimentKind::ConvergeMc => run_mc_pipeline(config).map(single),
        ExperimentKind::ConvergeTau | ExperimentKind::ConvergeH => {
            run_time_space_convergence(kind, config).map(single)
        }
        ExperimentKind::ConvergeM => run_dimension_truncation(config).map(single),
        ExperimentKind::Simulate => {
            let out = run_simulation(config)?;
            Ok(ExperimentOutput {
                tables: vec![(String::new(), out.series), ("density".into(), out.profile)],
                lattice: None,
            })
        }
        ExperimentKind::ConstructCbc => {
            let (rule, table) = run_construct_cbc(config)?;
            Ok(ExperimentOutput {
                tables: vec![("summary".into(), table)],
                lattice: Some(rule),
            })
        }
    }
}

/// Solver work `samples * steps * nodes` of a run, before any computation.
pub fn estimate_work(kind: ExperimentKind, config: &ExperimentConfig) -> Result<f64> {
    let grid = config.grid()?;
    let m_nodes = grid.nodes() as f64;
    let steps_at =
        |tau: f64| -> Result<f64> { Ok(config.solver_config(grid, tau)?.steps().max(1) as f64) };
    let steps = steps_at(config.time.tau)?;
    let r = config.sampling.shifts as f64;
    let lattice_samples = |n: u64| n as f64 * r;
    let reference = match &config.reference {
        ReferenceConfig::None => 0.0,
        ReferenceConfig::Collocation { q } => (*q as f64).powi(config.dimension() as i32),
        ReferenceConfig::FineQmc { n, shifts, .. } => *n as f64 * *shifts as f64,
    };
    let sweep_samples = if config.sampling.fixed_point.is_some() {
        1.0
    } else {
        config
            .sampling
            .n
            .first()
            .map_or(1.0, |&n| lattice_samples(n))
    };
    let work = match kind {
        ExperimentKind::ConvergeQmc => {
            let samples: f64 = config.sampling.n.iter().map(|&n| lattice_samples(n)).sum();
            (samples + reference) * steps * m_nodes
        }
        ExperimentKind::ConvergeMc => {
            let max = config.mc_sample_counts().into_iter().max().unwrap_or(0) as f64;
            (max + reference) * steps * m_nodes
        }
        ExperimentKind::ConvergeTau => {
            let mut total = steps_at(config.reference_tau())?;
            for &tau in &config.sweep.tau {
                total += steps_at(tau)?;
            }
            sweep_samples * total * m_nodes
        }
        ExperimentKind::ConvergeH => {
            let nodes: usize = config.sweep.nodes.iter().sum::<usize>() + config.reference_nodes();
            sweep_samples * steps * nodes as f64
        }
        ExperimentKind::ConvergeM => {
            let n = config.sampling.n.iter().copied().max().unwrap_or(0);
            (config.sweep.m.len() + 1) as f64 * lattice_samples(n) * steps * m_nodes
        }
        ExperimentKind::Simulate => {
            let samples = if config.physics.potential.spec()?.is_deterministic() {
                1.0
            } else {
                config
                    .sampling
                    .n
                    .iter()
                    .copied()
                    .max()
                    .map_or(0.0, lattice_samples)
            };
            samples * steps * m_nodes
        }
        ExperimentKind::ConstructCbc => {
            let n = config.sampling.n[0];
            config.dimension() as f64 * n as f64 * euler_totient(n) as f64
        }
    };
    Ok(work)
}

fn provenance(kind: ExperimentKind, config: &ExperimentConfig, table: &mut ResultTable) {
    let m = config.dimension();
    let half = config.sampling.domain_scale / 2.0;
    table.annotate("generator", format!("qmc-tsfp {VERSION}"));
    table.annotate("kind", kind.as_str());
    table.annotate("config-sha256", config.hash());
    table.annotate("seed", config.sampling.seed.to_string());
    table.annotate(
        "rng",
        format!(
            "{RNG_NAME} (shift stream {SHIFT_STREAM}, monte-carlo stream {MONTE_CARLO_STREAM})"
        ),
    );
    table.annotate("kernel-sign", config.sampling.kernel_sign.as_str());
    table.annotate("weights", config.sampling.weights.describe());
    table.annotate("domain", format!("[-{half}, {half}]^{m}"));
}

fn annotate_fit(table: &mut ResultTable, y: &str, x: &str) {
    let (Some(xs), Some(ys)) = (table.column(x), table.column(y)) else {
        return;
    };
    if let Some(fit) = fit_log_log(&xs, &ys) {
        table.annotate(
            format!("fit {y} ~ {x}"),
            format!(
                "slope={:.6} intercept={:.6} residual={:.3e}",
                fit.slope, fit.intercept, fit.residual
            ),
        );
    }
}

fn lattice_points(
    config: &ExperimentConfig,
    m: usize,
    n: u64,
    shifts: usize,
    seed: u64,
) -> Result<ShiftedPointSet> {
    let weights = config.sampling.weights.weights(m)?;
    let rule = cbc_construct(m, n, &weights, config.sampling.kernel_sign)?;
    generate_points(&rule, shifts, seed)
}

fn describe_z(rule: &LatticeRule) -> String {
    rule.z()
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reference expectation of `[G(T), density...]` and its description.
fn reference_mean<F>(
    config: &ExperimentConfig,
    m: usize,
    domain: ParameterDomain,
    eval: &F,
) -> Result<Option<(Vec<f64>, String)>>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync,
{
    match &config.reference {
        ReferenceConfig::None => Ok(None),
        ReferenceConfig::Collocation { q } => {
            let est = collocation_estimate(m, *q, domain, eval)?;
            Ok(Some((
                est.mean,
                format!("collocation q={q} ({} nodes)", est.evaluations),
            )))
        }
        ReferenceConfig::FineQmc { n, shifts, seed } => {
            let seed = seed.unwrap_or_else(|| config.sampling.seed.wrapping_add(1));
            let points = lattice_points(config, m, *n, *shifts, seed)?;
            let est = qmc_estimate(&points, domain, eval)?;
            Ok(Some((
                est.mean,
                format!(
                    "fine-qmc N={n} R={shifts} seed={seed} z={}",
                    describe_z(points.rule())
                ),
            )))
        }
    }
}

fn density_error(mean: &[f64], reference: &[f64], grid: &Grid) -> Result<f64> {
    l2_relative_error(&mean[1..], &reference[1..], grid)
}

/// Shift-based rms estimate of the density mean in the grid L2 norm:
/// `sqrt(sum_r ||Q_r - Q||^2 / (R (R - 1)))`.
fn shift_spread(per_shift: &[Vec<f64>], mean: &[f64], grid: &Grid) -> Result<f64> {
    let r = per_shift.len() as f64;
    let mut total = 0.0;
    for q in per_shift {
        let diff: Vec<f64> = q[1..].iter().zip(&mean[1..]).map(|(a, b)| a - b).collect();
        grid.check_len(diff.len())?;
        total += grid_l2_norm(&diff, grid).powi(2);
    }
    Ok((total / (r * (r - 1.0))).sqrt())
}

/// QMC convergence in the lattice size (kind `converge-qmc`), or the time
/// series of a `simulate` config.
pub fn run_qmc_pipeline(config: &ExperimentConfig) -> Result<ResultTable> {
    if config.kind == Some(ExperimentKind::Simulate) {
        return run_simulation(config).map(|out| out.series);
    }
    config.validate(ExperimentKind::ConvergeQmc)?;
    let grid = config.grid()?;
    let domain = config.domain()?;
    let spec = config.physics.potential.spec()?;
    let m = spec.dimension();
    let problem = SampleProblem::new(config, grid, config.time.tau, &spec)?;
    let eval = cached(problem.deterministic, m, domain, |p: &ParameterPoint| {
        problem.final_observables(p, None)
    })?;
    let (reference, reference_desc) = reference_mean(config, m, domain, &eval)?
        .ok_or_else(|| Error::Config("converge-qmc needs a reference".into()))?;

    let mut table = ResultTable::new([
        "n",
        "shifts",
        "n_total",
        "density_l2_error",
        "density_l2_rms",
        "second_moment",
        "second_moment_rms",
        "second_moment_error",
    ]);
    provenance(ExperimentKind::ConvergeQmc, config, &mut table);
    table.annotate("reference", reference_desc);
    let shifts = config.sampling.shifts;
    for &n in &config.sampling.n {
        let points = lattice_points(config, m, n, shifts, config.sampling.seed)?;
        table.annotate(format!("z[N={n}]"), describe_z(points.rule()));
        let est = qmc_estimate(&points, domain, &eval)?;
        table.push_row(vec![
            n as f64,
            shifts as f64,
            (n as usize * shifts) as f64,
            density_error(&est.mean, &reference, &grid)?,
            shift_spread(&est.per_shift_means, &est.mean, &grid)?
                / grid_l2_norm(&reference[1..], &grid),
            est.mean[0],
            est.rms[0],
            (est.mean[0] - reference[0]).abs(),
        ])?;
    }
    annotate_fit(&mut table, "density_l2_error", "n_total");
    annotate_fit(&mut table, "density_l2_rms", "n_total");
    annotate_fit(&mut table, "second_moment_rms", "n_total");
    Ok(table)
}

/// Plain Monte Carlo at each sample count. All counts are prefixes of one
/// seeded stream, so the largest count is evaluated once.
pub fn run_mc_pipeline(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate(ExperimentKind::ConvergeMc)?;
    let grid = config.grid()?;
    let domain = config.domain()?;
    let spec = config.physics.potential.spec()?;
    let m = spec.dimension();
    let problem = SampleProblem::new(config, grid, config.time.tau, &spec)?;
    let eval = cached(problem.deterministic, m, domain, |p: &ParameterPoint| {
        problem.final_observables(p, None)
    })?;
    let reference = reference_mean(config, m, domain, &eval)?;
    let counts = config.mc_sample_counts();
    let max = counts.iter().copied().max().unwrap_or(0);
    let samples = monte_carlo_samples(m, max, config.sampling.seed, domain, &eval)?;

    let mut columns = vec!["n_mc", "second_moment", "second_moment_rms"];
    if reference.is_some() {
        columns.extend(["second_moment_error", "density_l2_error"]);
    }
    let mut table = ResultTable::new(columns);
    provenance(ExperimentKind::ConvergeMc, config, &mut table);
    if let Some((_, desc)) = &reference {
        table.annotate("reference", desc.clone());
    }
    for &count in &counts {
        let est = monte_carlo_reduce(&samples, count)?;
        let mut row = vec![count as f64, est.mean[0], est.rms[0]];
        if let Some((r, _)) = &reference {
            row.push((est.mean[0] - r[0]).abs());
            row.push(density_error(&est.mean, r, &grid)?);
        }
        table.push_row(row)?;
    }
    annotate_fit(&mut table, "second_moment_rms", "n_mc");
    annotate_fit(&mut table, "density_l2_error", "n_mc");
    Ok(table)
}

enum SweepSampling {
    Fixed(ParameterPoint),
    Lattice(ShiftedPointSet),
}

impl SweepSampling {
    fn new(config: &ExperimentConfig, m: usize, domain: ParameterDomain) -> Result<Self> {
        match &config.sampling.fixed_point {
            Some(xi) => Ok(Self::Fixed(ParameterPoint::new(xi.clone(), domain)?)),
            None => Ok(Self::Lattice(lattice_points(
                config,
                m,
                config.sampling.n[0],
                config.sampling.shifts,
                config.sampling.seed,
            )?)),
        }
    }

    fn describe(&self) -> String {
        match self {
            Self::Fixed(p) => format!("fixed point {:?}", p.xi()),
            Self::Lattice(points) => format!(
                "lattice N={} R={} z={}",
                points.rule().points(),
                points.shift_count(),
                describe_z(points.rule())
            ),
        }
    }

    fn expectation<F>(&self, domain: ParameterDomain, eval: F) -> Result<Vec<f64>>
    where
        F: Fn(&ParameterPoint) -> Result<Vec<f64>> + Sync,
    {
        match self {
            Self::Fixed(p) => eval(p),
            Self::Lattice(points) => Ok(qmc_estimate(points, domain, eval)?.mean),
        }
    }
}

/// Error of the expected density against a finer time step (`converge-tau`)
/// or a finer grid (`converge-h`), with the parameter sampling held fixed.
pub fn run_time_space_convergence(
    kind: ExperimentKind,
    config: &ExperimentConfig,
) -> Result<ResultTable> {
    config.validate(kind)?;
    let domain = config.domain()?;
    let spec = config.physics.potential.spec()?;
    let m = spec.dimension();
    let sampling = SweepSampling::new(config, m, domain)?;
    let expectation = |grid: Grid, tau: f64, target: Option<Grid>| -> Result<Vec<f64>> {
        let problem = SampleProblem::new(config, grid, tau, &spec)?;
        let eval = cached(problem.deterministic, m, domain, |p: &ParameterPoint| {
            problem.final_observables(p, target)
        })?;
        sampling.expectation(domain, eval)
    };

    let mut table;
    match kind {
        ExperimentKind::ConvergeTau => {
            let grid = config.grid()?;
            let tau_ref = config.reference_tau();
            let reference = expectation(grid, tau_ref, None)?;
            table = ResultTable::new(["tau", "steps", "density_l2_error", "second_moment_error"]);
            provenance(kind, config, &mut table);
            table.annotate("sampling", sampling.describe());
            table.annotate("reference", format!("tau={tau_ref:e}"));
            for &tau in &config.sweep.tau {
                let steps = config.solver_config(grid, tau)?.steps();
                let mean = expectation(grid, tau, None)?;
                table.push_row(vec![
                    tau,
                    steps as f64,
                    density_error(&mean, &reference, &grid)?,
                    (mean[0] - reference[0]).abs(),
                ])?;
            }
            annotate_fit(&mut table, "density_l2_error", "tau");
        }
        ExperimentKind::ConvergeH => {
            if let PotentialConfig::Tabulated { .. } = config.physics.potential {
                return Err(Error::Config(
                    "converge-h needs a cosine potential (tabulated modes are grid-bound)".into(),
                ));
            }
            let fine = config.grid_with_nodes(config.reference_nodes())?;
            let tau = config.time.tau;
            let reference = expectation(fine, tau, None)?;
            table = ResultTable::new(["nodes", "h", "density_l2_error", "second_moment_error"]);
            provenance(kind, config, &mut table);
            table.annotate("sampling", sampling.describe());
            table.annotate("reference", format!("nodes={}", fine.nodes()));
            for &nodes in &config.sweep.nodes {
                let grid = config.grid_with_nodes(nodes)?;
                let mean = expectation(grid, tau, Some(fine))?;
                table.push_row(vec![
                    nodes as f64,
                    grid.spacing(),
                    density_error(&mean, &reference, &fine)?,
                    (mean[0] - reference[0]).abs(),
                ])?;
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "{other} is not a time or space sweep"
            )))
        }
    }
    Ok(table)
}

/// Truncation error in the number of potential terms `m`, measured against
/// `m_ref` terms on the same lattice points (the first `m` coordinates of each
/// `m_ref`-dimensional point).
pub fn run_dimension_truncation(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate(ExperimentKind::ConvergeM)?;
    let grid = config.grid()?;
    let domain = config.domain()?;
    let m_ref = config.reference_dimension();
    let full = config.physics.potential.spec_with_dimension(m_ref)?;
    let n = config.sampling.n.iter().copied().max().expect("validated");
    let points = lattice_points(
        config,
        m_ref,
        n,
        config.sampling.shifts,
        config.sampling.seed,
    )?;

    let expectation = |m: usize| -> Result<Vec<f64>> {
        let spec = full.truncated(m)?;
        let problem = SampleProblem::new(config, grid, config.time.tau, &spec)?;
        let eval = cached(
            problem.deterministic,
            m_ref,
            domain,
            |p: &ParameterPoint| problem.final_observables(&p.prefix(m)?, None),
        )?;
        Ok(qmc_estimate(&points, domain, eval)?.mean)
    };
    let reference = expectation(m_ref)?;

    let mut table =
        ResultTable::new(["m", "density_l2_error", "second_moment_error", "tail_bound"]);
    provenance(ExperimentKind::ConvergeM, config, &mut table);
    table.annotate("reference", format!("m={m_ref}"));
    table.annotate(format!("z[N={n}]"), describe_z(points.rule()));
    for &m in &config.sweep.m {
        let mean = expectation(m)?;
        table.push_row(vec![
            m as f64,
            density_error(&mean, &reference, &grid)?,
            (mean[0] - reference[0]).abs(),
            truncation_tail_bound(&full, m, m_ref, &grid, domain)?,
        ])?;
    }
    annotate_fit(&mut table, "density_l2_error", "m");
    Ok(table)
}

#[derive(Clone, Debug)]
pub struct SimulationOutput {
    /// Moment statistics at each checkpoint time.
    pub series: ResultTable,
    /// Mean and variance of the density at the final time.
    pub profile: ResultTable,
}

/// Expected observables over time for the largest lattice size in the config.
pub fn run_simulation(config: &ExperimentConfig) -> Result<SimulationOutput> {
    config.validate(ExperimentKind::Simulate)?;
    let grid = config.grid()?;
    let domain = config.domain()?;
    let spec = config.physics.potential.spec()?;
    let m = spec.dimension();
    let problem = SampleProblem::new(config, grid, config.time.tau, &spec)?;
    let solver_config = config.solver_config(grid, config.time.tau)?;
    let times = config.checkpoint_times()?;
    let stops: Vec<usize> = times
        .iter()
        .map(|&t| solver_config.step_of(t).expect("validated"))
        .collect();
    let k = stops.len();
    let last = stops.len() - 1;

    // per sample: G, center of mass and mass at each stop, then the final density
    let eval = cached(problem.deterministic, m, domain, |p: &ParameterPoint| {
        let mut out = vec![0.0; 3 * k];
        let mut final_density = Vec::new();
        let mut i = 0;
        problem.run(p, &stops, |_, field| {
            out[3 * i] = second_spatial_moment(field);
            out[3 * i + 1] = center_of_mass(field)?;
            out[3 * i + 2] = discrete_mass(field);
            if i == last {
                final_density = density(field);
            }
            i += 1;
            Ok(())
        })?;
        out.extend(final_density);
        Ok(out)
    })?;

    let n = config.sampling.n.iter().copied().max().expect("validated");
    let points = lattice_points(config, m, n, config.sampling.shifts, config.sampling.seed)?;
    let mut spread = VarianceAccumulator::default();
    let mut push_error = None;
    let est = qmc_estimate_with(&points, domain, &eval, |_, _, value| {
        if let Err(e) = spread.push(value) {
            push_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = push_error {
        return Err(e);
    }
    let variance = spread.variance()?;

    let mut series = ResultTable::new([
        "time",
        "second_moment",
        "second_moment_rms",
        "second_moment_variance",
        "center_of_mass",
        "center_of_mass_rms",
        "mass",
    ]);
    provenance(ExperimentKind::Simulate, config, &mut series);
    series.annotate(format!("z[N={n}]"), describe_z(points.rule()));
    for (i, &t) in times.iter().enumerate() {
        series.push_row(vec![
            t,
            est.mean[3 * i],
            est.rms[3 * i],
            variance[3 * i],
            est.mean[3 * i + 1],
            est.rms[3 * i + 1],
            est.mean[3 * i + 2],
        ])?;
    }

    let mut profile = ResultTable::new(["x", "density", "density_rms", "density_variance"]);
    provenance(ExperimentKind::Simulate, config, &mut profile);
    profile.annotate("time", format!("{:e}", config.time.final_time));
    for (j, x) in grid.coordinates().into_iter().enumerate() {
        let c = 3 * k + j;
        profile.push_row(vec![x, est.mean[c], est.rms[c], variance[c]])?;
    }
    Ok(SimulationOutput { series, profile })
}

/// Builds the CBC generating vector for the single `N` in the config.
pub fn run_construct_cbc(config: &ExperimentConfig) -> Result<(LatticeRule, ResultTable)> {
    config.validate(ExperimentKind::ConstructCbc)?;
    let m = config.dimension();
    let n = config.sampling.n[0];
    let weights = config.sampling.weights.weights(m)?;
    let sign = config.sampling.kernel_sign;
    let rule = cbc_construct(m, n, &weights, sign)?;
    let mut table = ResultTable::new(["dimension", "component", "worst_case_error"]);
    provenance(ExperimentKind::ConstructCbc, config, &mut table);
    table.annotate("n", n.to_string());
    for s in 1..=m {
        let e = worst_case_error(&rule.z()[..s], n, &weights.as_slice()[..s], sign)?;
        table.push_row(vec![s as f64, rule.z()[s - 1] as f64, e])?;
    }
    Ok((rule, table))
}
