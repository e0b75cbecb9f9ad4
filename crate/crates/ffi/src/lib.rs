//! C interface to `qmc-tsfp`.
//!
//! Every fallible function returns a [`QtStatus`]. On failure a message is
//! stored per thread and can be read with [`qt_last_error_message`]. Objects
//! cross the boundary as opaque handles created by `qt_*_new`-style functions
//! and released with the matching `qt_*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use num_complex::Complex64;
use qmc_tsfp::harness::{default_output_name, run_experiment, RunOptions};
use qmc_tsfp::lattice::{bernoulli_kernel, worst_case_error};
use qmc_tsfp::potential::PotentialTable;
use qmc_tsfp::{
    cbc_construct, Error, ExperimentConfig, ExperimentKind, Grid, KernelSign, LatticeRule,
    ParameterDomain, ParameterPoint, PotentialSpec, Solver, SolverConfig, WaveField, WeightVector,
};

/// Result of an FFI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtStatus {
    Ok = 0,
    Other = 1,
    Config = 2,
    Budget = 3,
    Numerical = 4,
    InvalidArgument = 5,
    NullPointer = 6,
    Panic = 7,
    Io = 8,
}

/// Kernel sign convention, see `KernelSign` in the Rust crate.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtKernelSign {
    Standard = 0,
    Literal = 1,
}

impl From<QtKernelSign> for KernelSign {
    fn from(s: QtKernelSign) -> Self {
        match s {
            QtKernelSign::Standard => KernelSign::Standard,
            QtKernelSign::Literal => KernelSign::Literal,
        }
    }
}

/// Rank-1 lattice generating vector.
pub struct QtLatticeRule(LatticeRule);

/// Strang split-step integrator on a fixed grid and time step.
pub struct QtSolver(Solver);

/// Random potential sampled on a fixed grid.
pub struct QtPotential(PotentialTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(error: &Error) -> QtStatus {
    match error {
        Error::Config(_) | Error::Json(_) => QtStatus::Config,
        Error::Budget(_) => QtStatus::Budget,
        Error::Numerical(_) => QtStatus::Numerical,
        Error::InvalidArgument(_)
        | Error::LengthMismatch { .. }
        | Error::DimensionMismatch { .. }
        | Error::OutOfDomain { .. } => QtStatus::InvalidArgument,
        Error::Sample { source, .. } => status_of(source),
        Error::Io(_) | Error::Csv(_) => QtStatus::Io,
    }
}

struct Failure(QtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(QtStatus::NullPointer, format!("{name} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(QtStatus::InvalidArgument, message.into())
}

/// Runs `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> QtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QtStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            QtStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

unsafe fn out_ref<'a, T>(out: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    out.as_mut().ok_or_else(|| null(name))
}

unsafe fn handle<'a, T>(h: *const T, name: &str) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| null(name))
}

unsafe fn string(s: *const c_char, name: &str) -> Result<String, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next FFI call on the same thread.
#[no_mangle]
pub extern "C" fn qt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `B_2(x) = x^2 - x + 1/6` for `x` in `[0, 1)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_bernoulli_kernel(x: c_double, out: *mut c_double) -> QtStatus {
    guard(|| {
        *out_ref(out, "out")? = bernoulli_kernel(x)?;
        Ok(())
    })
}

/// Shift-averaged worst-case error of the `m`-dimensional vector `z` for `n`
/// points with weights `gamma[0..m]`.
///
/// # Safety
/// `z` and `gamma` must hold `m` values; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_worst_case_error(
    z: *const u64,
    gamma: *const c_double,
    m: usize,
    n: u64,
    sign: QtKernelSign,
    out: *mut c_double,
) -> QtStatus {
    guard(|| {
        let z = slice(z, m, "z")?;
        let gamma = slice(gamma, m, "gamma")?;
        *out_ref(out, "out")? = worst_case_error(z, n, gamma, sign.into())?;
        Ok(())
    })
}

/// Component-by-component construction for `n` points in `m` dimensions with
/// weights `gamma[0..m]`. On success `*out` owns a new rule.
///
/// # Safety
/// `gamma` must hold `m` values; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_cbc_construct(
    m: usize,
    n: u64,
    gamma: *const c_double,
    sign: QtKernelSign,
    out: *mut *mut QtLatticeRule,
) -> QtStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let weights = WeightVector::new(slice(gamma, m, "gamma")?.to_vec())?;
        let rule = cbc_construct(m, n, &weights, sign.into())?;
        *out = Box::into_raw(Box::new(QtLatticeRule(rule)));
        Ok(())
    })
}

/// Rule from an explicit generating vector `z[0..m]` and point count `n`.
///
/// # Safety
/// `z` must hold `m` values; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_lattice_rule_new(
    z: *const u64,
    m: usize,
    n: u64,
    out: *mut *mut QtLatticeRule,
) -> QtStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let rule = LatticeRule::new(slice(z, m, "z")?.to_vec(), n)?;
        *out = Box::into_raw(Box::new(QtLatticeRule(rule)));
        Ok(())
    })
}

/// Dimension `m` and point count `n` of a rule.
///
/// # Safety
/// `rule` must come from this library; `m` and `n` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_lattice_rule_shape(
    rule: *const QtLatticeRule,
    m: *mut usize,
    n: *mut u64,
) -> QtStatus {
    guard(|| {
        let rule = &handle(rule, "rule")?.0;
        *out_ref(m, "m")? = rule.dimension();
        *out_ref(n, "n")? = rule.points();
        Ok(())
    })
}

/// Copies the generating vector into `z[0..len]`; `len` must equal the
/// dimension.
///
/// # Safety
/// `rule` must come from this library; `z` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn qt_lattice_rule_vector(
    rule: *const QtLatticeRule,
    z: *mut u64,
    len: usize,
) -> QtStatus {
    guard(|| {
        let rule = &handle(rule, "rule")?.0;
        if len != rule.dimension() {
            return Err(invalid(format!(
                "buffer holds {len} entries, rule has dimension {}",
                rule.dimension()
            )));
        }
        slice_mut(z, len, "z")?.copy_from_slice(rule.z());
        Ok(())
    })
}

/// # Safety
/// `rule` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn qt_lattice_rule_free(rule: *mut QtLatticeRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Solver on `nodes` points of `[-half_width, half_width)` stepping `tau` up
/// to `final_time`, which must be a multiple of `tau`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_solver_new(
    half_width: c_double,
    nodes: usize,
    tau: c_double,
    final_time: c_double,
    alpha: c_double,
    out: *mut *mut QtSolver,
) -> QtStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let grid = Grid::new(half_width, nodes)?;
        let config = SolverConfig::new(grid, tau, final_time, alpha)?;
        *out = Box::into_raw(Box::new(QtSolver(Solver::new(config))));
        Ok(())
    })
}

/// Integrates `psi` (real parts `re`, imaginary parts `im`, both of length
/// `nodes`) in place to the final time under the real potential `v`.
///
/// # Safety
/// `solver` must come from this library; `re`, `im` and `v` must hold
/// `nodes` values.
#[no_mangle]
pub unsafe extern "C" fn qt_solver_run(
    solver: *mut QtSolver,
    re: *mut c_double,
    im: *mut c_double,
    v: *const c_double,
    nodes: usize,
) -> QtStatus {
    guard(|| {
        let solver = &mut solver.as_mut().ok_or_else(|| null("solver"))?.0;
        let grid = *solver.config().grid();
        if nodes != grid.nodes() {
            return Err(invalid(format!(
                "buffers hold {nodes} values, grid has {}",
                grid.nodes()
            )));
        }
        let re = slice_mut(re, nodes, "re")?;
        let im = slice_mut(im, nodes, "im")?;
        let v = slice(v, nodes, "v")?;
        let values = re
            .iter()
            .zip(im.iter())
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect();
        let psi = solver.solve_final(&WaveField::new(grid, values)?, v)?;
        for ((a, b), c) in re.iter_mut().zip(im.iter_mut()).zip(psi.values()) {
            *a = c.re;
            *b = c.im;
        }
        Ok(())
    })
}

/// # Safety
/// `solver` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn qt_solver_free(solver: *mut QtSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Cosine-family potential
/// `offset + sigma * sum_{j=1}^m j^(-decay) xi_j cos(j x)` sampled on
/// `nodes` points of `[-half_width, half_width)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_potential_cosine_new(
    offset: c_double,
    sigma: c_double,
    decay: c_double,
    m: usize,
    half_width: c_double,
    nodes: usize,
    out: *mut *mut QtPotential,
) -> QtStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let spec = PotentialSpec::cosine_family(offset, sigma, decay, m)?;
        let table = PotentialTable::new(&spec, Grid::new(half_width, nodes)?)?;
        *out = Box::into_raw(Box::new(QtPotential(table)));
        Ok(())
    })
}

/// Writes `V(xi, x_k)` for `xi[0..m]` in `[-scale/2, scale/2]^m` to
/// `values[0..nodes]`.
///
/// # Safety
/// `potential` must come from this library; `xi` must hold `m` values and
/// `values` `nodes` values.
#[no_mangle]
pub unsafe extern "C" fn qt_potential_evaluate(
    potential: *const QtPotential,
    xi: *const c_double,
    m: usize,
    scale: c_double,
    values: *mut c_double,
    nodes: usize,
) -> QtStatus {
    guard(|| {
        let table = &handle(potential, "potential")?.0;
        if nodes != table.grid().nodes() {
            return Err(invalid(format!(
                "buffer holds {nodes} values, grid has {}",
                table.grid().nodes()
            )));
        }
        let point = ParameterPoint::new(
            slice(xi, m, "xi")?.to_vec(),
            ParameterDomain::scaled(scale)?,
        )?;
        let sampled = table.evaluate(&point)?;
        slice_mut(values, nodes, "values")?.copy_from_slice(&sampled);
        Ok(())
    })
}

/// # Safety
/// `potential` must come from this library and not be used afterwards. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn qt_potential_free(potential: *mut QtPotential) {
    if !potential.is_null() {
        drop(Box::from_raw(potential));
    }
}

/// Runs experiment `kind` (for example `"converge-qmc"`) from the JSON config
/// at `config_path` and writes its outputs to `out_path`, or to the config's
/// `output` or the default name when `out_path` is null. `workers = 0` uses
/// the default pool size.
///
/// # Safety
/// `kind` and `config_path` must be NUL-terminated strings; `out_path` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn qt_run_experiment(
    kind: *const c_char,
    config_path: *const c_char,
    out_path: *const c_char,
    workers: usize,
    allow_expensive: bool,
) -> QtStatus {
    guard(|| {
        let kind: ExperimentKind = string(kind, "kind")?.parse()?;
        let config = ExperimentConfig::from_path(string(config_path, "config_path")?)?;
        let path = if out_path.is_null() {
            config
                .output
                .clone()
                .unwrap_or_else(|| default_output_name(kind))
        } else {
            string(out_path, "out_path")?
        };
        let options = RunOptions {
            workers: (workers > 0).then_some(workers),
            allow_expensive,
        };
        run_experiment(kind, &config, options)?.write(&PathBuf::from(path))?;
        Ok(())
    })
}
