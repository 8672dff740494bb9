//! C interface to `sbt-core`.
//!
//! Conventions:
//! - every fallible function returns an [`SbtStatus`]; on failure a message is
//!   available from [`sbt_last_error_message`] on the same thread;
//! - objects are opaque handles created by `sbt_*_new`/`load`/`run` functions
//!   and released with the matching `*_free`;
//! - strings returned by accessors are owned by the handle and stay valid
//!   until it is freed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::time::Duration;

use sbt_core::analysis::format_condition;
use sbt_core::fitness::{eval_min_distance_velocity, eval_min_ttc, is_critical, DEFAULT_COLLISION_RADIUS};
use sbt_core::runner::{run_experiment, ConfigError, ExperimentRegistry, RunError, RunOverrides};
use sbt_core::scenario::{pedestrian_crossing_spec, ScenarioSpec, TestInput};
use sbt_core::search::SearchError;
use sbt_core::sim::{BuiltinSimulator, Simulator};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    UnknownExperiment = 4,
    Simulation = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(text).expect("nul bytes removed")));
}

fn fail(status: SbtStatus, message: impl Into<String>) -> SbtStatus {
    set_error(message);
    status
}

/// Runs `f`, turning panics into [`SbtStatus::Panic`].
fn guard(f: impl FnOnce() -> SbtStatus) -> SbtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SbtStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SbtStatus> {
    if p.is_null() {
        return Err(fail(SbtStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SbtStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn sbt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sbt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ------------------------------------------------------------ built-in world

/// Outcome of one built-in simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbtEvaluation {
    /// Clearance at closest approach in m; 0 on collision.
    pub min_distance: f64,
    /// Ego speed at closest approach in m/s.
    pub velocity_at_min_distance: f64,
    /// Smallest time to collision in s (1e9 if the actors never close in).
    pub min_ttc: f64,
    pub collision: bool,
    /// Collision time in s, NaN without collision.
    pub collision_time: f64,
    pub critical: bool,
    /// Number of recorded time steps.
    pub steps: usize,
}

fn evaluate_builtin(spec: &ScenarioSpec, input: &TestInput, seed: u64) -> Result<SbtEvaluation, SbtStatus> {
    let out = BuiltinSimulator::default()
        .simulate(spec, input, seed)
        .map_err(|e| fail(SbtStatus::InvalidArgument, e.to_string()))?;
    let radius = DEFAULT_COLLISION_RADIUS;
    let (f1, f2) = eval_min_distance_velocity(&out, radius).map_err(|e| fail(SbtStatus::Simulation, e.to_string()))?;
    let ttc = eval_min_ttc(&out, radius).map_err(|e| fail(SbtStatus::Simulation, e.to_string()))?;
    Ok(SbtEvaluation {
        min_distance: f1,
        velocity_at_min_distance: f2,
        min_ttc: ttc,
        collision: out.collision,
        collision_time: out.collision_time.unwrap_or(f64::NAN),
        critical: is_critical(&[f1, f2]),
        steps: out.steps(),
    })
}

/// Simulates the built-in pedestrian-crossing world for one scenario
/// instance and scores it.
///
/// # Safety
/// `out` must be null or point to writable memory for one `SbtEvaluation`.
#[no_mangle]
pub unsafe extern "C" fn sbt_builtin_evaluate(
    ped_speed: f64,
    ego_speed: f64,
    ped_dist: f64,
    out: *mut SbtEvaluation,
) -> SbtStatus {
    guard(|| {
        if out.is_null() {
            return fail(SbtStatus::NullPointer, "out is null");
        }
        let spec = pedestrian_crossing_spec();
        match evaluate_builtin(&spec, &TestInput::new(vec![ped_speed, ego_speed, ped_dist]), 0) {
            Ok(e) => {
                *out = e;
                SbtStatus::Ok
            }
            Err(s) => s,
        }
    })
}

// ------------------------------------------------------------ registry

pub struct SbtRegistry {
    inner: ExperimentRegistry,
    names: Vec<CString>,
}

impl SbtRegistry {
    fn new(inner: ExperimentRegistry) -> *mut SbtRegistry {
        let names = inner.names().into_iter().map(|n| CString::new(n.replace('\0', " ")).unwrap()).collect();
        Box::into_raw(Box::new(SbtRegistry { inner, names }))
    }
}

/// Opens the bundled experiment registry.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sbt_registry_builtin(out: *mut *mut SbtRegistry) -> SbtStatus {
    guard(|| {
        if out.is_null() {
            return fail(SbtStatus::NullPointer, "out is null");
        }
        *out = SbtRegistry::new(ExperimentRegistry::builtin());
        SbtStatus::Ok
    })
}

/// Loads an experiment registry file (TOML).
///
/// # Safety
/// `path` must be a nul-terminated string; `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sbt_registry_load(path: *const c_char, out: *mut *mut SbtRegistry) -> SbtStatus {
    guard(|| {
        if out.is_null() {
            return fail(SbtStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ExperimentRegistry::load(Path::new(path)) {
            Ok(r) => {
                *out = SbtRegistry::new(r);
                SbtStatus::Ok
            }
            Err(e @ ConfigError::Read { .. }) => fail(SbtStatus::Io, e.to_string()),
            Err(e) => fail(SbtStatus::Config, e.to_string()),
        }
    })
}

/// Number of experiments; 0 for a null handle.
///
/// # Safety
/// `registry` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_registry_len(registry: *const SbtRegistry) -> usize {
    registry.as_ref().map_or(0, |r| r.names.len())
}

/// Name of experiment `index` (0-based), or null if out of range.
///
/// # Safety
/// `registry` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_registry_name(registry: *const SbtRegistry, index: usize) -> *const c_char {
    registry
        .as_ref()
        .and_then(|r| r.names.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `registry` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbt_registry_free(registry: *mut SbtRegistry) {
    if !registry.is_null() {
        drop(Box::from_raw(registry));
    }
}

// ------------------------------------------------------------ runs

/// Overrides applied on top of the experiment definition. Zero (or a
/// negative time budget) keeps the configured value.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbtRunOptions {
    pub population_size: usize,
    pub max_generations: usize,
    /// Wall-clock budget in seconds; <= 0 keeps the configured budget.
    pub time_budget_secs: f64,
    pub seed: u64,
    pub override_seed: bool,
    pub workers: usize,
}

impl SbtRunOptions {
    fn overrides(&self) -> RunOverrides {
        RunOverrides {
            population_size: (self.population_size > 0).then_some(self.population_size),
            max_generations: (self.max_generations > 0).then_some(self.max_generations),
            time_budget: (self.time_budget_secs > 0.0).then(|| Duration::from_secs_f64(self.time_budget_secs)),
            seed: self.override_seed.then_some(self.seed),
            workers: (self.workers > 0).then_some(self.workers),
        }
    }
}

struct RecordRow {
    inputs: Vec<f64>,
    objectives: Vec<f64>,
    critical: bool,
}

pub struct SbtRun {
    result_dir: CString,
    algorithm: CString,
    rows: Vec<RecordRow>,
    critical_count: usize,
    pareto: Vec<usize>,
    regions: Vec<CString>,
}

fn run_status(e: &RunError) -> SbtStatus {
    match e {
        RunError::Config(ConfigError::UnknownExperiment { .. }) => SbtStatus::UnknownExperiment,
        RunError::Config(_) => SbtStatus::Config,
        RunError::Search(SearchError::InvalidConfig(_) | SearchError::InvalidProblem(_)) => SbtStatus::Config,
        RunError::Search(_) => SbtStatus::Simulation,
        RunError::Io { .. } => SbtStatus::Io,
    }
}

fn cstring(s: impl Into<String>) -> CString {
    CString::new(s.into().replace('\0', " ")).expect("nul bytes removed")
}

/// Runs experiment `name` (name or 1-based index) and writes its results
/// under `results_root/<experiment>/<run_id>`. `run_id` and `options` may be
/// null.
///
/// # Safety
/// Pointers must be valid as described; `out` must point to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_experiment(
    registry: *const SbtRegistry,
    name: *const c_char,
    results_root: *const c_char,
    run_id: *const c_char,
    options: *const SbtRunOptions,
    out: *mut *mut SbtRun,
) -> SbtStatus {
    guard(|| {
        let Some(registry) = registry.as_ref() else {
            return fail(SbtStatus::NullPointer, "registry is null");
        };
        if out.is_null() {
            return fail(SbtStatus::NullPointer, "out is null");
        }
        let (name, root) = match (str_arg(name, "name"), str_arg(results_root, "results_root")) {
            (Ok(n), Ok(r)) => (n, r),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let run_id = if run_id.is_null() {
            None
        } else {
            match str_arg(run_id, "run_id") {
                Ok(id) => Some(id),
                Err(s) => return s,
            }
        };
        let mut experiment = match registry.inner.get(name) {
            Ok(e) => e.clone(),
            Err(e) => return fail(SbtStatus::UnknownExperiment, e.to_string()),
        };
        if let Some(opts) = options.as_ref() {
            opts.overrides().apply(&mut experiment);
        }
        let outcome = match run_experiment(&experiment, Path::new(root), run_id) {
            Ok(o) => o,
            Err(e) => return fail(run_status(&e), e.to_string()),
        };
        let spec = &experiment.spec;
        let run = SbtRun {
            result_dir: cstring(outcome.result_dir.to_string_lossy()),
            algorithm: cstring(outcome.result.algorithm.clone()),
            rows: outcome
                .result
                .archive
                .iter()
                .map(|r| RecordRow { inputs: r.input.values.clone(), objectives: r.objectives.clone(), critical: r.critical })
                .collect(),
            critical_count: outcome.result.critical_set.len(),
            pareto: outcome.result.pareto_set.clone(),
            regions: outcome.regions.iter().map(|r| cstring(format_condition(r, spec))).collect(),
        };
        *out = Box::into_raw(Box::new(run));
        SbtStatus::Ok
    })
}

/// Results directory of the run.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_result_dir(run: *const SbtRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.result_dir.as_ptr())
}

/// Algorithm name, `NSGA2` or `NSGA2DT`.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_algorithm(run: *const SbtRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.algorithm.as_ptr())
}

/// Number of archived evaluations.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_evaluations(run: *const SbtRun) -> usize {
    run.as_ref().map_or(0, |r| r.rows.len())
}

/// Number of critical evaluations.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_critical_count(run: *const SbtRun) -> usize {
    run.as_ref().map_or(0, |r| r.critical_count)
}

/// Number of Pareto-optimal evaluations.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_pareto_count(run: *const SbtRun) -> usize {
    run.as_ref().map_or(0, |r| r.pareto.len())
}

/// Archive index of the `i`-th Pareto-optimal evaluation.
///
/// # Safety
/// `run` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_pareto_index(run: *const SbtRun, i: usize, out: *mut usize) -> SbtStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(SbtStatus::NullPointer, "run or out is null");
        };
        match run.pareto.get(i) {
            Some(&idx) => {
                *out = idx;
                SbtStatus::Ok
            }
            None => fail(SbtStatus::OutOfRange, format!("pareto index {i} out of range")),
        }
    })
}

/// Copies evaluation `index`: search variables into `inputs` (capacity
/// `inputs_len`), objectives into `objectives` (capacity `objectives_len`),
/// and the criticality flag into `critical`. Any output pointer may be null
/// to skip it; a capacity smaller than required is an error.
///
/// # Safety
/// Non-null buffers must hold at least the given number of elements.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_record(
    run: *const SbtRun,
    index: usize,
    inputs: *mut f64,
    inputs_len: usize,
    objectives: *mut f64,
    objectives_len: usize,
    critical: *mut bool,
) -> SbtStatus {
    guard(|| {
        let Some(run) = run.as_ref() else {
            return fail(SbtStatus::NullPointer, "run is null");
        };
        let Some(row) = run.rows.get(index) else {
            return fail(SbtStatus::OutOfRange, format!("record {index} out of range ({} evaluations)", run.rows.len()));
        };
        for (buf, cap, src, what) in [(inputs, inputs_len, &row.inputs, "inputs"), (objectives, objectives_len, &row.objectives, "objectives")] {
            if buf.is_null() {
                continue;
            }
            if cap < src.len() {
                return fail(SbtStatus::InvalidArgument, format!("{what} buffer holds {cap}, need {}", src.len()));
            }
            ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        }
        if !critical.is_null() {
            *critical = row.critical;
        }
        SbtStatus::Ok
    })
}

/// Number of critical regions extracted from the archive.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_region_count(run: *const SbtRun) -> usize {
    run.as_ref().map_or(0, |r| r.regions.len())
}

/// Human-readable condition of region `i`, or null if out of range.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_region_condition(run: *const SbtRun, i: usize) -> *const c_char {
    run.as_ref().and_then(|r| r.regions.get(i)).map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbt_run_free(run: *mut SbtRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
