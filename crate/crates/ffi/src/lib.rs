//! C ABI for the perfloop simulator.
//!
//! Conventions: opaque handles own their Rust data and are released with
//! the matching `_free` function; fallible calls return [`PlStatus`] (or
//! null for constructors) and store a message retrievable with
//! [`pl_last_error_message`]; metric accessors return NaN for undefined
//! values or out-of-range indices. The generated header lives at
//! `include/perfloop.h`.

use perfloop::runner::{ExperimentConfig, RunKind};
use perfloop::scenarios::{
    run_scenario1, run_scenario2, Scenario1Report, Scenario2Report, World,
};
use perfloop::synthdata;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status codes returned by fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    RuntimeError = 4,
    Panic = 5,
}

/// World selector for scenario-1 accessors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlWorld {
    PerformanceIdeal = 0,
    Adaptation = 1,
    UnbiasedBaseline = 2,
}

/// Perceived (noisy validation) vs real (true-label test) metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlView {
    Perceived = 0,
    Real = 1,
}

/// Group selector for per-group metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlGroup {
    GroupA = 0,
    GroupB = 1,
    Global = 2,
}

/// Opaque experiment configuration.
pub struct PlConfig {
    inner: ExperimentConfig,
}

/// Opaque scenario-1 report.
pub struct PlScenario1Report {
    inner: Scenario1Report,
}

/// Opaque scenario-2 report.
pub struct PlScenario2Report {
    inner: Scenario2Report,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<T>(fallback: T, body: impl FnOnce() -> T) -> T {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(v) => v,
        Err(_) => {
            set_error("internal panic".to_string());
            fallback
        }
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns the last error message on this thread as a newly allocated
/// string, or null when no error has occurred. Free with
/// [`pl_string_free`].
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer previously returned by this library's
/// string-returning functions, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// A configuration with every field at its desk-scale default.
#[no_mangle]
pub extern "C" fn pl_config_default() -> *mut PlConfig {
    guard(std::ptr::null_mut(), || {
        Box::into_raw(Box::new(PlConfig {
            inner: ExperimentConfig::default(),
        }))
    })
}

/// Parses a TOML config; returns null and sets the error on failure.
///
/// # Safety
/// `text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pl_config_from_toml(text: *const c_char) -> *mut PlConfig {
    guard(std::ptr::null_mut(), || {
        if text.is_null() {
            set_error("null config text".to_string());
            return std::ptr::null_mut();
        }
        let text = match unsafe { CStr::from_ptr(text) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("config text is not UTF-8".to_string());
                return std::ptr::null_mut();
            }
        };
        match ExperimentConfig::from_toml(text) {
            Ok(cfg) => Box::into_raw(Box::new(PlConfig { inner: cfg })),
            Err(e) => {
                set_error(e.to_string());
                std::ptr::null_mut()
            }
        }
    })
}

/// # Safety
/// `cfg` must be null or an unfreed pointer from a config constructor.
#[no_mangle]
pub unsafe extern "C" fn pl_config_free(cfg: *mut PlConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

unsafe fn config_mut<'a>(cfg: *mut PlConfig) -> Option<&'a mut ExperimentConfig> {
    unsafe { cfg.as_mut() }.map(|c| &mut c.inner)
}

unsafe fn config_ref<'a>(cfg: *const PlConfig) -> Option<&'a ExperimentConfig> {
    unsafe { cfg.as_ref() }.map(|c| &c.inner)
}

/// Overrides the trial count.
///
/// # Safety
/// `cfg` must be a valid config handle.
#[no_mangle]
pub unsafe extern "C" fn pl_config_set_trials(cfg: *mut PlConfig, trials: u32) -> PlStatus {
    guard(PlStatus::Panic, || {
        let Some(cfg) = (unsafe { config_mut(cfg) }) else {
            set_error("null config".to_string());
            return PlStatus::NullArgument;
        };
        if trials == 0 {
            set_error("trials must be at least 1".to_string());
            return PlStatus::InvalidConfig;
        }
        cfg.run.trials = trials as usize;
        PlStatus::Ok
    })
}

/// Sets the threshold policy: "global" or "groupwise".
///
/// # Safety
/// `cfg` must be a valid config handle and `policy` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn pl_config_set_policy(
    cfg: *mut PlConfig,
    policy: *const c_char,
) -> PlStatus {
    guard(PlStatus::Panic, || {
        let Some(cfg) = (unsafe { config_mut(cfg) }) else {
            set_error("null config".to_string());
            return PlStatus::NullArgument;
        };
        if policy.is_null() {
            set_error("null policy".to_string());
            return PlStatus::NullArgument;
        }
        let Ok(policy) = (unsafe { CStr::from_ptr(policy) }).to_str() else {
            set_error("policy is not UTF-8".to_string());
            return PlStatus::InvalidUtf8;
        };
        let old = cfg.run.policy.clone();
        cfg.run.policy = policy.to_string();
        match cfg.policy() {
            Ok(_) => PlStatus::Ok,
            Err(e) => {
                cfg.run.policy = old;
                set_error(e.to_string());
                PlStatus::InvalidConfig
            }
        }
    })
}

/// Toggles dropping the oldest training month each iteration.
///
/// # Safety
/// `cfg` must be a valid config handle.
#[no_mangle]
pub unsafe extern "C" fn pl_config_set_drop_old(cfg: *mut PlConfig, drop_old: bool) -> PlStatus {
    guard(PlStatus::Panic, || {
        let Some(cfg) = (unsafe { config_mut(cfg) }) else {
            set_error("null config".to_string());
            return PlStatus::NullArgument;
        };
        cfg.run.drop_old = drop_old;
        PlStatus::Ok
    })
}

unsafe fn path_from(ptr: *const c_char) -> Result<String, PlStatus> {
    if ptr.is_null() {
        set_error("null path".to_string());
        return Err(PlStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map(|s| s.to_string())
        .map_err(|_| {
            set_error("path is not UTF-8".to_string());
            PlStatus::InvalidUtf8
        })
}

/// Generates one biased dataset and writes it as CSV.
///
/// # Safety
/// `cfg` must be a valid config handle and `path` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn pl_generate_dataset_csv(
    cfg: *const PlConfig,
    seed: u64,
    path: *const c_char,
) -> PlStatus {
    guard(PlStatus::Panic, || {
        let Some(cfg) = (unsafe { config_ref(cfg) }) else {
            set_error("null config".to_string());
            return PlStatus::NullArgument;
        };
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let build = || -> perfloop::Result<()> {
            let base = synthdata::gen_base(
                cfg.data.n,
                cfg.data.prevalence,
                cfg.data.d,
                cfg.data.months,
                seed,
            )?;
            let ds = synthdata::apply_bias_spec(&base, &cfg.bias_spec(RunKind::Gen)?, seed)?;
            perfloop::io::write_atomic(
                Path::new(&path),
                perfloop::io::dataset_to_csv(&ds).as_bytes(),
            )
        };
        match build() {
            Ok(()) => PlStatus::Ok,
            Err(e) => {
                set_error(e.to_string());
                PlStatus::RuntimeError
            }
        }
    })
}

/// Runs the adaptive-evasion experiment for one seed.
///
/// # Safety
/// `cfg` must be a valid config handle.
#[no_mangle]
pub unsafe extern "C" fn pl_run_scenario1(cfg: *const PlConfig, seed: u64) -> *mut PlScenario1Report {
    guard(std::ptr::null_mut(), || {
        let Some(cfg) = (unsafe { config_ref(cfg) }) else {
            set_error("null config".to_string());
            return std::ptr::null_mut();
        };
        let run = || -> perfloop::Result<Scenario1Report> {
            run_scenario1(&cfg.scenario1_setup()?, seed)
        };
        match run() {
            Ok(report) => Box::into_raw(Box::new(PlScenario1Report { inner: report })),
            Err(e) => {
                set_error(e.to_string());
                std::ptr::null_mut()
            }
        }
    })
}

/// # Safety
/// `report` must be null or an unfreed scenario-1 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario1_free(report: *mut PlScenario1Report) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

fn world_of(w: PlWorld) -> World {
    match w {
        PlWorld::PerformanceIdeal => World::PerformanceIdeal,
        PlWorld::Adaptation => World::Adaptation,
        PlWorld::UnbiasedBaseline => World::UnbiasedBaseline,
    }
}

/// Number of trials evaluated in each world.
///
/// # Safety
/// `report` must be a valid scenario-1 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario1_trials(report: *const PlScenario1Report) -> u32 {
    guard(0, || {
        unsafe { report.as_ref() }
            .map(|r| r.inner.performance_ideal.outcomes.len() as u32)
            .unwrap_or(0)
    })
}

/// Test-set TPR of one trial in one world; NaN when out of range.
///
/// # Safety
/// `report` must be a valid scenario-1 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario1_tpr(
    report: *const PlScenario1Report,
    world: PlWorld,
    trial: u32,
) -> f64 {
    guard(f64::NAN, || {
        let Some(r) = (unsafe { report.as_ref() }) else {
            return f64::NAN;
        };
        r.inner
            .world(world_of(world))
            .outcomes
            .get(trial as usize)
            .map(|o| o.tpr)
            .unwrap_or(f64::NAN)
    })
}

/// log2 FPR ratio (A over B) of one trial; NaN when undefined.
///
/// # Safety
/// `report` must be a valid scenario-1 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario1_log2_fpr_ratio(
    report: *const PlScenario1Report,
    world: PlWorld,
    trial: u32,
) -> f64 {
    guard(f64::NAN, || {
        let Some(r) = (unsafe { report.as_ref() }) else {
            return f64::NAN;
        };
        r.inner
            .world(world_of(world))
            .outcomes
            .get(trial as usize)
            .and_then(|o| o.log2_fpr_ratio)
            .unwrap_or(f64::NAN)
    })
}

/// Config id of the rank-th best model in a world (rank 0..5); -1 when
/// out of range.
///
/// # Safety
/// `report` must be a valid scenario-1 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario1_top5(
    report: *const PlScenario1Report,
    world: PlWorld,
    rank: u32,
) -> i64 {
    guard(-1, || {
        let Some(r) = (unsafe { report.as_ref() }) else {
            return -1;
        };
        r.inner
            .world(world_of(world))
            .top5
            .get(rank as usize)
            .map(|&id| id as i64)
            .unwrap_or(-1)
    })
}

/// Runs the selective-label experiment for one seed.
///
/// # Safety
/// `cfg` must be a valid config handle.
#[no_mangle]
pub unsafe extern "C" fn pl_run_scenario2(cfg: *const PlConfig, seed: u64) -> *mut PlScenario2Report {
    guard(std::ptr::null_mut(), || {
        let Some(cfg) = (unsafe { config_ref(cfg) }) else {
            set_error("null config".to_string());
            return std::ptr::null_mut();
        };
        let run = || -> perfloop::Result<Scenario2Report> {
            Ok(run_scenario2(&cfg.scenario2_setup()?, seed)?.0)
        };
        match run() {
            Ok(report) => Box::into_raw(Box::new(PlScenario2Report { inner: report })),
            Err(e) => {
                set_error(e.to_string());
                std::ptr::null_mut()
            }
        }
    })
}

/// # Safety
/// `report` must be null or an unfreed scenario-2 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario2_free(report: *mut PlScenario2Report) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Number of sliding-window iterations in the report.
///
/// # Safety
/// `report` must be a valid scenario-2 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario2_iterations(report: *const PlScenario2Report) -> u32 {
    guard(0, || {
        unsafe { report.as_ref() }
            .map(|r| r.inner.iterations.len() as u32)
            .unwrap_or(0)
    })
}

unsafe fn metrics_of<'a>(
    report: *const PlScenario2Report,
    iteration: u32,
    view: PlView,
) -> Option<&'a perfloop::fairmetrics::MetricsReport> {
    let r = unsafe { report.as_ref() }?;
    let iter = r.inner.iterations.get(iteration as usize)?;
    Some(match view {
        PlView::Perceived => &iter.perceived,
        PlView::Real => &iter.real,
    })
}

/// FPR for one iteration, view, and group; NaN when undefined.
///
/// # Safety
/// `report` must be a valid scenario-2 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario2_fpr(
    report: *const PlScenario2Report,
    iteration: u32,
    view: PlView,
    group: PlGroup,
) -> f64 {
    guard(f64::NAN, || {
        let Some(m) = (unsafe { metrics_of(report, iteration, view) }) else {
            return f64::NAN;
        };
        let v = match group {
            PlGroup::GroupA => m.group_a.fpr,
            PlGroup::GroupB => m.group_b.fpr,
            PlGroup::Global => m.global_fpr,
        };
        v.unwrap_or(f64::NAN)
    })
}

/// Global TPR for one iteration and view; NaN when undefined.
///
/// # Safety
/// `report` must be a valid scenario-2 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario2_tpr(
    report: *const PlScenario2Report,
    iteration: u32,
    view: PlView,
) -> f64 {
    guard(f64::NAN, || {
        unsafe { metrics_of(report, iteration, view) }
            .and_then(|m| m.global_tpr)
            .unwrap_or(f64::NAN)
    })
}

/// log2 FPR ratio (A over B) for one iteration and view; NaN when
/// undefined.
///
/// # Safety
/// `report` must be a valid scenario-2 handle.
#[no_mangle]
pub unsafe extern "C" fn pl_scenario2_log2_fpr_ratio(
    report: *const PlScenario2Report,
    iteration: u32,
    view: PlView,
) -> f64 {
    guard(f64::NAN, || {
        unsafe { metrics_of(report, iteration, view) }
            .and_then(|m| m.log2_fpr_ratio)
            .unwrap_or(f64::NAN)
    })
}
