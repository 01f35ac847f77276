//! C ABI over `cylmodes`.
//!
//! Objects cross the boundary as opaque pointers created by a `*_new` or
//! `*_from_*` call and released by the matching `*_free`. Every fallible
//! call returns a [`CylStatus`]; on failure the message is kept per thread
//! and read back with [`cyl_last_error`]. Panics never unwind into C: they
//! are caught and reported as [`CylStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cylmodes::cli::RunConfig;
use cylmodes::diagnostics::{l2_norm_squared, plancherel_check, Monitor, RunSummary};
use cylmodes::evolution::Trajectory;
use cylmodes::kernel::KernelEvaluator;
use cylmodes::modes::{Component, Family, VelocityModeSet};
use cylmodes::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CylStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Cosine or sine family of an azimuthal mode.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CylFamily {
    Cos = 0,
    Sin = 1,
}

/// Velocity component in cylindrical coordinates.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CylComponent {
    R = 0,
    Theta = 1,
    Z = 2,
}

/// A validated run configuration.
pub struct CylConfig {
    inner: RunConfig,
}

/// A velocity field stored as azimuthal mode coefficients.
pub struct CylState {
    inner: VelocityModeSet,
}

/// A trajectory in progress together with its diagnostics.
pub struct CylRun {
    trajectory: Trajectory,
    monitor: Monitor,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Fail(CylStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) | Error::Constraint { .. } | Error::Range { .. } => CylStatus::Config,
            Error::InvalidInput(_) | Error::GridMismatch(_) => CylStatus::InvalidArgument,
            Error::SolverFailure { .. } | Error::Cfl { .. } | Error::Domain(_) => CylStatus::Numerical,
            Error::Io { .. } | Error::Checkpoint(_) => CylStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CylStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> CylStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CylStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CylStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CylStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies `s` with a terminating NUL into `buf` of `len` bytes. `needed`
/// (if non-null) receives the full size including the NUL.
unsafe fn copy_string(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Fail> {
    if !needed.is_null() {
        *needed = s.len() + 1;
    }
    if buf.is_null() || len < s.len() + 1 {
        return Err(Fail(
            CylStatus::BufferTooSmall,
            format!("buffer of {len} bytes cannot hold {} bytes", s.len() + 1),
        ));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cyl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf`. Returns
/// `BufferTooSmall` (with `*needed` set) when it does not fit.
///
/// # Safety
/// `buf` must point to `len` writable bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn cyl_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> CylStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match copy_string(&msg, buf, len, needed) {
        Ok(()) => CylStatus::Ok,
        Err(Fail(s, _)) => s,
    }
}

/// Parses and validates a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_config_from_toml(toml: *const c_char, out: *mut *mut CylConfig) -> CylStatus {
    guard(|| {
        let cfg = RunConfig::from_toml_str(text(toml, "toml")?)?;
        cfg.validate()?;
        put(out, CylConfig { inner: cfg })
    })
}

/// Reads and validates a TOML run configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_config_from_file(path: *const c_char, out: *mut *mut CylConfig) -> CylStatus {
    guard(|| {
        let cfg = RunConfig::load(Path::new(text(path, "path")?), &[])?;
        cfg.validate()?;
        put(out, CylConfig { inner: cfg })
    })
}

/// Applies one `section.key=value` override and revalidates. On failure
/// the configuration is left unchanged.
///
/// # Safety
/// `config` must come from this library; `assignment` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cyl_config_set(config: *mut CylConfig, assignment: *const c_char) -> CylStatus {
    guard(|| {
        let cfg = borrow_mut(config, "config")?;
        let mut doc: toml::Table = cfg.inner.to_toml_string().parse().expect("own serialisation parses");
        cylmodes::cli::apply_override(&mut doc, text(assignment, "assignment")?)?;
        let next = RunConfig::from_table(doc)?;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cyl_config_free(config: *mut CylConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Builds the initial state a configuration describes.
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_state_from_config(config: *const CylConfig, out: *mut *mut CylState) -> CylStatus {
    guard(|| {
        let state = borrow(config, "config")?.inner.initial_state()?;
        put(out, CylState { inner: state })
    })
}

/// # Safety
/// `state` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cyl_state_free(state: *mut CylState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Grid size, base frequency and truncation of a state. Any output may be null.
///
/// # Safety
/// `state` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cyl_state_dims(
    state: *const CylState,
    nr: *mut usize,
    nz: *mut usize,
    n_base: *mut u32,
    k_max: *mut usize,
) -> CylStatus {
    guard(|| {
        let s = &borrow(state, "state")?.inner;
        for (p, v) in [(nr, s.grid().nr()), (nz, s.grid().nz()), (k_max, s.k_max())] {
            if !p.is_null() {
                *p = v;
            }
        }
        if !n_base.is_null() {
            *n_base = s.n_base();
        }
        Ok(())
    })
}

/// # Safety
/// `state` must come from this library; `t` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_state_time(state: *const CylState, t: *mut f64) -> CylStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        *borrow_mut(t, "t")? = s.inner.time();
        Ok(())
    })
}

/// Copies one coefficient array (row-major, `nz` rows of `nr`) into `buf`.
///
/// # Safety
/// `state` must come from this library; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cyl_state_component(
    state: *const CylState,
    k: usize,
    family: CylFamily,
    component: CylComponent,
    buf: *mut f64,
    len: usize,
) -> CylStatus {
    guard(|| {
        let s = &borrow(state, "state")?.inner;
        if k > s.k_max() {
            return Err(Fail(
                CylStatus::InvalidArgument,
                format!("mode {k} exceeds truncation {}", s.k_max()),
            ));
        }
        let family = match family {
            CylFamily::Cos => Family::Cos,
            CylFamily::Sin => Family::Sin,
        };
        let component = match component {
            CylComponent::R => Component::R,
            CylComponent::Theta => Component::Theta,
            CylComponent::Z => Component::Z,
        };
        let a = s.coefficients().get(k, family, component);
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < a.len() {
            return Err(Fail(
                CylStatus::BufferTooSmall,
                format!("buffer holds {len} values, mode array has {}", a.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, a.len());
        for (o, v) in out.iter_mut().zip(a.iter()) {
            *o = *v;
        }
        Ok(())
    })
}

/// `‖u‖²` in `L²` of the full three-dimensional field.
///
/// # Safety
/// `state` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_state_l2_norm_squared(state: *const CylState, out: *mut f64) -> CylStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        *borrow_mut(out, "out")? = l2_norm_squared(&s.inner);
        Ok(())
    })
}

/// Relative gap between the mode-sum and quadrature `L²` norms of the state
/// and of its `(r, z)` gradient, whichever is larger.
///
/// # Safety
/// `state` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_state_plancherel_gap(state: *const CylState, out: *mut f64) -> CylStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        *borrow_mut(out, "out")? = plancherel_check(&s.inner).max();
        Ok(())
    })
}

/// Starts a run from `state` with the time, solver and diagnostic settings
/// of `config`. The initial state is projected first.
///
/// # Safety
/// `config` and `state` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_run_start(
    config: *const CylConfig,
    state: *const CylState,
    out: *mut *mut CylRun,
) -> CylStatus {
    guard(|| {
        let cfg = &borrow(config, "config")?.inner;
        let s = &borrow(state, "state")?.inner;
        let trajectory = Trajectory::start(s, cfg.stepper_config(s)?)?;
        let (_, _, period) = cfg.container();
        let period = if s.n_base() == 1 { period } else { 1 };
        let monitor = Monitor::new(
            cfg.energy_params(),
            s.n_base(),
            s.k_max(),
            trajectory.total_steps(),
            cfg.diag.cadence,
            period,
        )?;
        put(out, CylRun { trajectory, monitor })
    })
}

/// Takes up to `max_steps` steps; `*done` (if non-null) reports whether
/// the schedule is complete.
///
/// # Safety
/// `run` must come from this library; `done` may be null.
#[no_mangle]
pub unsafe extern "C" fn cyl_run_advance(run: *mut CylRun, max_steps: u64, done: *mut bool) -> CylStatus {
    guard(|| {
        let r = borrow_mut(run, "run")?;
        let finished = r
            .trajectory
            .advance(&mut r.monitor, None, max_steps)
            .map_err(|f| Fail::from(f.error))?;
        if !done.is_null() {
            *done = finished;
        }
        Ok(())
    })
}

/// Steps taken so far and the scheduled total. Either output may be null.
///
/// # Safety
/// `run` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cyl_run_progress(run: *const CylRun, steps: *mut u64, total: *mut u64) -> CylStatus {
    guard(|| {
        let r = borrow(run, "run")?;
        if !steps.is_null() {
            *steps = r.trajectory.steps_done();
        }
        if !total.is_null() {
            *total = r.trajectory.total_steps();
        }
        Ok(())
    })
}

/// A copy of the current state, owned by the caller.
///
/// # Safety
/// `run` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_run_state(run: *const CylRun, out: *mut *mut CylState) -> CylStatus {
    guard(|| {
        let r = borrow(run, "run")?;
        put(out, CylState { inner: r.trajectory.state().clone() })
    })
}

fn summary_json(s: &RunSummary) -> String {
    serde_json::to_string(s).expect("summary serialises")
}

/// The run summary so far as JSON. Returns `BufferTooSmall` with `*needed`
/// set when `buf` is too short; call with a null `buf` to size it.
///
/// # Safety
/// `run` must come from this library; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn cyl_run_summary_json(
    run: *const CylRun,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> CylStatus {
    guard(|| {
        let r = borrow(run, "run")?;
        copy_string(&summary_json(&r.monitor.summary()), buf, len, needed)
    })
}

/// # Safety
/// `run` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cyl_run_free(run: *mut CylRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// The kernel `F_m(s)` for `s > 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_kernel_fm(m: u32, s: f64, out: *mut f64) -> CylStatus {
    guard(|| {
        let v = KernelEvaluator::default().eval_fm(m, s)?;
        *borrow_mut(out, "out")? = v;
        Ok(())
    })
}

/// The companion kernel `G_m(s)` for `s > 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cyl_kernel_gm(m: u32, s: f64, out: *mut f64) -> CylStatus {
    guard(|| {
        let v = KernelEvaluator::default().eval_gm(m, s)?;
        *borrow_mut(out, "out")? = v;
        Ok(())
    })
}
