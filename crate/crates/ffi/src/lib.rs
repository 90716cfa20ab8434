//! C interface to the stochmesh pipeline.
//!
//! A simulation is an opaque handle created from a TOML configuration and
//! released with [`stochmesh_simulation_free`]. Every fallible call returns a
//! [`StochmeshStatus`]; the message of the most recent failure on the calling
//! thread is available from [`stochmesh_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stochmesh::config::{parse_config_str, Overrides};
use stochmesh::driver::Simulation;
use stochmesh::io::save_mesh_csv;
use stochmesh::quality::quality_report;
use stochmesh::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StochmeshStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Io = 5,
    Panic = 6,
    InvalidUtf8 = 7,
}

/// Opaque simulation handle.
pub struct StochmeshSimulation {
    inner: Simulation,
}

/// Mesh quality of the current state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StochmeshQuality {
    pub min_jacobian: f64,
    pub max_xi_deviation: f64,
    pub max_eta_deviation: f64,
    pub fold_free: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(e: &Error) -> StochmeshStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Config { .. }
        | Error::InvalidDomain(_)
        | Error::InvalidGrid(_)
        | Error::PartitionTooSmall { .. }
        | Error::NoPaths => StochmeshStatus::InvalidConfig,
        Error::Io(_) | Error::Csv(_) | Error::Snapshot(_) => StochmeshStatus::Io,
        _ => StochmeshStatus::Numerical,
    }
}

fn fail(status: StochmeshStatus, message: impl Into<String>) -> StochmeshStatus {
    set_last_error(message.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), StochmeshStatus>) -> StochmeshStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StochmeshStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(StochmeshStatus::Panic, format!("panic: {message}"))
        }
    }
}

fn lift<T>(r: stochmesh::Result<T>) -> Result<T, StochmeshStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn read_str<'a>(s: *const c_char) -> Result<&'a str, StochmeshStatus> {
    if s.is_null() {
        return Err(fail(StochmeshStatus::NullPointer, "string argument is null"));
    }
    // SAFETY: the caller passes a NUL-terminated string that outlives the call.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| fail(StochmeshStatus::InvalidUtf8, "string argument is not valid UTF-8"))
}

fn handle<'a>(sim: *const StochmeshSimulation) -> Result<&'a StochmeshSimulation, StochmeshStatus> {
    // SAFETY: non-null handles come from `stochmesh_simulation_from_toml`.
    unsafe { sim.as_ref() }.ok_or_else(|| fail(StochmeshStatus::NullPointer, "simulation handle is null"))
}

fn handle_mut<'a>(sim: *mut StochmeshSimulation) -> Result<&'a mut StochmeshSimulation, StochmeshStatus> {
    // SAFETY: non-null handles come from `stochmesh_simulation_from_toml` and are not aliased.
    unsafe { sim.as_mut() }.ok_or_else(|| fail(StochmeshStatus::NullPointer, "simulation handle is null"))
}

fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, StochmeshStatus> {
    // SAFETY: non-null output pointers are valid for writes per the API contract.
    unsafe { p.as_mut() }.ok_or_else(|| fail(StochmeshStatus::NullPointer, format!("{name} is null")))
}

/// Creates a simulation from TOML configuration text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer. On
/// success `*out` holds a handle that must be released with
/// [`stochmesh_simulation_free`]; on failure `*out` is set to null.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_from_toml(
    toml: *const c_char,
    out: *mut *mut StochmeshSimulation,
) -> StochmeshStatus {
    guard(|| {
        let out = out_ref(out, "output handle pointer")?;
        *out = ptr::null_mut();
        let text = read_str(toml)?;
        let parsed = lift(parse_config_str(text, &Overrides::default()))?;
        let inner = lift(Simulation::new(parsed.run))?;
        *out = Box::into_raw(Box::new(StochmeshSimulation { inner }));
        Ok(())
    })
}

/// Releases a simulation. Null is accepted and ignored.
///
/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_free(sim: *mut StochmeshSimulation) {
    if !sim.is_null() {
        // SAFETY: the handle was created by `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Advances the simulation by one time step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_step(sim: *mut StochmeshSimulation) -> StochmeshStatus {
    guard(|| lift(handle_mut(sim)?.inner.step()))
}

/// Advances the simulation until its time reaches `t_target` (rounded to
/// whole steps). Targets at or before the current time do nothing.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_advance(sim: *mut StochmeshSimulation, t_target: f64) -> StochmeshStatus {
    guard(|| {
        let sim = &mut handle_mut(sim)?.inner;
        if !t_target.is_finite() {
            return Err(fail(StochmeshStatus::InvalidConfig, "target time is not finite"));
        }
        let target = (t_target / sim.config().dt).round().max(0.0) as u64;
        while sim.steps_taken() < target {
            lift(sim.step())?;
        }
        Ok(())
    })
}

/// Current simulation time, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_time(sim: *const StochmeshSimulation) -> f64 {
    // SAFETY: see the function contract.
    unsafe { sim.as_ref() }.map_or(f64::NAN, |s| s.inner.time())
}

/// Writes the node counts along x and y.
///
/// # Safety
/// `sim` must be a live handle; `nx` and `ny` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_grid_size(
    sim: *const StochmeshSimulation,
    nx: *mut usize,
    ny: *mut usize,
) -> StochmeshStatus {
    guard(|| {
        let grid = *handle(sim)?.inner.grid();
        *out_ref(nx, "nx")? = grid.nx;
        *out_ref(ny, "ny")? = grid.ny;
        Ok(())
    })
}

/// Copies the nodal values of xi and eta, x fastest, into caller buffers of
/// `len` elements each. Fails with `BUFFER_TOO_SMALL` if `len < nx * ny`.
///
/// # Safety
/// `sim` must be a live handle; `xi` and `eta` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_copy_fields(
    sim: *const StochmeshSimulation,
    xi: *mut f64,
    eta: *mut f64,
    len: usize,
) -> StochmeshStatus {
    guard(|| {
        let state = handle(sim)?.inner.state();
        let n = state.xi.values().len();
        if xi.is_null() || eta.is_null() {
            return Err(fail(StochmeshStatus::NullPointer, "field buffer is null"));
        }
        if len < n {
            return Err(fail(StochmeshStatus::BufferTooSmall, format!("buffers hold {len} values, {n} needed")));
        }
        // SAFETY: both buffers are valid for `len >= n` writes.
        unsafe {
            ptr::copy_nonoverlapping(state.xi.values().as_ptr(), xi, n);
            ptr::copy_nonoverlapping(state.eta.values().as_ptr(), eta, n);
        }
        Ok(())
    })
}

/// Computes the mesh quality of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_quality(
    sim: *const StochmeshSimulation,
    out: *mut StochmeshQuality,
) -> StochmeshStatus {
    guard(|| {
        let q = lift(quality_report(handle(sim)?.inner.state()))?;
        *out_ref(out, "quality output")? = StochmeshQuality {
            min_jacobian: q.min_jacobian,
            max_xi_deviation: q.max_xi_deviation,
            max_eta_deviation: q.max_eta_deviation,
            fold_free: q.fold_free,
        };
        Ok(())
    })
}

/// Writes the current state as a snapshot CSV file.
///
/// # Safety
/// `sim` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stochmesh_simulation_write_csv(
    sim: *const StochmeshSimulation,
    path: *const c_char,
) -> StochmeshStatus {
    guard(|| {
        let sim = handle(sim)?;
        let path = read_str(path)?;
        lift(save_mesh_csv(sim.inner.state(), Path::new(path)))
    })
}

/// Message of the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn stochmesh_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stochmesh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
