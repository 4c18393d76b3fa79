//! C ABI over `ksfront`.
//!
//! Every entry point returns a [`KsfStatus`]; results come back through out
//! pointers. Objects are opaque handles created by `ksf_*_new` and released with
//! the matching `ksf_*_free`. After a failure, [`ksf_last_error_message`] gives
//! the message on the calling thread. Panics never cross the boundary; they are
//! reported as `KSF_STATUS_PANIC`.
//!
//! Integer enum arguments (`tail`, `scheme`) take the values of [`KsfTail`] and
//! [`KsfScheme`] and are range-checked.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ksfront::config::{parse_config_as, ScenarioKind};
use ksfront::kernel::psi_fast;
use ksfront::runner::{run_and_write, run_scenario, RunOptions, RunReport};
use ksfront::solver::{step, State};
use ksfront::wave::{fixed_point_wave, FixedPointConfig, WaveProfile};
use ksfront::{Error, Grid, ModelParams, ScalarField, Scheme, SolverConfig, TailPolicy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A model hypothesis or admissibility inequality failed.
    Hypothesis = 3,
    /// Stability refusal, negativity, non-convergence or an envelope violation.
    Numerical = 4,
    Config = 5,
    Io = 6,
    Panic = 7,
    BufferTooSmall = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsfTail {
    Zero = 0,
    ConstantLeft = 1,
    ConstantBoth = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsfScheme {
    Imex = 0,
    ExplicitEuler = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KsfSpeedConstants {
    pub c0_star: f64,
    pub a_star: f64,
    pub c_star: f64,
    pub c_star_star: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KsfWaveDiagnostics {
    pub speed: f64,
    pub residual: f64,
    pub right_tail_deviation: f64,
    pub left_value: f64,
    pub left_deviation: f64,
    pub envelope_margin: f64,
    pub envelope_d: f64,
    pub outer_iterations: u32,
}

/// Model constants.
pub struct KsfModel {
    params: ModelParams,
}

/// A time-dependent run advanced step by step.
pub struct KsfSimulation {
    params: ModelParams,
    cfg: SolverConfig,
    state: State,
}

/// A converged traveling-wave profile.
pub struct KsfWave {
    profile: WaveProfile,
}

/// The outcome of a scenario run.
pub struct KsfReport {
    report: RunReport,
    text: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(KsfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn status_of(e: &Error) -> KsfStatus {
    match e {
        Error::InvalidParameter(_) | Error::GridMismatch(_) => KsfStatus::InvalidArgument,
        Error::Hypothesis(_) => KsfStatus::Hypothesis,
        Error::Config(_) => KsfStatus::Config,
        Error::Io { .. } => KsfStatus::Io,
        Error::AtTime { source, .. } | Error::Context { source, .. } => status_of(source),
        _ => KsfStatus::Numerical,
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KsfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KsfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            KsfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(KsfStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(KsfStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copy `src` into `dst` when `dst` is not NULL.
unsafe fn copy_to(dst: *mut f64, src: &[f64]) {
    if !dst.is_null() {
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
}

fn tail_from(v: i32) -> Result<TailPolicy, Failure> {
    match v {
        0 => Ok(TailPolicy::Zero),
        1 => Ok(TailPolicy::ConstantLeft),
        2 => Ok(TailPolicy::ConstantBoth),
        _ => Err(invalid(format!("unknown tail policy {v}"))),
    }
}

fn scheme_from(v: i32) -> Result<Scheme, Failure> {
    match v {
        0 => Ok(Scheme::Imex),
        1 => Ok(Scheme::ExplicitEuler),
        _ => Err(invalid(format!("unknown scheme {v}"))),
    }
}

fn field_grid(half_length: f64, n_nodes: usize) -> Result<Grid, Failure> {
    if n_nodes < 3 {
        return Err(invalid(format!("need at least 3 nodes, got {n_nodes}")));
    }
    Ok(Grid::new(half_length, n_nodes - 1)?)
}

/// Message of the most recent failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ksf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ksf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a model. `a`, `b`, `lambda`, `mu` must be positive and `chi` nonnegative.
///
/// # Safety
/// `out_model` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn ksf_model_new(chi: f64, a: f64, b: f64, lambda: f64, mu: f64, out_model: *mut *mut KsfModel) -> KsfStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let params = ModelParams::new(chi, a, b, lambda, mu)?;
        *slot = Box::into_raw(Box::new(KsfModel { params }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`ksf_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ksf_model_free(model: *mut KsfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `chi mu < b`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_model_global_existence(model: *const KsfModel, out_flag: *mut bool) -> KsfStatus {
    guard(|| {
        *out(out_flag, "out_flag")? = deref(model, "model")?.params.global_existence();
        Ok(())
    })
}

/// Whether the hypothesis under which the spreading speed equals `2 sqrt(a)` holds.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_model_hypothesis_h(model: *const KsfModel, out_flag: *mut bool) -> KsfStatus {
    guard(|| {
        *out(out_flag, "out_flag")? = deref(model, "model")?.params.hypothesis_h();
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_model_kappa_admissible(model: *const KsfModel, kappa: f64, out_flag: *mut bool) -> KsfStatus {
    guard(|| {
        if !(kappa > 0.0) {
            return Err(invalid(format!("kappa must be > 0, got {kappa}")));
        }
        *out(out_flag, "out_flag")? = deref(model, "model")?.params.kappa_admissible(kappa);
        Ok(())
    })
}

/// `(kappa^2 + a) / kappa`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_model_c_kappa(model: *const KsfModel, kappa: f64, out_speed: *mut f64) -> KsfStatus {
    guard(|| {
        if !(kappa > 0.0) {
            return Err(invalid(format!("kappa must be > 0, got {kappa}")));
        }
        *out(out_speed, "out_speed")? = deref(model, "model")?.params.c_kappa(kappa);
        Ok(())
    })
}

/// Fails with `KSF_STATUS_HYPOTHESIS` when `chi mu >= b`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_model_speed_constants(model: *const KsfModel, out_constants: *mut KsfSpeedConstants) -> KsfStatus {
    guard(|| {
        let slot = out(out_constants, "out_constants")?;
        let c = deref(model, "model")?.params.speed_constants()?;
        *slot = KsfSpeedConstants { c0_star: c.c0_star, a_star: c.a_star, c_star: c.c_star, c_star_star: c.c_star_star };
        Ok(())
    })
}

/// Chemical field `v` and its derivative for nodal density `u` on `[-half_length, half_length]`.
///
/// # Safety
/// `u`, `out_v`, `out_v_x` must each point to `n_nodes` doubles; `out_v_x` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ksf_psi_fast(
    model: *const KsfModel,
    half_length: f64,
    u: *const f64,
    n_nodes: usize,
    tail: i32,
    out_v: *mut f64,
    out_v_x: *mut f64,
) -> KsfStatus {
    guard(|| {
        let p = deref(model, "model")?.params;
        let values = slice(u, n_nodes, "u")?;
        if out_v.is_null() {
            return Err(null("out_v"));
        }
        let field = ScalarField::new(field_grid(half_length, n_nodes)?, values.to_vec())?;
        let (v, v_x) = psi_fast(&field, &p, tail_from(tail)?);
        copy_to(out_v, v.values());
        copy_to(out_v_x, v_x.values());
        Ok(())
    })
}

/// Start a run from nodal data `u0` on `[-half_length, half_length]`.
///
/// # Safety
/// `model` must be valid, `u0` must point to `n_nodes` doubles and `out_sim` to handle storage.
#[no_mangle]
pub unsafe extern "C" fn ksf_simulation_new(
    model: *const KsfModel,
    half_length: f64,
    u0: *const f64,
    n_nodes: usize,
    dt: f64,
    scheme: i32,
    tail: i32,
    out_sim: *mut *mut KsfSimulation,
) -> KsfStatus {
    guard(|| {
        let slot = out(out_sim, "out_sim")?;
        let params = deref(model, "model")?.params;
        let values = slice(u0, n_nodes, "u0")?;
        let cfg = SolverConfig { dt, scheme: scheme_from(scheme)?, tail: tail_from(tail)?, ..SolverConfig::default() };
        cfg.validate()?;
        let u = ScalarField::new(field_grid(half_length, n_nodes)?, values.to_vec())?;
        if let Some((i, v)) = u.undershoot(cfg.neg_tolerance) {
            return Err(invalid(format!("u0[{i}] = {v} is negative")));
        }
        let state = State::new(0.0, u, &params, cfg.tail);
        *slot = Box::into_raw(Box::new(KsfSimulation { params, cfg, state }));
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle from [`ksf_simulation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ksf_simulation_free(sim: *mut KsfSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advance to `t_target` with uniform steps no larger than the configured `dt`.
/// On failure the handle keeps the last good state.
///
/// # Safety
/// `sim` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ksf_simulation_advance(sim: *mut KsfSimulation, t_target: f64) -> KsfStatus {
    guard(|| {
        let s = out(sim, "sim")?;
        let span = t_target - s.state.t;
        if !(span.is_finite() && span >= 0.0) {
            return Err(invalid(format!("target time {t_target} is before the current time {}", s.state.t)));
        }
        if span == 0.0 {
            return Ok(());
        }
        let n = (span / s.cfg.dt - 1e-9).ceil().max(1.0) as usize;
        let cfg = SolverConfig { dt: span / n as f64, ..s.cfg };
        let t0 = s.state.t;
        let mut state = s.state.clone();
        for k in 1..=n {
            state = step(&state, &cfg, &s.params)?;
            state.t = t0 + k as f64 * cfg.dt;
        }
        state.t = t_target;
        s.state = state;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_simulation_time(sim: *const KsfSimulation, out_t: *mut f64) -> KsfStatus {
    guard(|| {
        *out(out_t, "out_t")? = deref(sim, "sim")?.state.t;
        Ok(())
    })
}

/// Copy the current `u`, `v`, `v_x`; any output may be NULL. `len` must equal the node count.
///
/// # Safety
/// Non-NULL outputs must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ksf_simulation_copy(
    sim: *const KsfSimulation,
    out_u: *mut f64,
    out_v: *mut f64,
    out_v_x: *mut f64,
    len: usize,
) -> KsfStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let n = s.state.u.len();
        if len != n {
            return Err(Failure(KsfStatus::BufferTooSmall, format!("buffers hold {len} values, state has {n}")));
        }
        copy_to(out_u, s.state.u.values());
        copy_to(out_v, s.state.v.values());
        copy_to(out_v_x, s.state.v_x.values());
        Ok(())
    })
}

/// Construct the traveling wave with decay rate `kappa` on `[-half_length, half_length]`
/// with spacing close to `h`, using default tolerances.
///
/// # Safety
/// `model` and `out_wave` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_wave_new(
    model: *const KsfModel,
    kappa: f64,
    half_length: f64,
    h: f64,
    out_wave: *mut *mut KsfWave,
) -> KsfStatus {
    guard(|| {
        let slot = out(out_wave, "out_wave")?;
        let p = deref(model, "model")?.params;
        let grid = Grid::with_spacing(half_length, h)?;
        let profile = fixed_point_wave(kappa, &p, &grid, 0.0, &FixedPointConfig::default())?;
        *slot = Box::into_raw(Box::new(KsfWave { profile }));
        Ok(())
    })
}

/// # Safety
/// `wave` must be NULL or a handle from [`ksf_wave_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ksf_wave_free(wave: *mut KsfWave) {
    if !wave.is_null() {
        drop(Box::from_raw(wave));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_wave_len(wave: *const KsfWave, out_len: *mut usize) -> KsfStatus {
    guard(|| {
        *out(out_len, "out_len")? = deref(wave, "wave")?.profile.u.len();
        Ok(())
    })
}

/// Copy nodes and the profile; any output may be NULL. `len` must equal [`ksf_wave_len`].
///
/// # Safety
/// Non-NULL outputs must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ksf_wave_copy(
    wave: *const KsfWave,
    out_x: *mut f64,
    out_u: *mut f64,
    out_v: *mut f64,
    out_v_x: *mut f64,
    len: usize,
) -> KsfStatus {
    guard(|| {
        let w = &deref(wave, "wave")?.profile;
        let n = w.u.len();
        if len != n {
            return Err(Failure(KsfStatus::BufferTooSmall, format!("buffers hold {len} values, profile has {n}")));
        }
        let x: Vec<f64> = w.u.grid().nodes().collect();
        copy_to(out_x, &x);
        copy_to(out_u, w.u.values());
        copy_to(out_v, w.v.values());
        copy_to(out_v_x, w.v_x.values());
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_wave_diagnostics(wave: *const KsfWave, out_diag: *mut KsfWaveDiagnostics) -> KsfStatus {
    guard(|| {
        let slot = out(out_diag, "out_diag")?;
        let w = &deref(wave, "wave")?.profile;
        let d = w.diagnostics;
        *slot = KsfWaveDiagnostics {
            speed: w.speed,
            residual: d.residual,
            right_tail_deviation: d.right_tail_deviation,
            left_value: d.left_value,
            left_deviation: d.left_deviation,
            envelope_margin: d.envelope_margin,
            envelope_d: w.envelopes.d,
            outer_iterations: w.outer_iterations() as u32,
        };
        Ok(())
    })
}

/// Parse and run a scenario from configuration text. `kind` (e.g. `"speed"`) overrides
/// the file's kind when not NULL. Outputs are written to `out_dir` when not NULL.
///
/// # Safety
/// `config_text` must be a NUL-terminated string; `kind` and `out_dir` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ksf_scenario_run(
    config_text: *const c_char,
    kind: *const c_char,
    out_dir: *const c_char,
    refine: bool,
    out_report: *mut *mut KsfReport,
) -> KsfStatus {
    guard(|| {
        let slot = out(out_report, "out_report")?;
        let text = c_str(config_text, "config_text")?;
        let kind = if kind.is_null() {
            None
        } else {
            let name = c_str(kind, "kind")?;
            let parsed: ScenarioKind = toml_kind(name).ok_or_else(|| invalid(format!("unknown scenario kind {name:?}")))?;
            Some(parsed)
        };
        let cfg = parse_config_as(text, kind)?;
        let opts = RunOptions { out_dir: None, refine, jobs: None };
        let report = if out_dir.is_null() {
            run_scenario(&cfg, &opts)?
        } else {
            let dir = PathBuf::from(c_str(out_dir, "out_dir")?);
            run_and_write(&cfg, &RunOptions { out_dir: Some(dir), ..opts })?.0
        };
        let text = CString::new(report.render().replace('\0', " ")).expect("interior NULs removed");
        *slot = Box::into_raw(Box::new(KsfReport { report, text }));
        Ok(())
    })
}

fn toml_kind(name: &str) -> Option<ScenarioKind> {
    match name {
        "simulate" => Some(ScenarioKind::Simulate),
        "speed" => Some(ScenarioKind::Speed),
        "wave" => Some(ScenarioKind::Wave),
        "sweep" => Some(ScenarioKind::Sweep),
        "kernel-selftest" => Some(ScenarioKind::KernelSelftest),
        _ => None,
    }
}

/// # Safety
/// `report` must be NULL or a handle from [`ksf_scenario_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ksf_report_free(report: *mut KsfReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_report_passed(report: *const KsfReport, out_flag: *mut bool) -> KsfStatus {
    guard(|| {
        *out(out_flag, "out_flag")? = deref(report, "report")?.report.passed();
        Ok(())
    })
}

/// Rendered report text owned by the handle, or NULL for a NULL handle.
///
/// # Safety
/// `report` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn ksf_report_text(report: *const KsfReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.text.as_ptr())
}

/// Value of the measurement `name`; `KSF_STATUS_INVALID_ARGUMENT` if absent.
///
/// # Safety
/// Pointers must be valid and `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ksf_report_measurement(report: *const KsfReport, name: *const c_char, out_value: *mut f64) -> KsfStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        let r = deref(report, "report")?;
        let name = c_str(name, "name")?;
        *slot = r.report.measurement(name).ok_or_else(|| invalid(format!("no measurement named {name:?}")))?;
        Ok(())
    })
}
