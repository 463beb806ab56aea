//! C ABI for dioph-lab.
//!
//! Every function returns a [`DiophStatus`]. On failure the message is kept
//! per thread and read with [`dioph_last_error`]. Handles are opaque and must
//! be released with their `_free` function. Strings returned by the library
//! are released with [`dioph_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dioph_lab::approx::{self, SeriesClass};
use dioph_lab::cli::ledger::{self, RunOptions};
use dioph_lab::cli::Subcommand;
use dioph_lab::counting::{self, CountConfig};
use dioph_lab::exact::{parse_rational_literal, ExactReal};
use dioph_lab::subspace::AffineSubspaceSpec;
use dioph_lab::{lattice, ApproxFunction, Error, Precision};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiophStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Parse = 3,
    Config = 4,
    PrecisionExhausted = 5,
    BudgetExceeded = 6,
    SolverIncomplete = 7,
    Io = 8,
    NotFound = 9,
    ReplayMismatch = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

impl From<&Error> for DiophStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::PrecisionExhausted { .. } => DiophStatus::PrecisionExhausted,
            Error::InvalidInput(_) | Error::DegenerateTilt | Error::ZeroProduct { .. } => DiophStatus::InvalidInput,
            Error::Parse { .. } => DiophStatus::Parse,
            Error::BudgetExceeded { .. } => DiophStatus::BudgetExceeded,
            Error::SolverIncomplete(_) => DiophStatus::SolverIncomplete,
            Error::Config(_) => DiophStatus::Config,
            Error::Io(_) => DiophStatus::Io,
            Error::NotFound(_) => DiophStatus::NotFound,
            Error::ReplayMismatch(_) => DiophStatus::ReplayMismatch,
        }
    }
}

/// Opaque affine subspace.
pub struct DiophSubspace(AffineSubspaceSpec);

/// Opaque approximation function.
pub struct DiophPsi(ApproxFunction);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Small(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DiophStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DiophStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            let s = DiophStatus::from(&e);
            set_error(e.to_string());
            s
        }
        Ok(Err(Fail::Null(arg))) => {
            set_error(format!("null pointer: {arg}"));
            DiophStatus::NullPointer
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("output buffer too small: need {need}"));
            DiophStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            DiophStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, arg: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(arg));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::InvalidInput(format!("{arg} is not UTF-8"))))
}

unsafe fn out<'a, T>(p: *mut T, arg: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(arg))
}

unsafe fn handle<'a, T>(p: *const T, arg: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(arg))
}

fn owned(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

fn precision(bits: u32) -> Precision {
    let bits = bits.max(53);
    Precision::new(bits, (bits * 32).max(4096))
}

/// Message of the last failure on this thread. Valid until the next call
/// on the same thread; never null.
#[no_mangle]
pub extern "C" fn dioph_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dioph_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a subspace from TOML (`d`, `n`, `tilt`, `shift`).
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dioph_subspace_parse(toml: *const c_char, out_handle: *mut *mut DiophSubspace) -> DiophStatus {
    guard(|| {
        let t = text(toml, "toml")?;
        let slot = out(out_handle, "out")?;
        let spec = AffineSubspaceSpec::parse(t)?;
        *slot = Box::into_raw(Box::new(DiophSubspace(spec)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`dioph_subspace_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dioph_subspace_free(h: *mut DiophSubspace) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Ambient dimension `d` and parameter dimension `n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dioph_subspace_dims(h: *const DiophSubspace, d: *mut usize, n: *mut usize) -> DiophStatus {
    guard(|| {
        let s = &handle(h, "subspace")?.0;
        *out(d, "d")? = s.d();
        *out(n, "n")? = s.n();
        Ok(())
    })
}

/// Parses an approximation function, e.g. `kind = "power_log"` with `tau = "1/2"`.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dioph_psi_parse(toml: *const c_char, out_handle: *mut *mut DiophPsi) -> DiophStatus {
    guard(|| {
        let t = text(toml, "toml")?;
        let slot = out(out_handle, "out")?;
        let psi: ApproxFunction = dioph_lab::cli::config::parse_toml(t)?;
        *slot = Box::into_raw(Box::new(DiophPsi(psi)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`dioph_psi_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dioph_psi_free(h: *mut DiophPsi) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Certified value of `psi(q)` enclosed in `[lo, hi]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dioph_psi_eval(h: *const DiophPsi, q: u64, lo: *mut f64, hi: *mut f64) -> DiophStatus {
    guard(|| {
        let psi = &handle(h, "psi")?.0;
        let v = psi.eval_u64(q, 128);
        *out(lo, "lo")? = v.lo_f64();
        *out(hi, "hi")? = v.hi_f64();
        Ok(())
    })
}

/// Exact count of rational points near the subspace from a count config
/// (`subspace`, `q`, `delta`, `ball`) in TOML.
///
/// # Safety
/// `config` must be a NUL-terminated string and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dioph_count_exact(config: *const c_char, bits: u32, budget: u64, count: *mut u64) -> DiophStatus {
    guard(|| {
        let t = text(config, "config")?;
        let slot = out(count, "count")?;
        let cfg: CountConfig = dioph_lab::cli::config::parse_toml(t)?;
        cfg.validate()?;
        *slot = counting::count_exact(&cfg, precision(bits), budget as u128)?;
        Ok(())
    })
}

/// Covering witness at the point `x` given as `n` exact literals.
/// Writes `q`, then `p_1..p_n` into `p_hat` (capacity `cap`), and the
/// certified verdict into `valid`.
///
/// # Safety
/// `x` must hold `n` NUL-terminated strings; `p_hat` must hold `cap` slots.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dioph_covering_witness(
    subspace: *const DiophSubspace,
    psi: *const DiophPsi,
    x: *const *const c_char,
    n: usize,
    n_big: u64,
    p_hat: *mut i64,
    cap: usize,
    valid: *mut bool,
) -> DiophStatus {
    guard(|| {
        let spec = &handle(subspace, "subspace")?.0;
        let psi = &handle(psi, "psi")?.0;
        if x.is_null() {
            return Err(Fail::Null("x"));
        }
        if p_hat.is_null() {
            return Err(Fail::Null("p_hat"));
        }
        let ok = out(valid, "valid")?;
        if n != spec.n() {
            return Err(Error::InvalidInput(format!("x has {n} coordinates, subspace needs {}", spec.n())).into());
        }
        if cap < n + 1 {
            return Err(Fail::Small(n + 1));
        }
        let coords = std::slice::from_raw_parts(x, n)
            .iter()
            .map(|&p| text(p, "x").and_then(|s| s.parse::<ExactReal>().map_err(Fail::Lib)))
            .collect::<Result<Vec<_>, Fail>>()?;
        let w = lattice::covering_witness(&coords, n_big, psi, spec, 10_000_000, precision(128))?;
        let dst = std::slice::from_raw_parts_mut(p_hat, n + 1);
        dst[0] = w.p_hat.q;
        dst[1..].copy_from_slice(&w.p_hat.p);
        *ok = w.valid();
        Ok(())
    })
}

/// Exponent test for `sum psi(q)^(d-n+s) q^(n-s)`; `s` is a rational literal.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dioph_classify_series(psi: *const DiophPsi, d: usize, n: usize, s: *const c_char, diverges: *mut bool) -> DiophStatus {
    guard(|| {
        let psi = &handle(psi, "psi")?.0;
        let s = parse_rational_literal(text(s, "s")?)?;
        let slot = out(diverges, "diverges")?;
        *slot = approx::divergence_classifier(psi, d, n, &s)? == SeriesClass::Diverges;
        Ok(())
    })
}

/// Runs a subcommand by name with a TOML config, writing outputs and the
/// ledger under `out_dir`. The run id is returned in `run_id` (free with
/// [`dioph_string_free`]) and the verdict in `passed`.
///
/// # Safety
/// Strings must be NUL-terminated; output pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dioph_run(
    subcommand: *const c_char,
    config: *const c_char,
    seed: u64,
    threads: usize,
    bits: u32,
    budget: u64,
    out_dir: *const c_char,
    run_id: *mut *mut c_char,
    passed: *mut bool,
) -> DiophStatus {
    guard(|| {
        let name = text(subcommand, "subcommand")?;
        let sub = Subcommand::from_name(name).ok_or_else(|| Error::Config(format!("unknown subcommand {name}")))?;
        let cfg = text(config, "config")?;
        let dir = PathBuf::from(text(out_dir, "out_dir")?);
        let id_slot = out(run_id, "run_id")?;
        let pass_slot = out(passed, "passed")?;
        let opts = RunOptions { seed, threads, bits, budget: budget as u128, out_dir: dir };
        let rec = ledger::run(sub, cfg, &opts)?;
        *id_slot = owned(rec.run_id);
        *pass_slot = rec.passed;
        Ok(())
    })
}

/// Replays a ledger entry; `threads = 0` keeps the recorded count.
/// A digest mismatch returns `DIOPH_STATUS_REPLAY_MISMATCH`.
///
/// # Safety
/// Strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dioph_replay(run_id: *const c_char, out_dir: *const c_char, threads: usize) -> DiophStatus {
    guard(|| {
        let id = text(run_id, "run_id")?;
        let dir = PathBuf::from(text(out_dir, "out_dir")?);
        let v = ledger::replay(id, &dir, (threads > 0).then_some(threads))?;
        if !v.matched() {
            let bad: Vec<&str> = v.files.iter().filter(|f| f.actual.as_deref() != Some(f.expected.as_str())).map(|f| f.name.as_str()).collect();
            return Err(Error::ReplayMismatch(format!("{id}: {}", bad.join(", "))).into());
        }
        Ok(())
    })
}
