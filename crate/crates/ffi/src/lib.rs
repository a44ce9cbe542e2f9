//! C ABI over `spinnet`.
//!
//! Networks are opaque handles. Every entry point returns a [`SpinnetStatus`];
//! on failure the message is kept per thread and read with
//! [`spinnet_last_error`]. Strings handed out by the library are released
//! with [`spinnet_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use spinnet::bounds::{max_fidelity, spectral};
use spinnet::linalg::CVec;
use spinnet::{Error, SpinNetwork};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed network, target or argument list.
    InvalidInput = 3,
    /// The request is well formed but cannot be met (phase constraint,
    /// missing catalyst, unresolvable spectrum).
    Infeasible = 4,
    /// A numerical or size budget was exceeded.
    Numerical = 5,
    /// The output buffer is too short; the required length was written.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Opaque network handle.
pub struct SpinnetNetwork {
    inner: SpinNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SpinnetStatus {
    match e {
        Error::PhaseConstraint(_) | Error::RamanDisabled(_) | Error::NotDark(_) | Error::SlopeBelowNoise(_) => {
            SpinnetStatus::Infeasible
        }
        Error::Budget(_)
        | Error::ClosureCap(_)
        | Error::NormalizationDrift(_)
        | Error::Nyquist { .. }
        | Error::NoPeaks
        | Error::OverlappingPeaks(_) => SpinnetStatus::Numerical,
        _ => SpinnetStatus::InvalidInput,
    }
}

struct Fail(SpinnetStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SpinnetStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpinnetStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            set_error(format!("internal panic: {}", msg.unwrap_or_default()));
            SpinnetStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(SpinnetStatus::NullPointer, format!("`{what}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SpinnetStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn handle<'a>(net: *const SpinnetNetwork) -> Result<&'a SpinNetwork, Fail> {
    net.as_ref().map(|h| &h.inner).ok_or_else(|| Fail(SpinnetStatus::NullPointer, "`net` is null".into()))
}

fn hand_out(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn spinnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spinnet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a network document (JSON text).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spinnet_network_from_json(json: *const c_char, out: *mut *mut SpinnetNetwork) -> SpinnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail(SpinnetStatus::NullPointer, "`out` is null".into()));
        }
        *out = ptr::null_mut();
        let net = spinnet::parse_network(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(SpinnetNetwork { inner: net }));
        Ok(())
    })
}

/// Load a bundled fixture by name (`fig1`, `fig2`, `triangle`, ...).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spinnet_network_fixture(name: *const c_char, out: *mut *mut SpinnetNetwork) -> SpinnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail(SpinnetStatus::NullPointer, "`out` is null".into()));
        }
        *out = ptr::null_mut();
        let name = text(name, "name")?;
        let net = spinnet::fixtures::network(name)
            .ok_or_else(|| Fail(SpinnetStatus::InvalidInput, format!("unknown fixture `{name}`")))?;
        *out = Box::into_raw(Box::new(SpinnetNetwork { inner: net }));
        Ok(())
    })
}

/// Destroy a handle. NULL is ignored.
///
/// # Safety
/// `net` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spinnet_network_free(net: *mut SpinnetNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of spins.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spinnet_network_spins(net: *const SpinnetNetwork, out: *mut usize) -> SpinnetStatus {
    guard(|| {
        let net = handle(net)?;
        if out.is_null() {
            return Err(Fail(SpinnetStatus::NullPointer, "`out` is null".into()));
        }
        *out = net.n;
        Ok(())
    })
}

/// Network serialized back to JSON. Free the result with
/// [`spinnet_string_free`].
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spinnet_network_to_json(net: *const SpinnetNetwork, out: *mut *mut c_char) -> SpinnetStatus {
    guard(|| {
        let net = handle(net)?;
        if out.is_null() {
            return Err(Fail(SpinnetStatus::NullPointer, "`out` is null".into()));
        }
        *out = hand_out(net.to_json());
        Ok(())
    })
}

/// Optimal single-excitation fidelity for a target given as `len` complex
/// amplitudes split into `re` and `im` (`im` may be NULL). `len` must equal
/// the spin count.
///
/// # Safety
/// `re` (and `im` when non-NULL) must point at `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spinnet_max_fidelity(
    net: *const SpinnetNetwork,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut f64,
) -> SpinnetStatus {
    guard(|| {
        let net = handle(net)?;
        if re.is_null() || out.is_null() {
            return Err(Fail(SpinnetStatus::NullPointer, "`re` or `out` is null".into()));
        }
        if len != net.n {
            return Err(Fail(SpinnetStatus::InvalidInput, format!("target has {len} amplitudes, network has {} spins", net.n)));
        }
        let re = std::slice::from_raw_parts(re, len);
        let im = if im.is_null() { vec![0.0; len] } else { std::slice::from_raw_parts(im, len).to_vec() };
        let target = CVec::from_iterator(len, re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)));
        *out = max_fidelity(net, &target)?.value;
        Ok(())
    })
}

/// Eigenvalues and overlaps with |2> on the accessible subspace. Writes at
/// most `cap` entries to each buffer and the true count to `len`; returns
/// `BufferTooSmall` when `cap` is short.
///
/// # Safety
/// `eigenvalues` and `overlaps` must hold `cap` doubles; `len` writable.
#[no_mangle]
pub unsafe extern "C" fn spinnet_spectrum(
    net: *const SpinnetNetwork,
    eigenvalues: *mut f64,
    overlaps: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SpinnetStatus {
    guard(|| {
        let net = handle(net)?;
        if len.is_null() || (cap > 0 && (eigenvalues.is_null() || overlaps.is_null())) {
            return Err(Fail(SpinnetStatus::NullPointer, "output buffer is null".into()));
        }
        let spec = spectral(net)?;
        let idx: Vec<usize> = spec.accessible().collect();
        *len = idx.len();
        if cap < idx.len() {
            return Err(Fail(SpinnetStatus::BufferTooSmall, format!("need {} entries, got {cap}", idx.len())));
        }
        for (slot, &k) in idx.iter().enumerate() {
            *eigenvalues.add(slot) = spec.eigenvalues[k];
            *overlaps.add(slot) = spec.overlaps[k];
        }
        Ok(())
    })
}

/// Run a CLI command. `args_json` is a JSON array of strings without the
/// program name, e.g. `["bound","--net","fig2","--target","3"]`. The
/// rendered report goes to `report` (free with [`spinnet_string_free`]) and
/// the CLI exit code to `exit_code`. An infeasible plan still yields a
/// report and returns `Infeasible`.
///
/// # Safety
/// `args_json` must be NUL-terminated; `report` and `exit_code` writable.
#[no_mangle]
pub unsafe extern "C" fn spinnet_command(
    args_json: *const c_char,
    report: *mut *mut c_char,
    exit_code: *mut c_int,
) -> SpinnetStatus {
    guard(|| {
        if report.is_null() || exit_code.is_null() {
            return Err(Fail(SpinnetStatus::NullPointer, "`report` or `exit_code` is null".into()));
        }
        *report = ptr::null_mut();
        let args: Vec<String> = serde_json::from_str(text(args_json, "args_json")?)
            .map_err(|e| Fail(SpinnetStatus::InvalidInput, format!("`args_json` must be an array of strings: {e}")))?;
        let ex = spinnet::cli::execute(std::iter::once("spinnet".to_string()).chain(args));
        *exit_code = ex.code;
        if let Some(r) = ex.report {
            *report = hand_out(r);
        }
        match ex.code {
            spinnet::cli::EXIT_OK => Ok(()),
            spinnet::cli::EXIT_INFEASIBLE => Err(Fail(SpinnetStatus::Infeasible, "no feasible plan".into())),
            _ => Err(Fail(SpinnetStatus::InvalidInput, ex.message.unwrap_or_default())),
        }
    })
}
