//! C ABI over `jlolab`.
//!
//! Objects cross the boundary as opaque heap handles created by a
//! `*_from_json` or producing call and released by the matching `*_free`.
//! Every fallible function returns a [`JlolabStatus`]; on failure the message
//! is available from [`jlolab_last_error`] on the same thread. Panics never
//! unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jlolab::jlo::{self, PAIRING_INTEGER_TOL};
use jlolab::{Chain, Error, Idempotent, SpectralTripleFD};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JlolabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidInput = 4,
    DimensionMismatch = 5,
    NotConverged = 6,
    NonIntegerIndex = 7,
    SpectralGap = 8,
    DegreeTooLarge = 9,
    Panic = 10,
}

/// A complex number as two doubles.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JlolabComplex {
    pub re: f64,
    pub im: f64,
}

/// Opaque finite-dimensional spectral triple.
pub struct JlolabTriple(SpectralTripleFD);

/// Opaque idempotent over an ampliated algebra.
pub struct JlolabIdempotent(Idempotent);

/// Opaque finite chain.
pub struct JlolabChain(Chain);

/// Result of [`jlolab_index_pairing`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JlolabPairing {
    pub value: JlolabComplex,
    /// Fredholm index of the compressed operator.
    pub fredholm_index: i64,
    /// Highest degree kept in the series.
    pub truncation_degree: usize,
    /// 1 if the pairing lies within 0.01 of `fredholm_index`.
    pub agrees: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(JlolabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch(_) => JlolabStatus::DimensionMismatch,
            Error::NonConvergent { .. } => JlolabStatus::NotConverged,
            Error::NonIntegerIndex { .. } => JlolabStatus::NonIntegerIndex,
            Error::SpectralGap { .. } => JlolabStatus::SpectralGap,
            Error::DegreeTooLarge { .. } | Error::TooManyTerms { .. } => JlolabStatus::DegreeTooLarge,
            Error::Json(_) => JlolabStatus::Parse,
            _ => JlolabStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(JlolabStatus::Parse, e.to_string())
    }
}

/// Runs `f`, recording any failure or panic.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> JlolabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JlolabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            JlolabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(JlolabStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or valid for reads as `T`.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

/// # Safety
/// `p` is null or valid for writes as `T`.
unsafe fn store<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { p.write(value) };
    Ok(())
}

/// # Safety
/// `s` is null or a nul-terminated string.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null("json"));
    }
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|e| Failure(JlolabStatus::InvalidUtf8, e.to_string()))
}

fn complex(z: num_complex::Complex64) -> JlolabComplex {
    JlolabComplex { re: z.re, im: z.im }
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into this library on the same thread.
#[no_mangle]
pub extern "C" fn jlolab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn jlolab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` is null or was returned by a `*_to_json` call and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jlolab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses and validates a triple `{"dim_even", "dim_odd", "D", "generators"}`.
///
/// # Safety
/// `json` is a nul-terminated string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_triple_from_json(json: *const c_char, out: *mut *mut JlolabTriple) -> JlolabStatus {
    guard(|| {
        let triple: SpectralTripleFD = serde_json::from_str(unsafe { read_str(json) }?)?;
        unsafe { store(out, Box::into_raw(Box::new(JlolabTriple(triple))), "out") }
    })
}

/// Serializes a triple; release the string with [`jlolab_string_free`].
///
/// # Safety
/// `triple` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_triple_to_json(triple: *const JlolabTriple, out: *mut *mut c_char) -> JlolabStatus {
    guard(|| {
        let t = unsafe { borrow(triple, "triple") }?;
        let text = CString::new(serde_json::to_string(&t.0)?).expect("JSON has no nul");
        unsafe { store(out, text.into_raw(), "out") }
    })
}

/// # Safety
/// `triple` is null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jlolab_triple_free(triple: *mut JlolabTriple) {
    if !triple.is_null() {
        drop(unsafe { Box::from_raw(triple) });
    }
}

/// Even and odd dimensions of the Hilbert space.
///
/// # Safety
/// `triple` is a live handle; the outputs are valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_triple_dims(
    triple: *const JlolabTriple,
    dim_even: *mut usize,
    dim_odd: *mut usize,
) -> JlolabStatus {
    guard(|| {
        let space = *unsafe { borrow(triple, "triple") }?.0.space();
        unsafe { store(dim_even, space.dim_even, "dim_even") }?;
        unsafe { store(dim_odd, space.dim_odd, "dim_odd") }
    })
}

/// The graded product `a × b` as a new handle.
///
/// # Safety
/// `a` and `b` are live handles; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_triple_product(
    a: *const JlolabTriple,
    b: *const JlolabTriple,
    out: *mut *mut JlolabTriple,
) -> JlolabStatus {
    guard(|| {
        let (a, b) = (unsafe { borrow(a, "a") }?, unsafe { borrow(b, "b") }?);
        unsafe { store(out, Box::into_raw(Box::new(JlolabTriple(a.0.product(&b.0)))), "out") }
    })
}

/// Fredholm index `dim ker D⁺ − dim ker D⁻`.
///
/// # Safety
/// `triple` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_triple_index(triple: *const JlolabTriple, out: *mut i64) -> JlolabStatus {
    guard(|| {
        let index = unsafe { borrow(triple, "triple") }?.0.index()?;
        unsafe { store(out, index, "out") }
    })
}

/// Parses a chain `{"algebra_dim", "terms": [{"coeff", "factors"}]}`.
///
/// # Safety
/// `json` is a nul-terminated string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_chain_from_json(json: *const c_char, out: *mut *mut JlolabChain) -> JlolabStatus {
    guard(|| {
        let chain: Chain = serde_json::from_str(unsafe { read_str(json) }?)?;
        unsafe { store(out, Box::into_raw(Box::new(JlolabChain(chain))), "out") }
    })
}

/// # Safety
/// `chain` is null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jlolab_chain_free(chain: *mut JlolabChain) {
    if !chain.is_null() {
        drop(unsafe { Box::from_raw(chain) });
    }
}

/// Parses an idempotent `{"k", "e"}`.
///
/// # Safety
/// `json` is a nul-terminated string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_idempotent_from_json(
    json: *const c_char,
    out: *mut *mut JlolabIdempotent,
) -> JlolabStatus {
    guard(|| {
        let e: Idempotent = serde_json::from_str(unsafe { read_str(json) }?)?;
        unsafe { store(out, Box::into_raw(Box::new(JlolabIdempotent(e))), "out") }
    })
}

/// # Safety
/// `e` is null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jlolab_idempotent_free(e: *mut JlolabIdempotent) {
    if !e.is_null() {
        drop(unsafe { Box::from_raw(e) });
    }
}

type Cochain = fn(&SpectralTripleFD, &Chain) -> jlolab::Result<num_complex::Complex64>;

unsafe fn evaluate(
    f: Cochain,
    triple: *const JlolabTriple,
    chain: *const JlolabChain,
    out: *mut JlolabComplex,
) -> JlolabStatus {
    guard(|| {
        let (t, c) = (unsafe { borrow(triple, "triple") }?, unsafe { borrow(chain, "chain") }?);
        let value = f(&t.0, &c.0)?;
        unsafe { store(out, complex(value), "out") }
    })
}

/// Exact JLO cochain `Ch_D(α)`.
///
/// # Safety
/// `triple` and `chain` are live handles; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_jlo_cochain(
    triple: *const JlolabTriple,
    chain: *const JlolabChain,
    out: *mut JlolabComplex,
) -> JlolabStatus {
    unsafe { evaluate(jlo::jlo_cochain, triple, chain, out) }
}

/// `BCh_D(α)`, the cochain with `a⁰` replaced by `[D, a⁰]`.
///
/// # Safety
/// `triple` and `chain` are live handles; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_bch_cochain(
    triple: *const JlolabTriple,
    chain: *const JlolabChain,
    out: *mut JlolabComplex,
) -> JlolabStatus {
    unsafe { evaluate(jlo::bch_cochain, triple, chain, out) }
}

/// `Ch^pert_D(α) = Ch_D(α) + BCh_D(α)/√2`.
///
/// # Safety
/// `triple` and `chain` are live handles; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_perturbed_cochain(
    triple: *const JlolabTriple,
    chain: *const JlolabChain,
    out: *mut JlolabComplex,
) -> JlolabStatus {
    unsafe { evaluate(jlo::perturbed_cochain, triple, chain, out) }
}

/// Pairing of the cochain with the Chern character of `e`, and the Fredholm
/// index of `e` compressed onto the triple.
///
/// # Safety
/// `triple` and `e` are live handles; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn jlolab_index_pairing(
    triple: *const JlolabTriple,
    e: *const JlolabIdempotent,
    out: *mut JlolabPairing,
) -> JlolabStatus {
    guard(|| {
        let (t, e) = (unsafe { borrow(triple, "triple") }?, unsafe {
            borrow(e, "idempotent")
        }?);
        let report = jlo::index_pairing(&t.0, &e.0, PAIRING_INTEGER_TOL)?;
        let fredholm = t.0.compress_by_idempotent(&e.0)?.0.index()?;
        let gap = (report.value - num_complex::Complex64::new(fredholm as f64, 0.0)).norm();
        let pairing = JlolabPairing {
            value: complex(report.value),
            fredholm_index: fredholm,
            truncation_degree: report.truncation_degree,
            agrees: i32::from(gap < PAIRING_INTEGER_TOL),
        };
        unsafe { store(out, pairing, "out") }
    })
}
