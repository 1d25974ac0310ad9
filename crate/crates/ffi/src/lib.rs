//! C ABI over `gsm-core`.
//!
//! Every fallible function returns a [`GsmStatus`]; on failure the message is
//! available from [`gsm_last_error`] on the same thread. Strings returned
//! through `char **` out-parameters are owned by the caller and must be
//! released with [`gsm_string_free`]. Tables are opaque handles released with
//! [`gsm_table_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gsm_core::derivpoly::{derivative_poly, eval_log_magnitude, kj, EvalPoint, LambdaSign};
use gsm_core::numeric::{format_float, parse_rational};
use gsm_core::wedge::{classify, Space, Verdict, WedgeQuery};
use gsm_core::{certify, CoeffTable, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegreeTooSmall = 3,
    OutOfRange = 4,
    Precision = 5,
    Hypothesis = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsmVerdict {
    Continuous = 0,
    NotContinuous = 1,
    TrivialSpace = 2,
    Unknown = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsmSpace {
    Roumieu = 0,
    Beurling = 1,
}

/// Opaque coefficient table.
pub struct GsmCoeffTable {
    inner: CoeffTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GsmStatus {
    match e {
        Error::DegreeTooSmall(_) => GsmStatus::DegreeTooSmall,
        Error::OrderOutOfRange { .. } | Error::IndexOutOfRange { .. } => GsmStatus::OutOfRange,
        Error::PrecisionTooLow { .. } | Error::InsufficientPrecision { .. } => GsmStatus::Precision,
        Error::Hypothesis(_) => GsmStatus::Hypothesis,
        Error::InvalidArgument(_) | Error::TooFewRecords { .. } | Error::Unsupported(_) => GsmStatus::InvalidArgument,
        _ => GsmStatus::Internal,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard<F>(f: F) -> GsmStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsmStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GsmStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            GsmStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Core(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn table_ref<'a>(t: *const GsmCoeffTable) -> Result<&'a CoeffTable, Failure> {
    t.as_ref().map(|t| &t.inner).ok_or(Failure::Null("table"))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure::Core(Error::InvalidArgument("string contains NUL".into())))?;
    write_out(out, c.into_raw(), "out")
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn gsm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gsm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the table `C[k][n]` for `0 <= k <= k_max`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsm_table_build(m: u32, k_max: u32, out: *mut *mut GsmCoeffTable) -> GsmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let inner = CoeffTable::build(m, k_max)?;
        write_out(out, Box::into_raw(Box::new(GsmCoeffTable { inner })), "out")
    })
}

/// Releases a table. NULL is ignored.
///
/// # Safety
/// `t` must come from [`gsm_table_build`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gsm_table_free(t: *mut GsmCoeffTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gsm_table_m(t: *const GsmCoeffTable, out: *mut u32) -> GsmStatus {
    guard(|| write_out(out, table_ref(t)?.m(), "out"))
}

/// # Safety
/// `t` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gsm_table_k_max(t: *const GsmCoeffTable, out: *mut u32) -> GsmStatus {
    guard(|| write_out(out, table_ref(t)?.k_max(), "out"))
}

/// Number of entries in row `k`.
///
/// # Safety
/// `t` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gsm_table_row_len(t: *const GsmCoeffTable, k: u32, out: *mut usize) -> GsmStatus {
    guard(|| {
        let table = table_ref(t)?;
        let row = table.row(k).ok_or(Error::OrderOutOfRange { k, k_max: table.k_max() })?;
        write_out(out, row.len(), "out")
    })
}

/// `C[k][n]` as a decimal string.
///
/// # Safety
/// `t` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gsm_table_coeff(t: *const GsmCoeffTable, k: u32, n: usize, out: *mut *mut c_char) -> GsmStatus {
    guard(|| {
        let table = table_ref(t)?;
        let row = table.row(k).ok_or(Error::OrderOutOfRange { k, k_max: table.k_max() })?;
        let c = row.get(n).ok_or(Error::IndexOutOfRange { k, n, max: row.len() - 1 })?;
        write_string(out, c.to_string())
    })
}

/// The table as JSON: `{"m": .., "k_max": .., "rows": [...]}` with one array
/// of decimal strings per `k = 1..=k_max`.
///
/// # Safety
/// `t` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gsm_table_to_json(t: *const GsmCoeffTable, out: *mut *mut c_char) -> GsmStatus {
    guard(|| {
        let table = table_ref(t)?;
        let s = serde_json::to_string(&table.to_json()).map_err(Error::from)?;
        write_string(out, s)
    })
}

/// Compares the table with the independent oracles. `certified` is set to 1
/// when no cell disagrees.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gsm_table_certify(t: *const GsmCoeffTable, certified: *mut c_int, discrepancies: *mut u64) -> GsmStatus {
    guard(|| {
        let report = certify(table_ref(t)?);
        write_out(certified, c_int::from(report.certified()), "certified")?;
        write_out(discrepancies, report.discrepancies.len() as u64, "discrepancies")
    })
}

/// `ln|p_{±im,k}(x)|` as a decimal string. `sign` is `+1` or `-1`; `x` is a
/// nonnegative rational such as `"3"`, `"5/2"` or `"0.75"`, evaluated exactly.
///
/// # Safety
/// `t`, `x` and `out` must be valid pointers; `x` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gsm_log_magnitude(
    t: *const GsmCoeffTable,
    k: u32,
    sign: c_int,
    x: *const c_char,
    precision_bits: u32,
    out: *mut *mut c_char,
) -> GsmStatus {
    guard(|| {
        let table = table_ref(t)?;
        let sign = match sign {
            1 => LambdaSign::Plus,
            -1 => LambdaSign::Minus,
            _ => return Err(Error::InvalidArgument(format!("sign must be +1 or -1, got {sign}")).into()),
        };
        let x = parse_rational(read_str(x, "x")?)?;
        let point = if *x.denom() == 1 { EvalPoint::Integer(x.numer().clone()) } else { EvalPoint::Rational(x) };
        let poly = derivative_poly(table, k)?;
        let lm = eval_log_magnitude(&poly, sign, &point, precision_bits)?;
        write_string(out, format_float(&lm.log_mag, 40))
    })
}

/// `k_j`: the smallest integer in `[4jm/(m-1), (4j+1)m/(m-1)]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsm_kj(m: u32, j: u32, out: *mut u32) -> GsmStatus {
    guard(|| {
        if m < 2 {
            return Err(Error::DegreeTooSmall(m).into());
        }
        if j == 0 {
            return Err(Error::InvalidArgument("j must be at least 1".into()).into());
        }
        write_out(out, kj(m, j), "out")
    })
}

/// Classifies the multiplier (or, with `propagator != 0`, the propagator) at
/// rational `theta` and `s`. `space` is a [`GsmSpace`] value;
/// `boundary_excluded` may be NULL.
///
/// # Safety
/// String arguments must be NUL-terminated; `verdict` must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gsm_wedge_classify(
    theta: *const c_char,
    s: *const c_char,
    m: u32,
    space: c_int,
    d: u32,
    monomial: c_int,
    propagator: c_int,
    t_nonzero: c_int,
    verdict: *mut GsmVerdict,
    boundary_excluded: *mut c_int,
) -> GsmStatus {
    guard(|| {
        let space = match space {
            x if x == GsmSpace::Roumieu as c_int => Space::Roumieu,
            x if x == GsmSpace::Beurling as c_int => Space::Beurling,
            other => return Err(Error::InvalidArgument(format!("space code {other}")).into()),
        };
        let mut q = WedgeQuery::parse(read_str(theta, "theta")?, read_str(s, "s")?, m, space)?.dimension(d)?;
        if monomial != 0 {
            q = q.monomial();
        }
        if propagator != 0 {
            q = q.propagator(t_nonzero != 0);
        }
        let v = classify(&q);
        let code = match v.verdict {
            Verdict::Continuous => GsmVerdict::Continuous,
            Verdict::NotContinuous => GsmVerdict::NotContinuous,
            Verdict::TrivialSpace => GsmVerdict::TrivialSpace,
            Verdict::Unknown => GsmVerdict::Unknown,
        };
        write_out(verdict, code, "verdict")?;
        if !boundary_excluded.is_null() {
            boundary_excluded.write(c_int::from(v.boundary_excluded));
        }
        Ok(())
    })
}
