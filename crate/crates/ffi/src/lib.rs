//! C ABI over the `infolock` kernels.
//!
//! Every function returns an [`IlStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read back with
//! [`il_last_error_message`]. Schemes are opaque handles released with
//! [`il_scheme_free`].

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use infolock::experiments::MAX_TOTAL_DIM;
use infolock::locking::{
    distinguishability, expectation_bound, key_threshold, optimize_distinguishability, uniform,
    LockingScheme, Strategy, ThresholdInput, ThresholdKind,
};
use infolock::measure::MeasurementSuperoperator;
use infolock::qcore::{CMatrix, C64};
use infolock::{Error, RngSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DimensionMismatch = 3,
    InvalidState = 4,
    BudgetExceeded = 5,
    SideCondition = 6,
    Numerical = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlThresholdKind {
    ThmLocking = 0,
    CorUnihigh = 1,
    CorModmod = 2,
    CorUnihighPovm = 3,
    CorModmodPovm = 4,
    ThmDecode = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlStrategy {
    ProjectiveGradient = 0,
    QuasiRandom = 1,
}

/// Qubit counts and entropies in bits.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlThresholdInput {
    pub n: f64,
    pub c: f64,
    pub k: f64,
    pub e: f64,
    pub eps: f64,
    pub p_fail: f64,
    pub hmin_m: f64,
    pub h2_m: f64,
    pub hmax_m: f64,
    pub hmin_e: f64,
    pub h2_e: f64,
}

/// Opaque locking scheme.
pub struct IlScheme(LockingScheme);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> IlStatus {
    match e {
        Error::InvalidParameter(_) => IlStatus::InvalidParameter,
        Error::DimensionMismatch(_)
        | Error::LayoutMismatch(_)
        | Error::UnknownLabel(_)
        | Error::DuplicateLabel(_)
        | Error::EmptySelection
        | Error::InvalidPartition(_) => IlStatus::DimensionMismatch,
        Error::InvalidState(_)
        | Error::NotUnitary(_)
        | Error::IncompleteMeasurement(_)
        | Error::NotClassical(_) => IlStatus::InvalidState,
        Error::BudgetExceeded { .. } => IlStatus::BudgetExceeded,
        Error::SideCondition(_) => IlStatus::SideCondition,
        Error::NonFinite | Error::IllConditioned(_) => IlStatus::Numerical,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IlStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            IlStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            IlStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn input<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn array<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

impl From<IlThresholdInput> for ThresholdInput {
    fn from(t: IlThresholdInput) -> Self {
        ThresholdInput {
            n: t.n,
            c: t.c,
            k: t.k,
            e: t.e,
            eps: t.eps,
            p_fail: t.p_fail,
            hmin_m: t.hmin_m,
            h2_m: t.h2_m,
            hmax_m: t.hmax_m,
            hmin_e: t.hmin_e,
            h2_e: t.h2_e,
        }
    }
}

impl From<ThresholdInput> for IlThresholdInput {
    fn from(t: ThresholdInput) -> Self {
        IlThresholdInput {
            n: t.n,
            c: t.c,
            k: t.k,
            e: t.e,
            eps: t.eps,
            p_fail: t.p_fail,
            hmin_m: t.hmin_m,
            h2_m: t.h2_m,
            hmax_m: t.hmax_m,
            hmin_e: t.hmin_e,
            h2_e: t.h2_e,
        }
    }
}

impl From<IlThresholdKind> for ThresholdKind {
    fn from(k: IlThresholdKind) -> Self {
        match k {
            IlThresholdKind::ThmLocking => ThresholdKind::ThmLocking,
            IlThresholdKind::CorUnihigh => ThresholdKind::CorUnihigh,
            IlThresholdKind::CorModmod => ThresholdKind::CorModmod,
            IlThresholdKind::CorUnihighPovm => ThresholdKind::CorUnihighPovm,
            IlThresholdKind::CorModmodPovm => ThresholdKind::CorModmodPovm,
            IlThresholdKind::ThmDecode => ThresholdKind::ThmDecode,
        }
    }
}

/// Copies the last error message of this thread, NUL-terminated and
/// truncated to `cap` bytes, into `buf`. Returns the full message length
/// without the terminator; `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn il_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Haar-random scheme on `C ⊗ K` with an `E`-dimensional entangled resource.
/// `p` (length `c·k`) and `schmidt` (length `e`) may be null for the
/// uniform distribution and maximal entanglement.
///
/// # Safety
/// Non-null arrays must hold the stated number of elements; `out_scheme`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn il_scheme_new_haar(
    c: usize,
    k: usize,
    e: usize,
    p: *const f64,
    schmidt: *const f64,
    seed: u64,
    out_scheme: *mut *mut IlScheme,
) -> IlStatus {
    guard(|| {
        let slot = out(out_scheme, "out_scheme")?;
        *slot = std::ptr::null_mut();
        let m = c
            .checked_mul(k)
            .ok_or(Error::InvalidParameter("c*k overflows".into()))?;
        match m.checked_mul(e) {
            Some(total) if total <= MAX_TOTAL_DIM => {}
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "C·K·E must not exceed {MAX_TOTAL_DIM}"
                ))
                .into())
            }
        }
        let p = if p.is_null() {
            uniform(m)
        } else {
            array(p, m, "p")?.to_vec()
        };
        let schmidt = if schmidt.is_null() {
            uniform(e)
        } else {
            array(schmidt, e, "schmidt")?.to_vec()
        };
        let scheme = LockingScheme::haar((c, k, e), p, &schmidt, &RngSpec::new(seed, 0))?;
        *slot = Box::into_raw(Box::new(IlScheme(scheme)));
        Ok(())
    })
}

/// # Safety
/// `scheme` must be null or a handle from [`il_scheme_new_haar`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn il_scheme_free(scheme: *mut IlScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Dimension of `C ⊗ E′`, the system a measurement acts on.
///
/// # Safety
/// `scheme` must be a live handle and `out_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn il_scheme_measured_dim(
    scheme: *const IlScheme,
    out_dim: *mut usize,
) -> IlStatus {
    guard(|| {
        let s = input(scheme, "scheme")?;
        *out(out_dim, "out_dim")? = s.0.measured_dim();
        Ok(())
    })
}

/// `g_M` for the projective measurement onto the columns of `basis`, a
/// `d×d` unitary with `d` = [`il_scheme_measured_dim`], stored column-major
/// as interleaved real and imaginary parts (`2·d·d` doubles). A null
/// `basis` selects the computational basis.
///
/// # Safety
/// `scheme` must be a live handle, `basis` null or readable, `out_value`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn il_distinguishability(
    scheme: *const IlScheme,
    basis: *const f64,
    out_value: *mut f64,
) -> IlStatus {
    guard(|| {
        let s = input(scheme, "scheme")?;
        let slot = out(out_value, "out_value")?;
        let d = s.0.measured_dim();
        let m = if basis.is_null() {
            MeasurementSuperoperator::computational(d)
        } else {
            let raw = array(basis, 2 * d * d, "basis")?;
            let w = CMatrix::from_iterator(d, d, raw.chunks_exact(2).map(|z| C64::new(z[0], z[1])));
            MeasurementSuperoperator::from_basis(&w)?
        };
        *slot = distinguishability(&s.0, &m)?;
        Ok(())
    })
}

/// Optimized lower bound on the largest `g_M` over measurements.
///
/// # Safety
/// `scheme` must be a live handle and `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn il_optimize(
    scheme: *const IlScheme,
    strategy: IlStrategy,
    restarts: usize,
    seed: u64,
    out_value: *mut f64,
) -> IlStatus {
    guard(|| {
        let s = input(scheme, "scheme")?;
        let slot = out(out_value, "out_value")?;
        let strategy = match strategy {
            IlStrategy::ProjectiveGradient => Strategy::ProjectiveGradient,
            IlStrategy::QuasiRandom => Strategy::QuasiRandom,
        };
        *slot = optimize_distinguishability(&s.0, strategy, restarts, &RngSpec::new(seed, 0))?
            .best_value;
        Ok(())
    })
}

/// Bound on the Haar average of `g_M` for a fixed measurement.
///
/// # Safety
/// `scheme` must be a live handle and `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn il_expectation_bound(
    scheme: *const IlScheme,
    out_value: *mut f64,
) -> IlStatus {
    guard(|| {
        let s = input(scheme, "scheme")?;
        *out(out_value, "out_value")? = expectation_bound(&s.0);
        Ok(())
    })
}

/// Fills `out_input` for a uniform `(c + k)`-bit message and maximal
/// entanglement on `e` qubits.
///
/// # Safety
/// `out_input` must be writable.
#[no_mangle]
pub unsafe extern "C" fn il_threshold_input_uniform(
    c: f64,
    k: f64,
    e: f64,
    eps: f64,
    p_fail: f64,
    out_input: *mut IlThresholdInput,
) -> IlStatus {
    guard(|| {
        *out(out_input, "out_input")? = ThresholdInput::uniform(c, k, e, eps, p_fail).into();
        Ok(())
    })
}

/// Key-size threshold in bits and the rounded qubit count.
///
/// # Safety
/// `t` must be readable; `out_value` and `out_qubits` writable.
#[no_mangle]
pub unsafe extern "C" fn il_key_threshold(
    t: *const IlThresholdInput,
    kind: IlThresholdKind,
    out_value: *mut f64,
    out_qubits: *mut f64,
) -> IlStatus {
    guard(|| {
        let t = *input(t, "t")?;
        let value_slot = out(out_value, "out_value")?;
        let qubit_slot = out(out_qubits, "out_qubits")?;
        let v = key_threshold(&t.into(), kind.into())?;
        *value_slot = v.value;
        *qubit_slot = v.qubits;
        Ok(())
    })
}

/// Largest key size, in bits, for which decoding succeeds.
///
/// # Safety
/// `t` must be readable and `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn il_decode_threshold(
    t: *const IlThresholdInput,
    out_value: *mut f64,
) -> IlStatus {
    guard(|| {
        let t = *input(t, "t")?;
        *out(out_value, "out_value")? = infolock::decode::decode_threshold(&t.into())?;
        Ok(())
    })
}

/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn il_alicki_fannes_bound(
    eps: f64,
    m: usize,
    out_value: *mut f64,
) -> IlStatus {
    guard(|| {
        *out(out_value, "out_value")? = infolock::entropy::alicki_fannes_bound(eps, m)?;
        Ok(())
    })
}

/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn il_chernoff_bound(
    d: usize,
    s: usize,
    eta: f64,
    out_value: *mut f64,
) -> IlStatus {
    guard(|| {
        *out(out_value, "out_value")? = infolock::measure::chernoff_bound(d, s, eta)?;
        Ok(())
    })
}

/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn il_levy_bound(
    theta: f64,
    d: usize,
    eps: f64,
    out_value: *mut f64,
) -> IlStatus {
    guard(|| {
        *out(out_value, "out_value")? = infolock::haar::levy_bound(theta, d, eps)?;
        Ok(())
    })
}

/// Trace distance and accessible information guarantees of the locked key
/// protocol.
///
/// # Safety
/// `out_trace` and `out_iacc` must be writable.
#[no_mangle]
pub unsafe extern "C" fn il_qkd_security_bounds(
    eps: f64,
    n: usize,
    out_trace: *mut f64,
    out_iacc: *mut f64,
) -> IlStatus {
    guard(|| {
        let t_slot = out(out_trace, "out_trace")?;
        let i_slot = out(out_iacc, "out_iacc")?;
        let (t, i) = infolock::qkd::qkd_security_bounds(eps, n)?;
        *t_slot = t;
        *i_slot = i;
        Ok(())
    })
}
