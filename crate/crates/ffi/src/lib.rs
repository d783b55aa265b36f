//! C ABI over `duplex-dof`.
//!
//! Every fallible function returns a [`DdStatus`] and writes its result
//! through an out-pointer. On failure, `dd_last_error_message` describes the
//! most recent error on the calling thread. Regions are opaque handles owned
//! by the caller and released with `dd_region_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use duplex_dof::dof;
use duplex_dof::mimo::{ergodic_rate, McConfig};
use duplex_dof::model::{residual_si_power, DuplexMode, SiParams};
use duplex_dof::region::{DofPoint, DofRegion};
use duplex_dof::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Precondition = 4,
    EmptyDomain = 5,
    NumericalFailure = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdMode {
    HalfDuplex = 0,
    AntennaConserved = 1,
    RfChainConserved = 2,
}

impl From<DdMode> for DuplexMode {
    fn from(m: DdMode) -> Self {
        match m {
            DdMode::HalfDuplex => DuplexMode::HalfDuplex,
            DdMode::AntennaConserved => DuplexMode::AntennaConservedFD,
            DdMode::RfChainConserved => DuplexMode::RfChainConservedFD,
        }
    }
}

/// Residual self-interference parameters: `I = P^(1 - lambda) / (beta mu^lambda)`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DdSiParams {
    pub lambda: f64,
    pub beta: f64,
    pub mu: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdPoint {
    pub d_ab: f64,
    pub d_ba: f64,
}

/// Relay DoF with its operating point. Fields that do not apply are NaN
/// (`tau`, `gamma`) or 0 (`rx`, `tx`).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdRelayDof {
    pub dof: f64,
    pub tau: f64,
    pub gamma: f64,
    pub rx: usize,
    pub tx: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdRate {
    pub mean_rate: f64,
    pub std_err: f64,
    pub n_samples: u64,
}

/// Opaque DoF region.
pub struct DdRegion(DofRegion);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter { .. } => DdStatus::InvalidArgument,
            Error::FdSplitOutOfRange { .. } => DdStatus::OutOfRange,
            Error::Precondition(_) => DdStatus::Precondition,
            Error::EmptyDomain(_) => DdStatus::EmptyDomain,
            Error::NumericalFailure(_) | Error::FitUnstable { .. } => DdStatus::NumericalFailure,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(DdStatus::NullPointer, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DdStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for reads.
unsafe fn read<T: Copy>(p: *const T, name: &str) -> Result<T, Failure> {
    unsafe { p.as_ref() }.copied().ok_or_else(|| null(name))
}

/// # Safety
/// `p` must be null or valid for writes.
unsafe fn write<T>(p: *mut T, v: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    unsafe { p.write(v) };
    Ok(())
}

fn si_params(p: DdSiParams) -> Result<SiParams, Failure> {
    Ok(SiParams::new(p.lambda, p.beta, p.mu)?)
}

fn relay(dof: f64, tau: f64, gamma: f64, rx: Option<usize>, tx: Option<usize>) -> DdRelayDof {
    DdRelayDof { dof, tau, gamma, rx: rx.unwrap_or(0), tx: tx.unwrap_or(0) }
}

fn region_out(out: *mut *mut DdRegion, r: DofRegion) -> Result<(), Failure> {
    let handle = Box::into_raw(Box::new(DdRegion(r)));
    // SAFETY: caller guarantees `out` is null or writable
    unsafe { write(out, handle, "out") }.inspect_err(|_| drop(unsafe { Box::from_raw(handle) }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `si` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dd_residual_si_power(p_tx: f64, si: *const DdSiParams, out: *mut f64) -> DdStatus {
    guard(|| {
        let si = si_params(unsafe { read(si, "si") }?)?;
        if !(p_tx.is_finite() && p_tx >= 0.0) {
            return Err(Failure(DdStatus::InvalidArgument, format!("p_tx {p_tx} must be finite and >= 0")));
        }
        unsafe { write(out, residual_si_power(p_tx, &si), "out") }
    })
}

/// HD decode-and-forward relaying DoF.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_twohop_hd_dof(n_a: usize, n_r: usize, n_b: usize, out: *mut DdRelayDof) -> DdStatus {
    guard(|| {
        let d = dof::twohop_hd_dof(n_a, n_r, n_b)?;
        unsafe { write(out, relay(d.dof, d.tau_opt, 1.0, None, None), "out") }
    })
}

/// FD decode-and-forward relaying DoF for an FD `mode`.
///
/// # Safety
/// `si` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dd_twohop_fd_dof(
    n_a: usize,
    n_r: usize,
    n_b: usize,
    mode: DdMode,
    si: *const DdSiParams,
    out: *mut DdRelayDof,
) -> DdStatus {
    guard(|| {
        let si = si_params(unsafe { read(si, "si") }?)?;
        let d = dof::twohop_fd_dof(n_a, n_r, n_b, mode.into(), &si)?;
        let gamma = d.gamma_opt.unwrap_or(f64::NAN);
        unsafe { write(out, relay(d.dof, f64::NAN, gamma, d.r_opt, d.t_opt), "out") }
    })
}

/// Monte-Carlo ergodic rate of an `n_rx x n_tx` Rayleigh link at per-antenna
/// SINR `gamma_sinr`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_ergodic_rate(
    n_rx: usize,
    n_tx: usize,
    gamma_sinr: f64,
    n_samples: u64,
    seed: u64,
    out: *mut DdRate,
) -> DdStatus {
    guard(|| {
        let cfg = McConfig::new(n_samples, seed, McConfig::DEFAULT_CHUNK)?;
        let r = ergodic_rate(n_rx, n_tx, gamma_sinr, &cfg)?;
        unsafe { write(out, DdRate { mean_rate: r.mean_rate, std_err: r.std_err, n_samples: r.n_samples }, "out") }
    })
}

/// Two-way DoF region for any mode (`si` is ignored for half duplex and may
/// be null then).
///
/// # Safety
/// `si` must be null or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dd_twoway_region(
    n_a: usize,
    n_b: usize,
    mode: DdMode,
    si: *const DdSiParams,
    out: *mut *mut DdRegion,
) -> DdStatus {
    guard(|| {
        let region = match mode {
            DdMode::HalfDuplex => dof::twoway_hd_region(n_a, n_b)?,
            fd => {
                let si = si_params(unsafe { read(si, "si") }?)?;
                dof::twoway_fd_region(n_a, n_b, fd.into(), &si)?
            }
        };
        region_out(out, region)
    })
}

/// Two-way relaying region with an FD relay (time sharing of both
/// directions).
///
/// # Safety
/// `si` must be readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dd_twr_fd_region(
    n_a: usize,
    n_r: usize,
    n_b: usize,
    mode: DdMode,
    si: *const DdSiParams,
    out: *mut *mut DdRegion,
) -> DdStatus {
    guard(|| {
        let si = si_params(unsafe { read(si, "si") }?)?;
        region_out(out, dof::twr_fd_region(n_a, n_r, n_b, mode.into(), &si)?)
    })
}

/// HD two-way relaying MAC-BC region for symmetric end nodes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dd_twr_hd_region(n: usize, n_r: usize, out: *mut *mut DdRegion) -> DdStatus {
    guard(|| region_out(out, dof::twr_hd_regions(n, n_r)?.1))
}

/// Number of vertices, 0 for a null handle.
///
/// # Safety
/// `region` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_region_vertex_count(region: *const DdRegion) -> usize {
    unsafe { region.as_ref() }.map_or(0, |r| r.0.vertices().len())
}

/// Vertex `index` in counter-clockwise order starting at the origin.
///
/// # Safety
/// `region` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dd_region_vertex(region: *const DdRegion, index: usize, out: *mut DdPoint) -> DdStatus {
    guard(|| {
        let r = unsafe { region.as_ref() }.ok_or_else(|| null("region"))?;
        let v =
            r.0.vertices()
                .get(index)
                .ok_or_else(|| Failure(DdStatus::OutOfRange, format!("vertex {index} of {}", r.0.vertices().len())))?;
        unsafe { write(out, DdPoint { d_ab: v.d_ab, d_ba: v.d_ba }, "out") }
    })
}

/// # Safety
/// `region` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dd_region_contains(region: *const DdRegion, p: DdPoint, tol: f64, out: *mut bool) -> DdStatus {
    guard(|| {
        let r = unsafe { region.as_ref() }.ok_or_else(|| null("region"))?;
        let p = DofPoint::new(p.d_ab, p.d_ba)?;
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(Failure(DdStatus::InvalidArgument, format!("tol {tol} must be finite and >= 0")));
        }
        unsafe { write(out, r.0.contains(p, tol), "out") }
    })
}

/// Largest `d_ab + d_ba` in the region.
///
/// # Safety
/// `region` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dd_region_max_sum(region: *const DdRegion, out: *mut f64) -> DdStatus {
    guard(|| {
        let r = unsafe { region.as_ref() }.ok_or_else(|| null("region"))?;
        unsafe { write(out, r.0.max_sum(), "out") }
    })
}

/// Largest `d` with `(d, d)` in the region.
///
/// # Safety
/// `region` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dd_region_max_symmetric(region: *const DdRegion, out: *mut f64) -> DdStatus {
    guard(|| {
        let r = unsafe { region.as_ref() }.ok_or_else(|| null("region"))?;
        unsafe { write(out, r.0.max_symmetric(), "out") }
    })
}

/// Release a region; null is accepted.
///
/// # Safety
/// `region` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dd_region_free(region: *mut DdRegion) {
    if !region.is_null() {
        drop(unsafe { Box::from_raw(region) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn si(lambda: f64) -> DdSiParams {
        DdSiParams { lambda, beta: 1.0, mu: 1.0 }
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(dd_last_error_message()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn relay_dof_through_abi() {
        let mut d = DdRelayDof::default();
        assert_eq!(unsafe { dd_twohop_fd_dof(4, 8, 4, DdMode::AntennaConserved, &si(0.5), &mut d) }, DdStatus::Ok);
        assert!((d.dof - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!((d.rx, d.tx), (4, 4));
        assert_eq!(unsafe { dd_twohop_hd_dof(4, 8, 4, &mut d) }, DdStatus::Ok);
        assert_eq!((d.dof, d.tau, d.gamma), (2.0, 0.5, 1.0));
    }

    #[test]
    fn errors_set_status_and_message() {
        let mut d = DdRelayDof::default();
        let s = unsafe { dd_twohop_fd_dof(4, 8, 4, DdMode::HalfDuplex, &si(0.5), &mut d) };
        assert_eq!(s, DdStatus::Precondition);
        assert!(!last_error().is_empty());
        assert_eq!(
            unsafe { dd_twohop_fd_dof(4, 8, 4, DdMode::AntennaConserved, &si(2.0), &mut d) },
            DdStatus::InvalidArgument
        );
        assert!(last_error().contains("lambda"));
        assert_eq!(unsafe { dd_twohop_hd_dof(4, 8, 4, ptr::null_mut()) }, DdStatus::NullPointer);
        assert_eq!(unsafe { dd_twohop_hd_dof(0, 8, 4, &mut d) }, DdStatus::InvalidArgument);
    }

    #[test]
    fn region_handles() {
        let mut r: *mut DdRegion = ptr::null_mut();
        assert_eq!(unsafe { dd_twr_fd_region(4, 6, 4, DdMode::AntennaConserved, &si(0.9), &mut r) }, DdStatus::Ok);
        let n = unsafe { dd_region_vertex_count(r) };
        assert_eq!(n, 3);
        let mut p = DdPoint::default();
        assert_eq!(unsafe { dd_region_vertex(r, 1, &mut p) }, DdStatus::Ok);
        assert!((p.d_ab - 3.0 / 1.1).abs() < 1e-12);
        assert_eq!(unsafe { dd_region_vertex(r, n, &mut p) }, DdStatus::OutOfRange);
        let mut inside = true;
        assert_eq!(unsafe { dd_region_contains(r, DdPoint { d_ab: 1.5, d_ba: 1.5 }, 1e-9, &mut inside) }, DdStatus::Ok);
        assert!(!inside);
        let mut v = 0.0;
        assert_eq!(unsafe { dd_region_max_symmetric(r, &mut v) }, DdStatus::Ok);
        assert!((v - 1.5 / 1.1).abs() < 1e-9);
        unsafe { dd_region_free(r) };
        unsafe { dd_region_free(ptr::null_mut()) };
        assert_eq!(unsafe { dd_region_vertex_count(ptr::null()) }, 0);
    }

    #[test]
    fn hd_region_ignores_null_si() {
        let mut r: *mut DdRegion = ptr::null_mut();
        assert_eq!(unsafe { dd_twoway_region(4, 6, DdMode::HalfDuplex, ptr::null(), &mut r) }, DdStatus::Ok);
        let mut s = 0.0;
        assert_eq!(unsafe { dd_region_max_sum(r, &mut s) }, DdStatus::Ok);
        assert_eq!(s, 4.0);
        unsafe { dd_region_free(r) };
        assert_eq!(
            unsafe { dd_twoway_region(4, 6, DdMode::RfChainConserved, ptr::null(), &mut r) },
            DdStatus::NullPointer
        );
    }

    #[test]
    fn scalar_helpers() {
        let mut v = 0.0;
        assert_eq!(unsafe { dd_residual_si_power(1e6, &si(1.0), &mut v) }, DdStatus::Ok);
        assert_eq!(v, 1.0);
        let mut rate = DdRate::default();
        assert_eq!(unsafe { dd_ergodic_rate(1, 1, 10.0, 2000, 1, &mut rate) }, DdStatus::Ok);
        assert!(rate.mean_rate > 2.0 && rate.mean_rate < 3.5 && rate.n_samples == 2000);
        let version = unsafe { std::ffi::CStr::from_ptr(dd_version()) };
        assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
