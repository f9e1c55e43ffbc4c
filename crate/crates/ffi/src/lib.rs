// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! C ABI over the tweezer-gates library.
//!
//! Objects are opaque handles created by `tg_*_new` and released by the
//! matching `tg_*_free`. Every fallible call returns a [`TgStatus`]; the
//! message of the most recent failure on the calling thread is available
//! through [`tg_last_error`]. Array getters follow the two-call pattern:
//! they always report the required length and copy only when the buffer is
//! large enough.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tweezer_gates::bands::{band_structure, BandStructure, CellConfig};
use tweezer_gates::chain::{calibrate_gamma_for_epsilon, solve_equilibrium, IonChain};
use tweezer_gates::design::{design_infinite, DesignSpec, ModeChoice};
use tweezer_gates::feasibility::{feasibility_row, species, Operating};
use tweezer_gates::phonons::{normal_modes, Direction, PhononModes, TweezerArray};
use tweezer_gates::robustness::{switching_prefactor, SwitchSpec};
use tweezer_gates::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NoConvergence = 3,
    Unstable = 4,
    NotLocalized = 5,
    Infeasible = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Gate mode selector for [`tg_design_infinite`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgMode {
    Stretch = 0,
    Com = 1,
}

/// Opaque equilibrium chain.
pub struct TgChain(IonChain);
/// Opaque set of transverse normal modes.
pub struct TgModes(PhononModes);
/// Opaque periodic band structure.
pub struct TgBands(BandStructure);

/// Constant-amplitude gate design on a periodic chain.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgDesign {
    pub mu: f64,
    pub tau: f64,
    pub amplitude: f64,
    pub delta_f: f64,
    pub delta_chi: f64,
    pub crosstalk: f64,
}

/// Tweezer budget for one species and wavelength.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgFeasibility {
    pub waist_nm: f64,
    pub power_mw: f64,
    pub delta_f_sc: f64,
    pub distance_um: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TgStatus {
    match e {
        Error::InvalidInput(_) | Error::Json(_) => TgStatus::InvalidInput,
        Error::NoConvergence { .. } => TgStatus::NoConvergence,
        Error::Unstable(_) => TgStatus::Unstable,
        Error::NotLocalized(_) => TgStatus::NotLocalized,
        Error::Infeasible(_) => TgStatus::Infeasible,
        Error::Io(_) | Error::Csv(_) => TgStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (TgStatus, String)>) -> TgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TgStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            TgStatus::Panic
        }
    }
}

fn lib<T>(r: tweezer_gates::Result<T>) -> Result<T, (TgStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (TgStatus, String) {
    (TgStatus::NullPointer, "null pointer argument".into())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len: *mut usize) -> Result<(), (TgStatus, String)> {
    if len.is_null() {
        return Err(null());
    }
    *len = src.len();
    if buf.is_null() || cap == 0 {
        return Ok(());
    }
    if cap < src.len() {
        return Err((TgStatus::BufferTooSmall, format!("buffer holds {cap} values, {} needed", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tg_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let s = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = s.len().min(cap - 1);
            ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        s.len()
    })
}

/// Equilibrium of `n_ions` ions with `gamma_z` calibrated so that the
/// register (excluding `n_buffer` ions per end) has the given `epsilon`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_chain_new(n_ions: usize, n_buffer: usize, epsilon: f64, out: *mut *mut TgChain) -> TgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let cfg = lib(calibrate_gamma_for_epsilon(n_ions, n_buffer, epsilon))?;
        let chain = lib(solve_equilibrium(&cfg))?;
        *out = Box::into_raw(Box::new(TgChain(chain)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`tg_chain_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tg_chain_free(h: *mut TgChain) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tg_chain_epsilon(h: *const TgChain, out: *mut f64) -> TgStatus {
    guard(|| {
        let (Some(c), false) = (h.as_ref(), out.is_null()) else { return Err(null()) };
        *out = c.0.epsilon;
        Ok(())
    })
}

/// Axial positions in units of `l0`.
///
/// # Safety
/// `h` must be a live handle, `len` valid, `buf` null or `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tg_chain_positions(h: *const TgChain, buf: *mut f64, cap: usize, len: *mut usize) -> TgStatus {
    guard(|| {
        let c = h.as_ref().ok_or_else(null)?;
        copy_out(&c.0.positions, buf, cap, len)
    })
}

/// Transverse (x) modes with per-ion tweezer frequencies `nu0[0..n_ions]`.
///
/// # Safety
/// `chain` must be live, `nu0` must hold `n_ions` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tg_modes_new(chain: *const TgChain, nu0: *const f64, n: usize, out: *mut *mut TgModes) -> TgStatus {
    guard(|| {
        let c = chain.as_ref().ok_or_else(null)?;
        if nu0.is_null() || out.is_null() {
            return Err(null());
        }
        let tw = TweezerArray { nu0: std::slice::from_raw_parts(nu0, n).to_vec(), misadjust: None };
        let modes = lib(normal_modes(&c.0, &tw, Direction::X))?;
        *out = Box::into_raw(Box::new(TgModes(modes)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`tg_modes_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tg_modes_free(h: *mut TgModes) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Mode frequencies `ν_n`, descending.
///
/// # Safety
/// As for [`tg_chain_positions`].
#[no_mangle]
pub unsafe extern "C" fn tg_modes_frequencies(h: *const TgModes, buf: *mut f64, cap: usize, len: *mut usize) -> TgStatus {
    guard(|| {
        let m = h.as_ref().ok_or_else(null)?;
        copy_out(&m.0.freqs, buf, cap, len)
    })
}

/// Mode vector `n` over all ions.
///
/// # Safety
/// As for [`tg_chain_positions`].
#[no_mangle]
pub unsafe extern "C" fn tg_modes_vector(h: *const TgModes, n: usize, buf: *mut f64, cap: usize, len: *mut usize) -> TgStatus {
    guard(|| {
        let m = h.as_ref().ok_or_else(null)?;
        if n >= m.0.n_modes() {
            return Err((TgStatus::InvalidInput, format!("mode index {n} out of range")));
        }
        let col: Vec<f64> = m.0.vectors.column(n).iter().copied().collect();
        copy_out(&col, buf, cap, len)
    })
}

/// Band structure of a periodic chain with cell size `p` and the first two
/// slots pinned at `nu0`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tg_bands_new(p: usize, epsilon: f64, nu0: f64, k_points: usize, out: *mut *mut TgBands) -> TgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let b = lib(band_structure(&CellConfig::new(p, epsilon, nu0), k_points))?;
        *out = Box::into_raw(Box::new(TgBands(b)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`tg_bands_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tg_bands_free(h: *mut TgBands) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Band centers, one per band.
///
/// # Safety
/// As for [`tg_chain_positions`].
#[no_mangle]
pub unsafe extern "C" fn tg_bands_centers(h: *const TgBands, buf: *mut f64, cap: usize, len: *mut usize) -> TgStatus {
    guard(|| {
        let b = h.as_ref().ok_or_else(null)?;
        let v: Vec<f64> = (0..b.0.p()).map(|n| b.0.band_center(n)).collect();
        copy_out(&v, buf, cap, len)
    })
}

/// Bandwidths (max − min over k), one per band.
///
/// # Safety
/// As for [`tg_chain_positions`].
#[no_mangle]
pub unsafe extern "C" fn tg_bands_widths(h: *const TgBands, buf: *mut f64, cap: usize, len: *mut usize) -> TgStatus {
    guard(|| {
        let b = h.as_ref().ok_or_else(null)?;
        let v: Vec<f64> = (0..b.0.p()).map(|n| b.0.bandwidth(n)).collect();
        copy_out(&v, buf, cap, len)
    })
}

/// Constant-amplitude design with default settings on the given bands.
///
/// # Safety
/// `h` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tg_design_infinite(h: *const TgBands, mode: TgMode, out: *mut TgDesign) -> TgStatus {
    guard(|| {
        let b = h.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let m = match mode {
            TgMode::Stretch => ModeChoice::Stretch,
            TgMode::Com => ModeChoice::Com,
        };
        let d = lib(design_infinite(&b.0, &DesignSpec::new(m)))?;
        *out = TgDesign {
            mu: d.mu,
            tau: d.tau,
            amplitude: d.amplitude,
            delta_f: d.report.delta_f,
            delta_chi: d.report.delta_chi,
            crosstalk: d.report.crosstalk,
        };
        Ok(())
    })
}

/// Switching prefactor `√K` for moving the pinned pair from slots (0,1) to (1,2).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tg_switching_sqrt_k(p: usize, epsilon: f64, nu0: f64, out: *mut f64) -> TgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let spec = SwitchSpec { p, epsilon, nu0, ..Default::default() };
        *out = lib(switching_prefactor(&spec))?.sqrt_k;
        Ok(())
    })
}

/// Power and scattering infidelity for a built-in species.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tg_feasibility(
    name: *const c_char,
    wavelength_nm: f64,
    nu0: f64,
    epsilon: f64,
    freq_x_hz: f64,
    na: f64,
    out: *mut TgFeasibility,
) -> TgStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return Err(null());
        }
        let name = CStr::from_ptr(name).to_str().map_err(|_| (TgStatus::InvalidInput, "species name is not UTF-8".into()))?;
        let sp = lib(species(name))?;
        let op = Operating { nu0, epsilon, freq_x_hz, na, ..Default::default() };
        let r = lib(feasibility_row(&sp, wavelength_nm, &op))?;
        *out = TgFeasibility { waist_nm: r.waist_nm, power_mw: r.power_mw, delta_f_sc: r.delta_f_sc, distance_um: r.distance_um };
        Ok(())
    })
}
