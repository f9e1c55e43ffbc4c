// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

use std::ffi::{c_char, CStr};
use std::ptr;

use tweezer_gates_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe { tg_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn chain_and_modes_round_trip() {
    unsafe {
        let mut chain = ptr::null_mut();
        assert_eq!(tg_chain_new(20, 3, 0.07, &mut chain), TgStatus::Ok);
        let mut eps = 0.0;
        assert_eq!(tg_chain_epsilon(chain, &mut eps), TgStatus::Ok);
        assert!((eps - 0.07).abs() < 1e-6);

        let mut len = 0usize;
        assert_eq!(tg_chain_positions(chain, ptr::null_mut(), 0, &mut len), TgStatus::Ok);
        assert_eq!(len, 20);
        let mut small = [0.0; 4];
        assert_eq!(tg_chain_positions(chain, small.as_mut_ptr(), small.len(), &mut len), TgStatus::BufferTooSmall);
        let mut pos = vec![0.0; len];
        assert_eq!(tg_chain_positions(chain, pos.as_mut_ptr(), pos.len(), &mut len), TgStatus::Ok);
        assert!(pos.windows(2).all(|w| w[1] > w[0]));

        let mut nu0 = vec![0.0; 20];
        nu0[3] = 0.4;
        nu0[4] = 0.4;
        let mut modes = ptr::null_mut();
        assert_eq!(tg_modes_new(chain, nu0.as_ptr(), nu0.len(), &mut modes), TgStatus::Ok);
        let mut f = vec![0.0; 20];
        assert_eq!(tg_modes_frequencies(modes, f.as_mut_ptr(), f.len(), &mut len), TgStatus::Ok);
        assert!(f[0] > 1.0);
        let mut v = vec![0.0; 20];
        assert_eq!(tg_modes_vector(modes, 0, v.as_mut_ptr(), v.len(), &mut len), TgStatus::Ok);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
        assert_eq!(tg_modes_vector(modes, 20, v.as_mut_ptr(), v.len(), &mut len), TgStatus::InvalidInput);
        assert!(last_error().contains("out of range"));

        tg_modes_free(modes);
        tg_chain_free(chain);
    }
}

#[test]
fn design_on_bands() {
    unsafe {
        let mut b = ptr::null_mut();
        assert_eq!(tg_bands_new(6, 0.07, 0.4, 200, &mut b), TgStatus::Ok);
        let mut d = TgDesign::default();
        assert_eq!(tg_design_infinite(b, TgMode::Stretch, &mut d), TgStatus::Ok);
        assert!((d.mu - 1.065).abs() < 0.005);
        assert!((d.delta_f - 5.7e-4).abs() < 0.2 * 5.7e-4);
        let mut w = [0.0; 6];
        let mut len = 0;
        assert_eq!(tg_bands_widths(b, w.as_mut_ptr(), 6, &mut len), TgStatus::Ok);
        assert!(w.iter().all(|x| *x >= 0.0));
        tg_bands_free(b);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut b = ptr::null_mut();
        assert_eq!(tg_bands_new(2, 0.07, 0.4, 10, &mut b), TgStatus::InvalidInput);
        assert!(last_error().contains("at least 3"));
        assert_eq!(tg_chain_epsilon(ptr::null(), ptr::null_mut()), TgStatus::NullPointer);
        let mut out = TgFeasibility::default();
        let name = c"Mg24";
        assert_eq!(tg_feasibility(name.as_ptr(), 270.0, 0.4, 0.07, 3e6, 0.7, &mut out), TgStatus::Infeasible);
        let bad = c"Unobtainium";
        assert_eq!(tg_feasibility(bad.as_ptr(), 400.0, 0.4, 0.07, 3e6, 0.7, &mut out), TgStatus::InvalidInput);
        // a message longer than the buffer is truncated but fully measured
        let mut tiny = [0 as c_char; 4];
        let n = tg_last_error(tiny.as_mut_ptr(), tiny.len());
        assert!(n > 3);
        assert_eq!(CStr::from_ptr(tiny.as_ptr()).to_bytes().len(), 3);
    }
}

#[test]
fn scalar_entry_points() {
    unsafe {
        let mut k = 0.0;
        assert_eq!(tg_switching_sqrt_k(4, 0.07, 0.4, &mut k), TgStatus::Ok);
        assert!((k - 8.0).abs() < 1.0);
        let mut out = TgFeasibility::default();
        assert_eq!(tg_feasibility(c"Mg24".as_ptr(), 400.0, 0.4, 0.07, 3e6, 0.7, &mut out), TgStatus::Ok);
        assert!((out.power_mw - 6.4).abs() < 1.6);
        let v = CStr::from_ptr(tg_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/tweezer_gates.h")).unwrap();
    for name in [
        "tg_version",
        "tg_last_error",
        "tg_chain_new",
        "tg_chain_free",
        "tg_modes_new",
        "tg_bands_new",
        "tg_design_infinite",
        "tg_switching_sqrt_k",
        "tg_feasibility",
        "typedef struct TgChain TgChain",
        "TG_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}
