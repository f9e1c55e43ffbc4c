// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use tweezer_gates::bands::{band_structure, CellConfig};
use tweezer_gates::chain::{solve_equilibrium, TrapConfig};
use tweezer_gates::cli::{parse_config, Config};
use tweezer_gates::feasibility::{beam_waist, required_power, scattering_infidelity, species, Operating};
use tweezer_gates::gatekernel::ModeSet;
use tweezer_gates::optimize::{inverse_sine_transform, sine_transform};
use tweezer_gates::phonons::{hessian, normal_modes, Direction, TweezerArray};
use tweezer_gates::robustness::{sample_misadjust, switching_prefactor, MisadjustSpec, SwitchSpec};

fn tweezers(n: usize, mask: u32, nu0: f64) -> TweezerArray {
    let pinned: Vec<usize> = (0..n).filter(|i| mask >> (i % 32) & 1 == 1).collect();
    TweezerArray::uniform(n, &pinned, nu0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn equilibrium_is_sorted_symmetric_and_balanced(n in 2usize..14, gz in 0.05f64..0.6) {
        let c = solve_equilibrium(&TrapConfig::new(n, gz, 0)).unwrap();
        prop_assert!(c.positions.windows(2).all(|w| w[1] > w[0]));
        for i in 0..n {
            prop_assert!((c.positions[i] + c.positions[n - 1 - i]).abs() < 1e-9);
        }
        prop_assert!(c.residual < 1e-10);
    }

    #[test]
    fn modes_are_orthonormal_and_preserve_the_trace(n in 3usize..16, mask in any::<u32>(), nu0 in 0.0f64..0.8) {
        let c = solve_equilibrium(&TrapConfig::new(n, 0.1, 0)).unwrap();
        let tw = tweezers(n, mask, nu0);
        let m = normal_modes(&c, &tw, Direction::X).unwrap();
        prop_assert!(m.orthonormality_error() < 1e-10);
        let tr = hessian(&c, &tw, Direction::X).trace();
        let s: f64 = m.freqs.iter().map(|f| f * f).sum();
        prop_assert!((tr - s).abs() < 1e-10 * tr.abs());
    }

    #[test]
    fn tweezers_leave_the_y_spectrum_alone(n in 3usize..16, mask in any::<u32>(), nu0 in 0.0f64..0.8) {
        let c = solve_equilibrium(&TrapConfig::new(n, 0.1, 0)).unwrap();
        let a = normal_modes(&c, &TweezerArray::none(n), Direction::Y).unwrap();
        let b = normal_modes(&c, &tweezers(n, mask, nu0), Direction::Y).unwrap();
        for (x, y) in a.freqs.iter().zip(&b.freqs) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn pinning_raises_every_x_frequency(n in 3usize..12, mask in any::<u32>(), nu0 in 0.05f64..0.8) {
        let c = solve_equilibrium(&TrapConfig::new(n, 0.1, 0)).unwrap();
        let a = normal_modes(&c, &TweezerArray::none(n), Direction::X).unwrap();
        let b = normal_modes(&c, &tweezers(n, mask, nu0), Direction::X).unwrap();
        // frequencies are sorted descending; adding a positive term cannot lower any eigenvalue
        for (x, y) in a.freqs.iter().zip(&b.freqs) {
            prop_assert!(*y >= *x - 1e-12);
        }
    }

    #[test]
    fn sine_transform_round_trips(v in prop::collection::vec(-1.0f64..1.0, 1..12)) {
        let back = inverse_sine_transform(&sine_transform(&v));
        for (a, b) in v.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn power_is_quadratic_and_infidelity_monotone_in_nu0(nu0 in 0.05f64..0.6, f in 1.05f64..2.0) {
        let mg = species("Mg24").unwrap();
        let op = Operating { nu0, ..Default::default() };
        let hi = Operating { nu0: nu0 * f, ..op };
        let p0 = required_power(&mg, 400e-9, &op).unwrap();
        let p1 = required_power(&mg, 400e-9, &hi).unwrap();
        prop_assert!((p1 / p0 - f * f).abs() < 1e-10 * f * f);
        prop_assert!(scattering_infidelity(&mg, 400e-9, &hi).unwrap() > scattering_infidelity(&mg, 400e-9, &op).unwrap());
        prop_assert!((beam_waist(400.0 * f, 0.7) - f * beam_waist(400.0, 0.7)).abs() < 1e-9);
    }

    #[test]
    fn misadjust_sampling_is_reproducible(seed in any::<u64>(), index in 0u64..1000, sigma in 0.0f64..0.1) {
        let tw = tweezers(12, 0b0011_0011_0011, 0.4);
        let spec = MisadjustSpec { sigma, seed, ..Default::default() };
        let a = sample_misadjust(&tw, &spec, index);
        let b = sample_misadjust(&tw, &spec, index);
        prop_assert_eq!(&a, &b);
        let m = a.misadjust.unwrap();
        for (i, x) in m.iter().enumerate() {
            if tw.nu0[i] == 0.0 {
                prop_assert_eq!(x.focus_shift, [0.0; 3]);
                prop_assert_eq!(x.dw, 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn band_weights_are_complete(p in 3usize..8, nu0 in 0.1f64..0.6, eps in 0.03f64..0.1, a in 0i64..24, b in 0i64..24) {
        let bs = band_structure(&CellConfig::new(p, eps, nu0), 32).unwrap();
        prop_assert!(bs.reconstruction_error() < 1e-10);
        let s: f64 = (0..bs.n_modes()).map(|m| bs.pair_weight(m, a, b)).sum();
        let expect = if a == b { 1.0 } else { 0.0 };
        prop_assert!((s - expect).abs() < 1e-10, "sum {} for {} {}", s, a, b);
    }

    #[test]
    fn switching_probability_is_inverse_square(tau in 10.0f64..1e4) {
        let r = switching_prefactor(&SwitchSpec { k_points: 20, ..Default::default() }).unwrap();
        prop_assert!((r.probability(tau) * tau * tau - r.k).abs() < 1e-12 * r.k);
        prop_assert!((r.probability(2.0 * tau) * 4.0 - r.probability(tau)).abs() < 1e-12 * r.probability(tau));
    }

    #[test]
    fn configs_round_trip(p in 3usize..12, eps in 0.01f64..0.2, nu0 in 0.0f64..1.0) {
        let text = format!(r#"{{"schema_version":1,"system":{{"kind":"infinite","p":{p},"epsilon":{eps},"nu0":{nu0}}}}}"#);
        let c: Config = parse_config(&text).unwrap();
        let again = parse_config(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(serde_json::to_value(&c).unwrap(), serde_json::to_value(&again).unwrap());
    }
}
