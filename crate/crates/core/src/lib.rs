// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Tweezer-engineered phonon modes and parallel Mølmer–Sørensen gates in
//! long trapped-ion chains.
//!
//! Everything inside the library is dimensionless: lengths in
//! `l0 = (e²/4πε₀ m ω_x²)^(1/3)`, frequencies in `ω_x`, times in `1/ω_x`.
//! Physical units appear only in [`feasibility`], [`chain::epsilon_physical`]
//! and the command-line front end.

pub mod bands;
pub mod chain;
pub mod cli;
pub mod design;
pub mod error;
pub mod feasibility;
pub mod gatekernel;
pub mod numerics;
pub mod optimize;
pub mod phonons;
pub mod robustness;

pub use error::{Error, Result};
