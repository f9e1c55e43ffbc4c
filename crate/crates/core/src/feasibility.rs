// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Tweezer power budget and photon-scattering infidelity per ion species.
//!
//! This is the only module besides the CLI that works in SI units. Species
//! data live in `data/species.json`, embedded at compile time and replaceable
//! at run time through [`load_species`].

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bands::ZETA3;
use crate::chain::{length_unit, AMU};
use crate::error::{invalid, Error, Result};

/// Speed of light (m/s).
pub const C_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

const BUILTIN: &str = include_str!("../data/species.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    #[serde(default)]
    pub label: String,
    /// Vacuum wavelength in nm.
    pub wavelength_nm: f64,
    /// Spontaneous decay rate Γ in 1/s.
    pub rate_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesData {
    pub name: String,
    pub mass_amu: f64,
    pub default_wavelength_nm: f64,
    pub transitions: Vec<Transition>,
}

impl SpeciesData {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_amu > 0.0) {
            return invalid(format!("{}: mass must be positive", self.name));
        }
        if self.transitions.is_empty() {
            return invalid(format!("{}: at least one transition required", self.name));
        }
        for t in &self.transitions {
            if !(t.wavelength_nm > 0.0 && t.rate_per_s > 0.0) {
                return invalid(format!("{}: transition wavelengths and linewidths must be positive", self.name));
            }
        }
        Ok(())
    }

    fn mass_kg(&self) -> f64 {
        self.mass_amu * AMU
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeciesFile {
    #[serde(default)]
    pub schema: String,
    #[serde(default)]
    pub source: String,
    pub species: Vec<SpeciesData>,
}

/// Parse a species file and validate every entry.
pub fn load_species<R: Read>(r: R) -> Result<SpeciesFile> {
    let f: SpeciesFile = serde_json::from_reader(r)?;
    for s in &f.species {
        s.validate()?;
    }
    Ok(f)
}

/// The embedded data set.
pub fn builtin_species() -> SpeciesFile {
    load_species(BUILTIN.as_bytes()).expect("embedded species data is valid")
}

/// Look up a species by name (case-insensitive) in the embedded data set.
pub fn species(name: &str) -> Result<SpeciesData> {
    builtin_species()
        .species
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::InvalidInput(format!("unknown species '{name}'")))
}

/// How the scattering rate of each transition is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterModel {
    /// Counter-rotating detunings kept, without the `(ω/ω_j)³` prefactor;
    /// reproduces the published power and infidelity table.
    #[default]
    Tabulated,
    /// Full two-level expression including `(ω/ω_j)³`.
    Full,
}

/// Operating point shared by the power and infidelity estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Operating {
    pub nu0: f64,
    pub epsilon: f64,
    /// Transverse trap frequency `ω_x / 2π` in Hz.
    pub freq_x_hz: f64,
    pub na: f64,
    pub model: ScatterModel,
}

impl Default for Operating {
    fn default() -> Self {
        Self { nu0: 0.4, epsilon: 0.07, freq_x_hz: 3.0e6, na: 0.7, model: ScatterModel::Tabulated }
    }
}

impl Operating {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu0 > 0.0 && self.epsilon > 0.0 && self.freq_x_hz > 0.0) {
            return invalid("nu0, epsilon and freq_x_hz must be positive");
        }
        if !(self.na > 0.0 && self.na < 1.0) {
            return invalid("numerical aperture must lie in (0, 1)");
        }
        Ok(())
    }

    fn omega_x(&self) -> f64 {
        2.0 * PI * self.freq_x_hz
    }
}

/// Diffraction-limited waist `0.41 λ / NA` (same unit as `lambda`).
pub fn beam_waist(lambda: f64, na: f64) -> f64 {
    0.41 * lambda / na
}

fn angular(lambda_m: f64) -> f64 {
    2.0 * PI * C_LIGHT / lambda_m
}

/// Returns `(a, s)` with `U₀ = a·P/W₀²` and `Γ_sc = s·P/W₀²`.
fn response(sp: &SpeciesData, lambda_m: f64, model: ScatterModel) -> Result<(f64, f64)> {
    let w = angular(lambda_m);
    let mut a = 0.0;
    let mut s = 0.0;
    for t in &sp.transitions {
        let wj = angular(t.wavelength_nm * 1e-9);
        if ((wj - w) / wj).abs() < 1e-9 {
            return invalid(format!("{}: tweezer wavelength on resonance", sp.name));
        }
        let d = t.rate_per_s / (wj - w) + t.rate_per_s / (wj + w);
        let base = 3.0 * C_LIGHT * C_LIGHT / wj.powi(3);
        a += base * d;
        let ratio = match model {
            ScatterModel::Full => (w / wj).powi(3),
            ScatterModel::Tabulated => 1.0,
        };
        s += base / HBAR * ratio * d * d;
    }
    if !(a > 0.0) {
        return Err(Error::Infeasible(format!(
            "{}: net polarizability is not positive at {:.1} nm (anti-trapping)",
            sp.name,
            lambda_m * 1e9
        )));
    }
    Ok((a, s))
}

/// Beam power (W) giving a tweezer frequency `ν₀ ω_x`.
pub fn required_power(sp: &SpeciesData, lambda_m: f64, op: &Operating) -> Result<f64> {
    op.validate()?;
    let w0 = beam_waist(lambda_m, op.na);
    let (a, _) = response(sp, lambda_m, op.model)?;
    let u0 = sp.mass_kg() * (op.nu0 * op.omega_x()).powi(2) * w0 * w0 / 4.0;
    Ok(u0 * w0 * w0 / a)
}

/// Scattering rate (1/s) at the beam center for a given power.
pub fn scattering_rate(sp: &SpeciesData, lambda_m: f64, power_w: f64, na: f64, model: ScatterModel) -> Result<f64> {
    let w0 = beam_waist(lambda_m, na);
    let (_, s) = response(sp, lambda_m, model)?;
    Ok(s * power_w / (w0 * w0))
}

/// Dimensionless gate time `ω_x τ = 2π/(ν₊ − ν₋)` from the flat-band splitting.
pub fn flat_band_duration(epsilon: f64, nu0: f64) -> f64 {
    let e2 = epsilon * epsilon;
    let base = 1.0 - 2.0 * e2 * ZETA3 + nu0 * nu0;
    2.0 * PI / ((base + e2).sqrt() - (base - e2).sqrt())
}

/// `δF_sc = 3/2 Γ_sc τ`.
pub fn scattering_infidelity(sp: &SpeciesData, lambda_m: f64, op: &Operating) -> Result<f64> {
    let p = required_power(sp, lambda_m, op)?;
    let g = scattering_rate(sp, lambda_m, p, op.na, op.model)?;
    let tau = flat_band_duration(op.epsilon, op.nu0) / op.omega_x();
    Ok(1.5 * g * tau)
}

/// Inter-ion distance (m) that yields `epsilon` at the given trap frequency.
pub fn ion_distance(sp: &SpeciesData, epsilon: f64, freq_x_hz: f64) -> f64 {
    length_unit(sp.mass_amu, freq_x_hz) * epsilon.powf(-2.0 / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub species: String,
    pub wavelength_nm: f64,
    pub waist_nm: f64,
    pub power_mw: f64,
    pub delta_f_sc: f64,
    pub distance_um: f64,
}

pub fn feasibility_row(sp: &SpeciesData, wavelength_nm: f64, op: &Operating) -> Result<FeasibilityRow> {
    let lambda = wavelength_nm * 1e-9;
    Ok(FeasibilityRow {
        species: sp.name.clone(),
        wavelength_nm,
        waist_nm: beam_waist(wavelength_nm, op.na),
        power_mw: required_power(sp, lambda, op)? * 1e3,
        delta_f_sc: scattering_infidelity(sp, lambda, op)?,
        distance_um: ion_distance(sp, op.epsilon, op.freq_x_hz) * 1e6,
    })
}

/// One row per species at its default wavelength.
pub fn feasibility_table(data: &[SpeciesData], op: &Operating) -> Result<Vec<FeasibilityRow>> {
    data.iter().map(|s| feasibility_row(s, s.default_wavelength_nm, op)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub wavelength_nm: f64,
    /// `None` where the tweezer anti-traps.
    pub power_mw: Option<f64>,
    pub delta_f_sc: Option<f64>,
}

/// Evenly spaced wavelength scan over `[lo_nm, hi_nm]`.
pub fn wavelength_scan(sp: &SpeciesData, lo_nm: f64, hi_nm: f64, points: usize, op: &Operating) -> Result<Vec<ScanPoint>> {
    op.validate()?;
    if !(lo_nm > 0.0 && hi_nm > lo_nm && points >= 2) {
        return invalid("wavelength scan needs 0 < lo < hi and at least two points");
    }
    Ok((0..points)
        .map(|i| {
            let l = lo_nm + (hi_nm - lo_nm) * i as f64 / (points - 1) as f64;
            let p = required_power(sp, l * 1e-9, op).ok();
            let f = scattering_infidelity(sp, l * 1e-9, op).ok();
            ScanPoint { wavelength_nm: l, power_mw: p.map(|x| x * 1e3), delta_f_sc: f }
        })
        .collect())
}

pub fn write_table_csv<W: Write>(rows: &[FeasibilityRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["species", "wavelength_nm", "waist_nm", "power_mw", "delta_f_sc", "distance_um"])?;
    for r in rows {
        wr.write_record([
            r.species.clone(),
            format!("{:.3}", r.wavelength_nm),
            format!("{:.3}", r.waist_nm),
            format!("{:.6e}", r.power_mw),
            format!("{:.6e}", r.delta_f_sc),
            format!("{:.4}", r.distance_um),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_scan_csv<W: Write>(species: &str, scan: &[ScanPoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["species", "wavelength_nm", "power_mw", "delta_f_sc"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
    for s in scan {
        wr.write_record([species.to_string(), format!("{:.3}", s.wavelength_nm), opt(s.power_mw), opt(s.delta_f_sc)])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn waist_arithmetic() {
        assert!((beam_waist(400.0, 0.7) - 234.285_714_285_714_3).abs() < 1e-9);
        assert!((beam_waist(532.0, 0.7) - 311.6).abs() < 1e-9);
        assert!((beam_waist(400.0, 0.35) - 2.0 * beam_waist(400.0, 0.7)).abs() < 1e-12);
    }

    #[test]
    fn builtin_data_loads() {
        let f = builtin_species();
        assert_eq!(f.species.len(), 5);
        assert!(species("mg24").is_ok());
        assert!(species("Xx1").is_err());
    }

    #[test]
    fn power_scales_with_nu0_squared() {
        let mg = species("Mg24").unwrap();
        let op = Operating::default();
        let p1 = required_power(&mg, 400e-9, &op).unwrap();
        let p2 = required_power(&mg, 400e-9, &Operating { nu0: 0.2, ..op }).unwrap();
        assert!(rel(p1 / p2, 4.0) < 1e-12);
    }

    #[test]
    fn power_and_rate_scale_as_inverse_waist_squared() {
        let mg = species("Mg24").unwrap();
        let op = Operating::default();
        let g1 = scattering_rate(&mg, 400e-9, 1e-3, 0.7, op.model).unwrap();
        let g2 = scattering_rate(&mg, 400e-9, 1e-3, 0.35, op.model).unwrap();
        assert!(rel(g1 / g2, 4.0) < 1e-12);
        let f1 = scattering_infidelity(&mg, 400e-9, &op).unwrap();
        let f2 = scattering_infidelity(&mg, 400e-9, &Operating { na: 0.35, ..op }).unwrap();
        assert!(rel(f2 / f1, 4.0) < 1e-12);
    }

    #[test]
    fn anti_trapping_between_fine_structure_lines() {
        let mg = species("Mg24").unwrap();
        let e = required_power(&mg, 270e-9, &Operating::default()).unwrap_err();
        assert!(matches!(e, Error::Infeasible(_)));
    }

    #[test]
    fn magnesium_reference_point() {
        let mg = species("Mg24").unwrap();
        let row = feasibility_row(&mg, 400.0, &Operating::default()).unwrap();
        assert!(rel(row.power_mw, 6.4) < 0.25, "{row:?}");
        assert!(rel(row.delta_f_sc, 4.9e-3) < 0.25, "{row:?}");
        assert!(rel(row.distance_um, 15.0) < 0.02, "{row:?}");
    }

    #[test]
    fn full_model_is_smaller_by_frequency_ratio_cubed() {
        let mg = species("Yb171").unwrap();
        let op = Operating::default();
        let a = scattering_infidelity(&mg, 532e-9, &op).unwrap();
        let b = scattering_infidelity(&mg, 532e-9, &Operating { model: ScatterModel::Full, ..op }).unwrap();
        assert!(rel(b / a, (369.525f64 / 532.0).powi(3)) < 1e-12);
    }

    #[test]
    fn infidelity_grows_with_pinning() {
        let ca = species("Ca40").unwrap();
        let mut last = 0.0;
        for nu0 in [0.1, 0.2, 0.3, 0.4, 0.6] {
            let f = scattering_infidelity(&ca, 532e-9, &Operating { nu0, ..Default::default() }).unwrap();
            assert!(f > last);
            last = f;
        }
    }

    #[test]
    fn scan_has_single_interior_minimum() {
        for sp in builtin_species().species {
            let lo = sp.transitions.iter().map(|t| t.wavelength_nm).fold(0.0, f64::max) + 5.0;
            let scan = wavelength_scan(&sp, lo, 1500.0, 300, &Operating::default()).unwrap();
            let f: Vec<f64> = scan.iter().map(|s| s.delta_f_sc.unwrap()).collect();
            let imin = f.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!(imin > 0 && imin < f.len() - 1, "{}", sp.name);
            assert!(f[..=imin].windows(2).all(|w| w[1] < w[0]), "{}", sp.name);
            assert!(f[imin..].windows(2).all(|w| w[1] > w[0]), "{}", sp.name);
        }
    }

    #[test]
    fn csv_outputs() {
        let rows = feasibility_table(&builtin_species().species, &Operating::default()).unwrap();
        let mut buf = Vec::new();
        write_table_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 6);
        assert!(s.starts_with("species,"));
    }
}
