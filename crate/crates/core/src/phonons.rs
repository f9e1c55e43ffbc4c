// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Finite-chain normal modes under an optical tweezer array.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chain::IonChain;
use crate::error::{invalid, Error, Result};

/// Oscillation direction. `X` is the gate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    X,
    Y,
    Z,
}

impl Direction {
    /// Sign of the Coulomb coupling in the harmonic expansion.
    pub fn coupling_sign(self) -> f64 {
        match self {
            Direction::X | Direction::Y => 1.0,
            Direction::Z => -2.0,
        }
    }

    /// Whether the tweezer potential acts along this direction.
    pub fn pinned(self) -> bool {
        !matches!(self, Direction::Y)
    }
}

/// Per-ion misadjustment of a tweezer beam.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Misadjust {
    /// Relative frequency error `δω/ω₀`.
    pub dw: f64,
    /// Focus displacement in units of `l0` (x, y, z).
    pub focus_shift: [f64; 3],
    /// Polar angle of the beam axis measured from y.
    pub theta: f64,
    /// Azimuth of the beam axis in the x–z plane.
    pub phi: f64,
}

/// Pinning frequencies `ω₀,ᵢ/ω_x` with optional misadjustments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweezerArray {
    pub nu0: Vec<f64>,
    #[serde(default)]
    pub misadjust: Option<Vec<Misadjust>>,
}

impl TweezerArray {
    pub fn none(n: usize) -> Self {
        Self { nu0: vec![0.0; n], misadjust: None }
    }

    pub fn uniform(n: usize, pinned: &[usize], nu0: f64) -> Self {
        let mut v = vec![0.0; n];
        for &i in pinned {
            v[i] = nu0;
        }
        Self { nu0: v, misadjust: None }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.nu0.len() != n {
            return invalid(format!("tweezer array has {} entries for {} ions", self.nu0.len(), n));
        }
        if let Some((i, v)) = self.nu0.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0)) {
            return invalid(format!("nu0[{i}] = {v} outside [0, 1]"));
        }
        if let Some(m) = &self.misadjust {
            if m.len() != n {
                return invalid("misadjust list length differs from ion count");
            }
        }
        Ok(())
    }
}

/// Dimensionless Hessian of the harmonic expansion along `dir`.
pub fn hessian(chain: &IonChain, tw: &TweezerArray, dir: Direction) -> DMatrix<f64> {
    let u = &chain.positions;
    let n = u.len();
    let s = dir.coupling_sign();
    let base = match dir {
        Direction::X => 1.0,
        Direction::Y => chain.trap.gamma_y.powi(2),
        Direction::Z => chain.trap.gamma_z.powi(2),
    };
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut d = base;
        if dir.pinned() {
            d += tw.nu0[i].powi(2);
        }
        for j in 0..n {
            if j != i {
                let c = 1.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, j)] = s * c;
                d -= s * c;
            }
        }
        h[(i, i)] = d;
    }
    h
}

/// Normal modes of one direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhononModes {
    pub direction: Direction,
    /// `ν_n = ω_n/ω_x`.
    pub freqs: Vec<f64>,
    /// Column `n` holds the mode vector `Mⁿ` over ions.
    pub vectors: DMatrix<f64>,
}

/// Diagonalize a real symmetric dynamical matrix into sorted modes with
/// the sign convention "largest-magnitude component positive".
pub fn modes_from_hessian(h: DMatrix<f64>, descending: bool) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let c = eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap();
        if descending {
            c.reverse()
        } else {
            c
        }
    });
    let mut freqs = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let lam = eig.eigenvalues[k];
        if lam <= 0.0 {
            return Err(Error::Unstable(format!("eigenvalue {lam:.3e} ≤ 0 (zigzag onset)")));
        }
        freqs.push(lam.sqrt());
        let v = eig.eigenvectors.column(k);
        let mut imax = 0;
        for i in 0..n {
            if v[i].abs() > v[imax].abs() + 1e-12 {
                imax = i;
            }
        }
        let sgn = if v[imax] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vecs[(i, col)] = sgn * v[i];
        }
    }
    Ok((freqs, vecs))
}

/// Normal modes along `dir`; x and y are sorted by descending frequency, z ascending.
pub fn normal_modes(chain: &IonChain, tw: &TweezerArray, dir: Direction) -> Result<PhononModes> {
    tw.validate(chain.n_ions())?;
    let h = hessian(chain, tw, dir);
    let (freqs, vectors) = modes_from_hessian(h, dir != Direction::Z)?;
    Ok(PhononModes { direction: dir, freqs, vectors })
}

impl PhononModes {
    pub fn n_modes(&self) -> usize {
        self.freqs.len()
    }

    /// `Mⁿᵢ`.
    pub fn amplitude(&self, n: usize, i: usize) -> f64 {
        self.vectors[(i, n)]
    }

    /// Lamb-Dicke matrix `ηⁿᵢ = η₀ Mⁿᵢ/√ν_n`, rows = modes, columns = ions.
    pub fn eta(&self, eta0: f64) -> DMatrix<f64> {
        let n = self.n_modes();
        DMatrix::from_fn(n, self.vectors.nrows(), |m, i| eta0 * self.vectors[(i, m)] / self.freqs[m].sqrt())
    }

    /// `max |MᵀM − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.vectors.ncols();
        (self.vectors.transpose() * &self.vectors - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// CSV with one row per mode: `mode, freq, ion_0, ion_1, ...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["mode".to_string(), "nu".to_string()];
        header.extend((0..self.vectors.nrows()).map(|i| format!("ion_{i}")));
        wr.write_record(&header)?;
        for n in 0..self.n_modes() {
            let mut row = vec![n.to_string(), format!("{:.12e}", self.freqs[n])];
            row.extend((0..self.vectors.nrows()).map(|i| format!("{:.12e}", self.vectors[(i, n)])));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Localized COM/stretch mode pair of two neighbouring pinned ions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizedPair {
    pub com: usize,
    pub stretch: usize,
    pub com_overlap: f64,
    pub stretch_overlap: f64,
}

impl LocalizedPair {
    pub fn min_overlap(&self) -> f64 {
        self.com_overlap.min(self.stretch_overlap)
    }
}

/// Modes with maximal overlap with `(eᵢ ± eⱼ)/√2`; both overlaps must reach 0.9.
pub fn find_localized_pair_modes(modes: &PhononModes, i: usize, j: usize) -> Result<LocalizedPair> {
    find_pair_modes(modes, i, j, 0.9)
}

/// As [`find_localized_pair_modes`] with an explicit overlap threshold.
pub fn find_pair_modes(modes: &PhononModes, i: usize, j: usize, min_overlap: f64) -> Result<LocalizedPair> {
    let n = modes.vectors.nrows();
    if i >= n || j >= n || i == j {
        return invalid(format!("bad ion pair ({i}, {j})"));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut best = (0, 0.0, 0, 0.0);
    for m in 0..modes.n_modes() {
        let a = modes.vectors[(i, m)];
        let b = modes.vectors[(j, m)];
        let oc = (r * (a + b)).abs();
        let os = (r * (a - b)).abs();
        if oc > best.1 {
            best.0 = m;
            best.1 = oc;
        }
        if os > best.3 {
            best.2 = m;
            best.3 = os;
        }
    }
    let pair = LocalizedPair { com: best.0, stretch: best.2, com_overlap: best.1, stretch_overlap: best.3 };
    if pair.min_overlap() < min_overlap || pair.com == pair.stretch {
        return Err(Error::NotLocalized(format!(
            "pair ({i}, {j}): overlaps {:.3}/{:.3}",
            pair.com_overlap, pair.stretch_overlap
        )));
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{calibrate_gamma_for_epsilon, solve_equilibrium, TrapConfig};

    fn pair_chain(d: f64) -> IonChain {
        // two ions at ±d/2: choose γ_z with 1/d² = γ_z² d/2
        let gz = (2.0 / d.powi(3)).sqrt();
        solve_equilibrium(&TrapConfig::new(2, gz, 0)).unwrap()
    }

    #[test]
    fn two_ion_x_eigenvalues() {
        let c = pair_chain(5.0);
        let m = normal_modes(&c, &TweezerArray::none(2), Direction::X).unwrap();
        let e2 = 1.0 / 125.0;
        assert!((m.freqs[0].powi(2) - 1.0).abs() < 1e-12);
        assert!((m.freqs[1].powi(2) - (1.0 - 2.0 * e2)).abs() < 1e-12);
    }

    #[test]
    fn y_has_no_tweezer_term() {
        let c = pair_chain(5.0);
        let a = hessian(&c, &TweezerArray::none(2), Direction::Y);
        let b = hessian(&c, &TweezerArray::uniform(2, &[0, 1], 0.4), Direction::Y);
        assert_eq!(a, b);
    }

    #[test]
    fn isolated_pair_splitting() {
        let d = 8.0;
        let c = pair_chain(d);
        let m = normal_modes(&c, &TweezerArray::uniform(2, &[0, 1], 0.4), Direction::X).unwrap();
        let p = find_localized_pair_modes(&m, 0, 1).unwrap();
        assert!((p.min_overlap() - 1.0).abs() < 1e-12);
        let split = m.freqs[p.com] - m.freqs[p.stretch];
        let e2 = 1.0 / d.powi(3);
        assert!((split - e2).abs() < 0.1 * e2);
    }

    #[test]
    fn untweezed_com_is_exact() {
        let c = solve_equilibrium(&TrapConfig::new(12, 0.1, 0)).unwrap();
        let m = normal_modes(&c, &TweezerArray::none(12), Direction::X).unwrap();
        assert!((m.freqs[0] - 1.0).abs() < 1e-12);
        let v = 1.0 / 12f64.sqrt();
        for i in 0..12 {
            assert!((m.amplitude(0, i) - v).abs() < 1e-10);
        }
    }

    #[test]
    fn trace_identity_and_orthonormality() {
        let c = solve_equilibrium(&TrapConfig::new(30, 0.05, 0)).unwrap();
        let tw = TweezerArray::uniform(30, &[3, 4, 9, 10], 0.3);
        let h = hessian(&c, &tw, Direction::X);
        let m = normal_modes(&c, &tw, Direction::X).unwrap();
        let tr: f64 = m.freqs.iter().map(|x| x * x).sum();
        assert!((tr - h.trace()).abs() < 1e-10);
        assert!(m.orthonormality_error() < 1e-10);
    }

    #[test]
    fn weak_pinning_fails_localization() {
        let cfg = calibrate_gamma_for_epsilon(60, 5, 0.07).unwrap();
        let c = solve_equilibrium(&cfg).unwrap();
        let pinned: Vec<usize> = (0..9).flat_map(|j| [5 + 6 * j, 6 + 6 * j]).collect();
        let (a, b) = (pinned[8], pinned[9]);
        let strong = normal_modes(&c, &TweezerArray::uniform(60, &pinned, 0.4), Direction::X).unwrap();
        let weak = normal_modes(&c, &TweezerArray::uniform(60, &pinned, 0.05), Direction::X).unwrap();
        assert!(find_localized_pair_modes(&strong, a, b).is_ok());
        assert!(find_localized_pair_modes(&weak, a, b).is_err());
    }
}
