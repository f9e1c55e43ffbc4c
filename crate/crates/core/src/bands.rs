// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Phonon bands of an infinite, uniformly spaced chain with a period-`p`
//! tweezer pattern.
//!
//! Ions are labelled `(l, i)` with cell `l ∈ ℤ` and slot `i ∈ 0..p`; the
//! global label used by the gate kernel is `p·l + i`. Bloch modes are
//! `x_{l,i} = e^{ikl} B_i` on a midpoint grid of `K` quasimomenta in `[0, π]`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gatekernel::{IonId, ModeSet};
use crate::phonons::Direction;

/// `ζ(3)`.
pub const ZETA3: f64 = 1.202_056_903_159_594_2;
/// `ζ(5)`.
pub const ZETA5: f64 = 1.036_927_755_143_369_9;

/// Unit-cell description of the periodic tweezer pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub p: usize,
    /// Zero-based slots carrying a tweezer.
    #[serde(default = "default_slots")]
    pub pinned_slots: Vec<usize>,
    pub nu0: f64,
    pub epsilon: f64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default = "default_gamma_y")]
    pub gamma_y: f64,
}

fn default_slots() -> Vec<usize> {
    vec![0, 1]
}
fn default_direction() -> Direction {
    Direction::X
}
fn default_gamma_y() -> f64 {
    0.8
}

impl CellConfig {
    pub fn new(p: usize, epsilon: f64, nu0: f64) -> Self {
        Self { p, pinned_slots: default_slots(), nu0, epsilon, direction: Direction::X, gamma_y: 0.8 }
    }

    pub fn with_direction(mut self, d: Direction) -> Self {
        self.direction = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 3 {
            return invalid(format!("unit cell size p = {} must be at least 3", self.p));
        }
        let n = self.pinned_slots.len();
        if n < 2 || n > self.p {
            return invalid(format!("{n} pinned slots do not fit a cell of size {}", self.p));
        }
        if self.pinned_slots.iter().any(|&s| s >= self.p) {
            return invalid("pinned slot index outside the cell");
        }
        let mut s = self.pinned_slots.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != n {
            return invalid("duplicate pinned slot");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return invalid(format!("epsilon = {} outside (0, 1)", self.epsilon));
        }
        if !(self.nu0 >= 0.0 && self.nu0 <= 1.0) {
            return invalid(format!("nu0 = {} outside [0, 1]", self.nu0));
        }
        Ok(())
    }

    pub fn is_pinned(&self, slot: usize) -> bool {
        self.pinned_slots.contains(&slot)
    }

    /// On-site term `V_i` including the `k`-independent lattice sum.
    fn onsite(&self, slot: usize) -> f64 {
        let e2 = self.epsilon * self.epsilon;
        let tw = if self.is_pinned(slot) { self.nu0 * self.nu0 } else { 0.0 };
        match self.direction {
            Direction::X => 1.0 - 2.0 * e2 * ZETA3 + tw,
            Direction::Y => self.gamma_y * self.gamma_y - 2.0 * e2 * ZETA3,
            Direction::Z => 4.0 * e2 * ZETA3 + tw,
        }
    }

    fn lattice_cutoff(&self) -> i64 {
        let e2 = self.epsilon * self.epsilon;
        ((e2 / (self.p.pow(3) as f64 * 1e-12)).sqrt().ceil() as i64).max(8) + 1
    }
}

/// `J^k_j = ε² Σ_{l: pl+j≠0} e^{−ikl}/|pl+j|³` with the lattice sum cut
/// where the tail is below 10⁻¹².
pub fn coupling_fourier(cfg: &CellConfig, j: i64, k: f64) -> Complex64 {
    let p = cfg.p as i64;
    let lmax = cfg.lattice_cutoff();
    let step = Complex64::from_polar(1.0, -k);
    let mut acc = Complex64::new(0.0, 0.0);
    // l ≥ 0 and l < 0 handled with rotating phasors
    let mut ph = Complex64::new(1.0, 0.0);
    for l in 0..=lmax {
        let d = p * l + j;
        if d != 0 {
            acc += ph / (d.abs() as f64).powi(3);
        }
        ph *= step;
        if l % 512 == 511 {
            ph /= ph.norm();
        }
    }
    let mut ph = step.conj();
    for l in 1..=lmax {
        let d = -p * l + j;
        if d != 0 {
            acc += ph / (d.abs() as f64).powi(3);
        }
        ph *= step.conj();
        if l % 512 == 511 {
            ph /= ph.norm();
        }
    }
    acc * cfg.epsilon * cfg.epsilon
}

/// Hermitian dynamical matrix `v^k`.
pub fn dynamical_matrix(cfg: &CellConfig, k: f64) -> DMatrix<Complex64> {
    let p = cfg.p;
    let s = cfg.direction.coupling_sign();
    let js: Vec<Complex64> = (-(p as i64 - 1)..p as i64).map(|j| coupling_fourier(cfg, j, k)).collect();
    let off = p as i64 - 1;
    DMatrix::from_fn(p, p, |i, ip| {
        let j = i as i64 - ip as i64;
        let mut v = s * js[(j + off) as usize];
        if i == ip {
            v += cfg.onsite(i);
        }
        v
    })
}

/// Bloch bands on a midpoint grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandStructure {
    pub cfg: CellConfig,
    pub k_grid: Vec<f64>,
    /// `freqs[k][n]`, bands sorted by descending frequency.
    pub freqs: Vec<Vec<f64>>,
    /// `vectors[k]` has column `n` equal to `B^{k,n}`.
    pub vectors: Vec<DMatrix<Complex64>>,
    /// Multiplier on `Σ|α|²` in the infidelity. The default 2 follows the
    /// published infinite-chain convention; 1 matches the finite-chain
    /// normalization `Σ_m (Mᵐᵢ)² = 1`.
    #[serde(default = "default_band_weight")]
    pub infidelity_weight: f64,
}

fn default_band_weight() -> f64 {
    2.0
}

/// Diagonalize `v^k` for `K` midpoint quasimomenta in `[0, π]`.
pub fn band_structure(cfg: &CellConfig, k_points: usize) -> Result<BandStructure> {
    cfg.validate()?;
    if k_points == 0 {
        return invalid("k grid must have at least one point");
    }
    let k_grid: Vec<f64> = (0..k_points).map(|j| (j as f64 + 0.5) * PI / k_points as f64).collect();
    let per_k: Vec<Result<(Vec<f64>, DMatrix<Complex64>)>> = k_grid
        .par_iter()
        .map(|&k| {
            let v = dynamical_matrix(cfg, k);
            let eig = SymmetricEigen::new(v);
            let p = cfg.p;
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
            let mut f = Vec::with_capacity(p);
            let mut b = DMatrix::zeros(p, p);
            for (col, &m) in order.iter().enumerate() {
                let lam = eig.eigenvalues[m];
                if lam <= 0.0 {
                    return Err(Error::Unstable(format!("band {col} at k = {k:.4}: ν² = {lam:.3e}")));
                }
                f.push(lam.sqrt());
                let v = eig.eigenvectors.column(m);
                let mut imax = 0;
                for i in 0..p {
                    if v[i].norm() > v[imax].norm() + 1e-12 {
                        imax = i;
                    }
                }
                let phase = v[imax].conj() / v[imax].norm();
                for i in 0..p {
                    b[(i, col)] = v[i] * phase;
                }
            }
            Ok((f, b))
        })
        .collect();
    let mut freqs = Vec::with_capacity(k_points);
    let mut vectors = Vec::with_capacity(k_points);
    for r in per_k {
        let (f, b) = r?;
        freqs.push(f);
        vectors.push(b);
    }
    Ok(BandStructure { cfg: cfg.clone(), k_grid, freqs, vectors, infidelity_weight: default_band_weight() })
}

impl BandStructure {
    pub fn n_k(&self) -> usize {
        self.k_grid.len()
    }

    pub fn p(&self) -> usize {
        self.cfg.p
    }

    /// Mean of band `n` over the Brillouin zone.
    pub fn band_center(&self, n: usize) -> f64 {
        self.freqs.iter().map(|f| f[n]).sum::<f64>() / self.n_k() as f64
    }

    /// `max_k ν − min_k ν` of band `n`.
    pub fn bandwidth(&self, n: usize) -> f64 {
        let (lo, hi) = self.freqs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f[n]), hi.max(f[n])));
        hi - lo
    }

    /// Bands `(com, stretch)` with the largest weight on the first two pinned
    /// slots in the symmetric and antisymmetric combinations.
    pub fn com_stretch_bands(&self) -> (usize, usize) {
        self.pair_bands(self.cfg.pinned_slots[0], self.cfg.pinned_slots[1])
    }

    /// Bands with the largest weight on `(e_a ± e_b)/√2` at mid-grid.
    pub fn pair_bands(&self, a: usize, b: usize) -> (usize, usize) {
        let mid = self.n_k() / 2;
        let bk = &self.vectors[mid];
        let score = |n: usize, sign: f64| (bk[(a, n)] + sign * bk[(b, n)]).norm_sqr() / 2.0;
        let com = (0..self.p()).max_by(|&x, &y| score(x, 1.0).total_cmp(&score(y, 1.0))).unwrap();
        let stretch = (0..self.p())
            .filter(|&n| n != com)
            .max_by(|&x, &y| score(x, -1.0).total_cmp(&score(y, -1.0)))
            .unwrap();
        (com, stretch)
    }

    /// Maximum `|v^k − B Λ Bᴴ|` over the grid.
    pub fn reconstruction_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for (kk, &k) in self.k_grid.iter().enumerate() {
            let v = dynamical_matrix(&self.cfg, k);
            let b = &self.vectors[kk];
            let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                self.p(),
                self.freqs[kk].iter().map(|f| Complex64::new(f * f, 0.0)),
            ));
            let r = b * lam * b.adjoint() - v;
            err = err.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        err
    }

    /// Real mode amplitude `sqrt(1/2K)·M^{k,n,λ}_{l,i}` of the discretized band.
    pub fn amplitude(&self, kk: usize, n: usize, lambda: usize, cell: i64, slot: usize) -> f64 {
        let z = Complex64::from_polar(1.0, self.k_grid[kk] * cell as f64) * self.vectors[kk][(slot, n)];
        let s = (1.0 / self.n_k() as f64).sqrt();
        if lambda == 0 {
            s * z.re
        } else {
            -s * z.im
        }
    }

    /// CSV rows `k, band, nu`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "band", "nu"])?;
        for (kk, &k) in self.k_grid.iter().enumerate() {
            for n in 0..self.p() {
                wr.write_record([format!("{k:.12e}"), n.to_string(), format!("{:.12e}", self.freqs[kk][n])])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    fn split(&self, ion: IonId) -> (i64, usize) {
        let p = self.p() as i64;
        (ion.div_euclid(p), ion.rem_euclid(p) as usize)
    }
}

impl ModeSet for BandStructure {
    fn n_modes(&self) -> usize {
        self.n_k() * self.p()
    }

    fn freq(&self, m: usize) -> f64 {
        self.freqs[m / self.p()][m % self.p()]
    }

    fn pair_weight(&self, m: usize, a: IonId, b: IonId) -> f64 {
        let (kk, n) = (m / self.p(), m % self.p());
        let (la, sa) = self.split(a);
        let (lb, sb) = self.split(b);
        let bk = &self.vectors[kk];
        let z = bk[(sa, n)] * bk[(sb, n)].conj() * Complex64::from_polar(1.0, self.k_grid[kk] * (la - lb) as f64);
        z.re / self.n_k() as f64
    }

    fn infidelity_weight(&self) -> f64 {
        self.infidelity_weight
    }
}

/// Strong-pinning estimates of the COM and stretch bandwidths.
pub fn perturbative_bandwidths(cfg: &CellConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let e2 = cfg.epsilon * cfg.epsilon;
    let p = cfg.p as f64;
    let base = 1.0 - 2.0 * e2 * ZETA3 + cfg.nu0 * cfg.nu0;
    // Re Li_s(e^{ik}) decreases monotonically from ζ(s) at k=0 to −(1−2^{1−s})ζ(s) at k=π.
    let li3 = (ZETA3, -0.75 * ZETA3);
    let li5 = (ZETA5, -(15.0 / 16.0) * ZETA5);
    let com = |l: f64| (base + e2 * (1.0 + 4.0 / p.powi(3) * l)).sqrt();
    let st = |l: f64| (base - e2 * (1.0 + 12.0 / p.powi(5) * l)).sqrt();
    Ok(((com(li3.0) - com(li3.1)).abs(), (st(li5.0) - st(li5.1)).abs()))
}

/// Leading-order pinned-block eigenvectors `[[1, 1], [1, −1]]/√2`.
pub fn perturbative_com_stretch_vectors(_cfg: &CellConfig) -> [[f64; 2]; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [[r, r], [r, -r]]
}
