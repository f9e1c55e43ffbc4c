// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Classical equilibrium of a linear ion chain in a harmonic trap.
//!
//! The axial potential in units of `l0` and `ω_x` is
//! `½ γ_z² Σ u_i² + Σ_{i<j} 1/|u_i − u_j|`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::brent_root;

/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Atomic mass unit (kg).
pub const AMU: f64 = 1.660_539_066_60e-27;

const MAX_NEWTON: usize = 200;

/// Trap geometry as frequency ratios to the transverse frequency `ω_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub n_ions: usize,
    pub gamma_z: f64,
    #[serde(default = "default_gamma_y")]
    pub gamma_y: f64,
    #[serde(default)]
    pub n_buffer: usize,
}

fn default_gamma_y() -> f64 {
    0.8
}

impl TrapConfig {
    pub fn new(n_ions: usize, gamma_z: f64, n_buffer: usize) -> Self {
        Self { n_ions, gamma_z, gamma_y: 0.8, n_buffer }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 1 {
            return invalid("n_ions must be at least 1");
        }
        if !(self.gamma_z > 0.0 && self.gamma_z < 1.0) {
            return invalid(format!("gamma_z must lie in (0, 1), got {}", self.gamma_z));
        }
        if !(self.gamma_y > 0.0 && self.gamma_y <= 1.0) {
            return invalid(format!("gamma_y must lie in (0, 1], got {}", self.gamma_y));
        }
        if 2 * self.n_buffer >= self.n_ions.max(2) {
            return invalid(format!(
                "2·n_buffer = {} must be smaller than n_ions = {}",
                2 * self.n_buffer,
                self.n_ions
            ));
        }
        Ok(())
    }
}

/// Solved equilibrium geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IonChain {
    pub trap: TrapConfig,
    /// Axial positions in units of `l0`, strictly increasing.
    pub positions: Vec<f64>,
    /// Mean nearest-neighbour spacing of the non-buffer ions.
    pub mean_spacing: f64,
    /// `(l0/d̄)^{3/2}`.
    pub epsilon: f64,
    /// Largest force component at the returned positions.
    pub residual: f64,
}

impl IonChain {
    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    /// Whether ion `i` is one of the excluded end ions.
    pub fn is_buffer(&self, i: usize) -> bool {
        i < self.trap.n_buffer || i >= self.n_ions() - self.trap.n_buffer
    }

    /// Nearest-neighbour spacings between consecutive non-buffer ions.
    pub fn register_spacings(&self) -> Vec<f64> {
        let b = self.trap.n_buffer;
        let n = self.n_ions();
        if n < 2 {
            return Vec::new();
        }
        let (lo, hi) = if n - 2 * b >= 2 { (b, n - b) } else { (0, n) };
        self.positions[lo..hi].windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Relative standard deviation of the register spacings.
    pub fn spacing_rel_std(&self) -> f64 {
        let d = self.register_spacings();
        if d.len() < 2 {
            return 0.0;
        }
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d.len() as f64;
        v.sqrt() / m
    }

    /// Human-readable warnings about the geometry (e.g. inhomogeneous spacing).
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let r = self.spacing_rel_std();
        if r > 0.10 {
            out.push(format!(
                "register spacing relative std-dev {:.1}% exceeds 10%; consider more buffer ions",
                100.0 * r
            ));
        }
        out
    }
}

fn gradient(u: &[f64], gz2: f64) -> DVector<f64> {
    let n = u.len();
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let mut s = gz2 * u[i];
        for j in 0..n {
            if j != i {
                let d = u[i] - u[j];
                s -= d.signum() / (d * d);
            }
        }
        g[i] = s;
    }
    g
}

fn energy(u: &[f64], gz2: f64) -> f64 {
    let mut e = 0.5 * gz2 * u.iter().map(|x| x * x).sum::<f64>();
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            e += 1.0 / (u[j] - u[i]).abs();
        }
    }
    e
}

/// Exact axial Hessian of the trap-plus-Coulomb potential.
pub fn axial_hessian(u: &[f64], gamma_z: f64) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = gamma_z * gamma_z;
        for j in 0..n {
            if j != i {
                let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, j)] = -c;
                diag += c;
            }
        }
        h[(i, i)] = diag;
    }
    h
}

/// Initial guess: quantiles of a parabolic density with the continuum extent.
fn initial_guess(n: usize, gamma_z: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let nf = n as f64;
    let half = (3.0 * nf * (nf.ln() + 1.0) / (4.0 * gamma_z * gamma_z)).cbrt();
    (0..n)
        .map(|i| {
            let q = (i as f64 + 0.5) / nf;
            // invert F(x) = (2 + 3x − x³)/4 on [-1, 1]
            let x = brent_root(|x| (2.0 + 3.0 * x - x * x * x) / 4.0 - q, -1.0, 1.0, 1e-15).unwrap_or(0.0);
            half * x
        })
        .collect()
}

fn newton(mut u: Vec<f64>, gamma_z: f64) -> Result<(Vec<f64>, f64)> {
    let gz2 = gamma_z * gamma_z;
    let n = u.len();
    let mut e = energy(&u, gz2);
    for it in 0..MAX_NEWTON {
        let g = gradient(&u, gz2);
        let res = g.amax();
        if res < 1e-13 {
            return Ok((u, res));
        }
        let h = axial_hessian(&u, gamma_z);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => -&g,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n).map(|i| u[i] + t * step[i]).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let et = energy(&trial, gz2);
                if et <= e + 1e-12 * e.abs() || gradient(&trial, gz2).amax() < res {
                    u = trial;
                    e = et;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: it + 1, residual: res });
        }
    }
    let res = gradient(&u, gz2).amax();
    if res < 1e-12 {
        Ok((u, res))
    } else {
        Err(Error::NoConvergence { iterations: MAX_NEWTON, residual: res })
    }
}

fn symmetrize(u: &mut [f64]) {
    let n = u.len();
    for i in 0..n / 2 {
        let a = 0.5 * (u[n - 1 - i] - u[i]);
        u[i] = -a;
        u[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        u[n / 2] = 0.0;
    }
}

fn finish(trap: TrapConfig, mut u: Vec<f64>) -> Result<IonChain> {
    symmetrize(&mut u);
    let residual = gradient(&u, trap.gamma_z * trap.gamma_z).amax();
    let mut chain = IonChain { trap, positions: u, mean_spacing: f64::INFINITY, epsilon: 0.0, residual };
    let d = chain.register_spacings();
    if !d.is_empty() {
        chain.mean_spacing = d.iter().sum::<f64>() / d.len() as f64;
        chain.epsilon = chain.mean_spacing.powf(-1.5);
    }
    Ok(chain)
}

/// Equilibrium positions of the chain described by `cfg`.
pub fn solve_equilibrium(cfg: &TrapConfig) -> Result<IonChain> {
    cfg.validate()?;
    let (u, _) = newton(initial_guess(cfg.n_ions, cfg.gamma_z), cfg.gamma_z)?;
    finish(*cfg, u)
}

/// Equilibrium starting from a nearby solution, rescaled to the new `γ_z`.
fn solve_from(cfg: &TrapConfig, prev: &IonChain) -> Result<IonChain> {
    let s = (prev.trap.gamma_z / cfg.gamma_z).powf(2.0 / 3.0);
    let guess: Vec<f64> = prev.positions.iter().map(|x| x * s).collect();
    match newton(guess, cfg.gamma_z) {
        Ok((u, _)) => finish(*cfg, u),
        Err(_) => solve_equilibrium(cfg),
    }
}

/// Smallest eigenvalue of the transverse (y) Hessian; negative means zigzag.
pub fn transverse_margin(chain: &IonChain) -> f64 {
    let u = &chain.positions;
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = chain.trap.gamma_y.powi(2);
        for j in 0..n {
            if j != i {
                let c = 1.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, j)] = c;
                diag -= c;
            }
        }
        h[(i, i)] = diag;
    }
    h.symmetric_eigenvalues().min()
}

/// Find `γ_z` such that the register mean spacing yields `target_epsilon`.
pub fn calibrate_gamma_for_epsilon(n_ions: usize, n_buffer: usize, target_epsilon: f64) -> Result<TrapConfig> {
    if !(target_epsilon > 0.0 && target_epsilon < 0.3) {
        return invalid(format!("target epsilon must lie in (0, 0.3), got {target_epsilon}"));
    }
    if n_ions < 2 {
        return invalid("calibration needs at least two ions");
    }
    let mut cfg = TrapConfig::new(n_ions, 1e-3, n_buffer);
    cfg.validate()?;
    // ε grows monotonically with γ_z; walk up until bracketed.
    let mut lo = 1e-4_f64;
    cfg.gamma_z = lo;
    let mut chain = solve_equilibrium(&cfg)?;
    if chain.epsilon > target_epsilon {
        return invalid(format!("target epsilon {target_epsilon} below reachable range"));
    }
    let mut hi = lo;
    let mut stable_hi = lo;
    loop {
        hi *= 1.3;
        if hi >= 1.0 {
            return Err(Error::Unstable(format!(
                "target epsilon {target_epsilon} not reached before gamma_z = 1"
            )));
        }
        cfg.gamma_z = hi;
        let c = solve_from(&cfg, &chain)?;
        if transverse_margin(&c) <= 0.0 {
            // locate the zigzag threshold for the report
            let mut a = stable_hi;
            let mut b = hi;
            for _ in 0..40 {
                let m = (a * b).sqrt();
                cfg.gamma_z = m;
                let cm = solve_from(&cfg, &chain)?;
                if transverse_margin(&cm) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            cfg.gamma_z = a;
            let eps_max = solve_from(&cfg, &chain)?.epsilon;
            return Err(Error::Unstable(format!(
                "target epsilon {target_epsilon} unreachable: zigzag threshold at gamma_z ≈ {a:.6e} (epsilon ≈ {eps_max:.5})"
            )));
        }
        if c.epsilon >= target_epsilon {
            break;
        }
        stable_hi = hi;
        lo = hi;
        chain = c;
    }
    let reference = chain.clone();
    let f = |lg: f64| {
        let mut c = cfg;
        c.gamma_z = lg.exp();
        solve_from(&c, &reference).map(|ch| ch.epsilon - target_epsilon).unwrap_or(f64::NAN)
    };
    let lg = brent_root(f, lo.ln(), hi.ln(), 1e-13)?;
    cfg.gamma_z = lg.exp();
    Ok(cfg)
}

/// `ε = sqrt(e² / (4πε₀ d³ m ω_x²))` for spacing `d_meters`, mass in amu
/// and the transverse trap frequency `freq_x_hz` (cycles per second).
pub fn epsilon_physical(d_meters: f64, mass_amu: f64, freq_x_hz: f64) -> Result<f64> {
    if !(d_meters > 0.0 && mass_amu > 0.0 && freq_x_hz > 0.0) {
        return invalid("epsilon_physical needs positive spacing, mass and frequency");
    }
    let w = 2.0 * std::f64::consts::PI * freq_x_hz;
    let m = mass_amu * AMU;
    Ok((E_CHARGE * E_CHARGE / (4.0 * std::f64::consts::PI * EPS0 * d_meters.powi(3) * m * w * w)).sqrt())
}

/// Length unit `l0` in meters.
pub fn length_unit(mass_amu: f64, freq_x_hz: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_x_hz;
    (E_CHARGE * E_CHARGE / (4.0 * std::f64::consts::PI * EPS0 * mass_amu * AMU * w * w)).cbrt()
}
