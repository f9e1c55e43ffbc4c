// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Segmented-pulse optimal control.
//!
//! Periodic chains: two interleaved gate sets (pinned and unpinned slots) are
//! optimized independently by minimizing `L = L_χ + L_α` over `G` sequences
//! of `S` amplitudes, then evaluated together. Finite chains: each pair gets
//! a minimum-residual sequence from a generalized eigenproblem and detunings
//! are assigned pair by pair to suppress crosstalk.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::BandStructure;
use crate::chain::IonChain;
use crate::error::{invalid, Error, Result};
use crate::gatekernel::{
    evaluate, evaluate_periodic, pair_kernel, segment_g, Drive, GateLayer, GateReport, IonId, ModeSet, PeriodicLayer,
    PulseSchedule,
};
use crate::numerics::{bfgs, levenberg_marquardt, MinResult, C64};
use crate::phonons::{find_pair_modes, normal_modes, Direction, PhononModes, TweezerArray};

/// Form of the displacement penalty `L_α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaCost {
    /// `Σ_i (Σ_n |αᵢⁿ|²)²`.
    #[default]
    Quartic,
    /// `Σ_i |Σ_n αᵢⁿ|⁴`.
    CoherentSum,
}

/// Local minimizer for the periodic cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LocalSolver {
    /// Exact-Hessian Newton with absolute eigenvalues and backtracking.
    #[default]
    Newton,
    Bfgs,
    LevenbergMarquardt,
}

/// Optimizer settings shared by the periodic and finite problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeSpec {
    pub segments: usize,
    /// Independent sequences per set (periodic case).
    pub groups: usize,
    pub tau: f64,
    /// Detuning grid points per scanned window.
    pub mu_points: usize,
    /// Window margin beyond the addressed bands or modes, in units of their splitting.
    pub window_gaps: f64,
    pub restarts: usize,
    /// Restarts per grid point during the coarse scan.
    pub scan_restarts: usize,
    /// Grid points re-optimized with the full restart count.
    pub refine_top: usize,
    /// Scale of random starts (periodic) and hard amplitude cap (finite).
    pub max_rabi: f64,
    pub seed: u64,
    /// Cell range of the pair set `J` in the cost.
    pub opt_cutoff_cells: usize,
    pub eval_cutoff_cells: usize,
    pub n_th: f64,
    pub delta_f_thresh: f64,
    pub iterations: usize,
    /// Pairs on each side entering the crosstalk criterion.
    pub crosstalk_window: usize,
    /// Candidate detunings retained per pair.
    pub max_candidates: usize,
    pub alpha_cost: AlphaCost,
    pub solver: LocalSolver,
    pub max_iter: usize,
    /// Iteration limit during the coarse scan.
    pub scan_max_iter: usize,
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        Self {
            segments: 8,
            groups: 4,
            tau: 1500.0,
            mu_points: 200,
            window_gaps: 1.0,
            restarts: 16,
            scan_restarts: 2,
            refine_top: 4,
            max_rabi: 0.008,
            seed: 1,
            opt_cutoff_cells: 8,
            eval_cutoff_cells: 30,
            n_th: 0.5,
            delta_f_thresh: 1e-3,
            iterations: 5,
            crosstalk_window: 3,
            max_candidates: 32,
            alpha_cost: AlphaCost::Quartic,
            solver: LocalSolver::Newton,
            max_iter: 2000,
            scan_max_iter: 250,
        }
    }
}

impl OptimizeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.segments < 1 {
            return invalid("segments must be at least 1");
        }
        if self.groups < 1 {
            return invalid("groups must be at least 1");
        }
        if self.restarts < 1 || self.scan_restarts < 1 {
            return invalid("restarts must be at least 1");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return invalid("tau must be positive");
        }
        if self.mu_points < 1 {
            return invalid("mu_points must be at least 1");
        }
        if !(self.max_rabi > 0.0) || !(self.window_gaps >= 0.0) {
            return invalid("max_rabi must be positive and window_gaps non-negative");
        }
        if self.opt_cutoff_cells < 1 || self.eval_cutoff_cells < 1 {
            return invalid("cutoffs must be at least one cell");
        }
        if !(self.n_th >= 0.0) || !(self.delta_f_thresh > 0.0) {
            return invalid("n_th must be non-negative and delta_f_thresh positive");
        }
        if self.max_candidates < 1 {
            return invalid("max_candidates must be at least 1");
        }
        Ok(())
    }
}

/// Cost at the optimum and `min L` along the scanned detunings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub l: f64,
    pub l_alpha: f64,
    pub l_chi: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub l: f64,
}

/// `F_{s,s'} = sin(πs(s'−½)/S)/√S`, `s, s' = 1..S`.
pub fn sine_matrix(s: usize) -> DMatrix<f64> {
    let sf = s as f64;
    DMatrix::from_fn(s, s, |i, j| (PI * (i + 1) as f64 * (j as f64 + 0.5) / sf).sin() / sf.sqrt())
}

pub fn sine_transform(r: &[f64]) -> Vec<f64> {
    (sine_matrix(r.len()) * DVector::from_column_slice(r)).as_slice().to_vec()
}

/// Inverse of [`sine_transform`]: `F⁻¹ = Fᵀ·diag(2, …, 2, 1)`.
pub fn inverse_sine_transform(t: &[f64]) -> Vec<f64> {
    let s = t.len();
    let d = DVector::from_fn(s, |i, _| if i + 1 == s { t[i] } else { 2.0 * t[i] });
    (sine_matrix(s).transpose() * d).as_slice().to_vec()
}

/// Fraction of spectral weight on odd `s` (1-based).
pub fn odd_fraction(t: &[f64]) -> f64 {
    let tot: f64 = t.iter().map(|x| x * x).sum();
    if tot == 0.0 {
        return 0.0;
    }
    t.iter().step_by(2).map(|x| x * x).sum::<f64>() / tot
}

// ---------------------------------------------------------------------------
// periodic chains

#[derive(Debug, Clone)]
struct ChiTerm {
    qa: usize,
    qb: usize,
    x: usize,
    target: f64,
}

/// Quadratic forms of one gate set at fixed `μ`.
#[derive(Debug, Clone)]
struct SetProblem {
    s: usize,
    g: usize,
    /// Row-major `S×S` blocks: `[phi_0, phi_1, X^{d,u,u'}…]`.
    mats: Vec<Vec<f64>>,
    chi_terms: Vec<ChiTerm>,
    alpha_terms: Vec<(usize, usize)>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn quad(m: &[f64], a: &[f64], b: &[f64], mb: &mut [f64]) -> f64 {
    let s = a.len();
    let mut acc = 0.0;
    for i in 0..s {
        let row = &m[i * s..(i + 1) * s];
        let v: f64 = row.iter().zip(b).map(|(x, y)| x * y).sum();
        mb[i] = v;
        acc += a[i] * v;
    }
    acc
}

impl SetProblem {
    fn build(bands: &BandStructure, slots: [usize; 2], mu: f64, spec: &OptimizeSpec) -> Self {
        let (s, g, p) = (spec.segments, spec.groups, bands.p() as i64);
        let dmax = spec.opt_cutoff_cells as i64;
        let nm = bands.n_modes();
        let per_mode: Vec<(Vec<C64>, DMatrix<f64>)> = (0..nm)
            .map(|m| {
                let nu = bands.freq(m);
                let gs = (0..s).map(|k| segment_g(mu, nu, k, s, spec.tau)).collect();
                (gs, pair_kernel(mu, spec.tau, s, mu, spec.tau, s, nu))
            })
            .collect();
        let mut mats = Vec::new();
        for &slot in &slots {
            let mut phi = DMatrix::<f64>::zeros(s, s);
            match spec.alpha_cost {
                AlphaCost::Quartic => {
                    for (m, (gs, _)) in per_mode.iter().enumerate() {
                        let w = bands.pair_weight(m, slot as IonId, slot as IonId) / bands.freq(m);
                        for x in 0..s {
                            for y in 0..s {
                                phi[(x, y)] += w * (gs[x] * gs[y].conj()).re;
                            }
                        }
                    }
                }
                AlphaCost::CoherentSum => {
                    let mut v = vec![C64::new(0.0, 0.0); s];
                    for (m, (gs, _)) in per_mode.iter().enumerate() {
                        let (kk, n) = (m / bands.p(), m % bands.p());
                        let c: f64 = (0..2).map(|lam| bands.amplitude(kk, n, lam, 0, slot)).sum::<f64>() / bands.freq(m).sqrt();
                        for x in 0..s {
                            v[x] += c * gs[x];
                        }
                    }
                    for x in 0..s {
                        for y in 0..s {
                            phi[(x, y)] = (v[x] * v[y].conj()).re;
                        }
                    }
                }
            }
            mats.push(to_rows(&phi));
        }
        let mut xidx = HashMap::new();
        let mut chi_terms = Vec::new();
        for l in 0..g as i64 {
            for (u, &su) in slots.iter().enumerate() {
                let ia = l * p + su as i64;
                for lp in l..=l + dmax {
                    for (up, &sup) in slots.iter().enumerate() {
                        let ib = lp * p + sup as i64;
                        if ib <= ia {
                            continue;
                        }
                        let d = lp - l;
                        let key = (d, u, up);
                        let x = *xidx.entry(key).or_insert_with(|| {
                            let mut xm = DMatrix::<f64>::zeros(s, s);
                            for (m, (_, f)) in per_mode.iter().enumerate() {
                                let w = bands.pair_weight(m, su as IonId, d * p + sup as IonId) / bands.freq(m);
                                xm += w * f;
                            }
                            mats.push(to_rows(&xm));
                            mats.len() - 1
                        });
                        let target = if d == 0 { -FRAC_PI_4 } else { 0.0 };
                        chi_terms.push(ChiTerm { qa: l as usize, qb: lp.rem_euclid(g as i64) as usize, x, target });
                    }
                }
            }
        }
        let alpha_terms = (0..g).flat_map(|q| (0..2).map(move |u| (q, u))).collect();
        SetProblem { s, g, mats, chi_terms, alpha_terms }
    }

    fn n_vars(&self) -> usize {
        self.s * self.g
    }

    /// `(L_α, L_χ)` and optionally `∂L/∂R`.
    fn cost(&self, r: &[f64], mut grad: Option<&mut [f64]>) -> (f64, f64) {
        let s = self.s;
        let mut mb = vec![0.0; s];
        if let Some(gr) = grad.as_deref_mut() {
            gr.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut l_chi = 0.0;
        for t in &self.chi_terms {
            let ra = &r[t.qa * s..(t.qa + 1) * s];
            let rb = &r[t.qb * s..(t.qb + 1) * s];
            let m = &self.mats[t.x];
            let chi = quad(m, ra, rb, &mut mb);
            let e = chi - t.target;
            l_chi += e * e;
            if let Some(gr) = grad.as_deref_mut() {
                for i in 0..s {
                    gr[t.qa * s + i] += 2.0 * e * mb[i];
                }
                for j in 0..s {
                    let mut v = 0.0;
                    for i in 0..s {
                        v += m[i * s + j] * ra[i];
                    }
                    gr[t.qb * s + j] += 2.0 * e * v;
                }
            }
        }
        let mut l_alpha = 0.0;
        for &(q, u) in &self.alpha_terms {
            let rq = &r[q * s..(q + 1) * s];
            let a = quad(&self.mats[u], rq, rq, &mut mb);
            l_alpha += a * a;
            if let Some(gr) = grad.as_deref_mut() {
                for i in 0..s {
                    gr[q * s + i] += 4.0 * a * mb[i];
                }
            }
        }
        (l_alpha, l_chi)
    }

    /// Residuals `(χ_J − χ⁰_J, RᵀΦR)` and their Jacobian.
    fn residuals(&self, r: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let s = self.s;
        let nt = self.chi_terms.len();
        let mut res = DVector::zeros(nt + self.alpha_terms.len());
        let mut jac = DMatrix::zeros(res.len(), self.n_vars());
        let mut mb = vec![0.0; s];
        for (row, t) in self.chi_terms.iter().enumerate() {
            let ra = &r[t.qa * s..(t.qa + 1) * s];
            let rb = &r[t.qb * s..(t.qb + 1) * s];
            let m = &self.mats[t.x];
            res[row] = quad(m, ra, rb, &mut mb) - t.target;
            for i in 0..s {
                jac[(row, t.qa * s + i)] += mb[i];
            }
            for j in 0..s {
                let v: f64 = (0..s).map(|i| m[i * s + j] * ra[i]).sum();
                jac[(row, t.qb * s + j)] += v;
            }
        }
        for (k, &(q, u)) in self.alpha_terms.iter().enumerate() {
            let row = nt + k;
            let rq = &r[q * s..(q + 1) * s];
            res[row] = quad(&self.mats[u], rq, rq, &mut mb);
            for i in 0..s {
                jac[(row, q * s + i)] = 2.0 * mb[i];
            }
        }
        (res, jac)
    }

    /// Exact Hessian of `L`.
    fn hessian(&self, r: &[f64]) -> DMatrix<f64> {
        let s = self.s;
        let (res, jac) = self.residuals(r);
        let mut h = 2.0 * jac.transpose() * &jac;
        for (row, t) in self.chi_terms.iter().enumerate() {
            let e2 = 2.0 * res[row];
            let m = &self.mats[t.x];
            for i in 0..s {
                for j in 0..s {
                    h[(t.qa * s + i, t.qb * s + j)] += e2 * m[i * s + j];
                    h[(t.qb * s + j, t.qa * s + i)] += e2 * m[i * s + j];
                }
            }
        }
        let nt = self.chi_terms.len();
        for (k, &(q, u)) in self.alpha_terms.iter().enumerate() {
            let a2 = 2.0 * res[nt + k];
            let m = &self.mats[u];
            for i in 0..s {
                for j in 0..s {
                    h[(q * s + i, q * s + j)] += a2 * (m[i * s + j] + m[j * s + i]);
                }
            }
        }
        h
    }

    fn newton(&self, x0: DVector<f64>, c: f64, max_iter: usize) -> MinResult {
        let n = x0.len();
        let mut x = x0;
        let mut gr = vec![0.0; n];
        let eval = |x: &DVector<f64>, gr: &mut Vec<f64>| -> f64 {
            let r: Vec<f64> = x.iter().map(|v| v * c).collect();
            let (la, lc) = self.cost(&r, Some(gr));
            la + lc
        };
        let mut f = eval(&x, &mut gr);
        let mut g = DVector::from_iterator(n, gr.iter().map(|v| v * c));
        let mut it = 0;
        let mut stall = 0;
        while it < max_iter && g.norm() > 1e-10 * c {
            it += 1;
            let r: Vec<f64> = x.iter().map(|v| v * c).collect();
            let h = self.hessian(&r) * (c * c);
            let eig = SymmetricEigen::new(h);
            let lmax = eig.eigenvalues.amax().max(1e-300);
            let qg = eig.eigenvectors.transpose() * &g;
            let reg = g.norm().sqrt() * lmax.sqrt() * 1e-3;
            let step_q = DVector::from_fn(n, |i, _| -qg[i] / (eig.eigenvalues[i].abs() + reg).max(1e-12 * lmax));
            let dir = &eig.eigenvectors * step_q;
            let slope = dir.dot(&g);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..50 {
                let xt = &x + t * &dir;
                let ft = eval(&xt, &mut gr);
                if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                    stall = if f - ft <= 1e-13 * f { stall + 1 } else { 0 };
                    x = xt;
                    f = ft;
                    g = DVector::from_iterator(n, gr.iter().map(|v| v * c));
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted || stall >= 5 {
                break;
            }
        }
        MinResult { grad_norm: g.norm(), x, f, iterations: it }
    }

    /// Minimization in scaled variables `x = R/c`.
    fn minimize(&self, r0: &[f64], c: f64, solver: LocalSolver, max_iter: usize) -> (Vec<f64>, f64, f64, usize) {
        let n = self.n_vars();
        let x0 = DVector::from_iterator(n, r0.iter().map(|v| v / c));
        let res = match solver {
            LocalSolver::Newton => self.newton(x0, c, max_iter),
            LocalSolver::LevenbergMarquardt => levenberg_marquardt(
                |x| {
                    let r: Vec<f64> = x.iter().map(|v| v * c).collect();
                    let (res, jac) = self.residuals(&r);
                    (res, jac * c)
                },
                x0,
                max_iter,
                1e-16,
            ),
            LocalSolver::Bfgs => {
                let mut gr = vec![0.0; n];
                bfgs(
                    |x, g| {
                        let r: Vec<f64> = x.iter().map(|v| v * c).collect();
                        let (la, lc) = self.cost(&r, Some(&mut gr));
                        for i in 0..n {
                            g[i] = gr[i] * c;
                        }
                        la + lc
                    },
                    x0,
                    max_iter,
                    1e-15,
                )
            }
        };
        let r: Vec<f64> = res.x.iter().map(|v| v * c).collect();
        (r, res.f, res.grad_norm / c, res.iterations)
    }
}

fn substream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b);
    rng
}

fn best_of_restarts(prob: &SetProblem, spec: &OptimizeSpec, n: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64, f64, usize) {
    let mut best: Option<(Vec<f64>, f64, f64, usize)> = None;
    for _ in 0..n {
        let r0: Vec<f64> = (0..prob.n_vars()).map(|_| rng.random_range(-1.0..1.0) * spec.max_rabi).collect();
        let cand = prob.minimize(&r0, spec.max_rabi, spec.solver, max_iter);
        if best.as_ref().is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    best.unwrap()
}

/// Optimum of one gate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetOptimum {
    pub slots: [usize; 2],
    pub mu: f64,
    pub window: (f64, f64),
    /// `amps[q]` is the sequence used in cells `l ≡ q (mod G)`.
    pub amps: Vec<Vec<f64>>,
    pub sine: Vec<Vec<f64>>,
    pub odd_fraction: Vec<f64>,
    pub cost: CostBreakdown,
    pub converged: bool,
}

impl SetOptimum {
    /// CSV rows `sequence, segment, amplitude, sine_component`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["sequence", "segment", "amplitude", "sine_component"])?;
        for (q, (a, t)) in self.amps.iter().zip(&self.sine).enumerate() {
            for s in 0..a.len() {
                wr.write_record([q.to_string(), (s + 1).to_string(), format!("{:.12e}", a[s]), format!("{:.12e}", t[s])])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_curve_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["mu", "cost"])?;
        for c in &self.cost.curve {
            wr.write_record([format!("{:.12e}", c.mu), format!("{:.12e}", c.l)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfiniteOptimization {
    pub sets: Vec<SetOptimum>,
    pub layer: PeriodicLayer,
    pub report: GateReport,
    pub converged: bool,
    pub alpha_cost: AlphaCost,
}

/// Detuning window around the COM and stretch bands of a slot pair.
pub fn set_window(bands: &BandStructure, slots: [usize; 2], margin: f64) -> (f64, f64) {
    let (c, st) = bands.pair_bands(slots[0], slots[1]);
    let lo = |n: usize| bands.freqs.iter().map(|f| f[n]).fold(f64::INFINITY, f64::min);
    let hi = |n: usize| bands.freqs.iter().map(|f| f[n]).fold(f64::NEG_INFINITY, f64::max);
    let gap = (bands.band_center(c) - bands.band_center(st)).abs();
    (lo(c).min(lo(st)) - margin * gap, hi(c).max(hi(st)) + margin * gap)
}

/// Best of `restarts` local minimizations at fixed `μ`: `(R, L, ‖∇L‖, iterations)`.
pub fn optimize_set_at(
    bands: &BandStructure,
    slots: [usize; 2],
    mu: f64,
    spec: &OptimizeSpec,
    restarts: usize,
    stream: u64,
) -> (Vec<f64>, f64, f64, usize) {
    let prob = SetProblem::build(bands, slots, mu, spec);
    let mut rng = substream(spec.seed, u64::MAX, stream);
    best_of_restarts(&prob, spec, restarts.max(1), spec.max_iter, &mut rng)
}

/// Scan, restart and refine one set of slots.
pub fn optimize_set(bands: &BandStructure, slots: [usize; 2], spec: &OptimizeSpec, set_id: u64) -> Result<SetOptimum> {
    spec.validate()?;
    let p = bands.p();
    if slots[0] >= p || slots[1] >= p || slots[0] == slots[1] {
        return invalid(format!("bad slots {slots:?} for p = {p}"));
    }
    let window = set_window(bands, slots, spec.window_gaps);
    let n = spec.mu_points;
    let mus: Vec<f64> = if n == 1 {
        vec![0.5 * (window.0 + window.1)]
    } else {
        (0..n).map(|j| window.0 + (window.1 - window.0) * j as f64 / (n - 1) as f64).collect()
    };
    let scan: Vec<(f64, f64)> = mus
        .par_iter()
        .enumerate()
        .map(|(j, &mu)| {
            let prob = SetProblem::build(bands, slots, mu, spec);
            let mut rng = substream(spec.seed, set_id, j as u64);
            let (_, l, _, _) = best_of_restarts(&prob, spec, spec.scan_restarts, spec.scan_max_iter, &mut rng);
            (mu, l)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scan[a].1.total_cmp(&scan[b].1));
    let top: Vec<usize> = order.into_iter().take(spec.refine_top.max(1)).collect();
    let refined: Vec<(usize, Vec<f64>, f64, f64, usize)> = top
        .par_iter()
        .map(|&j| {
            let prob = SetProblem::build(bands, slots, mus[j], spec);
            let mut rng = substream(spec.seed, set_id, (n + j) as u64);
            let (r, l, gn, it) = best_of_restarts(&prob, spec, spec.restarts, spec.max_iter, &mut rng);
            (j, r, l, gn, it)
        })
        .collect();
    let best = refined.iter().min_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    let (j, r, grad_norm, iterations) = (best.0, best.1.clone(), best.3, best.4);
    let prob = SetProblem::build(bands, slots, mus[j], spec);
    let (l_alpha, l_chi) = prob.cost(&r, None);
    let mut curve: Vec<CurvePoint> = scan.iter().map(|&(mu, l)| CurvePoint { mu, l }).collect();
    for &(jj, _, l, _, _) in &refined {
        curve[jj].l = curve[jj].l.min(l);
    }
    let s = spec.segments;
    let amps: Vec<Vec<f64>> = (0..spec.groups).map(|q| r[q * s..(q + 1) * s].to_vec()).collect();
    let sine: Vec<Vec<f64>> = amps.iter().map(|a| sine_transform(a)).collect();
    let odd = sine.iter().map(|t| odd_fraction(t)).collect();
    let l = l_alpha + l_chi;
    Ok(SetOptimum {
        slots,
        mu: mus[j],
        window,
        amps,
        sine,
        odd_fraction: odd,
        cost: CostBreakdown { l, l_alpha, l_chi, grad_norm, iterations, curve },
        converged: l < 1e-8,
    })
}

/// Optimize the pinned and unpinned sets independently and evaluate them
/// as one simultaneous layer.
pub fn optimize_infinite(bands: &BandStructure, spec: &OptimizeSpec) -> Result<InfiniteOptimization> {
    spec.validate()?;
    let p = bands.p();
    if p % 2 != 0 || p < 4 {
        return invalid("periodic optimization needs an even cell of at least 4 slots");
    }
    let pinned = &bands.cfg.pinned_slots;
    if pinned.len() != 2 {
        return invalid("periodic optimization needs exactly two pinned slots per cell");
    }
    let free: Vec<usize> = (0..p).filter(|s| !pinned.contains(s)).collect();
    let sets_slots = [[pinned[0], pinned[1]], [free[0], free[1]]];
    let sets: Vec<SetOptimum> =
        sets_slots.iter().enumerate().map(|(k, &sl)| optimize_set(bands, sl, spec, k as u64)).collect::<Result<_>>()?;
    let layer = combined_layer(&sets, p, spec);
    let report = evaluate_periodic(bands, &layer, (spec.eval_cutoff_cells * p) as i64, spec.n_th)?;
    let converged = sets.iter().all(|s| s.converged);
    Ok(InfiniteOptimization { sets, layer, report, converged, alpha_cost: spec.alpha_cost })
}

fn combined_layer(sets: &[SetOptimum], p: usize, spec: &OptimizeSpec) -> PeriodicLayer {
    let mut drives = Vec::new();
    let mut pairs = Vec::new();
    for l in 0..spec.groups {
        for set in sets {
            let base = (l * p) as IonId;
            for &slot in &set.slots {
                drives.push(Drive { ion: base + slot as IonId, mu: set.mu, amps: set.amps[l].clone(), window: spec.tau });
            }
            pairs.push((base + set.slots[0] as IonId, base + set.slots[1] as IonId));
        }
    }
    PeriodicLayer {
        period: (p * spec.groups) as i64,
        schedule: PulseSchedule { duration: spec.tau, segments: spec.segments, drives },
        layer: GateLayer::uniform(pairs, -FRAC_PI_4),
    }
}

// ---------------------------------------------------------------------------
// finite chains

/// Residual form `Φ` (`R_aᵀΦR_a` is the pair infidelity with `R_b = ±R_a`)
/// and coupling form `X` (`χ_ab = RᵀXR`) of one pair at detuning `μ`.
#[derive(Debug, Clone)]
pub struct PairForms {
    pub phi: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

pub fn pair_forms(modes: &PhononModes, pair: (usize, usize), mu: f64, segments: usize, tau: f64, n_th: f64) -> PairForms {
    let (a, b) = pair;
    let s = segments;
    let mut phi = DMatrix::zeros(s, s);
    let mut x = DMatrix::zeros(s, s);
    let pref = 0.8 * (2.0 * n_th + 1.0);
    for m in 0..modes.n_modes() {
        let nu = modes.freqs[m];
        let (ma, mb) = (modes.vectors[(a, m)], modes.vectors[(b, m)]);
        let gs: Vec<C64> = (0..s).map(|k| segment_g(mu, nu, k, s, tau)).collect();
        let w = pref * (ma * ma + mb * mb) / nu;
        for i in 0..s {
            for j in 0..s {
                phi[(i, j)] += w * (gs[i] * gs[j].conj()).re;
            }
        }
        x += (ma * mb / nu) * pair_kernel(mu, tau, s, mu, tau, s, nu);
    }
    let xs = 0.5 * (&x + x.transpose());
    PairForms { phi, x: xs }
}

/// Optimized sequence of one pair at fixed detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOptimum {
    pub mu: f64,
    pub amps_a: Vec<f64>,
    pub amps_b: Vec<f64>,
    pub delta_f: f64,
    pub chi: f64,
    pub max_amplitude: f64,
    pub feasible: bool,
    /// The amplitude cap was active.
    pub capped: bool,
}

/// Generalized eigenvector of `X` relative to `Φ + κI` with the largest
/// `|RᵀXR|/Rᵀ(Φ+κI)R`, scaled to `|RᵀXR| = π/4`.
fn gen_eig(phi: &DMatrix<f64>, x: &DMatrix<f64>, kappa: f64) -> Option<DVector<f64>> {
    let s = phi.nrows();
    let scale = phi.trace().abs() / s as f64;
    let mut reg = phi.clone();
    for i in 0..s {
        reg[(i, i)] += kappa + 1e-14 * scale;
    }
    let l = Cholesky::new(reg)?.l();
    let li = l.clone().solve_lower_triangular(&DMatrix::identity(s, s))?;
    let y = &li * x * li.transpose();
    let eig = SymmetricEigen::new(0.5 * (&y + y.transpose()));
    let j = eig.eigenvalues.iamax();
    if eig.eigenvalues[j].abs() == 0.0 {
        return None;
    }
    let r = li.transpose() * eig.eigenvectors.column(j);
    let c = r.dot(&(x * &r));
    Some(r * (FRAC_PI_4 / c.abs()).sqrt())
}

/// Minimize `RᵀΦR` with `σRᵀXR = π/4` and `|Rˢ| ≤ cap` through
/// `R = cap·sin(y)` and an augmented Lagrangian.
fn capped_refine(phi: &DMatrix<f64>, x: &DMatrix<f64>, r0: &DVector<f64>, cap: f64) -> Option<DVector<f64>> {
    let s = r0.len();
    let sigma = r0.dot(&(x * r0)).signum();
    let f0 = r0.dot(&(phi * r0)).max(1e-300);
    let y0 = DVector::from_iterator(s, r0.iter().map(|v| (v / cap).clamp(-0.98, 0.98).asin()));
    let mut y = y0;
    let (mut lam, mut rho) = (0.0, 10.0);
    let mut h_prev = f64::INFINITY;
    for _ in 0..40 {
        let res = bfgs(
            |yv, g| {
                let r = yv.map(|v| cap * v.sin());
                let pr = phi * &r;
                let xr = x * &r;
                let h = (sigma * r.dot(&xr) - FRAC_PI_4) / FRAC_PI_4;
                let coef = -lam + rho * h;
                let dr = 2.0 * &pr / f0 + coef * 2.0 * sigma * &xr / FRAC_PI_4;
                for i in 0..s {
                    g[i] = dr[i] * cap * yv[i].cos();
                }
                r.dot(&pr) / f0 - lam * h + 0.5 * rho * h * h
            },
            y.clone(),
            400,
            1e-12,
        );
        y = res.x;
        let r = y.map(|v| cap * v.sin());
        let h = (sigma * r.dot(&(x * &r)) - FRAC_PI_4) / FRAC_PI_4;
        if h.abs() < 1e-12 {
            break;
        }
        lam -= rho * h;
        if h.abs() > 0.25 * h_prev {
            rho *= 10.0;
        }
        h_prev = h.abs();
    }
    let mut r = y.map(|v| cap * v.sin());
    let c = sigma * r.dot(&(x * &r));
    if c <= 0.0 {
        return None;
    }
    r *= (FRAC_PI_4 / c).sqrt();
    (r.amax() <= cap * (1.0 + 1e-9)).then_some(r)
}

/// Minimum-residual sequence for one pair with a shared sequence on both
/// ions (sign-flipped on the second ion if needed for `χ = −π/4`).
pub fn optimize_pair_wu(
    modes: &PhononModes,
    pair: (usize, usize),
    mu: f64,
    segments: usize,
    tau: f64,
    n_th: f64,
    cap: Option<f64>,
) -> Result<PairOptimum> {
    if segments < 1 || !(tau > 0.0) {
        return invalid("segments must be at least 1 and tau positive");
    }
    let n = modes.n_modes();
    if pair.0 >= n || pair.1 >= n || pair.0 == pair.1 {
        return invalid(format!("bad pair {pair:?}"));
    }
    let forms = pair_forms(modes, pair, mu, segments, tau, n_th);
    Ok(solve_pair(&forms, mu, cap))
}

fn solve_pair(forms: &PairForms, mu: f64, cap: Option<f64>) -> PairOptimum {
    let (phi, x) = (&forms.phi, &forms.x);
    let s = phi.nrows();
    let infeasible = PairOptimum {
        mu,
        amps_a: vec![0.0; s],
        amps_b: vec![0.0; s],
        delta_f: f64::INFINITY,
        chi: 0.0,
        max_amplitude: 0.0,
        feasible: false,
        capped: false,
    };
    let Some(mut r) = gen_eig(phi, x, 0.0) else { return infeasible };
    let mut capped = false;
    if let Some(cap) = cap {
        if r.amax() > cap {
            capped = true;
            let scale = phi.symmetric_eigenvalues().max().abs().max(1e-300);
            let (mut lo, mut hi) = (-16.0, 2.0);
            let sol = |t: f64| gen_eig(phi, x, 10f64.powf(t) * scale);
            match sol(hi) {
                Some(rh) if rh.amax() <= cap => {
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        match sol(mid) {
                            Some(rm) if rm.amax() <= cap => hi = mid,
                            _ => lo = mid,
                        }
                    }
                    let ridge = sol(hi).unwrap();
                    let refined = capped_refine(phi, x, &ridge, cap);
                    r = match refined {
                        Some(q) if q.dot(&(phi * &q)) < ridge.dot(&(phi * &ridge)) => q,
                        _ => ridge,
                    };
                }
                _ => match capped_refine(phi, x, &(&r * (cap / r.amax())), cap) {
                    Some(q) => r = q,
                    None => return infeasible,
                },
            }
        }
    }
    let chi_raw = r.dot(&(x * &r));
    let flip = if chi_raw > 0.0 { -1.0 } else { 1.0 };
    let amps_a: Vec<f64> = r.iter().copied().collect();
    let amps_b: Vec<f64> = r.iter().map(|v| flip * v).collect();
    PairOptimum {
        mu,
        delta_f: r.dot(&(phi * &r)),
        chi: flip * chi_raw,
        max_amplitude: r.amax(),
        amps_a,
        amps_b,
        feasible: true,
        capped,
    }
}

/// Detuning chosen for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAssignment {
    pub a: usize,
    pub b: usize,
    pub window: (f64, f64),
    pub n_candidates: usize,
    /// At least one candidate met the infidelity threshold.
    pub below_thresh: bool,
    pub choice: PairOptimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteOptimization {
    pub pairs: Vec<PairAssignment>,
    pub schedule: PulseSchedule,
    pub layer: GateLayer,
    pub report: GateReport,
    /// Number of pairs whose detuning changed in each pass.
    pub changes: Vec<usize>,
}

/// Build modes and run [`assign_detunings_on`].
/// Every register ion belongs to a target pair; within each cell of `p` ions
/// only the first pair is pinned, with the frequency of `nu0_of_cell(cell)`.
pub fn optimize_layout(chain: &IonChain, p: usize, nu0_of_cell: impl Fn(usize) -> f64) -> Result<(TweezerArray, Vec<(usize, usize)>)> {
    if p < 4 || p % 2 != 0 {
        return invalid("optimized finite layers need an even cell size of at least 4");
    }
    let n = chain.n_ions();
    let nb = chain.trap.n_buffer;
    let mut tw = TweezerArray::none(n);
    let mut pairs = Vec::new();
    let mut first = nb;
    while first + 1 < n - nb {
        let off = first - nb;
        if off % p == 0 {
            let v = nu0_of_cell(off / p);
            tw.nu0[first] = v;
            tw.nu0[first + 1] = v;
        }
        pairs.push((first, first + 1));
        first += 2;
    }
    if pairs.is_empty() {
        return invalid("register too short for one pair");
    }
    Ok((tw, pairs))
}

pub fn assign_detunings_iterative(
    chain: &IonChain,
    tw: &TweezerArray,
    pairs: &[(usize, usize)],
    spec: &OptimizeSpec,
) -> Result<FiniteOptimization> {
    let modes = normal_modes(chain, tw, Direction::X)?;
    assign_detunings_on(&modes, chain, pairs, spec)
}

fn candidate_set(modes: &PhononModes, pair: (usize, usize), spec: &OptimizeSpec) -> Result<(Vec<PairOptimum>, (f64, f64), bool)> {
    let lp = find_pair_modes(modes, pair.0, pair.1, 0.0)?;
    let (nc, ns) = (modes.freqs[lp.com], modes.freqs[lp.stretch]);
    let (lo, hi) = (nc.min(ns), nc.max(ns));
    let gap = (hi - lo).max(1e-6);
    let window = (lo - spec.window_gaps * gap, hi + spec.window_gaps * gap);
    let n = spec.mu_points.max(2);
    let all: Vec<PairOptimum> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mu = window.0 + (window.1 - window.0) * j as f64 / (n - 1) as f64;
            let forms = pair_forms(modes, pair, mu, spec.segments, spec.tau, spec.n_th);
            solve_pair(&forms, mu, Some(spec.max_rabi))
        })
        .filter(|o| o.feasible)
        .collect();
    if all.is_empty() {
        return Err(Error::Infeasible(format!("pair {pair:?}: no feasible detuning")));
    }
    let good: Vec<PairOptimum> = all.iter().filter(|o| o.delta_f < spec.delta_f_thresh).cloned().collect();
    if good.is_empty() {
        let best = all.into_iter().min_by(|a, b| a.delta_f.total_cmp(&b.delta_f)).unwrap();
        return Ok((vec![best], window, false));
    }
    let k = spec.max_candidates;
    let picked = if good.len() <= k {
        good
    } else {
        (0..k).map(|i| good[i * (good.len() - 1) / (k - 1).max(1)].clone()).collect()
    };
    Ok((picked, window, true))
}

fn pair_crosstalk(modes: &PhononModes, pa: (usize, usize), a: &PairOptimum, pb: (usize, usize), b: &PairOptimum, spec: &OptimizeSpec) -> f64 {
    let s = spec.segments;
    let mut chi = [0.0f64; 4];
    let ra = [&a.amps_a, &a.amps_b];
    let rb = [&b.amps_a, &b.amps_b];
    let ia = [pa.0, pa.1];
    let ib = [pb.0, pb.1];
    for m in 0..modes.n_modes() {
        let nu = modes.freqs[m];
        let f = pair_kernel(a.mu, spec.tau, s, b.mu, spec.tau, s, nu);
        for u in 0..2 {
            for v in 0..2 {
                let w = modes.vectors[(ia[u], m)] * modes.vectors[(ib[v], m)] / nu;
                let mut acc = 0.0;
                for x in 0..s {
                    for y in 0..s {
                        acc += ra[u][x] * f[(x, y)] * rb[v][y];
                    }
                }
                chi[2 * u + v] += w * acc;
            }
        }
    }
    chi.iter().map(|c| c.abs()).sum()
}

/// Per-pair candidate detunings followed by left-to-right crosstalk-aware
/// assignment passes.
pub fn assign_detunings_on(
    modes: &PhononModes,
    chain: &IonChain,
    pairs: &[(usize, usize)],
    spec: &OptimizeSpec,
) -> Result<FiniteOptimization> {
    spec.validate()?;
    if pairs.is_empty() {
        return invalid("no target pairs");
    }
    let cands: Vec<(Vec<PairOptimum>, (f64, f64), bool)> =
        pairs.iter().map(|&p| candidate_set(modes, p, spec)).collect::<Result<_>>()?;
    let np = pairs.len();
    let min_df = |p: usize| {
        (0..cands[p].0.len()).min_by(|&x, &y| cands[p].0[x].delta_f.total_cmp(&cands[p].0[y].delta_f)).unwrap()
    };
    let mut choice: Vec<Option<usize>> = vec![None; np];
    let mut memo: HashMap<(usize, usize, usize, usize), f64> = HashMap::new();
    let mut changes = Vec::new();
    let w = spec.crosstalk_window;
    for it in 0..spec.iterations.max(1) {
        let mut changed = 0;
        for p in 0..np {
            let fixed: Vec<usize> =
                (p.saturating_sub(w)..(p + w + 1).min(np)).filter(|&q| q != p && choice[q].is_some()).collect();
            let pick = if !cands[p].2 || fixed.is_empty() || (it == 0 && p == 0) {
                min_df(p)
            } else {
                let missing: Vec<(usize, usize, usize, usize)> = (0..cands[p].0.len())
                    .flat_map(|c| fixed.iter().map(move |&q| (p, c, q, 0)))
                    .map(|(p, c, q, _)| (p, c, q, choice[q].unwrap()))
                    .filter(|k| !memo.contains_key(&norm_key(*k)))
                    .collect();
                let vals: Vec<((usize, usize, usize, usize), f64)> = missing
                    .par_iter()
                    .map(|&(p, c, q, d)| {
                        ((p, c, q, d), pair_crosstalk(modes, pairs[p], &cands[p].0[c], pairs[q], &cands[q].0[d], spec))
                    })
                    .collect();
                for (k, v) in vals {
                    memo.insert(norm_key(k), v);
                }
                let score = |c: usize| -> f64 { fixed.iter().map(|&q| memo[&norm_key((p, c, q, choice[q].unwrap()))]).sum() };
                (0..cands[p].0.len()).min_by(|&x, &y| score(x).total_cmp(&score(y))).unwrap()
            };
            if choice[p] != Some(pick) {
                changed += 1;
            }
            choice[p] = Some(pick);
        }
        changes.push(changed);
        if it > 0 && changed == 0 {
            break;
        }
    }
    let assigned: Vec<PairAssignment> = (0..np)
        .map(|p| PairAssignment {
            a: pairs[p].0,
            b: pairs[p].1,
            window: cands[p].1,
            n_candidates: cands[p].0.len(),
            below_thresh: cands[p].2,
            choice: cands[p].0[choice[p].unwrap()].clone(),
        })
        .collect();
    let mut drives = Vec::with_capacity(2 * np);
    for pa in &assigned {
        drives.push(Drive { ion: pa.a as IonId, mu: pa.choice.mu, amps: pa.choice.amps_a.clone(), window: spec.tau });
        drives.push(Drive { ion: pa.b as IonId, mu: pa.choice.mu, amps: pa.choice.amps_b.clone(), window: spec.tau });
    }
    let schedule = PulseSchedule { duration: spec.tau, segments: spec.segments, drives };
    let mut layer = GateLayer::uniform(pairs.iter().map(|&(a, b)| (a as IonId, b as IonId)).collect(), -FRAC_PI_4);
    layer.excluded = (0..chain.n_ions()).filter(|&i| chain.is_buffer(i)).map(|i| i as IonId).collect();
    let report = evaluate(modes, &schedule, &layer, spec.n_th)?;
    Ok(FiniteOptimization { pairs: assigned, schedule, layer, report, changes })
}

fn norm_key(k: (usize, usize, usize, usize)) -> (usize, usize, usize, usize) {
    if k.0 < k.2 {
        k
    } else {
        (k.2, k.3, k.0, k.1)
    }
}
