// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Qubit–phonon displacements `α`, qubit–qubit couplings `χ` and the gate
//! error metrics for segmented amplitude-modulated pulses.
//!
//! A drive on ion `i` has detuning `μᵢ`, `S` equal segments on its active
//! window `[0, τᵢ]` and dimensionless amplitudes `Rᵢˢ = η₀Ωᵢˢ/ω_x`. All time
//! integrals are evaluated in closed form.

pub mod oracle;

use std::collections::{HashMap, HashSet};
use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{pairwise_sum, sin3_triangle, sin_exp_integral, C64};
use crate::phonons::PhononModes;

/// Global ion label. Finite chains use `0..N`; periodic chains use `p·l + slot`.
pub type IonId = i64;

/// A set of harmonic modes seen through the gate laser.
pub trait ModeSet: Sync {
    fn n_modes(&self) -> usize;
    /// `ν_m` in units of `ω_x`.
    fn freq(&self, m: usize) -> f64;
    /// Sum over degenerate labels of the amplitude product `M^m_a M^m_b`.
    fn pair_weight(&self, m: usize, a: IonId, b: IonId) -> f64;
    /// Multiplier applied to `Σ|α|²` in the infidelity.
    fn infidelity_weight(&self) -> f64 {
        1.0
    }
}

impl ModeSet for PhononModes {
    fn n_modes(&self) -> usize {
        self.freqs.len()
    }
    fn freq(&self, m: usize) -> f64 {
        self.freqs[m]
    }
    fn pair_weight(&self, m: usize, a: IonId, b: IonId) -> f64 {
        self.vectors[(a as usize, m)] * self.vectors[(b as usize, m)]
    }
}

/// Segmented drive on one ion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub ion: IonId,
    pub mu: f64,
    /// Segment amplitudes `η₀Ωˢ/ω_x`.
    pub amps: Vec<f64>,
    /// End of the active window `τᵢ`.
    pub window: f64,
}

impl Drive {
    pub fn segments(&self) -> usize {
        self.amps.len()
    }

    fn shape(&self) -> Shape {
        Shape { mu: self.mu.to_bits(), window: self.window.to_bits(), segments: self.amps.len() }
    }
}

/// Pulse schedule for one gate layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    /// Layer duration `ω_x τ`.
    pub duration: f64,
    pub segments: usize,
    pub drives: Vec<Drive>,
}

impl PulseSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return invalid("schedule needs at least one segment");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return invalid("schedule duration must be positive");
        }
        let mut seen = HashSet::new();
        for d in &self.drives {
            if d.amps.len() != self.segments {
                return invalid(format!("drive on ion {} has {} segments, expected {}", d.ion, d.amps.len(), self.segments));
            }
            if !seen.insert(d.ion) {
                return invalid(format!("ion {} driven twice", d.ion));
            }
            if d.amps.iter().any(|a| !a.is_finite()) || !d.mu.is_finite() {
                return invalid(format!("non-finite drive parameters on ion {}", d.ion));
            }
            if d.amps.iter().any(|a| *a != 0.0) && !(d.window > 0.0 && d.window <= self.duration * (1.0 + 1e-12)) {
                return invalid(format!("active window of ion {} outside (0, τ]", d.ion));
            }
        }
        Ok(())
    }

    /// Copy with all amplitudes multiplied by `f`.
    pub fn scaled(&self, f: f64) -> Self {
        let mut s = self.clone();
        for d in &mut s.drives {
            for a in &mut d.amps {
                *a *= f;
            }
        }
        s
    }

    pub fn max_amplitude(&self) -> f64 {
        self.drives.iter().flat_map(|d| d.amps.iter()).fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn drive(&self, ion: IonId) -> Option<&Drive> {
        self.drives.iter().find(|d| d.ion == ion)
    }
}

/// Target pairs of a layer and their couplings `χ⁰`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateLayer {
    pub pairs: Vec<(IonId, IonId)>,
    pub targets: Vec<f64>,
    /// Ions that are not qubits (e.g. buffers); ignored in the crosstalk sum.
    #[serde(default)]
    pub excluded: Vec<IonId>,
}

impl GateLayer {
    pub fn uniform(pairs: Vec<(IonId, IonId)>, target: f64) -> Self {
        let n = pairs.len();
        Self { pairs, targets: vec![target; n], excluded: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.len() != self.targets.len() {
            return invalid("one target per pair required");
        }
        let mut seen = HashSet::new();
        for &(a, b) in &self.pairs {
            if a == b || !seen.insert(a) || !seen.insert(b) {
                return invalid(format!("target pairs must be disjoint (ion pair {a}, {b})"));
            }
        }
        if self.targets.iter().any(|t| t.abs() > FRAC_PI_4 + 1e-12) {
            return invalid("|χ⁰| must not exceed π/4");
        }
        Ok(())
    }

    fn target_of(&self, a: IonId, b: IonId) -> Option<f64> {
        self.pairs
            .iter()
            .zip(&self.targets)
            .find(|(&(x, y), _)| (x == a && y == b) || (x == b && y == a))
            .map(|(_, t)| *t)
    }
}

/// `∫ sin(μt) e^{iνt}` over segment `s` of `S` equal segments on `[0, τ]`.
pub fn segment_g(mu: f64, nu: f64, s: usize, segments: usize, tau: f64) -> C64 {
    let h = tau / segments as f64;
    sin_exp_integral(mu, nu, s as f64 * h, (s + 1) as f64 * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Shape {
    mu: u64,
    window: u64,
    segments: usize,
}

impl Shape {
    fn mu(&self) -> f64 {
        f64::from_bits(self.mu)
    }
    fn window(&self) -> f64 {
        f64::from_bits(self.window)
    }
}

/// `S_a × S_b` matrix `F` such that the double time integral entering `χ`
/// through mode frequency `ν` equals `R_aᵀ F R_b`.
///
/// Drives may have different detunings, segment counts and windows; the
/// integral runs over the union of their windows with zero amplitude
/// outside each active window.
pub fn pair_kernel(mu_a: f64, tau_a: f64, s_a: usize, mu_b: f64, tau_b: f64, s_b: usize, nu: f64) -> DMatrix<f64> {
    let (bp, ia, ib) = elementary_grid(tau_a, s_a, tau_b, s_b);
    let ne = bp.len() - 1;
    let ga: Vec<C64> = (0..ne).map(|e| sin_exp_integral(mu_a, nu, bp[e], bp[e + 1])).collect();
    let gb: Vec<C64> = if mu_a == mu_b { ga.clone() } else { (0..ne).map(|e| sin_exp_integral(mu_b, nu, bp[e], bp[e + 1])).collect() };
    let mut f = DMatrix::zeros(s_a, s_b);
    for e in 0..ne {
        if let (Some(x), Some(y)) = (ia[e], ib[e]) {
            let t = if mu_a == mu_b {
                2.0 * sin3_triangle(mu_a, mu_a, nu, bp[e], bp[e + 1])
            } else {
                sin3_triangle(mu_a, mu_b, nu, bp[e], bp[e + 1]) + sin3_triangle(mu_b, mu_a, nu, bp[e], bp[e + 1])
            };
            f[(x, y)] += t;
        }
        for ep in 0..e {
            if let (Some(x), Some(y)) = (ia[e], ib[ep]) {
                f[(x, y)] += (ga[e] * gb[ep].conj()).im;
            }
            if let (Some(x), Some(y)) = (ia[ep], ib[e]) {
                f[(x, y)] += (gb[e] * ga[ep].conj()).im;
            }
        }
    }
    f
}

type Grid = (Vec<f64>, Vec<Option<usize>>, Vec<Option<usize>>);

fn elementary_grid(tau_a: f64, s_a: usize, tau_b: f64, s_b: usize) -> Grid {
    let mut bp: Vec<f64> = (0..=s_a).map(|k| k as f64 * tau_a / s_a as f64).collect();
    bp.extend((0..=s_b).map(|k| k as f64 * tau_b / s_b as f64));
    bp.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tol = 1e-12 * tau_a.max(tau_b);
    bp.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let seg = |mid: f64, tau: f64, s: usize| {
        if mid < tau {
            Some(((mid / tau * s as f64).floor() as usize).min(s - 1))
        } else {
            None
        }
    };
    let mids: Vec<f64> = bp.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let ia = mids.iter().map(|&m| seg(m, tau_a, s_a)).collect();
    let ib = mids.iter().map(|&m| seg(m, tau_b, s_b)).collect();
    (bp, ia, ib)
}

/// Per-mode segment integrals `g^{m,s}` for one drive shape.
fn shape_g<M: ModeSet + ?Sized>(modes: &M, sh: Shape) -> Vec<C64> {
    let s = sh.segments;
    let mut out = Vec::with_capacity(modes.n_modes() * s);
    for m in 0..modes.n_modes() {
        let nu = modes.freq(m);
        for k in 0..s {
            out.push(segment_g(sh.mu(), nu, k, s, sh.window()));
        }
    }
    out
}

/// Displacement residual of one ion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonResidual {
    pub ion: IonId,
    /// `Σ_m |αᵐᵢ|²`.
    pub total: f64,
    /// `|αᵐᵢ|²` summed over degenerate labels, indexed like the mode set.
    #[serde(skip)]
    pub per_mode: Vec<f64>,
}

/// Coupling between two driven ions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiEntry {
    pub a: IonId,
    pub b: IonId,
    pub chi: f64,
}

/// Gate couplings and error metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub chi: Vec<ChiEntry>,
    pub alpha_residual: Vec<IonResidual>,
    pub delta_f: f64,
    pub delta_chi: f64,
    pub crosstalk: f64,
    /// Estimated crosstalk beyond the pair-separation cutoff (0 for finite chains).
    pub crosstalk_tail: f64,
    pub n_th: f64,
    pub n_gates: usize,
    pub max_amplitude: f64,
}

impl GateReport {
    /// Coupling between `a` and `b` if both were driven.
    pub fn chi_between(&self, a: IonId, b: IonId) -> Option<f64> {
        self.chi.iter().find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a)).map(|e| e.chi)
    }

    /// Dense symmetric `χ` for a finite chain of `n` ions.
    pub fn chi_matrix(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for e in &self.chi {
            m[(e.a as usize, e.b as usize)] = e.chi;
            m[(e.b as usize, e.a as usize)] = e.chi;
        }
        m
    }
}

/// Complex `αᵐᵢ = −i Mᵐᵢ/√ν_m Σ_s Rᵢˢ g^{m,s}` for a finite mode set;
/// rows are modes, columns follow `schedule.drives`.
pub fn alpha_matrix(modes: &PhononModes, schedule: &PulseSchedule) -> Result<DMatrix<C64>> {
    schedule.validate()?;
    let nm = modes.n_modes();
    let mut out = DMatrix::zeros(nm, schedule.drives.len());
    for (c, d) in schedule.drives.iter().enumerate() {
        let g = shape_g(modes, d.shape());
        let s = d.segments();
        for m in 0..nm {
            let gsum: C64 = (0..s).map(|k| d.amps[k] * g[m * s + k]).sum();
            out[(m, c)] = C64::new(0.0, -1.0) * modes.amplitude(m, d.ion as usize) / modes.freqs[m].sqrt() * gsum;
        }
    }
    Ok(out)
}

/// Per-ion `Σ_m |αᵐᵢ|²` for any mode set.
pub fn alpha_residuals<M: ModeSet + ?Sized>(modes: &M, schedule: &PulseSchedule) -> Vec<IonResidual> {
    let mut cache: HashMap<Shape, Vec<C64>> = HashMap::new();
    for d in &schedule.drives {
        cache.entry(d.shape()).or_insert_with(|| shape_g(modes, d.shape()));
    }
    schedule
        .drives
        .par_iter()
        .map(|d| {
            let g = &cache[&d.shape()];
            let s = d.segments();
            let per_mode: Vec<f64> = (0..modes.n_modes())
                .map(|m| {
                    let gsum: C64 = (0..s).map(|k| d.amps[k] * g[m * s + k]).sum();
                    modes.pair_weight(m, d.ion, d.ion) / modes.freq(m) * gsum.norm_sqr()
                })
                .collect();
            IonResidual { ion: d.ion, total: pairwise_sum(&per_mode), per_mode }
        })
        .collect()
}

/// Cache of per-mode contracted kernels `R_aᵀ F^m R_b` keyed by drive content.
#[derive(Default)]
pub struct KernelCache {
    map: HashMap<(Vec<u64>, Vec<u64>), Vec<f64>>,
}

fn drive_key(d: &Drive) -> Vec<u64> {
    let mut k = vec![d.mu.to_bits(), d.window.to_bits()];
    k.extend(d.amps.iter().map(|a| a.to_bits()));
    k
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn contracted<M: ModeSet + ?Sized>(&mut self, modes: &M, a: &Drive, b: &Drive) -> &Vec<f64> {
        let key = (drive_key(a), drive_key(b));
        self.map.entry(key).or_insert_with(|| contracted_kernel(modes, a, b))
    }
}

fn contracted_kernel<M: ModeSet + ?Sized>(modes: &M, a: &Drive, b: &Drive) -> Vec<f64> {
    (0..modes.n_modes())
        .into_par_iter()
        .map(|m| {
            let f = pair_kernel(a.mu, a.window, a.segments(), b.mu, b.window, b.segments(), modes.freq(m));
            let mut acc = 0.0;
            for x in 0..a.segments() {
                for y in 0..b.segments() {
                    acc += a.amps[x] * f[(x, y)] * b.amps[y];
                }
            }
            acc
        })
        .collect()
}

/// `χ_{ab} = Σ_m M^m_a M^m_b/ν_m · R_aᵀ F^m R_b`.
pub fn chi_pair<M: ModeSet + ?Sized>(modes: &M, a: &Drive, b: &Drive) -> f64 {
    let k = contracted_kernel(modes, a, b);
    chi_from_kernel(modes, a.ion, b.ion, &k)
}

fn chi_from_kernel<M: ModeSet + ?Sized>(modes: &M, a: IonId, b: IonId, k: &[f64]) -> f64 {
    let terms: Vec<f64> = (0..modes.n_modes()).map(|m| modes.pair_weight(m, a, b) / modes.freq(m) * k[m]).collect();
    pairwise_sum(&terms)
}

/// `χ` for every unordered pair of driven, non-excluded ions.
pub fn chi_matrix<M: ModeSet + ?Sized>(modes: &M, schedule: &PulseSchedule, excluded: &[IonId]) -> Result<Vec<ChiEntry>> {
    schedule.validate()?;
    let drives: Vec<&Drive> = schedule.drives.iter().filter(|d| !excluded.contains(&d.ion)).collect();
    let mut cache = KernelCache::new();
    let mut out = Vec::new();
    for i in 0..drives.len() {
        for j in i + 1..drives.len() {
            let (a, b) = (drives[i], drives[j]);
            let k = cache.contracted(modes, a, b).clone();
            out.push(ChiEntry { a: a.ion, b: b.ion, chi: chi_from_kernel(modes, a.ion, b.ion, &k) });
        }
    }
    Ok(out)
}

/// Error metrics from residuals and couplings.
///
/// `δF = (4/5G)·w·Σ|α|²(2n_th+1)`, `δχ = (2/G)Σ_I|χ−χ⁰|`,
/// `C = (2/G)Σ_{I′}|χ|`, with `w` the mode-set infidelity weight.
pub fn metrics(
    residuals: &[IonResidual],
    chi: &[ChiEntry],
    layer: &GateLayer,
    n_th: f64,
    weight: f64,
) -> Result<(f64, f64, f64)> {
    layer.validate()?;
    let g = layer.pairs.len();
    if g == 0 {
        return invalid("layer has no target pairs");
    }
    let gf = g as f64;
    let alpha: Vec<f64> = residuals.iter().map(|r| r.total).collect();
    let delta_f = 4.0 / (5.0 * gf) * weight * pairwise_sum(&alpha) * (2.0 * n_th + 1.0);
    let mut dchi = Vec::with_capacity(g);
    for (&(a, b), &t) in layer.pairs.iter().zip(&layer.targets) {
        let c = chi.iter().find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a)).map(|e| e.chi).unwrap_or(0.0);
        dchi.push((c - t).abs());
    }
    let cross: Vec<f64> = chi
        .iter()
        .filter(|e| layer.target_of(e.a, e.b).is_none())
        .filter(|e| !layer.excluded.contains(&e.a) && !layer.excluded.contains(&e.b))
        .map(|e| e.chi.abs())
        .collect();
    Ok((delta_f, 2.0 / gf * pairwise_sum(&dchi), 2.0 / gf * pairwise_sum(&cross)))
}

/// Full evaluation of a layer on a finite (or any explicitly enumerated) mode set.
pub fn evaluate<M: ModeSet + ?Sized>(modes: &M, schedule: &PulseSchedule, layer: &GateLayer, n_th: f64) -> Result<GateReport> {
    let residuals = alpha_residuals(modes, schedule);
    let chi = chi_matrix(modes, schedule, &layer.excluded)?;
    let (delta_f, delta_chi, crosstalk) = metrics(&residuals, &chi, layer, n_th, modes.infidelity_weight())?;
    Ok(GateReport {
        chi,
        alpha_residual: residuals,
        delta_f,
        delta_chi,
        crosstalk,
        crosstalk_tail: 0.0,
        n_th,
        n_gates: layer.pairs.len(),
        max_amplitude: schedule.max_amplitude(),
    })
}

/// Layer on an infinite periodic chain: drives and target pairs are given
/// for one period of `period` labels and repeated with that period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicLayer {
    pub period: i64,
    pub schedule: PulseSchedule,
    pub layer: GateLayer,
}

/// Evaluate a periodic layer. Crosstalk counts each unordered pair once via
/// its left ion inside the reference period, up to `cutoff` labels apart;
/// the reported tail is the change from halving the cutoff.
pub fn evaluate_periodic<M: ModeSet + ?Sized>(modes: &M, pl: &PeriodicLayer, cutoff: i64, n_th: f64) -> Result<GateReport> {
    pl.schedule.validate()?;
    let residuals = alpha_residuals(modes, &pl.schedule);
    let mut cache = KernelCache::new();
    let reps = cutoff / pl.period + 2;
    let mut chi = Vec::new();
    let mut partners: Vec<(IonId, IonId, f64)> = Vec::new();
    for a in &pl.schedule.drives {
        for r in 0..=reps {
            for b in &pl.schedule.drives {
                let ion_b = b.ion + r * pl.period;
                let sep = ion_b - a.ion;
                if sep <= 0 || sep > cutoff {
                    continue;
                }
                let k = cache.contracted(modes, a, b).clone();
                let c = chi_from_kernel(modes, a.ion, ion_b, &k);
                partners.push((a.ion, ion_b, c));
            }
        }
    }
    let is_target = |a: IonId, b: IonId| pl.layer.target_of(a, b).is_some();
    let g = pl.layer.pairs.len() as f64;
    let mut full = Vec::new();
    let mut half = Vec::new();
    for &(a, b, c) in &partners {
        if is_target(a, b) {
            chi.push(ChiEntry { a, b, chi: c });
            continue;
        }
        chi.push(ChiEntry { a, b, chi: c });
        full.push(c.abs());
        if b - a <= cutoff / 2 {
            half.push(c.abs());
        }
    }
    let target_chi: Vec<ChiEntry> = chi.iter().copied().filter(|e| is_target(e.a, e.b)).collect();
    let (delta_f, delta_chi, _) = metrics(&residuals, &target_chi, &pl.layer, n_th, modes.infidelity_weight())?;
    let crosstalk = 2.0 / g * pairwise_sum(&full);
    let tail = (crosstalk - 2.0 / g * pairwise_sum(&half)).abs();
    Ok(GateReport {
        chi,
        alpha_residual: residuals,
        delta_f,
        delta_chi,
        crosstalk,
        crosstalk_tail: tail,
        n_th,
        n_gates: pl.layer.pairs.len(),
        max_amplitude: pl.schedule.max_amplitude(),
    })
}
