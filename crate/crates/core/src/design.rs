// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Minimal-control gate synthesis: one constant Rabi frequency per ion,
//! gate time fixed by the COM–stretch splitting, detuning refined by a
//! one-dimensional scan.

use std::f64::consts::{FRAC_PI_4, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{band_structure, BandStructure, CellConfig};
use crate::chain::IonChain;
use crate::error::{invalid, Error, Result};
use crate::gatekernel::{
    alpha_residuals, chi_pair, evaluate, evaluate_periodic, Drive, GateLayer, GateReport, IonId, ModeSet, PeriodicLayer,
    PulseSchedule,
};
use crate::numerics::golden_min;
use crate::phonons::{find_pair_modes, normal_modes, Direction, PhononModes, TweezerArray};

/// Which localized mode carries the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Com,
    Stretch,
}

impl ModeChoice {
    /// Default coupling sign: ferromagnetic for COM, antiferromagnetic for stretch.
    pub fn default_target(self) -> f64 {
        match self {
            ModeChoice::Com => FRAC_PI_4,
            ModeChoice::Stretch => -FRAC_PI_4,
        }
    }
}

/// Pinning frequencies of consecutive register pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Pinning {
    Uniform { nu0: f64 },
    /// Pairs alternate between `nu0_a` (even pairs) and `nu0_b` (odd pairs).
    Alternating { nu0_a: f64, nu0_b: f64 },
}

impl Pinning {
    pub fn nu0_of_pair(&self, j: usize) -> f64 {
        match *self {
            Pinning::Uniform { nu0 } => nu0,
            Pinning::Alternating { nu0_a, nu0_b } => {
                if j % 2 == 0 {
                    nu0_a
                } else {
                    nu0_b
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub mode: ModeChoice,
    /// Target `χ⁰`; defaults to the sign convention of `mode` with magnitude π/4.
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default = "default_pinning")]
    pub pinning: Pinning,
    /// Half-width of the detuning scan in units of the COM–stretch gap.
    #[serde(default = "default_half_width")]
    pub scan_half_width: f64,
    /// Detuning resolution of the refinement.
    #[serde(default = "default_scan_tol")]
    pub scan_tol: f64,
    #[serde(default = "default_n_th")]
    pub n_th: f64,
    /// Crosstalk partners up to this many unit cells away (infinite chains).
    #[serde(default = "default_cutoff_cells")]
    pub cutoff_cells: usize,
    /// Minimal overlap of the identified modes with `(eᵢ ± eⱼ)/√2` (finite chains).
    #[serde(default = "default_min_overlap")]
    pub min_overlap: f64,
}

fn default_pinning() -> Pinning {
    Pinning::Uniform { nu0: 0.4 }
}
fn default_half_width() -> f64 {
    0.5
}
fn default_scan_tol() -> f64 {
    1e-8
}
fn default_n_th() -> f64 {
    0.5
}
fn default_cutoff_cells() -> usize {
    30
}
fn default_min_overlap() -> f64 {
    0.5
}

impl DesignSpec {
    pub fn new(mode: ModeChoice) -> Self {
        Self {
            mode,
            target: None,
            pinning: default_pinning(),
            scan_half_width: default_half_width(),
            scan_tol: default_scan_tol(),
            n_th: default_n_th(),
            cutoff_cells: default_cutoff_cells(),
            min_overlap: default_min_overlap(),
        }
    }

    pub fn target(&self) -> f64 {
        self.target.unwrap_or_else(|| self.mode.default_target())
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.target();
        if !(t != 0.0 && t.abs() <= FRAC_PI_4 + 1e-12) {
            return invalid(format!("target χ⁰ = {t} must be nonzero with |χ⁰| ≤ π/4"));
        }
        // the window [seed ± w·gap] must stay clear of the opposing band center
        if !(self.scan_half_width > 0.0 && self.scan_half_width < 1.0) {
            return invalid(format!("scan half-width {} must lie in (0, 1) gaps", self.scan_half_width));
        }
        if !(self.scan_tol > 0.0) {
            return invalid("scan tolerance must be positive");
        }
        if !(self.n_th >= 0.0) {
            return invalid("thermal occupation must be non-negative");
        }
        if self.cutoff_cells == 0 {
            return invalid("crosstalk cutoff must be at least one cell");
        }
        match self.pinning {
            Pinning::Uniform { nu0 } if !(0.0..=1.0).contains(&nu0) => invalid("nu0 outside [0, 1]"),
            Pinning::Alternating { nu0_a, nu0_b } if !(0.0..=1.0).contains(&nu0_a) || !(0.0..=1.0).contains(&nu0_b) => {
                invalid("nu0 outside [0, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// Detuning seed that closes the loop once on the gate mode and twice on the other.
pub fn detuning_seed(mode: ModeChoice, nu_com: f64, nu_stretch: f64) -> f64 {
    match mode {
        ModeChoice::Stretch => 2.0 * nu_stretch - nu_com,
        ModeChoice::Com => 2.0 * nu_com - nu_stretch,
    }
}

/// Coarse scan followed by golden-section refinement around the best grid point.
fn refine<F: Fn(f64) -> f64 + Sync>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    const N: usize = 41;
    let xs: Vec<f64> = (0..N).map(|i| lo + (hi - lo) * i as f64 / (N - 1) as f64).collect();
    let fs: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect();
    let best = (0..N).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap();
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(N - 1)];
    let (x, fx) = golden_min(&f, a, b, tol);
    if fx <= fs[best] {
        x
    } else {
        xs[best]
    }
}

/// Unit-amplitude pair drive: (weighted residual sum of both ions, χ).
fn unit_pair<M: ModeSet + ?Sized>(modes: &M, a: IonId, b: IonId, mu: f64, tau: f64) -> (f64, f64) {
    let s = PulseSchedule {
        duration: tau,
        segments: 1,
        drives: vec![
            Drive { ion: a, mu, amps: vec![1.0], window: tau },
            Drive { ion: b, mu, amps: vec![1.0], window: tau },
        ],
    };
    let res: f64 = alpha_residuals(modes, &s).iter().map(|r| r.total).sum::<f64>() * modes.infidelity_weight();
    (res, chi_pair(modes, &s.drives[0], &s.drives[1]))
}

/// Pair infidelity at `|χ| = |target|` for a unit-amplitude drive.
fn normalized_infidelity(res: f64, chi: f64, target: f64, n_th: f64) -> f64 {
    if chi == 0.0 {
        return f64::INFINITY;
    }
    0.8 * res * (2.0 * n_th + 1.0) * target.abs() / chi.abs()
}

/// Amplitudes `(R_a, R_b)` giving exactly `χ = target`.
fn amplitudes_for(chi_unit: f64, target: f64) -> (f64, f64) {
    let r = (target.abs() / chi_unit.abs()).sqrt();
    if chi_unit.signum() == target.signum() {
        (r, r)
    } else {
        (r, -r)
    }
}

/// Infinite-chain design for one period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfiniteDesign {
    pub mode: ModeChoice,
    pub com_center: f64,
    pub stretch_center: f64,
    pub tau: f64,
    pub mu_seed: f64,
    pub mu: f64,
    /// `η₀Ω₀/ω_x` on the first ion; the second carries the same magnitude.
    pub amplitude: f64,
    pub layer: PeriodicLayer,
    pub report: GateReport,
}

/// Parallel gates on the pinned pair of every unit cell of an infinite chain.
pub fn design_infinite(bands: &BandStructure, spec: &DesignSpec) -> Result<InfiniteDesign> {
    spec.validate()?;
    let (c, s) = bands.com_stretch_bands();
    let (nc, ns) = (bands.band_center(c), bands.band_center(s));
    let gap = nc - ns;
    if !(gap > 0.0) {
        return Err(Error::NotLocalized(format!("COM band center {nc} not above stretch band center {ns}")));
    }
    let tau = 2.0 * PI / gap;
    let seed = detuning_seed(spec.mode, nc, ns);
    let target = spec.target();
    let (a, b) = (bands.cfg.pinned_slots[0] as IonId, bands.cfg.pinned_slots[1] as IonId);
    let w = spec.scan_half_width * gap;
    let mu = refine(
        |mu| {
            let (res, chi) = unit_pair(bands, a, b, mu, tau);
            normalized_infidelity(res, chi, target, spec.n_th)
        },
        seed - w,
        seed + w,
        spec.scan_tol,
    );
    let (_, chi) = unit_pair(bands, a, b, mu, tau);
    let (ra, rb) = amplitudes_for(chi, target);
    let schedule = PulseSchedule {
        duration: tau,
        segments: 1,
        drives: vec![
            Drive { ion: a, mu, amps: vec![ra], window: tau },
            Drive { ion: b, mu, amps: vec![rb], window: tau },
        ],
    };
    let p = bands.p() as IonId;
    let layer = PeriodicLayer { period: p, schedule, layer: GateLayer::uniform(vec![(a, b)], target) };
    let report = evaluate_periodic(bands, &layer, spec.cutoff_cells as IonId * p, spec.n_th)?;
    Ok(InfiniteDesign {
        mode: spec.mode,
        com_center: nc,
        stretch_center: ns,
        tau,
        mu_seed: seed,
        mu,
        amplitude: ra.abs(),
        layer,
        report,
    })
}

/// Per-pair design data for a finite chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDesign {
    pub a: usize,
    pub b: usize,
    pub com_mode: usize,
    pub stretch_mode: usize,
    pub com_freq: f64,
    pub stretch_freq: f64,
    pub tau: f64,
    pub mu_seed: f64,
    pub mu: f64,
    pub amp_a: f64,
    pub amp_b: f64,
    /// Infidelity of this pair driven in isolation.
    pub delta_f: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteDesign {
    pub pairs: Vec<PairDesign>,
    pub schedule: PulseSchedule,
    pub layer: GateLayer,
    pub report: GateReport,
}

/// Register layout: tweezer array and pinned pairs `(15+p·j, 16+p·j)`
/// starting at the first non-buffer ion.
pub fn register_layout(chain: &IonChain, p: usize, pinning: &Pinning) -> Result<(TweezerArray, Vec<(usize, usize)>)> {
    if p < 2 {
        return invalid("unit cell must hold at least two ions");
    }
    let n = chain.n_ions();
    let nb = chain.trap.n_buffer;
    let mut tw = TweezerArray::none(n);
    let mut pairs = Vec::new();
    let mut first = nb;
    while first + 1 < n - nb {
        let j = pairs.len();
        let v = pinning.nu0_of_pair(j);
        tw.nu0[first] = v;
        tw.nu0[first + 1] = v;
        pairs.push((first, first + 1));
        first += p;
    }
    if pairs.is_empty() {
        return invalid("register too short for one pinned pair");
    }
    Ok((tw, pairs))
}

/// Minimal-control gates on the given pinned pairs of a finite chain.
/// Shorter gates are idle (zero amplitude) after their own duration.
pub fn design_finite(chain: &IonChain, tw: &TweezerArray, pairs: &[(usize, usize)], spec: &DesignSpec) -> Result<FiniteDesign> {
    spec.validate()?;
    tw.validate(chain.n_ions())?;
    if pairs.is_empty() {
        return invalid("no pairs to design");
    }
    let modes = normal_modes(chain, tw, Direction::X)?;
    design_finite_on(&modes, chain, pairs, spec)
}

/// As [`design_finite`] on precomputed x modes.
pub fn design_finite_on(modes: &PhononModes, chain: &IonChain, pairs: &[(usize, usize)], spec: &DesignSpec) -> Result<FiniteDesign> {
    let target = spec.target();
    let located: Vec<Result<_>> = pairs.iter().map(|&(a, b)| find_pair_modes(modes, a, b, spec.min_overlap)).collect();
    let bad: Vec<String> = located
        .iter()
        .zip(pairs)
        .filter_map(|(r, p)| r.as_ref().err().map(|e| format!("({}, {}): {e}", p.0, p.1)))
        .collect();
    if !bad.is_empty() {
        return Err(Error::NotLocalized(bad.join("; ")));
    }
    let designs: Vec<PairDesign> = pairs
        .par_iter()
        .zip(located.into_par_iter())
        .map(|(&(a, b), lp)| {
            let lp = lp.unwrap();
            let (nc, ns) = (modes.freqs[lp.com], modes.freqs[lp.stretch]);
            let gap = (nc - ns).abs();
            let tau = 2.0 * PI / gap;
            let seed = detuning_seed(spec.mode, nc, ns);
            let (ia, ib) = (a as IonId, b as IonId);
            let w = spec.scan_half_width * gap;
            let mu = refine(
                |mu| {
                    let (res, chi) = unit_pair(modes, ia, ib, mu, tau);
                    normalized_infidelity(res, chi, target, spec.n_th)
                },
                seed - w,
                seed + w,
                spec.scan_tol,
            );
            let (res, chi) = unit_pair(modes, ia, ib, mu, tau);
            let (ra, rb) = amplitudes_for(chi, target);
            PairDesign {
                a,
                b,
                com_mode: lp.com,
                stretch_mode: lp.stretch,
                com_freq: nc,
                stretch_freq: ns,
                tau,
                mu_seed: seed,
                mu,
                amp_a: ra,
                amp_b: rb,
                delta_f: normalized_infidelity(res, chi, target, spec.n_th),
            }
        })
        .collect();
    let duration = designs.iter().map(|d| d.tau).fold(0.0, f64::max);
    let mut drives = Vec::with_capacity(2 * designs.len());
    for d in &designs {
        drives.push(Drive { ion: d.a as IonId, mu: d.mu, amps: vec![d.amp_a], window: d.tau });
        drives.push(Drive { ion: d.b as IonId, mu: d.mu, amps: vec![d.amp_b], window: d.tau });
    }
    let schedule = PulseSchedule { duration, segments: 1, drives };
    let mut layer = GateLayer::uniform(pairs.iter().map(|&(a, b)| (a as IonId, b as IonId)).collect(), target);
    layer.excluded = (0..chain.n_ions()).filter(|&i| chain.is_buffer(i)).map(|i| i as IonId).collect();
    let report = evaluate(modes, &schedule, &layer, spec.n_th)?;
    Ok(FiniteDesign { pairs: designs, schedule, layer, report })
}

/// One grid point of the performance sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub nu0: f64,
    pub delta_f: f64,
    pub crosstalk: f64,
    pub tau: f64,
    pub mu: f64,
    pub amplitude: f64,
    /// COM–stretch gap exceeds half the gap to the unpinned bands.
    pub insufficient_pinning: bool,
    /// Band structure or design failed at this point.
    pub failed: bool,
}

/// Options shared by the sweep and contour extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub k_points: usize,
    pub spec: DesignSpec,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { k_points: 200, spec: DesignSpec::new(ModeChoice::Stretch) }
    }
}

fn pinning_flag(b: &BandStructure, com: usize, stretch: usize) -> bool {
    let top_unpinned = (0..b.p())
        .filter(|&n| n != com && n != stretch)
        .flat_map(|n| b.freqs.iter().map(move |f| f[n]))
        .fold(f64::NEG_INFINITY, f64::max);
    let stretch_min = b.freqs.iter().map(|f| f[stretch]).fold(f64::INFINITY, f64::min);
    let gap = b.band_center(com) - b.band_center(stretch);
    top_unpinned.is_finite() && gap > 0.5 * (stretch_min - top_unpinned)
}

/// Stretch (or COM) design at a single `(ε, ν₀)`.
pub fn sweep_point(p: usize, epsilon: f64, nu0: f64, opts: &SweepOptions) -> SweepPoint {
    let fail = SweepPoint {
        epsilon,
        nu0,
        delta_f: f64::NAN,
        crosstalk: f64::NAN,
        tau: f64::NAN,
        mu: f64::NAN,
        amplitude: f64::NAN,
        insufficient_pinning: true,
        failed: true,
    };
    let cfg = CellConfig::new(p, epsilon, nu0);
    let Ok(b) = band_structure(&cfg, opts.k_points) else { return fail };
    let (c, s) = b.com_stretch_bands();
    let flag = pinning_flag(&b, c, s);
    match design_infinite(&b, &opts.spec) {
        Ok(d) => SweepPoint {
            epsilon,
            nu0,
            delta_f: d.report.delta_f,
            crosstalk: d.report.crosstalk,
            tau: d.tau,
            mu: d.mu,
            amplitude: d.amplitude,
            insufficient_pinning: flag,
            failed: false,
        },
        Err(_) => SweepPoint { insufficient_pinning: flag, ..fail },
    }
}

/// Infinite-chain designs over the grid `epsilons × nu0s` (row-major in `nu0`).
pub fn sweep_performance(p: usize, epsilons: &[f64], nu0s: &[f64], opts: &SweepOptions) -> Result<Vec<SweepPoint>> {
    opts.spec.validate()?;
    if p < 3 {
        return invalid("unit cell size must be at least 3");
    }
    if epsilons.iter().chain(nu0s).any(|v| !(v.is_finite() && *v > 0.0)) {
        return invalid("sweep grid values must be positive");
    }
    let grid: Vec<(f64, f64)> = nu0s.iter().flat_map(|&n| epsilons.iter().map(move |&e| (e, n))).collect();
    Ok(grid.par_iter().map(|&(e, n)| sweep_point(p, e, n, opts)).collect())
}

/// Point on an iso-infidelity contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub nu0: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub crosstalk: f64,
    pub delta_f: f64,
}

/// For each `ν₀` of a sweep, locate `ε` with `δF = level` by log-linear
/// interpolation between the first bracketing grid points (scanning up in ε).
pub fn delta_f_contour(points: &[SweepPoint], level: f64) -> Vec<ContourPoint> {
    let mut nu0s: Vec<f64> = points.iter().map(|p| p.nu0).collect();
    nu0s.sort_by(f64::total_cmp);
    nu0s.dedup();
    let mut out = Vec::new();
    for n in nu0s {
        let mut row: Vec<&SweepPoint> = points.iter().filter(|p| p.nu0 == n && !p.failed).collect();
        row.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
        for w in row.windows(2) {
            let (l, r) = (w[0], w[1]);
            if (l.delta_f - level) * (r.delta_f - level) <= 0.0 && l.delta_f != r.delta_f {
                let t = (level.ln() - l.delta_f.ln()) / (r.delta_f.ln() - l.delta_f.ln());
                let lerp = |x: f64, y: f64| (x.ln() + t * (y.ln() - x.ln())).exp();
                out.push(ContourPoint {
                    nu0: n,
                    epsilon: lerp(l.epsilon, r.epsilon),
                    tau: lerp(l.tau, r.tau),
                    crosstalk: lerp(l.crosstalk.max(1e-300), r.crosstalk.max(1e-300)),
                    delta_f: level,
                });
                break;
            }
        }
    }
    out
}

/// Refine a contour point by root finding on `ln δF(ln ε) = ln level`
/// between `eps_lo` and `eps_hi`.
pub fn contour_point(p: usize, nu0: f64, level: f64, eps_lo: f64, eps_hi: f64, opts: &SweepOptions) -> Result<ContourPoint> {
    let f = |le: f64| {
        let s = sweep_point(p, le.exp(), nu0, opts);
        if s.failed {
            f64::NAN
        } else {
            s.delta_f.ln() - level.ln()
        }
    };
    let le = crate::numerics::brent_root(f, eps_lo.ln(), eps_hi.ln(), 1e-6)?;
    let s = sweep_point(p, le.exp(), nu0, opts);
    Ok(ContourPoint { nu0, epsilon: s.epsilon, tau: s.tau, crosstalk: s.crosstalk, delta_f: s.delta_f })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("need at least two points of equal length");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("degenerate abscissa");
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{solve_equilibrium, TrapConfig};

    fn p6() -> BandStructure {
        band_structure(&CellConfig::new(6, 0.07, 0.4), 200).unwrap()
    }

    #[test]
    fn infinite_stretch_gate() {
        let d = design_infinite(&p6(), &DesignSpec::new(ModeChoice::Stretch)).unwrap();
        assert!((d.mu - 1.065).abs() < 0.005, "mu {}", d.mu);
        assert!((d.tau / 1370.0 - 1.0).abs() < 0.02, "tau {}", d.tau);
        assert!((d.amplitude / 4.75e-3 - 1.0).abs() < 0.05, "amp {}", d.amplitude);
        assert!((d.report.delta_f / 5.7e-4 - 1.0).abs() < 0.2, "dF {}", d.report.delta_f);
        assert!((d.report.crosstalk / 4.1e-2 - 1.0).abs() < 0.2, "C {}", d.report.crosstalk);
        assert!(d.report.delta_chi < 1e-10);
        assert!((d.mu / d.mu_seed - 1.0).abs() < 0.01);
        assert!(d.report.chi_between(0, 1).unwrap() < 0.0);
    }

    #[test]
    fn infinite_com_gate() {
        let d = design_infinite(&p6(), &DesignSpec::new(ModeChoice::Com)).unwrap();
        assert!((d.mu - 1.079).abs() < 0.005, "mu {}", d.mu);
        assert!(d.report.chi_between(0, 1).unwrap() > 0.0);
        assert!(d.report.delta_chi < 1e-10);
    }

    #[test]
    fn window_must_not_reach_other_band() {
        let mut s = DesignSpec::new(ModeChoice::Stretch);
        s.scan_half_width = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn finite_partial_entangler_scaling() {
        let cfg = TrapConfig::new(14, 0.05, 2);
        let chain = solve_equilibrium(&cfg).unwrap();
        let (tw, pairs) = register_layout(&chain, 4, &Pinning::Uniform { nu0: 0.4 }).unwrap();
        assert_eq!(pairs, vec![(2, 3), (6, 7), (10, 11)]);
        let d = design_finite(&chain, &tw, &pairs, &DesignSpec::new(ModeChoice::Stretch)).unwrap();
        assert!(d.report.delta_chi < 1e-10);
        let half = d.schedule.scaled(std::f64::consts::FRAC_1_SQRT_2);
        let modes = normal_modes(&chain, &tw, Direction::X).unwrap();
        let r = evaluate(&modes, &half, &d.layer, 0.5).unwrap();
        for (full, h) in d.report.chi.iter().zip(&r.chi) {
            assert!((h.chi - 0.5 * full.chi).abs() < 1e-12 * full.chi.abs().max(1e-30));
        }
        assert!((r.delta_f - 0.5 * d.report.delta_f).abs() < 1e-12 * d.report.delta_f);
    }

    #[test]
    fn loglog_slope_exact() {
        let x = [0.1, 0.2, 0.4];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 2.0).abs() < 1e-12);
    }
}
