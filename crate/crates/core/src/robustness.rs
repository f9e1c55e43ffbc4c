// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Tweezer misadjustments and adiabatic switching of the tweezer pattern.
//!
//! A misadjusted tweezer on ion `i` contributes
//! `½ (ν₀ᵢ(1+δωᵢ/ω₀))² |Πᵢ (rᵢ − rᵢ⁰ − δᵢ)|²`, where `Πᵢ = I − bbᵀ` projects
//! out the beam axis `b = (sinθ cosφ, cosθ, sinθ sinφ)`. Coordinates are
//! ordered `(x, y, z)` per ion, with the chain along `z`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{band_structure, CellConfig};
use crate::chain::IonChain;
use crate::error::{invalid, Error, Result};
use crate::gatekernel::{alpha_residuals, chi_pair, metrics, ChiEntry, GateLayer, IonId, ModeSet, PulseSchedule};
use crate::phonons::{Direction, Misadjust, TweezerArray};

/// Projector onto the plane normal to the beam axis.
pub fn beam_projector(theta: f64, phi: f64) -> Matrix3<f64> {
    let b = Vector3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin());
    Matrix3::identity() - b * b.transpose()
}

fn tweezer_terms(tw: &TweezerArray, i: usize) -> (f64, Matrix3<f64>, Vector3<f64>) {
    let m = tw.misadjust.as_ref().map(|v| v[i]).unwrap_or_default();
    let k = (tw.nu0[i] * (1.0 + m.dw)).powi(2);
    (k, beam_projector(m.theta, m.phi), Vector3::from(m.focus_shift))
}

fn nominal_positions(chain: &IonChain) -> Vec<Vector3<f64>> {
    chain.positions.iter().map(|&z| Vector3::new(0.0, 0.0, z)).collect()
}

fn trap_diag(chain: &IonChain) -> Vector3<f64> {
    Vector3::new(1.0, chain.trap.gamma_y.powi(2), chain.trap.gamma_z.powi(2))
}

/// Gradient of the full 3D potential at `r`.
fn gradient_3d(chain: &IonChain, tw: &TweezerArray, r: &[Vector3<f64>]) -> DVector<f64> {
    let n = r.len();
    let r0 = nominal_positions(chain);
    let t = trap_diag(chain);
    let mut g = DVector::zeros(3 * n);
    for i in 0..n {
        let mut gi = t.component_mul(&r[i]);
        let (k, pi, d) = tweezer_terms(tw, i);
        if k > 0.0 {
            gi += k * pi * (r[i] - r0[i] - d);
        }
        for j in 0..n {
            if j != i {
                let rij = r[i] - r[j];
                gi -= rij / rij.norm().powi(3);
            }
        }
        g.fixed_rows_mut::<3>(3 * i).copy_from(&gi);
    }
    g
}

/// Full `3N × 3N` Hessian of trap, Coulomb and misadjusted tweezers at `r`.
pub fn hessian_3d(chain: &IonChain, tw: &TweezerArray, r: &[Vector3<f64>]) -> DMatrix<f64> {
    let n = r.len();
    let t = trap_diag(chain);
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        let mut blk = Matrix3::from_diagonal(&t);
        let (k, pi, _) = tweezer_terms(tw, i);
        blk += k * pi;
        for j in 0..n {
            if j == i {
                continue;
            }
            let rij = r[i] - r[j];
            let d2 = rij.norm_squared();
            let d5 = d2 * d2 * d2.sqrt();
            let c = (3.0 * rij * rij.transpose() - d2 * Matrix3::identity()) / d5;
            blk += c;
            h.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(&(-c));
        }
        h.fixed_view_mut::<3, 3>(3 * i, 3 * i).copy_from(&blk);
    }
    h
}

/// How shifted equilibria are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumMethod {
    /// Newton re-solve of the nonlinear force balance.
    #[default]
    Direct,
    /// Second order in the focus shifts.
    Perturbative,
}

/// Equilibrium positions `(x, y, z)` under a misadjusted tweezer array.
pub fn perturbed_equilibrium(chain: &IonChain, tw: &TweezerArray, method: EquilibriumMethod) -> Result<Vec<Vector3<f64>>> {
    tw.validate(chain.n_ions())?;
    match method {
        EquilibriumMethod::Direct => direct_equilibrium(chain, tw),
        EquilibriumMethod::Perturbative => perturbative_equilibrium(chain, tw),
    }
}

fn direct_equilibrium(chain: &IonChain, tw: &TweezerArray) -> Result<Vec<Vector3<f64>>> {
    let n = chain.n_ions();
    let mut r = nominal_positions(chain);
    let mut res = f64::INFINITY;
    for _ in 0..50 {
        let g = gradient_3d(chain, tw, &r);
        res = g.amax();
        if res < 1e-13 {
            return Ok(r);
        }
        let h = hessian_3d(chain, tw, &r);
        let step = h.lu().solve(&(-&g)).ok_or_else(|| Error::Unstable("singular 3D Hessian".into()))?;
        for i in 0..n {
            r[i] += step.fixed_rows::<3>(3 * i);
        }
    }
    if res < 1e-11 {
        Ok(r)
    } else {
        Err(Error::NoConvergence { iterations: 50, residual: res })
    }
}

fn perturbative_equilibrium(chain: &IonChain, tw: &TweezerArray) -> Result<Vec<Vector3<f64>>> {
    let n = chain.n_ions();
    let r0 = nominal_positions(chain);
    let h = hessian_3d(chain, tw, &r0);
    let lu = h.lu();
    let mut force = DVector::zeros(3 * n);
    for i in 0..n {
        let (k, pi, d) = tweezer_terms(tw, i);
        force.fixed_rows_mut::<3>(3 * i).copy_from(&(k * pi * d));
    }
    let x1 = lu.solve(&force).ok_or_else(|| Error::Unstable("singular 3D Hessian".into()))?;
    let w = |i: usize| -> Vector3<f64> { x1.fixed_rows::<3>(3 * i).into() };
    let mut g2 = DVector::zeros(3 * n);
    for i in 0..n {
        let mut acc = Vector3::zeros();
        for j in 0..n {
            if j == i {
                continue;
            }
            let r = r0[i] - r0[j];
            let dw = w(i) - w(j);
            let d = r.norm();
            let rw = r.dot(&dw);
            acc += 0.5 * (3.0 * (2.0 * dw * rw + r * dw.norm_squared()) / d.powi(5) - 15.0 * r * rw * rw / d.powi(7));
        }
        g2.fixed_rows_mut::<3>(3 * i).copy_from(&acc);
    }
    let x2 = lu.solve(&(-g2)).ok_or_else(|| Error::Unstable("singular 3D Hessian".into()))?;
    Ok((0..n).map(|i| r0[i] + x1.fixed_rows::<3>(3 * i) + x2.fixed_rows::<3>(3 * i)).collect())
}

/// 3D normal modes seen through their `x` components.
#[derive(Debug, Clone)]
pub struct Modes3d {
    pub freqs: Vec<f64>,
    /// `3N × 3N`; column `n` is the full mode vector.
    pub vectors: DMatrix<f64>,
}

impl Modes3d {
    pub fn from_hessian(h: DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(h);
        if let Some(lam) = eig.eigenvalues.iter().copied().find(|&l| l <= 0.0) {
            return Err(Error::Unstable(format!("eigenvalue {lam:.3e} ≤ 0")));
        }
        Ok(Self { freqs: eig.eigenvalues.iter().map(|l| l.sqrt()).collect(), vectors: eig.eigenvectors })
    }
}

impl ModeSet for Modes3d {
    fn n_modes(&self) -> usize {
        self.freqs.len()
    }
    fn freq(&self, m: usize) -> f64 {
        self.freqs[m]
    }
    fn pair_weight(&self, m: usize, a: IonId, b: IonId) -> f64 {
        self.vectors[(3 * a as usize, m)] * self.vectors[(3 * b as usize, m)]
    }
}

/// Modes of the misadjusted chain.
pub fn perturbed_modes(chain: &IonChain, tw: &TweezerArray, method: EquilibriumMethod) -> Result<Modes3d> {
    let r = perturbed_equilibrium(chain, tw, method)?;
    Modes3d::from_hessian(hessian_3d(chain, tw, &r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Focus,
    Tilt,
    Intensity,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Focus, Channel::Tilt, Channel::Intensity];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MisadjustSpec {
    /// Width of every dimensionless channel: `δ/l0`, `θ`, `φ`, `50·δω/ω₀`.
    pub sigma: f64,
    pub channels: Vec<Channel>,
    pub realizations: usize,
    pub seed: u64,
    pub method: EquilibriumMethod,
    pub n_th: f64,
}

impl Default for MisadjustSpec {
    fn default() -> Self {
        Self { sigma: 0.04, channels: Channel::ALL.to_vec(), realizations: 40, seed: 7, method: EquilibriumMethod::Direct, n_th: 0.5 }
    }
}

impl MisadjustSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return invalid("sigma must be non-negative");
        }
        if self.realizations < 1 {
            return invalid("realizations must be at least 1");
        }
        if self.channels.is_empty() {
            return invalid("at least one channel required");
        }
        Ok(())
    }
}

/// Random misadjustments for realization `index`; only tweezed ions are affected.
pub fn sample_misadjust(tw: &TweezerArray, spec: &MisadjustSpec, index: u64) -> TweezerArray {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let has = |c: Channel| spec.channels.contains(&c);
    let mut out = Vec::with_capacity(tw.nu0.len());
    for &nu0 in &tw.nu0 {
        let mut z = [0.0f64; 6];
        for v in z.iter_mut() {
            *v = spec.sigma * normal.sample(&mut rng);
        }
        let mut m = Misadjust::default();
        if nu0 > 0.0 {
            if has(Channel::Focus) {
                m.focus_shift = [z[0], z[1], z[2]];
            }
            if has(Channel::Tilt) {
                m.theta = z[3];
                m.phi = z[4];
            }
            if has(Channel::Intensity) {
                m.dw = z[5] / 50.0;
            }
        }
        out.push(m);
    }
    TweezerArray { nu0: tw.nu0.clone(), misadjust: Some(out) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub index: u64,
    pub delta_f: f64,
    pub delta_chi: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisadjustResult {
    pub sigma: f64,
    pub channels: Vec<Channel>,
    pub mean_delta_f: f64,
    pub se_delta_f: f64,
    pub mean_delta_chi: f64,
    pub se_delta_chi: f64,
    pub excluded: usize,
    pub realizations: Vec<Realization>,
}

/// `(δF, δχ)` of a nominal schedule on arbitrary modes, target couplings only.
pub fn target_metrics<M: ModeSet + ?Sized>(modes: &M, schedule: &PulseSchedule, layer: &GateLayer, n_th: f64) -> Result<(f64, f64)> {
    let residuals = alpha_residuals(modes, schedule);
    let mut chi = Vec::with_capacity(layer.pairs.len());
    for &(a, b) in &layer.pairs {
        let (da, db) = match (schedule.drive(a), schedule.drive(b)) {
            (Some(x), Some(y)) => (x, y),
            _ => return invalid(format!("target pair ({a}, {b}) is not driven")),
        };
        chi.push(ChiEntry { a, b, chi: chi_pair(modes, da, db) });
    }
    let (df, dchi, _) = metrics(&residuals, &chi, layer, n_th, modes.infidelity_weight())?;
    Ok((df, dchi))
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Monte Carlo over misadjusted arrays with the nominal schedule held fixed.
pub fn misadjust_mc(
    chain: &IonChain,
    tw: &TweezerArray,
    schedule: &PulseSchedule,
    layer: &GateLayer,
    spec: &MisadjustSpec,
) -> Result<MisadjustResult> {
    spec.validate()?;
    tw.validate(chain.n_ions())?;
    schedule.validate()?;
    let reals: Vec<Result<Realization>> = (0..spec.realizations as u64)
        .into_par_iter()
        .map(|idx| {
            let twr = sample_misadjust(tw, spec, idx);
            match perturbed_modes(chain, &twr, spec.method) {
                Ok(modes) => {
                    let (df, dchi) = target_metrics(&modes, schedule, layer, spec.n_th)?;
                    Ok(Realization { index: idx, delta_f: df, delta_chi: dchi, unstable: false })
                }
                Err(Error::Unstable(_)) | Err(Error::NoConvergence { .. }) => {
                    Ok(Realization { index: idx, delta_f: f64::NAN, delta_chi: f64::NAN, unstable: true })
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let realizations: Vec<Realization> = reals.into_iter().collect::<Result<_>>()?;
    let ok: Vec<&Realization> = realizations.iter().filter(|r| !r.unstable).collect();
    let (mean_delta_f, se_delta_f) = mean_se(&ok.iter().map(|r| r.delta_f).collect::<Vec<_>>());
    let (mean_delta_chi, se_delta_chi) = mean_se(&ok.iter().map(|r| r.delta_chi).collect::<Vec<_>>());
    Ok(MisadjustResult {
        sigma: spec.sigma,
        channels: spec.channels.clone(),
        mean_delta_f,
        se_delta_f,
        mean_delta_chi,
        se_delta_chi,
        excluded: realizations.len() - ok.len(),
        realizations,
    })
}

/// CSV rows `sigma, channels, mean_delta_f, se_delta_f, mean_delta_chi, se_delta_chi, excluded`.
pub fn write_mc_csv<W: Write>(results: &[MisadjustResult], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["sigma", "channels", "mean_delta_f", "se_delta_f", "mean_delta_chi", "se_delta_chi", "excluded"])?;
    for r in results {
        let ch: Vec<&str> = r
            .channels
            .iter()
            .map(|c| match c {
                Channel::Focus => "focus",
                Channel::Tilt => "tilt",
                Channel::Intensity => "intensity",
            })
            .collect();
        wr.write_record([
            format!("{}", r.sigma),
            ch.join("+"),
            format!("{:.6e}", r.mean_delta_f),
            format!("{:.6e}", r.se_delta_f),
            format!("{:.6e}", r.mean_delta_chi),
            format!("{:.6e}", r.se_delta_chi),
            r.excluded.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// switching

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchSpec {
    pub p: usize,
    pub epsilon: f64,
    pub nu0: f64,
    pub k_points: usize,
    /// Pinned slots at the start and end of the protocol.
    pub from: Vec<usize>,
    pub to: Vec<usize>,
}

impl Default for SwitchSpec {
    fn default() -> Self {
        Self { p: 4, epsilon: 0.07, nu0: 0.4, k_points: 100, from: vec![0, 1], to: vec![1, 2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchResult {
    /// `P = K/(ω_x τ_s)²`.
    pub k: f64,
    pub sqrt_k: f64,
}

impl SwitchResult {
    pub fn probability(&self, tau_s: f64) -> f64 {
        self.k / (tau_s * tau_s)
    }
}

/// `W^{λλ'}` for bands `n, n'` at slot `i`, from the real and imaginary
/// parts of the Bloch amplitudes.
pub fn w_matrix(b_n: nalgebra::Complex<f64>, b_np: nalgebra::Complex<f64>) -> [[f64; 2]; 2] {
    let xi_n = [b_n.re, b_n.im];
    let xi_np = [b_np.re, b_np.im];
    let diag = xi_n[0] * xi_np[0] + xi_n[1] * xi_np[1];
    let off = -xi_n[0] * xi_np[1] + xi_n[1] * xi_np[0];
    [[diag, off], [-off, diag]]
}

/// Excitation prefactor of a linear switch of one tweezer off and one on.
pub fn switching_prefactor(spec: &SwitchSpec) -> Result<SwitchResult> {
    if spec.k_points < 1 {
        return invalid("k_points must be at least 1");
    }
    let off: Vec<usize> = spec.from.iter().copied().filter(|s| !spec.to.contains(s)).collect();
    let on: Vec<usize> = spec.to.iter().copied().filter(|s| !spec.from.contains(s)).collect();
    if off.len() != 1 || on.len() != 1 {
        return invalid("switch must move exactly one tweezer");
    }
    let (off, on) = (off[0], on[0]);
    let e2 = spec.nu0 * spec.nu0;
    let mut tot = 0.0;
    for dir in [Direction::X, Direction::Z] {
        for slots in [&spec.from, &spec.to] {
            let mut cfg = CellConfig::new(spec.p, spec.epsilon, spec.nu0).with_direction(dir);
            cfg.pinned_slots = slots.clone();
            let bands = band_structure(&cfg, spec.k_points)?;
            for kk in 0..bands.n_k() {
                let b = &bands.vectors[kk];
                let nu = &bands.freqs[kk];
                for n in 0..spec.p {
                    for np in 0..spec.p {
                        let pref = e2 / (2.0 * (nu[n] * nu[np]).sqrt());
                        let w_on = w_matrix(b[(on, n)], b[(on, np)]);
                        let w_off = w_matrix(b[(off, n)], b[(off, np)]);
                        let mut c2 = 0.0;
                        for l in 0..2 {
                            for lp in 0..2 {
                                c2 += (pref * (w_on[l][lp] - w_off[l][lp])).powi(2);
                            }
                        }
                        tot += c2 / (nu[n] + nu[np]).powi(4) / (2.0 * PI) * (PI / bands.n_k() as f64);
                    }
                }
            }
        }
    }
    let k = tot / 2.0;
    Ok(SwitchResult { k, sqrt_k: k.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{solve_equilibrium, TrapConfig};
    use crate::phonons::{hessian, normal_modes};

    fn pair_chain() -> (IonChain, TweezerArray) {
        let chain = solve_equilibrium(&TrapConfig::new(10, 0.06, 2)).unwrap();
        let tw = TweezerArray::uniform(10, &[4, 5], 0.4);
        (chain, tw)
    }

    #[test]
    fn zero_misadjust_leaves_equilibrium() {
        let (chain, tw) = pair_chain();
        for m in [EquilibriumMethod::Direct, EquilibriumMethod::Perturbative] {
            let r = perturbed_equilibrium(&chain, &tw, m).unwrap();
            for (ri, z) in r.iter().zip(&chain.positions) {
                assert!((ri - Vector3::new(0.0, 0.0, *z)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn perturbative_shift_matches_resolve() {
        let (chain, mut tw) = pair_chain();
        let mut m = vec![Misadjust::default(); 10];
        m[4].focus_shift = [0.01, 0.0, 0.0];
        m[5].focus_shift = [0.0, 0.0, 0.01];
        tw.misadjust = Some(m);
        let a = perturbed_equilibrium(&chain, &tw, EquilibriumMethod::Direct).unwrap();
        let b = perturbed_equilibrium(&chain, &tw, EquilibriumMethod::Perturbative).unwrap();
        let shift: f64 = a.iter().zip(&chain.positions).map(|(r, z)| (r - Vector3::new(0.0, 0.0, *z)).amax()).fold(0.0, f64::max);
        assert!(shift > 1e-3);
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn tilt_changes_curvature_not_equilibrium() {
        let (chain, mut tw) = pair_chain();
        let mut m = vec![Misadjust::default(); 10];
        m[4].theta = 0.05;
        m[4].phi = 0.3;
        tw.misadjust = Some(m);
        let r = perturbed_equilibrium(&chain, &tw, EquilibriumMethod::Direct).unwrap();
        for (ri, z) in r.iter().zip(&chain.positions) {
            assert!((ri - Vector3::new(0.0, 0.0, *z)).amax() < 1e-12);
        }
        let h = hessian_3d(&chain, &tw, &r);
        let h0 = hessian_3d(&chain, &TweezerArray::uniform(10, &[4, 5], 0.4), &r);
        let diff = (&h - &h0).fixed_view::<3, 3>(12, 12).into_owned();
        let expect = 0.16 * (beam_projector(0.05, 0.3) - beam_projector(0.0, 0.0));
        assert!((diff - expect).amax() < 1e-14);
        assert!(h[(12, 13)].abs() > 1e-4);
    }

    #[test]
    fn nominal_3d_modes_reduce_to_x_modes() {
        let (chain, tw) = pair_chain();
        let h3 = hessian_3d(&chain, &tw, &nominal_positions(&chain));
        let hx = hessian(&chain, &tw, Direction::X);
        for i in 0..10 {
            for j in 0..10 {
                assert!((h3[(3 * i, 3 * j)] - hx[(i, j)]).abs() < 1e-13);
            }
        }
        let m3 = perturbed_modes(&chain, &tw, EquilibriumMethod::Direct).unwrap();
        let mx = normal_modes(&chain, &tw, Direction::X).unwrap();
        let mut fx: Vec<f64> = mx.freqs.clone();
        fx.sort_by(f64::total_cmp);
        let mut found = 0;
        for f in &fx {
            if m3.freqs.iter().any(|g| (g - f).abs() < 1e-10) {
                found += 1;
            }
        }
        assert_eq!(found, 10);
    }

    #[test]
    fn sampling_is_reproducible_and_scoped() {
        let (_, tw) = pair_chain();
        let spec = MisadjustSpec::default();
        let a = sample_misadjust(&tw, &spec, 3);
        let b = sample_misadjust(&tw, &spec, 3);
        assert_eq!(a, b);
        let m = a.misadjust.unwrap();
        assert_eq!(m[0], Misadjust::default());
        assert!(m[4].theta != 0.0 && m[4].dw != 0.0);
    }

    #[test]
    fn w_matrices_are_antisymmetric_off_diagonal() {
        let w = w_matrix(nalgebra::Complex::new(0.3, -0.7), nalgebra::Complex::new(-0.2, 0.5));
        assert_eq!(w[0][1], -w[1][0]);
        assert_eq!(w[0][0], w[1][1]);
    }

    #[test]
    fn switching_vanishes_without_pinning_and_scales() {
        let zero = switching_prefactor(&SwitchSpec { nu0: 0.0, k_points: 10, ..Default::default() }).unwrap();
        assert_eq!(zero.k, 0.0);
        let r = switching_prefactor(&SwitchSpec { k_points: 20, ..Default::default() }).unwrap();
        assert!(r.k > 0.0);
        assert!((r.probability(50.0) / r.probability(100.0) - 4.0).abs() < 1e-12);
    }
}
