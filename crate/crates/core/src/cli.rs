// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: versioned JSON configuration, scenario dispatch
//! and artifact writing (manifest, result JSON, CSV tables).
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bands::{band_structure, perturbative_bandwidths, BandStructure, CellConfig, ZETA3};
use crate::chain::{calibrate_gamma_for_epsilon, solve_equilibrium, transverse_margin, IonChain, TrapConfig};
use crate::design::{
    contour_point, delta_f_contour, design_finite, design_infinite, loglog_slope, register_layout, sweep_performance,
    DesignSpec, ModeChoice, Pinning, SweepOptions,
};
use crate::error::{Error, Result};
use crate::feasibility::{
    builtin_species, feasibility_row, wavelength_scan, write_scan_csv, write_table_csv, Operating, SpeciesData,
};
use crate::gatekernel::GateReport;
use crate::optimize::{assign_detunings_iterative, optimize_infinite, optimize_layout, OptimizeSpec};
use crate::phonons::{normal_modes, Direction};
use crate::robustness::{misadjust_mc, switching_prefactor, write_mc_csv, Channel, MisadjustSpec, SwitchSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_ENV: &str = "TWEEZER_OUT";

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<System>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misadjust: Option<MisadjustConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<SwitchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum System {
    Infinite {
        p: usize,
        epsilon: f64,
        nu0: f64,
        #[serde(default)]
        pinned_slots: Option<Vec<usize>>,
        #[serde(default = "default_k_points")]
        k_points: usize,
        #[serde(default)]
        direction: Option<Direction>,
    },
    Finite {
        n_ions: usize,
        n_buffer: usize,
        /// Target register ε; calibrates `gamma_z`. Mutually exclusive with `gamma_z`.
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        gamma_z: Option<f64>,
        #[serde(default)]
        gamma_y: Option<f64>,
        p: usize,
        pinning: Pinning,
        /// Keep only the first `n_gates` pairs.
        #[serde(default)]
        n_gates: Option<usize>,
    },
}

fn default_k_points() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisadjustConfig {
    #[serde(flatten)]
    pub base: MisadjustSpec,
    /// Overrides `sigma` when non-empty.
    #[serde(default)]
    pub sigmas: Vec<f64>,
    /// Overrides `channels` when non-empty; one run per set and sigma.
    #[serde(default)]
    pub channel_sets: Vec<Vec<Channel>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub p: usize,
    pub epsilons: Vec<f64>,
    pub nu0s: Vec<f64>,
    #[serde(default = "default_sweep_k")]
    pub k_points: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub mode: Option<ModeChoice>,
    /// Polish each contour point by root finding.
    #[serde(default)]
    pub refine_contour: bool,
}

fn default_sweep_k() -> usize {
    100
}
fn default_level() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityConfig {
    #[serde(default)]
    pub operating: Operating,
    /// Subset of species names; empty means all.
    #[serde(default)]
    pub species: Vec<String>,
    /// Optional replacement for the embedded data file.
    #[serde(default)]
    pub species_file: Option<PathBuf>,
    #[serde(default)]
    pub scan: Option<ScanRange>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRange {
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub level: Level,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Error,
    Warning,
}

fn err(m: impl Into<String>) -> Diagnostic {
    Diagnostic { level: Level::Error, message: m.into() }
}
fn warn(m: impl Into<String>) -> Diagnostic {
    Diagnostic { level: Level::Warning, message: m.into() }
}

const SECTIONS: [&str; 5] = ["system", "sweep", "switch", "feasibility", "misadjust"];

/// Parse a configuration, listing every missing top-level field at once.
pub fn parse_config(text: &str) -> std::result::Result<Config, Vec<Diagnostic>> {
    let v: Value = serde_json::from_str(text).map_err(|e| vec![err(format!("malformed JSON: {e}"))])?;
    let Some(obj) = v.as_object() else { return Err(vec![err("configuration must be a JSON object")]) };
    let mut missing = Vec::new();
    if !obj.contains_key("schema_version") {
        missing.push(err("missing field `schema_version`"));
    }
    if !SECTIONS.iter().any(|s| obj.contains_key(*s)) {
        missing.push(err(format!("missing field: one of {}", SECTIONS.map(|s| format!("`{s}`")).join(", "))));
    }
    if !missing.is_empty() {
        return Err(missing);
    }
    let cfg: Config = serde_json::from_value(v).map_err(|e| vec![err(format!("schema: {e}"))])?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(vec![err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.schema_version))]);
    }
    Ok(cfg)
}

fn cell_of(sys: &System) -> Option<CellConfig> {
    match sys {
        System::Infinite { p, epsilon, nu0, pinned_slots, direction, .. } => {
            let mut c = CellConfig::new(*p, *epsilon, *nu0);
            if let Some(s) = pinned_slots {
                c.pinned_slots = s.clone();
            }
            if let Some(d) = direction {
                c.direction = *d;
            }
            Some(c)
        }
        System::Finite { .. } => None,
    }
}

fn pinning_ratio(nu0: f64, eps: f64, out: &mut Vec<Diagnostic>) {
    let r = nu0 * nu0 / (eps * eps);
    if r < 10.0 {
        out.push(warn(format!("weak pinning: nu0²/ε² = {r:.2} is below 10; pinned modes will not be localized")));
    }
}

/// Schema and physics sanity checks.
pub fn validate_config(cfg: &Config) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut check = |r: Result<()>, what: &str| {
        if let Err(e) = r {
            out.push(err(format!("{what}: {e}")));
        }
    };
    if let Some(d) = &cfg.design {
        check(d.validate(), "design");
    }
    if let Some(o) = &cfg.optimize {
        check(o.validate(), "optimize");
    }
    if let Some(m) = &cfg.misadjust {
        check(m.base.validate(), "misadjust");
        if m.sigmas.iter().any(|s| !(*s >= 0.0)) {
            out.push(err("misadjust: sigmas must be non-negative"));
        }
    }
    if let Some(f) = &cfg.feasibility {
        if let Err(e) = f.operating.validate() {
            out.push(err(format!("feasibility: {e}")));
        }
    }
    if let Some(s) = &cfg.sweep {
        if s.p < 3 || s.epsilons.is_empty() || s.nu0s.is_empty() {
            out.push(err("sweep: need p ≥ 3 and non-empty epsilon and nu0 grids"));
        }
    }
    if let Some(s) = &cfg.switch {
        if s.p < 3 || !(s.epsilon > 0.0) {
            out.push(err("switch: need p ≥ 3 and epsilon > 0"));
        } else {
            pinning_ratio(s.nu0, s.epsilon, &mut out);
        }
    }
    match &cfg.system {
        Some(sys @ System::Infinite { epsilon, nu0, k_points, .. }) => {
            let cell = cell_of(sys).unwrap();
            if let Err(e) = cell.validate() {
                out.push(err(format!("system: {e}")));
            } else {
                if *k_points < 2 {
                    out.push(err("system: k_points must be at least 2"));
                }
                pinning_ratio(*nu0, *epsilon, &mut out);
                // lowest transverse frequency of the bare lattice at k = π
                let soft = 1.0 - 3.5 * ZETA3 * epsilon * epsilon;
                if soft < 0.25 {
                    out.push(warn(format!("close to the zigzag transition: ν²(k=π) = {soft:.3}")));
                }
            }
        }
        Some(sys @ System::Finite { pinning, .. }) => match build_chain(sys) {
            Ok(chain) => {
                for d in chain.diagnostics() {
                    out.push(warn(d));
                }
                let m = transverse_margin(&chain);
                if m < 0.05 {
                    out.push(warn(format!("close to the zigzag transition: transverse margin {m:.3e}")));
                }
                let eps = chain.epsilon;
                match *pinning {
                    Pinning::Uniform { nu0 } => pinning_ratio(nu0, eps, &mut out),
                    Pinning::Alternating { nu0_a, nu0_b } => pinning_ratio(nu0_a.min(nu0_b), eps, &mut out),
                }
            }
            Err(e) => out.push(err(format!("system: {e}"))),
        },
        None => {}
    }
    out
}

fn build_chain(sys: &System) -> Result<IonChain> {
    let System::Finite { n_ions, n_buffer, epsilon, gamma_z, gamma_y, .. } = sys else {
        return Err(Error::InvalidInput("a finite system is required".into()));
    };
    let mut trap = match (epsilon, gamma_z) {
        (Some(e), None) => calibrate_gamma_for_epsilon(*n_ions, *n_buffer, *e)?,
        (None, Some(g)) => TrapConfig::new(*n_ions, *g, *n_buffer),
        _ => return Err(Error::InvalidInput("finite system needs exactly one of epsilon, gamma_z".into())),
    };
    if let Some(g) = gamma_y {
        trap.gamma_y = *g;
    }
    trap.validate()?;
    solve_equilibrium(&trap)
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "tweezer", version, about = "Tweezer-engineered phonon modes and parallel entangling gates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, env = OUT_ENV, default_value = "tweezer-out")]
    pub out: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Allow writing into a directory that already holds a run.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normal modes of a finite chain.
    Modes(Common),
    /// Phonon band structure of a periodic chain.
    Bands(Common),
    /// Constant-amplitude gate design.
    Design(Common),
    /// Infidelity sweep over (ε, ν₀) and the iso-infidelity contour.
    Sweep(Common),
    /// Segmented-pulse optimization.
    Optimize(Common),
    /// Monte Carlo over tweezer misadjustments.
    Misadjust(Common),
    /// Phonon excitation from switching the tweezer pattern.
    Switch {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        nu0: Option<f64>,
        /// Switching times `ω_x τ_s` at which to report the probability.
        #[arg(long, value_delimiter = ',')]
        tau_s: Vec<f64>,
    },
    /// Tweezer power and scattering infidelity per species.
    Feasibility(Common),
    /// Check a configuration without running it.
    Validate {
        config: PathBuf,
    },
}

/// Failure with its exit code class.
#[derive(Debug)]
pub enum Failure {
    Config(Vec<Diagnostic>),
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Failure::Config(d) => json!({ "error": { "kind": "config", "diagnostics": d } }),
            Failure::Numeric(m) => json!({ "error": { "kind": "numeric", "message": m } }),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(vec![err(e.to_string())])
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn cfg_err<T>(m: impl Into<String>) -> Run<T> {
    Err(Failure::Config(vec![err(m)]))
}

/// Collects artifacts in the output directory.
struct Output {
    dir: PathBuf,
    files: Vec<Value>,
}

impl Output {
    fn open(dir: &Path, force: bool) -> Run<Self> {
        if dir.join("manifest.json").exists() && !force {
            return cfg_err(format!("{} already holds a run; pass --force to overwrite", dir.display()));
        }
        fs::create_dir_all(dir).map_err(|e| Failure::Config(vec![err(format!("cannot create {}: {e}", dir.display()))]))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn csv(&mut self, name: &str, kind: &str, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Run<()> {
        let file = File::create(self.dir.join(name)).map_err(Error::from)?;
        f(BufWriter::new(file))?;
        self.files.push(json!({ "path": name, "kind": kind }));
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Run<()> {
        let s = serde_json::to_string_pretty(v).map_err(Error::from)?;
        fs::write(self.dir.join(name), s + "\n").map_err(Error::from)?;
        self.files.push(json!({ "path": name, "kind": "result" }));
        Ok(())
    }
}

fn load(common: &Common) -> Run<Config> {
    let Some(path) = &common.config else { return cfg_err("--config is required for this command") };
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(vec![err(format!("cannot read {}: {e}", path.display()))]))?;
    let mut cfg = parse_config(&text).map_err(Failure::Config)?;
    if let Some(seed) = common.seed {
        if let Some(o) = cfg.optimize.as_mut() {
            o.seed = seed;
        }
        if let Some(m) = cfg.misadjust.as_mut() {
            m.base.seed = seed;
        }
    }
    let diags = validate_config(&cfg);
    let errors: Vec<Diagnostic> = diags.into_iter().filter(|d| d.level == Level::Error).collect();
    if !errors.is_empty() {
        return Err(Failure::Config(errors));
    }
    Ok(cfg)
}

fn need<'a, T>(v: &'a Option<T>, name: &str) -> Run<&'a T> {
    v.as_ref().ok_or_else(|| Failure::Config(vec![err(format!("configuration lacks a `{name}` section"))]))
}

fn bands_of(sys: &System) -> Run<BandStructure> {
    let cell = cell_of(sys).unwrap();
    let System::Infinite { k_points, .. } = sys else { unreachable!() };
    Ok(band_structure(&cell, *k_points)?)
}

fn finite_layout(sys: &System, chain: &IonChain) -> Run<(crate::phonons::TweezerArray, Vec<(usize, usize)>)> {
    let System::Finite { p, pinning, n_gates, .. } = sys else { unreachable!() };
    let (tw, mut pairs) = register_layout(chain, *p, pinning)?;
    truncate_pairs(&mut pairs, *n_gates);
    Ok((tw, pairs))
}

fn truncate_pairs(pairs: &mut Vec<(usize, usize)>, n: Option<usize>) {
    if let Some(n) = n {
        pairs.truncate(n);
    }
}

fn report_json(r: &GateReport) -> Value {
    json!({
        "delta_f": r.delta_f,
        "delta_chi": r.delta_chi,
        "crosstalk": r.crosstalk,
        "crosstalk_tail": r.crosstalk_tail,
        "max_amplitude": r.max_amplitude,
        "n_gates": r.n_gates,
        "n_th": r.n_th,
    })
}

fn write_chi(out: &mut Output, r: &GateReport) -> Run<()> {
    out.csv("chi.csv", "coupling matrix entries", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["a", "b", "chi"])?;
        for e in &r.chi {
            wr.write_record([e.a.to_string(), e.b.to_string(), format!("{:.12e}", e.chi)])?;
        }
        wr.flush()?;
        Ok(())
    })
}

fn cmd_modes(cfg: &Config, out: &mut Output) -> Run<Value> {
    let sys = need(&cfg.system, "system")?;
    if !matches!(sys, System::Finite { .. }) {
        return cfg_err("modes needs a finite system; use `bands` for periodic chains");
    }
    let chain = build_chain(sys)?;
    let (tw, _) = finite_layout(sys, &chain)?;
    let modes = normal_modes(&chain, &tw, Direction::X)?;
    out.csv("modes.csv", "finite-chain mode spectrum and vectors", |w| modes.write_csv(w))?;
    Ok(json!({
        "epsilon": chain.epsilon,
        "gamma_z": chain.trap.gamma_z,
        "spacing_rel_std": chain.spacing_rel_std(),
        "freqs": modes.freqs,
        "orthonormality_error": modes.orthonormality_error(),
        "diagnostics": chain.diagnostics(),
    }))
}

fn cmd_bands(cfg: &Config, out: &mut Output) -> Run<Value> {
    let sys = need(&cfg.system, "system")?;
    if !matches!(sys, System::Infinite { .. }) {
        return cfg_err("bands needs an infinite system");
    }
    let b = bands_of(sys)?;
    out.csv("bands.csv", "phonon band structure nu(k)", |w| b.write_csv(w))?;
    let (c, s) = b.com_stretch_bands();
    let pert = perturbative_bandwidths(&b.cfg).ok();
    Ok(json!({
        "centers": (0..b.p()).map(|n| b.band_center(n)).collect::<Vec<_>>(),
        "bandwidths": (0..b.p()).map(|n| b.bandwidth(n)).collect::<Vec<_>>(),
        "com_band": c,
        "stretch_band": s,
        "perturbative_bandwidths": pert.map(|(a, b)| json!({ "com": a, "stretch": b })),
        "reconstruction_error": b.reconstruction_error(),
    }))
}

fn design_spec(cfg: &Config) -> DesignSpec {
    cfg.design.clone().unwrap_or_else(|| DesignSpec::new(ModeChoice::Stretch))
}

fn cmd_design(cfg: &Config, out: &mut Output) -> Run<Value> {
    let sys = need(&cfg.system, "system")?;
    let spec = design_spec(cfg);
    match sys {
        System::Infinite { .. } => {
            let b = bands_of(sys)?;
            let d = design_infinite(&b, &spec)?;
            write_chi(out, &d.report)?;
            Ok(json!({
                "mode": d.mode,
                "mu": d.mu,
                "mu_seed": d.mu_seed,
                "tau": d.tau,
                "amplitude": d.amplitude,
                "com_center": d.com_center,
                "stretch_center": d.stretch_center,
                "report": report_json(&d.report),
            }))
        }
        System::Finite { .. } => {
            let chain = build_chain(sys)?;
            let (tw, pairs) = finite_layout(sys, &chain)?;
            let d = design_finite(&chain, &tw, &pairs, &spec)?;
            write_chi(out, &d.report)?;
            out.csv("pairs.csv", "per-gate detuning, duration and Rabi frequency", |w| {
                let mut wr = csv::Writer::from_writer(w);
                wr.write_record(["a", "b", "mu", "tau", "amp_a", "amp_b", "delta_f"])?;
                for p in &d.pairs {
                    wr.write_record([
                        p.a.to_string(),
                        p.b.to_string(),
                        format!("{:.12e}", p.mu),
                        format!("{:.12e}", p.tau),
                        format!("{:.12e}", p.amp_a),
                        format!("{:.12e}", p.amp_b),
                        format!("{:.12e}", p.delta_f),
                    ])?;
                }
                wr.flush()?;
                Ok(())
            })?;
            let max_tau = d.pairs.iter().map(|p| p.tau).fold(0.0, f64::max);
            Ok(json!({ "epsilon": chain.epsilon, "max_tau": max_tau, "report": report_json(&d.report) }))
        }
    }
}

fn cmd_sweep(cfg: &Config, out: &mut Output) -> Run<Value> {
    let s = need(&cfg.sweep, "sweep")?;
    let mut opts = SweepOptions { k_points: s.k_points, spec: design_spec(cfg) };
    if let Some(m) = s.mode {
        opts.spec = DesignSpec { mode: m, ..opts.spec };
    }
    let points = sweep_performance(s.p, &s.epsilons, &s.nu0s, &opts)?;
    let mut contour = delta_f_contour(&points, s.level);
    if s.refine_contour {
        let mut eps = s.epsilons.clone();
        eps.sort_by(f64::total_cmp);
        contour = contour
            .iter()
            .map(|c| {
                let lo = eps.iter().rev().find(|&&e| e <= c.epsilon).copied().unwrap_or(eps[0]);
                let hi = eps.iter().find(|&&e| e >= c.epsilon).copied().unwrap_or(eps[eps.len() - 1]);
                if hi > lo {
                    contour_point(s.p, c.nu0, s.level, lo, hi, &opts).unwrap_or(*c)
                } else {
                    *c
                }
            })
            .collect();
    }
    out.csv("sweep.csv", "infidelity and crosstalk over (epsilon, nu0)", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epsilon", "nu0", "delta_f", "crosstalk", "tau", "mu", "amplitude", "insufficient_pinning", "failed"])?;
        for p in &points {
            wr.write_record([
                format!("{:.6e}", p.epsilon),
                format!("{:.6e}", p.nu0),
                format!("{:.6e}", p.delta_f),
                format!("{:.6e}", p.crosstalk),
                format!("{:.6e}", p.tau),
                format!("{:.9e}", p.mu),
                format!("{:.6e}", p.amplitude),
                p.insufficient_pinning.to_string(),
                p.failed.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    out.csv("contour.csv", "iso-infidelity contour: gate time and crosstalk", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["nu0", "epsilon", "tau", "crosstalk", "delta_f"])?;
        for c in &contour {
            wr.write_record([c.nu0, c.epsilon, c.tau, c.crosstalk, c.delta_f].map(|v| format!("{v:.6e}")))?;
        }
        wr.flush()?;
        Ok(())
    })?;
    let slope = if contour.len() >= 2 {
        let x: Vec<f64> = contour.iter().map(|c| c.nu0).collect();
        let y: Vec<f64> = contour.iter().map(|c| c.tau).collect();
        loglog_slope(&x, &y).ok()
    } else {
        None
    };
    Ok(json!({ "level": s.level, "contour": contour, "tau_vs_nu0_slope": slope, "n_points": points.len() }))
}

fn cmd_optimize(cfg: &Config, out: &mut Output) -> Run<Value> {
    let sys = need(&cfg.system, "system")?;
    let spec = cfg.optimize.clone().unwrap_or_default();
    match sys {
        System::Infinite { .. } => {
            let b = bands_of(sys)?;
            let r = optimize_infinite(&b, &spec)?;
            for (i, s) in r.sets.iter().enumerate() {
                out.csv(&format!("set{i}_amplitudes.csv"), "segment amplitudes and sine spectrum", |w| s.write_csv(w))?;
                out.csv(&format!("set{i}_cost.csv"), "optimized cost versus detuning", |w| s.write_curve_csv(w))?;
            }
            write_chi(out, &r.report)?;
            let sets: Vec<Value> = r
                .sets
                .iter()
                .map(|s| {
                    json!({
                        "slots": s.slots, "mu": s.mu, "cost": s.cost.l, "l_alpha": s.cost.l_alpha,
                        "l_chi": s.cost.l_chi, "odd_fraction": s.odd_fraction, "converged": s.converged,
                    })
                })
                .collect();
            Ok(json!({ "sets": sets, "converged": r.converged, "report": report_json(&r.report) }))
        }
        System::Finite { p, pinning, n_gates, .. } => {
            let chain = build_chain(sys)?;
            let (tw, mut pairs) = optimize_layout(&chain, *p, |c| pinning.nu0_of_pair(c))?;
            truncate_pairs(&mut pairs, *n_gates);
            let r = assign_detunings_iterative(&chain, &tw, &pairs, &spec)?;
            write_chi(out, &r.report)?;
            out.csv("pairs.csv", "per-gate detuning and segment amplitudes", |w| {
                let mut wr = csv::Writer::from_writer(w);
                let mut head = vec!["a".to_string(), "b".into(), "mu".into(), "delta_f".into(), "below_threshold".into()];
                head.extend((0..spec.segments).map(|s| format!("amp_a_{s}")));
                head.extend((0..spec.segments).map(|s| format!("amp_b_{s}")));
                wr.write_record(&head)?;
                for p in &r.pairs {
                    let mut row = vec![
                        p.a.to_string(),
                        p.b.to_string(),
                        format!("{:.12e}", p.choice.mu),
                        format!("{:.6e}", p.choice.delta_f),
                        p.below_thresh.to_string(),
                    ];
                    row.extend(p.choice.amps_a.iter().chain(&p.choice.amps_b).map(|v| format!("{v:.12e}")));
                    wr.write_record(&row)?;
                }
                wr.flush()?;
                Ok(())
            })?;
            Ok(json!({ "epsilon": chain.epsilon, "changes": r.changes, "report": report_json(&r.report) }))
        }
    }
}

fn cmd_misadjust(cfg: &Config, out: &mut Output) -> Run<Value> {
    let sys = need(&cfg.system, "system")?;
    let m = need(&cfg.misadjust, "misadjust")?;
    if !matches!(sys, System::Finite { .. }) {
        return cfg_err("misadjust needs a finite system");
    }
    let chain = build_chain(sys)?;
    let (tw, pairs) = finite_layout(sys, &chain)?;
    let d = design_finite(&chain, &tw, &pairs, &design_spec(cfg))?;
    let sigmas = if m.sigmas.is_empty() { vec![m.base.sigma] } else { m.sigmas.clone() };
    let sets = if m.channel_sets.is_empty() { vec![m.base.channels.clone()] } else { m.channel_sets.clone() };
    let mut results = Vec::new();
    for ch in &sets {
        for &sigma in &sigmas {
            let spec = MisadjustSpec { sigma, channels: ch.clone(), ..m.base.clone() };
            results.push(misadjust_mc(&chain, &tw, &d.schedule, &d.layer, &spec)?);
        }
    }
    out.csv("misadjust.csv", "mean infidelity and over-rotation versus misadjustment width", |w| write_mc_csv(&results, w))?;
    let summary: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "sigma": r.sigma, "channels": r.channels,
                "mean_delta_f": r.mean_delta_f, "se_delta_f": r.se_delta_f,
                "mean_delta_chi": r.mean_delta_chi, "se_delta_chi": r.se_delta_chi,
                "excluded": r.excluded,
            })
        })
        .collect();
    Ok(json!({ "nominal": report_json(&d.report), "runs": summary }))
}

fn cmd_switch(cfg: Option<&Config>, p: Option<usize>, eps: Option<f64>, nu0: Option<f64>, taus: &[f64]) -> Run<Value> {
    let mut spec = cfg.and_then(|c| c.switch.clone()).unwrap_or_default();
    if let Some(p) = p {
        spec.p = p;
    }
    if let Some(e) = eps {
        spec.epsilon = e;
    }
    if let Some(n) = nu0 {
        spec.nu0 = n;
    }
    let r = switching_prefactor(&spec)?;
    let probs: Vec<Value> = taus.iter().map(|&t| json!({ "tau_s": t, "probability": r.probability(t) })).collect();
    Ok(json!({ "spec": spec, "k": r.k, "sqrt_k": r.sqrt_k, "probabilities": probs }))
}

fn cmd_feasibility(cfg: Option<&Config>, out: &mut Output) -> Run<Value> {
    let fc = cfg.and_then(|c| c.feasibility.clone()).unwrap_or(FeasibilityConfig {
        operating: Operating::default(),
        species: Vec::new(),
        species_file: None,
        scan: None,
    });
    let data: Vec<SpeciesData> = match &fc.species_file {
        Some(p) => {
            let f = File::open(p).map_err(|e| Failure::Config(vec![err(format!("cannot read {}: {e}", p.display()))]))?;
            crate::feasibility::load_species(f)?.species
        }
        None => builtin_species().species,
    };
    let chosen: Vec<SpeciesData> = if fc.species.is_empty() {
        data
    } else {
        let mut v = Vec::new();
        for name in &fc.species {
            match data.iter().find(|s| s.name.eq_ignore_ascii_case(name)) {
                Some(s) => v.push(s.clone()),
                None => return cfg_err(format!("unknown species '{name}'")),
            }
        }
        v
    };
    let rows = chosen
        .iter()
        .map(|s| feasibility_row(s, s.default_wavelength_nm, &fc.operating))
        .collect::<Result<Vec<_>>>()?;
    out.csv("feasibility.csv", "tweezer power and scattering infidelity per species", |w| write_table_csv(&rows, w))?;
    if let Some(sc) = fc.scan {
        for s in &chosen {
            let scan = wavelength_scan(s, sc.lo_nm, sc.hi_nm, sc.points, &fc.operating)?;
            out.csv(&format!("scan_{}.csv", s.name), "scattering infidelity versus tweezer wavelength", |w| {
                write_scan_csv(&s.name, &scan, w)
            })?;
        }
    }
    Ok(json!({ "operating": fc.operating, "rows": rows }))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn init_threads(n: usize) {
    if n > 0 {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Run one parsed command line. Writes artifacts and returns the result JSON.
pub fn run(cli: Cli) -> Run<Value> {
    let (name, common) = match &cli.command {
        Command::Validate { config } => {
            let text = fs::read_to_string(config)
                .map_err(|e| Failure::Config(vec![err(format!("cannot read {}: {e}", config.display()))]))?;
            let cfg = parse_config(&text).map_err(Failure::Config)?;
            let diags = validate_config(&cfg);
            if diags.iter().any(|d| d.level == Level::Error) {
                return Err(Failure::Config(diags));
            }
            return Ok(json!({ "diagnostics": diags }));
        }
        Command::Modes(c) => ("modes", c),
        Command::Bands(c) => ("bands", c),
        Command::Design(c) => ("design", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Optimize(c) => ("optimize", c),
        Command::Misadjust(c) => ("misadjust", c),
        Command::Switch { common, .. } => ("switch", common),
        Command::Feasibility(c) => ("feasibility", c),
    };
    init_threads(common.threads);
    let optional = matches!(cli.command, Command::Switch { .. } | Command::Feasibility(_));
    let cfg = if optional && common.config.is_none() { None } else { Some(load(common)?) };
    let mut out = Output::open(&common.out, common.force)?;
    let start_unix = unix_now();
    let t0 = Instant::now();
    let result = match &cli.command {
        Command::Modes(_) => cmd_modes(cfg.as_ref().unwrap(), &mut out)?,
        Command::Bands(_) => cmd_bands(cfg.as_ref().unwrap(), &mut out)?,
        Command::Design(_) => cmd_design(cfg.as_ref().unwrap(), &mut out)?,
        Command::Sweep(_) => cmd_sweep(cfg.as_ref().unwrap(), &mut out)?,
        Command::Optimize(_) => cmd_optimize(cfg.as_ref().unwrap(), &mut out)?,
        Command::Misadjust(_) => cmd_misadjust(cfg.as_ref().unwrap(), &mut out)?,
        Command::Switch { p, epsilon, nu0, tau_s, .. } => cmd_switch(cfg.as_ref(), *p, *epsilon, *nu0, tau_s)?,
        Command::Feasibility(_) => cmd_feasibility(cfg.as_ref(), &mut out)?,
        Command::Validate { .. } => unreachable!(),
    };
    let elapsed = t0.elapsed().as_secs_f64();
    out.json("result.json", &json!({ "command": name, "result": result }))?;
    let manifest = json!({
        "tool": "tweezer-gates",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config": cfg,
        "seed": common.seed,
        "threads": rayon::current_num_threads(),
        "started_unix": start_unix,
        "elapsed_s": elapsed,
        "files": out.files,
    });
    let s = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
    fs::write(out.dir.join("manifest.json"), s + "\n").map_err(Error::from)?;
    Ok(result)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            0
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.exit_code()
        }
    }
}
