//! Run configuration.
//!
//! A TOML document with one table per subsystem. Every table and every key
//! is optional; missing values take the defaults below, which reproduce the
//! experiment (κ = 17.9 MHz, h = 4.9 MHz, γ = 2.6 MHz, g₀ = 70 MHz at the
//! surface, n̄₀ = 0.3). Unknown keys are rejected.
//!
//! ```toml
//! seed = 2007
//! output_dir = "out"
//!
//! [system]
//! kappa = 17.9        # total field decay, MHz
//! h = 4.9             # intermode scattering, MHz
//! gamma = 2.6         # atomic dipole decay, MHz
//! # kappa_ex = 12.0   # taper coupling; critical when absent
//! n0 = 0.3            # empty-cavity photon number setting the probe strength
//!
//! [geometry]          # mode shape, see ModeGeometry
//! [cloud]             # atom source, see CloudParams
//! [shell]             # radial sampling, see Shell
//! [detection]         # counters, see DetectionChain
//!
//! [spectrum]
//! g0 = 50.0           # normal-mode coupling at the atom, MHz
//! kx = 0.7853981634   # standing-wave phase
//! delta_ac = 0.0
//! from = -100.0
//! to = 100.0
//! points = 801
//!
//! [eigen]             # same coupling keys; the grid runs over Δ_AC
//! [drop]
//! [sweep]
//! [fit]
//! ```

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toroid_cqed::fitting::CouplingRegime;
use toroid_cqed::geometry::ModeGeometry;
use toroid_cqed::model::{calibrate_drive, critical_kappa_ex, SystemParams};
use toroid_cqed::transit::{AnalysisWindow, Averaging, CloudParams, DetectionChain, Shell, TheoryGrid, TransitConfig};
use toroid_cqed::C64;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 2007;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub system: SystemSection,
    pub geometry: ModeGeometry,
    pub cloud: CloudParams,
    pub shell: Shell,
    pub detection: DetectionChain,
    pub spectrum: SpectrumSection,
    pub eigen: EigenSection,
    pub drop: DropSection,
    pub sweep: SweepSection,
    pub fit: FitSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
            system: SystemSection::default(),
            geometry: ModeGeometry::default(),
            cloud: CloudParams::default(),
            shell: Shell::default(),
            detection: DetectionChain::default(),
            spectrum: SpectrumSection::default(),
            eigen: EigenSection::default(),
            drop: DropSection::default(),
            sweep: SweepSection::default(),
            fit: FitSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub kappa: f64,
    pub h: f64,
    pub gamma: f64,
    pub kappa_ex: Option<f64>,
    pub n0: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self { kappa: 17.9, h: 4.9, gamma: 2.6, kappa_ex: None, n0: 0.3 }
    }
}

impl SystemSection {
    /// Resonator and probe without an atom, probe at the cavity resonance.
    pub fn params(&self) -> Result<SystemParams, CliError> {
        let base = SystemParams::critical_from_total(self.kappa, self.h, self.gamma)?;
        let params = match self.kappa_ex {
            None => base,
            Some(kex) => {
                let ki = self.kappa - kex;
                if !(ki >= 0.0) {
                    return Err(CliError::Config(format!("kappa_ex = {kex} exceeds kappa = {}", self.kappa)));
                }
                let mut p = base.with_kappa_ex(kex);
                p.kappa_i = ki;
                p
            }
        };
        params.validate()?;
        // the probe strength is set against the critically coupled cavity
        let reference = SystemParams { kappa_ex: critical_kappa_ex(params.kappa_i, params.h)?, ..params };
        Ok(params.with_drive(calibrate_drive(&reference, self.n0)?))
    }
}

/// Coupling of a fixed atom, `g_tw = g0/√2 · e^{ikx}`.
fn coupling(g0: f64, kx: f64) -> Result<C64, CliError> {
    if !(g0 >= 0.0 && g0.is_finite() && kx.is_finite()) {
        return Err(CliError::Config(format!("invalid coupling g0 = {g0}, kx = {kx}")));
    }
    Ok(C64::from_polar(g0 / std::f64::consts::SQRT_2, kx))
}

fn check_grid(from: f64, to: f64, points: usize) -> Result<(), CliError> {
    if !(from.is_finite() && to.is_finite() && to > from) || points < 2 {
        return Err(CliError::Config(format!("bad grid [{from}, {to}] with {points} points")));
    }
    Ok(())
}

pub fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| from + (to - from) * k as f64 / (points - 1) as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub g0: f64,
    pub kx: f64,
    pub delta_ac: f64,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { g0: 50.0, kx: FRAC_PI_4, delta_ac: 0.0, from: -100.0, to: 100.0, points: 801 }
    }
}

impl SpectrumSection {
    pub fn coupling(&self) -> Result<C64, CliError> {
        check_grid(self.from, self.to, self.points)?;
        coupling(self.g0, self.kx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenSection {
    pub g0: f64,
    pub kx: f64,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Default for EigenSection {
    fn default() -> Self {
        Self { g0: 50.0, kx: FRAC_PI_4, from: -100.0, to: 100.0, points: 201 }
    }
}

impl EigenSection {
    pub fn coupling(&self) -> Result<C64, CliError> {
        check_grid(self.from, self.to, self.points)?;
        coupling(self.g0, self.kx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DropSection {
    /// Drops simulated; the count table holds the first one.
    pub drops: usize,
    pub g0m: f64,
    pub delta_ac: f64,
    pub no_atoms: bool,
    pub threshold: u32,
    /// Analysis window around the mean arrival time, ms; whole record when absent.
    pub window_half_width_ms: Option<f64>,
    pub max_lag_us: f64,
    /// Lags beyond which `Γ(τ)` is averaged into its baseline, µs.
    pub baseline_lag_us: f64,
}

impl Default for DropSection {
    fn default() -> Self {
        Self {
            drops: 1,
            g0m: 50.0,
            delta_ac: 0.0,
            no_atoms: false,
            threshold: 6,
            window_half_width_ms: Some(3.0),
            max_lag_us: 30.0,
            baseline_lag_us: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub detunings: Vec<f64>,
    pub drops: usize,
    pub baseline_drops: usize,
    pub c0: Vec<u32>,
    pub g0m: Vec<f64>,
    pub averaging: Averaging,
    pub window_half_width_ms: Option<f64>,
    /// Skip the Monte Carlo and emit theory only.
    pub theory_only: bool,
    pub theory_grid: TheoryGrid,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            detunings: (0..7).map(|k| 10.0 * k as f64).collect(),
            drops: 500,
            baseline_drops: 200,
            c0: vec![6],
            g0m: vec![35.0, 50.0, 65.0],
            averaging: Averaging::Full,
            window_half_width_ms: None,
            theory_only: false,
            theory_grid: TheoryGrid::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// Atom-free doublet: κ_i, κ_ex, h.
    Empty,
    /// Lorentzian in Δ_AC: β and g₀.
    Width,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub model: FitModel,
    /// Known taper coupling regime for empty-cavity fits.
    pub regime: CouplingRegime,
    /// Couplings for the averaged-curve calibration of `g₀ᵐ`; empty skips it.
    pub calibration_g0m: Vec<f64>,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { model: FitModel::Empty, regime: CouplingRegime::Unknown, calibration_g0m: Vec::new() }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Transit simulation settings at maximal coupling `g0m`.
    pub fn transit(&self, g0m: f64) -> Result<TransitConfig, CliError> {
        let mut cfg = TransitConfig::new(self.system.params()?);
        cfg.geometry = self.geometry;
        cfg.cloud = self.cloud;
        cfg.shell = self.shell;
        cfg.detection = self.detection;
        let cfg = cfg.with_max_coupling(g0m);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn window(&self, cfg: &TransitConfig, half_width_ms: Option<f64>) -> Result<AnalysisWindow, CliError> {
        match half_width_ms {
            None => Ok(AnalysisWindow::all()),
            Some(w) if w > 0.0 && w.is_finite() => Ok(AnalysisWindow::centered(cfg.cloud.mean_arrival_ms(), w)),
            Some(w) => Err(CliError::Config(format!("window half width {w} ms"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.system.kappa_ex = Some(12.5);
        cfg.sweep.c0 = vec![4, 5, 6];
        cfg.fit.model = FitModel::Width;
        cfg.fit.regime = CouplingRegime::Under;
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("sed = 3").is_err());
        assert!(RunConfig::parse("[system]\nkapa = 3.0").is_err());
        assert!(RunConfig::parse("[detection]\nbin_dt = 2.0").is_err());
    }

    #[test]
    fn default_system_is_critical_with_weak_probe() {
        let p = RunConfig::default().system.params().unwrap();
        assert!((p.kappa() - 17.9).abs() < 1e-12);
        assert!((p.kappa_ex - (p.kappa_i.powi(2) + p.h.powi(2)).sqrt()).abs() < 1e-12);
        let (na, _) = toroid_cqed::model::intracavity_photons(&p).unwrap();
        assert!((na - 0.3).abs() < 1e-9);
    }

    #[test]
    fn over_large_kappa_ex_is_a_config_error() {
        let cfg = RunConfig::parse("[system]\nkappa_ex = 20.0").unwrap();
        assert!(matches!(cfg.system.params(), Err(CliError::Config(_))));
    }
}
