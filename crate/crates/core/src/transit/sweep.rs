//! Event rate and averaged transmission versus atom–cavity detuning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{threshold_events, AnalysisWindow};
use super::{simulate_drop, TransitConfig};
use crate::error::{Error, Result};
use crate::geometry::{coupling_at, AtomPosition};
use crate::model::forward_transmission;
use crate::rng::stream_id;

/// Largest accepted `|Δ_AC|`, MHz.
pub const MAX_DETUNING: f64 = 200.0;

/// Coordinates averaged over in the theory curves and sampled in the
/// Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Fixed `ρ` at the inner edge of the shell, `z = 0`; average over `x`.
    XOnly,
    /// Average over `x`, `ρ` across the shell, and `z` within one bin.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta_ac: f64,
    /// Events per drop (Monte Carlo) or averaged `T_F` (theory).
    pub value: f64,
    pub std_err: f64,
    /// `(value − baseline) / (value(0) − baseline)`.
    pub normalized: Option<f64>,
    pub normalized_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub g0m: f64,
    /// Count threshold for Monte Carlo curves.
    pub threshold: Option<u32>,
    /// Value with no atoms.
    pub baseline: f64,
    pub baseline_err: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    fn normalize(&mut self) {
        let Some(reference) = self.points.iter().find(|p| p.delta_ac == 0.0).copied() else {
            return;
        };
        let denom = reference.value - self.baseline;
        if !(denom > 0.0) {
            return;
        }
        for p in &mut self.points {
            let num = p.value - self.baseline;
            let r = num / denom;
            // the shared baseline is treated as independent of both terms
            let var_num = p.std_err.powi(2) + self.baseline_err.powi(2);
            let var_den = reference.std_err.powi(2) + self.baseline_err.powi(2);
            let err = if p.delta_ac == 0.0 {
                0.0
            } else {
                (var_num / (denom * denom) + r * r * var_den / (denom * denom)).sqrt()
            };
            p.normalized = Some(r);
            p.normalized_err = Some(err);
        }
    }

    /// Detuning `Δ_AC > 0` where the normalized curve first falls to one half,
    /// linearly interpolated, with its propagated standard error.
    pub fn half_width(&self) -> Result<(f64, f64)> {
        let mut pts: Vec<&SweepPoint> = self.points.iter().filter(|p| p.delta_ac >= 0.0).collect();
        pts.sort_by(|a, b| a.delta_ac.total_cmp(&b.delta_ac));
        let norm = |p: &SweepPoint| p.normalized.ok_or_else(|| Error::WidthUnresolvable("curve is not normalized".into()));
        for w in pts.windows(2) {
            let (y0, y1) = (norm(w[0])?, norm(w[1])?);
            if y0 >= 0.5 && y1 < 0.5 {
                let dx = w[1].delta_ac - w[0].delta_ac;
                let d = y0 - y1;
                let x = w[0].delta_ac + dx * (y0 - 0.5) / d;
                let e0 = w[0].normalized_err.unwrap_or(0.0);
                let e1 = w[1].normalized_err.unwrap_or(0.0);
                let err = dx / (d * d) * ((0.5 - y1).powi(2) * e0 * e0 + (y0 - 0.5).powi(2) * e1 * e1).sqrt();
                return Ok((x, err));
            }
        }
        Err(Error::WidthUnresolvable("normalized curve never falls below one half".into()))
    }
}

/// Monte Carlo sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    /// Atom–cavity detunings `Δ_AC`, MHz.
    pub detunings: Vec<f64>,
    pub drops_per_point: usize,
    /// Drops without atoms used for the baseline.
    pub baseline_drops: usize,
    /// Count thresholds `C₀`; one curve each.
    pub thresholds: Vec<u32>,
    pub seed: u64,
    /// Events are counted when their first bin starts inside the window.
    pub window: AnalysisWindow,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            detunings: (0..7).map(|k| 10.0 * k as f64).collect(),
            drops_per_point: 500,
            baseline_drops: 200,
            thresholds: vec![6],
            seed: 2007,
            window: AnalysisWindow::all(),
        }
    }
}

impl SweepOptions {
    pub fn validate(&self) -> Result<()> {
        if self.detunings.is_empty() {
            return Err(Error::InvalidRange("no detunings".into()));
        }
        if let Some(d) = self.detunings.iter().find(|d| !(d.abs() <= MAX_DETUNING)) {
            return Err(Error::InvalidRange(format!("detuning {d} MHz outside ±{MAX_DETUNING}")));
        }
        if self.drops_per_point == 0 {
            return Err(Error::InvalidParameter("zero drops per point".into()));
        }
        if self.thresholds.is_empty() || self.thresholds.contains(&0) {
            return Err(Error::InvalidParameter("thresholds must be at least one count".into()));
        }
        Ok(())
    }
}

fn events_per_threshold(config: &TransitConfig, options: &SweepOptions, seed: u64, stream: u64) -> Result<Vec<u32>> {
    let drop = simulate_drop(config, seed, stream)?;
    let bins = options.window.bins(&drop.counts);
    options
        .thresholds
        .iter()
        .map(|&c0| {
            Ok(threshold_events(&drop.counts, c0)?.iter().filter(|e| bins.contains(&e.first_bin)).count() as u32)
        })
        .collect()
}

fn mean_and_error(samples: &[u32]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&v| v as f64).sum::<f64>() / n;
    if samples.len() < 2 {
        // Poisson estimate from a single drop
        return (mean, mean.max(1.0).sqrt());
    }
    let var = samples.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Events per drop versus `Δ_AC` at maximal coupling `g0m`, one curve per
/// threshold. Curves are normalized to the `Δ_AC = 0` point after
/// subtracting the no-atom baseline, when that point is present.
pub fn detuning_sweep(config: &TransitConfig, g0m: f64, options: &SweepOptions) -> Result<Vec<SweepCurve>> {
    options.validate()?;
    if !(g0m >= 0.0) {
        return Err(Error::InvalidParameter(format!("g0m = {g0m}")));
    }
    let base = config.with_max_coupling(g0m);
    base.validate()?;
    let n_drops = options.drops_per_point;
    let units: Vec<(usize, usize)> =
        (0..options.detunings.len()).flat_map(|i| (0..n_drops).map(move |d| (i, d))).collect();
    let per_drop: Vec<Vec<u32>> = units
        .par_iter()
        .map(|&(i, d)| {
            let delta = options.detunings[i];
            let stream = stream_id(&[g0m.to_bits(), delta.to_bits(), d as u64]);
            events_per_threshold(&base.at_detuning(delta), options, options.seed, stream)
        })
        .collect::<Result<_>>()?;

    let mut empty = base;
    empty.cloud.mean_transits_per_drop = 0.0;
    let baseline: Vec<Vec<u32>> = (0..options.baseline_drops)
        .into_par_iter()
        .map(|d| events_per_threshold(&empty, options, options.seed, stream_id(&[u64::MAX, d as u64])))
        .collect::<Result<_>>()?;

    let curves = options
        .thresholds
        .iter()
        .enumerate()
        .map(|(j, &c0)| {
            let (baseline, baseline_err) = if baseline.is_empty() {
                (0.0, 0.0)
            } else {
                mean_and_error(&baseline.iter().map(|v| v[j]).collect::<Vec<_>>())
            };
            let points = options
                .detunings
                .iter()
                .enumerate()
                .map(|(i, &delta_ac)| {
                    let samples: Vec<u32> = per_drop[i * n_drops..(i + 1) * n_drops].iter().map(|v| v[j]).collect();
                    let (value, std_err) = mean_and_error(&samples);
                    SweepPoint { delta_ac, value, std_err, normalized: None, normalized_err: None }
                })
                .collect();
            let mut curve = SweepCurve { g0m, threshold: Some(c0), baseline, baseline_err, points };
            curve.normalize();
            curve
        })
        .collect();
    Ok(curves)
}

/// Quadrature resolution for [`theory_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryGrid {
    /// Points over one period of the standing wave.
    pub nx: usize,
    pub nrho: usize,
    pub nz: usize,
}

impl Default for TheoryGrid {
    fn default() -> Self {
        Self { nx: 32, nrho: 24, nz: 12 }
    }
}

/// Averaged on-resonance `T_F(Δ_AC)` at maximal coupling `g0m`, by midpoint
/// quadrature of the steady-state transmission.
pub fn theory_sweep(
    config: &TransitConfig,
    detunings: &[f64],
    g0m: f64,
    averaging: Averaging,
    grid: &TheoryGrid,
) -> Result<SweepCurve> {
    if detunings.is_empty() {
        return Err(Error::InvalidRange("no detunings".into()));
    }
    if grid.nx == 0 || grid.nrho == 0 || grid.nz == 0 {
        return Err(Error::InvalidParameter("empty quadrature grid".into()));
    }
    if !(g0m >= 0.0) {
        return Err(Error::InvalidParameter(format!("g0m = {g0m}")));
    }
    let cfg = config.with_max_coupling(g0m);
    cfg.validate()?;
    let geom = cfg.geometry;
    let period = geom.wavelength_nm / 2.0;
    let (rho_lo, rho_hi) = cfg.shell.rho_range(&geom);
    // z range covered by one counting bin at the mean fall velocity
    let z_half = cfg.cloud.fall_velocity() * cfg.detection.bin_dt_us * 0.5 * 1e3;
    let mid = |k: usize, n: usize| (k as f64 + 0.5) / n as f64;

    let mut positions = Vec::new();
    match averaging {
        Averaging::XOnly => {
            for i in 0..grid.nx {
                positions.push(AtomPosition::new(rho_lo, mid(i, grid.nx) * period, 0.0));
            }
        }
        Averaging::Full => {
            for i in 0..grid.nx {
                for j in 0..grid.nrho {
                    for l in 0..grid.nz {
                        positions.push(AtomPosition::new(
                            rho_lo + mid(j, grid.nrho) * (rho_hi - rho_lo),
                            mid(i, grid.nx) * period,
                            -z_half + mid(l, grid.nz) * 2.0 * z_half,
                        ));
                    }
                }
            }
        }
    }
    let couplings = positions.iter().map(|p| Ok(coupling_at(&geom, p)?.g_tw)).collect::<Result<Vec<_>>>()?;

    let baseline = forward_transmission(&cfg.system.with_coupling(crate::C64::new(0.0, 0.0)))?;
    let points = detunings
        .par_iter()
        .map(|&delta_ac| {
            if !(delta_ac.abs() <= MAX_DETUNING) {
                return Err(Error::InvalidRange(format!("detuning {delta_ac} MHz outside ±{MAX_DETUNING}")));
            }
            let sys = cfg.system.probe_at_cavity(delta_ac);
            let mut acc = 0.0;
            for &g in &couplings {
                acc += forward_transmission(&sys.with_coupling(g))?;
            }
            Ok(SweepPoint {
                delta_ac,
                value: acc / couplings.len() as f64,
                std_err: 0.0,
                normalized: None,
                normalized_err: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curve = SweepCurve { g0m, threshold: None, baseline, baseline_err: 0.0, points };
    curve.normalize();
    Ok(curve)
}
