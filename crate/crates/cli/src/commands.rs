//! The five commands. Each returns its output files without touching the
//! file system, so a failure leaves nothing behind.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toroid_cqed::fitting::{fit_detuning_width, fit_empty_cavity_in, SpectrumTrace, WidthCalibration};
use toroid_cqed::model::{eigenvalues, forward_transmission, EigenSet, SystemParams};
use toroid_cqed::transit::{
    detuning_sweep, simulate_drop, theory_sweep, threshold_events, CorrelationAccumulator, CountHistogram,
    HistogramAccumulator, SweepCurve, SweepOptions, TransitEvent,
};
use toroid_cqed::C64;

use crate::config::{linspace, FitModel, RunConfig};
use crate::output::{opt, OutputFile, Table};
use crate::CliError;

pub fn spectrum(cfg: &RunConfig) -> Result<Vec<OutputFile>, CliError> {
    let s = &cfg.spectrum;
    let params = cfg.system.params()?.with_coupling(s.coupling()?).probe_at_cavity(s.delta_ac);
    let mut table = Table::new("spectrum/1", &["delta_mhz", "t_f"]);
    for d in linspace(s.from, s.to, s.points) {
        let t = forward_transmission(&params.with_probe_detuning(d))?;
        table.row([d.to_string(), t.to_string()]);
    }
    Ok(vec![table.finish("spectrum.csv")])
}

#[derive(Serialize)]
struct Branch {
    /// Eigenfrequency relative to the cavity, MHz.
    re: Vec<f64>,
    /// Decay rate, MHz (negative imaginary part of the eigenvalue).
    decay: Vec<f64>,
    atom_weight: Vec<f64>,
}

#[derive(Serialize)]
struct EigenReport {
    format: &'static str,
    g0: f64,
    kx: f64,
    system: SystemParams,
    delta_ac: Vec<f64>,
    branches: Vec<Branch>,
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn overlap(u: &[C64; 3], v: &[C64; 3]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<C64>().norm()
}

/// `order[k][b]` is the mode of `sets[k]` on branch `b`: consecutive points
/// are matched by the permutation with the largest summed eigenvector
/// overlap.
pub fn track_branches(sets: &[EigenSet]) -> Vec<[usize; 3]> {
    let mut order: Vec<[usize; 3]> = Vec::with_capacity(sets.len());
    for (k, set) in sets.iter().enumerate() {
        if k == 0 {
            order.push([0, 1, 2]);
            continue;
        }
        let prev = order[k - 1].map(|m| sets[k - 1].modes[m].vector);
        let score = |p: &[usize; 3]| (0..3).map(|b| overlap(&prev[b], &set.modes[p[b]].vector)).sum::<f64>();
        let mut best = PERMUTATIONS[0];
        let mut best_score = score(&best);
        for p in &PERMUTATIONS[1..] {
            let s = score(p);
            if s > best_score {
                best = *p;
                best_score = s;
            }
        }
        order.push(best);
    }
    order
}

pub fn eigen(cfg: &RunConfig) -> Result<Vec<OutputFile>, CliError> {
    let e = &cfg.eigen;
    let system = cfg.system.params()?.with_coupling(e.coupling()?);
    let grid = linspace(e.from, e.to, e.points);
    let sets = grid.iter().map(|&d| eigenvalues(&system.probe_at_cavity(d))).collect::<Result<Vec<_>, _>>()?;
    let order = track_branches(&sets);
    let branches = (0..3)
        .map(|b| {
            let modes: Vec<_> = sets.iter().zip(&order).map(|(s, o)| s.modes[o[b]]).collect();
            Branch {
                re: modes.iter().map(|m| m.value.re).collect(),
                decay: modes.iter().map(|m| -m.value.im).collect(),
                atom_weight: modes.iter().map(|m| m.weights[0]).collect(),
            }
        })
        .collect();
    let report = EigenReport { format: "eigen/1", g0: e.g0, kx: e.kx, system, delta_ac: grid, branches };
    Ok(vec![OutputFile::json("eigen.json", &report)])
}

#[derive(Serialize)]
struct Correlation {
    lags_us: Vec<f64>,
    gamma: Vec<f64>,
    at_zero: f64,
    baseline: Option<f64>,
    fwhm_us: Option<f64>,
}

#[derive(Serialize)]
struct DropSummary {
    format: &'static str,
    seed: u64,
    drops: usize,
    g0m: f64,
    delta_ac: f64,
    no_atoms: bool,
    threshold: u32,
    window_ms: [f64; 2],
    events_per_drop: f64,
    /// Events of the first drop.
    events: Vec<TransitEvent>,
    histogram: CountHistogram,
    tail_ratio_c4: Option<f64>,
    correlation: Correlation,
}

pub fn drop(cfg: &RunConfig) -> Result<Vec<OutputFile>, CliError> {
    let d = &cfg.drop;
    if d.drops == 0 {
        return Err(CliError::Config("drops must be at least one".into()));
    }
    let mut transit = cfg.transit(d.g0m)?.at_detuning(d.delta_ac);
    if d.no_atoms {
        transit.cloud.mean_transits_per_drop = 0.0;
    }
    let window = cfg.window(&transit, d.window_half_width_ms)?;
    let records = (0..d.drops as u64)
        .into_par_iter()
        .map(|k| simulate_drop(&transit, cfg.seed, k))
        .collect::<Result<Vec<_>, _>>()?;

    let mut hist = HistogramAccumulator::default();
    let mut corr = CorrelationAccumulator::new(d.max_lag_us, transit.detection.bin_dt_us)?;
    let mut n_events = 0usize;
    let mut first_events = Vec::new();
    for (k, r) in records.iter().enumerate() {
        hist.add(&r.counts, &window);
        corr.add(&r.counts, &window)?;
        let bins = window.bins(&r.counts);
        let events: Vec<_> =
            threshold_events(&r.counts, d.threshold)?.into_iter().filter(|e| bins.contains(&e.first_bin)).collect();
        n_events += events.len();
        if k == 0 {
            first_events = events;
        }
    }
    let histogram = hist.finish()?;
    let gamma = corr.finish()?;
    let baseline = gamma.baseline(d.baseline_lag_us);
    let tail_ratio_c4 = (histogram.poisson_tail(4) > 0.0).then(|| histogram.tail(4) / histogram.poisson_tail(4));

    let first = &records[0];
    let mut table = Table::new("drop-counts/1", &["bin", "t_ms", "det1", "det2", "combined", "t_f"]);
    for k in 0..first.counts.len() {
        let (c1, c2) = (first.counts.det1[k], first.counts.det2[k]);
        table.row([
            k.to_string(),
            first.counts.bin_start_ms(k).to_string(),
            c1.to_string(),
            c2.to_string(),
            (c1 + c2).to_string(),
            first.transmission[k].to_string(),
        ]);
    }
    let summary = DropSummary {
        format: "drop-summary/1",
        seed: cfg.seed,
        drops: d.drops,
        g0m: d.g0m,
        delta_ac: d.delta_ac,
        no_atoms: d.no_atoms,
        threshold: d.threshold,
        window_ms: [window.start_ms.max(first.counts.origin_ms), window.end_ms.min(first.counts.bin_start_ms(first.counts.len()))],
        events_per_drop: n_events as f64 / d.drops as f64,
        events: first_events,
        histogram,
        tail_ratio_c4,
        correlation: Correlation {
            at_zero: gamma.at_zero(),
            fwhm_us: baseline.and_then(|b| gamma.fwhm_us(b)),
            baseline,
            lags_us: gamma.lags_us,
            gamma: gamma.gamma,
        },
    };
    Ok(vec![table.finish("drop_counts.csv"), OutputFile::json("drop_summary.json", &summary)])
}

#[derive(Serialize)]
struct CurveSummary {
    g0m: f64,
    c0: Option<u32>,
    baseline: f64,
    baseline_err: f64,
    half_width: Option<f64>,
    half_width_err: Option<f64>,
}

impl CurveSummary {
    fn of(curve: &SweepCurve) -> Self {
        let hw = curve.half_width().ok();
        Self {
            g0m: curve.g0m,
            c0: curve.threshold,
            baseline: curve.baseline,
            baseline_err: curve.baseline_err,
            half_width: hw.map(|h| h.0),
            half_width_err: hw.map(|h| h.1),
        }
    }
}

#[derive(Serialize)]
struct SweepSummary {
    format: &'static str,
    seed: u64,
    drops_per_point: usize,
    monte_carlo: Vec<CurveSummary>,
    theory: Vec<CurveSummary>,
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<OutputFile>, CliError> {
    let s = &cfg.sweep;
    if s.detunings.is_empty() {
        return Err(CliError::Config("sweep.detunings is empty".into()));
    }
    if s.g0m.is_empty() {
        return Err(CliError::Config("sweep.g0m is empty".into()));
    }
    let mut table = Table::new(
        "sweep/1",
        &["g0m", "c0", "delta_ac", "events", "events_err", "normalized", "normalized_err", "theory", "theory_normalized"],
    );
    let mut summary =
        SweepSummary { format: "sweep-summary/1", seed: cfg.seed, drops_per_point: s.drops, monte_carlo: vec![], theory: vec![] };
    for &g0m in &s.g0m {
        let transit = cfg.transit(g0m)?;
        let theory = theory_sweep(&transit, &s.detunings, g0m, s.averaging, &s.theory_grid)?;
        summary.theory.push(CurveSummary::of(&theory));
        let curves = if s.theory_only {
            Vec::new()
        } else {
            let options = SweepOptions {
                detunings: s.detunings.clone(),
                drops_per_point: s.drops,
                baseline_drops: s.baseline_drops,
                thresholds: s.c0.clone(),
                seed: cfg.seed,
                window: cfg.window(&transit, s.window_half_width_ms)?,
            };
            detuning_sweep(&transit, g0m, &options)?
        };
        if curves.is_empty() {
            for t in &theory.points {
                table.row([
                    g0m.to_string(),
                    String::new(),
                    t.delta_ac.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    t.value.to_string(),
                    opt(t.normalized),
                ]);
            }
        }
        for curve in &curves {
            summary.monte_carlo.push(CurveSummary::of(curve));
            for (p, t) in curve.points.iter().zip(&theory.points) {
                table.row([
                    g0m.to_string(),
                    curve.threshold.map(|c| c.to_string()).unwrap_or_default(),
                    p.delta_ac.to_string(),
                    p.value.to_string(),
                    p.std_err.to_string(),
                    opt(p.normalized),
                    opt(p.normalized_err),
                    t.value.to_string(),
                    opt(t.normalized),
                ]);
            }
        }
    }
    Ok(vec![table.finish("sweep.csv"), OutputFile::json("sweep_summary.json", &summary)])
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads `detuning_mhz, transmission[, sigma]`; `#` lines are comments.
pub fn read_trace(bytes: &[u8]) -> Result<SpectrumTrace, CliError> {
    let bad = |m: String| CliError::Config(format!("input trace: {m}"));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |names: &[&str]| header.iter().position(|h| names.contains(&h));
    let xi = column(&["detuning_mhz", "delta_mhz", "delta_ac"]).ok_or_else(|| bad("no detuning_mhz column".into()))?;
    let yi = column(&["transmission", "t_f"]).ok_or_else(|| bad("no transmission column".into()))?;
    let si = column(&["sigma"]);
    let (mut x, mut y, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| -> Result<f64, CliError> {
            rec.get(i).unwrap_or("").parse().map_err(|_| bad(format!("row {}: bad number in column {}", line + 1, i + 1)))
        };
        x.push(field(xi)?);
        y.push(field(yi)?);
        if let Some(i) = si {
            sigma.push(field(i)?);
        }
    }
    Ok(SpectrumTrace::new(x, y, si.map(|_| sigma))?)
}

#[derive(Serialize)]
struct FitReport<T: Serialize> {
    format: &'static str,
    model: FitModel,
    input_sha256: String,
    points: usize,
    result: T,
}

pub fn fit(cfg: &RunConfig, input: &Path, model: FitModel) -> Result<Vec<OutputFile>, CliError> {
    let bytes = std::fs::read(input).map_err(|e| CliError::Config(format!("cannot read {}: {e}", input.display())))?;
    let input_sha256 = digest(&bytes);
    let trace = read_trace(&bytes)?;
    let points = trace.len();
    let file = match model {
        FitModel::Empty => {
            let result = fit_empty_cavity_in(&trace, None, cfg.fit.regime)?;
            OutputFile::json("fit.json", &FitReport { format: "fit/1", model, input_sha256, points, result })
        }
        FitModel::Width => {
            let system = cfg.system.params()?;
            let calibration = if cfg.fit.calibration_g0m.is_empty() {
                None
            } else {
                let transit = cfg.transit(cfg.sweep.g0m.first().copied().unwrap_or(50.0))?;
                Some(WidthCalibration::build(&transit, &trace.detuning, &cfg.fit.calibration_g0m, &cfg.sweep.theory_grid)?)
            };
            let result = fit_detuning_width(&trace, &system, calibration.as_ref())?;
            OutputFile::json("fit.json", &FitReport { format: "fit/1", model, input_sha256, points, result })
        }
    };
    Ok(vec![file])
}
