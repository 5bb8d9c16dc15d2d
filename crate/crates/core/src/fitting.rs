//! Parameter extraction from transmission spectra and detuning curves.
//!
//! All fits use a damped Gauss–Newton (Levenberg–Marquardt) iteration with
//! Marquardt's diagonal scaling and a central-difference Jacobian.
//! Uncertainties come from the linearized covariance at the optimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::transit::{theory_sweep, Averaging, TheoryGrid, TransitConfig};
use crate::C64;

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-12;
pub const MIN_TRACE_POINTS: usize = 8;
pub const MIN_CURVE_POINTS: usize = 5;

/// Sampled transmission, `T_F` against detuning in MHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub detuning: Vec<f64>,
    pub transmission: Vec<f64>,
    /// Per-point standard deviation; unweighted when absent.
    pub sigma: Option<Vec<f64>>,
    pub label: Option<String>,
}

impl SpectrumTrace {
    pub fn new(detuning: Vec<f64>, transmission: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        let trace = Self { detuning, transmission, sigma, label: None };
        trace.check(MIN_TRACE_POINTS)?;
        Ok(trace)
    }

    fn check(&self, min_points: usize) -> Result<()> {
        let n = self.detuning.len();
        if self.transmission.len() != n || self.sigma.as_ref().is_some_and(|s| s.len() != n) {
            return Err(Error::InvalidData("columns differ in length".into()));
        }
        if n < min_points {
            return Err(Error::InvalidData(format!("{n} points, need at least {min_points}")));
        }
        if !self.detuning.iter().all(|d| d.is_finite()) {
            return Err(Error::InvalidData("non-finite detuning".into()));
        }
        if !self.transmission.iter().all(|t| t.is_finite() && *t >= 0.0) {
            return Err(Error::InvalidData("transmission must be finite and non-negative".into()));
        }
        if let Some(s) = &self.sigma {
            if !s.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidData("sigma must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning.is_empty()
    }

    pub fn span(&self) -> f64 {
        let (lo, hi) = self.detuning.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
        hi - lo
    }

    fn sorted(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.detuning.iter().copied().zip(self.transmission.iter().copied()).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// One standard deviation; zero for pinned parameters.
    pub uncertainty: f64,
    pub pinned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// `‖r‖₂` of the (weighted) residuals.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |p| p.value)
    }

    pub fn uncertainty(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |p| p.uncertainty)
    }
}

struct Outcome {
    params: Vec<f64>,
    cost: f64,
    jacobian: DMatrix<f64>,
    iterations: usize,
}

fn residual_vector<F: Fn(&[f64]) -> Vec<f64>>(f: &F, p: &[f64]) -> DVector<f64> {
    DVector::from_vec(f(p))
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, p: &[f64], m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1e-3);
        q[k] = p[k] + h;
        let up = f(&q);
        q[k] = p[k] - h;
        let down = f(&q);
        q[k] = p[k];
        for i in 0..m {
            j[(i, k)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    j
}

fn levenberg_marquardt<F: Fn(&[f64]) -> Vec<f64>>(f: &F, start: &[f64]) -> Result<Outcome> {
    let mut p = start.to_vec();
    let mut r = residual_vector(f, &p);
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidData("model is not finite at the initial guess".into()));
    }
    let m = r.len();
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for iteration in 1..=MAX_ITERATIONS {
        let j = jacobian(f, &p, m);
        if cost == 0.0 {
            return Ok(Outcome { params: p, cost, jacobian: j, iterations: iteration });
        }
        let a = j.transpose() * &j;
        let g = j.transpose() * &r;
        let max_diag = a.diagonal().max();
        loop {
            let mut damped = a.clone();
            for k in 0..p.len() {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12 * max_diag).max(f64::MIN_POSITIVE);
            }
            let step = damped.cholesky().map(|c| c.solve(&(-&g)));
            let Some(step) = step else {
                lambda *= 4.0;
                if lambda > 1e16 {
                    return Err(Error::RankDeficient("normal equations are singular".into()));
                }
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = residual_vector(f, &trial);
            let trial_cost = r_trial.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                p = trial;
                r = r_trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                if step.norm() <= STEP_TOLERANCE * (p_norm + STEP_TOLERANCE) {
                    let j = jacobian(f, &p, m);
                    return Ok(Outcome { params: p, cost, jacobian: j, iterations: iteration });
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // no descent direction left: the step has shrunk below tolerance
                return Ok(Outcome { params: p, cost, jacobian: j, iterations: iteration });
            }
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS })
}

/// `(JᵀJ)⁻¹`, or an error when the columns of `J` are (nearly) dependent.
fn covariance(j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    // scale columns so the condition number reflects identifiability
    let norms: Vec<f64> = (0..j.ncols()).map(|k| j.column(k).norm()).collect();
    if norms.iter().any(|&n| n == 0.0 || !n.is_finite()) {
        return Err(Error::RankDeficient("a parameter does not affect the model".into()));
    }
    let mut scaled = j.clone();
    for (k, n) in norms.iter().enumerate() {
        scaled.column_mut(k).unscale_mut(*n);
    }
    let sv = scaled.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo > 1e-8 * hi) {
        return Err(Error::RankDeficient(format!("Jacobian condition {:.3e}", hi / lo)));
    }
    let inv = (scaled.transpose() * &scaled)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("normal matrix not invertible".into()))?;
    Ok(DMatrix::from_fn(inv.nrows(), inv.ncols(), |a, b| inv[(a, b)] / (norms[a] * norms[b])))
}

fn uncertainties(outcome: &Outcome, weighted: bool) -> Result<Vec<f64>> {
    let cov = covariance(&outcome.jacobian)?;
    let (m, n) = outcome.jacobian.shape();
    let scale = if weighted || m <= n { 1.0 } else { outcome.cost / (m - n) as f64 };
    Ok((0..n).map(|k| (cov[(k, k)] * scale).max(0.0).sqrt()).collect())
}

/// Empty-cavity forward transmission `|1 − 2κ_ex(κ+iδ)/((κ+iδ)² + h²)|²`.
pub fn empty_cavity_model(kappa_i: f64, kappa_ex: f64, h: f64, delta: f64) -> f64 {
    let z = C64::new(kappa_i + kappa_ex, delta);
    (C64::new(1.0, 0.0) - 2.0 * kappa_ex * z / (z * z + h * h)).norm_sqr()
}

/// Starting point for [`fit_empty_cavity`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptyCavityGuess {
    pub kappa_i: f64,
    pub kappa_ex: f64,
    pub h: f64,
    pub center: f64,
    pub amplitude: f64,
}

const EMPTY_NAMES: [&str; 5] = ["kappa_i", "kappa_ex", "h", "center", "amplitude"];

impl EmptyCavityGuess {
    fn to_vec(self) -> [f64; 5] {
        [self.kappa_i, self.kappa_ex, self.h, self.center, self.amplitude]
    }

    /// Estimate from the dip: amplitude from the wings, `κ` from the dip
    /// width, `h` from the splitting of two minima (a quarter linewidth
    /// when only one is seen), `κ_ex` from the depth on the under-coupled
    /// branch.
    pub fn from_trace(trace: &SpectrumTrace) -> Result<Self> {
        let pts = trace.sorted();
        let n = pts.len();
        let edge = (n / 10).max(1);
        let amplitude = (pts[..edge].iter().chain(&pts[n - edge..]).map(|p| p.1).sum::<f64>()) / (2 * edge) as f64;
        let (imin, &(_, tmin)) =
            pts.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).expect("non-empty trace");
        if !(amplitude > 0.0) || tmin > 0.9 * amplitude {
            return Err(Error::WidthUnresolvable("no resonance dip in the trace".into()));
        }
        let half = 0.5 * (amplitude + tmin);
        let mut lo = imin;
        while lo > 0 && pts[lo].1 < half {
            lo -= 1;
        }
        let mut hi = imin;
        while hi + 1 < n && pts[hi].1 < half {
            hi += 1;
        }
        let full_width = (pts[hi].0 - pts[lo].0).max(1e-6);

        // local minima below the half level, separated by a bump
        let minima: Vec<usize> = (1..n - 1)
            .filter(|&k| pts[k].1 < half && pts[k].1 <= pts[k - 1].1 && pts[k].1 <= pts[k + 1].1)
            .collect();
        let doublet = match (minima.first(), minima.last()) {
            (Some(&a), Some(&b)) if b > a => {
                let bump = pts[a..=b].iter().map(|p| p.1).fold(0.0, f64::max);
                (bump > pts[a].1.max(pts[b].1) + 0.05 * (amplitude - tmin)).then_some((a, b))
            }
            _ => None,
        };
        let (h, center, kappa) = match doublet {
            Some((a, b)) => {
                let h = 0.5 * (pts[b].0 - pts[a].0);
                (h, 0.5 * (pts[a].0 + pts[b].0), (0.5 * (full_width - 2.0 * h)).max(0.25 * h))
            }
            None => {
                let kappa = 0.5 * full_width;
                (0.25 * kappa, pts[imin].0, kappa)
            }
        };
        let depth = (tmin / amplitude).clamp(0.0, 1.0).sqrt();
        let kappa_ex = (0.5 * kappa * (1.0 - depth)).max(0.05 * kappa);
        Ok(Self { kappa_i: kappa - kappa_ex, kappa_ex, h, center, amplitude })
    }
}

fn weights(trace: &SpectrumTrace) -> Vec<f64> {
    match &trace.sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; trace.len()],
    }
}

fn fit_empty_once(trace: &SpectrumTrace, start: [f64; 5], free_h: bool) -> Result<(Outcome, Vec<f64>)> {
    let w = weights(trace);
    let h_fixed = start[2];
    let expand = |q: &[f64]| -> [f64; 5] {
        if free_h {
            [q[0], q[1], q[2], q[3], q[4]]
        } else {
            [q[0], q[1], h_fixed, q[2], q[3]]
        }
    };
    let model = |q: &[f64]| -> Vec<f64> {
        let [ki, kex, h, c, a] = expand(q);
        trace
            .detuning
            .iter()
            .zip(&trace.transmission)
            .zip(&w)
            .map(|((&d, &t), &wi)| (a * empty_cavity_model(ki, kex, h, d - c) - t) * wi)
            .collect()
    };
    let q0: Vec<f64> = if free_h { start.to_vec() } else { vec![start[0], start[1], start[3], start[4]] };
    let out = levenberg_marquardt(&model, &q0)?;
    let full = expand(&out.params).to_vec();
    Ok((out, full))
}

/// Known taper coupling regime. A single transmission trace barely
/// distinguishes `κ_i > κ_ex` from its over-coupled counterpart.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingRegime {
    #[default]
    Unknown,
    /// `κ_i ≥ κ_ex`.
    Under,
    /// `κ_ex ≥ κ_i`.
    Over,
}

impl CouplingRegime {
    fn admits(self, kappa_i: f64, kappa_ex: f64) -> bool {
        match self {
            CouplingRegime::Unknown => true,
            CouplingRegime::Under => kappa_i >= kappa_ex,
            CouplingRegime::Over => kappa_ex >= kappa_i,
        }
    }
}

/// Fit `(κ_i, κ_ex, h, center, amplitude)` to an atom-free spectrum.
///
/// The fit is started from `guess` and from an estimate read off the trace,
/// each also with `κ_i ↔ κ_ex` swapped; the lowest residual wins. When
/// `h` is not identifiable it is pinned at zero and the result is flagged.
pub fn fit_empty_cavity(trace: &SpectrumTrace, guess: Option<EmptyCavityGuess>) -> Result<FitResult> {
    fit_empty_cavity_in(trace, guess, CouplingRegime::Unknown)
}

/// [`fit_empty_cavity`] keeping only minima in the given coupling regime.
pub fn fit_empty_cavity_in(
    trace: &SpectrumTrace,
    guess: Option<EmptyCavityGuess>,
    regime: CouplingRegime,
) -> Result<FitResult> {
    trace.check(MIN_TRACE_POINTS)?;
    let estimate = EmptyCavityGuess::from_trace(trace);
    let mut starts = Vec::new();
    for g in [guess.map(Ok), Some(estimate.clone())].into_iter().flatten() {
        let g = match g {
            Ok(g) => g.to_vec(),
            Err(e) if guess.is_none() => return Err(e),
            Err(_) => continue,
        };
        starts.push(g);
        starts.push([g[1], g[0], g[2], g[3], g[4]]);
    }

    let mut best: Option<(Outcome, Vec<f64>)> = None;
    let mut last_err = None;
    for s in starts {
        match fit_empty_once(trace, s, true) {
            Ok(fit) if !regime.admits(fit.1[0], fit.1[1]) => {
                last_err = Some(Error::NonConvergence { iterations: fit.0.iterations });
            }
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.0.cost < b.0.cost) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((mut outcome, mut full)) = best else {
        return Err(last_err.unwrap_or(Error::NonConvergence { iterations: MAX_ITERATIONS }));
    };
    let mut iterations = outcome.iterations;
    let kappa = full[0] + full[1];
    let mut flags = Vec::new();

    let unc = match uncertainties(&outcome, trace.sigma.is_some()) {
        Ok(u) if full[2].abs() > 1e-4 * kappa.abs() => {
            full[2] = full[2].abs();
            u
        }
        _ => {
            let mut start = full.clone();
            start[2] = 0.0;
            let refit = fit_empty_once(trace, [start[0], start[1], 0.0, start[3], start[4]], false)?;
            iterations += refit.0.iterations;
            outcome = refit.0;
            full = refit.1;
            flags.push("h pinned at 0: no resolvable mode splitting".to_string());
            let u = uncertainties(&outcome, trace.sigma.is_some())?;
            vec![u[0], u[1], 0.0, u[2], u[3]]
        }
    };
    if !(full[0] > 0.0 && full[1] > 0.0) {
        return Err(Error::NonConvergence { iterations });
    }
    let kappa = full[0] + full[1];
    if trace.span() < 4.0 * kappa {
        return Err(Error::InvalidRange(format!("trace spans {:.3} MHz, less than 4κ = {:.3}", trace.span(), 4.0 * kappa)));
    }
    if full[0] < full[1] {
        flags.push("over-coupled".to_string());
    }
    let pinned_h = flags.iter().any(|f| f.starts_with("h pinned"));
    let parameters = EMPTY_NAMES
        .iter()
        .zip(full.iter().zip(&unc))
        .map(|(name, (&value, &uncertainty))| FitParameter {
            name: name.to_string(),
            value,
            uncertainty,
            pinned: pinned_h && *name == "h",
        })
        .collect();
    Ok(FitResult { parameters, residual_norm: outcome.cost.sqrt(), converged: true, iterations, flags })
}

/// Lorentzian fit of a transmission or event curve against `Δ_AC`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthFit {
    /// Upper half-maximum detuning `center + hwhm`, MHz.
    pub beta: f64,
    pub beta_err: f64,
    pub center: f64,
    pub hwhm: f64,
    /// `g₀` from inverting the half-width law with the resonator parameters.
    pub g0: Option<f64>,
    /// `g₀ᵐ` from the averaged-curve calibration table.
    pub g0m: Option<f64>,
    pub fit: FitResult,
}

/// Table from the maximal coupling `g₀ᵐ` to the fitted width of fully
/// averaged theory curves on a fixed detuning grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthCalibration {
    pub detunings: Vec<f64>,
    pub g0m: Vec<f64>,
    pub beta: Vec<f64>,
}

impl WidthCalibration {
    pub fn build(config: &TransitConfig, detunings: &[f64], g0m: &[f64], grid: &TheoryGrid) -> Result<Self> {
        if g0m.len() < 2 {
            return Err(Error::InvalidRange("calibration needs at least two couplings".into()));
        }
        let mut beta = Vec::with_capacity(g0m.len());
        for &g in g0m {
            let curve = theory_sweep(config, detunings, g, Averaging::Full, grid)?;
            let y: Vec<f64> = curve.points.iter().map(|p| p.normalized.unwrap_or(p.value)).collect();
            let trace = SpectrumTrace { detuning: detunings.to_vec(), transmission: y, sigma: None, label: None };
            beta.push(lorentzian_fit(&trace)?.beta);
        }
        if beta.windows(2).any(|w| !(w[1] > w[0])) || g0m.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidData(format!("calibration is not monotone: {beta:?}")));
        }
        Ok(Self { detunings: detunings.to_vec(), g0m: g0m.to_vec(), beta })
    }

    /// `g₀ᵐ` for a fitted width, by linear interpolation (and extrapolation
    /// from the end segments).
    pub fn invert(&self, beta: f64) -> f64 {
        let n = self.beta.len();
        let k = self.beta.partition_point(|&b| b < beta).clamp(1, n - 1);
        let (b0, b1) = (self.beta[k - 1], self.beta[k]);
        let (g0, g1) = (self.g0m[k - 1], self.g0m[k]);
        g0 + (beta - b0) / (b1 - b0) * (g1 - g0)
    }
}

fn lorentzian_fit(curve: &SpectrumTrace) -> Result<WidthFit> {
    curve.check(MIN_CURVE_POINTS)?;
    let pts = curve.sorted();
    let (ymin, ymax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let noise = curve.sigma.as_ref().map_or(0.0, |s| s.iter().cloned().fold(0.0, f64::max));
    if !(ymax - ymin > (2.0 * noise).max(1e-12 * ymax.abs())) {
        return Err(Error::WidthUnresolvable("curve is flat within its errors".into()));
    }
    let one_sided = pts[0].0 >= 0.0;
    let (kmax, &(cmax, amax)) = pts.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).expect("non-empty");
    let center0 = if one_sided { 0.0 } else { cmax };
    let half = 0.5 * amax;
    let w0 = pts[kmax..]
        .iter()
        .find(|p| p.1 < half)
        .map_or(0.5 * curve.span(), |p| (p.0 - center0).abs().max(1e-3));

    let w = weights(curve);
    let model = |q: &[f64]| -> Vec<f64> {
        let (a, width, c) = (q[0], q[1], if one_sided { 0.0 } else { q[2] });
        curve
            .detuning
            .iter()
            .zip(&curve.transmission)
            .zip(&w)
            .map(|((&d, &y), &wi)| (a * width * width / ((d - c).powi(2) + width * width) - y) * wi)
            .collect()
    };
    let q0 = if one_sided { vec![amax, w0] } else { vec![amax, w0, center0] };
    let out = levenberg_marquardt(&model, &q0)?;
    let unc = uncertainties(&out, curve.sigma.is_some())?;
    let (a, width) = (out.params[0], out.params[1].abs());
    let (center, center_err) = if one_sided { (0.0, 0.0) } else { (out.params[2], unc[2]) };
    if !(width < 10.0 * curve.span()) {
        return Err(Error::WidthUnresolvable(format!("fitted half width {width:.3} MHz exceeds the scanned range")));
    }
    let mut names = vec![("amplitude", a, unc[0], false), ("hwhm", width, unc[1], false)];
    names.push(("center", center, center_err, one_sided));
    let beta_err = if one_sided {
        unc[1]
    } else {
        let cov = covariance(&out.jacobian)?;
        let (m, n) = out.jacobian.shape();
        let s = if curve.sigma.is_some() || m <= n { 1.0 } else { out.cost / (m - n) as f64 };
        ((cov[(1, 1)] + cov[(2, 2)] + 2.0 * cov[(1, 2)] * out.params[1].signum()) * s).max(0.0).sqrt()
    };
    let mut flags = Vec::new();
    if one_sided {
        flags.push("center pinned at 0: curve sampled on one side only".to_string());
    }
    let fit = FitResult {
        parameters: names
            .into_iter()
            .map(|(name, value, uncertainty, pinned)| FitParameter { name: name.into(), value, uncertainty, pinned })
            .collect(),
        residual_norm: out.cost.sqrt(),
        converged: true,
        iterations: out.iterations,
        flags,
    };
    Ok(WidthFit { beta: center + width, beta_err, center, hwhm: width, g0: None, g0m: None, fit })
}

/// Lorentzian fit of a detuning curve, with `g₀` from the half-width law
/// for the resonator in `system` and, when a calibration table is given,
/// the equivalent maximal coupling `g₀ᵐ` of fully averaged curves.
pub fn fit_detuning_width(
    curve: &SpectrumTrace,
    system: &SystemParams,
    calibration: Option<&WidthCalibration>,
) -> Result<WidthFit> {
    let mut fit = lorentzian_fit(curve)?;
    let kappa = system.kappa();
    let excess = fit.hwhm - system.gamma;
    // hwhm = γ + 2κ|g_tw|²/(h²+κ²) and g₀ = √2 |g_tw|
    fit.g0 = (excess > 0.0).then(|| (excess * (system.h * system.h + kappa * kappa) / kappa).sqrt());
    fit.g0m = calibration.map(|c| c.invert(fit.beta));
    Ok(fit)
}

/// Critical-coupling data gate: accept when the on-resonance level is below
/// one percent of the off-resonance level.
pub fn critical_gate(on_resonance: f64, off_resonance: f64) -> bool {
    off_resonance > 0.0 && on_resonance >= 0.0 && on_resonance < 0.01 * off_resonance
}

/// [`critical_gate`] applied to a trace: the point nearest zero detuning
/// against the mean of the outer tenth on each side.
pub fn critical_gate_trace(trace: &SpectrumTrace) -> Result<bool> {
    trace.check(MIN_TRACE_POINTS)?;
    let pts = trace.sorted();
    let n = pts.len();
    let edge = (n / 10).max(1);
    let off = pts[..edge].iter().chain(&pts[n - edge..]).map(|p| p.1).sum::<f64>() / (2 * edge) as f64;
    let on = pts.iter().min_by(|a, b| a.0.abs().total_cmp(&b.0.abs())).expect("non-empty").1;
    Ok(critical_gate(on, off))
}
