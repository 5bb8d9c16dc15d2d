//! Weak-excitation model of the driven atom + two-mode resonator.
//!
//! In the frame rotating at the probe frequency the field amplitudes
//! `⟨a⟩, ⟨b⟩` of the two traveling-wave modes and the atomic coherence
//! `⟨σ⁻⟩` obey, with `⟨σ_z⟩ → −1`,
//!
//! ```text
//! d⟨a⟩/dt = −(κ + iΔ)⟨a⟩ + ih⟨b⟩ − i g*⟨σ⁻⟩ − iE
//! d⟨b⟩/dt = −(κ + iΔ)⟨b⟩ + ih⟨a⟩ − i g ⟨σ⁻⟩
//! d⟨σ⁻⟩/dt = −(γ + iΔ_A)⟨σ⁻⟩ − i g⟨a⟩ − i g*⟨b⟩
//! ```
//!
//! The mode-mixing term enters as `−h(a†b + b†a)` in the Hamiltonian, which
//! puts the symmetric standing wave `(a+b)/√2` at `ω_C − h`. With this sign
//! the linear solution reproduces the closed-form on-resonance transmission
//! [`on_resonance_transmission`] exactly for `Δ_AC = Δ − Δ_A`.
//!
//! The probe amplitude relates to the taper input field through
//! `E = −i √(2κ_ex) a_in`, and the forward output is
//! `a_out = a_in + √(2κ_ex) a`, so that critical coupling without an atom
//! gives exactly zero forward transmission on resonance.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Rates and detunings of the driven atom–resonator system, in MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// `ω_A − ω_p`
    pub delta_a: f64,
    /// `ω_C − ω_p`
    pub delta: f64,
    /// Intermode scattering rate.
    pub h: f64,
    /// Intrinsic field decay.
    pub kappa_i: f64,
    /// Extrinsic (taper) field decay.
    pub kappa_ex: f64,
    /// Atomic dipole decay; the excited-state population decays at `2γ`.
    pub gamma: f64,
    /// Probe drive amplitude.
    pub eps_p: C64,
    /// Traveling-wave coupling at the atom position.
    pub g_tw: C64,
}

impl SystemParams {
    /// Critically coupled resonator with no atom, probe on the cavity and
    /// atom resonant with the cavity.
    pub fn critical(kappa_i: f64, h: f64, gamma: f64) -> Result<Self> {
        let kappa_ex = critical_kappa_ex(kappa_i, h)?;
        let params = Self {
            delta_a: 0.0,
            delta: 0.0,
            h,
            kappa_i,
            kappa_ex,
            gamma,
            eps_p: C64::new(1.0, 0.0),
            g_tw: C64::new(0.0, 0.0),
        };
        params.validate()?;
        Ok(params)
    }

    /// Critically coupled resonator with total field decay `kappa`.
    pub fn critical_from_total(kappa: f64, h: f64, gamma: f64) -> Result<Self> {
        let (kappa_i, _) = critical_split(kappa, h)?;
        Self::critical(kappa_i, h, gamma)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_i + self.kappa_ex
    }

    /// `Δ_AC = ω_C − ω_A = Δ − Δ_A`.
    pub fn delta_ac(&self) -> f64 {
        self.delta - self.delta_a
    }

    pub fn with_coupling(mut self, g_tw: C64) -> Self {
        self.g_tw = g_tw;
        self
    }

    pub fn with_drive(mut self, eps_p: C64) -> Self {
        self.eps_p = eps_p;
        self
    }

    pub fn with_kappa_ex(mut self, kappa_ex: f64) -> Self {
        self.kappa_ex = kappa_ex;
        self
    }

    /// Probe on the cavity resonance (`Δ = 0`) with the given atom–cavity
    /// detuning.
    pub fn probe_at_cavity(mut self, delta_ac: f64) -> Self {
        self.delta = 0.0;
        self.delta_a = -delta_ac;
        self
    }

    /// Move the probe to cavity detuning `delta`, keeping `Δ_AC` fixed.
    pub fn with_probe_detuning(mut self, delta: f64) -> Self {
        let delta_ac = self.delta_ac();
        self.delta = delta;
        self.delta_a = delta - delta_ac;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("delta_a", self.delta_a),
            ("delta", self.delta),
            ("h", self.h),
            ("kappa_i", self.kappa_i),
            ("kappa_ex", self.kappa_ex),
            ("gamma", self.gamma),
            ("eps_p.re", self.eps_p.re),
            ("eps_p.im", self.eps_p.im),
            ("g_tw.re", self.g_tw.re),
            ("g_tw.im", self.g_tw.im),
        ];
        for (name, v) in reals {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        for (name, v) in [
            ("kappa_i", self.kappa_i),
            ("kappa_ex", self.kappa_ex),
            ("gamma", self.gamma),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} is negative")));
            }
        }
        Ok(())
    }

    /// Taper input amplitude implied by the drive convention `E = −i√(2κ_ex) a_in`.
    pub fn input_amplitude(&self) -> C64 {
        C64::i() * self.eps_p / (2.0 * self.kappa_ex).sqrt()
    }

    /// Non-Hermitian coefficient matrix in the `(a, b, σ⁻)` basis:
    /// `dx/dt = −i H_eff x − i (E, 0, 0)ᵀ`.
    pub fn effective_hamiltonian(&self) -> Matrix3<C64> {
        let mode = C64::new(self.delta, -self.kappa());
        let atom = C64::new(self.delta_a, -self.gamma);
        let mix = C64::new(-self.h, 0.0);
        let g = self.g_tw;
        let gc = g.conj();
        Matrix3::new(
            mode, mix, gc, //
            mix, mode, g, //
            g, gc, atom,
        )
    }
}

/// Steady-state amplitudes of the linearized equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub sigma_minus: C64,
    pub amp_a: C64,
    pub amp_b: C64,
    /// `(⟨a⟩ + ⟨b⟩)/√2`
    pub amp_mode_a: C64,
    /// `(⟨a⟩ − ⟨b⟩)/√2`
    pub amp_mode_b: C64,
}

impl SteadyState {
    fn from_traveling(amp_a: C64, amp_b: C64, sigma_minus: C64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            sigma_minus,
            amp_a,
            amp_b,
            amp_mode_a: (amp_a + amp_b) * s,
            amp_mode_b: (amp_a - amp_b) * s,
        }
    }
}

/// `κ_ex^cr = √(κ_i² + h²)`
pub fn critical_kappa_ex(kappa_i: f64, h: f64) -> Result<f64> {
    if !(kappa_i >= 0.0) || !(h >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa_i = {kappa_i}, h = {h} must be non-negative"
        )));
    }
    Ok(kappa_i.hypot(h))
}

/// Split a total field decay `kappa` into `(κ_i, κ_ex)` at critical coupling.
///
/// `κ_i + √(κ_i² + h²) = κ` has the solution `κ_i = (κ² − h²) / 2κ`, which is
/// non-negative only for `κ ≥ h`.
pub fn critical_split(kappa: f64, h: f64) -> Result<(f64, f64)> {
    if !(kappa > 0.0) || !(h >= 0.0) || h > kappa {
        return Err(Error::InvalidParameter(format!(
            "critical split needs 0 <= h <= kappa, got kappa = {kappa}, h = {h}"
        )));
    }
    let kappa_i = (kappa * kappa - h * h) / (2.0 * kappa);
    Ok((kappa_i, kappa - kappa_i))
}

pub fn steady_state(params: &SystemParams) -> Result<SteadyState> {
    params.validate()?;
    let zero = C64::new(0.0, 0.0);
    if params.eps_p == zero {
        return Ok(SteadyState::from_traveling(zero, zero, zero));
    }
    let rhs = Vector3::new(-params.eps_p, zero, zero);
    let x = params
        .effective_hamiltonian()
        .lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateParameters)?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::DegenerateParameters);
    }
    Ok(SteadyState::from_traveling(x[0], x[1], x[2]))
}

/// Forward transmission amplitude `⟨a_out⟩ / a_in`.
pub fn forward_amplitude(params: &SystemParams) -> Result<C64> {
    if params.eps_p == C64::new(0.0, 0.0) {
        return Err(Error::ZeroDrive);
    }
    if !(params.kappa_ex > 0.0) {
        return Err(Error::InvalidParameter(
            "kappa_ex must be positive to define the taper input".into(),
        ));
    }
    let ss = steady_state(params)?;
    // 1 + √(2κ_ex)⟨a⟩/a_in with a_in = iE/√(2κ_ex)
    Ok(C64::new(1.0, 0.0) - C64::i() * 2.0 * params.kappa_ex * ss.amp_a / params.eps_p)
}

/// `T_F = |⟨a_out⟩ / a_in|²`.
pub fn forward_transmission(params: &SystemParams) -> Result<f64> {
    forward_amplitude(params).map(|t| t.norm_sqr())
}

/// Backward flux `|√(2κ_ex)⟨b⟩ / a_in|²` (the `b` input is vacuum).
pub fn backward_transmission(params: &SystemParams) -> Result<f64> {
    if params.eps_p == C64::new(0.0, 0.0) {
        return Err(Error::ZeroDrive);
    }
    let ss = steady_state(params)?;
    Ok((2.0 * params.kappa_ex * ss.amp_b / params.eps_p).norm_sqr())
}

/// Sampled forward-transmission spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `(Δ, T_F)` pairs with `Δ` increasing.
    pub points: Vec<(f64, f64)>,
    pub params: SystemParams,
}

/// Forward transmission over a uniform grid of probe detunings `Δ`,
/// holding `Δ_AC` fixed.
pub fn transmission_spectrum(
    params: &SystemParams,
    delta_range: (f64, f64),
    n_points: usize,
) -> Result<Spectrum> {
    let (lo, hi) = delta_range;
    if n_points < 2 {
        return Err(Error::InvalidRange(format!("need at least 2 points, got {n_points}")));
    }
    if !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
        return Err(Error::InvalidRange(format!("[{lo}, {hi}]")));
    }
    params.validate()?;
    let step = (hi - lo) / (n_points - 1) as f64;
    let points = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let delta = if i == n_points - 1 { hi } else { lo + step * i as f64 };
            forward_transmission(&params.with_probe_detuning(delta)).map(|t| (delta, t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum { points, params: *params })
}

/// `g² + g*² = 2 Re(g²)`
fn g_sq_sum(g_tw: C64) -> f64 {
    2.0 * (g_tw * g_tw).re
}

/// Closed-form forward transmission at `ω_p = ω_C` under critical coupling.
pub fn on_resonance_transmission(
    g_tw: C64,
    h: f64,
    kappa_i: f64,
    kappa_ex: f64,
    gamma: f64,
    delta_ac: f64,
) -> Result<f64> {
    let critical = critical_kappa_ex(kappa_i, h)?;
    if (kappa_ex - critical).abs() > 1e-9 * critical.max(1.0) {
        return Err(Error::NotCriticallyCoupled { kappa_ex, critical });
    }
    let kappa = kappa_i + kappa_ex;
    let g2 = g_tw.norm_sqr();
    let s = g_sq_sum(g_tw);
    let q = h * h + kappa * kappa;
    let num = 4.0 * kappa_i * kappa_i * g2 * g2 + h * h * s * s;
    let re = gamma * q + 2.0 * kappa * g2;
    let im = delta_ac * q - h * s;
    Ok(num / (re * re + im * im))
}

/// Center of the Lorentzian `T_F(Δ_AC)` at `ω_p = ω_C`.
pub fn lorentzian_center(g_tw: C64, h: f64, kappa: f64) -> f64 {
    h * g_sq_sum(g_tw) / (h * h + kappa * kappa)
}

/// Half-width `β = γ + (2κ|g|² + h(g² + g*²)) / (h² + κ²)`.
///
/// This is the detuning `Δ_AC` of the upper half-maximum point, i.e. the
/// Lorentzian center plus its half width at half maximum
/// ([`lorentzian_hwhm`]). Both coincide when `g² + g*² = 0`.
pub fn lorentzian_halfwidth(g_tw: C64, h: f64, kappa: f64, gamma: f64) -> f64 {
    gamma + (2.0 * kappa * g_tw.norm_sqr() + h * g_sq_sum(g_tw)) / (h * h + kappa * kappa)
}

/// Half width at half maximum of `T_F(Δ_AC)` about its center.
pub fn lorentzian_hwhm(g_tw: C64, h: f64, kappa: f64, gamma: f64) -> f64 {
    gamma + 2.0 * kappa * g_tw.norm_sqr() / (h * h + kappa * kappa)
}

/// Strong-coupling limit `β ≃ |g₀|²/κ` of the half-width.
pub fn lorentzian_halfwidth_approx(g0: f64, kappa: f64) -> f64 {
    g0 * g0 / kappa
}

/// Single-mode Jaynes–Cummings counterpart of the on-resonance transmission.
pub fn jc_transmission(g_tw: C64, kappa: f64, gamma: f64, delta_ac: f64) -> f64 {
    let c = g_tw.norm_sqr() / kappa;
    c * c / ((gamma + c).powi(2) + delta_ac * delta_ac)
}

/// Dominant character of a dressed state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Character {
    Atom,
    ModeA,
    ModeB,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenmode {
    /// Real part: frequency in the probe frame. Imaginary part: decay rate.
    pub value: C64,
    /// `None` when degenerate with another eigenvalue.
    pub label: Option<Character>,
    /// Populations on `(atom, A, B)`, summing to one.
    pub weights: [f64; 3],
    /// Normalized right eigenvector in the `(a, b, σ⁻)` basis.
    pub vector: [C64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSet {
    /// Sorted by ascending frequency.
    pub modes: [Eigenmode; 3],
}

impl EigenSet {
    pub fn values(&self) -> [C64; 3] {
        [self.modes[0].value, self.modes[1].value, self.modes[2].value]
    }
}

/// Eigenvalues of the homogeneous linearized equations.
///
/// Frequencies are relative to the probe; with `Δ = 0` this is the cavity
/// frame.
pub fn eigenvalues(params: &SystemParams) -> Result<EigenSet> {
    params.validate()?;
    let m = params.effective_hamiltonian();
    let raw = m
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::InvalidParameter("eigenvalue decomposition failed".into()))?;
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);

    let mut modes: Vec<Eigenmode> = raw
        .iter()
        .map(|&lambda| {
            let vector = null_vector(&(m - Matrix3::identity() * lambda));
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let ca = (vector[0] + vector[1]) * s;
            let cb = (vector[0] - vector[1]) * s;
            let weights = [vector[2].norm_sqr(), ca.norm_sqr(), cb.norm_sqr()];
            Eigenmode {
                value: C64::new(lambda.re, -lambda.im),
                label: dominant(&weights),
                weights,
                vector,
            }
        })
        .collect();

    for i in 0..3 {
        for j in (i + 1)..3 {
            if (modes[i].value - modes[j].value).norm() <= 1e-9 * scale {
                modes[i].label = None;
                modes[j].label = None;
            }
        }
    }
    modes.sort_by(|a, b| a.value.re.total_cmp(&b.value.re));
    Ok(EigenSet { modes: [modes[0], modes[1], modes[2]] })
}

fn dominant(weights: &[f64; 3]) -> Option<Character> {
    let labels = [Character::Atom, Character::ModeA, Character::ModeB];
    let mut best = 0;
    for k in 1..3 {
        if weights[k] > weights[best] {
            best = k;
        }
    }
    if weights
        .iter()
        .enumerate()
        .any(|(k, &w)| k != best && (w - weights[best]).abs() <= 1e-12)
    {
        return None;
    }
    Some(labels[best])
}

/// Null vector of a rank-2 3×3 matrix from the best-conditioned pair of rows.
fn null_vector(m: &Matrix3<C64>) -> [C64; 3] {
    let row = |i: usize| [m[(i, 0)], m[(i, 1)], m[(i, 2)]];
    let cross = |u: [C64; 3], v: [C64; 3]| {
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    };
    let norm = |v: &[C64; 3]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let candidates = [cross(row(0), row(1)), cross(row(0), row(2)), cross(row(1), row(2))];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if norm(c) > norm(&best) {
            best = *c;
        }
    }
    let n = norm(&best);
    if n == 0.0 {
        // Fully degenerate block: any basis vector spans the eigenspace.
        let mut v = [C64::new(0.0, 0.0); 3];
        let mut k = 0;
        for i in 0..3 {
            if m[(i, i)].norm() < m[(k, k)].norm() {
                k = i;
            }
        }
        v[k] = C64::new(1.0, 0.0);
        return v;
    }
    // Fix the phase so the largest component is real positive.
    let mut big = 0;
    for i in 1..3 {
        if best[i].norm() > best[big].norm() {
            big = i;
        }
    }
    let phase = best[big].conj() / best[big].norm();
    [best[0] * phase / n, best[1] * phase / n, best[2] * phase / n]
}

/// Mean occupations `(|⟨a⟩|², |⟨b⟩|²)`.
pub fn intracavity_photons(params: &SystemParams) -> Result<(f64, f64)> {
    let ss = steady_state(params)?;
    Ok((ss.amp_a.norm_sqr(), ss.amp_b.norm_sqr()))
}

/// Real drive amplitude giving `|⟨a⟩|² = n0` for the supplied parameters.
pub fn calibrate_drive(params: &SystemParams, n0: f64) -> Result<C64> {
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(Error::InvalidParameter(format!("target photon number {n0}")));
    }
    let unit = params.with_drive(C64::new(1.0, 0.0));
    let (na, _) = intracavity_photons(&unit)?;
    if na == 0.0 {
        return Err(Error::DegenerateParameters);
    }
    Ok(C64::new((n0 / na).sqrt(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn paper_params() -> SystemParams {
        SystemParams::critical(8.28, 4.9, 2.6).unwrap()
    }

    #[test]
    fn critical_kappa_ex_examples() {
        assert_eq!(critical_kappa_ex(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(critical_kappa_ex(3.0, 4.0).unwrap(), 5.0);
        assert!(critical_kappa_ex(-1.0, 0.0).is_err());
        assert!(critical_kappa_ex(1.0, -0.1).is_err());
    }

    #[test]
    fn critical_split_matches_bisection() {
        // bisection on κ_i + √(κ_i² + h²) = κ
        let (kappa, h) = (17.9, 4.9);
        let (mut lo, mut hi) = (0.0_f64, kappa);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + mid.hypot(h) > kappa {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (ki, kex) = critical_split(kappa, h).unwrap();
        assert_relative_eq!(ki, lo, max_relative = 1e-12);
        assert!((ki - 8.28).abs() < 5e-3);
        assert!((kex - 9.62).abs() < 5e-3);
        assert_relative_eq!(ki + kex, 17.9, max_relative = 1e-14);
        assert!(critical_split(4.0, 5.0).is_err());
    }

    #[test]
    fn zero_drive_gives_zero_amplitudes() {
        let p = paper_params().with_coupling(C64::new(30.0, 10.0)).with_drive(C64::new(0.0, 0.0));
        let ss = steady_state(&p).unwrap();
        assert_eq!(ss.amp_a, C64::new(0.0, 0.0));
        assert_eq!(ss.amp_b, C64::new(0.0, 0.0));
        assert_eq!(ss.sigma_minus, C64::new(0.0, 0.0));
        assert!(matches!(forward_transmission(&p), Err(Error::ZeroDrive)));
    }

    #[test]
    fn normal_mode_amplitudes_are_exact_combinations() {
        let p = paper_params().with_coupling(C64::from_polar(40.0, 0.3)).with_probe_detuning(7.0);
        let ss = steady_state(&p).unwrap();
        assert_eq!(ss.amp_mode_a, (ss.amp_a + ss.amp_b) * std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(ss.amp_mode_b, (ss.amp_a - ss.amp_b) * std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn critical_zero_is_exact() {
        for (ki, h) in [(8.28, 4.9), (1.0, 0.0), (3.0, 12.0), (20.0, 0.5)] {
            let p = SystemParams::critical(ki, h, 2.6).unwrap();
            assert!(forward_transmission(&p).unwrap() <= 1e-24);
        }
    }

    #[test]
    fn far_detuned_probe_is_normalized() {
        let p = paper_params().with_coupling(C64::new(35.0, 0.0));
        let far = forward_transmission(&p.with_probe_detuning(1e6 * p.kappa())).unwrap();
        assert!((far - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_cavity_transmission_matches_closed_form() {
        let p = SystemParams::critical(6.0, 3.0, 2.6).unwrap().with_kappa_ex(4.0);
        let kappa = p.kappa();
        for delta in [-40.0, -3.0, 0.0, 2.5, 17.0] {
            let z = C64::new(kappa, delta);
            let t = C64::new(1.0, 0.0) - 2.0 * p.kappa_ex * z / (z * z + p.h * p.h);
            let got = forward_transmission(&p.with_probe_detuning(delta)).unwrap();
            assert_relative_eq!(got, t.norm_sqr(), max_relative = 1e-12);
        }
    }

    #[test]
    fn on_resonance_examples() {
        let (ki, kex, h, gamma) = (8.28, critical_kappa_ex(8.28, 4.9).unwrap(), 4.9, 2.6);
        assert_eq!(on_resonance_transmission(C64::new(0.0, 0.0), h, ki, kex, gamma, 0.0).unwrap(), 0.0);
        let g = C64::new(50.0 / SQRT_2, 0.0);
        let t0 = on_resonance_transmission(g, h, ki, kex, gamma, 0.0).unwrap();
        assert!((t0 - 0.26).abs() < 0.005, "{t0}");
        let beta = lorentzian_halfwidth(g, h, ki + kex, gamma);
        let tail = on_resonance_transmission(g, h, ki, kex, gamma, 10.0 * beta).unwrap();
        assert!(tail < 0.01 * t0);
        assert!(matches!(
            on_resonance_transmission(g, h, ki, 9.0, gamma, 0.0),
            Err(Error::NotCriticallyCoupled { .. })
        ));
    }

    #[test]
    fn lorentzian_center_and_width_examples() {
        let g45 = C64::from_polar(30.0, FRAC_PI_4);
        assert!(lorentzian_center(g45, 4.9, 17.9).abs() < 1e-12);
        let g = C64::new(1250.0_f64.sqrt(), 0.0);
        assert_relative_eq!(lorentzian_center(g, 4.9, 17.9), 12250.0 / 344.42, max_relative = 1e-12);
        assert!((lorentzian_center(g, 4.9, 17.9) - 35.6).abs() < 0.05);
        assert_eq!(lorentzian_halfwidth(C64::new(0.0, 0.0), 4.9, 17.9, 2.6), 2.6);
        assert!((lorentzian_halfwidth_approx(50.0, 17.9) - 139.7).abs() < 0.05);
        assert!((lorentzian_halfwidth(g, 4.9, 17.9, 2.6) - 168.1).abs() < 0.05);
    }

    #[test]
    fn x_averaged_center_vanishes() {
        let n = 64;
        let mean: f64 = (0..n)
            .map(|i| {
                let kx = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                lorentzian_center(C64::from_polar(35.0, kx), 4.9, 17.9)
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn jc_examples() {
        let g = C64::new(20.0, 0.0);
        assert_relative_eq!(jc_transmission(g, 17.9, 0.0, 0.0), 1.0, max_relative = 1e-15);
        assert_eq!(jc_transmission(C64::new(0.0, 0.0), 17.9, 2.6, 0.0), 0.0);
        let g = C64::new((139.7_f64 * 17.9).sqrt(), 0.0);
        let beta_jc = 2.6 + g.norm_sqr() / 17.9;
        let peak = jc_transmission(g, 17.9, 2.6, 0.0);
        assert_relative_eq!(jc_transmission(g, 17.9, 2.6, beta_jc), 0.5 * peak, max_relative = 1e-12);
    }

    #[test]
    fn uncoupled_eigenvalues() {
        let p = paper_params().with_probe_detuning(3.0);
        let e = eigenvalues(&p).unwrap();
        let k = p.kappa();
        let v = e.values();
        assert_relative_eq!(v[0].re, 3.0 - 4.9, epsilon = 1e-9);
        assert_relative_eq!(v[2].re, 3.0 + 4.9, epsilon = 1e-9);
        assert_relative_eq!(v[0].im, k, epsilon = 1e-9);
        assert_relative_eq!(v[1].re, p.delta_a, epsilon = 1e-9);
        assert_relative_eq!(v[1].im, 2.6, epsilon = 1e-9);
        assert_eq!(e.modes[1].label, Some(Character::Atom));
        // (a+b)/√2 sits at −h
        assert_eq!(e.modes[0].label, Some(Character::ModeA));
        assert_eq!(e.modes[2].label, Some(Character::ModeB));
    }

    #[test]
    fn jc_limit_eigenvalues() {
        // h = 0, kx = 0: atom couples to A only with g₀ = √2 |g_tw|
        let (g0, kappa, gamma) = (50.0, 18.0, 2.6);
        let p = SystemParams::critical_from_total(kappa, 0.0, gamma)
            .unwrap()
            .with_coupling(C64::new(g0 / SQRT_2, 0.0));
        let e = eigenvalues(&p).unwrap();
        let split = (g0 * g0 - ((kappa - gamma) / 2.0).powi(2)).sqrt();
        let v = e.values();
        assert_relative_eq!(v[0].re, -split, epsilon = 1e-9);
        assert_relative_eq!(v[2].re, split, epsilon = 1e-9);
        assert_relative_eq!(v[0].im, (kappa + gamma) / 2.0, epsilon = 1e-9);
        assert_relative_eq!(v[1].re, 0.0, epsilon = 1e-9);
        assert_relative_eq!(v[1].im, kappa, epsilon = 1e-9);
        assert_eq!(e.modes[1].label, Some(Character::ModeB));
    }

    #[test]
    fn degenerate_eigenvalues_are_unlabelled() {
        let p = SystemParams::critical(5.0, 0.0, 2.6).unwrap();
        let e = eigenvalues(&p).unwrap();
        let unlabeled = e.modes.iter().filter(|m| m.label.is_none()).count();
        assert_eq!(unlabeled, 2);
    }

    #[test]
    fn photon_calibration() {
        let p = paper_params();
        assert_eq!(intracavity_photons(&p.with_drive(C64::new(0.0, 0.0))).unwrap(), (0.0, 0.0));
        // bisection oracle on |eps|
        let target = 0.3;
        let (mut lo, mut hi) = (0.0, 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (na, _) = intracavity_photons(&p.with_drive(C64::new(mid, 0.0))).unwrap();
            if na > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let eps = calibrate_drive(&p, target).unwrap();
        assert_relative_eq!(eps.re, lo, max_relative = 1e-10);
        let (na, _) = intracavity_photons(&p.with_drive(eps)).unwrap();
        assert_relative_eq!(na, 0.3, max_relative = 1e-12);

        let p0 = SystemParams::critical(8.0, 0.0, 2.6).unwrap();
        assert_eq!(intracavity_photons(&p0).unwrap().1, 0.0);
    }

    #[test]
    fn rejects_invalid_params() {
        let mut p = paper_params();
        p.gamma = -1.0;
        assert!(steady_state(&p).is_err());
        p.gamma = f64::NAN;
        assert!(steady_state(&p).is_err());
    }

    #[test]
    fn degenerate_system_is_reported() {
        let mut p = paper_params();
        p.kappa_i = 0.0;
        p.kappa_ex = 0.0;
        p.gamma = 0.0;
        p.h = 0.0;
        assert!(matches!(steady_state(&p), Err(Error::DegenerateParameters)));
    }

    #[test]
    fn spectrum_grid() {
        let s = transmission_spectrum(&paper_params(), (-50.0, 50.0), 11).unwrap();
        assert_eq!(s.points.len(), 11);
        assert_eq!(s.points[0].0, -50.0);
        assert_eq!(s.points[10].0, 50.0);
        assert!(s.points.windows(2).all(|w| w[1].0 > w[0].0));
        assert!(s.points[5].1 < 1e-24);
        assert!(transmission_spectrum(&paper_params(), (1.0, 1.0), 11).is_err());
        assert!(transmission_spectrum(&paper_params(), (0.0, 1.0), 1).is_err());
        assert!(transmission_spectrum(&paper_params(), (0.0, f64::INFINITY), 5).is_err());
    }
}
