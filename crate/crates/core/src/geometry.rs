//! Toroid geometry, evanescent mode functions and position-dependent coupling.
//!
//! The radial profile outside the rim is `exp(−ρ/ƛ)` with `ƛ = λ/2π`; the
//! vertical profile is a Gaussian of width `w_z`, calibrated so that a
//! transit at the free-fall velocity from 10 mm lasts about 2 µs.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Cycling-transition traveling-wave coupling, MHz.
pub const G0_TW_CYCLING: f64 = 80.0;
/// Surface coupling after averaging over the Zeeman sublevels, MHz.
pub const G0_SURFACE: f64 = 70.0;
/// Closest approach before the atom is lost to the surface, nm.
pub const VDW_CUTOFF_NM: f64 = 45.0;
/// Cavity tuning with chip temperature, MHz per mK.
pub const THERMAL_TUNING_MHZ_PER_MK: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeGeometry {
    /// Major diameter `D`, µm.
    pub major_diameter_um: f64,
    /// Minor diameter `d`, µm.
    pub minor_diameter_um: f64,
    /// Vacuum wavelength, nm.
    pub wavelength_nm: f64,
    /// Vertical width `w_z` of the mode, µm.
    pub vertical_width_um: f64,
    /// Normal-mode coupling `g₀` at `ρ = 0`, MHz.
    pub g0_surface: f64,
}

impl Default for ModeGeometry {
    fn default() -> Self {
        Self {
            major_diameter_um: 44.0,
            minor_diameter_um: 6.0,
            wavelength_nm: 852.36,
            vertical_width_um: 0.32,
            g0_surface: G0_SURFACE,
        }
    }
}

impl ModeGeometry {
    /// Preset with the cycling-transition coupling `g₀ = √2 · 80` MHz.
    pub fn cycling_transition() -> Self {
        Self { g0_surface: SQRT_2 * G0_TW_CYCLING, ..Self::default() }
    }

    /// Same mode shape, rescaled so the coupling at `rho_nm` (z = 0) is `g0`.
    pub fn with_coupling_at(self, g0: f64, rho_nm: f64) -> Self {
        Self { g0_surface: g0 * (rho_nm / self.decay_length_nm()).exp(), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.minor_diameter_um > 0.0
            && self.major_diameter_um > self.minor_diameter_um
            && self.wavelength_nm > 0.0
            && self.vertical_width_um > 0.0
            && self.g0_surface >= 0.0
            && [
                self.major_diameter_um,
                self.minor_diameter_um,
                self.wavelength_nm,
                self.vertical_width_um,
                self.g0_surface,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid mode geometry {self:?}")))
        }
    }

    /// Evanescent decay length `ƛ = λ/2π`, nm.
    pub fn decay_length_nm(&self) -> f64 {
        self.wavelength_nm / (2.0 * PI)
    }

    /// Wavenumber `k = 2π/λ`, 1/nm.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_nm
    }

    /// Circumference `πD`, nm.
    pub fn circumference_nm(&self) -> f64 {
        PI * self.major_diameter_um * 1e3
    }
}

/// Atom position: `rho` from the surface, `x` along the rim, `z` from the
/// mode center. All in nm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomPosition {
    pub rho: f64,
    pub x: f64,
    pub z: f64,
}

impl AtomPosition {
    pub fn new(rho: f64, x: f64, z: f64) -> Self {
        Self { rho, x, z }
    }
}

/// `f(ρ, z) = exp(−ρ/ƛ) · exp(−z² / 2w_z²)`
pub fn mode_profile(geom: &ModeGeometry, pos: &AtomPosition) -> Result<f64> {
    if !(pos.rho >= 0.0) {
        return Err(Error::InvalidParameter(format!("rho = {} must be non-negative", pos.rho)));
    }
    let wz = geom.vertical_width_um * 1e3;
    Ok((-pos.rho / geom.decay_length_nm()).exp() * (-pos.z * pos.z / (2.0 * wz * wz)).exp())
}

/// Standing-wave mode functions `(ψ_A, ψ_B) = f · (cos kx, sin kx)`.
pub fn normal_mode_functions(geom: &ModeGeometry, pos: &AtomPosition) -> Result<(f64, f64)> {
    let f = mode_profile(geom, pos)?;
    let (s, c) = (geom.wavenumber() * pos.x).sin_cos();
    Ok((f * c, f * s))
}

/// Coupling in both representations at one position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub g_a: f64,
    pub g_b: f64,
    pub g_tw: C64,
}

impl Coupling {
    /// `g₀ ψ` magnitude, equal to `√2 |g_tw|`.
    pub fn magnitude(&self) -> f64 {
        self.g_a.hypot(self.g_b)
    }
}

/// `g_{A,B} = g₀ ψ_{A,B}` and `g_tw = (g₀/√2) f e^{ikx}`.
pub fn coupling_at(geom: &ModeGeometry, pos: &AtomPosition) -> Result<Coupling> {
    let f = mode_profile(geom, pos)?;
    let kx = geom.wavenumber() * pos.x;
    let (s, c) = kx.sin_cos();
    Ok(Coupling {
        g_a: geom.g0_surface * f * c,
        g_b: geom.g0_surface * f * s,
        g_tw: C64::from_polar(geom.g0_surface * f / SQRT_2, kx),
    })
}

/// Convention for averaging the π-transition strengths of `F=4 → F'=5'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CgMethod {
    /// Ratio of the quoted averaged and cycling couplings, 70/80.
    PaperRatio,
    /// `√(mean |CG|²)` over `m_F = −4..4`.
    RmsPi,
    /// `mean |CG|` over `m_F = −4..4`.
    MeanPi,
    /// `|⟨4 4; 1 1 | 5 5⟩|`, the cycling reference.
    StretchedSigmaPlus,
}

impl std::str::FromStr for CgMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-ratio" => Ok(Self::PaperRatio),
            "rms-pi" => Ok(Self::RmsPi),
            "mean-pi" => Ok(Self::MeanPi),
            "stretched-sigma-plus" => Ok(Self::StretchedSigmaPlus),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Factor relating the cycling-transition coupling to the Zeeman-averaged
/// linear-polarization coupling.
pub fn cg_average(method: CgMethod) -> f64 {
    const F: f64 = 4.0;
    const F_EXC: f64 = 5.0;
    let pi_coeffs = || (-4..=4).map(|m| clebsch_gordan(F, m as f64, 1.0, 0.0, F_EXC, m as f64));
    match method {
        CgMethod::PaperRatio => G0_SURFACE / G0_TW_CYCLING,
        CgMethod::RmsPi => (pi_coeffs().map(|c| c * c).sum::<f64>() / 9.0).sqrt(),
        CgMethod::MeanPi => pi_coeffs().map(f64::abs).sum::<f64>() / 9.0,
        CgMethod::StretchedSigmaPlus => clebsch_gordan(F, 4.0, 1.0, 1.0, F_EXC, 5.0).abs(),
    }
}

fn factorial(n: f64) -> f64 {
    let n = n.round() as u32;
    (1..=n).map(f64::from).product()
}

/// `⟨j1 m1; j2 m2 | J M⟩` by the Racah formula (integer or half-integer
/// arguments).
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> f64 {
    if (m1 + m2 - m).abs() > 1e-9
        || j < (j1 - j2).abs() - 1e-9
        || j > j1 + j2 + 1e-9
        || m1.abs() > j1 + 1e-9
        || m2.abs() > j2 + 1e-9
        || m.abs() > j + 1e-9
    {
        return 0.0;
    }
    let pre = ((2.0 * j + 1.0) * factorial(j + j1 - j2) * factorial(j - j1 + j2) * factorial(j1 + j2 - j)
        / factorial(j1 + j2 + j + 1.0))
    .sqrt()
        * (factorial(j + m)
            * factorial(j - m)
            * factorial(j1 - m1)
            * factorial(j1 + m1)
            * factorial(j2 - m2)
            * factorial(j2 + m2))
        .sqrt();
    let mut sum = 0.0;
    for k in 0..=((j1 + j2 + j) as i64 + 1) {
        let k = k as f64;
        let args = [
            k,
            j1 + j2 - j - k,
            j1 - m1 - k,
            j2 + m2 - k,
            j - j2 + m1 + k,
            j - j1 - m2 + k,
        ];
        if args.iter().any(|&a| a < -1e-9) {
            continue;
        }
        let denom: f64 = args.iter().map(|&a| factorial(a)).product();
        let sign = if (k as i64) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    pre * sum
}

/// Predicate for positions the atom can reach without striking the surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VdwCutoff {
    pub rho_min: f64,
}

impl Default for VdwCutoff {
    fn default() -> Self {
        Self { rho_min: VDW_CUTOFF_NM }
    }
}

impl VdwCutoff {
    pub fn is_valid(&self, pos: &AtomPosition) -> bool {
        pos.rho >= self.rho_min
    }

    /// Largest coupling an accepted atom can see.
    pub fn max_coupling(&self, geom: &ModeGeometry) -> f64 {
        geom.g0_surface * (-self.rho_min / geom.decay_length_nm()).exp()
    }
}

pub fn vdw_cutoff(rho_min: f64) -> Result<VdwCutoff> {
    if !(rho_min >= 0.0) || !rho_min.is_finite() {
        return Err(Error::InvalidParameter(format!("rho_min = {rho_min}")));
    }
    Ok(VdwCutoff { rho_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn profile_examples() {
        let g = ModeGeometry::default();
        assert_eq!(mode_profile(&g, &AtomPosition::new(0.0, 0.0, 0.0)).unwrap(), 1.0);
        let lam = g.decay_length_nm();
        assert_relative_eq!(
            mode_profile(&g, &AtomPosition::new(lam, 0.0, 0.0)).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert!((lam - 135.6).abs() < 0.1);
        let f45 = mode_profile(&g, &AtomPosition::new(45.0, 0.0, 0.0)).unwrap();
        assert!((f45 - 0.7176).abs() < 2e-4, "{f45}");
        assert!(mode_profile(&g, &AtomPosition::new(-1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn normal_modes_at_special_points() {
        let g = ModeGeometry::default();
        let k = g.wavenumber();
        let (a, b) = normal_mode_functions(&g, &AtomPosition::new(30.0, 0.0, 50.0)).unwrap();
        let f = mode_profile(&g, &AtomPosition::new(30.0, 0.0, 50.0)).unwrap();
        assert_eq!((a, b), (f, 0.0));
        let (a, b) = normal_mode_functions(&g, &AtomPosition::new(30.0, FRAC_PI_4 / k, 50.0)).unwrap();
        assert_relative_eq!(a, f / SQRT_2, max_relative = 1e-12);
        assert_relative_eq!(b, f / SQRT_2, max_relative = 1e-12);
    }

    #[test]
    fn coupling_examples() {
        let g = ModeGeometry::default();
        let c = coupling_at(&g, &AtomPosition::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(c.g_a, 70.0);
        assert_eq!(c.g_b, 0.0);
        assert_relative_eq!(c.g_tw.norm(), 70.0 / SQRT_2, max_relative = 1e-15);
        let c = coupling_at(&g, &AtomPosition::new(45.0, 0.0, 0.0)).unwrap();
        assert!((c.magnitude() - 50.2).abs() < 0.05);
        let c = coupling_at(&g, &AtomPosition::new(1e7, 0.0, 0.0)).unwrap();
        assert_eq!(c.magnitude(), 0.0);
    }

    #[test]
    fn cg_examples() {
        assert_eq!(cg_average(CgMethod::PaperRatio), 0.875);
        // independent closed form |⟨4 m; 1 0 | 5 m⟩|² = (25 − m²)/45
        let rms = ((-4..=4).map(|m| (25.0 - (m * m) as f64) / 45.0).sum::<f64>() / 9.0).sqrt();
        assert_relative_eq!(cg_average(CgMethod::RmsPi), rms, max_relative = 1e-12);
        assert!((cg_average(CgMethod::RmsPi) - 0.64).abs() < 0.005);
        let mean = (-4..=4).map(|m| ((25.0 - (m * m) as f64) / 45.0).sqrt()).sum::<f64>() / 9.0;
        assert_relative_eq!(cg_average(CgMethod::MeanPi), mean, max_relative = 1e-12);
        assert_relative_eq!(cg_average(CgMethod::StretchedSigmaPlus), 1.0, max_relative = 1e-12);
        assert!(matches!("median".parse::<CgMethod>(), Err(Error::UnknownMethod(_))));
        assert_eq!("rms-pi".parse::<CgMethod>().unwrap(), CgMethod::RmsPi);
    }

    #[test]
    fn clebsch_gordan_known_values() {
        // spin-1/2 ⊗ spin-1/2
        assert_relative_eq!(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 1.0, 0.0), 0.5f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0.0, 0.0), 0.5f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0.0, 0.0), -(0.5f64.sqrt()), max_relative = 1e-12);
        assert_eq!(clebsch_gordan(1.0, 1.0, 1.0, 1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn vdw_examples() {
        let cut = vdw_cutoff(45.0).unwrap();
        assert!(!cut.is_valid(&AtomPosition::new(44.9, 0.0, 0.0)));
        assert!(cut.is_valid(&AtomPosition::new(45.0, 0.0, 0.0)));
        let m = cut.max_coupling(&ModeGeometry::default());
        assert!((m - 50.0).abs() < 0.5);
        assert!(vdw_cutoff(-1.0).is_err());
    }

    #[test]
    fn rescaled_geometry() {
        let g = ModeGeometry::default().with_coupling_at(35.0, 45.0);
        let c = coupling_at(&g, &AtomPosition::new(45.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(c.magnitude(), 35.0, max_relative = 1e-12);
    }

    #[test]
    fn geometry_validation() {
        assert!(ModeGeometry::default().validate().is_ok());
        let bad = ModeGeometry { minor_diameter_um: 50.0, ..ModeGeometry::default() };
        assert!(bad.validate().is_err());
    }
}
