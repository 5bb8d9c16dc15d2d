//! Monte Carlo of single-atom transits through the evanescent field.
//!
//! A drop releases a Poisson number of atoms that cross the interaction
//! shell on straight vertical lines `z(t) = V (t − t₀)`. The cavity response
//! is quasi-static (`1/κ` is nanoseconds, a transit is microseconds), so the
//! forward transmission along each path is the steady-state value at the
//! instantaneous coupling, averaged over every counting bin.

mod analysis;
mod detection;
mod sweep;

pub use analysis::{
    count_histogram, cross_correlation, threshold_events, AnalysisWindow, CorrelationAccumulator,
    CountHistogram, CrossCorrelation, HistogramAccumulator, TransitEvent,
};
pub use detection::{detect, detect_with, CountTimeSeries, DeadTimeModel, DetectionChain};
pub use sweep::{
    detuning_sweep, theory_sweep, Averaging, SweepCurve, SweepOptions, SweepPoint, TheoryGrid,
};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{coupling_at, AtomPosition, ModeGeometry, VdwCutoff, VDW_CUTOFF_NM};
use crate::model::{forward_transmission, SystemParams};
use crate::rng::{self, StreamRng};

pub const STANDARD_GRAVITY: f64 = 9.81;
const BOLTZMANN: f64 = 1.380_649e-23;
const CESIUM_MASS_KG: f64 = 132.905_451_931 * 1.660_539_066_60e-27;
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Cold-atom cloud released above the chip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudParams {
    /// Height of the cloud above the resonator, mm.
    pub drop_height_mm: f64,
    /// Vertical FWHM of the cloud at the height of the chip, mm.
    pub cloud_fwhm_mm: f64,
    /// Temperature, µK.
    pub temperature_uk: f64,
    /// Poisson mean of the number of atoms crossing the shell per drop.
    pub mean_transits_per_drop: f64,
    /// Atoms in the cloud. Not used by the simulation.
    pub atom_count: f64,
}

impl Default for CloudParams {
    fn default() -> Self {
        Self {
            drop_height_mm: 10.0,
            cloud_fwhm_mm: 3.0,
            temperature_uk: 10.0,
            mean_transits_per_drop: 30.0,
            atom_count: 2e6,
        }
    }
}

impl CloudParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.drop_height_mm > 0.0
            && self.cloud_fwhm_mm > 0.0
            && self.temperature_uk > 0.0
            && self.mean_transits_per_drop >= 0.0
            && self.atom_count >= 0.0
            && self.drop_height_mm.is_finite()
            && self.cloud_fwhm_mm.is_finite()
            && self.temperature_uk.is_finite()
            && self.mean_transits_per_drop.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid cloud parameters {self:?}")))
        }
    }

    /// Free-fall time to the chip, ms.
    pub fn mean_arrival_ms(&self) -> f64 {
        (2.0 * self.drop_height_mm * 1e-3 / STANDARD_GRAVITY).sqrt() * 1e3
    }

    /// Free-fall velocity at the chip, m/s.
    pub fn fall_velocity(&self) -> f64 {
        (2.0 * STANDARD_GRAVITY * self.drop_height_mm * 1e-3).sqrt()
    }

    /// Spread of arrival times from the cloud extent, ms.
    pub fn arrival_sigma_ms(&self) -> f64 {
        self.cloud_fwhm_mm / FWHM_PER_SIGMA / self.fall_velocity()
    }

    /// One-dimensional thermal velocity spread, m/s.
    pub fn thermal_velocity(&self) -> f64 {
        (BOLTZMANN * self.temperature_uk * 1e-6 / CESIUM_MASS_KG).sqrt()
    }
}

/// Region of `(ρ, x)` where atoms are launched.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Shell {
    /// Closest approach before the atom is lost to the surface, nm.
    pub rho_min: f64,
    /// Inner edge of the sampled radial range, nm.
    pub rho_inner: f64,
    /// Radial extent of the sampled range in units of `ƛ`.
    pub width_decay_lengths: f64,
}

impl Default for Shell {
    fn default() -> Self {
        Self { rho_min: VDW_CUTOFF_NM, rho_inner: VDW_CUTOFF_NM, width_decay_lengths: 5.0 }
    }
}

impl Shell {
    pub fn cutoff(&self) -> VdwCutoff {
        VdwCutoff { rho_min: self.rho_min }
    }

    pub fn rho_range(&self, geom: &ModeGeometry) -> (f64, f64) {
        (self.rho_inner, self.rho_inner + self.width_decay_lengths * geom.decay_length_nm())
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho_min >= 0.0 && self.rho_inner >= 0.0 && self.width_decay_lengths > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid shell {self:?}")))
        }
    }
}

/// Straight vertical path through the shell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomTrajectory {
    /// nm
    pub rho: f64,
    /// nm
    pub x: f64,
    /// Downward velocity, m/s.
    pub velocity: f64,
    /// Time of closest approach to the mode center, ms after the drop.
    pub t0_ms: f64,
    pub valid: bool,
}

impl AtomTrajectory {
    /// Vertical position relative to the mode center at `t_ms`, nm.
    pub fn z_at(&self, t_ms: f64) -> f64 {
        self.velocity * (t_ms - self.t0_ms) * 1e6
    }

    pub fn position_at(&self, t_ms: f64) -> AtomPosition {
        AtomPosition::new(self.rho, self.x, self.z_at(t_ms))
    }
}

/// Atoms crossing the shell in one drop, sorted by arrival time.
pub fn sample_drop(
    cloud: &CloudParams,
    shell: &Shell,
    geom: &ModeGeometry,
    averaging: Averaging,
    seed: u64,
) -> Result<Vec<AtomTrajectory>> {
    sample_drop_with(cloud, shell, geom, averaging, &mut rng::stream(seed, 0))
}

pub fn sample_drop_with<R: Rng>(
    cloud: &CloudParams,
    shell: &Shell,
    geom: &ModeGeometry,
    averaging: Averaging,
    rng: &mut R,
) -> Result<Vec<AtomTrajectory>> {
    cloud.validate()?;
    shell.validate()?;
    if cloud.mean_transits_per_drop == 0.0 {
        return Ok(Vec::new());
    }
    let n = Poisson::new(cloud.mean_transits_per_drop)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng) as usize;
    let v0 = cloud.fall_velocity();
    let arrival = Normal::new(cloud.mean_arrival_ms(), cloud.arrival_sigma_ms())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let thermal = Normal::new(0.0, cloud.thermal_velocity())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (rho_lo, rho_hi) = shell.rho_range(geom);
    let cutoff = shell.cutoff();
    let circumference = geom.circumference_nm();

    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let rho = match averaging {
            Averaging::XOnly => rho_lo,
            Averaging::Full => rng.random_range(rho_lo..rho_hi),
        };
        let x = rng.random_range(0.0..circumference);
        let t0_ms = arrival.sample(rng);
        let velocity = (v0 + thermal.sample(rng)).max(1e-3 * v0);
        let valid = cutoff.is_valid(&AtomPosition::new(rho, x, 0.0));
        if valid {
            out.push(AtomTrajectory { rho, x, velocity, t0_ms, valid });
        }
    }
    out.sort_by(|a, b| a.t0_ms.total_cmp(&b.t0_ms));
    Ok(out)
}

/// Uniform time bins starting at `origin_ms`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub origin_ms: f64,
    pub bin_dt_us: f64,
    pub n_bins: usize,
}

impl TimeGrid {
    pub fn bin_start_ms(&self, k: usize) -> f64 {
        self.origin_ms + k as f64 * self.bin_dt_us * 1e-3
    }

    pub fn bin_center_ms(&self, k: usize) -> f64 {
        self.origin_ms + (k as f64 + 0.5) * self.bin_dt_us * 1e-3
    }
}

/// Bin-averaged transmission for one bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinTransmission {
    pub bin: usize,
    /// Bin center, ms after the drop.
    pub t_ms: f64,
    pub t_f: f64,
}

/// Number of vertical widths beyond which the coupling is ignored.
const PROFILE_REACH: f64 = 5.0;
pub const MIN_SUB_SAMPLES: usize = 8;

/// Forward transmission along one trajectory, averaged over each bin of
/// `grid` that the atom influences.
pub fn transit_transmission(
    traj: &AtomTrajectory,
    geom: &ModeGeometry,
    params: &SystemParams,
    grid: &TimeGrid,
    sub_samples: usize,
) -> Result<Vec<BinTransmission>> {
    if !traj.valid {
        return Err(Error::InvalidTrajectory("atom lost to the surface".into()));
    }
    if !(traj.velocity > 0.0) || !traj.t0_ms.is_finite() || !(traj.rho >= 0.0) {
        return Err(Error::InvalidTrajectory(format!("{traj:?}")));
    }
    if params.delta != 0.0 {
        return Err(Error::InvalidParameter("transits are evaluated with the probe at the cavity (delta = 0)".into()));
    }
    let sub = sub_samples.max(MIN_SUB_SAMPLES);
    let half_ms = PROFILE_REACH * geom.vertical_width_um * 1e3 / (traj.velocity * 1e6);
    let dt_ms = grid.bin_dt_us * 1e-3;
    let first = ((traj.t0_ms - half_ms - grid.origin_ms) / dt_ms).floor().max(0.0) as usize;
    let last = ((traj.t0_ms + half_ms - grid.origin_ms) / dt_ms).ceil();
    if last < 0.0 {
        return Ok(Vec::new());
    }
    let last = (last as usize).min(grid.n_bins);

    let mut out = Vec::with_capacity(last.saturating_sub(first));
    for bin in first..last {
        let start = grid.bin_start_ms(bin);
        let mut acc = 0.0;
        for j in 0..sub {
            let t = start + (j as f64 + 0.5) / sub as f64 * dt_ms;
            let c = coupling_at(geom, &traj.position_at(t))?;
            acc += forward_transmission(&params.with_coupling(c.g_tw))?;
        }
        out.push(BinTransmission { bin, t_ms: grid.bin_center_ms(bin), t_f: acc / sub as f64 });
    }
    Ok(out)
}

/// Everything needed to simulate one drop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitConfig {
    /// Resonator, atom and probe; `delta` must be zero.
    pub system: SystemParams,
    pub geometry: ModeGeometry,
    pub cloud: CloudParams,
    pub shell: Shell,
    pub detection: DetectionChain,
    /// Half width of the recorded window around the mean arrival time, ms.
    pub record_half_width_ms: f64,
    pub sub_samples: usize,
    pub averaging: Averaging,
}

impl TransitConfig {
    /// Experiment defaults with the given resonator parameters.
    pub fn new(system: SystemParams) -> Self {
        Self {
            system,
            geometry: ModeGeometry::default(),
            cloud: CloudParams::default(),
            shell: Shell::default(),
            detection: DetectionChain::default(),
            record_half_width_ms: 10.0,
            sub_samples: MIN_SUB_SAMPLES,
            averaging: Averaging::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.geometry.validate()?;
        self.cloud.validate()?;
        self.shell.validate()?;
        self.detection.validate()?;
        if !(self.record_half_width_ms > 0.0) {
            return Err(Error::InvalidParameter("record_half_width_ms must be positive".into()));
        }
        if self.system.delta != 0.0 {
            return Err(Error::InvalidParameter("probe must sit at the cavity resonance (delta = 0)".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> TimeGrid {
        let dt_ms = self.detection.bin_dt_us * 1e-3;
        let n_bins = (2.0 * self.record_half_width_ms / dt_ms).round() as usize;
        TimeGrid {
            origin_ms: self.cloud.mean_arrival_ms() - self.record_half_width_ms,
            bin_dt_us: self.detection.bin_dt_us,
            n_bins,
        }
    }

    /// Same configuration with atom–cavity detuning `delta_ac`.
    pub fn at_detuning(mut self, delta_ac: f64) -> Self {
        self.system = self.system.probe_at_cavity(delta_ac);
        self
    }

    /// Same configuration with maximal accessible coupling `g0m` at the
    /// inner edge of the shell.
    pub fn with_max_coupling(mut self, g0m: f64) -> Self {
        self.geometry = self.geometry.with_coupling_at(g0m, self.shell.rho_inner);
        self
    }
}

/// One simulated drop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub trajectories: Vec<AtomTrajectory>,
    /// Per-bin forward transmission.
    pub transmission: Vec<f64>,
    pub counts: CountTimeSeries,
}

/// Per-bin transmission of the whole drop: the empty-cavity value plus the
/// excess from each atom, capped at one.
pub fn drop_transmission(config: &TransitConfig, trajectories: &[AtomTrajectory]) -> Result<Vec<f64>> {
    let grid = config.grid();
    let empty = forward_transmission(&config.system.with_coupling(crate::C64::new(0.0, 0.0)))?;
    let mut tf = vec![empty; grid.n_bins];
    for traj in trajectories {
        for b in transit_transmission(traj, &config.geometry, &config.system, &grid, config.sub_samples)? {
            tf[b.bin] += b.t_f - empty;
        }
    }
    for v in &mut tf {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(tf)
}

/// Simulate one drop; `stream` selects the independent random stream.
pub fn simulate_drop(config: &TransitConfig, seed: u64, stream: u64) -> Result<DropRecord> {
    config.validate()?;
    let mut rng: StreamRng = rng::stream(seed, stream);
    let trajectories = sample_drop_with(&config.cloud, &config.shell, &config.geometry, config.averaging, &mut rng)?;
    let transmission = drop_transmission(config, &trajectories)?;
    let grid = config.grid();
    let mut counts = detect_with(&transmission, &config.detection, grid.origin_ms, &mut rng)?;
    counts.seed = seed;
    counts.stream = stream;
    Ok(DropRecord { trajectories, transmission, counts })
}
