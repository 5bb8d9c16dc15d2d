//! Two-detector photon counting of the forward flux.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{intracavity_photons, SystemParams};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeadTimeModel {
    /// Counts arriving within the dead time of a *registered* count are lost.
    NonParalyzable,
    /// Every arrival, registered or not, restarts the dead time.
    Paralyzable,
}

/// Fibre path, beam splitter and the two photon counters.
///
/// The flux scale is anchored at the detectors through `c_max`, so the path
/// and quantum efficiencies only enter [`DetectionChain::expected_c_max`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionChain {
    /// Propagation efficiency from the resonator to the splitter.
    pub path_efficiency: f64,
    /// Quantum efficiency of each counter.
    pub quantum_efficiency: f64,
    /// Dark counts per second, per detector.
    pub dark_rate_hz: f64,
    pub dead_time_ns: f64,
    pub dead_time_model: DeadTimeModel,
    /// Fraction of the flux sent to detector 1.
    pub splitter: f64,
    pub bin_dt_us: f64,
    /// Mean combined counts per bin for a far-detuned probe.
    pub c_max: f64,
    /// Mean combined counts per bin at critical coupling without atoms.
    pub background_mean: f64,
    /// Relative rms of slow background drift; zero disables it.
    pub drift_rel_rms: f64,
    /// Correlation time of the drift, µs.
    pub drift_corr_time_us: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self {
            path_efficiency: 0.70,
            quantum_efficiency: 0.5,
            dark_rate_hz: 50.0,
            dead_time_ns: 50.0,
            dead_time_model: DeadTimeModel::NonParalyzable,
            splitter: 0.5,
            bin_dt_us: 2.0,
            c_max: 30.0,
            background_mean: 0.25,
            drift_rel_rms: 0.0,
            drift_corr_time_us: 1000.0,
        }
    }
}

impl DetectionChain {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = unit(self.path_efficiency)
            && unit(self.quantum_efficiency)
            && unit(self.splitter)
            && self.dark_rate_hz >= 0.0
            && self.dead_time_ns >= 0.0
            && self.bin_dt_us > 0.0
            && self.background_mean >= 0.0
            && self.c_max > self.background_mean
            && self.drift_rel_rms >= 0.0
            && self.drift_corr_time_us > 0.0
            && self.c_max.is_finite()
            && self.bin_dt_us.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid detection chain {self:?}")))
        }
    }

    /// Mean combined counts per bin at transmission `t_f`.
    pub fn mean_counts(&self, t_f: f64) -> f64 {
        self.background_mean + t_f * (self.c_max - self.background_mean)
    }

    /// Far-detuned counts per bin implied by an intracavity photon number
    /// `n0` in mode `a` for the critically coupled, atom-free resonator.
    pub fn expected_c_max(&self, params: &SystemParams, n0: f64) -> Result<f64> {
        let unit = params.with_coupling(crate::C64::new(0.0, 0.0)).with_drive(crate::C64::new(1.0, 0.0));
        let (na, _) = intracavity_photons(&unit)?;
        // |a_in|² in photons per (µs/2π) for unit drive: 1 / (2κ_ex)
        let flux_per_us = n0 / na / (2.0 * params.kappa_ex) * 2.0 * std::f64::consts::PI;
        Ok(flux_per_us * self.bin_dt_us * self.path_efficiency * self.quantum_efficiency)
    }

    /// `|expected / c_max − 1| ≤ tolerance`.
    pub fn consistent_with(&self, params: &SystemParams, n0: f64, tolerance: f64) -> Result<bool> {
        Ok((self.expected_c_max(params, n0)? / self.c_max - 1.0).abs() <= tolerance)
    }
}

/// Per-detector counts in uniform bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTimeSeries {
    pub det1: Vec<u32>,
    pub det2: Vec<u32>,
    pub bin_dt_us: f64,
    /// Start of bin 0, ms after the drop.
    pub origin_ms: f64,
    pub seed: u64,
    pub stream: u64,
}

impl CountTimeSeries {
    pub fn new(det1: Vec<u32>, det2: Vec<u32>, bin_dt_us: f64, origin_ms: f64) -> Result<Self> {
        if det1.len() != det2.len() {
            return Err(Error::InvalidData("detector streams differ in length".into()));
        }
        if !(bin_dt_us > 0.0) {
            return Err(Error::InvalidData("bin width must be positive".into()));
        }
        Ok(Self { det1, det2, bin_dt_us, origin_ms, seed: 0, stream: 0 })
    }

    pub fn len(&self) -> usize {
        self.det1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.det1.is_empty()
    }

    pub fn combined(&self) -> Vec<u32> {
        self.det1.iter().zip(&self.det2).map(|(a, b)| a + b).collect()
    }

    /// Start time of bin `k`, ms after the drop.
    pub fn bin_start_ms(&self, k: usize) -> f64 {
        self.origin_ms + k as f64 * self.bin_dt_us * 1e-3
    }
}

struct Counter {
    /// µs; arrivals before this time are lost
    blocked_until: f64,
}

impl Counter {
    fn register<R: Rng>(
        &mut self,
        arrivals: usize,
        bin_start_us: f64,
        chain: &DetectionChain,
        rng: &mut R,
    ) -> u32 {
        let tau = chain.dead_time_ns * 1e-3;
        if tau == 0.0 {
            return arrivals as u32;
        }
        let mut times: Vec<f64> = (0..arrivals)
            .map(|_| bin_start_us + rng.random::<f64>() * chain.bin_dt_us)
            .collect();
        times.sort_by(f64::total_cmp);
        let mut registered = 0;
        for t in times {
            let free = t >= self.blocked_until;
            if free {
                registered += 1;
            }
            if free || chain.dead_time_model == DeadTimeModel::Paralyzable {
                self.blocked_until = t + tau;
            }
        }
        registered
    }
}

/// Photon counts for a per-bin transmission record.
pub fn detect(transmission: &[f64], chain: &DetectionChain, origin_ms: f64, seed: u64) -> Result<CountTimeSeries> {
    let mut series = detect_with(transmission, chain, origin_ms, &mut rng::stream(seed, 0))?;
    series.seed = seed;
    Ok(series)
}

pub fn detect_with<R: Rng>(
    transmission: &[f64],
    chain: &DetectionChain,
    origin_ms: f64,
    rng: &mut R,
) -> Result<CountTimeSeries> {
    chain.validate()?;
    if let Some((k, t)) = transmission.iter().enumerate().find(|(_, t)| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::InvalidData(format!("transmission {t} in bin {k}")));
    }
    let drift_step = (chain.drift_rel_rms > 0.0).then(|| {
        let a = (-chain.bin_dt_us / chain.drift_corr_time_us).exp();
        (a, chain.drift_rel_rms * (1.0 - a * a).sqrt())
    });
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut drift = if drift_step.is_some() { chain.drift_rel_rms * std_normal.sample(rng) } else { 0.0 };
    let means: Vec<f64> = transmission
        .iter()
        .map(|&t_f| {
            let background = match drift_step {
                Some((a, s)) => {
                    drift = a * drift + s * std_normal.sample(rng);
                    chain.background_mean * (1.0 + drift).max(0.0)
                }
                None => chain.background_mean,
            };
            background + t_f * (chain.c_max - chain.background_mean)
        })
        .collect();

    let dark = chain.dark_rate_hz * chain.bin_dt_us * 1e-6;
    let det1 = count_detector(&means, chain.splitter, dark, chain, rng)?;
    let det2 = count_detector(&means, 1.0 - chain.splitter, dark, chain, rng)?;
    CountTimeSeries::new(det1, det2, chain.bin_dt_us, origin_ms)
}

/// Counts of one detector. Runs of bins with the same small mean are
/// sampled by skipping ahead geometrically to the next non-empty bin.
fn count_detector<R: Rng>(means: &[f64], share: f64, dark: f64, chain: &DetectionChain, rng: &mut R) -> Result<Vec<u32>> {
    let n = means.len();
    let lambdas: Vec<f64> = means.iter().map(|m| m * share + dark).collect();
    let mut out = vec![0u32; n];
    let mut counter = Counter { blocked_until: f64::NEG_INFINITY };
    let mut register = |k: usize, arrivals: usize, rng: &mut R| {
        counter.register(arrivals, k as f64 * chain.bin_dt_us, chain, rng)
    };
    let mut k = 0;
    while k < n {
        let lambda = lambdas[k];
        let mut end = k + 1;
        while end < n && lambdas[end] == lambda {
            end += 1;
        }
        if lambda <= 0.0 {
            k = end;
            continue;
        }
        let p_empty = (-lambda).exp();
        if end - k > 1 && p_empty >= 0.5 {
            let gap = Geometric::new(1.0 - p_empty).map_err(|e| Error::InvalidData(e.to_string()))?;
            let mut pos = k;
            loop {
                pos = pos.saturating_add(gap.sample(rng) as usize);
                if pos >= end {
                    break;
                }
                let arrivals = nonzero_poisson(lambda, p_empty, rng);
                out[pos] = register(pos, arrivals, rng);
                pos += 1;
            }
        } else {
            let dist = Poisson::new(lambda).map_err(|e| Error::InvalidData(e.to_string()))?;
            for (j, slot) in out.iter_mut().enumerate().take(end).skip(k) {
                let arrivals = dist.sample(rng) as usize;
                if arrivals > 0 {
                    *slot = register(j, arrivals, rng);
                }
            }
        }
        k = end;
    }
    Ok(out)
}

/// Poisson(λ) conditioned on at least one event, by inversion.
fn nonzero_poisson<R: Rng>(lambda: f64, p_empty: f64, rng: &mut R) -> usize {
    let target = p_empty + rng.random::<f64>() * (1.0 - p_empty);
    let mut pmf = p_empty * lambda;
    let mut cdf = p_empty + pmf;
    let mut k = 1;
    while cdf < target && pmf > 0.0 {
        k += 1;
        pmf *= lambda / k as f64;
        cdf += pmf;
    }
    k
}
