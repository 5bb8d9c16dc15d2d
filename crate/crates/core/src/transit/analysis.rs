//! Event finding, count histograms and detector cross-correlation.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::detection::CountTimeSeries;
use crate::error::{Error, Result};

/// Time window, ms after the drop. Bins are included when their start lies
/// in `[start_ms, end_ms)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisWindow {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl AnalysisWindow {
    pub fn new(start_ms: f64, end_ms: f64) -> Self {
        Self { start_ms, end_ms }
    }

    pub fn all() -> Self {
        Self { start_ms: f64::NEG_INFINITY, end_ms: f64::INFINITY }
    }

    /// `center_ms ± half_width_ms`.
    pub fn centered(center_ms: f64, half_width_ms: f64) -> Self {
        Self { start_ms: center_ms - half_width_ms, end_ms: center_ms + half_width_ms }
    }

    pub fn bins(&self, series: &CountTimeSeries) -> Range<usize> {
        let dt_ms = series.bin_dt_us * 1e-3;
        let index = |t: f64| {
            let k = ((t - series.origin_ms) / dt_ms).ceil();
            if k.is_nan() || k <= 0.0 {
                0
            } else {
                (k as usize).min(series.len())
            }
        };
        let lo = index(self.start_ms);
        let hi = index(self.end_ms).max(lo);
        lo..hi
    }
}

/// Run of adjacent bins at or above the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitEvent {
    pub first_bin: usize,
    pub last_bin: usize,
    /// Start of the first bin, ms after the drop.
    pub t_ms: f64,
    pub peak_counts: u32,
    pub total_counts: u32,
}

/// Transit events with combined counts `≥ c0`.
pub fn threshold_events(series: &CountTimeSeries, c0: u32) -> Result<Vec<TransitEvent>> {
    if c0 < 1 {
        return Err(Error::InvalidParameter("threshold must be at least one count".into()));
    }
    let mut events = Vec::new();
    let mut open: Option<TransitEvent> = None;
    for (k, c) in series.combined().into_iter().enumerate() {
        if c >= c0 {
            match open.as_mut() {
                Some(e) => {
                    e.last_bin = k;
                    e.peak_counts = e.peak_counts.max(c);
                    e.total_counts += c;
                }
                None => {
                    open = Some(TransitEvent {
                        first_bin: k,
                        last_bin: k,
                        t_ms: series.bin_start_ms(k),
                        peak_counts: c,
                        total_counts: c,
                    })
                }
            }
        } else if let Some(e) = open.take() {
            events.push(e);
        }
    }
    events.extend(open);
    Ok(events)
}

/// Empirical distribution of combined counts per bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountHistogram {
    /// `counts[c]` bins recorded `c` counts.
    pub counts: Vec<u64>,
    pub total_bins: u64,
    pub mean: f64,
    pub probabilities: Vec<f64>,
    /// Poisson probabilities with the same mean.
    pub poisson: Vec<f64>,
}

impl CountHistogram {
    /// `P(C ≥ c)`.
    pub fn tail(&self, c: usize) -> f64 {
        self.probabilities.iter().skip(c).sum()
    }

    /// Binomial standard error of [`CountHistogram::tail`].
    pub fn tail_error(&self, c: usize) -> f64 {
        let p = self.tail(c);
        (p * (1.0 - p) / self.total_bins as f64).sqrt()
    }

    pub fn poisson_tail(&self, c: usize) -> f64 {
        poisson_tail(self.mean, c)
    }

    /// Largest `|P̂(C) − P(C)| / σ` over the recorded range, with the
    /// multinomial error of the reference distribution.
    pub fn max_poisson_deviation(&self) -> f64 {
        let n = self.total_bins as f64;
        self.probabilities
            .iter()
            .zip(&self.poisson)
            .filter(|(_, &q)| q * n >= 5.0)
            .map(|(&p, &q)| (p - q).abs() / (q * (1.0 - q) / n).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Collects count histograms across drops.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HistogramAccumulator {
    counts: Vec<u64>,
}

impl HistogramAccumulator {
    pub fn add(&mut self, series: &CountTimeSeries, window: &AnalysisWindow) {
        let bins = window.bins(series);
        for k in bins {
            let c = (series.det1[k] + series.det2[k]) as usize;
            if c >= self.counts.len() {
                self.counts.resize(c + 1, 0);
            }
            self.counts[c] += 1;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn finish(&self) -> Result<CountHistogram> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyWindow);
        }
        let n = total as f64;
        let mean = self.counts.iter().enumerate().map(|(c, &k)| c as f64 * k as f64).sum::<f64>() / n;
        let probabilities: Vec<f64> = self.counts.iter().map(|&k| k as f64 / n).collect();
        let poisson = (0..self.counts.len()).map(|c| poisson_pmf(mean, c)).collect();
        Ok(CountHistogram { counts: self.counts.clone(), total_bins: total, mean, probabilities, poisson })
    }
}

pub fn count_histogram(series: &CountTimeSeries, window: &AnalysisWindow) -> Result<CountHistogram> {
    let mut acc = HistogramAccumulator::default();
    acc.add(series, window);
    acc.finish()
}

fn poisson_pmf(mean: f64, c: usize) -> f64 {
    if mean == 0.0 {
        return if c == 0 { 1.0 } else { 0.0 };
    }
    let ln = c as f64 * mean.ln() - mean - (1..=c).map(|k| (k as f64).ln()).sum::<f64>();
    ln.exp()
}

fn poisson_tail(mean: f64, c: usize) -> f64 {
    if c == 0 {
        return 1.0;
    }
    // upper tail summed directly to keep relative accuracy when it is tiny
    let mut term = poisson_pmf(mean, c);
    let mut sum = 0.0;
    let mut k = c;
    while term > 0.0 && (term > sum * 1e-17 || (k as f64) < mean) {
        sum += term;
        k += 1;
        term *= mean / k as f64;
    }
    sum
}

/// `Γ(τ) = ⟨C₁(t) C₂(t+τ)⟩ / (⟨C₁⟩⟨C₂⟩)` at bin resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelation {
    pub lags_us: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl CrossCorrelation {
    pub fn at_zero(&self) -> f64 {
        self.gamma[self.gamma.len() / 2]
    }

    /// Mean of `Γ` over lags with `|τ| > min_abs_lag_us`.
    pub fn baseline(&self, min_abs_lag_us: f64) -> Option<f64> {
        let tail: Vec<f64> = self
            .lags_us
            .iter()
            .zip(&self.gamma)
            .filter(|(l, _)| l.abs() > min_abs_lag_us)
            .map(|(_, &g)| g)
            .collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }

    /// Full width of the central peak at half height above `baseline`,
    /// linearly interpolated between lags.
    pub fn fwhm_us(&self, baseline: f64) -> Option<f64> {
        let mid = self.gamma.len() / 2;
        let half = baseline + 0.5 * (self.gamma[mid] - baseline);
        if !(self.gamma[mid] > baseline) {
            return None;
        }
        let crossing = |step: isize| -> Option<f64> {
            let mut k = mid as isize;
            loop {
                let next = k + step;
                if next < 0 || next as usize >= self.gamma.len() {
                    return None;
                }
                let (g0, g1) = (self.gamma[k as usize], self.gamma[next as usize]);
                if g1 <= half {
                    let (l0, l1) = (self.lags_us[k as usize], self.lags_us[next as usize]);
                    return Some(l0 + (g0 - half) / (g0 - g1) * (l1 - l0));
                }
                k = next;
            }
        };
        Some(crossing(1)? - crossing(-1)?)
    }
}

/// Sums for [`CrossCorrelation`] pooled over drops.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationAccumulator {
    max_lag_bins: usize,
    bin_dt_us: f64,
    products: Vec<f64>,
    pairs: Vec<u64>,
    sum1: f64,
    sum2: f64,
    bins: u64,
}

impl CorrelationAccumulator {
    pub fn new(max_lag_us: f64, bin_dt_us: f64) -> Result<Self> {
        if !(max_lag_us >= 0.0) || !(bin_dt_us > 0.0) {
            return Err(Error::InvalidParameter(format!("lag range {max_lag_us} µs at {bin_dt_us} µs bins")));
        }
        let max_lag_bins = (max_lag_us / bin_dt_us).floor() as usize;
        let n = 2 * max_lag_bins + 1;
        Ok(Self { max_lag_bins, bin_dt_us, products: vec![0.0; n], pairs: vec![0; n], sum1: 0.0, sum2: 0.0, bins: 0 })
    }

    pub fn add(&mut self, series: &CountTimeSeries, window: &AnalysisWindow) -> Result<()> {
        if (series.bin_dt_us - self.bin_dt_us).abs() > 1e-12 * self.bin_dt_us {
            return Err(Error::InvalidData("bin width differs between series".into()));
        }
        let r = window.bins(series);
        let (c1, c2) = (&series.det1[r.clone()], &series.det2[r]);
        self.sum1 += c1.iter().map(|&c| c as f64).sum::<f64>();
        self.sum2 += c2.iter().map(|&c| c as f64).sum::<f64>();
        self.bins += c1.len() as u64;
        let l = self.max_lag_bins as isize;
        let len = c1.len() as isize;
        for (slot, lag) in (-l..=l).enumerate() {
            let lo = 0.max(-lag);
            let hi = len.min(len - lag);
            if hi <= lo {
                continue;
            }
            let mut s = 0u64;
            for t in lo..hi {
                s += c1[t as usize] as u64 * c2[(t + lag) as usize] as u64;
            }
            self.products[slot] += s as f64;
            self.pairs[slot] += (hi - lo) as u64;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.max_lag_bins != self.max_lag_bins || other.bin_dt_us != self.bin_dt_us {
            return Err(Error::InvalidData("incompatible correlation accumulators".into()));
        }
        for (a, b) in self.products.iter_mut().zip(&other.products) {
            *a += b;
        }
        for (a, b) in self.pairs.iter_mut().zip(&other.pairs) {
            *a += b;
        }
        self.sum1 += other.sum1;
        self.sum2 += other.sum2;
        self.bins += other.bins;
        Ok(())
    }

    pub fn finish(&self) -> Result<CrossCorrelation> {
        if self.sum1 == 0.0 || self.sum2 == 0.0 {
            return Err(Error::ZeroMeanStream);
        }
        let n = self.bins as f64;
        let norm = (self.sum1 / n) * (self.sum2 / n);
        let l = self.max_lag_bins as isize;
        let lags_us = (-l..=l).map(|k| k as f64 * self.bin_dt_us).collect();
        let gamma = self
            .products
            .iter()
            .zip(&self.pairs)
            .map(|(&p, &k)| if k == 0 { f64::NAN } else { p / k as f64 / norm })
            .collect();
        Ok(CrossCorrelation { lags_us, gamma })
    }
}

pub fn cross_correlation(
    series: &CountTimeSeries,
    window: &AnalysisWindow,
    max_lag_us: f64,
) -> Result<CrossCorrelation> {
    let mut acc = CorrelationAccumulator::new(max_lag_us, series.bin_dt_us)?;
    acc.add(series, window)?;
    acc.finish()
}
