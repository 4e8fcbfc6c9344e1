//! Beat detection on a conditioned PPG trace.
//!
//! Candidates are the maxima of runs where the trace exceeds
//! `baseline + k * amplitude`, with the baseline a 1 s moving average and the
//! amplitude a rolling peak-to-peak range. The sensitivity `k` is swept over a
//! small grid; the setting yielding the fewest physiologically implausible
//! intervals wins, ties going to the most regular interval sequence.

use serde::{Deserialize, Serialize};

use super::smoothing::{moving_average, rolling_range};
use crate::error::{Error, Result};

/// Inter-beat intervals and the beat times they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnSeries {
    /// Milliseconds; `intervals[i] = 1000 * (peak_times[i+1] - peak_times[i])`.
    pub intervals: Vec<f64>,
    /// Seconds from the window start.
    pub peak_times: Vec<f64>,
}

impl NnSeries {
    /// Build from strictly increasing beat times (seconds).
    pub fn from_peak_times(peak_times: Vec<f64>) -> Result<Self> {
        if peak_times.len() < 2 {
            return Err(Error::InsufficientBeats {
                needed: 2,
                found: peak_times.len(),
            });
        }
        let intervals: Vec<f64> = peak_times.windows(2).map(|w| (w[1] - w[0]) * 1000.0).collect();
        if intervals.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Parameter("beat times must strictly increase".into()));
        }
        Ok(Self {
            intervals,
            peak_times,
        })
    }

    /// Build from intervals (ms), placing the first beat at t = 0.
    pub fn from_intervals(intervals: Vec<f64>) -> Result<Self> {
        if intervals.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Parameter("NN intervals must be positive".into()));
        }
        let mut t = 0.0;
        let mut peak_times = Vec::with_capacity(intervals.len() + 1);
        peak_times.push(0.0);
        for d in &intervals {
            t += d / 1000.0;
            peak_times.push(t);
        }
        Ok(Self {
            intervals,
            peak_times,
        })
    }

    /// Time spanned by the beats, seconds.
    pub fn duration(&self) -> f64 {
        match (self.peak_times.first(), self.peak_times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakDetector {
    /// Minimum spacing between accepted beats, seconds.
    pub refractory: f64,
    pub baseline_window: f64,
    pub amplitude_window: f64,
    pub sensitivities: Vec<f64>,
    pub min_interval_ms: f64,
    pub max_interval_ms: f64,
    pub min_duration: f64,
}

impl Default for PeakDetector {
    fn default() -> Self {
        Self {
            refractory: 0.3,
            baseline_window: 1.0,
            amplitude_window: 1.5,
            sensitivities: vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
            min_interval_ms: 300.0,
            max_interval_ms: 1500.0,
            min_duration: 10.0,
        }
    }
}

struct Candidate {
    implausible: usize,
    spread: f64,
    peaks: Vec<f64>,
}

impl PeakDetector {
    fn plausible(&self, ms: f64) -> bool {
        (self.min_interval_ms..=self.max_interval_ms).contains(&ms)
    }

    pub fn detect(&self, samples: &[f64], sample_rate: f64) -> Result<NnSeries> {
        let duration = samples.len() as f64 / sample_rate;
        if duration < self.min_duration {
            return Err(Error::Parameter(format!(
                "peak detection needs at least {} s of signal, got {duration:.2} s",
                self.min_duration
            )));
        }
        let baseline = moving_average(samples, self.baseline_window, sample_rate)?;
        let width = ((self.amplitude_window * sample_rate).round() as usize).max(1);
        let amplitude = rolling_range(samples, width);

        let mut best: Option<Candidate> = None;
        for &k in &self.sensitivities {
            let peaks = self.peaks_at(samples, &baseline, &amplitude, k, sample_rate);
            if peaks.len() < 2 {
                continue;
            }
            let intervals: Vec<f64> = peaks.windows(2).map(|w| (w[1] - w[0]) * 1000.0).collect();
            let implausible = intervals.iter().filter(|&&d| !self.plausible(d)).count();
            let mean = intervals.iter().sum::<f64>() / intervals.len() as f64;
            let spread = (intervals.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
                / intervals.len() as f64)
                .sqrt();
            let better = match &best {
                None => true,
                Some(b) => implausible < b.implausible || (implausible == b.implausible && spread < b.spread),
            };
            if better {
                best = Some(Candidate {
                    implausible,
                    spread,
                    peaks,
                });
            }
        }
        let peaks = best.map(|b| b.peaks).unwrap_or_default();
        self.longest_plausible_run(&peaks)
    }

    fn peaks_at(
        &self,
        x: &[f64],
        baseline: &[f64],
        amplitude: &[f64],
        k: f64,
        sample_rate: f64,
    ) -> Vec<f64> {
        let n = x.len();
        let mut peaks: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < n {
            if x[i] > baseline[i] + k * amplitude[i] && amplitude[i] > 0.0 {
                let start = i;
                let mut top = i;
                while i < n && x[i] > baseline[i] + k * amplitude[i] {
                    if x[i] > x[top] {
                        top = i;
                    }
                    i += 1;
                }
                // A run touching either edge may be a truncated beat.
                if start == 0 || i == n {
                    continue;
                }
                let t = refine(x, top) / sample_rate;
                let h = x[top];
                match peaks.last_mut() {
                    Some(last) if t - last.0 < self.refractory => {
                        if h > last.1 {
                            *last = (t, h);
                        }
                    }
                    _ => peaks.push((t, h)),
                }
            } else {
                i += 1;
            }
        }
        peaks.into_iter().map(|(t, _)| t).collect()
    }

    fn longest_plausible_run(&self, peaks: &[f64]) -> Result<NnSeries> {
        let (mut best_start, mut best_len) = (0, 0);
        let mut start = 0;
        for i in 0..peaks.len() {
            let ok = i + 1 < peaks.len() && self.plausible((peaks[i + 1] - peaks[i]) * 1000.0);
            if !ok {
                let len = i + 1 - start;
                if len > best_len {
                    best_start = start;
                    best_len = len;
                }
                start = i + 1;
            }
        }
        if best_len < 2 {
            return Err(Error::InsufficientBeats {
                needed: 2,
                found: best_len,
            });
        }
        NnSeries::from_peak_times(peaks[best_start..best_start + best_len].to_vec())
    }
}

/// Sub-sample peak position by a parabola through the three samples around `i`.
fn refine(x: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return i as f64;
    }
    let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return i as f64;
    }
    i as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Detect beats with the default detector.
pub fn detect_peaks(samples: &[f64], sample_rate: f64) -> Result<NnSeries> {
    PeakDetector::default().detect(samples, sample_rate)
}
