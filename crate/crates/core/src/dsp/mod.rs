//! PPG conditioning: band-pass filtering, smoothing, min-max scaling and beat
//! detection.
//!
//! Everything here is a pure function of its inputs.

mod butterworth;
mod normalize;
mod peaks;
mod smoothing;

pub use butterworth::{analytic_bandpass_gain, design_bandpass, FilterSpec, Sos, SosFilter};
pub use normalize::{min_max_normalize, MinMaxBounds};
pub use peaks::{detect_peaks, NnSeries, PeakDetector};
pub use smoothing::moving_average;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const DEFAULT_SAMPLE_RATE: f64 = 20.0;
pub const DEFAULT_WINDOW_SECONDS: f64 = 120.0;

/// One raw PPG burst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpgWindow {
    pub subject_id: String,
    pub start_time: Timestamp,
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl PpgWindow {
    pub fn new(
        subject_id: impl Into<String>,
        start_time: Timestamp,
        sample_rate: f64,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::Parameter(format!("sample rate must be > 0, got {sample_rate}")));
        }
        if samples.is_empty() {
            return Err(Error::Parameter("PPG window has no samples".into()));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            start_time,
            sample_rate,
            samples,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Settings for the full conditioning chain applied to each burst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditioningConfig {
    pub filter: FilterSpec,
    /// Smoothing window applied after the band-pass filter, seconds.
    pub smoothing_window: f64,
    pub detector: PeakDetector,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            // A 1 s boxcar at 20 Hz has spectral nulls at 1, 2 and 3 Hz and
            // erases pulse fundamentals at 60/120/180 BPM. The 1 s window is
            // used instead as the detector baseline (see `PeakDetector`).
            smoothing_window: 0.25,
            detector: PeakDetector::default(),
        }
    }
}

/// Band-pass filter, smooth and detect beats in one window.
pub fn condition_window(window: &PpgWindow, config: &ConditioningConfig) -> Result<NnSeries> {
    let mut spec = config.filter.clone();
    spec.sample_rate = window.sample_rate;
    let filter = design_bandpass(&spec)?;
    let filtered = filter.apply(&window.samples)?;
    let smoothed = moving_average(&filtered, config.smoothing_window, window.sample_rate)?;
    config.detector.detect(&smoothed, window.sample_rate)
}
