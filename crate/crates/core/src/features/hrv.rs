use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::breathing::{estimate_breathing_rate, BREATHING_FALLBACK};
use crate::dsp::NnSeries;
use crate::error::{Error, Result};

pub const HRV_FEATURE_NAMES: [&str; 12] = [
    "bpm", "ibi", "sdnn", "sdsd", "rmssd", "pnn20", "pnn50", "hr_mad", "sd1", "sd2", "s", "br",
];

/// Time-domain and Poincaré HRV statistics of one NN series.
///
/// Standard deviations are population (divide by n). Intervals and
/// dispersions are in ms, `s` in ms², `br` in breaths per minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrvFeatures {
    pub bpm: f64,
    pub ibi: f64,
    pub sdnn: f64,
    pub sdsd: f64,
    pub rmssd: f64,
    pub pnn20: f64,
    pub pnn50: f64,
    pub hr_mad: f64,
    pub sd1: f64,
    pub sd2: f64,
    pub s: f64,
    pub br: f64,
}

impl HrvFeatures {
    pub fn to_array(&self) -> [f64; 12] {
        [
            self.bpm, self.ibi, self.sdnn, self.sdsd, self.rmssd, self.pnn20, self.pnn50, self.hr_mad,
            self.sd1, self.sd2, self.s, self.br,
        ]
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pop_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Compute all twelve HRV features. Needs at least four intervals.
///
/// Breathing rate falls back to the band centre when the series is too short
/// for a spectral estimate.
pub fn extract_hrv_features(nn: &NnSeries) -> Result<HrvFeatures> {
    let iv = &nn.intervals;
    if iv.len() < 4 {
        return Err(Error::InsufficientBeats {
            needed: 4,
            found: iv.len(),
        });
    }
    let ibi = mean(iv);
    let diffs: Vec<f64> = iv.windows(2).map(|w| w[1] - w[0]).collect();
    let sdnn = pop_std(iv);
    let sdsd = pop_std(&diffs);
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let frac_above = |ms: f64| diffs.iter().filter(|d| d.abs() > ms).count() as f64 / diffs.len() as f64;
    let med = median(iv);
    let deviations: Vec<f64> = iv.iter().map(|x| (x - med).abs()).collect();
    let sd1 = (sdsd * sdsd / 2.0).sqrt();
    let sd2 = (2.0 * sdnn * sdnn - sdsd * sdsd / 2.0).max(0.0).sqrt();
    let br = estimate_breathing_rate(nn)
        .map(|b| b.rate)
        .unwrap_or(BREATHING_FALLBACK);
    Ok(HrvFeatures {
        bpm: 60_000.0 / ibi,
        ibi,
        sdnn,
        sdsd,
        rmssd,
        pnn20: frac_above(20.0),
        pnn50: frac_above(50.0),
        hr_mad: median(&deviations),
        sd1,
        sd2,
        s: PI * sd1 * sd2,
        br,
    })
}
