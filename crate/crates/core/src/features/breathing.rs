//! Breathing rate from respiratory sinus arrhythmia in the tachogram.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dsp::NnSeries;
use crate::error::{Error, Result};

/// Respiratory band searched for the dominant tachogram frequency, Hz.
pub const BREATHING_BAND: (f64, f64) = (0.1, 0.4);
/// Returned (unconfident) when the spectrum has no peak: the band centre.
pub const BREATHING_FALLBACK: f64 = 15.0;

const RESAMPLE_HZ: f64 = 4.0;
const MIN_SPAN_SECONDS: f64 = 30.0;
const FFT_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathingEstimate {
    /// Breaths per minute in `[6, 24]`.
    pub rate: f64,
    /// False when the tachogram is flat and the fallback was returned.
    pub confident: bool,
}

/// Dominant respiratory-band frequency of the 4 Hz resampled tachogram.
pub fn estimate_breathing_rate(nn: &NnSeries) -> Result<BreathingEstimate> {
    let times = &nn.peak_times[1..];
    let span = match (times.first(), times.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    if span < MIN_SPAN_SECONDS {
        return Err(Error::InsufficientBeats {
            needed: (MIN_SPAN_SECONDS as usize) + 1,
            found: nn.intervals.len(),
        });
    }

    // Linear interpolation of (beat time, interval ending there).
    let n = (span * RESAMPLE_HZ).floor() as usize + 1;
    let mut resampled = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = times[0] + i as f64 / RESAMPLE_HZ;
        while j + 2 < times.len() && times[j + 1] < t {
            j += 1;
        }
        let (t0, t1) = (times[j], times[j + 1]);
        let (y0, y1) = (nn.intervals[j], nn.intervals[j + 1]);
        let a = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        resampled.push(y0 + a * (y1 - y0));
    }

    let mean = resampled.iter().sum::<f64>() / n as f64;
    let var = resampled.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    if var <= 1e-18 * mean.abs().max(1.0).powi(2) {
        return Ok(BreathingEstimate {
            rate: BREATHING_FALLBACK,
            confident: false,
        });
    }

    let len = FFT_LEN.max(n.next_power_of_two());
    let mut buf: Vec<Complex<f64>> = resampled
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1).max(1) as f64).cos();
            Complex::new((y - mean) * hann, 0.0)
        })
        .collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let df = RESAMPLE_HZ / len as f64;
    let lo = (BREATHING_BAND.0 / df).ceil() as usize;
    let hi = (BREATHING_BAND.1 / df).floor() as usize;
    let best = (lo..=hi)
        .max_by(|&a, &b| buf[a].norm_sqr().total_cmp(&buf[b].norm_sqr()).then(b.cmp(&a)))
        .unwrap_or(lo);
    Ok(BreathingEstimate {
        rate: (60.0 * best as f64 * df).clamp(6.0, 24.0),
        confident: true,
    })
}
