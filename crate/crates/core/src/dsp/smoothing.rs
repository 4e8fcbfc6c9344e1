use crate::error::{Error, Result};

/// Centered moving average over `window` seconds.
///
/// The window holds `round(window * sample_rate)` samples; near the edges it
/// shrinks to the samples that exist instead of padding with zeros.
pub fn moving_average(samples: &[f64], window: f64, sample_rate: f64) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Parameter("cannot smooth an empty signal".into()));
    }
    let width = (window * sample_rate).round();
    if !(width >= 1.0) {
        return Err(Error::Parameter(format!(
            "smoothing window of {window} s at {sample_rate} Hz spans less than one sample"
        )));
    }
    let width = width as usize;
    let before = width / 2;
    let after = width - 1 - before;

    let mut prefix = Vec::with_capacity(samples.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in samples {
        acc += x;
        prefix.push(acc);
    }
    let n = samples.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect())
}

/// Centered rolling `max - min` over `width` samples, shrinking at the edges.
pub(crate) fn rolling_range(samples: &[f64], width: usize) -> Vec<f64> {
    let before = width / 2;
    let after = width.saturating_sub(1 + before);
    let n = samples.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(n - 1);
            let w = &samples[lo..=hi];
            let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = w.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        })
        .collect()
}
