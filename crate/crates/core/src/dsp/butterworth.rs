//! Digital Butterworth band-pass design via the bilinear transform, realized
//! as cascaded second-order sections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub low_cut: f64,
    pub high_cut: f64,
    pub order: usize,
    pub sample_rate: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            low_cut: 0.7,
            high_cut: 3.5,
            order: 3,
            sample_rate: 20.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate / 2.0;
        if !(self.sample_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if !(self.low_cut > 0.0 && self.low_cut < self.high_cut && self.high_cut < nyquist) {
            return Err(Error::Parameter(format!(
                "band-pass cutoffs must satisfy 0 < low ({}) < high ({}) < Nyquist ({nyquist})",
                self.low_cut, self.high_cut
            )));
        }
        if self.order == 0 {
            return Err(Error::Parameter("filter order must be at least 1".into()));
        }
        Ok(())
    }

    fn prewarped(&self) -> (f64, f64) {
        let fs2 = 2.0 * self.sample_rate;
        let low = fs2 * (PI * self.low_cut / self.sample_rate).tan();
        let high = fs2 * (PI * self.high_cut / self.sample_rate).tan();
        (low, high)
    }
}

/// One biquad section, `b0 + b1 z^-1 + b2 z^-2 / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Sos {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub sections: Vec<Sos>,
    pub sample_rate: f64,
}

impl SosFilter {
    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let w = 2.0 * PI * freq / self.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn gain(&self, freq: f64) -> f64 {
        self.response(freq).norm()
    }

    /// Causal forward filtering, transposed direct form II per section.
    ///
    /// Section states start at the steady state for a constant input equal to
    /// the first sample, so a DC offset produces no start-up transient. The
    /// initial state is linear in the first sample, so the filter stays linear.
    pub fn apply(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(Error::Parameter("cannot filter an empty signal".into()));
        }
        let mut out = samples.to_vec();
        let mut dc_in = samples[0];
        for s in &self.sections {
            let dc_gain = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
            let dc_out = dc_gain * dc_in;
            let mut z2 = s.b[2] * dc_in - s.a[1] * dc_out;
            let mut z1 = s.b[1] * dc_in - s.a[0] * dc_out + z2;
            dc_in = dc_out;
            for x in out.iter_mut() {
                let input = *x;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * y + z2;
                z2 = s.b[2] * input - s.a[1] * y;
                *x = y;
            }
        }
        Ok(out)
    }
}

/// Design a Butterworth band-pass of `spec.order` (giving `order` biquads).
pub fn design_bandpass(spec: &FilterSpec) -> Result<SosFilter> {
    spec.validate()?;
    let n = spec.order;
    let fs2 = 2.0 * spec.sample_rate;
    let (low, high) = spec.prewarped();
    let bw = high - low;
    let w0_sq = low * high;

    // Analog low-pass prototype poles on the left half of the unit circle,
    // each mapped to two band-pass poles, then through the bilinear transform.
    let mut poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    let eps = 1e-12;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|z| z.im > eps).collect();
    let mut real: Vec<f64> = poles.iter().filter(|z| z.im.abs() <= eps).map(|z| z.re).collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    real.sort_by(f64::total_cmp);
    debug_assert_eq!(real.len() % 2, 0);

    let mut sections = Vec::with_capacity(n);
    for z in &complex {
        sections.push(Sos {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * z.re, z.norm_sqr()],
        });
    }
    for pair in real.chunks(2) {
        sections.push(Sos {
            b: [1.0, 0.0, -1.0],
            a: [-(pair[0] + pair[1]), pair[0] * pair[1]],
        });
    }

    // Unit gain at the band centre, where the Butterworth response peaks.
    let mut filter = SosFilter {
        sections,
        sample_rate: spec.sample_rate,
    };
    let centre = spec.sample_rate / PI * (w0_sq.sqrt() / fs2).atan();
    let g = filter.gain(centre);
    let per_section = g.powf(-1.0 / n as f64);
    for s in &mut filter.sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    Ok(filter)
}

/// Closed-form magnitude of the bilinear-transformed Butterworth band-pass
/// at `freq` Hz. Independent of the pole/section construction above.
pub fn analytic_bandpass_gain(spec: &FilterSpec, freq: f64) -> f64 {
    let (low, high) = spec.prewarped();
    let omega = 2.0 * spec.sample_rate * (PI * freq / spec.sample_rate).tan();
    if omega == 0.0 {
        return 0.0;
    }
    let ratio = (omega * omega - low * high) / (omega * (high - low));
    1.0 / (1.0 + ratio.powi(2 * spec.order as i32)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_closed_form_response() {
        let spec = FilterSpec::default();
        let f = design_bandpass(&spec).unwrap();
        assert_eq!(f.sections.len(), 3);
        for i in 1..100 {
            let freq = i as f64 * 0.099;
            let got = f.gain(freq);
            let want = analytic_bandpass_gain(&spec, freq);
            assert!((got - want).abs() < 1e-9, "{freq} Hz: {got} vs {want}");
        }
    }

    #[test]
    fn passband_and_stopband_examples() {
        let spec = FilterSpec::default();
        let f = design_bandpass(&spec).unwrap();
        let g2 = f.gain(2.0);
        assert!((0.95..=1.0 + 1e-12).contains(&g2), "{g2}");
        assert!(f.gain(0.1) < 0.05);
    }

    #[test]
    fn rejects_cutoff_above_nyquist() {
        let spec = FilterSpec {
            high_cut: 11.0,
            ..FilterSpec::default()
        };
        assert!(matches!(design_bandpass(&spec), Err(Error::Parameter(_))));
        let swapped = FilterSpec {
            low_cut: 4.0,
            high_cut: 1.0,
            ..FilterSpec::default()
        };
        assert!(design_bandpass(&swapped).is_err());
    }

    #[test]
    fn other_orders_and_wide_bands() {
        for order in 1..=5 {
            for (lo, hi) in [(0.5, 4.0), (0.1, 9.0), (2.0, 2.5)] {
                let spec = FilterSpec {
                    low_cut: lo,
                    high_cut: hi,
                    order,
                    sample_rate: 20.0,
                };
                let f = design_bandpass(&spec).unwrap();
                for freq in [0.05, 1.0, 2.2, 5.0, 9.5] {
                    let want = analytic_bandpass_gain(&spec, freq);
                    assert!((f.gain(freq) - want).abs() < 1e-8, "order {order} band ({lo},{hi}) at {freq}");
                }
            }
        }
    }

    #[test]
    fn stopbands_are_monotone() {
        let spec = FilterSpec::default();
        let f = design_bandpass(&spec).unwrap();
        let mut prev = 0.0;
        for i in 1..=70 {
            let g = f.gain(i as f64 * 0.01);
            assert!(g >= prev);
            prev = g;
        }
        let mut prev = f64::INFINITY;
        for i in 350..=999 {
            let g = f.gain(i as f64 * 0.01);
            assert!(g <= prev + 1e-15);
            prev = g;
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        let f = design_bandpass(&FilterSpec::default()).unwrap();
        assert!(f.apply(&[]).is_err());
        assert_eq!(f.apply(&[0.0; 50]).unwrap(), vec![0.0; 50]);
    }
}
