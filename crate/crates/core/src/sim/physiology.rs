//! Beat-to-beat intervals and a double-bump pulse waveform.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::SubjectProfile;
use crate::dsp::PpgWindow;
use crate::error::Result;
use crate::rng::Rng;
use crate::time::Timestamp;

const NN_MIN_MS: f64 = 350.0;
const NN_MAX_MS: f64 = 1400.0;
/// Lag-one correlation of the non-respiratory interval noise.
const AR_COEF: f64 = 0.7;

/// Beat times in seconds over `[0, duration)`, plus one beat on each side.
///
/// Mean rate is `baseline + stress * gain + offset_bpm`. Intervals carry a
/// respiratory sinusoid and AR(1) noise, both multiplied by `variability`
/// and scaled down under stress.
pub fn beat_times(
    profile: &SubjectProfile,
    stress: bool,
    offset_bpm: f64,
    variability: f64,
    duration: f64,
    rng: &mut Rng,
) -> Vec<f64> {
    let hr = profile.baseline_hr + if stress { profile.hr_stress_gain } else { 0.0 } + offset_bpm;
    let mean_nn = 60_000.0 / hr.clamp(40.0, 170.0);
    let scale = variability * if stress { 1.0 - profile.hrv_stress_attenuation } else { 1.0 };
    let f_br = profile.breathing_rate / 60.0;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let innovation = profile.hrv_noise_ms * (1.0 - AR_COEF * AR_COEF).sqrt();
    let noise = Normal::new(0.0, innovation.max(0.0)).expect("finite std");
    let mut ar = profile.hrv_noise_ms * noise_draw(rng);
    let mut t = -rng.random_range(0.0..mean_nn / 1000.0);
    let mut beats = vec![t];
    while t < duration {
        ar = AR_COEF * ar + noise.sample(rng);
        let rsa = profile.rsa_amplitude_ms * (std::f64::consts::TAU * f_br * t + phase).sin();
        let nn = (mean_nn + scale * (rsa + ar)).clamp(NN_MIN_MS, NN_MAX_MS);
        t += nn / 1000.0;
        beats.push(t);
    }
    beats
}

fn noise_draw(rng: &mut Rng) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

/// Systolic peak followed by a smaller, wider dicrotic wave.
fn pulse(tau: f64, period: f64) -> f64 {
    let g = |center: f64, width: f64| {
        let z = (tau - center * period) / (width * period);
        (-0.5 * z * z).exp()
    };
    g(0.2, 0.09) + 0.4 * g(0.5, 0.12)
}

/// One burst of PPG. The per-burst heart-rate offset and variability level
/// model activity and posture and are independent of stress.
pub fn generate_ppg_waveform(
    profile: &SubjectProfile,
    subject_id: &str,
    start_time: Timestamp,
    latent_stress: bool,
    duration: f64,
    sample_rate: f64,
    rng: &mut Rng,
) -> Result<PpgWindow> {
    let offset = profile.hr_activity_sd * noise_draw(rng);
    let variability = (profile.variability_spread * noise_draw(rng)).exp();
    let beats = beat_times(profile, latent_stress, offset, variability, duration, rng);
    let n = (duration * sample_rate).round() as usize;
    let f_br = profile.breathing_rate / 60.0;
    let mut samples = vec![0.0; n];
    let mut k = 0;
    for (i, s) in samples.iter_mut().enumerate() {
        let t = i as f64 / sample_rate;
        while k + 1 < beats.len() && beats[k + 1] <= t {
            k += 1;
        }
        let mut v = 0.0;
        // Pulses extend into the next period, so include the previous beat.
        for j in k.saturating_sub(1)..(k + 1).min(beats.len() - 1) {
            let period = beats[j + 1] - beats[j];
            v += pulse(t - beats[j], period);
        }
        let wander = 0.15 * (std::f64::consts::TAU * f_br * t).sin();
        *s = v + wander + profile.ppg_noise * noise_draw(rng);
    }
    PpgWindow::new(subject_id, start_time, sample_rate, samples)
}
