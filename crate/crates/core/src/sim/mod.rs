//! Synthetic cohorts: latent stress, PPG physiology, phone context and
//! prompt-response behavior for a set of simulated participants.
//!
//! Everything is a pure function of the cohort config and its seed. Each
//! subject draws from its own streams, and each burst carries a seed from
//! which its PPG window is regenerated on demand.

mod context;
mod physiology;

pub use context::generate_context;
pub use physiology::{beat_times, generate_ppg_waveform};

use rand::Rng as _;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dsp::{PpgWindow, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW_SECONDS};
use crate::error::{Error, Result};
use crate::features::ContextSnapshot;
use crate::rng::{self, Rng};
use crate::time::{Timestamp, SECONDS_PER_DAY, SECONDS_PER_HOUR};

pub const BURST_INTERVAL_S: i64 = 15 * 60;
/// Answers later than this after a sample do not label it.
pub const LABEL_HORIZON_S: i64 = 15 * 60;
/// Prompts within this window before a delivery count as recent.
pub const RECENT_WINDOW_S: i64 = 4 * SECONDS_PER_HOUR;

/// Longitude, latitude, altitude.
pub type Location = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub seed: u64,
    /// Resting heart rate, BPM.
    pub baseline_hr: f64,
    /// Heart-rate increase under stress, BPM.
    pub hr_stress_gain: f64,
    /// Fraction by which beat-to-beat variability shrinks under stress.
    pub hrv_stress_attenuation: f64,
    /// Respiratory modulation of NN intervals, ms.
    pub rsa_amplitude_ms: f64,
    /// Standard deviation of the non-respiratory NN noise, ms.
    pub hrv_noise_ms: f64,
    /// Burst-to-burst heart-rate spread from activity, BPM.
    pub hr_activity_sd: f64,
    /// Log-scale spread of the burst-to-burst variability level.
    pub variability_spread: f64,
    pub breathing_rate: f64,
    /// Additive PPG noise, in units of the systolic peak height.
    pub ppg_noise: f64,
    /// Calm-to-stressed transition rate per hour, before modulation.
    pub stress_onset_rate: f64,
    /// Stressed-to-calm transition rate per hour.
    pub stress_recovery_rate: f64,
    /// Relative mid-day increase of the onset rate.
    pub circadian_amplitude: f64,
    pub stress_peak_hour: f64,
    /// Probability of answering a prompt, per hour of day.
    pub responsiveness: Vec<f64>,
    pub response_delay_mean_s: f64,
    /// Answer probability is multiplied by this per recent prompt.
    pub annoyance: f64,
    /// Probability that an answer is drawn uniformly from 1..=5.
    pub label_noise: f64,
    /// Extra label noise per recent prompt.
    pub annoyance_label_noise: f64,
    /// Strength of the link between stress and phone context, `[0, 1]`.
    pub context_coupling: f64,
    pub home: Location,
    pub work: Location,
    pub wear_start_hour: f64,
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(format!("subject {}: {what}", self.subject_id)));
        if !(50.0..=90.0).contains(&self.baseline_hr) {
            return bad("baseline_hr must lie in [50, 90]");
        }
        if self.responsiveness.len() != 24 || self.responsiveness.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("responsiveness needs 24 values in [0, 1]");
        }
        for (name, v) in [
            ("hrv_stress_attenuation", self.hrv_stress_attenuation),
            ("annoyance", self.annoyance),
            ("label_noise", self.label_noise),
            ("context_coupling", self.context_coupling),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.stress_onset_rate < 0.0 || self.stress_recovery_rate < 0.0 {
            return bad("transition rates must be non-negative");
        }
        if !(0.0..=7.99).contains(&self.wear_start_hour) {
            return bad("wear_start_hour must lie in [0, 8)");
        }
        Ok(())
    }

    /// Calm-to-stressed rate per hour at hour-of-day `h`.
    pub fn onset_rate(&self, h: f64) -> f64 {
        let phase = std::f64::consts::TAU * (h - self.stress_peak_hour) / 24.0;
        self.stress_onset_rate * (1.0 + self.circadian_amplitude * phase.cos()).max(0.0)
    }

    pub fn answer_probability(&self, time: Timestamp, recent_queries: u32) -> f64 {
        self.responsiveness[time.hour()] * self.annoyance.powi(recent_queries as i32)
    }
}

/// Inclusive range from which a profile field is drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn draw(&self, homogeneous: bool, rng: &mut Rng) -> f64 {
        if homogeneous || self.hi <= self.lo {
            self.mid()
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Cohort size and the distributions profiles are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub subjects: usize,
    pub days: usize,
    pub seed: u64,
    /// Give every subject the midpoint of every span (a control cohort).
    pub homogeneous: bool,
    pub wear_hours: u32,
    /// Maximum shift of the daily wear start, minutes (either way).
    pub wear_jitter_min: f64,
    pub baseline_hr: Span,
    pub hr_stress_gain: Span,
    pub hrv_stress_attenuation: Span,
    pub rsa_amplitude_ms: Span,
    pub hrv_noise_ms: Span,
    pub hr_activity_sd: Span,
    pub variability_spread: Span,
    pub breathing_rate: Span,
    pub ppg_noise: Span,
    pub stress_onset_rate: Span,
    pub stress_recovery_rate: Span,
    pub circadian_amplitude: Span,
    pub stress_peak_hour: Span,
    pub responsiveness_base: Span,
    pub responsiveness_swing: Span,
    pub responsiveness_peak_hour: Span,
    pub response_delay_mean_s: Span,
    pub annoyance: Span,
    pub label_noise: Span,
    pub annoyance_label_noise: Span,
    pub context_coupling: Span,
    pub wear_start_hour: Span,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            subjects: 10,
            days: 14,
            seed: 0,
            homogeneous: false,
            wear_hours: 16,
            wear_jitter_min: 30.0,
            baseline_hr: Span::new(55.0, 85.0),
            hr_stress_gain: Span::new(4.0, 9.0),
            hrv_stress_attenuation: Span::new(0.15, 0.35),
            rsa_amplitude_ms: Span::new(20.0, 45.0),
            hrv_noise_ms: Span::new(15.0, 30.0),
            hr_activity_sd: Span::new(5.0, 8.0),
            variability_spread: Span::new(0.25, 0.4),
            breathing_rate: Span::new(12.0, 18.0),
            ppg_noise: Span::new(0.02, 0.08),
            stress_onset_rate: Span::new(0.2, 0.4),
            stress_recovery_rate: Span::new(0.6, 1.0),
            circadian_amplitude: Span::new(0.5, 1.0),
            stress_peak_hour: Span::new(11.0, 17.0),
            responsiveness_base: Span::new(0.3, 0.6),
            responsiveness_swing: Span::new(0.3, 0.5),
            responsiveness_peak_hour: Span::new(9.0, 20.0),
            response_delay_mean_s: Span::new(120.0, 420.0),
            annoyance: Span::new(0.7, 0.9),
            label_noise: Span::new(0.05, 0.15),
            annoyance_label_noise: Span::new(0.0, 0.05),
            context_coupling: Span::new(0.5, 1.0),
            wear_start_hour: Span::new(6.5, 7.5),
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.days == 0 {
            return Err(Error::Config("cohort needs at least one subject and one day".into()));
        }
        if self.wear_hours == 0 || self.wear_hours > 16 {
            return Err(Error::Config(format!("wear_hours {} outside 1..=16", self.wear_hours)));
        }
        if !(0.0..=30.0).contains(&self.wear_jitter_min) {
            return Err(Error::Config("wear_jitter_min must lie in [0, 30]".into()));
        }
        Ok(())
    }

    pub fn paper_scale() -> Self {
        Self {
            subjects: 34,
            days: 20,
            ..Self::default()
        }
    }

    pub fn draw_profile(&self, index: usize) -> SubjectProfile {
        let mut r = rng::indexed_stream(self.seed, "profile", index as u64);
        let h = self.homogeneous;
        let mut d = |s: Span| s.draw(h, &mut r);
        let baseline_hr = d(self.baseline_hr);
        let hr_stress_gain = d(self.hr_stress_gain);
        let hrv_stress_attenuation = d(self.hrv_stress_attenuation);
        let rsa_amplitude_ms = d(self.rsa_amplitude_ms);
        let hrv_noise_ms = d(self.hrv_noise_ms);
        let hr_activity_sd = d(self.hr_activity_sd);
        let variability_spread = d(self.variability_spread);
        let breathing_rate = d(self.breathing_rate);
        let ppg_noise = d(self.ppg_noise);
        let stress_onset_rate = d(self.stress_onset_rate);
        let stress_recovery_rate = d(self.stress_recovery_rate);
        let circadian_amplitude = d(self.circadian_amplitude);
        let stress_peak_hour = d(self.stress_peak_hour);
        let base = d(self.responsiveness_base);
        let swing = d(self.responsiveness_swing);
        let peak = d(self.responsiveness_peak_hour);
        let response_delay_mean_s = d(self.response_delay_mean_s);
        let annoyance = d(self.annoyance);
        let label_noise = d(self.label_noise);
        let annoyance_label_noise = d(self.annoyance_label_noise);
        let context_coupling = d(self.context_coupling);
        let wear_start_hour = d(self.wear_start_hour);
        let lon = d(Span::new(-118.0, -117.5));
        let lat = d(Span::new(33.5, 34.0));
        let alt = d(Span::new(10.0, 200.0));
        let wlon = d(Span::new(-118.0, -117.5));
        let wlat = d(Span::new(33.5, 34.0));
        let walt = d(Span::new(10.0, 200.0));
        let responsiveness = (0..24)
            .map(|hour| {
                let phase = std::f64::consts::TAU * (hour as f64 - peak) / 24.0;
                (base + swing * phase.cos()).clamp(0.02, 0.98)
            })
            .collect();
        SubjectProfile {
            subject_id: format!("s{:02}", index + 1),
            seed: rng::derive_indexed(self.seed, "subject", index as u64),
            baseline_hr,
            hr_stress_gain,
            hrv_stress_attenuation,
            rsa_amplitude_ms,
            hrv_noise_ms,
            hr_activity_sd,
            variability_spread,
            breathing_rate,
            ppg_noise,
            stress_onset_rate,
            stress_recovery_rate,
            circadian_amplitude,
            stress_peak_hour,
            responsiveness,
            response_delay_mean_s,
            annoyance,
            label_noise,
            annoyance_label_noise,
            context_coupling,
            home: [lon, lat, alt],
            // A homogeneous cohort still separates home and work.
            work: if h { [lon + 0.05, lat + 0.05, alt + 20.0] } else { [wlon, wlat, walt] },
            wear_start_hour,
        }
    }
}

/// Minute-resolution latent stress state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressTimeline {
    minutes: Vec<bool>,
}

impl StressTimeline {
    pub fn simulate(profile: &SubjectProfile, days: usize, rng: &mut Rng) -> Self {
        let n = days * 24 * 60;
        let mut minutes = Vec::with_capacity(n);
        let stationary = profile.stress_onset_rate / (profile.stress_onset_rate + profile.stress_recovery_rate).max(1e-12);
        let mut state = rng.random::<f64>() < stationary;
        for m in 0..n {
            let h = (m % 1440) as f64 / 60.0;
            let rate = if state {
                profile.stress_recovery_rate
            } else {
                profile.onset_rate(h)
            };
            if rng.random::<f64>() < 1.0 - (-rate / 60.0).exp() {
                state = !state;
            }
            minutes.push(state);
        }
        Self { minutes }
    }

    pub fn at(&self, t: Timestamp) -> bool {
        let m = (t.seconds().max(0) / 60) as usize;
        self.minutes.get(m).copied().unwrap_or(false)
    }

    pub fn fraction(&self) -> f64 {
        self.minutes.iter().filter(|&&s| s).count() as f64 / self.minutes.len().max(1) as f64
    }
}

/// One 2-minute PPG recording and the context preceding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub index: usize,
    pub time: Timestamp,
    /// Latent stress at `time` (simulation ground truth).
    pub stress: bool,
    pub context: ContextSnapshot,
    /// Seed of the waveform stream.
    pub seed: u64,
}

impl Burst {
    pub fn window(&self, profile: &SubjectProfile) -> Result<PpgWindow> {
        let mut r = Rng::seed_from_u64(self.seed);
        generate_ppg_waveform(
            profile,
            &profile.subject_id,
            self.time,
            self.stress,
            DEFAULT_WINDOW_SECONDS,
            DEFAULT_SAMPLE_RATE,
            &mut r,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectStream {
    pub profile: SubjectProfile,
    pub timeline: StressTimeline,
    pub bursts: Vec<Burst>,
}

impl SubjectStream {
    pub fn simulate(profile: SubjectProfile, config: &CohortConfig) -> Result<Self> {
        profile.validate()?;
        let mut r = Rng::seed_from_u64(profile.seed);
        let timeline = StressTimeline::simulate(&profile, config.days, &mut r);
        let per_day = (config.wear_hours as i64 * SECONDS_PER_HOUR / BURST_INTERVAL_S) as usize;
        let mut bursts = Vec::with_capacity(per_day * config.days);
        for day in 0..config.days as i64 {
            let jitter = if config.wear_jitter_min > 0.0 {
                r.random_range(-config.wear_jitter_min..=config.wear_jitter_min)
            } else {
                0.0
            };
            let start_s = ((profile.wear_start_hour * 60.0 + jitter) * 60.0).round() as i64;
            let start_s = start_s.clamp(0, SECONDS_PER_DAY - per_day as i64 * BURST_INTERVAL_S);
            for k in 0..per_day {
                let time = Timestamp(day * SECONDS_PER_DAY + start_s + k as i64 * BURST_INTERVAL_S);
                let stress = timeline.at(time);
                let hours_worn = (k as i64 * BURST_INTERVAL_S) as f64 / SECONDS_PER_HOUR as f64;
                let context = generate_context(&profile, time, stress, hours_worn, &mut r);
                bursts.push(Burst {
                    index: bursts.len(),
                    time,
                    stress,
                    context,
                    seed: r.random(),
                });
            }
        }
        Ok(Self {
            profile,
            timeline,
            bursts,
        })
    }

    /// Recorded events in time order (prompt events are added by whoever
    /// runs a policy over the stream).
    pub fn events(&self) -> Vec<SimEvent> {
        self.bursts
            .iter()
            .map(|b| SimEvent {
                timestamp: b.time,
                kind: SimEventKind::PpgBurst { burst: b.index },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub config: CohortConfig,
    pub subjects: Vec<SubjectStream>,
}

pub fn synth_cohort(config: &CohortConfig) -> Result<Cohort> {
    config.validate()?;
    let subjects = (0..config.subjects)
        .map(|i| SubjectStream::simulate(config.draw_profile(i), config))
        .collect::<Result<Vec<_>>>()?;
    Ok(Cohort {
        config: config.clone(),
        subjects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEventKind {
    PpgBurst { burst: usize },
    EmaDelivered { burst: usize },
    EmaAnswered { burst: usize, label5: u8 },
    EmaIgnored { burst: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub timestamp: Timestamp,
    #[serde(flatten)]
    pub kind: SimEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EmaAnswer {
    pub time: Timestamp,
    pub label5: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum EmaOutcome {
    Answered { answer: EmaAnswer },
    Ignored,
}

impl EmaOutcome {
    pub fn answer(&self) -> Option<EmaAnswer> {
        match self {
            EmaOutcome::Answered { answer } => Some(*answer),
            EmaOutcome::Ignored => None,
        }
    }
}

/// Simulate the participant's reaction to a prompt sent at `time`.
///
/// Always consumes the same four draws from `rng`, so two policies that
/// prompt at the same sample with the same stream see the same reaction.
pub fn deliver_ema(
    profile: &SubjectProfile,
    time: Timestamp,
    recent_query_count: u32,
    latent_stress: bool,
    rng: &mut Rng,
) -> EmaOutcome {
    let u_answer: f64 = rng.random();
    let u_noise: f64 = rng.random();
    let u_label: f64 = rng.random();
    let u_delay: f64 = rng.random();
    if u_answer >= profile.answer_probability(time, recent_query_count) {
        return EmaOutcome::Ignored;
    }
    let noise = (profile.label_noise + profile.annoyance_label_noise * f64::from(recent_query_count)).min(1.0);
    let label5 = if u_noise < noise {
        1 + (u_label * 5.0).floor().min(4.0) as u8
    } else if latent_stress {
        if u_label < 0.6 {
            4
        } else {
            5
        }
    } else if u_label < 0.45 {
        1
    } else if u_label < 0.8 {
        2
    } else {
        3
    };
    let delay = -profile.response_delay_mean_s.max(1.0) * (1.0 - u_delay).ln();
    EmaOutcome::Answered {
        answer: EmaAnswer {
            time: time.plus_seconds(delay.round() as i64),
            label5,
        },
    }
}

/// First answer at or after `sample_time` within the horizon. `answers`
/// must be sorted.
pub fn answer_attach(sample_time: Timestamp, answers: &[EmaAnswer]) -> Option<&EmaAnswer> {
    let i = answers.partition_point(|a| a.time < sample_time);
    answers.get(i).filter(|a| a.time.since(sample_time) <= LABEL_HORIZON_S)
}

/// Label of the first answer at or after `sample_time` within the horizon.
/// `answers` must be sorted.
pub fn label_attach(sample_time: Timestamp, answers: &[EmaAnswer]) -> Option<u8> {
    answer_attach(sample_time, answers).map(|a| a.label5)
}
