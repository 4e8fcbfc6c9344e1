//! Oracles shared by the integration suites and the acceptance target.
#![allow(dead_code)]

use std::f64::consts::PI;

use ema_rl::agent::Action;
use ema_rl::dsp::{NnSeries, SosFilter};
use ema_rl::policies::{statistical_policy, DensityConfig, DensityTracker};
use ema_rl::rng::{self, Rng};
use rand::Rng as _;

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        return 0.0;
    }
    (got - want).abs() / want.abs().max(got.abs()).max(1e-300)
}

/// Amplitude of the filtered sine over its last `tail_s` seconds.
pub fn steady_state_amplitude(filter: &SosFilter, freq: f64, fs: f64, seconds: f64, tail_s: f64) -> f64 {
    let n = (seconds * fs) as usize;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect();
    let y = filter.apply(&x).unwrap();
    let tail = &y[n - (tail_s * fs) as usize..];
    (2.0 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
}

/// A plausible NN series: slow drift, respiratory modulation and jitter.
pub fn random_nn(r: &mut Rng) -> Vec<f64> {
    let n = r.random_range(60..200);
    let base = r.random_range(600.0..1100.0);
    let resp = r.random_range(0.12..0.38);
    let depth = r.random_range(0.0..80.0);
    let mut t = 0.0;
    (0..n)
        .map(|_| {
            let iv = base + depth * (2.0 * PI * resp * t).sin() + r.random_range(-40.0..40.0);
            t += iv / 1000.0;
            iv
        })
        .collect()
}

fn naive_mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn naive_pop_var(xs: &[f64]) -> f64 {
    let m = naive_mean(xs);
    let mut s = 0.0;
    for x in xs {
        s += (x - m) * (x - m);
    }
    s / xs.len() as f64
}

fn naive_median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    // Insertion sort keeps the oracle free of library ordering helpers.
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Breathing rate by direct DFT of the 4 Hz linearly resampled, Hann
/// windowed tachogram, searched on the 4096-point grid over 0.1–0.4 Hz.
pub fn naive_breathing_rate(intervals: &[f64]) -> f64 {
    let mut peak_times = vec![0.0];
    for iv in intervals {
        let last = *peak_times.last().unwrap();
        peak_times.push(last + iv / 1000.0);
    }
    let times = &peak_times[1..];
    let span = times[times.len() - 1] - times[0];
    let fs = 4.0;
    let n = (span * fs).floor() as usize + 1;
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let t = times[0] + i as f64 / fs;
        let mut k = 0;
        for j in 0..times.len() - 1 {
            if times[j] < t {
                k = j;
            }
        }
        let k = k.min(times.len() - 2);
        let a = ((t - times[k]) / (times[k + 1] - times[k])).clamp(0.0, 1.0);
        y.push(intervals[k] + a * (intervals[k + 1] - intervals[k]));
    }
    let m = naive_mean(&y);
    if naive_pop_var(&y) <= 1e-18 * m.abs().max(1.0).powi(2) {
        return 15.0;
    }
    let len = 4096usize.max(n.next_power_of_two());
    let df = fs / len as f64;
    let lo = (0.1 / df).ceil() as usize;
    let hi = (0.4 / df).floor() as usize;
    let (mut best, mut best_power) = (lo, -1.0);
    for k in lo..=hi {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in y.iter().enumerate() {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1).max(1) as f64).cos();
            let arg = -2.0 * PI * (k * i % len) as f64 / len as f64;
            re += (v - m) * w * arg.cos();
            im += (v - m) * w * arg.sin();
        }
        let power = re * re + im * im;
        if power > best_power {
            best = k;
            best_power = power;
        }
    }
    (60.0 * best as f64 * df).clamp(6.0, 24.0)
}

/// The twelve features from their defining formulas, in the library's
/// documented order.
pub fn hrv_oracle(iv: &[f64]) -> [f64; 12] {
    let diffs: Vec<f64> = (1..iv.len()).map(|i| iv[i] - iv[i - 1]).collect();
    let ibi = naive_mean(iv);
    let sdnn = naive_pop_var(iv).sqrt();
    let sdsd = naive_pop_var(&diffs).sqrt();
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let count = |ms: f64| diffs.iter().filter(|d| d.abs() > ms).count() as f64 / diffs.len() as f64;
    let med = naive_median(iv);
    let dev: Vec<f64> = iv.iter().map(|x| (x - med).abs()).collect();
    let sd1 = sdsd / 2f64.sqrt();
    let sd2 = (2.0 * sdnn * sdnn - 0.5 * sdsd * sdsd).max(0.0).sqrt();
    [
        60_000.0 / ibi,
        ibi,
        sdnn,
        sdsd,
        rmssd,
        count(20.0),
        count(50.0),
        naive_median(&dev),
        sd1,
        sd2,
        PI * sd1 * sd2,
        naive_breathing_rate(iv),
    ]
}

pub fn nn(iv: &[f64]) -> NnSeries {
    NnSeries::from_intervals(iv.to_vec()).unwrap()
}

/// Outcome of driving the statistical trigger against an independent
/// recount of its region densities.
#[derive(Debug, Default)]
pub struct TriggerAudit {
    pub warmup_queries: usize,
    pub warmup_samples: usize,
    pub decisions: usize,
    pub mismatches: usize,
    pub below_floor: usize,
    pub quota_nonzero: usize,
    pub regions_at_quota: usize,
    pub queries: usize,
}

/// Clustered 6-dimensional samples so some regions fill their quota.
pub fn clustered_sample(r: &mut Rng) -> Vec<f64> {
    let centre = [0.0, 3.0, -2.0][r.random_range(0..3)];
    (0..6).map(|j| centre * (j as f64 + 1.0) / 3.0 + r.random_range(-1.0..1.0)).collect()
}

pub fn audit_statistical_trigger(seed: u64, samples: usize) -> TriggerAudit {
    let config = DensityConfig::default();
    let mut tracker = DensityTracker::new(config.clone()).unwrap();
    let mut data_rng = rng::stream(seed, "samples");
    let mut policy_rng = rng::stream(seed, "policy");
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut labeled_regions: Vec<usize> = Vec::new();
    let mut audit = TriggerAudit::default();
    for i in 0..samples {
        let x = clustered_sample(&mut data_rng);
        let expected = tracker.projection().map(|p| {
            let region = p.region(&x);
            let mut unlabeled = vec![0i64; p.n_regions()];
            for s in &seen {
                unlabeled[p.region(s)] += 1;
            }
            let mut labeled = vec![0u32; p.n_regions()];
            for &r in &labeled_regions {
                unlabeled[r] -= 1;
                labeled[r] += 1;
            }
            if labeled[region] >= config.quota {
                (0.0, true)
            } else {
                let max = *unlabeled.iter().max().unwrap();
                let density = if max > 0 { unlabeled[region] as f64 / max as f64 } else { 0.0 };
                (density.max(0.1), false)
            }
        });
        let d = statistical_policy(&x, &mut tracker, &mut policy_rng).unwrap();
        match expected {
            None => {
                audit.warmup_samples += 1;
                if d.trigger == Action::Query || i >= config.warmup {
                    audit.warmup_queries += 1;
                }
            }
            Some((p, at_quota)) => {
                audit.decisions += 1;
                if d.probability_used != p {
                    audit.mismatches += 1;
                }
                if at_quota && (d.probability_used != 0.0 || d.trigger == Action::Query) {
                    audit.quota_nonzero += 1;
                }
                if !at_quota && d.probability_used < 0.1 {
                    audit.below_floor += 1;
                }
            }
        }
        if d.trigger == Action::Query {
            audit.queries += 1;
            let region = tracker.region(&x).unwrap();
            tracker.record_label(&x);
            labeled_regions.push(region);
        }
        seen.push(x);
    }
    let p = tracker.projection().unwrap();
    let mut labeled = vec![0u32; p.n_regions()];
    for &r in &labeled_regions {
        labeled[r] += 1;
    }
    audit.regions_at_quota = labeled.iter().filter(|&&l| l >= config.quota).count();
    audit
}

/// Largest relative disagreement between backprop and central finite
/// differences over every parameter, with L1 and L2 penalties active.
pub fn gradient_check(widths: &[usize], seed: u64) -> f64 {
    use ema_rl::agent::{Example, QNetwork, Regularization};
    let mut r = rng::stream(seed, "grad");
    let mut net = QNetwork::random(widths, Regularization { l1: 1e-2, l2: 1e-2 }, &mut r).unwrap();
    for p in net.params_mut() {
        *p += r.random_range(-0.1..0.1);
    }
    let batch: Vec<Example> = (0..8)
        .map(|_| Example {
            input: (0..widths[0]).map(|_| r.random()).collect(),
            action: r.random_range(0..widths[widths.len() - 1]),
            target: r.random_range(0.0..3.0),
        })
        .collect();
    let (_, grad) = net.loss_and_gradient(&batch);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for k in 0..grad.len() {
        let orig = net.params()[k];
        net.params_mut()[k] = orig + h;
        let up = net.loss(&batch).loss;
        net.params_mut()[k] = orig - h;
        let down = net.loss(&batch).loss;
        net.params_mut()[k] = orig;
        let fd = (up - down) / (2.0 * h);
        let scale = grad[k].abs().max(fd.abs()).max(1e-3);
        worst = worst.max((grad[k] - fd).abs() / scale);
    }
    worst
}

use ema_rl::agent::{AgentState, Environment, StepOutcome};

/// Two recurring states; the optimal action differs between them.
pub struct TwoState {
    pub at_b: bool,
}

pub const SA: [f64; 4] = [0.2, 0.2, 0.2, 0.2];
pub const SB: [f64; 4] = [0.8, 0.8, 0.8, 0.8];

pub fn toy_state(b: bool) -> AgentState {
    let v = if b { SB } else { SA };
    AgentState::new(v[0], v[1], v[2], v[3]).unwrap()
}

/// (reward, next is b) for (state, action).
pub fn toy_dynamics(b: bool, a: Action) -> (f64, bool) {
    match (b, a) {
        (false, Action::Query) => (1.0, true),
        (false, Action::NoQuery) => (0.0, false),
        (true, Action::Query) => (0.0, false),
        (true, Action::NoQuery) => (0.5, true),
    }
}

impl Environment for TwoState {
    fn reset(&mut self) -> AgentState {
        toy_state(self.at_b)
    }
    fn step(&mut self, action: Action) -> StepOutcome {
        let (reward, next) = toy_dynamics(self.at_b, action);
        self.at_b = next;
        StepOutcome {
            next_state: toy_state(next),
            reward,
            terminal: false,
        }
    }
}

pub fn value_iteration(gamma: f64) -> [[f64; 2]; 2] {
    let mut q = [[0.0f64; 2]; 2];
    for _ in 0..2000 {
        let v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
        for (s, row) in q.iter_mut().enumerate() {
            for a in [Action::NoQuery, Action::Query] {
                let (r, next) = toy_dynamics(s == 1, a);
                row[a.index()] = r + gamma * v[usize::from(next)];
            }
        }
    }
    q
}

