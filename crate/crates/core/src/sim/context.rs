//! Phone-context streams whose rates rise under stress.

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use super::SubjectProfile;
use crate::features::{CallType, ContextSnapshot, MessageType, NotificationSource};
use crate::rng::Rng;
use crate::time::Timestamp;

fn poisson(rate: f64, rng: &mut Rng) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u32
}

fn is_work_hour(hour: f64, day: i64) -> bool {
    day % 7 < 5 && (9.0..17.0).contains(&hour)
}

/// Context for the 15 minutes before `time`.
pub fn generate_context(
    profile: &SubjectProfile,
    time: Timestamp,
    stress: bool,
    hours_worn: f64,
    rng: &mut Rng,
) -> ContextSnapshot {
    let hour = time.hour_f64();
    let c = profile.context_coupling;
    let s = if stress { 1.0 } else { 0.0 };

    let base_work = if is_work_hour(hour, time.day()) { 0.6 } else { 0.1 };
    let p_work = (base_work + c * if stress { 0.15 } else { -0.02 }).clamp(0.0, 1.0);
    let place = if rng.random::<f64>() < p_work { profile.work } else { profile.home };
    let jitter = Normal::new(0.0, 2e-4).expect("finite std");

    let awake = (7.0..23.0).contains(&hour);
    let activity = if awake { 1.0 } else { 0.3 };

    let call_count = poisson(0.15 * activity * (1.0 + 0.5 * c * s), rng);
    let call_duration_s: f64 = (0..call_count)
        .map(|_| Exp::new(1.0 / 120.0).expect("positive rate").sample(rng))
        .sum();
    let call_type = if call_count == 0 {
        CallType::None
    } else {
        let u: f64 = rng.random();
        let missed = 0.15 + 0.1 * c * s;
        if u < missed {
            CallType::Missed
        } else if u < missed + (1.0 - missed) / 2.0 {
            CallType::Incoming
        } else {
            CallType::Outgoing
        }
    };

    let notification_count = poisson(4.0 * activity * (1.0 + 0.4 * c * s), rng);
    let notification_source = if notification_count == 0 {
        NotificationSource::None
    } else {
        let work_mass = 0.25 + 0.2 * c * s;
        let u: f64 = rng.random();
        if u < work_mass {
            if rng.random::<bool>() {
                NotificationSource::Email
            } else {
                NotificationSource::Calendar
            }
        } else {
            let rest = [
                NotificationSource::Messaging,
                NotificationSource::Social,
                NotificationSource::System,
                NotificationSource::Other,
            ];
            rest[rng.random_range(0..rest.len())]
        }
    };

    let screen_touches = poisson(25.0 * activity * (1.0 + 0.25 * c * s), rng);
    let message_count = poisson(1.2 * activity * (1.0 + 0.3 * c * s), rng);
    let message_type = if message_count == 0 {
        MessageType::None
    } else if rng.random::<f64>() < 0.55 {
        MessageType::Received
    } else {
        MessageType::Sent
    };

    let level_noise: f64 = Normal::new(0.0, 0.02).expect("finite std").sample(rng);
    let battery_level = (1.0 - 0.05 * hours_worn + level_noise).clamp(0.05, 1.0);
    let battery_charge_duration_s = if battery_level < 0.25 { rng.random_range(0.0..900.0) } else { 0.0 };

    ContextSnapshot {
        timestamp: time,
        call_duration_s,
        call_type: call_type.code(),
        call_count,
        notification_source: notification_source.code(),
        notification_count,
        screen_touches,
        battery_charge_duration_s,
        battery_level,
        message_type: message_type.code(),
        message_count,
        hour,
        longitude: place[0] + jitter.sample(rng),
        latitude: place[1] + jitter.sample(rng),
        altitude: place[2] + 5e3 * jitter.sample(rng),
    }
}
