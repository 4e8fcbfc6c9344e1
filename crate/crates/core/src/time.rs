//! Simulated civil time.
//!
//! Timestamps are whole seconds since local midnight of study day 0. There is
//! no timezone handling: the simulated participant lives on one civil clock.

use serde::{Deserialize, Serialize};

pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_day_hms(day: i64, hour: i64, minute: i64, second: i64) -> Self {
        Timestamp(day * SECONDS_PER_DAY + hour * SECONDS_PER_HOUR + minute * 60 + second)
    }

    pub fn seconds(self) -> i64 {
        self.0
    }

    /// Civil day index.
    pub fn day(self) -> i64 {
        self.0.div_euclid(SECONDS_PER_DAY)
    }

    /// Hour of day in `0..24`.
    pub fn hour(self) -> usize {
        (self.0.rem_euclid(SECONDS_PER_DAY) / SECONDS_PER_HOUR) as usize
    }

    /// Fractional hour of day in `[0, 24)`.
    pub fn hour_f64(self) -> f64 {
        self.0.rem_euclid(SECONDS_PER_DAY) as f64 / SECONDS_PER_HOUR as f64
    }

    pub fn plus_seconds(self, s: i64) -> Self {
        Timestamp(self.0 + s)
    }

    /// Seconds elapsed since `earlier` (negative if `earlier` is later).
    pub fn since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }
}

impl std::fmt::Display for Timestamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rem = self.0.rem_euclid(SECONDS_PER_DAY);
        write!(
            f,
            "d{}+{:02}:{:02}:{:02}",
            self.day(),
            rem / 3600,
            (rem / 60) % 60,
            rem % 60
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn civil_fields() {
        let t = Timestamp::from_day_hms(3, 14, 30, 5);
        assert_eq!(t.day(), 3);
        assert_eq!(t.hour(), 14);
        assert!((t.hour_f64() - (14.5 + 5.0 / 3600.0)).abs() < 1e-12);
        assert_eq!(t.to_string(), "d3+14:30:05");
    }

    #[test]
    fn negative_times_wrap() {
        let t = Timestamp(-1);
        assert_eq!(t.day(), -1);
        assert_eq!(t.hour(), 23);
    }
}
