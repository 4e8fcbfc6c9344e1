//! Phone-context snapshot and its fixed numeric encoding.
//!
//! Categorical fields are one-hot encoded against the code tables below, the
//! hour goes onto the unit circle, and everything else passes through as a
//! magnitude. The column order is `CONTEXT_FEATURE_NAMES` and never changes.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::time::Timestamp;

macro_rules! code_table {
    ($(#[$m:meta])* $name:ident { $($variant:ident = $code:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant = $code),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> u32 {
                self as u32
            }

            pub fn from_code(code: u32) -> Option<Self> {
                Self::ALL.iter().copied().find(|v| v.code() == code)
            }
        }
    };
}

code_table!(CallType { None = 0, Incoming = 1, Outgoing = 2, Missed = 3 });
code_table!(NotificationSource {
    None = 0,
    Messaging = 1,
    Social = 2,
    Email = 3,
    Calendar = 4,
    System = 5,
    Other = 6,
});
code_table!(MessageType { None = 0, Received = 1, Sent = 2 });

pub const CONTEXT_FEATURE_NAMES: [&str; 26] = [
    "call_duration_s",
    "call_count",
    "call_type_none",
    "call_type_incoming",
    "call_type_outgoing",
    "call_type_missed",
    "notification_count",
    "notification_source_none",
    "notification_source_messaging",
    "notification_source_social",
    "notification_source_email",
    "notification_source_calendar",
    "notification_source_system",
    "notification_source_other",
    "screen_touch_count",
    "battery_charge_duration_s",
    "battery_level",
    "message_count",
    "message_type_none",
    "message_type_received",
    "message_type_sent",
    "hour_sin",
    "hour_cos",
    "longitude",
    "latitude",
    "altitude",
];

/// Context aggregated over the 15 minutes preceding a PPG burst.
///
/// Categorical fields hold raw codes as logged by the phone; they are
/// checked against the code tables only when encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    pub timestamp: Timestamp,
    pub call_duration_s: f64,
    pub call_type: u32,
    pub call_count: u32,
    pub notification_source: u32,
    pub notification_count: u32,
    pub screen_touches: u32,
    pub battery_charge_duration_s: f64,
    pub battery_level: f64,
    pub message_type: u32,
    pub message_count: u32,
    /// Hour of day in `[0, 24)`.
    pub hour: f64,
    pub longitude: f64,
    pub latitude: f64,
    pub altitude: f64,
}

impl Default for ContextSnapshot {
    fn default() -> Self {
        Self {
            timestamp: Timestamp(0),
            call_duration_s: 0.0,
            call_type: 0,
            call_count: 0,
            notification_source: 0,
            notification_count: 0,
            screen_touches: 0,
            battery_charge_duration_s: 0.0,
            battery_level: 1.0,
            message_type: 0,
            message_count: 0,
            hour: 0.0,
            longitude: 0.0,
            latitude: 0.0,
            altitude: 0.0,
        }
    }
}

fn one_hot(out: &mut Vec<f64>, codes: impl Iterator<Item = u32>, code: u32) {
    out.extend(codes.map(|c| if c == code { 1.0 } else { 0.0 }));
}

pub fn encode_context(s: &ContextSnapshot) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&s.battery_level) {
        return Err(Error::Parameter(format!("battery level {} outside [0, 1]", s.battery_level)));
    }
    if !(0.0..24.0).contains(&s.hour) {
        return Err(Error::Parameter(format!("hour {} outside [0, 24)", s.hour)));
    }
    if s.call_duration_s < 0.0 || s.battery_charge_duration_s < 0.0 {
        return Err(Error::Parameter("durations must be non-negative".into()));
    }
    let call = CallType::from_code(s.call_type).ok_or(Error::Encoding {
        field: "call_type",
        code: s.call_type,
    })?;
    let notification = NotificationSource::from_code(s.notification_source).ok_or(Error::Encoding {
        field: "notification_source",
        code: s.notification_source,
    })?;
    let message = MessageType::from_code(s.message_type).ok_or(Error::Encoding {
        field: "message_type",
        code: s.message_type,
    })?;

    let mut v = Vec::with_capacity(CONTEXT_FEATURE_NAMES.len());
    v.push(s.call_duration_s);
    v.push(f64::from(s.call_count));
    one_hot(&mut v, CallType::ALL.iter().map(|c| c.code()), call.code());
    v.push(f64::from(s.notification_count));
    one_hot(&mut v, NotificationSource::ALL.iter().map(|c| c.code()), notification.code());
    v.push(f64::from(s.screen_touches));
    v.push(s.battery_charge_duration_s);
    v.push(s.battery_level);
    v.push(f64::from(s.message_count));
    one_hot(&mut v, MessageType::ALL.iter().map(|c| c.code()), message.code());
    let angle = 2.0 * PI * s.hour / 24.0;
    v.push(angle.sin());
    v.push(angle.cos());
    v.push(s.longitude);
    v.push(s.latitude);
    v.push(s.altitude);
    debug_assert_eq!(v.len(), CONTEXT_FEATURE_NAMES.len());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_hour(hour: f64) -> Vec<f64> {
        encode_context(&ContextSnapshot {
            hour,
            ..Default::default()
        })
        .unwrap()
    }

    fn col(name: &str) -> usize {
        CONTEXT_FEATURE_NAMES.iter().position(|n| *n == name).unwrap()
    }

    #[test]
    fn hour_on_unit_circle() {
        let v = at_hour(0.0);
        assert_eq!((v[col("hour_sin")], v[col("hour_cos")]), (0.0, 1.0));
        let v = at_hour(6.0);
        assert!((v[col("hour_sin")] - 1.0).abs() < 1e-15);
        assert!(v[col("hour_cos")].abs() < 1e-15);
    }

    #[test]
    fn unknown_call_type_names_the_field() {
        let err = encode_context(&ContextSnapshot {
            call_type: 9,
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::Encoding { field: "call_type", code: 9 }));
    }

    #[test]
    fn golden_column_order() {
        let s = ContextSnapshot {
            call_duration_s: 42.0,
            call_type: 3,
            call_count: 2,
            notification_source: 4,
            notification_count: 7,
            screen_touches: 55,
            battery_charge_duration_s: 600.0,
            battery_level: 0.25,
            message_type: 2,
            message_count: 3,
            hour: 12.0,
            longitude: -117.8,
            latitude: 33.6,
            altitude: 20.0,
            ..Default::default()
        };
        let v = encode_context(&s).unwrap();
        let expected = [
            42.0, 2.0, 0.0, 0.0, 0.0, 1.0, 7.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 55.0, 600.0, 0.25, 3.0, 0.0,
            0.0, 1.0,
        ];
        assert_eq!(&v[..21], &expected);
        assert!(v[21].abs() < 1e-15 && (v[22] + 1.0).abs() < 1e-15);
        assert_eq!(&v[23..], &[-117.8, 33.6, 20.0]);
    }

    #[test]
    fn invalid_ranges() {
        assert!(encode_context(&ContextSnapshot { battery_level: 1.5, ..Default::default() }).is_err());
        assert!(encode_context(&ContextSnapshot { hour: 24.0, ..Default::default() }).is_err());
    }
}
