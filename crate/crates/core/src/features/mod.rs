//! Feature vectors for stress classification: twelve HRV statistics from the
//! NN series followed by a fixed-order numeric encoding of phone context.

mod breathing;
mod context;
mod hrv;

pub use breathing::{estimate_breathing_rate, BreathingEstimate, BREATHING_BAND, BREATHING_FALLBACK};
pub use context::{
    encode_context, CallType, ContextSnapshot, MessageType, NotificationSource, CONTEXT_FEATURE_NAMES,
};
pub use hrv::{extract_hrv_features, HrvFeatures, HRV_FEATURE_NAMES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;

/// Which columns a classifier consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    PpgOnly,
    PpgContext,
}

impl FeatureSet {
    pub fn names(self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = HRV_FEATURE_NAMES.to_vec();
        if self == FeatureSet::PpgContext {
            names.extend_from_slice(&CONTEXT_FEATURE_NAMES);
        }
        names
    }

    pub fn arity(self) -> usize {
        match self {
            FeatureSet::PpgOnly => HRV_FEATURE_NAMES.len(),
            FeatureSet::PpgContext => HRV_FEATURE_NAMES.len() + CONTEXT_FEATURE_NAMES.len(),
        }
    }

    pub fn signature(self) -> FeatureSignature {
        FeatureSignature {
            names: self.names().into_iter().map(String::from).collect(),
        }
    }
}

/// Ordered column names a model was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSignature {
    pub names: Vec<String>,
}

impl FeatureSignature {
    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn check(&self, other: &FeatureSignature) -> Result<()> {
        if self != other {
            return Err(Error::Compatibility(format!(
                "model expects {} features [{}...], data provides {} [{}...]",
                self.arity(),
                self.names.iter().take(3).cloned().collect::<Vec<_>>().join(", "),
                other.arity(),
                other.names.iter().take(3).cloned().collect::<Vec<_>>().join(", "),
            )));
        }
        Ok(())
    }
}

/// Identity and optional self-report carried alongside the numeric features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub subject_id: String,
    pub timestamp: Timestamp,
    pub label: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub subject_id: String,
    pub timestamp: Timestamp,
    pub hrv: HrvFeatures,
    /// Encoded context, in `CONTEXT_FEATURE_NAMES` order.
    pub context: Vec<f64>,
    /// Stress self-report on the 1..=5 scale.
    pub label: Option<u8>,
}

impl FeatureVector {
    /// Numeric columns for `set`, HRV first.
    pub fn values(&self, set: FeatureSet) -> Vec<f64> {
        let mut v = self.hrv.to_array().to_vec();
        if set == FeatureSet::PpgContext {
            v.extend_from_slice(&self.context);
        }
        v
    }
}

pub fn assemble_feature_vector(hrv: HrvFeatures, context: Vec<f64>, meta: FeatureMeta) -> Result<FeatureVector> {
    if context.len() != CONTEXT_FEATURE_NAMES.len() {
        return Err(Error::Parameter(format!(
            "context encoding has arity {}, expected {}",
            context.len(),
            CONTEXT_FEATURE_NAMES.len()
        )));
    }
    if let Some(l) = meta.label {
        if !(1..=5).contains(&l) {
            return Err(Error::Parameter(format!("stress label {l} outside 1..=5")));
        }
    }
    Ok(FeatureVector {
        subject_id: meta.subject_id,
        timestamp: meta.timestamp,
        hrv,
        context,
        label: meta.label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(label: Option<u8>) -> FeatureMeta {
        FeatureMeta {
            subject_id: "s01".into(),
            timestamp: Timestamp(3600),
            label,
        }
    }

    fn hrv() -> HrvFeatures {
        let nn = crate::dsp::NnSeries::from_intervals(vec![1000.0, 900.0, 1000.0, 900.0, 1000.0]).unwrap();
        extract_hrv_features(&nn).unwrap()
    }

    #[test]
    fn concatenates_in_documented_order() {
        let ctx = encode_context(&ContextSnapshot::default()).unwrap();
        let fv = assemble_feature_vector(hrv(), ctx.clone(), meta(None)).unwrap();
        let all = fv.values(FeatureSet::PpgContext);
        assert_eq!(all.len(), 12 + CONTEXT_FEATURE_NAMES.len());
        assert_eq!(&all[12..], &ctx[..]);
        assert_eq!(fv.values(FeatureSet::PpgOnly).len(), 12);
        assert_eq!(fv.label, None);
        assert_eq!(FeatureSet::PpgContext.names().len(), FeatureSet::PpgContext.arity());
    }

    #[test]
    fn label_is_preserved() {
        let ctx = encode_context(&ContextSnapshot::default()).unwrap();
        let fv = assemble_feature_vector(hrv(), ctx.clone(), meta(Some(4))).unwrap();
        assert_eq!(fv.label, Some(4));
        assert!(assemble_feature_vector(hrv(), ctx, meta(Some(6))).is_err());
    }

    #[test]
    fn signature_mismatch_is_incompatible() {
        let a = FeatureSet::PpgOnly.signature();
        let b = FeatureSet::PpgContext.signature();
        assert!(a.check(&a).is_ok());
        assert!(matches!(a.check(&b), Err(Error::Compatibility(_))));
    }
}
