use serde::{Deserialize, Serialize};

use crate::dsp::{condition_window, ConditioningConfig};
use crate::error::{Error, Result};
use crate::features::{assemble_feature_vector, encode_context, extract_hrv_features, FeatureMeta, FeatureVector};
use crate::sim::{Burst, Cohort, SubjectStream};

/// A subject's bursts with the features extracted from each. Bursts whose
/// PPG yields too few plausible beats have no features and are skipped by
/// every policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectData {
    pub stream: SubjectStream,
    pub features: Vec<Option<FeatureVector>>,
}

impl SubjectData {
    pub fn subject_id(&self) -> &str {
        &self.stream.profile.subject_id
    }

    /// Bursts with features, in time order.
    pub fn valid(&self) -> impl Iterator<Item = (&Burst, &FeatureVector)> {
        self.stream
            .bursts
            .iter()
            .zip(&self.features)
            .filter_map(|(b, f)| f.as_ref().map(|f| (b, f)))
    }

    pub fn valid_count(&self) -> usize {
        self.features.iter().filter(|f| f.is_some()).count()
    }
}

pub fn featurize_burst(stream: &SubjectStream, burst: &Burst, conditioning: &ConditioningConfig) -> Result<FeatureVector> {
    let window = burst.window(&stream.profile)?;
    let nn = condition_window(&window, conditioning)?;
    let hrv = extract_hrv_features(&nn)?;
    let context = encode_context(&burst.context)?;
    assemble_feature_vector(
        hrv,
        context,
        FeatureMeta {
            subject_id: stream.profile.subject_id.clone(),
            timestamp: burst.time,
            label: None,
        },
    )
}

pub fn featurize_subject(stream: &SubjectStream, conditioning: &ConditioningConfig) -> Result<SubjectData> {
    let mut features = Vec::with_capacity(stream.bursts.len());
    for b in &stream.bursts {
        match featurize_burst(stream, b, conditioning) {
            Ok(f) => features.push(Some(f)),
            Err(Error::InsufficientBeats { .. }) => features.push(None),
            Err(e) => return Err(e),
        }
    }
    let dropped = features.iter().filter(|f| f.is_none()).count();
    if dropped > 0 {
        log::debug!("{}: {dropped} of {} bursts without usable beats", stream.profile.subject_id, features.len());
    }
    Ok(SubjectData {
        stream: stream.clone(),
        features,
    })
}

pub fn featurize_cohort(cohort: &Cohort, conditioning: &ConditioningConfig) -> Result<Vec<SubjectData>> {
    cohort.subjects.iter().map(|s| featurize_subject(s, conditioning)).collect()
}
