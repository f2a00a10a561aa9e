//! The two reference baselines.
//!
//! Baseline 1 keeps the sequence encoders and the shared scoring layer but
//! drops aggregation: each individual is trained against the group label and
//! the group score is the mean of the individual probabilities.
//!
//! Baseline 2 keeps aggregation but replaces activity sequences with weekly
//! frequency vectors (length 9, one slot per activity type, log1p-scaled
//! before the week GRU), so only the week-level attention remains; accounts
//! aggregate through the many-to-many GRU with attention.
//!
//! Both run through [`Model`] with the matching [`ModelVariant`], so Baseline
//! 1 shares the encoder code paths with the full model verbatim.

use crate::datamodel::{ActivityType, WeekSequence};
use crate::han::{Aggregator, ModelConfig, ModelVariant};

/// One week of one individual as per-type activity counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyWeek {
    pub week_index: i64,
    pub counts: Vec<u32>,
}

/// Frequency features for a bucketed week sequence. Counts are the full
/// per-week totals; unlike the sequence representation nothing is truncated.
pub fn baseline2_featurize(weeks: &[WeekSequence]) -> Vec<FrequencyWeek> {
    weeks
        .iter()
        .map(|w| FrequencyWeek {
            week_index: w.week_index,
            counts: w.counts.clone(),
        })
        .collect()
}

/// Model configuration for Baseline 1 (same encoders, no aggregation).
pub fn baseline1_config(base: &ModelConfig) -> ModelConfig {
    ModelConfig {
        variant: ModelVariant::Baseline1,
        ..base.clone()
    }
}

/// Model configuration for Baseline 2 (frequency inputs, m2m aggregation).
pub fn baseline2_config(base: &ModelConfig) -> ModelConfig {
    ModelConfig {
        variant: ModelVariant::Baseline2,
        aggregator: Aggregator::M2mGruAttn,
        use_time_deltas: false,
        ..base.clone()
    }
}

/// Number of activity types, which is the frequency-vector length.
pub const FREQUENCY_DIM: usize = ActivityType::COUNT;
