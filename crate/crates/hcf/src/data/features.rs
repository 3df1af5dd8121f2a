//! Temporal features shared by every sequence: absolute time (scaled to the
//! training range), hour-of-day, day-of-week, and month-of-year, each encoded
//! as a scaled real so the feature vector has a fixed width of four.

use chrono::{DateTime, Datelike, Timelike};

use crate::error::{Error, Result};

/// Width of the temporal feature vector.
pub const TEMPORAL_FEATURES: usize = 4;

/// Scaling anchor for the absolute-time feature, fitted on the training
/// range so the first training instant maps to 0 and the last to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureAnchor {
    pub start_epoch: i64,
    pub span_seconds: i64,
}

impl FeatureAnchor {
    pub fn fit(start_epoch: i64, end_epoch: i64) -> Result<Self> {
        if end_epoch < start_epoch {
            return Err(Error::Data("feature anchor range is reversed".into()));
        }
        Ok(FeatureAnchor {
            start_epoch,
            span_seconds: (end_epoch - start_epoch).max(1),
        })
    }
}

/// Features at one instant: [absolute, hour/23, dow/6, (month−1)/11].
/// Hour and day-of-week carry sub-unit fractions so event instants between
/// grid points remain distinguishable; Monday is day 0.
pub fn feature_at(epoch: i64, anchor: &FeatureAnchor) -> [f64; 4] {
    let dt = DateTime::from_timestamp(epoch, 0)
        .expect("epoch in representable range")
        .naive_utc();
    let secs_of_day = dt.hour() as f64 * 3600.0 + dt.minute() as f64 * 60.0 + dt.second() as f64;
    let hour = secs_of_day / 3600.0;
    let dow = dt.weekday().num_days_from_monday() as f64 + secs_of_day / 86400.0;
    let month = dt.month() as f64;
    let abs = (epoch - anchor.start_epoch) as f64 / anchor.span_seconds as f64;
    [abs, hour / 23.0, dow / 6.0, (month - 1.0) / 11.0]
}

pub fn temporal_features(epochs: &[i64], anchor: &FeatureAnchor) -> Vec<[f64; 4]> {
    epochs.iter().map(|&e| feature_at(e, anchor)).collect()
}
