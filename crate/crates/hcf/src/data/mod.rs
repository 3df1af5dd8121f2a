//! Data ingestion and preparation: delimited-text loading, event extraction
//! by fluctuation threshold, temporal features, standardization, window
//! shingling, event-to-window alignment, and synthetic coupled data.

mod features;
mod scaler;
mod series;
mod synth;
mod window;

pub use features::{feature_at, temporal_features, FeatureAnchor, TEMPORAL_FEATURES};
pub use scaler::Scaler;
pub use series::{
    extract_events, format_timestamp, load_events, load_series, parse_timestamp, write_events,
    write_series, RawEvents, RawSeries,
};
pub use synth::{synthesize, SynthConfig};
pub use window::{
    align_events, shingle, shingle_origins, window_at, EventWindow, ShinglePolicy, TimeSeriesWindow,
};
