//! Window construction: shingling long series into fixed-width training
//! chunks and aligning the event sequence to each window.
//!
//! Windows use a local grid where the past points sit at positions 1..=T and
//! the window start is position 0 (one step before the first past point).
//! Event inter-arrival features are measured on this grid, so one unit equals
//! one sampling interval.

use crate::data::{temporal_features, FeatureAnchor, RawEvents, RawSeries, Scaler};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// A fixed-width slice of the series: standardized past values, optionally
/// the standardized future target, and temporal features for all
/// `t_past + horizon` points.
#[derive(Clone, Debug)]
pub struct TimeSeriesWindow {
    /// 1-based origin: the first past point is series row `origin - 1`.
    pub origin: usize,
    pub t_past: usize,
    pub horizon: usize,
    pub dim: usize,
    /// Standardized row-major `t_past × dim` values.
    pub past: Vec<f64>,
    /// Standardized row-major `horizon × dim` values; training samples only.
    pub future: Option<Vec<f64>>,
    /// Features for the `t_past + horizon` grid points, in order.
    pub features: Vec<[f64; 4]>,
    /// Epoch of the first past point.
    pub start_epoch: i64,
    pub step_seconds: i64,
}

impl TimeSeriesWindow {
    pub fn past_row(&self, t: usize) -> &[f64] {
        &self.past[t * self.dim..(t + 1) * self.dim]
    }

    pub fn future_row(&self, j: usize) -> Option<&[f64]> {
        self.future
            .as_ref()
            .map(|f| &f[j * self.dim..(j + 1) * self.dim])
    }

    pub fn last_past_row(&self) -> &[f64] {
        self.past_row(self.t_past - 1)
    }

    /// Epoch of the window's past end (its last observed point).
    pub fn end_epoch(&self) -> i64 {
        self.start_epoch + (self.t_past as i64 - 1) * self.step_seconds
    }

    /// Epoch of the j-th forecast point (j = 0 is one step past the end).
    pub fn horizon_epoch(&self, j: usize) -> i64 {
        self.end_epoch() + (j as i64 + 1) * self.step_seconds
    }

    /// Local grid position of an epoch: past points at 1..=t_past, the
    /// window start at 0.
    pub fn local_position(&self, epoch: i64) -> f64 {
        (epoch - self.start_epoch) as f64 / self.step_seconds as f64 + 1.0
    }
}

/// Events aligned to one window: one-hot-able type ids, inter-event
/// durations on the window grid, per-event temporal features, and the end
/// marker carrying the duration from the last event to the window's past end.
#[derive(Clone, Debug)]
pub struct EventWindow {
    /// 1-based type ids of the in-window events, oldest first.
    pub type_ids: Vec<usize>,
    /// Inter-event durations; the first is measured from the window start.
    pub deltas: Vec<f64>,
    pub features: Vec<[f64; 4]>,
    /// Duration from the last event (or the window start when there are no
    /// events) to the window's past end.
    pub end_delta: f64,
    pub end_features: [f64; 4],
    /// Leading zero-padded slots recorded for batched layouts; padded slots
    /// never transit the event encoder.
    pub pad_length: usize,
    pub num_types: usize,
}

impl EventWindow {
    /// Number of real (non-padding) events M.
    pub fn len(&self) -> usize {
        self.type_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.type_ids.is_empty()
    }

    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_types];
        v[self.type_ids[i] - 1] = 1.0;
        v
    }

    /// An event-free window (series-only mode): just the end marker.
    pub fn empty(num_types: usize, window: &TimeSeriesWindow, anchor: &FeatureAnchor) -> Self {
        EventWindow {
            type_ids: Vec::new(),
            deltas: Vec::new(),
            features: Vec::new(),
            end_delta: window.t_past as f64,
            end_features: crate::data::feature_at(window.end_epoch(), anchor),
            pad_length: 0,
            num_types,
        }
    }
}

/// Window origins for a series of `t_total` points and total window width
/// `width`. Exhaustive policy covers [1, T−W+1] in order; random policies
/// draw from the same range with the supplied stream.
pub fn shingle_origins(
    t_total: usize,
    width: usize,
    policy: &ShinglePolicy,
    rng: Option<&mut StreamRng>,
) -> Result<Vec<usize>> {
    if width == 0 || width > t_total {
        return Err(Error::Data(format!(
            "window of width {width} does not fit a series of length {t_total}"
        )));
    }
    let max_origin = t_total - width + 1;
    match policy {
        ShinglePolicy::Exhaustive => Ok((1..=max_origin).collect()),
        ShinglePolicy::Random { count, replacement } => {
            let rng =
                rng.ok_or_else(|| Error::Data("random shingling requires a random stream".into()))?;
            if *replacement {
                Ok((0..*count).map(|_| 1 + rng.index(max_origin)).collect())
            } else {
                // Fisher-Yates prefix over the origin range.
                let mut pool: Vec<usize> = (1..=max_origin).collect();
                let take = (*count).min(max_origin);
                for i in 0..take {
                    let j = i + rng.index(max_origin - i);
                    pool.swap(i, j);
                }
                pool.truncate(take);
                Ok(pool)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum ShinglePolicy {
    Exhaustive,
    Random { count: usize, replacement: bool },
}

/// Build one standardized window at a 1-based origin. With `with_future`
/// the target segment must also lie inside the series; without it only the
/// past must, and horizon features are extended on the fixed grid.
pub fn window_at(
    series: &RawSeries,
    scaler: &Scaler,
    anchor: &FeatureAnchor,
    origin: usize,
    t_past: usize,
    horizon: usize,
    with_future: bool,
) -> Result<TimeSeriesWindow> {
    if origin == 0 {
        return Err(Error::Data("window origins are 1-based".into()));
    }
    let need = if with_future {
        t_past + horizon
    } else {
        t_past
    };
    if origin - 1 + need > series.len() {
        return Err(Error::Data(format!(
            "window at origin {origin} needs {need} points but only {} remain",
            series.len() - (origin - 1)
        )));
    }
    let d = series.dim();
    let first = origin - 1;
    let mut past = Vec::with_capacity(t_past * d);
    for t in 0..t_past {
        past.extend_from_slice(series.row(first + t));
    }
    scaler.apply_rows(&mut past);
    let future = if with_future {
        let mut f = Vec::with_capacity(horizon * d);
        for t in 0..horizon {
            f.extend_from_slice(series.row(first + t_past + t));
        }
        scaler.apply_rows(&mut f);
        Some(f)
    } else {
        None
    };
    let start_epoch = series.timestamp_at(first);
    let epochs: Vec<i64> = (0..t_past + horizon)
        .map(|i| start_epoch + i as i64 * series.step_seconds)
        .collect();
    Ok(TimeSeriesWindow {
        origin,
        t_past,
        horizon,
        dim: d,
        past,
        future,
        features: temporal_features(&epochs, anchor),
        start_epoch,
        step_seconds: series.step_seconds,
    })
}

/// Shingle a series into training windows (with future targets).
pub fn shingle(
    series: &RawSeries,
    scaler: &Scaler,
    anchor: &FeatureAnchor,
    t_past: usize,
    horizon: usize,
    policy: &ShinglePolicy,
    rng: Option<&mut StreamRng>,
) -> Result<Vec<TimeSeriesWindow>> {
    let origins = shingle_origins(series.len(), t_past + horizon, policy, rng)?;
    origins
        .into_iter()
        .map(|o| window_at(series, scaler, anchor, o, t_past, horizon, true))
        .collect()
}

/// Align events to a window's past range (half-open `(start, T]` on the local
/// grid) and attach the end marker. Inter-event durations come from global
/// timestamp differencing, so the first in-window event measures its Δt from
/// the previous event (or the series origin when there is none) — windows
/// sharing an event set therefore share the whole Δt sequence, and only the
/// end marker tells them apart. `pad_to` reserves leading zero-padded slots
/// for batched layouts; `None` fits exactly.
pub fn align_events(
    events: &RawEvents,
    window: &TimeSeriesWindow,
    anchor: &FeatureAnchor,
    pad_to: Option<usize>,
) -> Result<EventWindow> {
    let t_end = window.t_past as f64;
    let step = window.step_seconds as f64;
    let mut type_ids = Vec::new();
    let mut deltas = Vec::new();
    let mut features = Vec::new();
    // The event timeline starts one step before the first series point.
    // Durations difference the raw timestamps, so windows sharing an event
    // set see bit-identical Δt sequences regardless of their offsets.
    let mut prev_epoch = window.start_epoch - window.origin as i64 * window.step_seconds;
    let mut last_epoch = None;
    for &(epoch, type_id) in &events.records {
        let pos = window.local_position(epoch);
        if pos > t_end {
            continue;
        }
        if pos <= 0.0 {
            prev_epoch = epoch;
            continue;
        }
        type_ids.push(type_id);
        deltas.push((epoch - prev_epoch) as f64 / step);
        features.push(crate::data::feature_at(epoch, anchor));
        prev_epoch = epoch;
        last_epoch = Some(epoch);
    }
    let m = type_ids.len();
    let pad_length = match pad_to {
        None => 0,
        Some(p) if p < m => {
            return Err(Error::Data(format!(
                "pad_to {p} is smaller than the {m} in-window events"
            )));
        }
        Some(p) => p - m,
    };
    let end_delta = match last_epoch {
        Some(e) => (window.end_epoch() - e) as f64 / step,
        None => t_end,
    };
    Ok(EventWindow {
        type_ids,
        deltas,
        features,
        end_delta,
        end_features: crate::data::feature_at(window.end_epoch(), anchor),
        pad_length,
        num_types: events.num_types(),
    })
}
