//! Training windows and the TOR-offset augmentation.
//!
//! A raw sample pairs the 2 s of features ending at the take-over request with
//! the annotated component times. An augmented sample pretends the request was
//! issued `k` frames later: its window ends `k` frames after the real request
//! and each component time shrinks by the offset, bottoming out at zero once
//! that behavior has already completed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::event::{ensure_unique_ids, Activity, ComponentTimes, TakeoverEvent};
use super::synth::OriLabel;
use crate::error::{Error, Result};
use crate::features::{feature_dim, flatten_into, FeatureMask};

/// Slack when converting the largest component time into whole frames, so
/// frame-aligned times such as 0.7 s do not lose their last offset to rounding.
const FRAME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Raw,
    Augmented { offset_frames: u32, offset_s: f64 },
}

/// A window of one event plus its target times.
///
/// The window covers frames `window_end - window_frames .. window_end` of the
/// owning event; `window_end` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample {
    pub window_end: usize,
    pub targets: ComponentTimes,
    pub provenance: Provenance,
}

/// Number of augmented samples an event yields at `fps`.
pub fn augmentation_count(times: &ComponentTimes, fps: u32) -> usize {
    let t_max = times.takeover();
    if t_max <= 0.0 {
        0
    } else {
        (t_max * fps as f64 + FRAME_SLACK).floor() as usize
    }
}

/// Target times once the request is shifted `offset_s` later.
pub fn shifted_targets(times: &ComponentTimes, offset_s: f64) -> ComponentTimes {
    let shift = |t: f64| if offset_s >= t { 0.0 } else { t - offset_s };
    ComponentTimes::new(shift(times.eyes), shift(times.foot), shift(times.hands))
}

pub fn make_raw_sample(event: &TakeoverEvent) -> Result<TrainingSample> {
    event.check_layout()?;
    Ok(TrainingSample {
        window_end: event.tor_index(),
        targets: event.times,
        provenance: Provenance::Raw,
    })
}

/// One sample per frame-aligned offset in `(0, t_max]`; the raw sample is not included.
pub fn augment_event(event: &TakeoverEvent) -> Result<Vec<TrainingSample>> {
    event.check_layout()?;
    let fps = event.frame_rate_hz;
    let count = augmentation_count(&event.times, fps);
    let tor = event.tor_index();
    if tor + count > event.frames.len() {
        return Err(Error::event(
            &event.event_id,
            format!(
                "augmented windows would need {} frames past the TOR, only {} recorded",
                count,
                event.frames.len() - tor
            ),
        ));
    }
    Ok((1..=count)
        .map(|k| {
            let offset_s = k as f64 / fps as f64;
            TrainingSample {
                window_end: tor + k,
                targets: shifted_targets(&event.times, offset_s),
                provenance: Provenance::Augmented {
                    offset_frames: k as u32,
                    offset_s,
                },
            }
        })
        .collect())
}

/// Flattened frame matrices for a group of events, shared by every sample
/// drawn from them.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    mask: FeatureMask,
    dim: usize,
    window_frames: usize,
    matrices: Vec<Vec<f64>>,
    event_ids: Vec<String>,
    activities: Vec<Activity>,
}

impl FeatureStore {
    pub fn new<'a>(
        events: impl IntoIterator<Item = &'a TakeoverEvent>,
        mask: FeatureMask,
    ) -> Result<Self> {
        let dim = feature_dim(mask)?;
        let mut store = FeatureStore {
            mask,
            dim,
            window_frames: 0,
            matrices: Vec::new(),
            event_ids: Vec::new(),
            activities: Vec::new(),
        };
        for event in events {
            event.check_layout()?;
            let w = event.window_frames();
            if store.window_frames == 0 {
                store.window_frames = w;
            } else if store.window_frames != w {
                return Err(Error::event(
                    &event.event_id,
                    "frame rate differs from the other events in the set",
                ));
            }
            let mut m = Vec::with_capacity(event.frames.len() * dim);
            for frame in &event.frames {
                flatten_into(frame, mask, &mut m);
            }
            store.matrices.push(m);
            store.event_ids.push(event.event_id.clone());
            store.activities.push(event.activity);
        }
        Ok(store)
    }

    pub fn mask(&self) -> FeatureMask {
        self.mask
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window_frames(&self) -> usize {
        self.window_frames
    }

    pub fn num_events(&self) -> usize {
        self.matrices.len()
    }

    pub fn event_id(&self, event: usize) -> &str {
        &self.event_ids[event]
    }

    pub fn activity(&self, event: usize) -> Activity {
        self.activities[event]
    }

    /// Row-major `window_frames x dim` slice ending (exclusively) at `window_end`.
    pub fn window(&self, event: usize, window_end: usize) -> &[f64] {
        let start = (window_end - self.window_frames) * self.dim;
        &self.matrices[event][start..window_end * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexedSample {
    pub event: usize,
    pub sample: TrainingSample,
}

/// Samples plus the feature matrices their windows point into.
#[derive(Debug, Clone)]
pub struct SampleSet {
    store: FeatureStore,
    samples: Vec<IndexedSample>,
}

impl SampleSet {
    pub fn from_parts(store: FeatureStore, samples: Vec<IndexedSample>) -> Self {
        SampleSet { store, samples }
    }

    /// Raw windows only, one per event; used for validation and test splits.
    pub fn raw<'a>(
        events: impl IntoIterator<Item = &'a TakeoverEvent> + Clone,
        mask: FeatureMask,
    ) -> Result<Self> {
        build_training_set(events, mask, false)
    }

    pub fn store(&self) -> &FeatureStore {
        &self.store
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.store.dim
    }

    pub fn samples(&self) -> &[IndexedSample] {
        &self.samples
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let s = &self.samples[i];
        self.store.window(s.event, s.sample.window_end)
    }

    pub fn targets(&self, i: usize) -> ComponentTimes {
        self.samples[i].sample.targets
    }

    pub fn raw_count(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.sample.provenance == Provenance::Raw)
            .count()
    }

    pub fn augmented_count(&self) -> usize {
        self.len() - self.raw_count()
    }
}

/// Windows labelled with a readiness index, for pretraining.
#[derive(Debug, Clone)]
pub struct ReadinessSet {
    store: Arc<FeatureStore>,
    items: Vec<OriLabel>,
}

impl ReadinessSet {
    /// `labels` index into `events`.
    pub fn new(events: &[TakeoverEvent], labels: Vec<OriLabel>, mask: FeatureMask) -> Result<Self> {
        let store = Arc::new(FeatureStore::new(events, mask)?);
        for l in &labels {
            if l.event >= store.num_events()
                || l.window_end < store.window_frames
                || l.window_end > events[l.event].frames.len()
            {
                return Err(Error::Shape(format!(
                    "readiness label for event {} ending at frame {} is outside the data",
                    l.event, l.window_end
                )));
            }
            if !(0.0..=1.0).contains(&l.label) {
                return Err(Error::Config(format!(
                    "readiness label {} outside [0, 1]",
                    l.label
                )));
            }
        }
        Ok(ReadinessSet {
            store,
            items: labels,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.store.dim
    }

    pub fn labels(&self) -> &[OriLabel] {
        &self.items
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let l = &self.items[i];
        self.store.window(l.event, l.window_end)
    }

    pub fn label(&self, i: usize) -> f64 {
        self.items[i].label
    }

    /// The labels whose index satisfies `keep`, sharing the feature store.
    pub fn filter(&self, keep: impl Fn(&OriLabel) -> bool) -> ReadinessSet {
        ReadinessSet {
            store: Arc::clone(&self.store),
            items: self.items.iter().filter(|l| keep(l)).copied().collect(),
        }
    }
}

/// Builds the training samples for a (training) split.
///
/// With `augment` the set holds every raw sample followed by that event's
/// augmented samples, `1 + floor(t_max * fps)` per event.
pub fn build_training_set<'a>(
    events: impl IntoIterator<Item = &'a TakeoverEvent> + Clone,
    mask: FeatureMask,
    augment: bool,
) -> Result<SampleSet> {
    ensure_unique_ids(events.clone())?;
    let store = FeatureStore::new(events.clone(), mask)?;
    let mut samples = Vec::new();
    for (i, event) in events.into_iter().enumerate() {
        samples.push(IndexedSample {
            event: i,
            sample: make_raw_sample(event)?,
        });
        if augment {
            samples.extend(
                augment_event(event)?
                    .into_iter()
                    .map(|sample| IndexedSample { event: i, sample }),
            );
        }
    }
    Ok(SampleSet { store, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::event::testing::uniform_event;

    fn event(id: &str, t: [f64; 3]) -> TakeoverEvent {
        uniform_event(id, Activity::Texting, ComponentTimes::from_array(t))
    }

    #[test]
    fn augmented_count_and_clamping() {
        let e = event("a", [0.5, 1.0, 2.0]);
        let aug = augment_event(&e).unwrap();
        assert_eq!(aug.len(), 60);
        let at_one = aug
            .iter()
            .find(|s| {
                matches!(
                    s.provenance,
                    Provenance::Augmented {
                        offset_frames: 30,
                        ..
                    }
                )
            })
            .unwrap();
        assert_eq!(at_one.targets, ComponentTimes::new(0.0, 0.0, 1.0));
        assert_eq!(aug.last().unwrap().targets, ComponentTimes::default());
        assert!(aug.iter().all(|s| s.provenance != Provenance::Raw));
    }

    #[test]
    fn degenerate_event_has_no_augmentation() {
        assert!(augment_event(&event("z", [0.0, 0.0, 0.0]))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn frame_aligned_times_keep_last_offset() {
        assert_eq!(
            augmentation_count(&ComponentTimes::new(0.7, 0.1, 0.2), 30),
            21
        );
    }

    #[test]
    fn raw_sample_window() {
        let e = event("r", [0.3, 0.5, 1.2]);
        let s = make_raw_sample(&e).unwrap();
        assert_eq!(s.targets, ComponentTimes::new(0.3, 0.5, 1.2));
        let set = build_training_set([&e], FeatureMask::ALL, false).unwrap();
        assert_eq!(set.window(0).len(), 60 * 41);
        let first = e.frames[s.window_end - 60].timestamp_s;
        let last = e.frames[s.window_end - 1].timestamp_s;
        assert!((first + 2.0).abs() < 1e-9);
        assert!((-2.0..0.0).contains(&last));
    }

    #[test]
    fn window_matches_flattened_frames() {
        let mut e = event("w", [0.2, 0.4, 0.6]);
        for (i, f) in e.frames.iter_mut().enumerate() {
            f.stereo.dist_left_m = i as f64;
        }
        let mask: FeatureMask = "S".parse().unwrap();
        let set = build_training_set([&e], mask, true).unwrap();
        for i in 0..set.len() {
            let end = set.samples()[i].sample.window_end;
            let w = set.window(i);
            assert_eq!(w.len(), 120);
            assert_eq!(w[118], (end - 1) as f64);
            assert_eq!(w[0], (end - 60) as f64);
        }
    }

    #[test]
    fn training_set_counts() {
        let events: Vec<_> = (0..3)
            .map(|i| event(&format!("e{i}"), [0.2, 1.0, 0.6]))
            .collect();
        let aug = build_training_set(&events, FeatureMask::ALL, true).unwrap();
        assert_eq!(aug.len(), 93);
        assert_eq!(aug.raw_count(), 3);
        let raw = build_training_set(&events, FeatureMask::ALL, false).unwrap();
        assert_eq!(raw.len(), 3);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let events = vec![event("d", [0.1, 0.1, 0.1]), event("d", [0.2, 0.2, 0.2])];
        assert!(matches!(
            build_training_set(&events, FeatureMask::ALL, true),
            Err(Error::DuplicateEvent(_))
        ));
    }
}
