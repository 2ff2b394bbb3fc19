//! Take-over events, training windows, splits and the synthetic generator.

mod event;
mod io;
mod samples;
mod split;
mod synth;

pub use event::{
    frame_time, Activity, ComponentTimes, TakeoverEvent, DEFAULT_FRAME_RATE_HZ, POST_TOR_S,
    PRE_TOR_S, WINDOW_S,
};
pub use io::{
    event_from_line, event_to_line, load_events, read_events, save_events, write_atomic,
    write_events, FrameRecord,
};
pub use samples::{
    augment_event, augmentation_count, build_training_set, make_raw_sample, shifted_targets,
    FeatureStore, IndexedSample, Provenance, ReadinessSet, SampleSet, TrainingSample,
};
pub use split::{split_events, subsample, EventSplit, SplitSpec};
pub use synth::{
    rated_readiness, synthesize_events, synthesize_ori_labels, window_readiness, ActivityProfile,
    OriLabel, Readiness, SynthConfig, SyntheticData, STUDY_COUNTS,
};
