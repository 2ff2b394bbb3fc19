//! Line-delimited JSON event files.
//!
//! One event per line:
//!
//! ```text
//! {"event_id":"texting-00003","activity":"texting","frame_rate_hz":30,
//!  "t_eyes_s":0.8,"t_foot_s":1.2,"t_hands_s":2.4,
//!  "frames":[{"t":-20.0,"x":[... 41 values ...]}, ...]}
//! ```
//!
//! `x` holds the full frame in canonical F, G, H, S, O order. Numbers are
//! written in shortest round-trip decimal form, so saving and loading is
//! lossless. The same `{"t":..,"x":[..]}` object is the record type for
//! streaming frames.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::event::{ensure_unique_ids, Activity, ComponentTimes, TakeoverEvent};
use crate::error::{Error, Result};
use crate::features::FrameFeatures;

/// A timestamped full feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: f64,
    pub x: Vec<f64>,
}

impl FrameRecord {
    pub fn from_frame(frame: &FrameFeatures) -> Self {
        FrameRecord {
            t: frame.timestamp_s,
            x: frame.to_row().to_vec(),
        }
    }

    pub fn to_frame(&self) -> Result<FrameFeatures> {
        FrameFeatures::from_row(self.t, &self.x)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRecord {
    event_id: String,
    activity: String,
    frame_rate_hz: u32,
    t_eyes_s: f64,
    t_foot_s: f64,
    t_hands_s: f64,
    frames: Vec<FrameRecord>,
}

impl EventRecord {
    fn from_event(e: &TakeoverEvent) -> Self {
        EventRecord {
            event_id: e.event_id.clone(),
            activity: e.activity.label().to_string(),
            frame_rate_hz: e.frame_rate_hz,
            t_eyes_s: e.times.eyes,
            t_foot_s: e.times.foot,
            t_hands_s: e.times.hands,
            frames: e.frames.iter().map(FrameRecord::from_frame).collect(),
        }
    }

    fn into_event(self) -> Result<TakeoverEvent> {
        let activity: Activity = self.activity.parse()?;
        let frames = self
            .frames
            .iter()
            .map(FrameRecord::to_frame)
            .collect::<Result<Vec<_>>>()?;
        Ok(TakeoverEvent {
            event_id: self.event_id,
            activity,
            frame_rate_hz: self.frame_rate_hz,
            times: ComponentTimes::new(self.t_eyes_s, self.t_foot_s, self.t_hands_s),
            frames,
        })
    }
}

/// Serializes one event as a single JSON line (no trailing newline).
pub fn event_to_line(event: &TakeoverEvent) -> String {
    serde_json::to_string(&EventRecord::from_event(event)).expect("event records serialize")
}

/// Parses and validates one event line. Errors carry `line` as their location.
pub fn event_from_line(text: &str, line: usize) -> Result<TakeoverEvent> {
    let at_line = |e: Error| Error::Parse {
        line,
        message: e.to_string(),
    };
    let record: EventRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    let event = record.into_event().map_err(at_line)?;
    event.validate().map_err(at_line)?;
    Ok(event)
}

pub fn read_events(reader: impl BufRead) -> Result<Vec<TakeoverEvent>> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        events.push(event_from_line(&text, line_no)?);
    }
    ensure_unique_ids(&events)?;
    Ok(events)
}

pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<TakeoverEvent>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_events(BufReader::new(file))
}

pub fn write_events(events: &[TakeoverEvent], mut writer: impl Write) -> std::io::Result<()> {
    for e in events {
        writeln!(writer, "{}", event_to_line(e))?;
    }
    writer.flush()
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_events(events: &[TakeoverEvent], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure_unique_ids(events)?;
    write_atomic(path, |w| write_events(events, w))
}

/// Writes `path` through a sibling `.partial` file that is renamed into place.
pub fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let result = File::create(&tmp).and_then(|f| {
        let mut w = BufWriter::new(f);
        body(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()
    });
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
