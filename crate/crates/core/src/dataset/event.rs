use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{validate_frame, FrameFeatures};

/// Seconds of recording before the take-over request.
pub const PRE_TOR_S: f64 = 20.0;
/// Seconds of recording after the take-over request.
pub const POST_TOR_S: f64 = 10.0;
/// Length of the feature window fed to the models.
pub const WINDOW_S: f64 = 2.0;
pub const DEFAULT_FRAME_RATE_HZ: u32 = 30;

/// Timestamp tolerance when checking uniform frame sampling.
const TIMESTAMP_TOLERANCE: f64 = 1e-6;

/// Secondary activity performed before the take-over request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    NoActivity,
    TalkingToPassenger,
    EyesClosed,
    Texting,
    PhoneCall,
    Infotainment,
    CountingCoins,
    Reading,
}

impl Activity {
    pub const ALL: [Activity; 8] = [
        Activity::NoActivity,
        Activity::TalkingToPassenger,
        Activity::EyesClosed,
        Activity::Texting,
        Activity::PhoneCall,
        Activity::Infotainment,
        Activity::CountingCoins,
        Activity::Reading,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Activity::NoActivity => "no_activity",
            Activity::TalkingToPassenger => "talking_to_passenger",
            Activity::EyesClosed => "eyes_closed",
            Activity::Texting => "texting",
            Activity::PhoneCall => "phone_call",
            Activity::Infotainment => "infotainment",
            Activity::CountingCoins => "counting_coins",
            Activity::Reading => "reading",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    fn valid_labels() -> String {
        Activity::ALL.map(|a| a.label()).join(", ")
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activity::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::UnknownActivity {
                label: s.to_string(),
                valid: Activity::valid_labels(),
            })
    }
}

/// Eyes-on-road, foot-on-pedal and hands-on-wheel times, seconds after the TOR.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComponentTimes {
    pub eyes: f64,
    pub foot: f64,
    pub hands: f64,
}

impl ComponentTimes {
    pub fn new(eyes: f64, foot: f64, hands: f64) -> Self {
        ComponentTimes { eyes, foot, hands }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ComponentTimes::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.eyes, self.foot, self.hands]
    }

    /// Take-over time: the last of the three components to complete.
    pub fn takeover(&self) -> f64 {
        self.eyes.max(self.foot).max(self.hands)
    }

    /// Summed absolute error against `other`.
    pub fn l1(&self, other: &ComponentTimes) -> f64 {
        (self.eyes - other.eyes).abs()
            + (self.foot - other.foot).abs()
            + (self.hands - other.hands).abs()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|t| t.is_finite())
    }
}

/// One annotated take-over episode: 20 s before and 10 s after the request.
#[derive(Debug, Clone, PartialEq)]
pub struct TakeoverEvent {
    pub event_id: String,
    pub activity: Activity,
    pub frame_rate_hz: u32,
    pub times: ComponentTimes,
    pub frames: Vec<FrameFeatures>,
}

pub(crate) fn frames_for(seconds: f64, fps: u32) -> usize {
    (seconds * fps as f64).round() as usize
}

impl TakeoverEvent {
    /// Index of the first frame at or after the take-over request.
    pub fn tor_index(&self) -> usize {
        frames_for(PRE_TOR_S, self.frame_rate_hz)
    }

    pub fn window_frames(&self) -> usize {
        frames_for(WINDOW_S, self.frame_rate_hz)
    }

    pub fn expected_frames(&self) -> usize {
        frames_for(PRE_TOR_S + POST_TOR_S, self.frame_rate_hz)
    }

    /// Timestamp that frame `index` must carry.
    pub fn frame_time(&self, index: usize) -> f64 {
        frame_time(index, self.frame_rate_hz)
    }

    /// Cheap structural checks: frame count, sampling grid, annotated times.
    pub fn check_layout(&self) -> Result<()> {
        let id = self.event_id.as_str();
        if self.frame_rate_hz == 0 {
            return Err(Error::event(id, "frame rate must be positive"));
        }
        if self.frames.len() != self.expected_frames() {
            return Err(Error::event(
                id,
                format!(
                    "has {} frames, expected {} ({} s at {} Hz)",
                    self.frames.len(),
                    self.expected_frames(),
                    PRE_TOR_S + POST_TOR_S,
                    self.frame_rate_hz
                ),
            ));
        }
        for (name, t) in [
            ("eyes", self.times.eyes),
            ("foot", self.times.foot),
            ("hands", self.times.hands),
        ] {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::event(id, format!("{name} time {t} must be >= 0")));
            }
            if t > POST_TOR_S {
                return Err(Error::event(
                    id,
                    format!("{name} time {t} s exceeds the recorded {POST_TOR_S} s after the TOR"),
                ));
            }
        }
        Ok(())
    }

    /// Full validation, including every frame's group invariants.
    pub fn validate(&self) -> Result<()> {
        self.check_layout()?;
        for (i, frame) in self.frames.iter().enumerate() {
            let expected = self.frame_time(i);
            if (frame.timestamp_s - expected).abs() > TIMESTAMP_TOLERANCE {
                return Err(Error::event(
                    &self.event_id,
                    format!(
                        "frame {i} has timestamp {} s, expected {expected} s",
                        frame.timestamp_s
                    ),
                ));
            }
            if let Err(violations) = validate_frame(frame) {
                let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
                return Err(Error::event(
                    &self.event_id,
                    format!("frame {i}: {}", msgs.join("; ")),
                ));
            }
        }
        Ok(())
    }
}

pub fn frame_time(index: usize, fps: u32) -> f64 {
    -PRE_TOR_S + index as f64 / fps as f64
}

pub(crate) fn ensure_unique_ids<'a>(
    events: impl IntoIterator<Item = &'a TakeoverEvent>,
) -> Result<()> {
    let mut seen = HashSet::new();
    for e in events {
        if !seen.insert(e.event_id.as_str()) {
            return Err(Error::DuplicateEvent(e.event_id.clone()));
        }
    }
    Ok(())
}
