//! Frame-wise driver-state features and the group masks used by ablations.
//!
//! A frame carries five feature groups. Flattened vectors always list the
//! enabled groups in the canonical order foot (F), gaze (G), hand activity (H),
//! stereo hand distance (S), hand-held object (O); masking only removes groups,
//! it never reorders the survivors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FOOT_DIM: usize = 5;
pub const GAZE_DIM: usize = 8;
pub const HAND_DIM: usize = 12;
pub const STEREO_DIM: usize = 2;
pub const OBJECT_DIM: usize = 14;
/// Length of a fully flattened frame.
pub const FULL_DIM: usize = FOOT_DIM + GAZE_DIM + HAND_DIM + STEREO_DIM + OBJECT_DIM;

/// Tolerance on probability groups summing to one.
pub const PROB_TOLERANCE: f64 = 1e-6;

pub const GAZE_ZONES: [&str; 8] = [
    "forward",
    "left_mirror",
    "lap",
    "speedometer",
    "infotainment",
    "rearview_mirror",
    "right_mirror",
    "over_the_shoulder",
];

pub const HAND_ACTIVITIES: [&str; 6] = [
    "on_lap",
    "in_air",
    "hovering_over_wheel",
    "on_wheel",
    "cupholder",
    "infotainment",
];

pub const HAND_OBJECTS: [&str; 7] = [
    "no_object",
    "phone",
    "tablet",
    "food",
    "beverage",
    "book",
    "other",
];

pub const FOOT_ACTIVITIES: [&str; 5] = [
    "away_from_pedal",
    "on_brake",
    "on_gas",
    "hovering_over_brake",
    "hovering_over_gas",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeFeatures {
    pub zone_probs: [f64; GAZE_DIM],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandFeatures {
    pub activity_probs_left: [f64; 6],
    pub activity_probs_right: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandObjectFeatures {
    pub object_probs_left: [f64; 7],
    pub object_probs_right: [f64; 7],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoHandFeatures {
    pub dist_left_m: f64,
    pub dist_right_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootFeatures {
    pub activity_probs: [f64; FOOT_DIM],
}

/// All features extracted for one video frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub gaze: GazeFeatures,
    pub hands: HandFeatures,
    pub objects: HandObjectFeatures,
    pub stereo: StereoHandFeatures,
    pub foot: FootFeatures,
    /// Seconds relative to the take-over request; negative before it.
    pub timestamp_s: f64,
}

fn uniform<const N: usize>() -> [f64; N] {
    [1.0 / N as f64; N]
}

impl FrameFeatures {
    /// A frame with uniform probabilities in every group.
    pub fn uniform(timestamp_s: f64, dist_left_m: f64, dist_right_m: f64) -> Self {
        FrameFeatures {
            gaze: GazeFeatures {
                zone_probs: uniform(),
            },
            hands: HandFeatures {
                activity_probs_left: uniform(),
                activity_probs_right: uniform(),
            },
            objects: HandObjectFeatures {
                object_probs_left: uniform(),
                object_probs_right: uniform(),
            },
            stereo: StereoHandFeatures {
                dist_left_m,
                dist_right_m,
            },
            foot: FootFeatures {
                activity_probs: uniform(),
            },
            timestamp_s,
        }
    }

    /// Full 41-value row in canonical order.
    pub fn to_row(&self) -> [f64; FULL_DIM] {
        let mut row = [0.0; FULL_DIM];
        let mut out = Vec::with_capacity(FULL_DIM);
        flatten_into(self, FeatureMask::ALL, &mut out);
        row.copy_from_slice(&out);
        row
    }

    /// Inverse of [`FrameFeatures::to_row`].
    pub fn from_row(timestamp_s: f64, row: &[f64]) -> Result<Self> {
        if row.len() != FULL_DIM {
            return Err(Error::Shape(format!(
                "frame row has {} values, expected {FULL_DIM}",
                row.len()
            )));
        }
        let take = |start: usize, len: usize| &row[start..start + len];
        let mut frame = FrameFeatures::uniform(timestamp_s, 0.0, 0.0);
        frame.foot.activity_probs.copy_from_slice(take(0, 5));
        frame.gaze.zone_probs.copy_from_slice(take(5, 8));
        frame.hands.activity_probs_left.copy_from_slice(take(13, 6));
        frame
            .hands
            .activity_probs_right
            .copy_from_slice(take(19, 6));
        frame.stereo.dist_left_m = row[25];
        frame.stereo.dist_right_m = row[26];
        frame.objects.object_probs_left.copy_from_slice(take(27, 7));
        frame
            .objects
            .object_probs_right
            .copy_from_slice(take(34, 7));
        Ok(frame)
    }
}

/// Which feature groups feed a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureMask {
    pub use_foot: bool,
    pub use_gaze: bool,
    pub use_hand: bool,
    pub use_stereo: bool,
    pub use_object: bool,
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask::ALL
    }
}

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask {
        use_foot: true,
        use_gaze: true,
        use_hand: true,
        use_stereo: true,
        use_object: true,
    };

    pub const NONE: FeatureMask = FeatureMask {
        use_foot: false,
        use_gaze: false,
        use_hand: false,
        use_stereo: false,
        use_object: false,
    };

    fn flags(&self) -> [bool; 5] {
        [
            self.use_foot,
            self.use_gaze,
            self.use_hand,
            self.use_stereo,
            self.use_object,
        ]
    }

    pub fn is_empty(&self) -> bool {
        !self.flags().iter().any(|&f| f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyMask)
        } else {
            Ok(())
        }
    }

    /// The five single-group masks in canonical order.
    pub fn singles() -> [FeatureMask; 5] {
        ["F", "G", "H", "S", "O"].map(|s| s.parse().expect("static mask"))
    }

    /// The eleven feature combinations of the feature ablation table.
    pub fn ablation_defaults() -> Vec<FeatureMask> {
        [
            "F",
            "G",
            "H",
            "H+S",
            "H+O",
            "H+S+O",
            "G+H+O",
            "G+H+S+O",
            "F+G+H+S",
            "F+G+H+O",
            "F+G+H+S+O",
        ]
        .iter()
        .map(|s| s.parse().expect("static mask"))
        .collect()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = ["F", "G", "H", "S", "O"];
        let parts: Vec<&str> = self
            .flags()
            .iter()
            .zip(names)
            .filter_map(|(&on, n)| on.then_some(n))
            .collect();
        if parts.is_empty() {
            write!(f, "-")
        } else {
            write!(f, "{}", parts.join("+"))
        }
    }
}

impl FromStr for FeatureMask {
    type Err = Error;

    /// Parses masks such as `F+G+H`, `h,s` or `all`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(FeatureMask::ALL);
        }
        let mut mask = FeatureMask::NONE;
        for part in s.split(['+', ',']).map(str::trim) {
            match part.to_ascii_uppercase().as_str() {
                "F" => mask.use_foot = true,
                "G" => mask.use_gaze = true,
                "H" => mask.use_hand = true,
                "S" => mask.use_stereo = true,
                "O" => mask.use_object = true,
                _ => return Err(Error::MaskSyntax(s.to_string())),
            }
        }
        mask.validate()?;
        Ok(mask)
    }
}

/// Number of values a frame flattens to under `mask`.
pub fn feature_dim(mask: FeatureMask) -> Result<usize> {
    mask.validate()?;
    let sizes = [FOOT_DIM, GAZE_DIM, HAND_DIM, STEREO_DIM, OBJECT_DIM];
    Ok(mask
        .flags()
        .iter()
        .zip(sizes)
        .filter_map(|(&on, n)| on.then_some(n))
        .sum())
}

/// Appends the enabled groups of `frame` to `out` in canonical order.
pub fn flatten_into(frame: &FrameFeatures, mask: FeatureMask, out: &mut Vec<f64>) {
    if mask.use_foot {
        out.extend_from_slice(&frame.foot.activity_probs);
    }
    if mask.use_gaze {
        out.extend_from_slice(&frame.gaze.zone_probs);
    }
    if mask.use_hand {
        out.extend_from_slice(&frame.hands.activity_probs_left);
        out.extend_from_slice(&frame.hands.activity_probs_right);
    }
    if mask.use_stereo {
        out.push(frame.stereo.dist_left_m);
        out.push(frame.stereo.dist_right_m);
    }
    if mask.use_object {
        out.extend_from_slice(&frame.objects.object_probs_left);
        out.extend_from_slice(&frame.objects.object_probs_right);
    }
}

pub fn flatten(frame: &FrameFeatures, mask: FeatureMask) -> Vec<f64> {
    let mut out = Vec::with_capacity(FULL_DIM);
    flatten_into(frame, mask, &mut out);
    out
}

/// Feature group named in a [`Violation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Foot,
    Gaze,
    HandLeft,
    HandRight,
    Stereo,
    ObjectLeft,
    ObjectRight,
    Timestamp,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Group::Foot => "foot",
            Group::Gaze => "gaze",
            Group::HandLeft => "hand (left)",
            Group::HandRight => "hand (right)",
            Group::Stereo => "stereo",
            Group::ObjectLeft => "object (left)",
            Group::ObjectRight => "object (right)",
            Group::Timestamp => "timestamp",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub group: Group,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} group: {}", self.group, self.message)
    }
}

fn check_probs(group: Group, probs: &[f64], out: &mut Vec<Violation>) {
    if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        out.push(Violation {
            group,
            message: format!("probability {bad} outside [0, 1]"),
        });
        return;
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        out.push(Violation {
            group,
            message: format!("probabilities sum to {sum}"),
        });
    }
}

/// Checks every group invariant, returning all violations found.
pub fn validate_frame(frame: &FrameFeatures) -> std::result::Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    check_probs(Group::Foot, &frame.foot.activity_probs, &mut v);
    check_probs(Group::Gaze, &frame.gaze.zone_probs, &mut v);
    check_probs(Group::HandLeft, &frame.hands.activity_probs_left, &mut v);
    check_probs(Group::HandRight, &frame.hands.activity_probs_right, &mut v);
    for (side, d) in [
        ("left", frame.stereo.dist_left_m),
        ("right", frame.stereo.dist_right_m),
    ] {
        if !d.is_finite() || d < 0.0 {
            v.push(Violation {
                group: Group::Stereo,
                message: format!("{side} wrist distance {d} must be finite and non-negative"),
            });
        }
    }
    check_probs(Group::ObjectLeft, &frame.objects.object_probs_left, &mut v);
    check_probs(
        Group::ObjectRight,
        &frame.objects.object_probs_right,
        &mut v,
    );
    if !frame.timestamp_s.is_finite() {
        v.push(Violation {
            group: Group::Timestamp,
            message: "timestamp is not finite".into(),
        });
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> FrameFeatures {
        FrameFeatures::uniform(-1.0, 0.4, 0.5)
    }

    #[test]
    fn dims_follow_group_sizes() {
        assert_eq!(feature_dim(FeatureMask::ALL).unwrap(), 41);
        assert_eq!(feature_dim("G".parse().unwrap()).unwrap(), 8);
        assert_eq!(feature_dim("H+S".parse().unwrap()).unwrap(), 14);
        assert!(matches!(
            feature_dim(FeatureMask::NONE),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn projections() {
        let mut f = frame();
        f.gaze.zone_probs = [0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        assert_eq!(
            flatten(&f, "G".parse().unwrap()),
            f.gaze.zone_probs.to_vec()
        );
        f.foot.activity_probs = [1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(
            flatten(&f, "F".parse().unwrap()),
            vec![1.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(flatten(&f, FeatureMask::ALL).len(), 41);
    }

    #[test]
    fn masking_keeps_group_order() {
        let f = frame();
        let full = flatten(&f, FeatureMask::ALL);
        let hs = flatten(&f, "S+H".parse().unwrap());
        assert_eq!(hs, full[13..27].to_vec());
        let fo = flatten(&f, "O+F".parse().unwrap());
        assert_eq!(&fo[..5], &full[..5]);
        assert_eq!(&fo[5..], &full[27..]);
    }

    #[test]
    fn row_round_trip() {
        let mut f = frame();
        f.stereo.dist_right_m = 0.77;
        f.objects.object_probs_right = [0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        let back = FrameFeatures::from_row(f.timestamp_s, &f.to_row()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn validation_reports_each_group() {
        assert!(validate_frame(&frame()).is_ok());

        let mut f = frame();
        f.gaze.zone_probs[0] += 0.5;
        let v = validate_frame(&f).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].group, Group::Gaze);

        let mut f = frame();
        f.stereo.dist_left_m = -0.1;
        let v = validate_frame(&f).unwrap_err();
        assert_eq!(v[0].group, Group::Stereo);

        let mut f = frame();
        f.foot.activity_probs[1] = 1.2;
        f.hands.activity_probs_right[0] = f64::NAN;
        assert_eq!(validate_frame(&f).unwrap_err().len(), 2);
    }

    #[test]
    fn mask_parsing() {
        let m: FeatureMask = "f+g+h+s+o".parse().unwrap();
        assert_eq!(m, FeatureMask::ALL);
        assert_eq!(m.to_string(), "F+G+H+S+O");
        assert!("X".parse::<FeatureMask>().is_err());
        assert_eq!(FeatureMask::ablation_defaults().len(), 11);
    }
}
