//! Synthetic take-over events.
//!
//! Each event draws a standardized delay `z` per component (eyes, foot,
//! hands) and a component time `mean + spread * z` from its activity profile.
//! A latent readiness in `[0, 1]` per component drives the features: before
//! the request it hovers around a level that is lower for slower (larger `z`)
//! drivers, after the request it ramps up and snaps to 1 at the annotated
//! component time. Every probability group is a softmax over logits that
//! blend the activity's distracted signature with the driving-ready
//! signature by that readiness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::event::{
    frame_time, frames_for, Activity, ComponentTimes, TakeoverEvent, POST_TOR_S, PRE_TOR_S,
};
use crate::error::{Error, Result};
use crate::features::{FrameFeatures, FOOT_ACTIVITIES, GAZE_ZONES, HAND_ACTIVITIES, HAND_OBJECTS};

/// Readiness reached just before a behavior completes.
const RAMP_PEAK: f64 = 0.85;
/// Decay of the pre-request readiness drift.
const DRIFT_DECAY: f64 = 0.95;
/// Latest component time the generator emits, seconds after the request.
const MAX_COMPONENT_S: f64 = 9.5;
/// Wrist-to-wheel distance of a hand resting on the wheel, meters.
const WHEEL_DISTANCE_M: f64 = 0.03;
/// ORI weights of eyes, foot and hands readiness.
const ORI_WEIGHTS: [f64; 3] = [0.3, 0.25, 0.45];
/// Simulated raters averaged per ORI label.
const ORI_RATERS: usize = 3;
const ORI_RATER_SPREAD: f64 = 0.1;
const DEFAULT_CORRELATION: f64 = 0.6;

fn default_correlation() -> f64 {
    DEFAULT_CORRELATION
}

/// Per-activity generator parameters. Signature fields name the class each
/// group gravitates to while the driver is distracted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub activity: Activity,
    pub count: usize,
    /// Mean eyes, foot and hands times, seconds.
    pub mean_s: [f64; 3],
    /// Standard deviation of each component time, seconds.
    pub spread_s: [f64; 3],
    pub gaze_zone: String,
    pub hand_left: String,
    pub hand_right: String,
    pub object_left: String,
    pub object_right: String,
    pub foot: String,
    /// Left and right wrist distance to the wheel while distracted, meters.
    pub wrist_distance_m: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub frame_rate_hz: u32,
    /// Logit magnitude of a signature class.
    pub signature_strength: f64,
    /// Standard deviation of per-frame logit noise.
    pub logit_noise: f64,
    /// Standard deviation of the pre-request readiness drift per frame.
    pub readiness_drift: f64,
    /// Largest pre-request readiness; how strongly features reveal the delays.
    pub readiness_coupling: f64,
    /// Standard deviation of wrist distance noise, meters.
    pub distance_noise_m: f64,
    /// Share of each component's delay variance that comes from one
    /// per-driver factor common to eyes, foot and hands.
    #[serde(default = "default_correlation")]
    pub component_correlation: f64,
    pub activities: Vec<ActivityProfile>,
}

struct Signature {
    gaze: usize,
    hand: [usize; 2],
    object: [usize; 2],
    foot: usize,
}

fn lookup(kind: &str, names: &[&str], value: &str) -> Result<usize> {
    names.iter().position(|n| *n == value).ok_or_else(|| {
        Error::Config(format!(
            "unknown {kind} `{value}`; expected one of {}",
            names.join(", ")
        ))
    })
}

impl ActivityProfile {
    #[allow(clippy::too_many_arguments)]
    fn new(
        activity: Activity,
        count: usize,
        mean_s: [f64; 3],
        spread_s: [f64; 3],
        gaze: &str,
        hands: [&str; 2],
        objects: [&str; 2],
        foot: &str,
        wrist_distance_m: [f64; 2],
    ) -> Self {
        ActivityProfile {
            activity,
            count,
            mean_s,
            spread_s,
            gaze_zone: gaze.into(),
            hand_left: hands[0].into(),
            hand_right: hands[1].into(),
            object_left: objects[0].into(),
            object_right: objects[1].into(),
            foot: foot.into(),
            wrist_distance_m,
        }
    }

    fn signature(&self) -> Result<Signature> {
        Ok(Signature {
            gaze: lookup("gaze zone", &GAZE_ZONES, &self.gaze_zone)?,
            hand: [
                lookup("hand activity", &HAND_ACTIVITIES, &self.hand_left)?,
                lookup("hand activity", &HAND_ACTIVITIES, &self.hand_right)?,
            ],
            object: [
                lookup("hand object", &HAND_OBJECTS, &self.object_left)?,
                lookup("hand object", &HAND_OBJECTS, &self.object_right)?,
            ],
            foot: lookup("foot activity", &FOOT_ACTIVITIES, &self.foot)?,
        })
    }
}

/// Event counts per activity of the controlled driving study.
pub const STUDY_COUNTS: [usize; 8] = [308, 182, 85, 262, 42, 262, 97, 100];

impl Default for SynthConfig {
    fn default() -> Self {
        use Activity::*;
        let c = STUDY_COUNTS;
        let spread = [0.15, 0.25, 0.5];
        let activities = vec![
            ActivityProfile::new(
                NoActivity,
                c[0],
                [0.45, 0.8, 1.4],
                spread,
                "forward",
                ["hovering_over_wheel", "on_lap"],
                ["no_object", "no_object"],
                "hovering_over_gas",
                [0.12, 0.3],
            ),
            ActivityProfile::new(
                TalkingToPassenger,
                c[1],
                [0.5, 0.85, 1.5],
                spread,
                "right_mirror",
                ["on_lap", "on_lap"],
                ["no_object", "no_object"],
                "away_from_pedal",
                [0.35, 0.35],
            ),
            ActivityProfile::new(
                EyesClosed,
                c[2],
                [0.55, 0.9, 1.5],
                spread,
                "lap",
                ["on_lap", "on_lap"],
                ["no_object", "no_object"],
                "away_from_pedal",
                [0.35, 0.35],
            ),
            ActivityProfile::new(
                Texting,
                c[3],
                [0.8, 1.2, 2.4],
                spread,
                "lap",
                ["in_air", "in_air"],
                ["phone", "no_object"],
                "away_from_pedal",
                [0.4, 0.4],
            ),
            ActivityProfile::new(
                PhoneCall,
                c[4],
                [0.7, 1.15, 2.3],
                spread,
                "left_mirror",
                ["on_lap", "in_air"],
                ["no_object", "phone"],
                "away_from_pedal",
                [0.3, 0.5],
            ),
            ActivityProfile::new(
                Infotainment,
                c[5],
                [0.55, 0.9, 1.7],
                spread,
                "infotainment",
                ["hovering_over_wheel", "infotainment"],
                ["no_object", "no_object"],
                "hovering_over_gas",
                [0.15, 0.35],
            ),
            ActivityProfile::new(
                CountingCoins,
                c[6],
                [0.75, 1.2, 2.5],
                spread,
                "lap",
                ["on_lap", "cupholder"],
                ["no_object", "other"],
                "away_from_pedal",
                [0.3, 0.45],
            ),
            ActivityProfile::new(
                Reading,
                c[7],
                [0.85, 1.25, 2.6],
                spread,
                "lap",
                ["in_air", "in_air"],
                ["book", "book"],
                "away_from_pedal",
                [0.45, 0.45],
            ),
        ];
        SynthConfig {
            seed: 2021,
            frame_rate_hz: 30,
            signature_strength: 4.0,
            logit_noise: 0.35,
            readiness_drift: 0.03,
            readiness_coupling: 0.45,
            distance_noise_m: 0.01,
            component_correlation: DEFAULT_CORRELATION,
            activities,
        }
    }
}

impl SynthConfig {
    /// Default profiles with every activity count set to `per_activity`.
    pub fn balanced(per_activity: usize, seed: u64) -> Self {
        let mut cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        for p in &mut cfg.activities {
            p.count = per_activity;
        }
        cfg
    }

    /// Default profiles with counts proportional to the study's, `total` events overall.
    pub fn scaled(total: usize, seed: u64) -> Self {
        let mut cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        cfg.set_total(total);
        cfg
    }

    /// Rescales the activity counts to sum to `total`, keeping their proportions.
    pub fn set_total(&mut self, total: usize) {
        let current = self.total_events().max(1);
        let last = self.activities.len().saturating_sub(1);
        let mut assigned = 0;
        for (i, p) in self.activities.iter_mut().enumerate() {
            p.count = if i == last {
                total.saturating_sub(assigned)
            } else {
                ((p.count * total) as f64 / current as f64).round() as usize
            };
            assigned += p.count;
        }
    }

    pub fn total_events(&self) -> usize {
        self.activities.iter().map(|p| p.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_rate_hz == 0 {
            return Err(Error::Config("frame_rate_hz must be positive".into()));
        }
        if self.activities.is_empty() {
            return Err(Error::Config("no activity profiles".into()));
        }
        for p in &self.activities {
            if p.count == 0 {
                return Err(Error::Config(format!(
                    "count for {} must be positive",
                    p.activity
                )));
            }
            if p.mean_s
                .iter()
                .chain(&p.spread_s)
                .any(|v| !v.is_finite() || *v < 0.0)
            {
                return Err(Error::Config(format!(
                    "times for {} must be finite and >= 0",
                    p.activity
                )));
            }
            if p.wrist_distance_m
                .iter()
                .any(|v| !v.is_finite() || *v < 0.0)
            {
                return Err(Error::Config(format!(
                    "wrist distances for {} must be >= 0",
                    p.activity
                )));
            }
            p.signature()?;
        }
        let params = [
            self.signature_strength,
            self.logit_noise,
            self.readiness_drift,
            self.readiness_coupling,
            self.distance_noise_m,
        ];
        if params.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "generator parameters must be finite and >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.component_correlation) {
            return Err(Error::Config(
                "component_correlation must be in [0, 1]".into(),
            ));
        }
        if self.readiness_coupling > RAMP_PEAK {
            return Err(Error::Config(format!(
                "readiness_coupling must be <= {RAMP_PEAK}"
            )));
        }
        Ok(())
    }
}

/// Latent eyes, foot and hands readiness of one frame.
pub type Readiness = [f64; 3];

/// Generated events plus the latent readiness that produced their features.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub events: Vec<TakeoverEvent>,
    pub readiness: Vec<Vec<Readiness>>,
}

/// Rounds to a 1e-6 grid and absorbs the rounding residue in the largest entry.
fn quantize_probs(p: &mut [f64]) {
    let q = |x: f64| (x * 1e6).round() / 1e6;
    let top = (0..p.len())
        .max_by(|&a, &b| p[a].total_cmp(&p[b]))
        .unwrap_or(0);
    let mut rest = 0.0;
    for (i, x) in p.iter_mut().enumerate() {
        if i != top {
            *x = q(*x);
            rest += *x;
        }
    }
    p[top] = q(1.0 - rest);
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    quantize_probs(out);
}

struct FrameSampler<'a, R> {
    rng: &'a mut R,
    strength: f64,
    noise: f64,
}

impl<R: Rng> FrameSampler<'_, R> {
    /// Softmax of the readiness-weighted blend of two one-hot signatures.
    fn group(&mut self, out: &mut [f64], distracted: usize, ready: usize, readiness: f64) {
        let mut logits = [0.0; 8];
        let logits = &mut logits[..out.len()];
        for (k, l) in logits.iter_mut().enumerate() {
            let mut v = 0.0;
            if k == distracted {
                v += (1.0 - readiness) * self.strength;
            }
            if k == ready {
                v += readiness * self.strength;
            }
            let n: f64 = self.rng.sample(StandardNormal);
            *l = v + self.noise * n;
        }
        softmax_into(logits, out);
    }
}

const READY_GAZE: usize = 0;
const READY_HAND: usize = 3;
const READY_OBJECT: usize = 0;
const READY_FOOT: usize = 1;

/// Generates events for every activity profile, in profile order.
pub fn synthesize_events(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let fps = cfg.frame_rate_hz;
    let n_frames = frames_for(PRE_TOR_S + POST_TOR_S, fps);
    let tor = frames_for(PRE_TOR_S, fps);
    let frame_s = 1.0 / fps as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut data = SyntheticData {
        events: Vec::with_capacity(cfg.total_events()),
        readiness: Vec::with_capacity(cfg.total_events()),
    };
    for profile in &cfg.activities {
        let sig = profile.signature()?;
        for _ in 0..profile.count {
            let id = format!("{}-{:05}", profile.activity, data.events.len());
            let mut times = [0.0; 3];
            let mut base = [0.0; 3];
            let shared: f64 = rng.sample(StandardNormal);
            let (w_shared, w_own) = (
                cfg.component_correlation.sqrt(),
                (1.0 - cfg.component_correlation).sqrt(),
            );
            for c in 0..3 {
                let own: f64 = rng.sample(StandardNormal);
                let z = w_shared * shared + w_own * own;
                let t =
                    (profile.mean_s[c] + profile.spread_s[c] * z).clamp(frame_s, MAX_COMPONENT_S);
                // annotations mark the first frame at which a behavior is seen
                times[c] = (t * fps as f64).round() / fps as f64;
                base[c] = cfg.readiness_coupling / (1.0 + (1.5 * z).exp());
            }

            let mut drift = [0.0; 3];
            let mut frames = Vec::with_capacity(n_frames);
            let mut latent = Vec::with_capacity(n_frames);
            for i in 0..n_frames {
                let ts = frame_time(i, fps);
                let elapsed = (i as f64 - tor as f64) / fps as f64;
                let mut r = [0.0; 3];
                for c in 0..3 {
                    let n: f64 = rng.sample(StandardNormal);
                    drift[c] = DRIFT_DECAY * drift[c] + cfg.readiness_drift * n;
                    r[c] = if i < tor {
                        base[c] + drift[c]
                    } else if elapsed < times[c] {
                        base[c] + (RAMP_PEAK - base[c]) * elapsed / times[c] + drift[c]
                    } else {
                        1.0
                    }
                    .clamp(0.0, 1.0);
                }

                let mut frame = FrameFeatures::uniform(ts, 0.0, 0.0);
                let mut s = FrameSampler {
                    rng: &mut rng,
                    strength: cfg.signature_strength,
                    noise: cfg.logit_noise,
                };
                s.group(&mut frame.foot.activity_probs, sig.foot, READY_FOOT, r[1]);
                s.group(&mut frame.gaze.zone_probs, sig.gaze, READY_GAZE, r[0]);
                s.group(
                    &mut frame.hands.activity_probs_left,
                    sig.hand[0],
                    READY_HAND,
                    r[2],
                );
                s.group(
                    &mut frame.hands.activity_probs_right,
                    sig.hand[1],
                    READY_HAND,
                    r[2],
                );
                s.group(
                    &mut frame.objects.object_probs_left,
                    sig.object[0],
                    READY_OBJECT,
                    r[2],
                );
                s.group(
                    &mut frame.objects.object_probs_right,
                    sig.object[1],
                    READY_OBJECT,
                    r[2],
                );
                let mut dist = [0.0; 2];
                for (d, far) in dist.iter_mut().zip(profile.wrist_distance_m) {
                    let n: f64 = rng.sample(StandardNormal);
                    let v = far * (1.0 - r[2]) + WHEEL_DISTANCE_M + cfg.distance_noise_m * n.abs();
                    *d = (v * 1e6).round() / 1e6;
                }
                frame.stereo.dist_left_m = dist[0];
                frame.stereo.dist_right_m = dist[1];
                frames.push(frame);
                latent.push(r);
            }
            data.events.push(TakeoverEvent {
                event_id: id,
                activity: profile.activity,
                frame_rate_hz: fps,
                times: ComponentTimes::from_array(times),
                frames,
            });
            data.readiness.push(latent);
        }
    }
    Ok(data)
}

/// ORI label of a window of latent readiness, before rater distortion.
pub fn window_readiness(latent: &[Readiness]) -> f64 {
    let sum: f64 = latent
        .iter()
        .map(|r| r.iter().zip(ORI_WEIGHTS).map(|(x, w)| x * w).sum::<f64>())
        .sum();
    (sum / latent.len() as f64).clamp(0.0, 1.0)
}

/// Rater-distorted readiness label: `readiness^gamma`, monotone in readiness
/// and fixed at 0 and 1 for any positive `gamma`.
pub fn rated_readiness(readiness: f64, gamma: f64) -> f64 {
    readiness.clamp(0.0, 1.0).powf(gamma)
}

/// A 2 s window of one synthetic event labelled with a readiness index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriLabel {
    pub event: usize,
    pub window_end: usize,
    pub label: f64,
}

/// Readiness labels for windows sliding by `stride` frames across every
/// event. Each event gets its own averaged rater distortion.
pub fn synthesize_ori_labels(
    data: &SyntheticData,
    stride: usize,
    seed: u64,
) -> Result<Vec<OriLabel>> {
    if stride == 0 {
        return Err(Error::Config("ORI window stride must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::new();
    for (e, (event, latent)) in data.events.iter().zip(&data.readiness).enumerate() {
        let window = event.window_frames();
        let gamma = (0..ORI_RATERS)
            .map(|_| {
                let n: f64 = rng.sample(StandardNormal);
                (ORI_RATER_SPREAD * n).exp()
            })
            .sum::<f64>()
            / ORI_RATERS as f64;
        let mut end = window;
        while end <= latent.len() {
            let label = rated_readiness(window_readiness(&latent[end - window..end]), gamma);
            labels.push(OriLabel {
                event: e,
                window_end: end,
                label,
            });
            end += stride;
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_counts_sum() {
        assert_eq!(SynthConfig::default().total_events(), 1338);
        assert_eq!(SynthConfig::scaled(1000, 1).total_events(), 1000);
    }

    #[test]
    fn generated_events_are_valid() {
        let data = synthesize_events(&SynthConfig::balanced(2, 3)).unwrap();
        assert_eq!(data.events.len(), 16);
        for e in &data.events {
            e.validate().unwrap();
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::balanced(1, 11);
        let a = synthesize_events(&cfg).unwrap();
        let b = synthesize_events(&cfg).unwrap();
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn zero_count_rejected() {
        let mut cfg = SynthConfig::balanced(1, 1);
        cfg.activities[3].count = 0;
        assert!(synthesize_events(&cfg).is_err());
        let mut cfg = SynthConfig::balanced(1, 1);
        cfg.activities[0].gaze_zone = "ceiling".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn readiness_labels() {
        let ready = vec![[1.0, 1.0, 1.0]; 60];
        let distracted = vec![[0.0, 0.0, 0.0]; 60];
        for gamma in [0.8, 1.0, 1.3] {
            assert!(rated_readiness(window_readiness(&ready), gamma) >= 0.8);
            assert!(rated_readiness(window_readiness(&distracted), gamma) <= 0.2);
        }
        let half = vec![[0.5, 0.5, 0.5]; 60];
        assert!(window_readiness(&half) > window_readiness(&distracted));
    }

    #[test]
    fn quantized_probs_stay_normalized() {
        let mut p = [0.123456789, 0.2, 0.676543211];
        quantize_probs(&mut p);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(p[0], 0.123457);
    }
}
