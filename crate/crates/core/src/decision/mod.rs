//! The hand-over rule `TOT + epsilon < TTC` and streaming prediction.

mod stream;

pub use stream::{stream_predict, StreamOutput, StreamPredictor};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Prediction;

/// Margin used when none is configured.
pub const DEFAULT_EPSILON_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    HandOver,
    SafeStop,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::HandOver => "hand_over",
            Verdict::SafeStop => "safe_stop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    /// Take-over time the verdict was based on.
    pub tot_s: f64,
    /// `ttc - (tot + epsilon)`; positive exactly when the verdict is `HandOver`.
    pub margin_s: f64,
    /// Verdict of each mode on its own, in mode order (empty for point input).
    pub mode_verdicts: Vec<Verdict>,
}

fn check_inputs(ttc_s: f64, epsilon_s: f64) -> Result<()> {
    if !ttc_s.is_finite() || !epsilon_s.is_finite() {
        return Err(Error::NonFinite(format!(
            "ttc {ttc_s}, epsilon {epsilon_s}"
        )));
    }
    if ttc_s <= 0.0 {
        return Err(Error::Config(format!(
            "time-to-collision must be > 0, got {ttc_s}"
        )));
    }
    if epsilon_s < 0.0 {
        return Err(Error::Config(format!(
            "epsilon must be >= 0, got {epsilon_s}"
        )));
    }
    Ok(())
}

fn rule(tot_s: f64, ttc_s: f64, epsilon_s: f64) -> (Verdict, f64) {
    let needed = tot_s + epsilon_s;
    // for finite floats `a < b` exactly when `b - a > 0`
    let verdict = if needed < ttc_s {
        Verdict::HandOver
    } else {
        Verdict::SafeStop
    };
    (verdict, ttc_s - needed)
}

/// Hands over only when `tot + epsilon < ttc`; equality is a safe stop.
pub fn decide(tot_s: f64, ttc_s: f64, epsilon_s: f64) -> Result<Decision> {
    check_inputs(ttc_s, epsilon_s)?;
    if !tot_s.is_finite() {
        return Err(Error::NonFinite(format!("take-over time {tot_s}")));
    }
    let (verdict, margin_s) = rule(tot_s, ttc_s, epsilon_s);
    Ok(Decision {
        verdict,
        tot_s,
        margin_s,
        mode_verdicts: Vec::new(),
    })
}

/// How a multimodal prediction is reduced to one take-over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Take-over time of the most probable mode.
    #[default]
    MostProbable,
    /// Probability-weighted mean of the per-mode take-over times.
    Expected,
    /// Largest per-mode take-over time.
    WorstMode,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::MostProbable, Policy::Expected, Policy::WorstMode];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::MostProbable => "most_probable",
            Policy::Expected => "expected",
            Policy::WorstMode => "worst_mode",
        }
    }

    /// The take-over time this policy assigns to `pred`.
    pub fn takeover(&self, pred: &Prediction) -> f64 {
        let modes = pred.modes();
        match self {
            Policy::MostProbable => modes[pred.most_probable_index()].times.takeover(),
            Policy::Expected => {
                let total: f64 = modes.iter().map(|m| m.prob).sum();
                let mean = modes
                    .iter()
                    .map(|m| m.prob * m.times.takeover())
                    .sum::<f64>()
                    / total;
                // rounding must not push the mean outside the mode range
                mean.clamp(
                    Policy::extreme(&modes, f64::min),
                    Policy::extreme(&modes, f64::max),
                )
            }
            Policy::WorstMode => Policy::extreme(&modes, f64::max),
        }
    }

    fn extreme(modes: &[crate::model::Mode], pick: fn(f64, f64) -> f64) -> f64 {
        modes
            .iter()
            .map(|m| m.times.takeover())
            .reduce(pick)
            .unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('-', "_").to_ascii_lowercase();
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown policy `{s}` (expected most_probable, expected or worst_mode)"
                ))
            })
    }
}

/// Applies the hand-over rule to a (possibly multimodal) prediction.
pub fn decide_mm(
    pred: &Prediction,
    ttc_s: f64,
    epsilon_s: f64,
    policy: Policy,
) -> Result<Decision> {
    check_inputs(ttc_s, epsilon_s)?;
    let modes = pred.modes();
    if modes.is_empty() {
        return Err(Error::Shape("prediction has no modes".into()));
    }
    if modes
        .iter()
        .any(|m| !m.times.is_finite() || !m.prob.is_finite())
    {
        return Err(Error::NonFinite("prediction".into()));
    }
    let mut decision = decide(policy.takeover(pred), ttc_s, epsilon_s)?;
    if pred.is_multimodal() {
        decision.mode_verdicts = modes
            .iter()
            .map(|m| rule(m.times.takeover(), ttc_s, epsilon_s).0)
            .collect();
    }
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ComponentTimes;
    use crate::model::Mode;

    #[test]
    fn rule_examples() {
        let d = decide(2.0, 3.0, 0.5).unwrap();
        assert_eq!(d.verdict, Verdict::HandOver);
        assert_eq!(d.margin_s, 0.5);
        assert_eq!(decide(2.6, 3.0, 0.5).unwrap().verdict, Verdict::SafeStop);
        let edge = decide(2.5, 3.0, 0.5).unwrap();
        assert_eq!(edge.verdict, Verdict::SafeStop);
        assert_eq!(edge.margin_s, 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(decide(f64::NAN, 3.0, 0.5).is_err());
        assert!(decide(1.0, f64::INFINITY, 0.5).is_err());
        assert!(decide(1.0, 0.0, 0.5).is_err());
        assert!(decide(1.0, 3.0, -0.1).is_err());
    }

    fn mm(tots: &[(f64, f64)]) -> Prediction {
        Prediction::Multimodal(
            tots.iter()
                .map(|&(t, q)| Mode {
                    times: ComponentTimes::new(0.1, 0.2, t),
                    prob: q,
                })
                .collect(),
        )
    }

    #[test]
    fn policies() {
        let p = mm(&[(1.0, 0.5), (3.0, 0.5)]);
        assert_eq!(Policy::Expected.takeover(&p), 2.0);
        assert_eq!(Policy::MostProbable.takeover(&p), 1.0);
        assert_eq!(Policy::WorstMode.takeover(&p), 3.0);
        let d = decide_mm(&p, 3.0, 0.5, Policy::MostProbable).unwrap();
        assert_eq!(d.verdict, Verdict::HandOver);
        assert_eq!(d.mode_verdicts, vec![Verdict::HandOver, Verdict::SafeStop]);
        let w = decide_mm(&p, 3.0, 0.5, Policy::WorstMode).unwrap();
        assert_eq!(w.verdict, Verdict::SafeStop);
    }

    #[test]
    fn identical_modes_agree() {
        let p = mm(&[(1.7, 0.2), (1.7, 0.3), (1.7, 0.5)]);
        let verdicts: Vec<Verdict> = Policy::ALL
            .iter()
            .map(|&pol| decide_mm(&p, 2.2, 0.5, pol).unwrap().verdict)
            .collect();
        assert!(verdicts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn policy_names() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert_eq!("worst-mode".parse::<Policy>().unwrap(), Policy::WorstMode);
        assert!("median".parse::<Policy>().is_err());
    }
}
