//! Training objectives.
//!
//! Point models use the batch mean of the summed absolute error over the
//! three component times. Multimodal models use a minimum-of-K objective: only
//! the mode closest to the target (summed L1, lowest index on ties) is
//! regressed, and the mode probabilities are trained with cross-entropy
//! against the one-hot indicator of that mode.

use super::network::Prediction;
use crate::dataset::ComponentTimes;
use crate::error::{Error, Result};

/// Lower bound on a probability inside `log`.
pub const PROB_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    L1,
    MinOfK,
    /// Squared error of the readiness index.
    ReadinessMse,
}

/// Subgradient of `|x|` with the value at 0 defined as 0.
#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_batch(preds: &[Prediction], targets: &[ComponentTimes]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    if preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    Ok(())
}

pub fn loss_l1(preds: &[Prediction], targets: &[ComponentTimes]) -> Result<f64> {
    check_batch(preds, targets)?;
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        match p {
            Prediction::Point(o) => total += o.l1(t),
            Prediction::Multimodal(_) => {
                return Err(Error::VariantMismatch(
                    "L1 loss needs point predictions; use the min-of-K loss".into(),
                ))
            }
        }
    }
    Ok(total / preds.len() as f64)
}

/// Batch means of the two minimum-of-K terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinOfKTerms {
    pub regression: f64,
    pub classification: f64,
}

impl MinOfKTerms {
    pub fn total(&self) -> f64 {
        self.regression + self.classification
    }
}

pub fn min_of_k_terms(preds: &[Prediction], targets: &[ComponentTimes]) -> Result<MinOfKTerms> {
    check_batch(preds, targets)?;
    let mut terms = MinOfKTerms {
        regression: 0.0,
        classification: 0.0,
    };
    for (p, t) in preds.iter().zip(targets) {
        let modes = match p {
            Prediction::Multimodal(m) if m.len() >= 2 => m,
            Prediction::Multimodal(m) => {
                return Err(Error::VariantMismatch(format!(
                    "min-of-K loss needs K >= 2 modes, got {}",
                    m.len()
                )))
            }
            Prediction::Point(_) => {
                return Err(Error::VariantMismatch(
                    "min-of-K loss needs multimodal predictions".into(),
                ))
            }
        };
        let best = p.closest_index(t);
        terms.regression += modes[best].times.l1(t);
        terms.classification -= modes[best].prob.max(PROB_FLOOR).ln();
    }
    let n = preds.len() as f64;
    terms.regression /= n;
    terms.classification /= n;
    Ok(terms)
}

pub fn loss_min_of_k(preds: &[Prediction], targets: &[ComponentTimes]) -> Result<f64> {
    min_of_k_terms(preds, targets).map(|t| t.total())
}
