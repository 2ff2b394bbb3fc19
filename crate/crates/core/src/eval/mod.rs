//! Mean absolute errors, the best-of-K protocol and multi-seed experiments.

mod experiment;
mod report;

pub use experiment::{
    ablate, compare_augmentation, fraction_sweep, run_experiment, AblationSpec,
    AugmentationComparison, EvalSplit, ExperimentRow, ExperimentSpec, SeedRun,
};
pub use report::{
    curves_csv, report_csv, write_curves_csv, write_report_csv, CURVE_HEADER, REPORT_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::dataset::{ComponentTimes, SampleSet};
use crate::error::{Error, Result};
use crate::model::{Model, Prediction};

/// Which mode of a multimodal prediction is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// The mode with the highest probability.
    MostProbable,
    /// Per sample, the mode with the least summed L1 error.
    BestOfK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub label: String,
    pub model: String,
    pub dataset: String,
    pub samples: usize,
    pub eyes_mae_s: f64,
    pub foot_mae_s: f64,
    pub hands_mae_s: f64,
    /// Mean of the three component MAEs.
    pub overall_mae_s: f64,
    /// MAE of the take-over time, the max of the three components.
    pub takeover_mae_s: f64,
}

impl MaeReport {
    /// Errors of point predictions against targets.
    pub fn from_points(preds: &[ComponentTimes], targets: &[ComponentTimes]) -> Result<MaeReport> {
        if preds.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} targets",
                preds.len(),
                targets.len()
            )));
        }
        if preds.is_empty() {
            return Err(Error::Shape("cannot evaluate zero samples".into()));
        }
        let mut sums = [0.0; 4];
        for (p, t) in preds.iter().zip(targets) {
            let (pa, ta) = (p.to_array(), t.to_array());
            for c in 0..3 {
                sums[c] += (pa[c] - ta[c]).abs();
            }
            sums[3] += (p.takeover() - t.takeover()).abs();
        }
        let n = preds.len() as f64;
        let [eyes, foot, hands, takeover] = sums.map(|s| s / n);
        if !(eyes + foot + hands + takeover).is_finite() {
            return Err(Error::NonFinite("mean absolute error".into()));
        }
        Ok(MaeReport {
            label: String::new(),
            model: String::new(),
            dataset: String::new(),
            samples: preds.len(),
            eyes_mae_s: eyes,
            foot_mae_s: foot,
            hands_mae_s: hands,
            overall_mae_s: (eyes + foot + hands) / 3.0,
            takeover_mae_s: takeover,
        })
    }

    pub fn columns(&self) -> [f64; 5] {
        [
            self.eyes_mae_s,
            self.foot_mae_s,
            self.hands_mae_s,
            self.overall_mae_s,
            self.takeover_mae_s,
        ]
    }

    /// Column-wise mean of several reports; sample counts are summed.
    pub fn mean(reports: &[MaeReport]) -> Result<MaeReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Shape("no reports to average".into()))?;
        let n = reports.len() as f64;
        let avg = |f: fn(&MaeReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Ok(MaeReport {
            label: first.label.clone(),
            model: first.model.clone(),
            dataset: first.dataset.clone(),
            samples: reports.iter().map(|r| r.samples).sum(),
            eyes_mae_s: avg(|r| r.eyes_mae_s),
            foot_mae_s: avg(|r| r.foot_mae_s),
            hands_mae_s: avg(|r| r.hands_mae_s),
            overall_mae_s: avg(|r| r.overall_mae_s),
            takeover_mae_s: avg(|r| r.takeover_mae_s),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Picks the scored triple of each prediction.
pub fn select_times(
    preds: &[Prediction],
    targets: &[ComponentTimes],
    mode: EvalMode,
) -> Result<Vec<ComponentTimes>> {
    if mode == EvalMode::BestOfK && preds.iter().any(|p| !p.is_multimodal()) {
        return Err(Error::VariantMismatch(
            "best-of-K evaluation needs a multimodal model".into(),
        ));
    }
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| match mode {
            EvalMode::MostProbable => p.most_probable(),
            EvalMode::BestOfK => p.closest(t),
        })
        .collect())
}

/// MAEs of `model` over every sample of `samples`.
pub fn evaluate(model: &Model, samples: &SampleSet, mode: EvalMode) -> Result<MaeReport> {
    if mode == EvalMode::BestOfK && !model.variant().is_multimodal() {
        return Err(Error::VariantMismatch(format!(
            "best-of-K evaluation needs a multimodal model, not {}",
            model.variant()
        )));
    }
    if samples.is_empty() {
        return Err(Error::Shape("cannot evaluate zero samples".into()));
    }
    let preds = model.predict_many((0..samples.len()).map(|i| samples.window(i)))?;
    let targets: Vec<ComponentTimes> = (0..samples.len()).map(|i| samples.targets(i)).collect();
    let chosen = select_times(&preds, &targets, mode)?;
    let mut report = MaeReport::from_points(&chosen, &targets)?;
    report.model = model.variant().name().to_string();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mode;

    fn t(e: f64, f: f64, h: f64) -> ComponentTimes {
        ComponentTimes::new(e, f, h)
    }

    #[test]
    fn single_sample_arithmetic() {
        let r = MaeReport::from_points(&[t(1.0, 2.0, 3.0)], &[t(1.5, 2.0, 2.5)]).unwrap();
        assert_eq!(r.eyes_mae_s, 0.5);
        assert_eq!(r.foot_mae_s, 0.0);
        assert_eq!(r.hands_mae_s, 0.5);
        assert!((r.overall_mae_s - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.takeover_mae_s, 0.5);
    }

    #[test]
    fn perfect_predictor() {
        let ts = [t(0.3, 0.9, 1.7), t(0.0, 0.0, 0.0)];
        let r = MaeReport::from_points(&ts, &ts).unwrap();
        assert_eq!(r.columns(), [0.0; 5]);
    }

    #[test]
    fn takeover_uses_max_on_each_side() {
        // max of the prediction is eyes, max of the target is hands
        let r = MaeReport::from_points(&[t(3.0, 0.0, 0.0)], &[t(0.0, 0.0, 2.0)]).unwrap();
        assert_eq!(r.takeover_mae_s, 1.0);
    }

    #[test]
    fn best_of_k_rejects_points() {
        let p = [Prediction::Point(t(1.0, 1.0, 1.0))];
        assert!(select_times(&p, &[t(1.0, 1.0, 1.0)], EvalMode::BestOfK).is_err());
    }

    #[test]
    fn best_of_k_picks_closest() {
        let p = [Prediction::Multimodal(vec![
            Mode {
                times: t(1.0, 1.0, 1.0),
                prob: 0.9,
            },
            Mode {
                times: t(2.0, 2.0, 2.0),
                prob: 0.1,
            },
        ])];
        let target = [t(2.0, 2.1, 2.0)];
        assert_eq!(
            select_times(&p, &target, EvalMode::BestOfK).unwrap()[0],
            t(2.0, 2.0, 2.0)
        );
        assert_eq!(
            select_times(&p, &target, EvalMode::MostProbable).unwrap()[0],
            t(1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn mean_of_reports() {
        let a = MaeReport::from_points(&[t(1.0, 0.0, 0.0)], &[t(0.0, 0.0, 0.0)]).unwrap();
        let b = MaeReport::from_points(&[t(0.0, 0.0, 0.0)], &[t(0.0, 0.0, 0.0)]).unwrap();
        let m = MaeReport::mean(&[a, b]).unwrap();
        assert_eq!(m.eyes_mae_s, 0.5);
        assert_eq!(m.samples, 2);
        assert!(MaeReport::mean(&[]).is_err());
    }
}
