use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Variant};
use super::layers::{dot, sigmoid, softplus, Dense, LstmCell, StepOut};
use crate::dataset::ComponentTimes;
use crate::error::{Error, Result};

/// What the output head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Component take-over times.
    Takeover,
    /// A scalar readiness index in `[0, 1]`, used for pretraining.
    Readiness,
}

impl Task {
    pub(crate) fn code(&self) -> u8 {
        match self {
            Task::Takeover => 0,
            Task::Readiness => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Task::Takeover),
            1 => Some(Task::Readiness),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub times: ComponentTimes,
    pub prob: f64,
}

/// Model output for one window.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Point(ComponentTimes),
    Multimodal(Vec<Mode>),
}

impl Prediction {
    /// Index of the mode with the highest probability (lowest index on ties).
    pub fn most_probable_index(&self) -> usize {
        match self {
            Prediction::Point(_) => 0,
            Prediction::Multimodal(modes) => {
                let mut best = 0;
                for (k, m) in modes.iter().enumerate() {
                    if m.prob > modes[best].prob {
                        best = k;
                    }
                }
                best
            }
        }
    }

    pub fn most_probable(&self) -> ComponentTimes {
        match self {
            Prediction::Point(t) => *t,
            Prediction::Multimodal(modes) => modes[self.most_probable_index()].times,
        }
    }

    /// Index of the mode closest to `target` in summed L1 (lowest index on ties).
    pub fn closest_index(&self, target: &ComponentTimes) -> usize {
        match self {
            Prediction::Point(_) => 0,
            Prediction::Multimodal(modes) => {
                let mut best = 0;
                let mut best_err = f64::INFINITY;
                for (k, m) in modes.iter().enumerate() {
                    let err = m.times.l1(target);
                    if err < best_err {
                        best = k;
                        best_err = err;
                    }
                }
                best
            }
        }
    }

    pub fn closest(&self, target: &ComponentTimes) -> ComponentTimes {
        match self {
            Prediction::Point(t) => *t,
            Prediction::Multimodal(modes) => modes[self.closest_index(target)].times,
        }
    }

    pub fn modes(&self) -> Vec<Mode> {
        match self {
            Prediction::Point(t) => vec![Mode {
                times: *t,
                prob: 1.0,
            }],
            Prediction::Multimodal(m) => m.clone(),
        }
    }

    pub fn is_multimodal(&self) -> bool {
        matches!(self, Prediction::Multimodal(_))
    }
}

/// Input transform, one or three LSTM cells and an output head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) config: ModelConfig,
    pub(crate) task: Task,
    pub(crate) input: Dense,
    pub(crate) cells: Vec<LstmCell>,
    pub(crate) head: Dense,
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct Trace {
    pub steps: usize,
    /// Input-transform pre-activations, `T x H`.
    pub pre: Vec<f64>,
    /// Rectified transformed inputs, `T x H`.
    pub inputs: Vec<f64>,
    pub cells: Vec<CellTrace>,
    /// Concatenated final hidden states of all cells.
    pub head_in: Vec<f64>,
    pub head_out: Vec<f64>,
}

pub(crate) struct CellTrace {
    /// Activated gates, `T x 4H`.
    pub gates: Vec<f64>,
    /// States, `(T + 1) x H`; row 0 is the zero initial state.
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl Trace {
    pub fn new(model: &Model) -> Self {
        let t = model.config.window_frames;
        let h = model.config.hidden_dim;
        Trace {
            steps: t,
            pre: vec![0.0; t * h],
            inputs: vec![0.0; t * h],
            cells: (0..model.cells.len())
                .map(|_| CellTrace {
                    gates: vec![0.0; t * 4 * h],
                    c: vec![0.0; (t + 1) * h],
                    h: vec![0.0; (t + 1) * h],
                    tanh_c: vec![0.0; t * h],
                })
                .collect(),
            head_in: vec![0.0; model.cells.len() * h],
            head_out: vec![0.0; model.head.outputs],
        }
    }
}

impl Model {
    /// Fresh model for `config`, initialized from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        Model::with_task(config, Task::Takeover)
    }

    /// Readiness-index model sharing the trunk layout of `config`.
    pub fn new_readiness(config: ModelConfig) -> Result<Self> {
        Model::with_task(config, Task::Readiness)
    }

    pub(crate) fn with_task(config: ModelConfig, task: Task) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = config.hidden_dim;
        let input = Dense::new(config.input_dim, h, &mut rng);
        let cells = (0..config.variant.num_cells())
            .map(|_| LstmCell::new(h, h, &mut rng))
            .collect();
        let (head_in, head_out) = head_shape(&config, task);
        let head = Dense::new(head_in, head_out, &mut rng);
        Ok(Model {
            config,
            task,
            input,
            cells,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn cells(&self) -> &[LstmCell] {
        &self.cells
    }

    pub fn input_layer(&self) -> &Dense {
        &self.input
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    pub(crate) fn head_inputs(&self) -> usize {
        self.head.inputs
    }

    /// Same shapes, every parameter zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Model {
        Model {
            config: self.config,
            task: self.task,
            input: Dense::zeros(self.input.inputs, self.input.outputs),
            cells: self
                .cells
                .iter()
                .map(|c| LstmCell::zeros(c.input_dim, c.hidden_dim))
                .collect(),
            head: Dense::zeros(self.head.inputs, self.head.outputs),
        }
    }

    /// Named parameter arrays with their shapes, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = vec![
            (
                "input.weight".into(),
                vec![self.input.outputs, self.input.inputs],
                &self.input.weight,
            ),
            (
                "input.bias".into(),
                vec![self.input.outputs],
                &self.input.bias,
            ),
        ];
        for (k, c) in self.cells.iter().enumerate() {
            let g = 4 * c.hidden_dim;
            out.push((format!("lstm{k}.w_input"), vec![c.input_dim, g], &c.w_input));
            out.push((
                format!("lstm{k}.w_hidden"),
                vec![c.hidden_dim, g],
                &c.w_hidden,
            ));
            out.push((format!("lstm{k}.bias"), vec![g], &c.bias));
        }
        out.push((
            "head.weight".into(),
            vec![self.head.outputs, self.head.inputs],
            &self.head.weight,
        ));
        out.push(("head.bias".into(), vec![self.head.outputs], &self.head.bias));
        out
    }

    /// Mutable parameter arrays in the order of [`Model::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.input.weight, &mut self.input.bias];
        for c in &mut self.cells {
            out.push(&mut c.w_input);
            out.push(&mut c.w_hidden);
            out.push(&mut c.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.named_tensors()
            .into_iter()
            .map(|(_, _, t)| t)
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub(crate) fn check_window(&self, window: &[f64]) -> Result<()> {
        let expected = self.config.window_frames * self.config.input_dim;
        if window.len() != expected {
            return Err(Error::Shape(format!(
                "window has {} values, expected {} rows x {} features",
                window.len(),
                self.config.window_frames,
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Runs the trunk and head, filling `trace`. The window must be validated.
    pub(crate) fn run(&self, window: &[f64], trace: &mut Trace) {
        let h = self.config.hidden_dim;
        let d = self.config.input_dim;
        for t in 0..trace.steps {
            let pre = &mut trace.pre[t * h..(t + 1) * h];
            self.input.forward(&window[t * d..(t + 1) * d], pre);
            for (u, p) in trace.inputs[t * h..(t + 1) * h].iter_mut().zip(pre.iter()) {
                *u = p.max(0.0);
            }
        }
        for (cell, ct) in self.cells.iter().zip(trace.cells.iter_mut()) {
            for t in 0..trace.steps {
                let x = &trace.inputs[t * h..(t + 1) * h];
                let (h_prev, h_next) = ct.h.split_at_mut((t + 1) * h);
                let (c_prev, c_next) = ct.c.split_at_mut((t + 1) * h);
                cell.step_into(
                    x,
                    &h_prev[t * h..],
                    &c_prev[t * h..],
                    StepOut {
                        gates: &mut ct.gates[t * 4 * h..(t + 1) * 4 * h],
                        c: &mut c_next[..h],
                        h: &mut h_next[..h],
                        tanh_c: &mut ct.tanh_c[t * h..(t + 1) * h],
                    },
                );
            }
        }
        let last = trace.steps * h;
        let independent_point =
            self.task == Task::Takeover && self.config.variant == Variant::IndependentLstms;
        if independent_point {
            // one shared head row per branch: output c reads cell c only
            for (c, ct) in trace.cells.iter().enumerate() {
                trace.head_out[c] =
                    self.head.bias[c] + dot(self.head.row(c), &ct.h[last..last + h]);
            }
            for (c, ct) in trace.cells.iter().enumerate() {
                trace.head_in[c * h..(c + 1) * h].copy_from_slice(&ct.h[last..last + h]);
            }
        } else {
            for (c, ct) in trace.cells.iter().enumerate() {
                trace.head_in[c * h..(c + 1) * h].copy_from_slice(&ct.h[last..last + h]);
            }
            self.head.forward(&trace.head_in, &mut trace.head_out);
        }
    }

    pub(crate) fn decode(&self, head_out: &[f64]) -> Prediction {
        if self.config.variant.is_multimodal() {
            let k = self.config.num_modes;
            let probs = softmax(&head_out[3 * k..4 * k]);
            Prediction::Multimodal(
                (0..k)
                    .map(|m| Mode {
                        times: ComponentTimes::new(
                            softplus(head_out[3 * m]),
                            softplus(head_out[3 * m + 1]),
                            softplus(head_out[3 * m + 2]),
                        ),
                        prob: probs[m],
                    })
                    .collect(),
            )
        } else {
            Prediction::Point(ComponentTimes::new(
                softplus(head_out[0]),
                softplus(head_out[1]),
                softplus(head_out[2]),
            ))
        }
    }

    /// Predicts take-over times from a row-major `window_frames x input_dim` window.
    pub fn forward(&self, window: &[f64]) -> Result<Prediction> {
        let mut trace = Trace::new(self);
        self.forward_with(window, &mut trace)
    }

    pub(crate) fn forward_with(&self, window: &[f64], trace: &mut Trace) -> Result<Prediction> {
        if self.task != Task::Takeover {
            return Err(Error::VariantMismatch(
                "readiness model cannot predict take-over times".into(),
            ));
        }
        self.check_window(window)?;
        self.run(window, trace);
        Ok(self.decode(&trace.head_out))
    }

    /// Readiness index in `[0, 1]` for a readiness-task model.
    pub fn predict_readiness(&self, window: &[f64]) -> Result<f64> {
        if self.task != Task::Readiness {
            return Err(Error::VariantMismatch(
                "take-over model has no readiness head".into(),
            ));
        }
        self.check_window(window)?;
        let mut trace = Trace::new(self);
        self.run(window, &mut trace);
        Ok(sigmoid(trace.head_out[0]))
    }

    /// Predictions for many windows, reusing one scratch trace.
    pub fn predict_many<'a>(
        &self,
        windows: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<Vec<Prediction>> {
        let mut trace = Trace::new(self);
        windows
            .into_iter()
            .map(|w| self.forward_with(w, &mut trace))
            .collect()
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn head_shape(config: &ModelConfig, task: Task) -> (usize, usize) {
    let h = config.hidden_dim;
    let cells = config.variant.num_cells();
    match (task, config.variant) {
        (Task::Readiness, _) => (cells * h, 1),
        (Task::Takeover, Variant::BaselineLstm) => (h, 3),
        (Task::Takeover, Variant::IndependentLstms) => (h, 3),
        (Task::Takeover, _) => (cells * h, 4 * config.num_modes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            input_dim: 6,
            hidden_dim: 5,
            num_modes: 3,
            window_frames: 60,
            seed: 3,
        }
    }

    fn window(seed: u64) -> Vec<f64> {
        (0..360)
            .map(|i| ((i as f64 + seed as f64) * 0.37).sin())
            .collect()
    }

    #[test]
    fn point_outputs_are_non_negative() {
        for v in [Variant::BaselineLstm, Variant::IndependentLstms] {
            let m = Model::new(config(v)).unwrap();
            match m.forward(&window(1)).unwrap() {
                Prediction::Point(t) => {
                    assert!(t.to_array().iter().all(|x| x.is_finite() && *x >= 0.0))
                }
                p => panic!("unexpected {p:?}"),
            }
        }
    }

    #[test]
    fn multimodal_probabilities_sum_to_one() {
        for v in [Variant::BaselineLstmMm, Variant::IndependentLstmsMm] {
            let m = Model::new(config(v)).unwrap();
            let p = m.forward(&window(2)).unwrap();
            let modes = p.modes();
            assert_eq!(modes.len(), 3);
            assert!(modes.iter().all(|m| m.prob >= 0.0));
            assert!((modes.iter().map(|m| m.prob).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let m = Model::new(config(Variant::IndependentLstmsMm)).unwrap();
        assert_eq!(
            m.forward(&window(4)).unwrap(),
            m.forward(&window(4)).unwrap()
        );
        let again = Model::new(config(Variant::IndependentLstmsMm)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn shape_mismatch() {
        let m = Model::new(config(Variant::BaselineLstm)).unwrap();
        assert!(matches!(m.forward(&[0.0; 10]), Err(Error::Shape(_))));
        assert!(Model::new(ModelConfig {
            num_modes: 1,
            ..config(Variant::BaselineLstmMm)
        })
        .is_err());
    }

    #[test]
    fn independent_cells_share_transforms() {
        let mut m = Model::new(config(Variant::IndependentLstms)).unwrap();
        let first = m.cells[0].clone();
        for c in &mut m.cells {
            *c = first.clone();
        }
        let mut trace = Trace::new(&m);
        m.run(&window(5), &mut trace);
        for c in 1..3 {
            assert_eq!(trace.cells[c].h, trace.cells[0].h);
            assert_eq!(trace.cells[c].c, trace.cells[0].c);
        }
        assert_eq!(m.head.inputs, 5);
    }

    #[test]
    fn readiness_head_is_bounded() {
        let m = Model::new_readiness(config(Variant::IndependentLstms)).unwrap();
        let r = m.predict_readiness(&window(6)).unwrap();
        assert!((0.0..=1.0).contains(&r));
        assert!(m.forward(&window(6)).is_err());
    }
}
