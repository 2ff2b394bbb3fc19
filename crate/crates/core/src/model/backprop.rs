//! Exact gradients by backpropagation through time.

use super::config::Variant;
use super::layers::{sigmoid, softplus};
use super::loss::{sign, LossKind, PROB_FLOOR};
use super::network::{softmax, Model, Task, Trace};
use crate::dataset::{ComponentTimes, ReadinessSet, SampleSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Times(ComponentTimes),
    Readiness(f64),
}

/// Indexed windows with targets, the input to training.
pub trait Examples {
    fn len(&self) -> usize;
    fn window(&self, i: usize) -> &[f64];
    fn target(&self, i: usize) -> Target;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Examples for SampleSet {
    fn len(&self) -> usize {
        SampleSet::len(self)
    }

    fn window(&self, i: usize) -> &[f64] {
        SampleSet::window(self, i)
    }

    fn target(&self, i: usize) -> Target {
        Target::Times(self.targets(i))
    }
}

impl Examples for ReadinessSet {
    fn len(&self) -> usize {
        ReadinessSet::len(self)
    }

    fn window(&self, i: usize) -> &[f64] {
        ReadinessSet::window(self, i)
    }

    fn target(&self, i: usize) -> Target {
        Target::Readiness(self.label(i))
    }
}

impl Examples for [(&[f64], Target)] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }

    fn window(&self, i: usize) -> &[f64] {
        self[i].0
    }

    fn target(&self, i: usize) -> Target {
        self[i].1
    }
}

/// Loss the model is trained with by default.
pub fn default_loss(model: &Model) -> LossKind {
    match (model.task(), model.variant().is_multimodal()) {
        (Task::Readiness, _) => LossKind::ReadinessMse,
        (Task::Takeover, false) => LossKind::L1,
        (Task::Takeover, true) => LossKind::MinOfK,
    }
}

fn check_kind(model: &Model, kind: LossKind) -> Result<()> {
    if default_loss(model) != kind {
        return Err(Error::VariantMismatch(format!(
            "{kind:?} loss does not apply to a {} {:?} model",
            model.variant(),
            model.task()
        )));
    }
    Ok(())
}

/// Reusable buffers for accumulating gradients over a batch.
pub(crate) struct Backprop {
    trace: Trace,
    grad: Model,
    d_head_out: Vec<f64>,
    d_head_in: Vec<f64>,
    d_inputs: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dz: Vec<f64>,
    d_pre: Vec<f64>,
}

impl Backprop {
    pub fn new(model: &Model) -> Self {
        let h = model.config().hidden_dim;
        let t = model.config().window_frames;
        Backprop {
            trace: Trace::new(model),
            grad: model.zeros_like(),
            d_head_out: vec![0.0; model.head().outputs],
            d_head_in: vec![0.0; model.head_inputs().max(model.cells().len() * h)],
            d_inputs: vec![0.0; t * h],
            dh: vec![0.0; h],
            dc: vec![0.0; h],
            dz: vec![0.0; 4 * h],
            d_pre: vec![0.0; h],
        }
    }

    pub fn reset(&mut self) {
        for g in self.grad.tensors_mut() {
            g.fill(0.0);
        }
    }

    pub fn grad(&self) -> &Model {
        &self.grad
    }

    pub fn into_grad(self) -> Model {
        self.grad
    }

    /// Adds `scale` times this example's loss gradient; returns `scale * loss`.
    pub fn accumulate(
        &mut self,
        model: &Model,
        window: &[f64],
        target: Target,
        scale: f64,
    ) -> Result<f64> {
        model.check_window(window)?;
        model.run(window, &mut self.trace);
        let loss = self.output_grad(model, target, scale)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        self.backward(model, window);
        Ok(loss)
    }

    /// Fills `d_head_out` with the gradient of `scale * loss` w.r.t. the raw head outputs.
    fn output_grad(&mut self, model: &Model, target: Target, scale: f64) -> Result<f64> {
        let y = &self.trace.head_out;
        let dy = &mut self.d_head_out;
        dy.fill(0.0);
        match (model.task(), target) {
            (Task::Readiness, Target::Readiness(label)) => {
                let s = sigmoid(y[0]);
                let r = s - label;
                dy[0] = scale * 2.0 * r * s * (1.0 - s);
                Ok(scale * r * r)
            }
            (Task::Takeover, Target::Times(t)) if !model.variant().is_multimodal() => {
                let t = t.to_array();
                let mut loss = 0.0;
                for c in 0..3 {
                    let r = softplus(y[c]) - t[c];
                    loss += r.abs();
                    dy[c] = scale * sign(r) * sigmoid(y[c]);
                }
                Ok(scale * loss)
            }
            (Task::Takeover, Target::Times(t)) => {
                let k = model.config().num_modes;
                let t = t.to_array();
                let mut best = 0;
                let mut best_err = f64::INFINITY;
                for m in 0..k {
                    let err: f64 = (0..3).map(|c| (softplus(y[3 * m + c]) - t[c]).abs()).sum();
                    if err < best_err {
                        best = m;
                        best_err = err;
                    }
                }
                for c in 0..3 {
                    let i = 3 * best + c;
                    dy[i] = scale * sign(softplus(y[i]) - t[c]) * sigmoid(y[i]);
                }
                let q = softmax(&y[3 * k..4 * k]);
                if q[best] > PROB_FLOOR {
                    for m in 0..k {
                        let onehot = if m == best { 1.0 } else { 0.0 };
                        dy[3 * k + m] = scale * (q[m] - onehot);
                    }
                }
                Ok(scale * (best_err - q[best].max(PROB_FLOOR).ln()))
            }
            (task, target) => Err(Error::VariantMismatch(format!(
                "target {target:?} does not match a {task:?} model"
            ))),
        }
    }

    fn backward(&mut self, model: &Model, window: &[f64]) {
        let cfg = model.config();
        let h = cfg.hidden_dim;
        let d = cfg.input_dim;
        let steps = cfg.window_frames;
        let last = steps * h;
        let tr = &self.trace;

        self.d_head_in.fill(0.0);
        if model.task() == Task::Takeover && cfg.variant == Variant::IndependentLstms {
            let head = model.head();
            for c in 0..3 {
                let g = self.d_head_out[c];
                let hc = &tr.cells[c].h[last..last + h];
                self.grad.head.bias[c] += g;
                for j in 0..h {
                    self.grad.head.weight[c * h + j] += g * hc[j];
                    self.d_head_in[c * h + j] = g * head.row(c)[j];
                }
            }
        } else {
            model.head().backward(
                &tr.head_in,
                &self.d_head_out,
                &mut self.grad.head,
                Some(&mut self.d_head_in[..tr.head_in.len()]),
            );
        }

        self.d_inputs.fill(0.0);
        for (k, cell) in model.cells().iter().enumerate() {
            let ct = &tr.cells[k];
            self.dh.copy_from_slice(&self.d_head_in[k * h..(k + 1) * h]);
            self.dc.fill(0.0);
            for t in (0..steps).rev() {
                cell.step_backward(
                    &tr.inputs[t * h..(t + 1) * h],
                    &ct.h[t * h..(t + 1) * h],
                    &ct.c[t * h..(t + 1) * h],
                    &ct.gates[t * 4 * h..(t + 1) * 4 * h],
                    &ct.tanh_c[t * h..(t + 1) * h],
                    &mut self.dh,
                    &mut self.dc,
                    &mut self.dz,
                    &mut self.d_inputs[t * h..(t + 1) * h],
                    &mut self.grad.cells[k],
                );
            }
        }

        for t in 0..steps {
            for j in 0..h {
                self.d_pre[j] = if tr.pre[t * h + j] > 0.0 {
                    self.d_inputs[t * h + j]
                } else {
                    0.0
                };
            }
            model.input_layer().backward(
                &window[t * d..(t + 1) * d],
                &self.d_pre,
                &mut self.grad.input,
                None,
            );
        }
    }
}

/// Mean loss over `batch` and its gradient for every parameter.
pub fn gradients<E: Examples + ?Sized>(
    model: &Model,
    batch: &E,
    kind: LossKind,
) -> Result<(f64, Model)> {
    check_kind(model, kind)?;
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut bp = Backprop::new(model);
    let mut loss = 0.0;
    for i in 0..batch.len() {
        loss += bp.accumulate(model, batch.window(i), batch.target(i), scale)?;
    }
    Ok((loss, bp.into_grad()))
}

/// Mean loss over `batch` without gradients.
pub fn batch_loss<E: Examples + ?Sized>(model: &Model, batch: &E, kind: LossKind) -> Result<f64> {
    check_kind(model, kind)?;
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let mut trace = Trace::new(model);
    let mut total = 0.0;
    for i in 0..batch.len() {
        let w = batch.window(i);
        model.check_window(w)?;
        model.run(w, &mut trace);
        let y = &trace.head_out;
        total += match batch.target(i) {
            Target::Readiness(label) => (sigmoid(y[0]) - label).powi(2),
            Target::Times(t) => {
                let p = model.decode(y);
                if kind == LossKind::MinOfK {
                    let best = p.closest_index(&t);
                    let m = &p.modes()[best];
                    m.times.l1(&t) - m.prob.max(PROB_FLOOR).ln()
                } else {
                    p.most_probable().l1(&t)
                }
            }
        };
    }
    Ok(total / batch.len() as f64)
}
