use crate::error::{Error, Result};
use crate::features::{feature_dim, flatten_into, validate_frame, FeatureMask, FrameFeatures};
use crate::model::{Model, Prediction};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput {
    /// Index of the frame that closes the window (inclusive).
    pub end_frame: usize,
    pub timestamp_s: f64,
    pub prediction: Prediction,
}

/// Sliding-window predictor fed one frame at a time.
///
/// The first prediction comes with the frame that completes the first
/// window; after that one prediction follows every `stride` frames. Each
/// prediction sees only frames up to and including the current one.
#[derive(Debug)]
pub struct StreamPredictor<'m> {
    model: &'m Model,
    mask: FeatureMask,
    stride: usize,
    dim: usize,
    frames: usize,
    ring: Vec<f64>,
    row: Vec<f64>,
    window: Vec<f64>,
    seen: usize,
}

impl<'m> StreamPredictor<'m> {
    pub fn new(model: &'m Model, mask: FeatureMask, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("stride must be >= 1 frame".into()));
        }
        let dim = feature_dim(mask)?;
        let cfg = model.config();
        if dim != cfg.input_dim {
            return Err(Error::Shape(format!(
                "mask {mask} gives {dim} features but the model expects {}",
                cfg.input_dim
            )));
        }
        let frames = cfg.window_frames;
        Ok(StreamPredictor {
            model,
            mask,
            stride,
            dim,
            frames,
            ring: vec![0.0; frames * dim],
            row: Vec::with_capacity(dim),
            window: vec![0.0; frames * dim],
            seen: 0,
        })
    }

    pub fn frames_seen(&self) -> usize {
        self.seen
    }

    pub fn push(&mut self, frame: &FrameFeatures) -> Result<Option<StreamOutput>> {
        if let Err(v) = validate_frame(frame) {
            let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidFrame(format!(
                "frame {}: {}",
                self.seen,
                msg.join("; ")
            )));
        }
        self.row.clear();
        flatten_into(frame, self.mask, &mut self.row);
        let slot = self.seen % self.frames;
        self.ring[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(&self.row);
        self.seen += 1;
        if self.seen < self.frames || !(self.seen - self.frames).is_multiple_of(self.stride) {
            return Ok(None);
        }
        // oldest row sits right after the newest one
        let split = (self.seen % self.frames) * self.dim;
        let tail = self.ring.len() - split;
        self.window[..tail].copy_from_slice(&self.ring[split..]);
        self.window[tail..].copy_from_slice(&self.ring[..split]);
        Ok(Some(StreamOutput {
            end_frame: self.seen - 1,
            timestamp_s: frame.timestamp_s,
            prediction: self.model.forward(&self.window)?,
        }))
    }
}

/// Predictions for every window position of a recorded stream:
/// `floor((len - window) / stride) + 1` of them.
pub fn stream_predict(
    frames: &[FrameFeatures],
    model: &Model,
    mask: FeatureMask,
    stride: usize,
) -> Result<Vec<StreamOutput>> {
    let mut sp = StreamPredictor::new(model, mask, stride)?;
    if frames.len() < sp.frames {
        return Err(Error::Shape(format!(
            "stream has {} frames, shorter than one {}-frame window",
            frames.len(),
            sp.frames
        )));
    }
    let mut out = Vec::with_capacity((frames.len() - sp.frames) / stride + 1);
    for f in frames {
        if let Some(o) = sp.push(f)? {
            out.push(o);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::flatten;
    use crate::model::{ModelConfig, Variant};

    fn setup() -> (Model, FeatureMask) {
        let mask: FeatureMask = "H+S".parse().unwrap();
        let model = Model::new(ModelConfig {
            variant: Variant::BaselineLstm,
            input_dim: 14,
            hidden_dim: 3,
            ..ModelConfig::default()
        })
        .unwrap();
        (model, mask)
    }

    fn frames(n: usize) -> Vec<FrameFeatures> {
        (0..n)
            .map(|i| FrameFeatures::uniform(i as f64 / 30.0, 0.1 + 0.01 * i as f64, 0.3))
            .collect()
    }

    #[test]
    fn counts() {
        let (m, mask) = setup();
        assert_eq!(stream_predict(&frames(90), &m, mask, 1).unwrap().len(), 31);
        assert_eq!(stream_predict(&frames(120), &m, mask, 30).unwrap().len(), 3);
        assert_eq!(stream_predict(&frames(60), &m, mask, 7).unwrap().len(), 1);
        assert!(stream_predict(&frames(59), &m, mask, 1).is_err());
        assert!(stream_predict(&frames(90), &m, mask, 0).is_err());
    }

    #[test]
    fn matches_batch_windows() {
        let (m, mask) = setup();
        let fs = frames(75);
        let out = stream_predict(&fs, &m, mask, 5).unwrap();
        for o in &out {
            let start = o.end_frame + 1 - 60;
            let w: Vec<f64> = fs[start..=o.end_frame]
                .iter()
                .flat_map(|f| flatten(f, mask))
                .collect();
            assert_eq!(o.prediction, m.forward(&w).unwrap());
        }
        assert_eq!(out.last().unwrap().end_frame, 74);
    }

    #[test]
    fn constant_stream_constant_output() {
        let (m, mask) = setup();
        let fs = vec![FrameFeatures::uniform(0.0, 0.2, 0.2); 80];
        let out = stream_predict(&fs, &m, mask, 1).unwrap();
        assert!(out.windows(2).all(|w| w[0].prediction == w[1].prediction));
    }
}
