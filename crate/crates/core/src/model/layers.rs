use rand::Rng;

use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, never negative.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Dot product with four interleaved partial sums.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &mut y[..n]);
    for i in 0..n {
        y[i] += alpha * x[i];
    }
}

fn uniform(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// Fully connected layer, `weight` row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weight: uniform(rng, inputs * outputs, bound),
            bias: uniform(rng, outputs, bound),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weight[r * self.inputs..(r + 1) * self.inputs]
    }

    pub fn forward(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.bias[r] + dot(self.row(r), x);
        }
    }

    /// Accumulates parameter gradients into `grad` and, if given, input gradients into `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, mut dx: Option<&mut [f64]>) {
        for (r, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[r] += g;
            axpy(
                g,
                x,
                &mut grad.weight[r * self.inputs..(r + 1) * self.inputs],
            );
            if let Some(dx) = dx.as_deref_mut() {
                axpy(g, self.row(r), dx);
            }
        }
    }
}

/// LSTM cell. Gate blocks are stacked as input, forget, candidate, output:
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
/// g = tanh(W_g x + U_g h + b_g) o = σ(W_o x + U_o h + b_o)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
///
/// Weights are stored input-major: row `j` of `w_input` holds the `4H` gate
/// weights of input `j`, so `W x` is a sum of scaled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `input_dim x 4H`.
    pub w_input: Vec<f64>,
    /// `H x 4H`.
    pub w_hidden: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Activated gate values and new state from one step.
pub(crate) struct StepOut<'a> {
    pub gates: &'a mut [f64],
    pub c: &'a mut [f64],
    pub h: &'a mut [f64],
    pub tanh_c: &'a mut [f64],
}

impl LstmCell {
    /// Uniform init in `±1/sqrt(H)` with the forget-gate bias shifted by +1.
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let g = 4 * hidden_dim;
        let mut bias = uniform(rng, g, bound);
        for b in &mut bias[hidden_dim..2 * hidden_dim] {
            *b += 1.0;
        }
        LstmCell {
            input_dim,
            hidden_dim,
            w_input: uniform(rng, g * input_dim, bound),
            w_hidden: uniform(rng, g * hidden_dim, bound),
            bias,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        LstmCell {
            input_dim,
            hidden_dim,
            w_input: vec![0.0; g * input_dim],
            w_hidden: vec![0.0; g * hidden_dim],
            bias: vec![0.0; g],
        }
    }

    /// One step from state `(h, c)` on input `x`; returns `(h', c')`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let hd = self.hidden_dim;
        if x.len() != self.input_dim || h.len() != hd || c.len() != hd {
            return Err(Error::Shape(format!(
                "cell expects input {} and state {hd}, got {}, {}, {}",
                self.input_dim,
                x.len(),
                h.len(),
                c.len()
            )));
        }
        if x.iter().chain(h).chain(c).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LSTM cell input".into()));
        }
        let mut gates = vec![0.0; 4 * hd];
        let mut c_new = vec![0.0; hd];
        let mut h_new = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        self.step_into(
            x,
            h,
            c,
            StepOut {
                gates: &mut gates,
                c: &mut c_new,
                h: &mut h_new,
                tanh_c: &mut tanh_c,
            },
        );
        Ok((h_new, c_new))
    }

    pub(crate) fn step_into(&self, x: &[f64], h: &[f64], c: &[f64], out: StepOut<'_>) {
        let hd = self.hidden_dim;
        let g4 = 4 * hd;
        let z = out.gates;
        z.copy_from_slice(&self.bias);
        for (j, &xj) in x.iter().enumerate() {
            axpy(xj, &self.w_input[j * g4..(j + 1) * g4], z);
        }
        for (j, &hj) in h.iter().enumerate() {
            axpy(hj, &self.w_hidden[j * g4..(j + 1) * g4], z);
        }
        for v in &mut z[..2 * hd] {
            *v = sigmoid(*v);
        }
        for v in &mut z[2 * hd..3 * hd] {
            *v = v.tanh();
        }
        for v in &mut z[3 * hd..] {
            *v = sigmoid(*v);
        }
        let (i, rest) = z.split_at(hd);
        let (f, rest) = rest.split_at(hd);
        let (g, o) = rest.split_at(hd);
        for j in 0..hd {
            let cj = f[j] * c[j] + i[j] * g[j];
            out.c[j] = cj;
            out.tanh_c[j] = cj.tanh();
            out.h[j] = o[j] * out.tanh_c[j];
        }
    }

    /// Backward through one step.
    ///
    /// `dh` and `dc` hold the gradients flowing into `h'` and `c'`; on return
    /// they hold the gradients for the previous `h` and `c`. Input gradients
    /// are accumulated into `dx`; `dz` is scratch of length `4H`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn step_backward(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        gates: &[f64],
        tanh_c: &[f64],
        dh: &mut [f64],
        dc: &mut [f64],
        dz: &mut [f64],
        dx: &mut [f64],
        grad: &mut LstmCell,
    ) {
        let hd = self.hidden_dim;
        for j in 0..hd {
            let (i, f, g, o) = (
                gates[j],
                gates[hd + j],
                gates[2 * hd + j],
                gates[3 * hd + j],
            );
            let tc = tanh_c[j];
            let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dcj * g * i * (1.0 - i);
            dz[hd + j] = dcj * c_prev[j] * f * (1.0 - f);
            dz[2 * hd + j] = dcj * i * (1.0 - g * g);
            dz[3 * hd + j] = dh[j] * tc * o * (1.0 - o);
            dc[j] = dcj * f;
        }
        let g4 = 4 * hd;
        for (r, d) in grad.bias.iter_mut().zip(dz.iter()) {
            *r += d;
        }
        for (j, &xj) in x.iter().enumerate() {
            let row = j * g4..(j + 1) * g4;
            axpy(xj, dz, &mut grad.w_input[row.clone()]);
            dx[j] += dot(&self.w_input[row], dz);
        }
        for (j, &hj) in h_prev.iter().enumerate() {
            let row = j * g4..(j + 1) * g4;
            axpy(hj, dz, &mut grad.w_hidden[row.clone()]);
            dh[j] = dot(&self.w_hidden[row], dz);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cell_stays_at_rest() {
        let cell = LstmCell::zeros(3, 4);
        let (h, c) = cell.step(&[0.3, -1.0, 2.0], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn saturated_gates_pass_state_through() {
        let mut cell = LstmCell::zeros(1, 1);
        // i, f, o saturate at 1; candidate bias 0.5
        cell.bias = vec![50.0, 50.0, 0.5, 50.0];
        let (h, c) = cell.step(&[0.0], &[0.0], &[0.7]).unwrap();
        let expected_c = 0.7 + 0.5f64.tanh();
        assert!((c[0] - expected_c).abs() < 1e-12);
        assert!((h[0] - expected_c.tanh()).abs() < 1e-12);
    }

    #[test]
    fn single_unit_matches_scalar_evaluation() {
        let mut cell = LstmCell::zeros(2, 1);
        cell.w_input = vec![0.1, 0.3, -0.5, 0.7, -0.2, 0.4, 0.6, -0.8];
        cell.w_hidden = vec![0.9, -1.0, 1.1, -1.2];
        cell.bias = vec![0.01, 0.02, 0.03, 0.04];
        let (x, h, c) = ([0.5, -1.5], 0.25, -0.4);
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = s(0.1 * x[0] - 0.2 * x[1] + 0.9 * h + 0.01);
        let f = s(0.3 * x[0] + 0.4 * x[1] - 1.0 * h + 0.02);
        let g = (-0.5 * x[0] + 0.6 * x[1] + 1.1 * h + 0.03).tanh();
        let o = s(0.7 * x[0] - 0.8 * x[1] - 1.2 * h + 0.04);
        let c_new = f * c + i * g;
        let h_new = o * c_new.tanh();
        let (h_out, c_out) = cell.step(&x, &[h], &[c]).unwrap();
        assert!((c_out[0] - c_new).abs() < 1e-12);
        assert!((h_out[0] - h_new).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cell = LstmCell::new(2, 3, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(
            cell.step(&[f64::NAN, 0.0], &[0.0; 3], &[0.0; 3]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            cell.step(&[0.0], &[0.0; 3], &[0.0; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn activations() {
        assert_eq!(softplus(-1000.0), 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(30.0) - 30.0).abs() < 1e-12);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }
}
