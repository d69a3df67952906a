//! LSTM stack with a linear dense head: forward pass with cached activations
//! and backpropagation through time.
//!
//! Per layer and step, with `z = [x_t; h_{t-1}]`:
//!
//! ```text
//! i = σ(W_i z + b_i)   f = σ(W_f z + b_f)   o = σ(W_o z + b_o)   g = tanh(W_c z + b_c)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Everything here works in the scaled space; the scaler is applied by callers.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense `rows × cols` weight matrix (row-major) plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `out = W·x + b` where `x` is the concatenation of `parts`.
    fn apply(&self, parts: [&[f64]; 2], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let (w0, w1) = row.split_at(parts[0].len());
            let mut acc = self.bias[r];
            acc += w0.iter().zip(parts[0]).map(|(w, x)| w * x).sum::<f64>();
            acc += w1.iter().zip(parts[1]).map(|(w, x)| w * x).sum::<f64>();
            *o = acc;
        }
    }

    /// Accumulates `dW += d ⊗ x`, `db += d` and `dx += Wᵀ d` (split over parts).
    fn backprop(&self, grad: &mut Affine, d: &[f64], parts: [&[f64]; 2], dparts: [&mut [f64]; 2]) {
        let [dx0, dx1] = dparts;
        let split = parts[0].len();
        for (r, &dr) in d.iter().enumerate() {
            if dr == 0.0 {
                continue;
            }
            grad.bias[r] += dr;
            let base = r * self.cols;
            for (c, &x) in parts[0].iter().enumerate() {
                grad.weights[base + c] += dr * x;
                dx0[c] += self.weights[base + c] * dr;
            }
            for (c, &x) in parts[1].iter().enumerate() {
                grad.weights[base + split + c] += dr * x;
                dx1[c] += self.weights[base + split + c] * dr;
            }
        }
    }
}

/// The four gates of one recurrent layer, each `hidden × (input + hidden)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    pub input_gate: Affine,
    pub forget_gate: Affine,
    pub output_gate: Affine,
    pub candidate: Affine,
}

impl LstmLayer {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let g = || Affine::zeros(hidden_size, input_size + hidden_size);
        Self {
            input_size,
            hidden_size,
            input_gate: g(),
            forget_gate: g(),
            output_gate: g(),
            candidate: g(),
        }
    }

    pub(crate) fn gates(&self) -> [&Affine; 4] {
        [
            &self.input_gate,
            &self.forget_gate,
            &self.output_gate,
            &self.candidate,
        ]
    }

    pub(crate) fn gates_mut(&mut self) -> [&mut Affine; 4] {
        [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.candidate,
        ]
    }
}

/// Recurrent stack and dense output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<LstmLayer>,
    pub dense: Affine,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Default)]
struct Step {
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct LayerTrace {
    inputs: Vec<Vec<f64>>,
    steps: Vec<Step>,
    /// Inverted-dropout masks on this layer's outputs, per step.
    masks: Option<Vec<Vec<f64>>>,
}

/// Activations recorded by [`Network::forward_trace`].
#[derive(Debug, Clone, Default)]
pub struct Trace {
    layers: Vec<LayerTrace>,
    top: Vec<f64>,
    pub output: Vec<f64>,
}

impl Network {
    pub fn zeros(layer_sizes: &[usize], output_size: usize) -> Self {
        let mut layers = Vec::with_capacity(layer_sizes.len());
        let mut input = 1;
        for &h in layer_sizes {
            layers.push(LstmLayer::zeros(input, h));
            input = h;
        }
        Self {
            layers,
            dense: Affine::zeros(output_size, input),
        }
    }

    pub fn output_size(&self) -> usize {
        self.dense.rows
    }

    /// All parameter buffers in a fixed order.
    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::with_capacity(self.layers.len() * 8 + 2);
        for layer in &self.layers {
            for g in layer.gates() {
                out.push(&g.weights);
                out.push(&g.bias);
            }
        }
        out.push(&self.dense.weights);
        out.push(&self.dense.bias);
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::with_capacity(self.layers.len() * 8 + 2);
        for layer in &mut self.layers {
            for g in layer.gates_mut() {
                out.push(&mut g.weights);
                out.push(&mut g.bias);
            }
        }
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for b in z.buffers_mut() {
            b.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    /// Inference forward pass (no dropout).
    pub fn predict(&self, sequence: &[f64]) -> Vec<f64> {
        self.run::<rand_chacha::ChaCha8Rng>(sequence, None).output
    }

    /// Forward pass keeping every activation for [`Network::backward`].
    /// Dropout is applied when `dropout` carries a rate and an RNG.
    pub fn forward_trace<R: Rng>(&self, sequence: &[f64], dropout: Option<(f64, &mut R)>) -> Trace {
        self.run(sequence, dropout)
    }

    fn run<R: Rng>(&self, sequence: &[f64], mut dropout: Option<(f64, &mut R)>) -> Trace {
        let mut xs: Vec<Vec<f64>> = sequence.iter().map(|&x| vec![x]).collect();
        let mut trace = Trace::default();
        for layer in &self.layers {
            let h_size = layer.hidden_size;
            let mut h_prev = vec![0.0; h_size];
            let mut c_prev = vec![0.0; h_size];
            let mut lt = LayerTrace {
                inputs: xs.clone(),
                steps: Vec::with_capacity(xs.len()),
                masks: None,
            };
            let mut outs = Vec::with_capacity(xs.len());
            let mut masks = Vec::new();
            for x in &xs {
                let mut s = Step {
                    i: vec![0.0; h_size],
                    f: vec![0.0; h_size],
                    o: vec![0.0; h_size],
                    g: vec![0.0; h_size],
                    c: vec![0.0; h_size],
                    tanh_c: vec![0.0; h_size],
                    h: vec![0.0; h_size],
                };
                layer.input_gate.apply([x, &h_prev], &mut s.i);
                layer.forget_gate.apply([x, &h_prev], &mut s.f);
                layer.output_gate.apply([x, &h_prev], &mut s.o);
                layer.candidate.apply([x, &h_prev], &mut s.g);
                #[allow(clippy::needless_range_loop)]
                for k in 0..h_size {
                    s.i[k] = sigmoid(s.i[k]);
                    s.f[k] = sigmoid(s.f[k]);
                    s.o[k] = sigmoid(s.o[k]);
                    s.g[k] = s.g[k].tanh();
                    s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
                    s.tanh_c[k] = s.c[k].tanh();
                    s.h[k] = s.o[k] * s.tanh_c[k];
                }
                h_prev.clone_from(&s.h);
                c_prev.clone_from(&s.c);
                let mut out = s.h.clone();
                if let Some((rate, rng)) = dropout.as_mut() {
                    let keep = 1.0 - *rate;
                    let mask: Vec<f64> = (0..h_size)
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    out.iter_mut().zip(&mask).for_each(|(o, m)| *o *= m);
                    masks.push(mask);
                }
                outs.push(out);
                lt.steps.push(s);
            }
            if dropout.is_some() {
                lt.masks = Some(masks);
            }
            trace.layers.push(lt);
            xs = outs;
        }
        trace.top = xs.pop().unwrap_or_default();
        let mut y = vec![0.0; self.dense.rows];
        self.dense.apply([&trace.top, &[]], &mut y);
        trace.output = y;
        trace
    }

    /// Backpropagates `d_output` (∂loss/∂output) through a recorded trace,
    /// accumulating into `grad`.
    pub fn backward(&self, trace: &Trace, d_output: &[f64], grad: &mut Network) {
        let top_len = trace.top.len();
        let mut d_top = vec![0.0; top_len];
        self.dense.backprop(
            &mut grad.dense,
            d_output,
            [&trace.top, &[]],
            [&mut d_top, &mut []],
        );

        let steps = trace.layers.first().map_or(0, |l| l.steps.len());
        // ∂loss/∂(post-dropout outputs) of the current layer, per step.
        let mut d_out: Vec<Vec<f64>> = Vec::with_capacity(steps);
        for t in 0..steps {
            d_out.push(if t + 1 == steps {
                d_top.clone()
            } else {
                vec![0.0; top_len]
            });
        }

        for (li, layer) in self.layers.iter().enumerate().rev() {
            let lt = &trace.layers[li];
            let gl = &mut grad.layers[li];
            let h_size = layer.hidden_size;
            let mut dh_next = vec![0.0; h_size];
            let mut dc_next = vec![0.0; h_size];
            let mut d_in: Vec<Vec<f64>> = vec![vec![0.0; layer.input_size]; steps];
            let zeros = vec![0.0; h_size];
            let mut da = [
                vec![0.0; h_size],
                vec![0.0; h_size],
                vec![0.0; h_size],
                vec![0.0; h_size],
            ];

            for t in (0..steps).rev() {
                let s = &lt.steps[t];
                let c_prev = if t > 0 { &lt.steps[t - 1].c } else { &zeros };
                let h_prev = if t > 0 { &lt.steps[t - 1].h } else { &zeros };
                for k in 0..h_size {
                    let mut dh = d_out[t][k];
                    if let Some(m) = &lt.masks {
                        dh *= m[t][k];
                    }
                    dh += dh_next[k];
                    let d_o = dh * s.tanh_c[k];
                    let dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                    let d_f = dc * c_prev[k];
                    let d_i = dc * s.g[k];
                    let d_g = dc * s.i[k];
                    dc_next[k] = dc * s.f[k];
                    da[0][k] = d_i * s.i[k] * (1.0 - s.i[k]);
                    da[1][k] = d_f * s.f[k] * (1.0 - s.f[k]);
                    da[2][k] = d_o * s.o[k] * (1.0 - s.o[k]);
                    da[3][k] = d_g * (1.0 - s.g[k] * s.g[k]);
                }
                let mut dh_prev = vec![0.0; h_size];
                let x = &lt.inputs[t];
                for ((gate, ggrad), d) in layer.gates().into_iter().zip(gl.gates_mut()).zip(&da) {
                    gate.backprop(ggrad, d, [x, h_prev], [&mut d_in[t], &mut dh_prev]);
                }
                dh_next = dh_prev;
            }
            d_out = d_in;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_output() {
        let net = Network::zeros(&[4, 3], 2);
        assert_eq!(net.predict(&[1.0, -2.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_cell_matches_closed_form() {
        // One unit, one input, one step: z = [x, h0 = 0].
        let mut net = Network::zeros(&[1], 1);
        let l = &mut net.layers[0];
        l.input_gate.weights = vec![0.5, 0.0];
        l.input_gate.bias = vec![0.1];
        l.forget_gate.weights = vec![-0.3, 0.0];
        l.forget_gate.bias = vec![1.0];
        l.output_gate.weights = vec![0.8, 0.0];
        l.output_gate.bias = vec![-0.2];
        l.candidate.weights = vec![1.2, 0.0];
        l.candidate.bias = vec![0.05];
        net.dense.weights = vec![2.0];
        net.dense.bias = vec![0.3];

        let x: f64 = 0.7;
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = s(0.5 * x + 0.1);
        let o = s(0.8 * x - 0.2);
        let g = (1.2 * x + 0.05).tanh();
        let c = i * g; // c0 = 0, forget gate has no effect
        let h = o * c.tanh();
        let expected = 2.0 * h + 0.3;
        let y = net.predict(&[x]);
        assert!((y[0] - expected).abs() < 1e-15, "{} vs {}", y[0], expected);
    }

    #[test]
    fn dropout_trace_differs_but_predict_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::zeros(&[6], 1);
        for b in net.buffers_mut() {
            b.iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
        }
        let seq = [0.2, 0.4, 0.1];
        assert_eq!(net.predict(&seq), net.predict(&seq));
        let t = net.forward_trace(&seq, Some((0.5, &mut rng)));
        assert!(t.layers[0].masks.is_some());
    }
}
