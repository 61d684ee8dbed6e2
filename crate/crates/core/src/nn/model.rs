//! The decision network: a recurrent core over the per-tick radio sequence,
//! whose final hidden state is concatenated with the static features and
//! fed through a dense head ending in a linear 5-way output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cells::{lstm_step_cached, xavier, Activation, LstmCache, LstmParams, LstmState, RnnParams};
use super::tensor::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `input × output`.
    pub weight: Matrix,
    /// `1 × output`.
    pub bias: Matrix,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

impl MlpParams {
    /// `sizes = [input, hidden.., output]`; hidden layers use `hidden_act`,
    /// the last layer is linear.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden_act: Activation, rng: &mut R) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| DenseLayer {
                weight: xavier(sizes[k], sizes[k + 1], rng),
                bias: Matrix::zeros(1, sizes[k + 1]),
                activation: if k + 1 == n { Activation::Linear } else { hidden_act },
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.rows)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape("dense head has no layers"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].weight.cols != pair[1].weight.rows {
                return Err(Error::shape("dense layer shapes do not chain"));
            }
        }
        for l in &self.layers {
            if l.bias.rows != 1 || l.bias.cols != l.weight.cols {
                return Err(Error::shape("dense bias width differs from layer output"));
            }
        }
        if self.layers.last().map(|l| l.activation) != Some(Activation::Linear) {
            return Err(Error::shape("final dense layer must be linear"));
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn forward_trace(&self, input: Vec<f64>) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(input);
        for l in &self.layers {
            let mut z = l.bias.data.clone();
            l.weight.accumulate_vec_mul(trace.last().expect("trace starts non-empty"), &mut z);
            z.iter_mut().for_each(|v| *v = l.activation.apply(*v));
            trace.push(z);
        }
        trace
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentKind {
    Lstm,
    Rnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum Recurrent {
    Lstm(LstmParams),
    Rnn(RnnParams),
}

impl Recurrent {
    pub fn kind(&self) -> RecurrentKind {
        match self {
            Recurrent::Lstm(_) => RecurrentKind::Lstm,
            Recurrent::Rnn(_) => RecurrentKind::Rnn,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Recurrent::Lstm(p) => p.input_dim(),
            Recurrent::Rnn(p) => p.input_dim(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match self {
            Recurrent::Lstm(p) => p.hidden_dim(),
            Recurrent::Rnn(p) => p.hidden_dim(),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub recurrent: RecurrentKind,
    pub hidden: usize,
    pub head_layers: Vec<usize>,
    pub head_activation: Activation,
    pub paper_exact_cell_update: bool,
    pub recurrent_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            recurrent: RecurrentKind::Lstm,
            hidden: 16,
            head_layers: vec![12, 8],
            head_activation: Activation::Tanh,
            paper_exact_cell_update: false,
            recurrent_bias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepMobilityModel {
    pub recurrent: Recurrent,
    pub head: MlpParams,
    pub static_dim: usize,
}

/// Forward intermediates for one sequence.
enum CoreTrace {
    Lstm(Vec<LstmCache>),
    Rnn { xs: Vec<Vec<f64>>, hs: Vec<Vec<f64>> },
}

impl DeepMobilityModel {
    pub fn new<R: Rng + ?Sized>(
        cfg: &ModelConfig,
        seq_dim: usize,
        static_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let recurrent = match cfg.recurrent {
            RecurrentKind::Lstm => {
                let mut p = LstmParams::new(seq_dim, cfg.hidden, rng);
                p.paper_exact_cell_update = cfg.paper_exact_cell_update;
                p.use_bias = cfg.recurrent_bias;
                Recurrent::Lstm(p)
            }
            RecurrentKind::Rnn => {
                let mut p = RnnParams::new(seq_dim, cfg.hidden, rng);
                p.use_bias = cfg.recurrent_bias;
                Recurrent::Rnn(p)
            }
        };
        let mut sizes = vec![cfg.hidden + static_dim];
        sizes.extend(&cfg.head_layers);
        sizes.push(output_dim);
        let head = MlpParams::new(&sizes, cfg.head_activation, rng);
        Self { recurrent, head, static_dim }
    }

    pub fn seq_dim(&self) -> usize {
        self.recurrent.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.recurrent.hidden_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        match &self.recurrent {
            Recurrent::Lstm(p) => p.validate()?,
            Recurrent::Rnn(p) => p.validate()?,
        }
        self.head.validate()?;
        if self.head.input_dim() != self.hidden_dim() + self.static_dim {
            return Err(Error::shape(format!(
                "head input {} != hidden {} + static {}",
                self.head.input_dim(),
                self.hidden_dim(),
                self.static_dim
            )));
        }
        if self.params().iter().any(|m| !m.is_finite()) {
            return Err(Error::Numeric("model contains non-finite parameters".into()));
        }
        Ok(())
    }

    /// Every parameter tensor in a fixed order (recurrent core, then head).
    pub fn params(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = Vec::new();
        match &self.recurrent {
            Recurrent::Lstm(p) => {
                for g in p.gates() {
                    out.extend([&g.u, &g.w, &g.b]);
                }
            }
            Recurrent::Rnn(p) => out.extend([&p.u, &p.w, &p.b]),
        }
        for l in &self.head.layers {
            out.extend([&l.weight, &l.bias]);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        match &mut self.recurrent {
            Recurrent::Lstm(p) => {
                for g in p.gates_mut() {
                    out.extend([&mut g.u, &mut g.w, &mut g.b]);
                }
            }
            Recurrent::Rnn(p) => out.extend([&mut p.u, &mut p.w, &mut p.b]),
        }
        for l in &mut self.head.layers {
            out.extend([&mut l.weight, &mut l.bias]);
        }
        out
    }

    /// Whether each tensor of [`Self::params`] is updated by training.
    pub fn trainable(&self) -> Vec<bool> {
        let mut out = Vec::new();
        match &self.recurrent {
            Recurrent::Lstm(p) => {
                for _ in 0..4 {
                    out.extend([true, true, p.use_bias]);
                }
            }
            Recurrent::Rnn(p) => out.extend([true, true, p.use_bias]),
        }
        for _ in &self.head.layers {
            out.extend([true, true]);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|m| m.len()).sum()
    }

    fn check_inputs(&self, seq: &[f64], stat: &[f64]) -> Result<usize> {
        let d = self.seq_dim();
        if seq.is_empty() || d == 0 || !seq.len().is_multiple_of(d) {
            return Err(Error::shape(format!(
                "sequence of {} values is not a non-empty multiple of {d}",
                seq.len()
            )));
        }
        if stat.len() != self.static_dim {
            return Err(Error::shape(format!(
                "static input has {} features, model expects {}",
                stat.len(),
                self.static_dim
            )));
        }
        Ok(seq.len() / d)
    }

    fn run_core(&self, seq: &[f64]) -> Result<(Vec<f64>, CoreTrace)> {
        let d = self.seq_dim();
        match &self.recurrent {
            Recurrent::Lstm(p) => {
                let mut state = LstmState::zeros(p.hidden_dim());
                let mut caches = Vec::with_capacity(seq.len() / d);
                for x in seq.chunks_exact(d) {
                    let (next, cache) = lstm_step_cached(p, &state, x)?;
                    caches.push(cache);
                    state = next;
                }
                Ok((state.h, CoreTrace::Lstm(caches)))
            }
            Recurrent::Rnn(p) => {
                let mut h = vec![0.0; p.hidden_dim()];
                let mut xs = Vec::new();
                let mut hs = vec![h.clone()];
                for x in seq.chunks_exact(d) {
                    h = super::cells::rnn_step(p, &h, x)?;
                    xs.push(x.to_vec());
                    hs.push(h.clone());
                }
                Ok((h, CoreTrace::Rnn { xs, hs }))
            }
        }
    }

    /// Raw output scores for one sample.
    ///
    /// `seq` holds `T ≥ 1` time steps of `seq_dim` values each, flattened
    /// row-major; the core starts from a zero state.
    pub fn forward(&self, seq: &[f64], stat: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(seq, stat)?;
        let (h, _) = self.run_core(seq)?;
        let mut input = h;
        input.extend_from_slice(stat);
        let trace = self.head.forward_trace(input);
        Ok(trace.last().cloned().unwrap_or_default())
    }

    /// Adds `scale · ∂L/∂θ` of one sample to `grads`, where
    /// `L = ½·Σ(scores − onehot(label))²`. Returns the unscaled sample loss
    /// and the scores.
    fn accumulate_sample_grad(
        &self,
        seq: &[f64],
        stat: &[f64],
        label: usize,
        scale: f64,
        grads: &mut [Matrix],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_inputs(seq, stat)?;
        if label >= self.output_dim() {
            return Err(Error::data(format!("label {label} outside model outputs")));
        }
        let (h, core) = self.run_core(seq)?;
        let hidden = h.len();
        let mut input = h;
        input.extend_from_slice(stat);
        let trace = self.head.forward_trace(input);
        let scores = trace.last().cloned().unwrap_or_default();
        let mut loss = 0.0;
        let mut delta: Vec<f64> = scores
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let e = s - if k == label { 1.0 } else { 0.0 };
                loss += 0.5 * e * e;
                e * scale
            })
            .collect();

        let n_core = match &self.recurrent {
            Recurrent::Lstm(_) => 12,
            Recurrent::Rnn(_) => 3,
        };
        // Head, last layer first.
        for (k, layer) in self.head.layers.iter().enumerate().rev() {
            let out = &trace[k + 1];
            let inp = &trace[k];
            for (d, &y) in delta.iter_mut().zip(out) {
                *d *= layer.activation.derivative_from_output(y);
            }
            grads[n_core + 2 * k].accumulate_outer(inp, &delta);
            grads[n_core + 2 * k + 1].add_assign(&Matrix::row_vector(delta.clone()));
            let mut back = vec![0.0; inp.len()];
            layer.weight.accumulate_mul_transposed(&delta, &mut back);
            delta = back;
        }
        let dh_final: Vec<f64> = delta[..hidden].to_vec();

        match (&self.recurrent, core) {
            (Recurrent::Lstm(p), CoreTrace::Lstm(caches)) => {
                lstm_backward(p, &caches, dh_final, &mut grads[..12]);
            }
            (Recurrent::Rnn(p), CoreTrace::Rnn { xs, hs }) => {
                rnn_backward(p, &xs, &hs, dh_final, &mut grads[..3]);
            }
            _ => unreachable!("trace kind always matches the recurrent kind"),
        }
        Ok((loss, scores))
    }

    pub fn zero_grads(&self) -> Vec<Matrix> {
        self.params().iter().map(|m| m.zeros_like()).collect()
    }
}

/// BPTT through the LSTM, gradients laid out as `[U, W, b]` per gate in
/// forget/input/cell/output order.
fn lstm_backward(p: &LstmParams, caches: &[LstmCache], mut dh: Vec<f64>, grads: &mut [Matrix]) {
    let n = p.hidden_dim();
    let mut dc_next = vec![0.0; n];
    let gates = p.gates();
    for cache in caches.iter().rev() {
        let mut da = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut dc_prev = vec![0.0; n];
        for k in 0..n {
            let dc = dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]) + dc_next[k];
            let d_o = dh[k] * cache.tanh_c[k];
            let dz = if p.paper_exact_cell_update { dc * cache.c[k] * (1.0 - cache.c[k]) } else { dc };
            let df = dz * cache.c_prev[k];
            let di = dz * cache.g[k];
            let dg = dz * cache.i[k];
            dc_prev[k] = dz * cache.f[k];
            da[0][k] = df * cache.f[k] * (1.0 - cache.f[k]);
            da[1][k] = di * cache.i[k] * (1.0 - cache.i[k]);
            da[2][k] = dg * (1.0 - cache.g[k] * cache.g[k]);
            da[3][k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
        }
        let mut dh_prev = vec![0.0; n];
        for (gi, gate) in gates.iter().enumerate() {
            grads[3 * gi].accumulate_outer(&cache.x, &da[gi]);
            grads[3 * gi + 1].accumulate_outer(&cache.h_prev, &da[gi]);
            if p.use_bias {
                for (b, d) in grads[3 * gi + 2].data.iter_mut().zip(&da[gi]) {
                    *b += d;
                }
            }
            gate.w.accumulate_mul_transposed(&da[gi], &mut dh_prev);
        }
        dh = dh_prev;
        dc_next = dc_prev;
    }
}

fn rnn_backward(p: &RnnParams, xs: &[Vec<f64>], hs: &[Vec<f64>], mut dh: Vec<f64>, grads: &mut [Matrix]) {
    for t in (0..xs.len()).rev() {
        let h = &hs[t + 1];
        let dz: Vec<f64> = dh.iter().zip(h).map(|(d, h)| d * (1.0 - h * h)).collect();
        grads[0].accumulate_outer(&xs[t], &dz);
        grads[1].accumulate_outer(&hs[t], &dz);
        if p.use_bias {
            for (b, d) in grads[2].data.iter_mut().zip(&dz) {
                *b += d;
            }
        }
        let mut back = vec![0.0; dh.len()];
        p.w.accumulate_mul_transposed(&dz, &mut back);
        dh = back;
    }
}

/// One supervised example: flattened `T × seq_dim` sequence, static
/// features and the target class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub seq: Vec<f64>,
    pub stat: Vec<f64>,
    pub label: usize,
}

/// Gradients, one tensor per entry of [`DeepMobilityModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Matrix>,
}

/// Mean over the batch of `½·Σ(scores − onehot(label))²` and its gradient.
pub fn loss_and_grad(model: &DeepMobilityModel, batch: &[&Sample]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::data("empty batch"));
    }
    let mut grads = model.zero_grads();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for s in batch {
        let (loss, _) = model.accumulate_sample_grad(&s.seq, &s.stat, s.label, scale, &mut grads)?;
        total += loss;
    }
    Ok((total * scale, Gradients { tensors: grads }))
}

/// Batch loss and accuracy without gradients.
pub fn evaluate(model: &DeepMobilityModel, samples: &[Sample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::data("empty evaluation set"));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in samples {
        let scores = model.forward(&s.seq, &s.stat)?;
        loss += scores
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let e = v - if k == s.label { 1.0 } else { 0.0 };
                0.5 * e * e
            })
            .sum::<f64>();
        if argmax(&scores) == s.label {
            correct += 1;
        }
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
