//! Activations and the two recurrent cells.
//!
//! Row-vector convention throughout: a gate pre-activation is
//! `x·U + h_prev·W + b`, with `U: input_dim × hidden` and
//! `W: hidden × hidden`.
//!
//! LSTM step:
//!
//! ```text
//! f  = σ(x·U_f + h·W_f + b_f)
//! i  = σ(x·U_i + h·W_i + b_i)
//! g  = tanh(x·U_g + h·W_g + b_g)
//! c' = f∘c + i∘g              (standard)
//! c' = σ(f∘c + i∘g)           (paper_exact_cell_update)
//! o  = σ(x·U_o + h·W_o + b_o)
//! h' = tanh(c')∘o
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Matrix;
use crate::{Error, Result};

/// Logistic function, evaluated without overflow and kept strictly inside
/// `(0, 1)` even where the exact value is not representable.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Xavier/Glorot uniform initialisation: `U(-r, r)`, `r = sqrt(6/(fan_in+fan_out))`.
pub fn xavier<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-r..=r)).collect())
}

/// One gate's weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub u: Matrix,
    pub w: Matrix,
    pub b: Matrix,
}

impl Gate {
    fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self { u: xavier(input_dim, hidden, rng), w: xavier(hidden, hidden, rng), b: Matrix::zeros(1, hidden) }
    }

    fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self { u: Matrix::zeros(input_dim, hidden), w: Matrix::zeros(hidden, hidden), b: Matrix::zeros(1, hidden) }
    }

    /// `x·U + h·W + b`.
    fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = self.b.data.clone();
        self.u.accumulate_vec_mul(x, &mut z);
        self.w.accumulate_vec_mul(h, &mut z);
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub forget: Gate,
    pub input: Gate,
    /// Candidate cell content (`C'_t`).
    pub cell: Gate,
    pub output: Gate,
    /// Wrap the cell-state update in σ, exactly as the original equation set
    /// writes it. Bounds `c` to `(0, 1)` and so limits long-term memory.
    pub paper_exact_cell_update: bool,
    /// When false, biases stay at zero and receive no updates.
    pub use_bias: bool,
}

impl LstmParams {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            forget: Gate::new(input_dim, hidden, rng),
            input: Gate::new(input_dim, hidden, rng),
            cell: Gate::new(input_dim, hidden, rng),
            output: Gate::new(input_dim, hidden, rng),
            paper_exact_cell_update: false,
            use_bias: true,
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            forget: Gate::zeros(input_dim, hidden),
            input: Gate::zeros(input_dim, hidden),
            cell: Gate::zeros(input_dim, hidden),
            output: Gate::zeros(input_dim, hidden),
            paper_exact_cell_update: false,
            use_bias: true,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forget.u.rows
    }

    pub fn hidden_dim(&self) -> usize {
        self.forget.u.cols
    }

    pub fn gates(&self) -> [&Gate; 4] {
        [&self.forget, &self.input, &self.cell, &self.output]
    }

    pub fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [&mut self.forget, &mut self.input, &mut self.cell, &mut self.output]
    }

    pub fn validate(&self) -> Result<()> {
        let (n, h) = (self.input_dim(), self.hidden_dim());
        for g in self.gates() {
            if g.u.rows != n || g.u.cols != h || g.w.rows != h || g.w.cols != h || g.b.rows != 1 || g.b.cols != h {
                return Err(Error::shape("LSTM gate shapes are inconsistent"));
            }
        }
        Ok(())
    }
}

/// `(C_t, h_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { c: vec![0.0; hidden], h: vec![0.0; hidden] }
    }
}

/// Intermediate values of one LSTM step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn check_step_shapes(input_dim: usize, hidden: usize, x: &[f64], h: &[f64], c: Option<&[f64]>) -> Result<()> {
    if x.len() != input_dim {
        return Err(Error::shape(format!("input has {} features, cell expects {input_dim}", x.len())));
    }
    if h.len() != hidden || c.is_some_and(|c| c.len() != hidden) {
        return Err(Error::shape(format!("state width differs from hidden size {hidden}")));
    }
    Ok(())
}

pub(crate) fn lstm_step_cached(p: &LstmParams, s: &LstmState, x: &[f64]) -> Result<(LstmState, LstmCache)> {
    check_step_shapes(p.input_dim(), p.hidden_dim(), x, &s.h, Some(&s.c))?;
    let f: Vec<f64> = p.forget.preactivation(x, &s.h).into_iter().map(sigmoid).collect();
    let i: Vec<f64> = p.input.preactivation(x, &s.h).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = p.cell.preactivation(x, &s.h).into_iter().map(tanh).collect();
    let o: Vec<f64> = p.output.preactivation(x, &s.h).into_iter().map(sigmoid).collect();
    let c: Vec<f64> = (0..f.len())
        .map(|k| {
            let z = f[k] * s.c[k] + i[k] * g[k];
            if p.paper_exact_cell_update {
                sigmoid(z)
            } else {
                z
            }
        })
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|&v| v.tanh()).collect();
    let h: Vec<f64> = tanh_c.iter().zip(&o).map(|(t, o)| t * o).collect();
    let next = LstmState { c: c.clone(), h };
    let cache = LstmCache { x: x.to_vec(), h_prev: s.h.clone(), c_prev: s.c.clone(), f, i, g, o, c, tanh_c };
    Ok((next, cache))
}

/// One LSTM step; returns the new state and `h_t`.
pub fn lstm_step(p: &LstmParams, s: &LstmState, x: &[f64]) -> Result<(LstmState, Vec<f64>)> {
    let (next, _) = lstm_step_cached(p, s, x)?;
    let h = next.h.clone();
    Ok((next, h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub u: Matrix,
    pub w: Matrix,
    pub b: Matrix,
    pub use_bias: bool,
}

impl RnnParams {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self { u: xavier(input_dim, hidden, rng), w: xavier(hidden, hidden, rng), b: Matrix::zeros(1, hidden), use_bias: true }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self { u: Matrix::zeros(input_dim, hidden), w: Matrix::zeros(hidden, hidden), b: Matrix::zeros(1, hidden), use_bias: true }
    }

    pub fn input_dim(&self) -> usize {
        self.u.rows
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.cols
    }

    pub fn validate(&self) -> Result<()> {
        let (n, h) = (self.input_dim(), self.hidden_dim());
        if self.w.rows != h || self.w.cols != h || self.b.rows != 1 || self.b.cols != h || self.u.rows != n {
            return Err(Error::shape("RNN shapes are inconsistent"));
        }
        Ok(())
    }
}

/// `h = tanh(x·U + h_prev·W + b)`.
pub fn rnn_step(p: &RnnParams, h_prev: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_step_shapes(p.input_dim(), p.hidden_dim(), x, h_prev, None)?;
    let mut z = p.b.data.clone();
    p.u.accumulate_vec_mul(x, &mut z);
    p.w.accumulate_vec_mul(h_prev, &mut z);
    Ok(z.into_iter().map(tanh).collect())
}
