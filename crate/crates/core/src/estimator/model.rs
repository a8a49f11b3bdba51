//! Real-valued single-layer model `eta(x) = ||x^T W||^2`.
//!
//! A training pattern `v` enters as `x = [Re(v); Im(v)]` and the weight
//! matrix `W` has two columns, one per hidden neuron. With `W` laid out as
//!
//! ```text
//! R = [ Re(h)  Im(h) ]
//!     [ Im(h) -Re(h) ]
//! ```
//!
//! the output equals `|v^H h|^2` exactly.

use crate::bdris::TrpVector;
use crate::channel::CascadedChannel;
use crate::error::{Error, Result};

/// `[Re(v); Im(v)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealInput {
    entries: Vec<f64>,
}

impl RealInput {
    pub fn from_entries(entries: Vec<f64>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Trainable `(2n) x 2` weights, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: Vec<[f64; 2]>,
}

impl WeightMatrix {
    pub fn from_rows(rows: Vec<[f64; 2]>) -> Result<Self> {
        if rows.is_empty() || !rows.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "weight matrix needs an even, nonzero row count, got {}",
                rows.len()
            )));
        }
        if rows.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weight entries must be finite"));
        }
        Ok(Self { rows })
    }

    pub fn zeros(n_rows: usize) -> Result<Self> {
        Self::from_rows(vec![[0.0; 2]; n_rows])
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col]
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|w| w.is_finite())
    }

    /// `W Q` for a 2x2 matrix `q` given row-major.
    pub fn right_mul(&self, q: [[f64; 2]; 2]) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|[a, b]| [a * q[0][0] + b * q[1][0], a * q[0][1] + b * q[1][1]])
            .collect();
        Self { rows }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.rows.iter().flatten().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// The structured real weight layout of a cascaded channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RealChannelMatrix {
    weights: WeightMatrix,
}

impl RealChannelMatrix {
    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn into_weights(self) -> WeightMatrix {
        self.weights
    }

    /// Whether column 2 is the swap-negate image of column 1.
    pub fn has_block_structure(&self) -> bool {
        let n = self.weights.n_rows() / 2;
        let rows = self.weights.rows();
        (0..n).all(|i| rows[i][1] == rows[n + i][0] && rows[n + i][1] == -rows[i][0])
    }
}

pub fn embed(v: &TrpVector) -> RealInput {
    let mut entries = Vec::with_capacity(2 * v.len());
    entries.extend(v.entries().iter().map(|z| z.re));
    entries.extend(v.entries().iter().map(|z| z.im));
    RealInput { entries }
}

pub fn structured_weights(h: &CascadedChannel) -> RealChannelMatrix {
    let n = h.len();
    let mut rows = Vec::with_capacity(2 * n);
    rows.extend(h.entries().iter().map(|z| [z.re, z.im]));
    rows.extend(h.entries().iter().map(|z| [z.im, -z.re]));
    RealChannelMatrix {
        weights: WeightMatrix { rows },
    }
}

/// Hidden neuron values `[a, b] = x^T W`.
#[inline]
pub(crate) fn hidden(x: &[f64], rows: &[[f64; 2]]) -> (f64, f64) {
    x.iter().zip(rows).fold((0.0, 0.0), |(a, b), (xi, w)| (a + xi * w[0], b + xi * w[1]))
}

pub fn forward(x: &RealInput, w: &WeightMatrix) -> Result<f64> {
    check_dims(x, w)?;
    let (a, b) = hidden(&x.entries, &w.rows);
    Ok(a * a + b * b)
}

fn check_dims(x: &RealInput, w: &WeightMatrix) -> Result<()> {
    if x.len() != w.n_rows() {
        return Err(Error::invalid(format!(
            "input length {} does not match weight rows {}",
            x.len(),
            w.n_rows()
        )));
    }
    Ok(())
}

fn check_batch(inputs: &[RealInput], targets: &[f64], w: &WeightMatrix) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    inputs.iter().try_for_each(|x| check_dims(x, w))
}

/// Mean squared error between targets and model outputs.
pub fn loss(inputs: &[RealInput], targets: &[f64], w: &WeightMatrix) -> Result<f64> {
    check_batch(inputs, targets, w)?;
    let total: f64 = inputs
        .iter()
        .zip(targets)
        .map(|(x, t)| {
            let (a, b) = hidden(&x.entries, &w.rows);
            let r = t - (a * a + b * b);
            r * r
        })
        .sum();
    Ok(total / inputs.len() as f64)
}

/// `dL/dW = (4 / B) sum_d (eta(x_d) - t_d) x_d x_d^T W`.
pub fn gradient(inputs: &[RealInput], targets: &[f64], w: &WeightMatrix) -> Result<WeightMatrix> {
    check_batch(inputs, targets, w)?;
    let mut grad = vec![[0.0; 2]; w.n_rows()];
    let scale = 4.0 / inputs.len() as f64;
    for (x, t) in inputs.iter().zip(targets) {
        accumulate_gradient(&x.entries, *t, &w.rows, scale, &mut grad);
    }
    Ok(WeightMatrix { rows: grad })
}

/// Adds one sample's gradient contribution and returns its squared residual.
#[inline]
pub(crate) fn accumulate_gradient(
    x: &[f64],
    target: f64,
    rows: &[[f64; 2]],
    scale: f64,
    grad: &mut [[f64; 2]],
) -> f64 {
    let (a, b) = hidden(x, rows);
    let r = a * a + b * b - target;
    let (ga, gb) = (scale * r * a, scale * r * b);
    for (g, xi) in grad.iter_mut().zip(x) {
        g[0] += xi * ga;
        g[1] += xi * gb;
    }
    r * r
}
