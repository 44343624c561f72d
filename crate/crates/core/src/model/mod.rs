//! Small supervised models: multinomial logistic regression and a
//! one-hidden-layer MLP, with softmax cross-entropy loss and analytic
//! gradients.

pub mod data;
pub mod optimizer;

pub use data::{dirichlet_partition, generate_synthetic, load_csv_dataset, Dataset};
pub use optimizer::{OptimizerKind, OptimizerState};

use crate::error::{Error, Result};

/// Flat vector of model parameters; the unit every mechanism transports.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector {
            values: vec![0.0; len],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &ParamVector, scale: f64) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coordinate-wise arithmetic mean. Every aggregation path in the crate
    /// funnels through this one summation order, so "plaintext mean" is a
    /// single well-defined value.
    pub fn mean(vectors: &[ParamVector]) -> Result<ParamVector> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::Input("mean of empty vector list".into()))?;
        if let Some(bad) = vectors.iter().find(|v| v.len() != first.len()) {
            return Err(Error::Input(format!(
                "ragged vector lengths: {} vs {}",
                bad.len(),
                first.len()
            )));
        }
        let mut acc = ParamVector::zeros(first.len());
        for v in vectors {
            for (a, b) in acc.values.iter_mut().zip(&v.values) {
                *a += b;
            }
        }
        let inv = 1.0 / vectors.len() as f64;
        acc.scale(inv);
        Ok(acc)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Logistic,
    Mlp,
}

/// Architecture description; fixes the parameter-vector length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Hidden width; only meaningful for [`ModelKind::Mlp`].
    pub hidden_dim: usize,
}

impl ModelSpec {
    pub fn logistic(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Logistic,
            input_dim,
            num_classes,
            hidden_dim: 0,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            input_dim,
            num_classes,
            hidden_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 {
            return Err(Error::Config("model input_dim must be >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("model num_classes must be >= 2".into()));
        }
        if self.kind == ModelKind::Mlp && self.hidden_dim < 1 {
            return Err(Error::Config("mlp hidden_dim must be >= 1".into()));
        }
        Ok(())
    }

    /// Total parameter count (weights + biases, row-major layout).
    pub fn param_count(&self) -> usize {
        let (d, c, h) = (self.input_dim, self.num_classes, self.hidden_dim);
        match self.kind {
            ModelKind::Logistic => c * (d + 1),
            ModelKind::Mlp => h * (d + 1) + c * (h + 1),
        }
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Config(format!(
                "parameter length {} does not match model ({} expected)",
                params.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    fn check_features(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.input_dim {
            return Err(Error::Config(format!(
                "feature width {} does not match model input_dim {}",
                features.cols(),
                self.input_dim
            )));
        }
        Ok(())
    }
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Raw class scores for every row of `features`.
fn logits(spec: &ModelSpec, params: &ParamVector, features: &Matrix) -> Matrix {
    let c = spec.num_classes;
    let d = spec.input_dim;
    let p = params.as_slice();
    let mut out = Matrix::zeros(features.rows(), c);
    match spec.kind {
        ModelKind::Logistic => {
            let (w, b) = p.split_at(c * d);
            for r in 0..features.rows() {
                let x = features.row(r);
                let o = out.row_mut(r);
                for k in 0..c {
                    let wk = &w[k * d..(k + 1) * d];
                    o[k] = b[k] + wk.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
                }
            }
        }
        ModelKind::Mlp => {
            let h = spec.hidden_dim;
            let (w1, rest) = p.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(c * h);
            let mut hidden = vec![0.0; h];
            for r in 0..features.rows() {
                let x = features.row(r);
                for (j, hj) in hidden.iter_mut().enumerate() {
                    let wj = &w1[j * d..(j + 1) * d];
                    *hj = (b1[j] + wj.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()).tanh();
                }
                let o = out.row_mut(r);
                for k in 0..c {
                    let wk = &w2[k * h..(k + 1) * h];
                    o[k] = b2[k] + wk.iter().zip(&hidden).map(|(wi, hi)| wi * hi).sum::<f64>();
                }
            }
        }
    }
    out
}

/// Class-probability matrix: one softmax row per input row.
pub fn forward(spec: &ModelSpec, params: &ParamVector, features: &Matrix) -> Result<Matrix> {
    spec.validate()?;
    spec.check_params(params)?;
    spec.check_features(features)?;
    let mut probs = logits(spec, params, features);
    for r in 0..probs.rows() {
        softmax_in_place(probs.row_mut(r));
    }
    Ok(probs)
}

/// Argmax class per row.
pub fn predict(spec: &ModelSpec, params: &ParamVector, features: &Matrix) -> Result<Vec<usize>> {
    let probs = forward(spec, params, features)?;
    Ok((0..probs.rows())
        .map(|r| {
            probs
                .row(r)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i)
                .expect("at least two classes")
        })
        .collect())
}

/// Mean cross-entropy over the batch, without materializing probabilities
/// (log-sum-exp path keeps confident predictions finite).
pub fn loss(spec: &ModelSpec, params: &ParamVector, batch: &Dataset) -> Result<f64> {
    spec.validate()?;
    spec.check_params(params)?;
    spec.check_features(batch.features())?;
    if batch.is_empty() {
        return Err(Error::Input("loss on empty batch".into()));
    }
    let scores = logits(spec, params, batch.features());
    let mut total = 0.0;
    for (r, &label) in batch.labels().iter().enumerate() {
        let row = scores.row(r);
        total += log_sum_exp(row) - row[label];
    }
    Ok(total / batch.len() as f64)
}

/// Mean cross-entropy and its gradient with respect to `params`.
pub fn loss_and_gradient(
    spec: &ModelSpec,
    params: &ParamVector,
    batch: &Dataset,
) -> Result<(f64, ParamVector)> {
    spec.validate()?;
    spec.check_params(params)?;
    spec.check_features(batch.features())?;
    let n = batch.len();
    if n == 0 {
        return Err(Error::Input("loss_and_gradient on empty batch".into()));
    }
    let c = spec.num_classes;
    let d = spec.input_dim;
    let features = batch.features();
    let scores = logits(spec, params, features);
    let inv_n = 1.0 / n as f64;
    let mut grad = ParamVector::zeros(params.len());
    let mut total_loss = 0.0;

    match spec.kind {
        ModelKind::Logistic => {
            let g = grad.as_mut_slice();
            let (gw, gb) = g.split_at_mut(c * d);
            for (r, &label) in batch.labels().iter().enumerate() {
                let row = scores.row(r);
                total_loss += log_sum_exp(row) - row[label];
                let mut probs = row.to_vec();
                softmax_in_place(&mut probs);
                let x = features.row(r);
                for k in 0..c {
                    let delta = (probs[k] - if k == label { 1.0 } else { 0.0 }) * inv_n;
                    let gwk = &mut gw[k * d..(k + 1) * d];
                    for (gi, xi) in gwk.iter_mut().zip(x) {
                        *gi += delta * xi;
                    }
                    gb[k] += delta;
                }
            }
        }
        ModelKind::Mlp => {
            let h = spec.hidden_dim;
            let p = params.as_slice();
            let (w1, rest) = p.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, _b2) = rest.split_at(c * h);
            let mut hidden = vec![0.0; h];
            for (r, &label) in batch.labels().iter().enumerate() {
                let x = features.row(r);
                for (j, hj) in hidden.iter_mut().enumerate() {
                    let wj = &w1[j * d..(j + 1) * d];
                    *hj = (b1[j] + wj.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()).tanh();
                }
                let row = scores.row(r);
                total_loss += log_sum_exp(row) - row[label];
                let mut delta_out = row.to_vec();
                softmax_in_place(&mut delta_out);
                delta_out[label] -= 1.0;
                for v in &mut delta_out {
                    *v *= inv_n;
                }
                // backprop through the output layer, then tanh
                let g = grad.as_mut_slice();
                let (gw1, grest) = g.split_at_mut(h * d);
                let (gb1, grest) = grest.split_at_mut(h);
                let (gw2, gb2) = grest.split_at_mut(c * h);
                let mut delta_hidden = vec![0.0; h];
                for k in 0..c {
                    let dk = delta_out[k];
                    let gw2k = &mut gw2[k * h..(k + 1) * h];
                    let w2k = &w2[k * h..(k + 1) * h];
                    for j in 0..h {
                        gw2k[j] += dk * hidden[j];
                        delta_hidden[j] += dk * w2k[j];
                    }
                    gb2[k] += dk;
                }
                for j in 0..h {
                    let dj = delta_hidden[j] * (1.0 - hidden[j] * hidden[j]);
                    let gw1j = &mut gw1[j * d..(j + 1) * d];
                    for (gi, xi) in gw1j.iter_mut().zip(x) {
                        *gi += dj * xi;
                    }
                    gb1[j] += dj;
                }
            }
        }
    }
    Ok((total_loss * inv_n, grad))
}
