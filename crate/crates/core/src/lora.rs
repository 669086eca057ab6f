//! Low-rank adaptation of a frozen square weight matrix.
//!
//! The adapted layer computes `h = W0·x + s·B·(A·x)` with `A` of shape
//! `r×d`, `B` of shape `d×r` and `s` the scaling factor (1.0 unless an
//! `alpha/r`-style multiplier is requested). `W0` is owned privately by
//! [`FrozenLinear`] and no method hands out a mutable reference to it.
//!
//! Everything is `f64`; the gradient checks need the headroom.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LoraError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank must satisfy 1 <= r <= d, got r={rank}, d={d}")]
    InvalidRank { rank: usize, d: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite loss at step {step}")]
    Diverged { step: usize },
    #[error("adapter document: {0}")]
    Format(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LoraError> {
        if data.len() != rows * cols {
            return Err(LoraError::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LoraError::InvalidParameter("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LoraError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LoraError::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn random_normal(rows: usize, cols: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Self {
        let data = if sigma == 0.0 {
            vec![0.0; rows * cols]
        } else {
            let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
            (0..rows * cols).map(|_| normal.sample(rng)).collect()
        };
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        if x.len() != self.cols {
            return Err(LoraError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ · y`.
    pub fn matvec_t(&self, y: &[f64]) -> Result<Vec<f64>, LoraError> {
        if y.len() != self.rows {
            return Err(LoraError::DimensionMismatch(format!(
                "transpose of {}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                y.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (r, yr) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * yr;
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LoraError> {
        if self.cols != other.rows {
            return Err(LoraError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Outer product `u · vᵀ` scaled by `s`.
    pub fn outer(u: &[f64], v: &[f64], s: f64) -> Matrix {
        let data = u.iter().flat_map(|a| v.iter().map(move |b| s * a * b)).collect();
        Matrix {
            rows: u.len(),
            cols: v.len(),
            data,
        }
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &Matrix, s: f64) -> Result<(), LoraError> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(LoraError::DimensionMismatch(format!(
                "{}x{} += {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// SHA-256 over the exact bit patterns of the shape and entries.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_le_bytes());
        h.update((self.cols as u64).to_le_bytes());
        for v in &self.data {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Trainable low-rank factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    /// `r×d`, applied first.
    pub a: Matrix,
    /// `d×r`.
    pub b: Matrix,
    pub scaling: f64,
}

impl LoraAdapter {
    pub fn new(a: Matrix, b: Matrix, scaling: f64) -> Result<Self, LoraError> {
        let (r, d) = (a.rows, a.cols);
        if b.rows != d || b.cols != r {
            return Err(LoraError::DimensionMismatch(format!(
                "A is {r}x{d} so B must be {d}x{r}, got {}x{}",
                b.rows, b.cols
            )));
        }
        if r == 0 || r > d {
            return Err(LoraError::InvalidRank { rank: r, d });
        }
        if !scaling.is_finite() {
            return Err(LoraError::InvalidParameter("scaling must be finite".into()));
        }
        Ok(Self { a, b, scaling })
    }

    pub fn rank(&self) -> usize {
        self.a.rows
    }

    pub fn dim(&self) -> usize {
        self.a.cols
    }

    /// `alpha / r` scaling as used by common adapter libraries.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.scaling = alpha / self.rank() as f64;
        self
    }

    pub fn trainable_params(&self) -> usize {
        self.a.data.len() + self.b.data.len()
    }

    /// The dense update `s·B·A`.
    pub fn delta(&self) -> Matrix {
        let mut ba = self.b.matmul(&self.a).expect("shapes checked on construction");
        ba.data.iter_mut().for_each(|v| *v *= self.scaling);
        ba
    }
}

/// `A ~ N(0, sigma²)` from a seeded generator, `B = 0`, scaling 1.
pub fn init_adapter(d: usize, r: usize, seed: u64, sigma: f64) -> Result<LoraAdapter, LoraError> {
    if r == 0 || r > d {
        return Err(LoraError::InvalidRank { rank: r, d });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(LoraError::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::random_normal(r, d, sigma, &mut rng);
    LoraAdapter::new(a, Matrix::zeros(d, r), 1.0)
}

pub const DEFAULT_INIT_SIGMA: f64 = 0.02;

/// A frozen square weight with a trainable adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenLinear {
    w0: Matrix,
    pub adapter: LoraAdapter,
}

impl FrozenLinear {
    pub fn new(w0: Matrix, adapter: LoraAdapter) -> Result<Self, LoraError> {
        if w0.rows != w0.cols {
            return Err(LoraError::DimensionMismatch(format!(
                "base matrix must be square, got {}x{}",
                w0.rows, w0.cols
            )));
        }
        if w0.rows != adapter.dim() {
            return Err(LoraError::DimensionMismatch(format!(
                "base is {0}x{0} but adapter works in dimension {1}",
                w0.rows,
                adapter.dim()
            )));
        }
        Ok(Self { w0, adapter })
    }

    pub fn base(&self) -> &Matrix {
        &self.w0
    }

    pub fn dim(&self) -> usize {
        self.w0.rows
    }

    pub fn base_forward(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        self.w0.matvec(x)
    }
}

/// `W0·x + s·B·(A·x)`, never forming `B·A`.
pub fn forward(layer: &FrozenLinear, x: &[f64]) -> Result<Vec<f64>, LoraError> {
    let mut h = layer.w0.matvec(x)?;
    let ax = layer.adapter.a.matvec(x)?;
    let bax = layer.adapter.b.matvec(&ax)?;
    for (hi, di) in h.iter_mut().zip(bax) {
        *hi += layer.adapter.scaling * di;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraGrads {
    pub grad_a: Matrix,
    pub grad_b: Matrix,
}

/// Gradients of a scalar loss w.r.t. `A` and `B` given `upstream = ∂L/∂h`.
///
/// `∂L/∂B = s·upstream·(A·x)ᵀ`, `∂L/∂A = s·(Bᵀ·upstream)·xᵀ`.
pub fn backward(layer: &FrozenLinear, x: &[f64], upstream: &[f64]) -> Result<LoraGrads, LoraError> {
    let d = layer.dim();
    if x.len() != d || upstream.len() != d {
        return Err(LoraError::DimensionMismatch(format!(
            "layer dimension {d}, input {}, upstream {}",
            x.len(),
            upstream.len()
        )));
    }
    let s = layer.adapter.scaling;
    let ax = layer.adapter.a.matvec(x)?;
    let bt_up = layer.adapter.b.matvec_t(upstream)?;
    Ok(LoraGrads {
        grad_a: Matrix::outer(&bt_up, x, s),
        grad_b: Matrix::outer(upstream, &ax, s),
    })
}

/// `W0 + s·B·A`.
pub fn merge(layer: &FrozenLinear) -> Matrix {
    let mut merged = layer.w0.clone();
    merged
        .add_scaled(&layer.adapter.delta(), 1.0)
        .expect("adapter dimension checked on construction");
    merged
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoraBudget {
    pub d: u64,
    pub r: u64,
    pub layers: u64,
    pub matrices_per_layer: u64,
    pub base_params: u64,
}

/// Trainable parameter count `layers · matrices · 2·d·r` and its share of
/// the base model.
pub fn param_budget(budget: &LoraBudget) -> Result<(u64, f64), LoraError> {
    let LoraBudget {
        d,
        r,
        layers,
        matrices_per_layer,
        base_params,
    } = *budget;
    if [d, r, layers, matrices_per_layer, base_params].contains(&0) {
        return Err(LoraError::InvalidParameter("all budget fields must be positive".into()));
    }
    let trainable = layers
        .checked_mul(matrices_per_layer)
        .and_then(|v| v.checked_mul(2))
        .and_then(|v| v.checked_mul(d))
        .and_then(|v| v.checked_mul(r))
        .ok_or_else(|| LoraError::InvalidParameter("parameter count overflows u64".into()))?;
    Ok((trainable, trainable as f64 / base_params as f64))
}

#[derive(Serialize, Deserialize)]
struct AdapterDoc {
    d: usize,
    r: usize,
    scaling: f64,
    #[serde(rename = "A")]
    a: Vec<f64>,
    #[serde(rename = "B")]
    b: Vec<f64>,
}

impl LoraAdapter {
    /// `{d, r, scaling, A, B}` with row-major arrays.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&AdapterDoc {
            d: self.dim(),
            r: self.rank(),
            scaling: self.scaling,
            a: self.a.data.clone(),
            b: self.b.data.clone(),
        })
        .expect("adapter serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LoraError> {
        let doc: AdapterDoc = serde_json::from_str(s).map_err(|e| LoraError::Format(e.to_string()))?;
        let a = Matrix::from_vec(doc.r, doc.d, doc.a)?;
        let b = Matrix::from_vec(doc.d, doc.r, doc.b)?;
        LoraAdapter::new(a, b, doc.scaling)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoraError> {
        let s = std::fs::read_to_string(path).map_err(|e| LoraError::Format(e.to_string()))?;
        Self::from_json(&s)
    }
}

/// Synthetic linearly separable binary task for the training demo.
///
/// Inputs are standard normal in `d` dimensions, labelled by the sign of a
/// hidden direction; points closer than `margin` to the boundary are
/// discarded. The frozen model scores `uᵀ·h(x)` with a fixed random readout
/// `u`, so only the adapter can move the decision boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoTask {
    pub d: usize,
    pub rank: usize,
    pub n_samples: usize,
    pub margin: f64,
    pub init_sigma: f64,
    pub seed: u64,
}

impl Default for DemoTask {
    fn default() -> Self {
        Self {
            d: 8,
            rank: 2,
            n_samples: 200,
            margin: 0.25,
            init_sigma: DEFAULT_INIT_SIGMA,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    /// Mean logistic loss before each update, plus the final loss.
    pub losses: Vec<f64>,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub w0_checksum_before: String,
    pub w0_checksum_after: String,
}

impl TrainingTrace {
    pub fn w0_unchanged(&self) -> bool {
        self.w0_checksum_before == self.w0_checksum_after
    }

    /// `step,loss` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(out, "{i},{l}");
        }
        out
    }
}

/// Frozen layer, readout vector, inputs and labels of a demo task.
pub struct DemoData {
    pub layer: FrozenLinear,
    pub readout: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl DemoTask {
    pub fn generate(&self) -> Result<DemoData, LoraError> {
        if self.d == 0 || self.n_samples == 0 {
            return Err(LoraError::InvalidParameter("d and n_samples must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let w0 = Matrix::random_normal(self.d, self.d, 1.0 / (self.d as f64).sqrt(), &mut rng);
        let unit = |v: Vec<f64>| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect::<Vec<_>>()
        };
        let readout = unit(Matrix::random_normal(1, self.d, 1.0, &mut rng).data);
        let teacher = unit(Matrix::random_normal(1, self.d, 1.0, &mut rng).data);
        let mut inputs = Vec::with_capacity(self.n_samples);
        let mut labels = Vec::with_capacity(self.n_samples);
        while inputs.len() < self.n_samples {
            let x = Matrix::random_normal(1, self.d, 1.0, &mut rng).data;
            let m: f64 = x.iter().zip(&teacher).map(|(a, b)| a * b).sum();
            if m.abs() >= self.margin {
                labels.push(m > 0.0);
                inputs.push(x);
            }
        }
        let adapter = init_adapter(self.d, self.rank, self.seed.wrapping_add(1), self.init_sigma)?;
        Ok(DemoData {
            layer: FrozenLinear::new(w0, adapter)?,
            readout,
            inputs,
            labels,
        })
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logistic loss with logits in a numerically safe form.
fn bce_with_logit(z: f64, y: bool) -> f64 {
    let t = if y { 1.0 } else { 0.0 };
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

impl DemoData {
    fn logit(&self, x: &[f64]) -> Result<f64, LoraError> {
        Ok(forward(&self.layer, x)?.iter().zip(&self.readout).map(|(h, u)| h * u).sum())
    }

    pub fn accuracy(&self) -> Result<f64, LoraError> {
        let mut correct = 0usize;
        for (x, &y) in self.inputs.iter().zip(&self.labels) {
            if (self.logit(x)? > 0.0) == y {
                correct += 1;
            }
        }
        Ok(correct as f64 / self.inputs.len() as f64)
    }

    pub fn loss(&self) -> Result<f64, LoraError> {
        let mut total = 0.0;
        for (x, &y) in self.inputs.iter().zip(&self.labels) {
            total += bce_with_logit(self.logit(x)?, y);
        }
        Ok(total / self.inputs.len() as f64)
    }

    /// One full-batch gradient step on the adapter. Returns the pre-step loss.
    pub fn step(&mut self, lr: f64) -> Result<f64, LoraError> {
        let n = self.inputs.len() as f64;
        let d = self.layer.dim();
        let r = self.layer.adapter.rank();
        let mut grad_a = Matrix::zeros(r, d);
        let mut grad_b = Matrix::zeros(d, r);
        let mut total = 0.0;
        for (x, &y) in self.inputs.iter().zip(&self.labels) {
            let z = self.logit(x)?;
            total += bce_with_logit(z, y);
            let dz = (sigmoid(z) - if y { 1.0 } else { 0.0 }) / n;
            let upstream: Vec<f64> = self.readout.iter().map(|u| u * dz).collect();
            let g = backward(&self.layer, x, &upstream)?;
            grad_a.add_scaled(&g.grad_a, 1.0)?;
            grad_b.add_scaled(&g.grad_b, 1.0)?;
        }
        self.layer.adapter.a.add_scaled(&grad_a, -lr)?;
        self.layer.adapter.b.add_scaled(&grad_b, -lr)?;
        Ok(total / n)
    }
}

/// Full-batch gradient descent on the adapter only.
pub fn train_demo(task: &DemoTask, steps: usize, lr: f64) -> Result<TrainingTrace, LoraError> {
    train_demo_layer(task, steps, lr).map(|(trace, _)| trace)
}

/// [`train_demo`] that also returns the trained layer.
pub fn train_demo_layer(task: &DemoTask, steps: usize, lr: f64) -> Result<(TrainingTrace, FrozenLinear), LoraError> {
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(LoraError::InvalidParameter(format!("learning rate must be >= 0, got {lr}")));
    }
    let mut data = task.generate()?;
    let before = data.layer.base().checksum();
    let initial_accuracy = data.accuracy()?;
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..steps {
        let loss = data.step(lr)?;
        if !loss.is_finite() {
            return Err(LoraError::Diverged { step });
        }
        losses.push(loss);
    }
    let final_loss = data.loss()?;
    if !final_loss.is_finite() {
        return Err(LoraError::Diverged { step: steps });
    }
    losses.push(final_loss);
    let trace = TrainingTrace {
        losses,
        initial_accuracy,
        final_accuracy: data.accuracy()?,
        w0_checksum_before: before,
        w0_checksum_after: data.layer.base().checksum(),
    };
    Ok((trace, data.layer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer_2x2() -> FrozenLinear {
        let a = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        FrozenLinear::new(Matrix::zeros(2, 2), LoraAdapter::new(a, b, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn forward_hand_case() {
        assert_eq!(forward(&layer_2x2(), &[3.0, 4.0]).unwrap(), vec![3.0, 6.0]);
    }

    #[test]
    fn forward_dimension_mismatch() {
        assert!(matches!(forward(&layer_2x2(), &[1.0]), Err(LoraError::DimensionMismatch(_))));
        assert!(matches!(
            backward(&layer_2x2(), &[1.0, 2.0], &[1.0]),
            Err(LoraError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn init_properties() {
        let a1 = init_adapter(6, 2, 11, 0.02).unwrap();
        let a2 = init_adapter(6, 2, 11, 0.02).unwrap();
        assert_eq!(a1.a.data(), a2.a.data());
        assert_eq!(a1.b.max_abs(), 0.0);
        assert_eq!(a1.scaling, 1.0);
        assert_eq!(init_adapter(6, 2, 11, 0.0).unwrap().a.max_abs(), 0.0);
        assert_eq!(init_adapter(4, 5, 0, 0.02), Err(LoraError::InvalidRank { rank: 5, d: 4 }));
        assert_eq!(init_adapter(4, 0, 0, 0.02), Err(LoraError::InvalidRank { rank: 0, d: 4 }));
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let g = backward(&layer_2x2(), &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(g.grad_a.max_abs(), 0.0);
        assert_eq!(g.grad_b.max_abs(), 0.0);
    }

    #[test]
    fn zero_b_gives_zero_grad_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w0 = Matrix::random_normal(4, 4, 1.0, &mut rng);
        let layer = FrozenLinear::new(w0, init_adapter(4, 2, 3, 0.5).unwrap()).unwrap();
        let g = backward(&layer, &[1.0, -1.0, 0.5, 2.0], &[0.3, 0.1, -0.2, 1.0]).unwrap();
        assert_eq!(g.grad_a.max_abs(), 0.0);
        assert!(g.grad_b.max_abs() > 0.0);
    }

    #[test]
    fn merge_with_zero_b_is_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w0 = Matrix::random_normal(5, 5, 1.0, &mut rng);
        let layer = FrozenLinear::new(w0.clone(), init_adapter(5, 2, 0, 0.02).unwrap()).unwrap();
        assert_eq!(merge(&layer), w0);
    }

    #[test]
    fn budget_formula() {
        let paper = LoraBudget {
            d: 4096,
            r: 8,
            layers: 32,
            matrices_per_layer: 2,
            base_params: 7_000_000_000,
        };
        let (trainable, ratio) = param_budget(&paper).unwrap();
        assert_eq!(trainable, 4_194_304);
        assert!((ratio * 100.0 - 0.0599186).abs() < 1e-6);

        let tiny = LoraBudget { d: 10, r: 1, layers: 1, matrices_per_layer: 1, base_params: 100 };
        assert_eq!(param_budget(&tiny).unwrap().0, 20);
        let doubled = LoraBudget { r: 2, ..tiny };
        assert_eq!(param_budget(&doubled).unwrap().0, 40);
        assert!(param_budget(&LoraBudget { r: 0, ..tiny }).is_err());
    }

    #[test]
    fn adapter_json_roundtrip() {
        let a = init_adapter(4, 2, 9, 0.1).unwrap().with_alpha(16.0);
        let back = LoraAdapter::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.scaling, 8.0);
        assert!(LoraAdapter::from_json(r#"{"d":2,"r":1,"scaling":1.0,"A":[1.0],"B":[0.0,0.0]}"#).is_err());
    }

    #[test]
    fn zero_steps_keeps_base_accuracy() {
        let task = DemoTask::default();
        let trace = train_demo(&task, 0, 0.1).unwrap();
        assert_eq!(trace.initial_accuracy, trace.final_accuracy);
        let data = task.generate().unwrap();
        assert_eq!(trace.initial_accuracy, data.accuracy().unwrap());
        assert_eq!(trace.losses.len(), 1);
        assert!(trace.w0_unchanged());
    }

    #[test]
    fn divergence_is_reported() {
        let err = train_demo(&DemoTask::default(), 50, 1e200).unwrap_err();
        assert!(matches!(err, LoraError::Diverged { .. } | LoraError::InvalidParameter(_)));
    }

    #[test]
    fn trace_csv() {
        let trace = train_demo(&DemoTask::default(), 2, 0.1).unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("step,loss\n0,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
