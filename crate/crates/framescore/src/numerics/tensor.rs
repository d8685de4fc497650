//! Dense row-major f64 matrices and the forward kernels built on them.
//!
//! Everything differentiable in the crate bottoms out here; the autodiff
//! layer wraps these kernels with recorded backward passes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Epsilon inside the layer-norm square root.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// A dense rows x cols matrix of f64, row-major.
#[derive(Clone, PartialEq, Default)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for Tensor2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor2({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Build from a flat row-major buffer, validating length and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                op: "Tensor2::from_vec",
                lhs: rows * cols,
                rhs: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value at flat index {i} in {rows}x{cols} tensor"
            )));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    /// Convenience constructor for literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows in Tensor2::from_rows");
            data.extend_from_slice(row);
        }
        Tensor2 {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor2::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Seeded Gaussian init with the given standard deviation.
    pub fn randn(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * std
            })
            .collect();
        Tensor2 { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor2 { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Tensor2 {
        self.map(|v| v * k)
    }

    pub fn add(&self, other: &Tensor2) -> Result<Tensor2> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor2) -> Result<Tensor2> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Tensor2) -> Result<Tensor2> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    fn zip_with(
        &self,
        other: &Tensor2,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor2> {
        if self.shape() != other.shape() {
            return Err(shape_error(op, self, other));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// In-place `self += k * other`. Shapes must match (panics otherwise);
    /// used on gradient buffers where shapes are structurally guaranteed.
    pub fn axpy(&mut self, k: f64, other: &Tensor2) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
    }

    /// Add a 1 x cols row vector to every row.
    pub fn add_row_broadcast(&self, row: &Tensor2) -> Result<Tensor2> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(shape_error("add_row_broadcast", self, row));
        }
        let mut out = self.clone();
        for i in 0..out.rows {
            for (o, &r) in out.row_mut(i).iter_mut().zip(&row.data) {
                *o += r;
            }
        }
        Ok(out)
    }

    /// Column sums as a 1 x cols vector.
    pub fn col_sums(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(1, self.cols);
        for i in 0..self.rows {
            for (o, &v) in out.data.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    pub fn slice_cols(&self, start: usize, width: usize) -> Tensor2 {
        assert!(start + width <= self.cols, "slice_cols out of range");
        let mut out = Tensor2::zeros(self.rows, width);
        for i in 0..self.rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(i)[start..start + width]);
        }
        out
    }

    pub fn concat_cols(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.rows != other.rows {
            return Err(shape_error("concat_cols", self, other));
        }
        let mut out = Tensor2::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(other.row(i));
        }
        Ok(out)
    }

    pub fn mean_all(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }
}

fn shape_error(op: &'static str, lhs: &Tensor2, rhs: &Tensor2) -> Error {
    Error::DimensionMismatch {
        op,
        lhs_rows: lhs.rows,
        lhs_cols: lhs.cols,
        rhs_rows: rhs.rows,
        rhs_cols: rhs.cols,
    }
}

/// Standard matrix product. The inner loop runs over contiguous rows of both
/// the output and `b`, which keeps it cache-friendly and vectorizable.
pub fn matmul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    if a.cols != b.rows {
        return Err(shape_error("matmul", a, b));
    }
    let (m, n) = (a.rows, b.cols);
    let mut out = Tensor2::zeros(m, n);
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (kk, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = b.row(kk);
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

/// Row-wise softmax with max subtraction for stability. Rows of the result
/// are nonnegative and sum to 1.
pub fn softmax_rows(x: &Tensor2) -> Tensor2 {
    let mut out = x.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Per-row layer normalization followed by an affine transform with `gain`
/// and `bias` (both 1 x cols). Variance is the biased estimate over the row.
pub fn layer_norm(x: &Tensor2, gain: &Tensor2, bias: &Tensor2) -> Result<Tensor2> {
    if gain.rows != 1 || gain.cols != x.cols {
        return Err(shape_error("layer_norm gain", x, gain));
    }
    if bias.rows != 1 || bias.cols != x.cols {
        return Err(shape_error("layer_norm bias", x, bias));
    }
    let d = x.cols as f64;
    let mut out = x.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for ((v, &g), &b) in row.iter_mut().zip(&gain.data).zip(&bias.data) {
            *v = (*v - mean) * inv * g + b;
        }
    }
    Ok(out)
}

/// Scaled dot-product attention: softmax(q kᵀ / sqrt(q.cols)) v, no masking.
pub fn attention(query: &Tensor2, key: &Tensor2, value: &Tensor2) -> Result<Tensor2> {
    if query.cols != key.cols {
        return Err(shape_error("attention query/key", query, key));
    }
    if key.rows != value.rows {
        return Err(shape_error("attention key/value", key, value));
    }
    let scores = matmul(query, &key.transpose())?;
    let scaled = scores.scale(1.0 / (query.cols as f64).sqrt());
    matmul(&softmax_rows(&scaled), value)
}

/// Fixed sinusoidal position table: row p, column 2i holds
/// sin(p / 10000^(2i/dim)) and column 2i+1 the matching cosine.
pub fn sinusoidal_positions(length: usize, dim: usize) -> Result<Tensor2> {
    if !dim.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "sinusoidal positions need an even dimension, got {dim}"
        )));
    }
    let mut out = Tensor2::zeros(length, dim);
    for p in 0..length {
        let row = out.row_mut(p);
        for i in 0..dim / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            let angle = p as f64 * freq;
            row[2 * i] = angle.sin();
            row[2 * i + 1] = angle.cos();
        }
    }
    Ok(out)
}

pub fn relu(x: &Tensor2) -> Tensor2 {
    x.map(|v| v.max(0.0))
}

pub fn sigmoid(x: &Tensor2) -> Tensor2 {
    x.map(sigmoid_scalar)
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
