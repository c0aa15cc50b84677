//! Dense 64-bit vectors/matrices, activations, and the seeded PRNG.
//!
//! Everything here is deliberately plain: row-major storage, naive kernels,
//! f64 throughout. Finiteness is enforced at construction boundaries so that
//! NaN/Inf cannot silently propagate into an analysis.

mod rng;

pub use rng::{derive_seed, Rng, RNG_ALGORITHM};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MathError {
    #[error("empty input")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite element at index {index}")]
    NonFinite { index: usize },
    #[error("matrix data length {len} does not equal rows*cols = {expected}")]
    BadShape { len: usize, expected: usize },
}

/// Fixed-length vector of 64-bit reals. All elements finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vec64 {
    data: Vec<f64>,
}

impl Vec64 {
    pub fn zeros(n: usize) -> Self {
        Vec64 { data: vec![0.0; n] }
    }

    /// Builds a vector, rejecting NaN/Inf elements.
    pub fn from_vec(data: Vec<f64>) -> Result<Self, MathError> {
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(MathError::NonFinite { index });
        }
        Ok(Vec64 { data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        Vec64 {
            data: (0..n).map(|i| f(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Vec64) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Vec64) -> Vec64 {
        debug_assert_eq!(self.len(), other.len());
        Vec64::from_fn(self.len(), |i| self.data[i] + other.data[i])
    }

    pub fn sub(&self, other: &Vec64) -> Vec64 {
        debug_assert_eq!(self.len(), other.len());
        Vec64::from_fn(self.len(), |i| self.data[i] - other.data[i])
    }
}

impl std::ops::Index<usize> for Vec64 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vec64 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Row-major dense matrix of 64-bit reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat64 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat64 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat64 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat64::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MathError> {
        if data.len() != rows * cols {
            return Err(MathError::BadShape {
                len: data.len(),
                expected: rows * cols,
            });
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(MathError::NonFinite { index });
        }
        Ok(Mat64 { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat64 { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Logistic sigmoid, computed stably on both tails. Saturates, never NaN.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hyperbolic tangent.
pub fn tanh_act(x: f64) -> f64 {
    x.tanh()
}

/// Softmax with max-subtraction. Output is a probability distribution.
pub fn softmax(v: &Vec64) -> Result<Vec64, MathError> {
    if v.is_empty() {
        return Err(MathError::Empty);
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for x in out.iter_mut() {
        *x /= sum;
    }
    Ok(Vec64 { data: out })
}

/// log(softmax(v)), shared max-subtraction path; used for cross-entropy.
pub fn log_softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = v.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
    v.iter().map(|x| x - lse).collect()
}

/// Matrix-vector product.
pub fn matvec(m: &Mat64, v: &Vec64) -> Result<Vec64, MathError> {
    if v.len() != m.cols {
        return Err(MathError::DimMismatch {
            expected: m.cols,
            got: v.len(),
        });
    }
    let mut out = Vec64::zeros(m.rows);
    matvec_into(out.as_mut_slice(), m, v.as_slice());
    Ok(out)
}

/// `out = m * v` without allocation. Dimensions are the caller's contract.
pub fn matvec_into(out: &mut [f64], m: &Mat64, v: &[f64]) {
    debug_assert_eq!(out.len(), m.rows);
    debug_assert_eq!(v.len(), m.cols);
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m.data[i * m.cols..(i + 1) * m.cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(v.iter()) {
            acc += a * b;
        }
        *o = acc;
    }
}

/// `out += m^T * v` without allocation (m: r×c, v: r, out: c).
pub fn matvec_t_add(out: &mut [f64], m: &Mat64, v: &[f64]) {
    debug_assert_eq!(out.len(), m.cols);
    debug_assert_eq!(v.len(), m.rows);
    for (i, vi) in v.iter().enumerate() {
        if *vi == 0.0 {
            continue;
        }
        let row = &m.data[i * m.cols..(i + 1) * m.cols];
        for (o, a) in out.iter_mut().zip(row.iter()) {
            *o += vi * a;
        }
    }
}

/// Rank-1 update `m += a * b^T` (m: len(a)×len(b)).
pub fn outer_add(m: &mut Mat64, a: &[f64], b: &[f64]) {
    debug_assert_eq!(m.rows, a.len());
    debug_assert_eq!(m.cols, b.len());
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        let row = &mut m.data[i * m.cols..(i + 1) * m.cols];
        for (o, bj) in row.iter_mut().zip(b.iter()) {
            *o += ai * bj;
        }
    }
}
