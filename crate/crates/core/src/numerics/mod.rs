//! Dense matrices, entrywise norms, grids, and the brute-force oracles.

mod oracle;
mod svd;

pub use oracle::{rank1_objective, rank_k_objective, 
    discretization_check, lra_bruteforce, opt_floor, pq_bruteforce, DiscretizationCheck,
    LraOracleResult, PqOracleResult,
};
pub use svd::{jacobi_svd, numerical_rank, Svd};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("enumeration budget exceeded: needed {needed} evaluations, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
}

/// Row-major dense real matrix. The workhorse value type: instances,
/// factors, residuals and sketches are all `DenseMatrix`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, NumericsError> {
        if entries.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().position(|e| !e.is_finite()) {
            return Err(NumericsError::NonFinite(bad));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    /// Column vector from a slice.
    pub fn column(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, entries: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, NumericsError> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.entries[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, NumericsError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch("sub".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    pub fn add(&self, other: &Self) -> Result<Self, NumericsError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch("add".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * s).collect(),
        }
    }

    /// Rank-1 outer product u v^T.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| *e == 0.0)
    }
}

/// Sum over entries of |a_ij|^p (the p-th power, not the root).
pub fn entrywise_p_norm_pow(a: &DenseMatrix, p: u32) -> Result<f64, NumericsError> {
    if p < 2 || p % 2 != 0 {
        return Err(NumericsError::InvalidExponent(format!(
            "entrywise norm needs even p >= 2, got {p}"
        )));
    }
    Ok(a.entries().iter().map(|e| e.abs().powi(p as i32)).sum())
}

/// The entrywise lp norm itself, i.e. the p-th root of [`entrywise_p_norm_pow`].
pub fn entrywise_p_norm(a: &DenseMatrix, p: u32) -> Result<f64, NumericsError> {
    Ok(entrywise_p_norm_pow(a, p)?.powf(1.0 / p as f64))
}

/// Sum over coordinates of |v_i|^p for real p >= some positive value.
/// Fractional exponents (p/(p-1) and friends) are first-class citizens here.
pub fn vector_p_norm_pow(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum()
}

/// (sum |v_i|^p)^(1/p); empty input gives 0 by convention.
pub fn vector_p_norm(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    vector_p_norm_pow(v, p).powf(1.0 / p)
}

/// A uniform grid lo, lo+fineness, ... clipped at hi.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub fineness: f64,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, fineness: f64) -> Result<Self, NumericsError> {
        if !(lo.is_finite() && hi.is_finite() && fineness.is_finite()) {
            return Err(NumericsError::InvalidGrid("non-finite bounds".into()));
        }
        if lo > hi {
            return Err(NumericsError::InvalidGrid(format!("lo {lo} > hi {hi}")));
        }
        if fineness <= 0.0 {
            return Err(NumericsError::InvalidGrid(format!("fineness {fineness} <= 0")));
        }
        Ok(Self { lo, hi, fineness })
    }

    /// Symmetric grid [-r, r] that contains 0 exactly.
    pub fn symmetric(r: f64, fineness: f64) -> Result<Self, NumericsError> {
        let steps = (r / fineness).floor().max(0.0);
        let r_snapped = steps * fineness;
        Self::new(-r_snapped, r_snapped, fineness)
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.fineness + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let p = self.lo + i as f64 * self.fineness;
                if p > self.hi {
                    self.hi
                } else {
                    p
                }
            })
            .collect()
    }

    /// Nearest grid point; values outside [lo, hi] clamp to the endpoints.
    pub fn snap(&self, x: f64) -> f64 {
        let clamped = x.clamp(self.lo, self.lo + (self.len() - 1) as f64 * self.fineness);
        let steps = ((clamped - self.lo) / self.fineness).round();
        let snapped = self.lo + steps * self.fineness;
        snapped.clamp(self.lo, self.hi)
    }

    pub fn snap_vec(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| self.snap(*x)).collect()
    }

    pub fn snap_matrix(&self, m: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| self.snap(m.get(i, j)))
    }
}
