//! One-sided Jacobi singular value decomposition.
//!
//! Deterministic and dependency-free; plenty fast at the matrix sizes this
//! crate works with. Columns of the working copy are rotated until all
//! pairwise inner products vanish relative to the column norms.

use super::{DenseMatrix, NumericsError};

#[derive(Clone, Debug)]
pub struct Svd {
    /// Left singular vectors, rows x r (columns are the vectors).
    pub u: DenseMatrix,
    /// Singular values, descending.
    pub sigma: Vec<f64>,
    /// Right singular vectors, cols x r.
    pub v: DenseMatrix,
}

impl Svd {
    /// Rank-k truncation A_k = U_k diag(sigma_k) V_k^T.
    pub fn truncate(&self, k: usize) -> DenseMatrix {
        let k = k.min(self.sigma.len());
        let n = self.u.rows();
        let m = self.v.rows();
        DenseMatrix::from_fn(n, m, |i, j| {
            (0..k)
                .map(|t| self.sigma[t] * self.u.get(i, t) * self.v.get(j, t))
                .sum()
        })
    }

    /// Balanced factors X = U_k sqrt(S), Y = V_k sqrt(S) with X Y^T = A_k.
    pub fn split_factors(&self, k: usize) -> (DenseMatrix, DenseMatrix) {
        let k = k.min(self.sigma.len());
        let x = DenseMatrix::from_fn(self.u.rows(), k, |i, t| {
            self.u.get(i, t) * self.sigma[t].max(0.0).sqrt()
        });
        let y = DenseMatrix::from_fn(self.v.rows(), k, |j, t| {
            self.v.get(j, t) * self.sigma[t].max(0.0).sqrt()
        });
        (x, y)
    }
}

const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

/// One-sided Jacobi SVD of `a` to relative tolerance 1e-12.
pub fn jacobi_svd(a: &DenseMatrix) -> Result<Svd, NumericsError> {
    // Work on the tall orientation so column rotations are cheap.
    let transposed = a.rows() < a.cols();
    let work_src = if transposed { a.transpose() } else { a.clone() };
    let n = work_src.rows();
    let m = work_src.cols();

    // Column-major working copy.
    let mut w: Vec<Vec<f64>> = (0..m).map(|j| work_src.col_vec(j)).collect();
    let mut v = vec![vec![0.0; m]; m];
    for (j, col) in v.iter_mut().enumerate() {
        col[j] = 1.0;
    }

    let scale = work_src.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..m {
            for j in (i + 1)..m {
                let (mut aii, mut ajj, mut aij) = (0.0, 0.0, 0.0);
                for r in 0..n {
                    aii += w[i][r] * w[i][r];
                    ajj += w[j][r] * w[j][r];
                    aij += w[i][r] * w[j][r];
                }
                if aij.abs() <= JACOBI_TOL * (aii * ajj).sqrt().max(JACOBI_TOL * scale * scale) {
                    continue;
                }
                rotated = true;
                let tau = (ajj - aii) / (2.0 * aij);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..n {
                    let wi = w[i][r];
                    let wj = w[j][r];
                    w[i][r] = c * wi - s * wj;
                    w[j][r] = s * wi + c * wj;
                }
                for r in 0..m {
                    let vi = v[i][r];
                    let vj = v[j][r];
                    v[i][r] = c * vi - s * vj;
                    v[j][r] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    let norms: Vec<f64> = w.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let mut sigma = Vec::with_capacity(m);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &j in &order {
        let s = norms[j];
        sigma.push(s);
        if s > JACOBI_TOL * scale {
            u_cols.push(w[j].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![0.0; n]);
        }
        v_cols.push(v[j].clone());
    }

    let u = DenseMatrix::from_fn(n, m, |i, j| u_cols[j][i]);
    let vm = DenseMatrix::from_fn(m, m, |i, j| v_cols[j][i]);
    if transposed {
        Ok(Svd { u: vm, sigma, v: u })
    } else {
        Ok(Svd { u, sigma, v: vm })
    }
}

/// Number of singular values above `tol * sigma_max` (absolute `tol` when
/// the matrix is zero).
pub fn numerical_rank(a: &DenseMatrix, tol: f64) -> Result<usize, NumericsError> {
    let svd = jacobi_svd(a)?;
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    let cutoff = tol * top.max(1.0);
    Ok(svd.sigma.iter().filter(|s| **s > cutoff).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reconstruct(svd: &Svd) -> DenseMatrix {
        svd.truncate(svd.sigma.len())
    }

    #[test]
    fn reconstructs_random_matrices() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for (rows, cols) in [(3, 3), (5, 2), (2, 6), (4, 4)] {
            let a = DenseMatrix::from_fn(rows, cols, |_, _| next() * 4.0);
            let svd = jacobi_svd(&a).unwrap();
            let r = reconstruct(&svd);
            for (x, y) in a.entries().iter().zip(r.entries()) {
                assert_relative_eq!(x, y, epsilon = 1e-9, max_relative = 1e-9);
            }
            // descending singular values
            for w in svd.sigma.windows(2) {
                assert!(w[0] >= w[1] - 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_singular_values() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 0.25]).unwrap();
        let svd = jacobi_svd(&a).unwrap();
        assert_relative_eq!(svd.sigma[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(svd.sigma[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn rank_detection() {
        let rank1 = DenseMatrix::outer(&[1.0, 2.0, -1.0], &[3.0, 0.5]);
        assert_eq!(numerical_rank(&rank1, 1e-9).unwrap(), 1);
        assert_eq!(numerical_rank(&DenseMatrix::identity(3), 1e-9).unwrap(), 3);
        assert_eq!(numerical_rank(&DenseMatrix::zeros(2, 2), 1e-9).unwrap(), 0);
    }
}
