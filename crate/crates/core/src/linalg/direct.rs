//! Classical direct solver used as the reference for every quantum solve.
//!
//! Symmetric matrices are factored as `L D Lᵀ` in envelope (skyline) storage,
//! which keeps the banded structure of the `k = i + (j−1)N_ξ` ordering. A
//! constant nullspace (all-Neumann or periodic Laplacian) is removed by
//! pinning the last unknown and shifting the result to zero mean.

use nalgebra::{DMatrix, DVector};

use crate::error::{QnsError, Result};
use crate::linalg::SparseSymMatrix;

/// `L D Lᵀ` factor; row `i` of `L` is stored from column `first[i]` to `i − 1`.
#[derive(Debug, Clone)]
struct EnvelopeLdl {
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl EnvelopeLdl {
    /// Factors the leading `n × n` block of `a` (rows/cols `< n`).
    fn factor(a: &SparseSymMatrix, n: usize) -> Result<Self> {
        let mut first = vec![0; n];
        for (r, f) in first.iter_mut().enumerate() {
            *f = a.row(r).map(|(c, _)| c).filter(|&c| c <= r).min().unwrap_or(r);
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for r in 0..n {
            start.push(start[r] + (r - first[r]));
        }
        let mut lower = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        let scale = a.max_abs();
        let pivot_tol = 1e-13 * scale;

        let mut row_buf = vec![0.0; n];
        for i in 0..n {
            let fi = first[i];
            row_buf[fi..=i].iter_mut().for_each(|v| *v = 0.0);
            for (c, v) in a.row(i) {
                if c >= fi && c <= i {
                    row_buf[c] = v;
                }
            }
            // Solve for L[i, fi..i] row-by-row against earlier rows.
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let lj = &lower[start[j]..start[j + 1]];
                let mut s = row_buf[j];
                for k in lo..j {
                    // row_buf[k] already holds L[i,k]·D[k]
                    s -= row_buf[k] * lj[k - fj];
                }
                row_buf[j] = s;
            }
            let mut d = row_buf[i];
            let li = &mut lower[start[i]..start[i + 1]];
            for j in fi..i {
                let lij = row_buf[j] / diag[j];
                d -= lij * row_buf[j];
                li[j - fi] = lij;
                // keep L[i,j]·D[j] for the remaining columns
            }
            if !(d.abs() > pivot_tol) {
                return Err(QnsError::Singular);
            }
            diag[i] = d;
        }
        Ok(Self { first, start, lower, diag })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let li = &self.lower[self.start[i]..self.start[i + 1]];
            let fi = self.first[i];
            let s: f64 = li.iter().enumerate().map(|(k, l)| l * x[fi + k]).sum();
            x[i] -= s;
        }
        for (xi, d) in x.iter_mut().zip(&self.diag) {
            *xi /= d;
        }
        for i in (0..n).rev() {
            let li = &self.lower[self.start[i]..self.start[i + 1]];
            let fi = self.first[i];
            let xi = x[i];
            for (k, l) in li.iter().enumerate() {
                x[fi + k] -= l * xi;
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Envelope(EnvelopeLdl),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn build(a: &SparseSymMatrix, n: usize) -> Result<Self> {
        match EnvelopeLdl::factor(a, n) {
            Ok(f) => Ok(Factor::Envelope(f)),
            Err(QnsError::Singular) => {
                // indefinite ordering hit a zero pivot; use pivoted LU instead
                let dense = a.to_dense().view((0, 0), (n, n)).into_owned();
                let lu = dense.lu();
                if !lu.is_invertible() {
                    return Err(QnsError::Singular);
                }
                Ok(Factor::Dense(lu))
            }
            Err(e) => Err(e),
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factor::Envelope(f) => {
                let mut x = b.to_vec();
                f.solve_in_place(&mut x);
                x
            }
            Factor::Dense(lu) => {
                let x = lu.solve(&DVector::from_column_slice(b)).expect("factor checked invertible");
                x.iter().copied().collect()
            }
        }
    }
}

/// Factored matrix, reusable across right-hand sides (one factorization per
/// time-stepping run).
#[derive(Debug, Clone)]
pub struct DirectSolver {
    dim: usize,
    factor: Factor,
    constant_nullspace: bool,
}

impl DirectSolver {
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let dim = a.dim();
        if dim == 0 {
            return Err(QnsError::Degenerate("empty matrix".into()));
        }
        let constant_nullspace = a.has_constant_nullspace();
        let n = if constant_nullspace { dim - 1 } else { dim };
        if n == 0 {
            // 1×1 zero matrix: only b = 0 is consistent
            return Ok(Self { dim, factor: Factor::Dense(DMatrix::<f64>::identity(0, 0).lu()), constant_nullspace });
        }
        Ok(Self { dim, factor: Factor::build(a, n)?, constant_nullspace })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_constant_nullspace(&self) -> bool {
        self.constant_nullspace
    }

    /// Solves `A x = b`. For a constant nullspace `b` must have zero mean and
    /// the zero-mean solution is returned.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(QnsError::Shape { expected: self.dim, got: b.len() });
        }
        if !self.constant_nullspace {
            return Ok(self.factor.solve(b));
        }
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = b.iter().sum::<f64>() / self.dim as f64;
        if mean.abs() > 1e-10 * bmax.max(f64::MIN_POSITIVE) {
            return Err(QnsError::Consistency(format!(
                "right-hand side has mean {mean:e}, outside the range of a matrix with constant nullspace"
            )));
        }
        let n = self.dim - 1;
        let mut x = if n > 0 { self.factor.solve(&b[..n]) } else { Vec::new() };
        x.push(0.0);
        let shift = x.iter().sum::<f64>() / self.dim as f64;
        x.iter_mut().for_each(|v| *v -= shift);
        Ok(x)
    }
}

/// One-shot convenience around [`DirectSolver`].
pub fn direct_solve(a: &SparseSymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    DirectSolver::factor(a)?.solve(b)
}
