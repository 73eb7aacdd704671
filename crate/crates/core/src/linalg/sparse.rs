use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{QnsError, Result};
use crate::grid::{Axis, Grid2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Periodic,
}

impl std::str::FromStr for BoundaryKind {
    type Err = QnsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "periodic" => Ok(Self::Periodic),
            other => Err(QnsError::Config(format!("unknown boundary condition `{other}`"))),
        }
    }
}

/// Diagonal convention on stretched grids.
///
/// Both share the symmetric off-diagonal couplings `h_i h_{i+1} / Δξ²` and
/// coincide on uniform grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianForm {
    /// Diagonal is minus the sum of incident couplings (zero row sums for
    /// Neumann/periodic).
    #[default]
    Conservative,
    /// Diagonal is `−(h_ξ,i²/Δξ² + h_η,j²/Δη²)` per present neighbour pair,
    /// i.e. the point-metric `−2(h_ξ²/Δξ² + h_η²/Δη²)` away from Neumann walls.
    PointMetric,
}

/// Real symmetric matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from per-row sorted `(col, value)` maps; rejects asymmetric input.
    fn from_rows(rows: Vec<BTreeMap<usize, f64>>) -> Result<Self> {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            for (&c, &v) in row {
                if c >= dim {
                    return Err(QnsError::Contract(format!("column {c} out of range for dimension {dim}")));
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let m = Self { dim, row_ptr, col_idx, values };
        if !m.is_symmetric() {
            return Err(QnsError::Contract("matrix is not symmetric".into()));
        }
        Ok(m)
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![BTreeMap::new(); dim];
        for &(r, c, v) in triplets {
            if r >= dim {
                return Err(QnsError::Contract(format!("row {r} out of range for dimension {dim}")));
            }
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        Self::from_rows(rows)
    }

    /// Keeps the nonzero entries of a dense symmetric matrix.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(QnsError::Contract("matrix is not square".into()));
        }
        let rows = (0..a.nrows())
            .map(|r| (0..a.ncols()).filter(|&c| a[(r, c)] != 0.0).map(|c| (c, a[(r, c)])).collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, row_ptr: (0..=dim).collect(), col_idx: (0..dim).collect(), values: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(col, value)` pairs of one row, in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Exact (bitwise) symmetry of stored values.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| self.get(c, r).to_bits() == v.to_bits()))
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "matvec dimension mismatch");
        (0..self.dim).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// Whether every row sums to zero (relative to the largest entry), i.e.
    /// the constant vector spans a nullspace direction.
    pub fn has_constant_nullspace(&self) -> bool {
        let tol = 1e-12 * self.max_abs().max(f64::MIN_POSITIVE);
        self.dim > 0 && self.row_sums().iter().all(|s| s.abs() <= tol * 8.0)
    }
}

/// Couplings of unknown `i` (1-based) along one axis: `(neighbour, coupling)`
/// where neighbour is `Some(index)` for another unknown or `None` for a wall.
fn axis_couplings(axis: &Axis, i: usize, bc: BoundaryKind) -> Vec<(Option<usize>, f64)> {
    let d2 = axis.d * axis.d;
    let mut out = Vec::with_capacity(2);
    for nb in [i - 1, i + 1] {
        let coupling = axis.h[i] * axis.h[nb] / d2;
        let interior = (1..=axis.n).contains(&nb);
        match (interior, bc) {
            (true, _) => out.push((Some(nb), coupling)),
            (false, BoundaryKind::Periodic) => out.push((Some(axis.wrap(nb)), coupling)),
            (false, BoundaryKind::Dirichlet) => out.push((None, coupling)),
            (false, BoundaryKind::Neumann) => {}
        }
    }
    out
}

fn point_metric_term(axis: &Axis, i: usize) -> f64 {
    axis.h[i] * axis.h[i] / (axis.d * axis.d)
}

fn check_layout(periodic: bool, bc: BoundaryKind) -> Result<()> {
    match (periodic, bc) {
        (true, BoundaryKind::Periodic) | (false, BoundaryKind::Dirichlet | BoundaryKind::Neumann) => Ok(()),
        (true, _) => Err(QnsError::Config("periodic grid requires periodic boundary conditions".into())),
        (false, _) => Err(QnsError::Config("periodic boundary conditions require a periodic grid".into())),
    }
}

/// Assembles the 5-point Laplacian on a 2D grid with `k = (i−1) + (j−1)N_ξ` ordering.
///
/// Off-diagonals are `h_i h_{i±1}/Δξ²` (ξ) and `h_j h_{j±1}/Δη²` (η). Dirichlet
/// walls contribute to the diagonal only; the wall values are moved to the
/// right-hand side by [`dirichlet_rhs_fold`].
pub fn assemble_laplacian(grid: &Grid2D, bc: BoundaryKind, form: LaplacianForm) -> Result<SparseSymMatrix> {
    check_layout(grid.periodic(), bc)?;
    let mut rows = Vec::with_capacity(grid.len());
    for j in 1..=grid.n_eta() {
        for i in 1..=grid.n_xi() {
            let mut row = BTreeMap::new();
            let mut diag = 0.0;
            let xi = axis_couplings(&grid.xi, i, bc);
            let eta = axis_couplings(&grid.eta, j, bc);
            for (nb, c) in &xi {
                if let Some(ni) = nb {
                    *row.entry(grid.unknown(*ni, j)).or_insert(0.0) += c;
                }
                diag -= c;
            }
            for (nb, c) in &eta {
                if let Some(nj) = nb {
                    *row.entry(grid.unknown(i, *nj)).or_insert(0.0) += c;
                }
                diag -= c;
            }
            if form == LaplacianForm::PointMetric {
                diag = -(xi.len() as f64) * point_metric_term(&grid.xi, i)
                    - (eta.len() as f64) * point_metric_term(&grid.eta, j);
            }
            *row.entry(grid.unknown(i, j)).or_insert(0.0) += diag;
            rows.push(row);
        }
    }
    SparseSymMatrix::from_rows(rows)
}

/// One-dimensional counterpart of [`assemble_laplacian`].
pub fn assemble_laplacian_1d(axis: &Axis, bc: BoundaryKind, form: LaplacianForm) -> Result<SparseSymMatrix> {
    check_layout(axis.periodic, bc)?;
    let rows = (1..=axis.n)
        .map(|i| {
            let mut row = BTreeMap::new();
            let cs = axis_couplings(axis, i, bc);
            let mut diag = 0.0;
            for (nb, c) in &cs {
                if let Some(ni) = nb {
                    *row.entry(ni - 1).or_insert(0.0) += c;
                }
                diag -= c;
            }
            if form == LaplacianForm::PointMetric {
                diag = -(cs.len() as f64) * point_metric_term(axis, i);
            }
            *row.entry(i - 1).or_insert(0.0) += diag;
            row
        })
        .collect();
    SparseSymMatrix::from_rows(rows)
}

/// Right-hand side for a Dirichlet problem `∇²u = f`:
/// `rhs_k = f(x_k) − Σ coupling · g(wall neighbour)`.
pub fn dirichlet_rhs_fold<G, F>(grid: &Grid2D, boundary: G, source: F) -> Result<Vec<f64>>
where
    G: Fn(f64, f64) -> f64,
    F: Fn(f64, f64) -> f64,
{
    if grid.periodic() {
        return Err(QnsError::Config("Dirichlet folding needs a walled grid".into()));
    }
    let (xs, ys) = (&grid.xi.coords, &grid.eta.coords);
    let mut rhs = Vec::with_capacity(grid.len());
    for j in 1..=grid.n_eta() {
        for i in 1..=grid.n_xi() {
            let mut r = source(xs[i], ys[j]);
            for nb in [i - 1, i + 1] {
                if nb == 0 || nb == grid.n_xi() + 1 {
                    let c = grid.xi.h[i] * grid.xi.h[nb] / (grid.xi.d * grid.xi.d);
                    r -= c * boundary(xs[nb], ys[j]);
                }
            }
            for nb in [j - 1, j + 1] {
                if nb == 0 || nb == grid.n_eta() + 1 {
                    let c = grid.eta.h[j] * grid.eta.h[nb] / (grid.eta.d * grid.eta.d);
                    r -= c * boundary(xs[i], ys[nb]);
                }
            }
            rhs.push(r);
        }
    }
    Ok(rhs)
}

/// One-dimensional fold with wall values `left` at `x = 0` and `right` at `x = L`.
pub fn dirichlet_rhs_fold_1d<F>(axis: &Axis, left: f64, right: f64, source: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    if axis.periodic {
        return Err(QnsError::Config("Dirichlet folding needs a walled axis".into()));
    }
    let d2 = axis.d * axis.d;
    Ok((1..=axis.n)
        .map(|i| {
            let mut r = source(axis.coords[i]);
            if i == 1 {
                r -= axis.h[1] * axis.h[0] / d2 * left;
            }
            if i == axis.n {
                r -= axis.h[axis.n] * axis.h[axis.n + 1] / d2 * right;
            }
            r
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_periodic_grid, StretchConfig};
    use crate::linalg::{direct_solve, sym_eigendecomposition};
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_entries_match_five_point_formulas() {
        // 3×3 unknowns on the unit square: Δx = 0.25
        let g = build_grid(3, 3, &StretchConfig::uniform(1.0)).unwrap();
        let a = assemble_laplacian(&g, BoundaryKind::Dirichlet, LaplacianForm::Conservative).unwrap();
        let k = g.unknown(2, 2);
        assert_abs_diff_eq!(a.get(k, k), -64.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.get(k, g.unknown(3, 2)), 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.get(k, g.unknown(2, 3)), 16.0, epsilon = 1e-12);
        // wall-adjacent rows keep the full diagonal
        assert_abs_diff_eq!(a.get(0, 0), -64.0, epsilon = 1e-12);
        assert!(a.max_row_nnz() <= 5);
    }

    #[test]
    fn block_structure() {
        let g = build_grid(4, 3, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let a = assemble_laplacian(&g, BoundaryKind::Dirichlet, LaplacianForm::Conservative).unwrap();
        for r in 0..a.dim() {
            for (c, _) in a.row(r) {
                let (ri, rj) = g.unknown_ij(r);
                let (ci, cj) = g.unknown_ij(c);
                let d = (ri as i64 - ci as i64).abs() + (rj as i64 - cj as i64).abs();
                assert!(d <= 1, "entry ({r},{c}) outside the 5-point stencil");
            }
        }
        // last unknown of row block j is not coupled to the first unknown of block j+1
        assert_eq!(a.get(g.unknown(4, 1), g.unknown(1, 2)), 0.0);
    }

    #[test]
    fn point_metric_reduces_on_uniform_grid() {
        let g = build_grid(5, 4, &StretchConfig::uniform(2.0)).unwrap();
        for bc in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
            let a = assemble_laplacian(&g, bc, LaplacianForm::Conservative).unwrap();
            let b = assemble_laplacian(&g, bc, LaplacianForm::PointMetric).unwrap();
            for r in 0..a.dim() {
                for (c, v) in a.row(r) {
                    assert_abs_diff_eq!(v, b.get(r, c), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn point_metric_diagonal_on_stretched_grid() {
        let g = build_grid(6, 6, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let a = assemble_laplacian(&g, BoundaryKind::Dirichlet, LaplacianForm::PointMetric).unwrap();
        let (i, j) = (3, 4);
        let k = g.unknown(i, j);
        let expect = -2.0 * (g.xi.h[i].powi(2) / g.xi.d.powi(2) + g.eta.h[j].powi(2) / g.eta.d.powi(2));
        assert_abs_diff_eq!(a.get(k, k), expect, epsilon = 1e-10);
        assert!(a.is_symmetric());
    }

    #[test]
    fn periodic_rows_sum_to_zero_with_constant_nullspace() {
        let g = build_periodic_grid(4, 4, 1.0).unwrap();
        let a = assemble_laplacian(&g, BoundaryKind::Periodic, LaplacianForm::Conservative).unwrap();
        assert!(a.row_sums().iter().all(|s| s.abs() < 1e-12));
        let e = sym_eigendecomposition(&a).unwrap();
        let top = e.values.len() - 1;
        assert!(e.values[top].abs() < 1e-10 * a.max_abs());
        let v0 = e.vectors.column(top);
        for k in 0..v0.len() {
            assert_abs_diff_eq!(v0[k].abs(), 0.25, epsilon = 1e-10);
        }
    }

    #[test]
    fn neumann_rows_sum_to_zero() {
        let g = build_grid(5, 6, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let a = assemble_laplacian(&g, BoundaryKind::Neumann, LaplacianForm::Conservative).unwrap();
        assert!(a.has_constant_nullspace());
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let walled = build_grid(4, 4, &StretchConfig::uniform(1.0)).unwrap();
        let periodic = build_periodic_grid(4, 4, 1.0).unwrap();
        assert!(assemble_laplacian(&walled, BoundaryKind::Periodic, LaplacianForm::Conservative).is_err());
        assert!(assemble_laplacian(&periodic, BoundaryKind::Neumann, LaplacianForm::Conservative).is_err());
        assert!("robin".parse::<BoundaryKind>().is_err());
    }

    #[test]
    fn zero_problem_folds_to_zero() {
        let g = build_grid(4, 5, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let rhs = dirichlet_rhs_fold(&g, |_, _| 0.0, |_, _| 0.0).unwrap();
        assert!(rhs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_boundary_gives_constant_solution() {
        let g = build_grid(7, 6, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let a = assemble_laplacian(&g, BoundaryKind::Dirichlet, LaplacianForm::Conservative).unwrap();
        let rhs = dirichlet_rhs_fold(&g, |_, _| 0.7, |_, _| 0.0).unwrap();
        let u = direct_solve(&a, &rhs).unwrap();
        assert!(u.iter().all(|v| (v - 0.7).abs() < 1e-10));
    }

    #[test]
    fn one_d_benchmark_fold_matches_dense_solve() {
        let axis = Axis::walled(16, &StretchConfig::uniform(1.0)).unwrap();
        let a = assemble_laplacian_1d(&axis, BoundaryKind::Dirichlet, LaplacianForm::Conservative).unwrap();
        let rhs = dirichlet_rhs_fold_1d(&axis, 0.0, 1.0, |x| 10.0 * x).unwrap();
        let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(rhs.clone())).unwrap();
        let u = direct_solve(&a, &rhs).unwrap();
        for (k, x) in axis.interior().iter().enumerate() {
            assert_abs_diff_eq!(u[k], dense[k], epsilon = 1e-12);
            // central differences are exact on the cubic u = 5x³/3 − 2x/3
            let exact = 5.0 * x.powi(3) / 3.0 - 2.0 * x / 3.0;
            assert!((u[k] - exact).abs() < 1e-10);
        }
    }
}
