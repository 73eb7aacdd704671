//! Chebyshev-basis state tomography.
//!
//! A normalized real state is projected onto a truncated Chebyshev basis
//! sampled at the grid nodes. Each overlap is estimated by an emulated
//! Hadamard test with binomial shot noise. The Gram correction then turns
//! the overlaps into expansion coefficients.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{QnsError, Result};
use crate::par;
use crate::qsim::{gates, StateVector};

/// Gram condition number beyond which the basis is rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// `T_k(x)` by the three-term recurrence.
pub fn cheby_eval(k: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0 + 1e-12) {
        return Err(QnsError::Domain(format!("Chebyshev argument {x} outside [-1, 1]")));
    }
    Ok(cheby_unchecked(k, x))
}

fn cheby_unchecked(k: usize, x: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, x);
    match k {
        0 => t0,
        1 => t1,
        _ => {
            for _ in 1..k {
                let t2 = 2.0 * x * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
            t1
        }
    }
}

/// `T_k'(x) = k U_{k−1}(x)`.
pub fn cheby_derivative(k: usize, x: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let (mut u0, mut u1) = (1.0, 2.0 * x);
    if k == 1 {
        return 1.0;
    }
    for _ in 2..k {
        let u2 = 2.0 * x * u1 - u0;
        u0 = u1;
        u1 = u2;
    }
    k as f64 * u1
}

/// Chebyshev nodes of the first kind, `cos((2i+1)π/2n)`, ascending.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos()).collect();
    v.reverse();
    v
}

/// Affine map of `[lo, hi]` onto `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub lo: f64,
    pub hi: f64,
}

impl AffineMap {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(QnsError::Degenerate(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Tightest interval containing `points`.
    pub fn fit(points: &[f64]) -> Result<Self> {
        let lo = points.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self::new(lo, hi)
    }

    fn check(&self, points: &[f64]) -> Result<()> {
        let tol = 1e-12 * (self.hi - self.lo);
        match points.iter().find(|&&p| p < self.lo - tol || p > self.hi + tol) {
            Some(p) => Err(QnsError::Domain(format!("point {p} outside [{}, {}]", self.lo, self.hi))),
            None => Ok(()),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0).clamp(-1.0, 1.0)
    }

    /// `d x̃ / d x`.
    pub fn slope(&self) -> f64 {
        2.0 / (self.hi - self.lo)
    }
}

/// Truncated Chebyshev basis sampled on a set of points.
#[derive(Debug, Clone)]
pub struct ChebyBasis {
    pub m: usize,
    pub dims: usize,
    /// Rescaled coordinates per dimension.
    pub node_coords: Vec<Vec<f64>>,
    pub maps: Vec<AffineMap>,
    /// Index pairs `(j, k)`; `k` is 0 in 1D.
    pub degrees: Vec<(usize, usize)>,
    /// Norms that turned raw samples into unit vectors.
    pub norms: Vec<f64>,
    pub basis_vectors: Vec<Vec<f64>>,
    pub gram: DMatrix<f64>,
    pub condition: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

fn unit(v: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(QnsError::IllConditioned(f64::INFINITY));
    }
    Ok((v.into_iter().map(|x| x / n).collect(), n))
}

impl ChebyBasis {
    /// 1D basis of `T_0 … T_{m−1}` over `points`, with `map` taking the
    /// physical domain onto `[−1, 1]`.
    pub fn build_1d(points: &[f64], map: AffineMap, m: usize) -> Result<Self> {
        if m == 0 || points.len() < m {
            return Err(QnsError::Config(format!("need 1 ≤ m ≤ N, got m = {m}, N = {}", points.len())));
        }
        map.check(points)?;
        let xs: Vec<f64> = points.iter().map(|&p| map.apply(p)).collect();
        let degrees: Vec<(usize, usize)> = (0..m).map(|k| (k, 0)).collect();
        let raw = par::map_range(m, |k| xs.iter().map(|&x| cheby_unchecked(k, x)).collect::<Vec<_>>());
        Self::finish(m, 1, vec![xs], vec![map], degrees, raw)
    }

    /// 2D tensor-product basis over the `nx × ny` node set ordered
    /// `k = i + j·nx` (x fastest), `m²` vectors `T_j(x̃)T_k(ỹ)`.
    pub fn build_2d(x_points: &[f64], mx: AffineMap, y_points: &[f64], my: AffineMap, m: usize) -> Result<Self> {
        let (nx, ny) = (x_points.len(), y_points.len());
        if m == 0 || nx < m || ny < m {
            return Err(QnsError::Config(format!("need 1 ≤ m ≤ min(Nx, Ny), got m = {m}, {nx}×{ny}")));
        }
        mx.check(x_points)?;
        my.check(y_points)?;
        let xs: Vec<f64> = x_points.iter().map(|&p| mx.apply(p)).collect();
        let ys: Vec<f64> = y_points.iter().map(|&p| my.apply(p)).collect();
        let tx: Vec<Vec<f64>> = (0..m).map(|k| xs.iter().map(|&x| cheby_unchecked(k, x)).collect()).collect();
        let ty: Vec<Vec<f64>> = (0..m).map(|k| ys.iter().map(|&y| cheby_unchecked(k, y)).collect()).collect();
        let degrees: Vec<(usize, usize)> = (0..m).flat_map(|k| (0..m).map(move |j| (j, k))).collect();
        let raw = par::map_range(degrees.len(), |a| {
            let (j, k) = degrees[a];
            let mut v = Vec::with_capacity(nx * ny);
            for yk in &ty[k] {
                for xj in &tx[j] {
                    v.push(xj * yk);
                }
            }
            v
        });
        Self::finish(m, 2, vec![xs, ys], vec![mx, my], degrees, raw)
    }

    fn finish(
        m: usize,
        dims: usize,
        node_coords: Vec<Vec<f64>>,
        maps: Vec<AffineMap>,
        degrees: Vec<(usize, usize)>,
        raw: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut basis_vectors = Vec::with_capacity(raw.len());
        let mut norms = Vec::with_capacity(raw.len());
        for v in raw {
            let (u, n) = unit(v)?;
            basis_vectors.push(u);
            norms.push(n);
        }
        let k = basis_vectors.len();
        let cols = par::map_range(k, |a| (0..k).map(|b| dot(&basis_vectors[a], &basis_vectors[b])).collect::<Vec<_>>());
        let mut gram = DMatrix::from_fn(k, k, |r, c| cols[c][r]);
        // exact symmetry for the factorization
        for r in 0..k {
            for c in r + 1..k {
                let s = 0.5 * (gram[(r, c)] + gram[(c, r)]);
                gram[(r, c)] = s;
                gram[(c, r)] = s;
            }
        }
        let ev = gram.clone().symmetric_eigenvalues();
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_GRAM_CONDITION) {
            return Err(QnsError::IllConditioned(condition));
        }
        let chol = match gram.clone().cholesky() {
            Some(c) => c,
            None => {
                let eps = 1e-12 * gram.trace() / k as f64;
                let reg = &gram + DMatrix::identity(k, k) * eps;
                reg.cholesky().ok_or(QnsError::IllConditioned(condition))?
            }
        };
        Ok(Self { m, dims, node_coords, maps, degrees, norms, basis_vectors, gram, condition, chol })
    }

    pub fn len(&self) -> usize {
        self.basis_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis_vectors.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.basis_vectors[0].len()
    }

    /// Coefficients `c = G⁻¹ v`.
    pub fn solve_gram(&self, overlaps: &[f64]) -> Result<Vec<f64>> {
        if overlaps.len() != self.len() {
            return Err(QnsError::Shape { expected: self.len(), got: overlaps.len() });
        }
        Ok(self.chol.solve(&DVector::from_column_slice(overlaps)).iter().copied().collect())
    }

    /// `Σ_a c_a φ_a`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.n_points();
        let mut out = vec![0.0; n];
        for (c, phi) in coeffs.iter().zip(&self.basis_vectors) {
            out.iter_mut().zip(phi).for_each(|(o, p)| *o += c * p);
        }
        out
    }

    /// Derivatives of `Σ_a c_a φ_a` with respect to each physical
    /// coordinate, at the sample points. Returns one vector per dimension.
    pub fn derivative(&self, coeffs: &[f64]) -> Result<Vec<Vec<f64>>> {
        if coeffs.len() != self.len() {
            return Err(QnsError::Shape { expected: self.len(), got: coeffs.len() });
        }
        let nx = self.node_coords[0].len();
        let mut out = vec![vec![0.0; self.n_points()]; self.dims];
        for (a, &(j, k)) in self.degrees.iter().enumerate() {
            let w = coeffs[a] / self.norms[a];
            if w == 0.0 {
                continue;
            }
            if self.dims == 1 {
                let s = self.maps[0].slope();
                for (o, &x) in out[0].iter_mut().zip(&self.node_coords[0]) {
                    *o += w * s * cheby_derivative(j, x);
                }
            } else {
                let (sx, sy) = (self.maps[0].slope(), self.maps[1].slope());
                for (l, &y) in self.node_coords[1].iter().enumerate() {
                    let (ty, dty) = (cheby_unchecked(k, y), cheby_derivative(k, y));
                    for (i, &x) in self.node_coords[0].iter().enumerate() {
                        let idx = i + l * nx;
                        out[0][idx] += w * sx * cheby_derivative(j, x) * ty;
                        out[1][idx] += w * sy * cheby_unchecked(j, x) * dty;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Shot budget per overlap. `shots = None` returns exact overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotModel {
    pub shots: Option<u64>,
    pub seed: u64,
}

impl ShotModel {
    pub fn new(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(QnsError::Config("shots must be at least 1".into()));
        }
        Ok(Self { shots: Some(shots), seed })
    }

    pub fn exact() -> Self {
        Self { shots: None, seed: 0 }
    }

    /// Independent generator for stream `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Samples `2k/N − 1` with `k ~ Binomial(N, (1 + r)/2)`.
pub fn sample_overlap(r: f64, shots: u64, rng: &mut ChaCha8Rng) -> f64 {
    let p = ((1.0 + r) / 2.0).clamp(0.0, 1.0);
    let k = Binomial::new(shots, p).expect("probability clamped to [0, 1]").sample(rng);
    2.0 * k as f64 / shots as f64 - 1.0
}

/// Hadamard-test estimate of `⟨φ|ψ⟩` for real normalized vectors, using
/// stream `index` of the model's generator.
pub fn overlap_estimate(state: &[f64], phi: &[f64], model: &ShotModel, index: u64) -> Result<f64> {
    if state.len() != phi.len() {
        return Err(QnsError::Shape { expected: phi.len(), got: state.len() });
    }
    let r = dot(state, phi);
    Ok(match model.shots {
        None => r,
        Some(n) => sample_overlap(r, n, &mut model.stream(index)),
    })
}

fn unitary_preparing(v: &[f64], dim: usize) -> Result<DMatrix<Complex64>> {
    // Householder reflection mapping |0⟩ onto v
    let mut w = DVector::<f64>::zeros(dim);
    for (a, b) in w.iter_mut().zip(v) {
        *a = *b;
    }
    w[0] -= 1.0;
    let n2 = w.norm_squared();
    let mut h = DMatrix::<f64>::identity(dim, dim);
    if n2 > 1e-28 {
        h -= (&w * w.transpose()) * (2.0 / n2);
    }
    Ok(h.map(|x| Complex64::new(x, 0.0)))
}

/// Hadamard test built from gates on at most 6 data qubits. The ancilla
/// controls `U_ψ` and anti-controls `U_φ`, so `P(0) = (1 + Re⟨φ|ψ⟩)/2`.
/// Returns the estimate and the exact ancilla probability `P(1)`.
pub fn gate_level_hadamard_test(state: &[f64], phi: &[f64], model: &ShotModel, index: u64) -> Result<(f64, f64)> {
    if state.len() != phi.len() || !state.len().is_power_of_two() {
        return Err(QnsError::Contract("vectors must share a power-of-two length".into()));
    }
    let n = state.len().trailing_zeros() as usize;
    if n > 6 {
        return Err(QnsError::Scope(format!("gate-level Hadamard test limited to 6 qubits, got {n}")));
    }
    let dim = 1 << n;
    let up = crate::qsim::Unitary::new(&unitary_preparing(state, dim)?)?;
    let uf = crate::qsim::Unitary::new(&unitary_preparing(phi, dim)?)?;
    let reg: Vec<usize> = (0..n).collect();
    let anc = n;
    let mut s = StateVector::zero(n + 1);
    s.apply_single_qubit(&gates::h(), anc)?;
    s.apply_dense_unitary(&up, &reg, &[anc])?;
    s.apply_single_qubit(&gates::x(), anc)?;
    s.apply_dense_unitary(&uf, &reg, &[anc])?;
    s.apply_single_qubit(&gates::x(), anc)?;
    s.apply_single_qubit(&gates::h(), anc)?;
    let p0 = s.probability(anc, 0);
    let est = match model.shots {
        None => 2.0 * p0 - 1.0,
        Some(shots) => {
            let k =
                Binomial::new(shots, p0.clamp(0.0, 1.0)).expect("valid probability").sample(&mut model.stream(index));
            2.0 * k as f64 / shots as f64 - 1.0
        }
    };
    Ok((est, 1.0 - p0))
}

/// Result of a tomographic reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub overlaps: Vec<f64>,
}

/// Estimates every overlap `⟨φ_a|ψ⟩` (stream `a`), applies the Gram
/// correction, and resynthesizes the grid values.
pub fn reconstruct(state: &[f64], basis: &ChebyBasis, model: &ShotModel) -> Result<Reconstruction> {
    if state.len() != basis.n_points() {
        return Err(QnsError::Shape { expected: basis.n_points(), got: state.len() });
    }
    let overlaps = par::map_range(basis.len(), |a| {
        overlap_estimate(state, &basis.basis_vectors[a], model, a as u64).expect("lengths checked")
    });
    let coefficients = basis.solve_gram(&overlaps)?;
    let values = basis.synthesize(&coefficients);
    Ok(Reconstruction { values, coefficients, overlaps })
}

/// Test function for the 1D demo, `ln(x + 2) sin(5 e^{x+1})`.
pub fn demo_function(x: f64) -> f64 {
    (x + 2.0).ln() * (5.0 * (x + 1.0).exp()).sin()
}

/// Outcome of the 1D Chebyshev demo.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoResult {
    pub nodes: Vec<f64>,
    /// Samples of [`demo_function`].
    pub target: Vec<f64>,
    /// Reconstruction rescaled by the target norm.
    pub reconstruction: Vec<f64>,
    /// MSE between the unit-norm state and its reconstruction.
    pub mse: f64,
    /// MSE on the function scale, after multiplying both by the target norm.
    pub mse_rescaled: f64,
}

/// Samples [`demo_function`] on `n` Chebyshev nodes, encodes it as a
/// unit-norm amplitude vector, and reconstructs it with `m` polynomials.
pub fn cheb_demo(n: usize, m: usize, model: &ShotModel) -> Result<DemoResult> {
    let nodes = chebyshev_nodes(n);
    let target: Vec<f64> = nodes.iter().map(|&x| demo_function(x)).collect();
    let norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    let psi: Vec<f64> = target.iter().map(|v| v / norm).collect();
    let basis = ChebyBasis::build_1d(&nodes, AffineMap::new(-1.0, 1.0)?, m)?;
    let rec = reconstruct(&psi, &basis, model)?;
    let mse = crate::metrics::mse(&rec.values, &psi)?;
    let reconstruction: Vec<f64> = rec.values.iter().map(|v| v * norm).collect();
    let mse_rescaled = crate::metrics::mse(&reconstruction, &target)?;
    Ok(DemoResult { nodes, target, reconstruction, mse, mse_rescaled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn sym() -> AffineMap {
        AffineMap::new(-1.0, 1.0).unwrap()
    }

    fn fit(p: &[f64]) -> AffineMap {
        AffineMap::fit(p).unwrap()
    }

    fn l2(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn cheby_values() {
        assert_eq!(cheby_eval(0, 0.37).unwrap(), 1.0);
        assert_eq!(cheby_eval(1, 0.37).unwrap(), 0.37);
        assert_abs_diff_eq!(cheby_eval(2, 0.5).unwrap(), -0.5, epsilon = 1e-15);
        assert!((cheby_eval(7, 0.3f64.cos()).unwrap() - (2.1f64).cos()).abs() < 1e-12);
        assert!(matches!(cheby_eval(3, 1.1), Err(QnsError::Domain(_))));
        assert!(cheby_eval(3, 1.0 + 1e-13).is_ok());
    }

    #[test]
    fn cheby_derivative_matches_trig_form() {
        // T_k'(cos θ) = k sin(kθ)/sin θ
        for k in 0..9 {
            for &th in &[0.2, 0.9, 1.7, 2.8] {
                let exact = k as f64 * (k as f64 * th).sin() / th.sin();
                assert_abs_diff_eq!(cheby_derivative(k, th.cos()), exact, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn single_constant_vector() {
        let b = ChebyBasis::build_1d(&[0.1, 0.5, 0.7], sym(), 1).unwrap();
        assert_eq!(b.len(), 1);
        assert_abs_diff_eq!(b.gram[(0, 0)], 1.0, epsilon = 1e-15);
        for v in &b.basis_vectors[0] {
            assert_abs_diff_eq!(*v, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn gram_diagonal_at_chebyshev_nodes() {
        let b = ChebyBasis::build_1d(&chebyshev_nodes(64), sym(), 20).unwrap();
        for r in 0..20 {
            assert_abs_diff_eq!(b.gram[(r, r)], 1.0, epsilon = 1e-12);
            for c in 0..20 {
                if r != c {
                    assert!(b.gram[(r, c)].abs() < 1e-10);
                }
            }
        }
        for v in &b.basis_vectors {
            assert_abs_diff_eq!(l2(v), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gram_at_uniform_nodes() {
        let pts: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let b = ChebyBasis::build_1d(&pts, fit(&pts), 5).unwrap();
        let off = (0..5).flat_map(|r| (0..5).map(move |c| (r, c))).filter(|(r, c)| r != c);
        assert!(off.map(|(r, c)| b.gram[(r, c)].abs()).fold(0.0, f64::max) > 1e-3);
        // independent Gram computation
        for r in 0..5 {
            for c in 0..5 {
                let g: f64 = b.basis_vectors[r].iter().zip(&b.basis_vectors[c]).map(|(p, q)| p * q).sum();
                assert_abs_diff_eq!(g, b.gram[(r, c)], epsilon = 1e-14);
            }
        }
        assert!(b.gram.clone().cholesky().is_some());
        assert!(b.condition > 1.0 && b.condition.is_finite());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ChebyBasis::build_1d(&[0.0, 1.0], sym(), 3).is_err());
        assert!(ChebyBasis::build_1d(&[0.0, 1.0], sym(), 0).is_err());
        assert!(ChebyBasis::build_2d(&[0.0, 1.0], sym(), &[0.0, 0.5, 1.0], sym(), 3).is_err());
        // 40 near-coincident points cannot support degree 30
        let pts: Vec<f64> = (0..40).map(|i| if i == 0 { 0.0 } else { 1.0 + 1e-3 * i as f64 }).collect();
        assert!(matches!(ChebyBasis::build_1d(&pts, fit(&pts), 30), Err(QnsError::IllConditioned(_))));
    }

    #[test]
    fn exact_recovery_in_span() {
        let pts: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = ChebyBasis::build_1d(&pts, fit(&pts), 4).unwrap();
        let mut psi: Vec<f64> = b.synthesize(&[0.3, -1.0, 0.25, 0.7]);
        let n = l2(&psi);
        psi.iter_mut().for_each(|v| *v /= n);
        let r = reconstruct(&psi, &b, &ShotModel::exact()).unwrap();
        for (a, e) in r.values.iter().zip(&psi) {
            assert_abs_diff_eq!(a, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let ys: Vec<f64> = (0..8).map(|i| (i as f64 / 7.0).powi(2)).collect();
        let b = ChebyBasis::build_2d(&xs, fit(&xs), &ys, fit(&ys), 3).unwrap();
        let mut psi: Vec<f64> = (0..80).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect();
        let n = l2(&psi);
        psi.iter_mut().for_each(|v| *v /= n);
        let r = reconstruct(&psi, &b, &ShotModel::exact()).unwrap();
        let res: Vec<f64> = psi.iter().zip(&r.values).map(|(a, b)| a - b).collect();
        for phi in &b.basis_vectors {
            assert!(dot(&res, phi).abs() < 1e-10);
        }
    }

    #[test]
    fn error_is_nonincreasing_in_m() {
        let pts: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let mut f: Vec<f64> = pts.iter().map(|&x| (3.0 * x).exp() * (7.0 * x).cos()).collect();
        let n = l2(&f);
        f.iter_mut().for_each(|v| *v /= n);
        let mut prev = f64::INFINITY;
        for m in 1..=14 {
            let b = ChebyBasis::build_1d(&pts, fit(&pts), m).unwrap();
            let r = reconstruct(&f, &b, &ShotModel::exact()).unwrap();
            let err = l2(&f.iter().zip(&r.values).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= prev + 1e-12, "m = {m}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn gram_correction_effect() {
        let f = |x: f64| (2.0 * x).sin() + 0.5 * x * x;
        // Chebyshev nodes: coefficients unchanged without the inverse
        let nodes = chebyshev_nodes(32);
        let mut psi: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        let n = l2(&psi);
        psi.iter_mut().for_each(|v| *v /= n);
        let b = ChebyBasis::build_1d(&nodes, sym(), 6).unwrap();
        let r = reconstruct(&psi, &b, &ShotModel::exact()).unwrap();
        for (c, v) in r.coefficients.iter().zip(&r.overlaps) {
            assert!((c - v).abs() < 1e-8);
        }
        // uniform nodes: skipping it leaves a larger residual
        let pts: Vec<f64> = (0..32).map(|i| -1.0 + 2.0 * i as f64 / 31.0).collect();
        let mut psi: Vec<f64> = pts.iter().map(|&x| f(x)).collect();
        let n = l2(&psi);
        psi.iter_mut().for_each(|v| *v /= n);
        let b = ChebyBasis::build_1d(&pts, fit(&pts), 6).unwrap();
        let r = reconstruct(&psi, &b, &ShotModel::exact()).unwrap();
        let naive = b.synthesize(&r.overlaps);
        let e1 = l2(&psi.iter().zip(&r.values).map(|(a, b)| a - b).collect::<Vec<_>>());
        let e2 = l2(&psi.iter().zip(&naive).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(e2 > e1 * 1.5, "{e2} vs {e1}");
    }

    #[test]
    fn overlap_estimator_cases() {
        let psi = [0.6, 0.8];
        let m = ShotModel::new(1000, 3).unwrap();
        assert_eq!(overlap_estimate(&psi, &psi, &m, 0).unwrap(), 1.0);
        let orth = [0.8, -0.6];
        let big = ShotModel::new(10_000_000, 11).unwrap();
        let e = overlap_estimate(&psi, &orth, &big, 0).unwrap();
        assert!(e.abs() < 5.0 * 2.0 * (0.25f64 / 1e7).sqrt());
        let a = overlap_estimate(&psi, &orth, &m, 5).unwrap();
        let b = overlap_estimate(&psi, &orth, &m, 5).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(ShotModel::new(0, 1).is_err());
        assert_eq!(overlap_estimate(&psi, &orth, &ShotModel::exact(), 0).unwrap(), 0.0);
    }

    #[test]
    fn estimator_std_matches_binomial() {
        let r: f64 = 0.35;
        let shots = 5000;
        let m = ShotModel::new(shots, 77).unwrap();
        let samples: Vec<f64> = (0..1000).map(|i| sample_overlap(r, shots, &mut m.stream(i))).collect();
        let mean = samples.iter().sum::<f64>() / 1000.0;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 999.0;
        let expected = ((1.0 - r * r) / shots as f64).sqrt();
        assert!((var.sqrt() / expected - 1.0).abs() < 0.1);
        assert!((mean - r).abs() < 5.0 * expected / 1000f64.sqrt());
    }

    #[test]
    fn gate_level_test_cases() {
        let zero = [1.0, 0.0, 0.0, 0.0];
        let (_, p1) = gate_level_hadamard_test(&zero, &zero, &ShotModel::exact(), 0).unwrap();
        assert_abs_diff_eq!(p1, 0.0, epsilon = 1e-12);
        let (e, _) = gate_level_hadamard_test(&zero, &zero, &ShotModel::exact(), 0).unwrap();
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-12);
        let other = [0.0, 1.0, 0.0, 0.0];
        let (_, p1) = gate_level_hadamard_test(&zero, &other, &ShotModel::exact(), 0).unwrap();
        assert_abs_diff_eq!(p1, 0.5, epsilon = 1e-12);
        assert!(matches!(
            gate_level_hadamard_test(&[1.0; 128], &[1.0; 128], &ShotModel::exact(), 0),
            Err(QnsError::Scope(_))
        ));
    }

    #[test]
    fn gate_level_matches_emulated() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut mk = || {
            let mut v: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = l2(&v);
            v.iter_mut().for_each(|x| *x /= n);
            v
        };
        let (psi, phi) = (mk(), mk());
        let r = dot(&psi, &phi);
        let (exact, _) = gate_level_hadamard_test(&psi, &phi, &ShotModel::exact(), 0).unwrap();
        assert_abs_diff_eq!(exact, r, epsilon = 1e-12);
        let shots = 2000;
        let m = ShotModel::new(shots, 9).unwrap();
        let sigma = ((1.0 - r * r) / shots as f64).sqrt();
        let mut g = 0.0;
        let mut e = 0.0;
        for t in 0..100 {
            g += gate_level_hadamard_test(&psi, &phi, &m, t).unwrap().0;
            e += overlap_estimate(&psi, &phi, &m, 1000 + t).unwrap();
        }
        assert!((g / 100.0 - e / 100.0).abs() < 5.0 * sigma * (2.0f64 / 100.0).sqrt());
    }

    #[test]
    fn constant_state_is_captured() {
        let pts: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        let psi = vec![1.0 / 20f64.sqrt(); 20];
        let b = ChebyBasis::build_1d(&pts, fit(&pts), 3).unwrap();
        let r = reconstruct(&psi, &b, &ShotModel::exact()).unwrap();
        for v in &r.values {
            assert_abs_diff_eq!(*v, psi[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn analytic_derivative_of_polynomial() {
        // f(x, y) = x² y − 3y on [0, 2] × [1, 3], inside the m = 3 span
        let xs: Vec<f64> = (0..9).map(|i| 2.0 * i as f64 / 8.0).collect();
        let ys: Vec<f64> = (0..7).map(|i| 1.0 + 2.0 * (i as f64 / 6.0).powf(1.3)).collect();
        let b = ChebyBasis::build_2d(&xs, fit(&xs), &ys, fit(&ys), 3).unwrap();
        let mut f = Vec::new();
        for &y in &ys {
            for &x in &xs {
                f.push(x * x * y - 3.0 * y);
            }
        }
        let r = reconstruct(&f, &b, &ShotModel::exact()).unwrap();
        let d = b.derivative(&r.coefficients).unwrap();
        for (l, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                assert_abs_diff_eq!(d[0][i + l * 9], 2.0 * x * y, epsilon = 1e-9);
                assert_abs_diff_eq!(d[1][i + l * 9], x * x - 3.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn demo_meets_mse_bound() {
        let r = cheb_demo(64, 20, &ShotModel::new(300, 2024).unwrap()).unwrap();
        assert!(r.mse <= 0.01, "mse {}", r.mse);
        let exact = cheb_demo(64, 20, &ShotModel::exact()).unwrap();
        assert!(exact.mse < r.mse);
        // both scales differ by exactly the squared norm
        let n2: f64 = r.target.iter().map(|v| v * v).sum();
        assert!((r.mse_rescaled / r.mse - n2).abs() < 1e-9 * n2);
    }
}
