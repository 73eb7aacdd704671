//! Randomized invariants across grid, linalg, qsim, hhl and qst.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qns_core::grid::{build_grid, build_periodic_grid, metric_coeff, stretch_map, Axis, StretchConfig};
use qns_core::hhl::{calibrate, hhl_solve, HHLConfig};
use qns_core::linalg::{
    assemble_laplacian, direct_solve, pauli_decompose, sym_eigen_dense, BoundaryKind, LaplacianForm, SparseSymMatrix,
};
use qns_core::metrics::{are, ARE_EPS};
use qns_core::qsim::{gates, StateVector};
use qns_core::qst::{chebyshev_nodes, reconstruct, AffineMap, ChebyBasis, ShotModel};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

fn orthogonal(seed: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_iterator(n, n, seed.iter().cloned().cycle().take(n * n)).qr().q()
}

fn stretch() -> impl Strategy<Value = StretchConfig> {
    prop_oneof![Just(StretchConfig::uniform(1.0)), (0.7f64..4.0).prop_map(|b| StretchConfig::hyperbolic(b, 1.0))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_is_monotone_and_metric_consistent(n in 2usize..40, cfg in stretch()) {
        let axis = Axis::walled(n, &cfg).unwrap();
        prop_assert!(axis.coords.windows(2).all(|w| w[1] > w[0]));
        for k in 1..=n {
            let xi = k as f64 / (n + 1) as f64;
            let fd = (stretch_map(xi + 1e-6, &cfg).unwrap() - stretch_map(xi - 1e-6, &cfg).unwrap()) / 2e-6;
            prop_assert!((metric_coeff(xi, &cfg).unwrap() - 1.0 / fd).abs() < 1e-7);
        }
    }

    #[test]
    fn folding_stretch_is_rejected(beta in 0.01f64..0.63) {
        prop_assert!(Axis::walled(8, &StretchConfig::hyperbolic(beta, 1.0)).is_err());
    }

    #[test]
    fn laplacian_invariants(n in 2usize..7, m in 2usize..7, cfg in stretch(), form in prop_oneof![Just(LaplacianForm::Conservative), Just(LaplacianForm::PointMetric)]) {
        let g = build_grid(n, m, &cfg).unwrap();
        let a = assemble_laplacian(&g, BoundaryKind::Dirichlet, form).unwrap();
        prop_assert!(a.is_symmetric());
        let ev = sym_eigen_dense(&a.to_dense()).unwrap();
        prop_assert!(ev.values.iter().all(|&l| l < 0.0));

        for (grid, bc) in [
            (g.clone(), BoundaryKind::Neumann),
            (build_periodic_grid(n + 1, m + 1, 2.0 * std::f64::consts::PI).unwrap(), BoundaryKind::Periodic),
        ] {
            let a = assemble_laplacian(&grid, bc, LaplacianForm::Conservative).unwrap();
            prop_assert!(a.is_symmetric());
            let ev = sym_eigen_dense(&a.to_dense()).unwrap();
            let tol = 1e-10 * ev.max_abs();
            let zero: Vec<usize> = (0..ev.dim()).filter(|&k| ev.values[k].abs() < tol).collect();
            prop_assert_eq!(zero.len(), 1);
            let col = ev.vectors.column(zero[0]);
            prop_assert!(col.iter().all(|&c| (c - col[0]).abs() < 1e-8));
        }
    }

    #[test]
    fn pauli_round_trip(n in 1usize..=6, seed in prop::collection::vec(-1.0f64..1.0, 32)) {
        let d = 1 << n;
        let mut h = DMatrix::<Complex64>::zeros(d, d);
        for r in 0..d {
            for c in r..d {
                let re = seed[(r * 7 + c * 3) % 32] * ((r + 2 * c) as f64).cos();
                let im = if r == c { 0.0 } else { seed[(r + c * 5 + 1) % 32] };
                h[(r, c)] = Complex64::new(re, im);
                h[(c, r)] = Complex64::new(re, -im);
            }
        }
        let terms = pauli_decompose(&h).unwrap();
        let back = terms.reconstruct();
        prop_assert!((back - &h).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn gates_preserve_norm_and_qft_round_trips(
        q in 1usize..=10,
        amps in prop::collection::vec(-1.0f64..1.0, 64),
        ops in prop::collection::vec((0usize..4, 0usize..10, -3.0f64..3.0), 1..12),
    ) {
        let dim = 1usize << q;
        let raw: Vec<Complex64> = (0..dim).map(|k| Complex64::new(amps[k % 64], amps[(k * 5 + 3) % 64])).collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let mut s = StateVector::from_amplitudes(raw.into_iter().map(|z| z / norm).collect()).unwrap();
        for (kind, t, angle) in ops {
            let t = t % q;
            match kind {
                0 => s.apply_single_qubit(&gates::h(), t).unwrap(),
                1 => s.apply_single_qubit(&gates::ry(angle), t).unwrap(),
                2 if q > 1 => s.apply_controlled(&gates::phase(angle), (t + 1) % q, t).unwrap(),
                _ => s.apply_single_qubit(&gates::rz(angle), t).unwrap(),
            }
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
        let before = s.clone();
        let reg: Vec<usize> = (0..q).collect();
        s.qft(&reg, false).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        s.qft(&reg, true).unwrap();
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn chebyshev_reconstruction_is_an_orthogonal_projection(
        n in 6usize..40,
        m in 1usize..6,
        seed in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let m = m.min(n);
        let pts: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let basis = ChebyBasis::build_1d(&pts, AffineMap::new(0.0, 1.0).unwrap(), m).unwrap();
        let norm = seed[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let psi: Vec<f64> = seed[..n].iter().map(|x| x / norm).collect();
        let rec = reconstruct(&psi, &basis, &ShotModel::exact()).unwrap();
        let resid: Vec<f64> = psi.iter().zip(&rec.values).map(|(a, b)| a - b).collect();
        for phi in &basis.basis_vectors {
            let d: f64 = phi.iter().zip(&resid).map(|(a, b)| a * b).sum();
            prop_assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn are_ignores_sign_and_scales_with_error(v in prop::collection::vec(0.1f64..10.0, 1..20), f in 0.0f64..0.5) {
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        prop_assert!(are(&neg, &v, 0.0).unwrap().iter().all(|&e| e == 0.0));
        let off: Vec<f64> = v.iter().map(|x| x * (1.0 + f)).collect();
        prop_assert!(are(&off, &v, 0.0).unwrap().iter().all(|&e| (e - f).abs() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Eigenvalues on exact clock bins: `λ = l·s` with the largest at `l = 2^n_c − 1`.
    #[test]
    fn hhl_matches_direct_solve_on_random_spd(
        n_b in 1usize..=3,
        bins in prop::collection::vec(1usize..15, 8),
        rot in prop::collection::vec(-1.0f64..1.0, 64),
        b in prop::collection::vec(-1.0f64..1.0, 8),
        s in 0.1f64..5.0,
    ) {
        let n_c = 4;
        let dim = 1 << n_b;
        let mut lambda: Vec<f64> = bins[..dim].iter().map(|&l| l as f64 * s).collect();
        lambda[0] = 15.0 * s;
        let q = orthogonal(&rot, dim);
        let a = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda)) * q.transpose();
        let a = SparseSymMatrix::from_dense(&((&a + a.transpose()) * 0.5)).unwrap();
        let b = &b[..dim];
        prop_assume!(b.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let cfg = HHLConfig { n_c, ..HHLConfig::default() };
        let x = hhl_solve(&a, b, &cfg).unwrap();
        let direct = direct_solve(&a, b).unwrap();
        prop_assert!(cosine(&x.solution, &direct).abs() > 0.999);
        prop_assert!(x.success_probability <= 1.0);
        let cal = calibrate(&x.solution, &direct);
        let e = are(&cal, &direct, ARE_EPS).unwrap();
        prop_assert!(e.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn chebyshev_nodes_give_diagonal_gram_for_every_order() {
    for m in 1..=20 {
        let b = ChebyBasis::build_1d(&chebyshev_nodes(64), AffineMap::new(-1.0, 1.0).unwrap(), m).unwrap();
        assert!((b.condition - 1.0).abs() < 1e-8, "m = {m}: condition {}", b.condition);
    }
}
