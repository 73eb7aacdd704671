//! Pauli-string expansion `A = Σ c_k P_k` of Hermitian matrices.
//!
//! A string is stored as two bit masks: `x` marks qubits carrying X or Y,
//! `z` marks qubits carrying Z or Y. On a basis state,
//! `P|r⟩ = i^{#Y} (−1)^{|r ∧ z|} |r ⊕ x⟩`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QnsError, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub n_qubits: usize,
    pub x: u64,
    pub z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self { n_qubits, x: 0, z: 0 }
    }

    /// Builds from per-qubit letters, `letters[q]` acting on qubit `q`.
    pub fn from_letters(letters: &[Pauli]) -> Self {
        let (mut x, mut z) = (0u64, 0u64);
        for (q, p) in letters.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => x |= 1 << q,
                Pauli::Y => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                Pauli::Z => z |= 1 << q,
            }
        }
        Self { n_qubits: letters.len(), x, z }
    }

    pub fn letter(&self, q: usize) -> Pauli {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `⟨r ⊕ x| P |r⟩`, the only nonzero entry in column `r`.
    #[inline]
    pub fn phase(&self, r: u64) -> Complex64 {
        let sign = if (r & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        match self.y_count() % 4 {
            0 => Complex64::new(sign, 0.0),
            1 => Complex64::new(0.0, sign),
            2 => Complex64::new(-sign, 0.0),
            _ => Complex64::new(0.0, -sign),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for r in 0..dim as u64 {
            m[((r ^ self.x) as usize, r as usize)] = self.phase(r);
        }
        m
    }
}

/// Label with the highest qubit first, so `"XI"` is X on qubit 1.
impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_qubits).rev() {
            let c = match self.letter(q) {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = QnsError;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > 63 {
            return Err(QnsError::Parse(format!("Pauli word of length {} is too long", s.len())));
        }
        let letters = s
            .chars()
            .rev()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(QnsError::Parse(format!("invalid Pauli letter `{other}` in `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_letters(&letters))
    }
}

/// Real-coefficient Pauli expansion of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTermList {
    pub n_qubits: usize,
    pub terms: Vec<(f64, PauliString)>,
}

impl PauliTermList {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (c, p) in &self.terms {
            for r in 0..dim as u64 {
                m[((r ^ p.x) as usize, r as usize)] += p.phase(r) * *c;
            }
        }
        m
    }
}

const PRUNE: f64 = 1e-12;

/// Decomposes a Hermitian `2^n × 2^n` matrix with `c_k = tr(P_k A)/2^n`,
/// dropping `|c_k| < 1e-12`. Terms come out in `(x, z)` mask order.
pub fn pauli_decompose(a: &DMatrix<Complex64>) -> Result<PauliTermList> {
    let dim = a.nrows();
    if dim != a.ncols() || dim == 0 || !dim.is_power_of_two() {
        return Err(QnsError::Contract(format!(
            "Pauli decomposition needs a square power-of-two matrix, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = dim.trailing_zeros() as usize;
    if n > 10 {
        return Err(QnsError::Scope(format!("{n}-qubit Pauli decomposition is too large")));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(f64::MIN_POSITIVE);
    for r in 0..dim {
        for c in r..dim {
            if (a[(r, c)] - a[(c, r)].conj()).norm() > 1e-12 * scale {
                return Err(QnsError::Contract(format!("matrix is not Hermitian at ({r}, {c})")));
            }
        }
    }
    // tr(P A) = Σ_s ⟨s⊕x|P|s⟩ A[s, s⊕x]
    let coeffs = par::map_range(dim * dim, |idx| {
        let p = PauliString { n_qubits: n, x: (idx / dim) as u64, z: (idx % dim) as u64 };
        let mut tr = Complex64::new(0.0, 0.0);
        for s in 0..dim as u64 {
            tr += p.phase(s) * a[(s as usize, (s ^ p.x) as usize)];
        }
        (tr / dim as f64, p)
    });
    let terms = coeffs.into_iter().filter(|(c, _)| c.norm() >= PRUNE).map(|(c, p)| (c.re, p)).collect();
    Ok(PauliTermList { n_qubits: n, terms })
}

/// Real symmetric convenience wrapper around [`pauli_decompose`].
pub fn pauli_decompose_real(a: &DMatrix<f64>) -> Result<PauliTermList> {
    pauli_decompose(&a.map(|v| Complex64::new(v, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
        let dim = 1 << n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&m + m.adjoint()).map(|v| v * 0.5)
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    #[test]
    fn identity_four() {
        let t = pauli_decompose(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(t.terms.len(), 1);
        assert_eq!(t.terms[0].0, 1.0);
        assert_eq!(t.terms[0].1.to_string(), "II");
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let t = pauli_decompose_real(&a).unwrap();
        let labels: Vec<(f64, String)> = t.terms.iter().map(|(c, p)| (*c, p.to_string())).collect();
        assert_eq!(labels, vec![(2.0, "I".to_string()), (1.0, "X".to_string())]);
    }

    #[test]
    fn single_qubit_matrices() {
        for (label, m) in [("X", [[0.0, 1.0], [1.0, 0.0]]), ("Z", [[1.0, 0.0], [0.0, -1.0]])] {
            let p: PauliString = label.parse().unwrap();
            let d = p.to_dense();
            for r in 0..2 {
                for c in 0..2 {
                    assert_eq!(d[(r, c)], Complex64::new(m[r][c], 0.0));
                }
            }
        }
        let y: PauliString = "Y".parse().unwrap();
        let d = y.to_dense();
        assert_eq!(d[(0, 1)], Complex64::new(0.0, -1.0));
        assert_eq!(d[(1, 0)], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn label_order_is_highest_qubit_first() {
        let p: PauliString = "XZ".parse().unwrap();
        assert_eq!(p.letter(0), Pauli::Z);
        assert_eq!(p.letter(1), Pauli::X);
        // XZ = X ⊗ Z as a Kronecker product with qubit 1 most significant
        let d = p.to_dense();
        assert_eq!(d[(2, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(d[(3, 1)], Complex64::new(-1.0, 0.0));
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn round_trip_random_hermitian() {
        for n in 1..=6 {
            let a = random_hermitian(n, 100 + n as u64);
            let t = pauli_decompose(&a).unwrap();
            assert!(max_diff(&t.reconstruct(), &a) < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pauli_decompose(&DMatrix::identity(3, 3)).is_err());
        let mut a = DMatrix::<Complex64>::identity(2, 2);
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(pauli_decompose(&a), Err(QnsError::Contract(_))));
    }
}
