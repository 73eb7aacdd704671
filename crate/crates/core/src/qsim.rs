//! Dense statevector simulator.
//!
//! Amplitude `k` belongs to the basis state whose qubit `q` is bit `q` of `k`
//! (qubit 0 is the least significant bit). Gates mutate the state in place.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QnsError, Result};
use crate::linalg::PauliString;
use crate::par;

pub type Gate = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Post-selection refuses outcomes less likely than this.
pub const POSTSELECT_MIN_PROB: f64 = 1e-14;

pub mod gates {
    use super::*;

    pub fn h() -> Gate {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [[ONE * s, ONE * s], [ONE * s, -ONE * s]]
    }

    pub fn x() -> Gate {
        [[ZERO, ONE], [ONE, ZERO]]
    }

    pub fn y() -> Gate {
        [[ZERO, -I], [I, ZERO]]
    }

    pub fn z() -> Gate {
        [[ONE, ZERO], [ZERO, -ONE]]
    }

    /// `diag(1, e^{iφ})`.
    pub fn phase(phi: f64) -> Gate {
        [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, phi)]]
    }

    pub fn rx(theta: f64) -> Gate {
        let (s, c) = (0.5 * theta).sin_cos();
        [[ONE * c, -I * s], [-I * s, ONE * c]]
    }

    pub fn ry(theta: f64) -> Gate {
        let (s, c) = (0.5 * theta).sin_cos();
        [[ONE * c, -ONE * s], [ONE * s, ONE * c]]
    }

    pub fn rz(theta: f64) -> Gate {
        [[Complex64::from_polar(1.0, -0.5 * theta), ZERO], [ZERO, Complex64::from_polar(1.0, 0.5 * theta)]]
    }

    pub fn adjoint(g: &Gate) -> Gate {
        [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]]
    }

    pub fn is_unitary(g: &Gate, tol: f64) -> bool {
        for r in 0..2 {
            for c in 0..2 {
                let v = g[r][0] * g[c][0].conj() + g[r][1] * g[c][1].conj();
                let want = if r == c { ONE } else { ZERO };
                if (v - want).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// A validated dense unitary on `r` qubits, stored row-major.
#[derive(Debug, Clone)]
pub struct Unitary {
    dim: usize,
    data: Vec<Complex64>,
}

impl Unitary {
    /// Checks `U U† = I` to 1e-9.
    pub fn new(m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = m.nrows();
        if dim != m.ncols() || !dim.is_power_of_two() {
            return Err(QnsError::Contract(format!(
                "unitary must be square with power-of-two size, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let err = (m * m.adjoint() - DMatrix::<Complex64>::identity(dim, dim))
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.norm()));
        if err > 1e-9 {
            return Err(QnsError::Contract(format!("matrix is not unitary (max deviation {err:e})")));
        }
        let data = (0..dim * dim).map(|k| m[(k / dim, k % dim)]).collect();
        Ok(Self { dim, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let data = (0..d * d).map(|k| self.data[(k % d) * d + k / d].conj()).collect();
        Self { dim: d, data }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

fn mask_of(qubits: &[usize]) -> u64 {
    qubits.iter().fold(0, |m, &q| m | (1u64 << q))
}

/// Gathers the bits of `i` at positions `qubits` into a compact integer.
#[inline]
fn extract(i: usize, qubits: &[usize]) -> usize {
    qubits.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b))
}

/// Inverse of [`extract`]: spreads the low bits of `v` onto `qubits`.
#[inline]
fn deposit(v: usize, qubits: &[usize]) -> usize {
    qubits.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((v >> b) & 1) << q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Self {
        assert!(n_qubits < 31, "{n_qubits} qubits exceed the dense simulator");
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Self { n_qubits, amps }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut s = Self::zero(n_qubits);
        s.amps[0] = ZERO;
        s.amps[index] = ONE;
        s
    }

    /// Normalized amplitudes; the norm must be 1 to 1e-10.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let s = Self::from_raw(amps)?;
        let n = s.norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return Err(QnsError::Contract(format!("state norm² is {n}, expected 1")));
        }
        Ok(s)
    }

    /// Any power-of-two amplitude array, normalized or not. Gate kernels are
    /// linear, so this is the entry point for superposition-linearity checks.
    pub fn from_raw(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(QnsError::Contract(format!("state length {} is not a power of two", amps.len())));
        }
        Ok(Self { n_qubits: amps.len().trailing_zeros() as usize, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q < self.n_qubits {
            Ok(())
        } else {
            Err(QnsError::Contract(format!("qubit {q} out of range for {} qubits", self.n_qubits)))
        }
    }

    fn check_distinct(&self, qubits: &[usize]) -> Result<()> {
        for (a, &q) in qubits.iter().enumerate() {
            self.check_qubit(q)?;
            if qubits[..a].contains(&q) {
                return Err(QnsError::Contract(format!("qubit {q} used twice in one operation")));
            }
        }
        Ok(())
    }

    /// 2×2 gate on `target` wherever all `controls` are 1.
    fn apply_2x2(&mut self, g: &Gate, target: usize, control_mask: u64) {
        let half = 1usize << target;
        let cmask = control_mask as usize;
        let g = *g;
        par::for_each_chunk_mut(&mut self.amps, half << 1, |ci, chunk| {
            let base = ci * (half << 1);
            let (lo, hi) = chunk.split_at_mut(half);
            for a in 0..half {
                if (base + a) & cmask != cmask {
                    continue;
                }
                let (x0, x1) = (lo[a], hi[a]);
                lo[a] = g[0][0] * x0 + g[0][1] * x1;
                hi[a] = g[1][0] * x0 + g[1][1] * x1;
            }
        });
    }

    pub fn apply_single_qubit(&mut self, gate: &Gate, target: usize) -> Result<()> {
        self.apply_multi_controlled(gate, &[], target)
    }

    pub fn apply_controlled(&mut self, gate: &Gate, control: usize, target: usize) -> Result<()> {
        self.apply_multi_controlled(gate, &[control], target)
    }

    pub fn apply_multi_controlled(&mut self, gate: &Gate, controls: &[usize], target: usize) -> Result<()> {
        if !gates::is_unitary(gate, 1e-10) {
            return Err(QnsError::Contract("gate is not unitary".into()));
        }
        let mut all = controls.to_vec();
        all.push(target);
        self.check_distinct(&all)?;
        self.apply_2x2(gate, target, mask_of(controls));
        Ok(())
    }

    /// Multiplies every amplitude whose `qubits` are all 1 by `e^{iφ}`.
    pub fn apply_mc_phase(&mut self, phi: f64, qubits: &[usize]) -> Result<()> {
        self.check_distinct(qubits)?;
        let m = mask_of(qubits) as usize;
        let ph = Complex64::from_polar(1.0, phi);
        par::for_each_chunk_mut(&mut self.amps, 1 << 12, |ci, chunk| {
            let base = ci << 12;
            for (a, v) in chunk.iter_mut().enumerate() {
                if (base + a) & m == m {
                    *v *= ph;
                }
            }
        });
        Ok(())
    }

    pub fn apply_swap(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_distinct(&[a, b])?;
        let (ma, mb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & ma != 0 && i & mb == 0 {
                self.amps.swap(i, i ^ ma ^ mb);
            }
        }
        Ok(())
    }

    /// `exp(−i (angle/2) P)` with letter `q` of `word` acting on `qubits[q]`,
    /// applied only where every control qubit is 1. With controls, an
    /// identity word becomes a relative phase.
    pub fn apply_pauli_rotation(
        &mut self,
        word: &PauliString,
        angle: f64,
        qubits: &[usize],
        controls: &[usize],
    ) -> Result<()> {
        if word.n_qubits != qubits.len() {
            return Err(QnsError::Contract(format!(
                "Pauli word has {} letters for {} qubits",
                word.n_qubits,
                qubits.len()
            )));
        }
        let mut all = qubits.to_vec();
        all.extend_from_slice(controls);
        self.check_distinct(&all)?;
        let x = deposit(word.x as usize, qubits) as u64;
        let z = deposit(word.z as usize, qubits) as u64;
        let spread = PauliString { n_qubits: self.n_qubits, x, z };
        let cmask = mask_of(controls) as usize;
        let (s, c) = (0.5 * angle).sin_cos();
        let src = self.amps.clone();
        par::fill_indexed(&mut self.amps, |r| {
            if r & cmask != cmask {
                return src[r];
            }
            // (Pψ)[r] = ⟨r|P|r⊕x⟩ ψ[r⊕x]
            let partner = r ^ x as usize;
            let p = spread.phase(partner as u64) * src[partner];
            src[r] * c - I * s * p
        });
        Ok(())
    }

    /// Quantum Fourier transform on `register` (`register[0]` is the least
    /// significant bit of the register value):
    /// `|j⟩ ↦ 2^{−r/2} Σ_k e^{±2πi jk/2^r} |k⟩`, sign `+` for the forward transform.
    pub fn qft(&mut self, register: &[usize], inverse: bool) -> Result<()> {
        self.check_distinct(register)?;
        let r = register.len();
        let h = gates::h();
        let angle = |a: usize, b: usize| std::f64::consts::PI / (1u64 << (a - b)) as f64;
        if !inverse {
            for a in (0..r).rev() {
                self.apply_2x2(&h, register[a], 0);
                for b in (0..a).rev() {
                    self.apply_mc_phase(angle(a, b), &[register[b], register[a]])?;
                }
            }
            for k in 0..r / 2 {
                self.apply_swap(register[k], register[r - 1 - k])?;
            }
        } else {
            for k in 0..r / 2 {
                self.apply_swap(register[k], register[r - 1 - k])?;
            }
            for a in 0..r {
                for b in 0..a {
                    self.apply_mc_phase(-angle(a, b), &[register[b], register[a]])?;
                }
                self.apply_2x2(&h, register[a], 0);
            }
        }
        Ok(())
    }

    /// Applies `U` to `register` wherever all `controls` are 1.
    pub fn apply_dense_unitary(&mut self, u: &Unitary, register: &[usize], controls: &[usize]) -> Result<()> {
        if u.n_qubits() != register.len() {
            return Err(QnsError::Contract(format!(
                "{}-qubit unitary applied to {} qubits",
                u.n_qubits(),
                register.len()
            )));
        }
        let mut all = register.to_vec();
        all.extend_from_slice(controls);
        self.check_distinct(&all)?;
        let dim = u.dim;
        let reg_mask = mask_of(register) as usize;
        let cmask = mask_of(controls) as usize;
        let offs: Vec<usize> = (0..dim).map(|c| deposit(c, register)).collect();
        let src = self.amps.clone();
        // blocks whose amplitudes are all zero stay zero
        let outer: Vec<usize> = (0..self.n_qubits).filter(|q| reg_mask >> q & 1 == 0).collect();
        let mut live = vec![false; src.len() >> register.len()];
        for (i, a) in src.iter().enumerate() {
            if *a != ZERO {
                live[extract(i, &outer)] = true;
            }
        }
        par::fill_indexed(&mut self.amps, |i| {
            if i & cmask != cmask {
                return src[i];
            }
            if !live[extract(i, &outer)] {
                return ZERO;
            }
            let row = extract(i, register);
            let base = i & !reg_mask;
            let urow = &u.data[row * dim..(row + 1) * dim];
            urow.iter().zip(&offs).fold(ZERO, |acc, (uv, &o)| acc + uv * src[base | o])
        });
        Ok(())
    }

    /// Multiplies amplitude `i` by `phases[extract(i, register)]` wherever
    /// `control` is 1: a controlled diagonal unitary on `register`.
    pub fn apply_controlled_diagonal(
        &mut self,
        phases: &[Complex64],
        register: &[usize],
        control: usize,
    ) -> Result<()> {
        if phases.len() != 1 << register.len() {
            return Err(QnsError::Contract("diagonal length does not match register".into()));
        }
        if phases.iter().any(|p| (p.norm() - 1.0).abs() > 1e-10) {
            return Err(QnsError::Contract("diagonal entries must have unit modulus".into()));
        }
        let mut all = register.to_vec();
        all.push(control);
        self.check_distinct(&all)?;
        let cbit = 1usize << control;
        par::for_each_chunk_mut(&mut self.amps, 1 << 12, |ci, chunk| {
            let base = ci << 12;
            for (a, v) in chunk.iter_mut().enumerate() {
                let i = base + a;
                if i & cbit != 0 {
                    *v *= phases[extract(i, register)];
                }
            }
        });
        Ok(())
    }

    /// `R_y(angles[l])` on `target`, where `l` is the value held in `select`.
    pub fn apply_multiplexed_ry(&mut self, select: &[usize], target: usize, angles: &[f64]) -> Result<()> {
        if angles.len() != 1 << select.len() {
            return Err(QnsError::Contract("one angle per select value required".into()));
        }
        let mut all = select.to_vec();
        all.push(target);
        self.check_distinct(&all)?;
        let gs: Vec<Gate> = angles.iter().map(|&t| gates::ry(t)).collect();
        let half = 1usize << target;
        par::for_each_chunk_mut(&mut self.amps, half << 1, |ci, chunk| {
            let base = ci * (half << 1);
            let (lo, hi) = chunk.split_at_mut(half);
            for a in 0..half {
                let g = &gs[extract(base + a, select)];
                let (x0, x1) = (lo[a], hi[a]);
                lo[a] = g[0][0] * x0 + g[0][1] * x1;
                hi[a] = g[1][0] * x0 + g[1][1] * x1;
            }
        });
        Ok(())
    }

    /// Born probability of reading `outcome` on `qubit`.
    pub fn probability(&self, qubit: usize, outcome: u8) -> f64 {
        let bit = 1usize << qubit;
        let want = if outcome == 1 { bit } else { 0 };
        self.amps.iter().enumerate().filter(|(i, _)| i & bit == want).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Projects onto `qubit = outcome`, renormalizes, and returns the
    /// pre-projection probability of that outcome.
    pub fn project_and_renormalize(&mut self, qubit: usize, outcome: u8) -> Result<f64> {
        self.project_qubits(&[(qubit, outcome)])
    }

    /// Joint projection onto several `(qubit, outcome)` pairs.
    pub fn project_qubits(&mut self, fixed: &[(usize, u8)]) -> Result<f64> {
        let qs: Vec<usize> = fixed.iter().map(|f| f.0).collect();
        self.check_distinct(&qs)?;
        if fixed.iter().any(|f| f.1 > 1) {
            return Err(QnsError::Contract("measurement outcome must be 0 or 1".into()));
        }
        let mask = mask_of(&qs) as usize;
        let want = fixed.iter().filter(|f| f.1 == 1).fold(0usize, |m, f| m | (1 << f.0));
        let total = self.norm_sqr();
        let kept: f64 = self.amps.iter().enumerate().filter(|(i, _)| i & mask == want).map(|(_, a)| a.norm_sqr()).sum();
        let prob = kept / total;
        if !(prob > POSTSELECT_MIN_PROB) {
            return Err(QnsError::PostSelection(prob));
        }
        let scale = 1.0 / kept.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == want {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(prob)
    }

    /// Amplitudes of `register` with every other qubit fixed as in `fixed_value`
    /// (bits outside the register).
    pub fn register_slice(&self, register: &[usize], fixed_value: usize) -> Vec<Complex64> {
        let reg_mask = mask_of(register) as usize;
        let base = fixed_value & !reg_mask;
        (0..1usize << register.len()).map(|v| self.amps[base | deposit(v, register)]).collect()
    }
}
