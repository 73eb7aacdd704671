//! HHL linear-system solver on the statevector simulator.
//!
//! Register layout for `n_b` problem qubits and `n_c` clock qubits:
//! qubits `0..n_b` hold `|b⟩`, `n_b..n_b+n_c` are the clock (clock qubit `k`
//! controls `U^{2^k}`), and the last qubit is the ancilla flagged by the
//! reciprocal rotation.
//!
//! The Hamiltonian is the sign-normalized system matrix: a negative
//! (semi)definite Laplacian is negated together with its right-hand side so
//! every eigenvalue fed to phase estimation is non-negative. Eigenvalue zero
//! (the constant pressure mode) lands in clock bin 0, which the reciprocal
//! rotation skips, giving pseudoinverse behaviour.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QnsError, Result};
use crate::linalg::{pauli_decompose_real, sym_eigen_dense, EigenDecomposition, PauliTermList, SparseSymMatrix};
use crate::qsim::{gates, StateVector, Unitary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// `U = V e^{iΛt} Vᵀ` from the classical eigendecomposition.
    Spectral,
    /// First-order Lie-Trotter product over the Pauli terms of the matrix.
    Trotter,
}

impl std::str::FromStr for Backend {
    type Err = QnsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "trotter" => Ok(Self::Trotter),
            other => Err(QnsError::Config(format!("unknown backend `{other}`"))),
        }
    }
}

/// How the spectral backend is executed on the simulator. Both produce the
/// same state; the tests pin them against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralExec {
    /// Controlled dense `U^{2^k}` on the problem register.
    GateLevel,
    /// Change of basis `V†` on the problem register, controlled diagonal
    /// phases `e^{iλ_j t 2^k}`, and `V` to return. Same circuit, conjugated.
    Eigenbasis,
}

/// Choice of evolution time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenScaling {
    /// Smallest nonzero eigenvalue sits exactly on clock bin
    /// `⌊λ_min (2^{n_c} − 1)/λ_max⌋`; falls back to `MaxBin` when that bin is 0.
    MinExact,
    /// Largest eigenvalue maps to phase `1 − 2^{−n_c}`.
    MaxBin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HHLConfig {
    /// Problem qubits; `None` uses the smallest register that fits.
    pub n_b: Option<usize>,
    pub n_c: usize,
    pub trotter_steps: usize,
    pub backend: Backend,
    pub spectral_exec: SpectralExec,
    pub scaling: EigenScaling,
    /// Extra factor applied to the evolution time chosen by `scaling`.
    pub evolution_scale: f64,
    /// Reciprocal constant `C`; `None` uses `2^{−n_c}`.
    pub reciprocal_constant: Option<f64>,
}

impl Default for HHLConfig {
    fn default() -> Self {
        Self {
            n_b: None,
            n_c: 8,
            trotter_steps: 150,
            backend: Backend::Spectral,
            spectral_exec: SpectralExec::Eigenbasis,
            scaling: EigenScaling::MinExact,
            evolution_scale: 1.0,
            reciprocal_constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HHLResult {
    /// Unit-norm solution over the original (unpadded) unknowns.
    pub solution: Vec<f64>,
    /// Born weight of ancilla `|1⟩` before post-selection.
    pub success_probability: f64,
    /// Probability that the clock returned to `|0…0⟩`, given ancilla `|1⟩`.
    pub clock_return_probability: f64,
    /// Smallest and largest nonzero eigenvalue magnitudes used for scaling.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub evolution_time: f64,
    /// `‖b‖₂` discarded by amplitude encoding.
    pub b_norm: f64,
}

/// Amplitude-encodes `b` on `n_b` qubits, zero-padded, returning the state
/// and the discarded norm.
pub fn prepare_b(b: &[f64], n_b: usize) -> Result<(StateVector, f64)> {
    let dim = 1usize << n_b;
    if b.len() > dim {
        return Err(QnsError::Config(format!("{} entries do not fit in {n_b} qubits", b.len())));
    }
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(QnsError::Degenerate("right-hand side is zero or not finite".into()));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for (a, v) in amps.iter_mut().zip(b) {
        *a = Complex64::new(v / norm, 0.0);
    }
    Ok((StateVector::from_amplitudes(amps)?, norm))
}

/// Evolution `e^{iHt}` for a fixed Hamiltonian, applied controlled on one qubit.
#[derive(Debug, Clone)]
pub struct Evolution {
    eig: EigenDecomposition,
    time: f64,
    backend: Backend,
    exec: SpectralExec,
    trotter_steps: usize,
    terms: Option<PauliTermList>,
    /// `U^{2^k}` for the gate-level spectral path, built on demand.
    powers: Vec<Unitary>,
    basis: Option<(Unitary, Unitary)>,
}

impl Evolution {
    /// `h` must be real symmetric with size `2^n`. Up to `max_power` powers
    /// `U^{2^k}`, `k < max_power`, are prepared for the gate-level path.
    pub fn new(
        h: &DMatrix<f64>,
        time: f64,
        backend: Backend,
        exec: SpectralExec,
        trotter_steps: usize,
        max_power: usize,
    ) -> Result<Self> {
        let eig = sym_eigen_dense(h)?;
        Self::from_eigen(h, eig, time, backend, exec, trotter_steps, max_power)
    }

    fn from_eigen(
        h: &DMatrix<f64>,
        eig: EigenDecomposition,
        time: f64,
        backend: Backend,
        exec: SpectralExec,
        trotter_steps: usize,
        max_power: usize,
    ) -> Result<Self> {
        if !h.nrows().is_power_of_two() {
            return Err(QnsError::Contract("Hamiltonian size must be a power of two".into()));
        }
        if eig.max_abs() * time >= 2.0 * PI {
            return Err(QnsError::Config(format!(
                "evolution time {time} wraps the phase of eigenvalue {} past 2π",
                eig.max_abs()
            )));
        }
        if trotter_steps == 0 {
            return Err(QnsError::Config("at least one Trotter step is required".into()));
        }
        let mut ev = Self { eig, time, backend, exec, trotter_steps, terms: None, powers: Vec::new(), basis: None };
        match backend {
            Backend::Trotter => ev.terms = Some(pauli_decompose_real(h)?),
            Backend::Spectral => match exec {
                SpectralExec::GateLevel => {
                    ev.powers = (0..max_power).map(|k| ev.spectral_power(k)).collect::<Result<_>>()?;
                }
                SpectralExec::Eigenbasis => {
                    let v = ev.eig.vectors.map(|x| Complex64::new(x, 0.0));
                    let vu = Unitary::new(&v)?;
                    ev.basis = Some((vu.adjoint(), vu));
                }
            },
        }
        Ok(ev)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    fn n_qubits(&self) -> usize {
        self.eig.dim().trailing_zeros() as usize
    }

    fn phases(&self, power: usize, sign: f64) -> Vec<Complex64> {
        let scale = self.time * (1u64 << power) as f64 * sign;
        self.eig.values.iter().map(|l| Complex64::from_polar(1.0, l * scale)).collect()
    }

    fn spectral_power(&self, power: usize) -> Result<Unitary> {
        let d = self.eig.dim();
        let v = self.eig.vectors.map(|x| Complex64::new(x, 0.0));
        let ph = self.phases(power, 1.0);
        let mut vd = v.clone();
        for c in 0..d {
            for r in 0..d {
                vd[(r, c)] *= ph[c];
            }
        }
        Unitary::new(&(vd * v.adjoint()))
    }

    /// Controlled `U^{±2^power}` on `register`, `sign = −1` for the inverse.
    /// In eigenbasis mode the register must already be in the eigenbasis.
    fn apply(
        &self,
        state: &mut StateVector,
        power: usize,
        sign: f64,
        register: &[usize],
        control: usize,
    ) -> Result<()> {
        match self.backend {
            Backend::Spectral => match self.exec {
                SpectralExec::Eigenbasis => {
                    state.apply_controlled_diagonal(&self.phases(power, sign), register, control)
                }
                SpectralExec::GateLevel => {
                    let u = match self.powers.get(power) {
                        Some(u) => u.clone(),
                        None => self.spectral_power(power)?,
                    };
                    let u = if sign < 0.0 { u.adjoint() } else { u };
                    state.apply_dense_unitary(&u, register, &[control])
                }
            },
            Backend::Trotter => {
                let terms = self.terms.as_ref().expect("Trotter backend keeps its Pauli terms");
                let steps = self.trotter_steps * (1usize << power);
                let dt = self.time / self.trotter_steps as f64;
                // e^{i c P dt} = exp(−i (θ/2) P) with θ = −2 c dt
                let order: Vec<usize> =
                    if sign > 0.0 { (0..terms.len()).collect() } else { (0..terms.len()).rev().collect() };
                for _ in 0..steps {
                    for &t in &order {
                        let (c, p) = &terms.terms[t];
                        state.apply_pauli_rotation(p, -2.0 * c * dt * sign, register, &[control])?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Controlled `U^{2^power}`, `U = e^{iHt}`, on a register given in the computational basis.
    pub fn controlled_evolution(
        &self,
        state: &mut StateVector,
        power: usize,
        register: &[usize],
        control: usize,
    ) -> Result<()> {
        self.enter_eigenbasis(state, register)?;
        self.apply(state, power, 1.0, register, control)?;
        self.leave_eigenbasis(state, register)
    }

    fn enter_eigenbasis(&self, state: &mut StateVector, register: &[usize]) -> Result<()> {
        if let Some((vdag, _)) = &self.basis {
            state.apply_dense_unitary(vdag, register, &[])?;
        }
        Ok(())
    }

    fn leave_eigenbasis(&self, state: &mut StateVector, register: &[usize]) -> Result<()> {
        if let Some((_, v)) = &self.basis {
            state.apply_dense_unitary(v, register, &[])?;
        }
        Ok(())
    }
}

fn check_register(evo: &Evolution, register: &[usize]) -> Result<()> {
    if register.len() != evo.n_qubits() {
        return Err(QnsError::Contract(format!(
            "{}-qubit evolution applied to {} qubits",
            evo.n_qubits(),
            register.len()
        )));
    }
    Ok(())
}

fn qpe_core(state: &mut StateVector, evo: &Evolution, register: &[usize], clock: &[usize]) -> Result<()> {
    let h = gates::h();
    for &c in clock {
        state.apply_single_qubit(&h, c)?;
    }
    for (k, &c) in clock.iter().enumerate() {
        evo.apply(state, k, 1.0, register, c)?;
    }
    state.qft(clock, true)
}

fn inverse_qpe_core(state: &mut StateVector, evo: &Evolution, register: &[usize], clock: &[usize]) -> Result<()> {
    state.qft(clock, false)?;
    let h = gates::h();
    for (k, &c) in clock.iter().enumerate().rev() {
        evo.apply(state, k, -1.0, register, c)?;
    }
    for &c in clock {
        state.apply_single_qubit(&h, c)?;
    }
    Ok(())
}

/// Quantum phase estimation of `e^{iHt}` on `register` into `clock`
/// (`clock[0]` least significant). The clock must start in `|0…0⟩`.
pub fn qpe(state: &mut StateVector, evo: &Evolution, register: &[usize], clock: &[usize]) -> Result<()> {
    check_register(evo, register)?;
    evo.enter_eigenbasis(state, register)?;
    qpe_core(state, evo, register, clock)?;
    evo.leave_eigenbasis(state, register)
}

/// Exact adjoint of [`qpe`].
pub fn inverse_qpe(state: &mut StateVector, evo: &Evolution, register: &[usize], clock: &[usize]) -> Result<()> {
    check_register(evo, register)?;
    evo.enter_eigenbasis(state, register)?;
    inverse_qpe_core(state, evo, register, clock)?;
    evo.leave_eigenbasis(state, register)
}

/// Rotation angles `θ_l = 2 asin(C·2^{n_c}/l)` for `l ≥ 1`, `θ_0 = 0`.
pub fn reciprocal_angles(n_c: usize, c: f64) -> Result<Vec<f64>> {
    let m = (1usize << n_c) as f64;
    if !(c > 0.0) || c * m > 1.0 + 1e-12 {
        return Err(QnsError::Config(format!(
            "reciprocal constant {c} must lie in (0, 2^-{n_c}] so that C·2^n_c/l ≤ 1 for every l ≥ 1"
        )));
    }
    Ok((0..1usize << n_c).map(|l| if l == 0 { 0.0 } else { 2.0 * (c * m / l as f64).min(1.0).asin() }).collect())
}

/// Rotates `ancilla` so that amplitude `|1⟩` is `C·2^{n_c}/l` for clock value `l`.
pub fn reciprocal_rotation(state: &mut StateVector, clock: &[usize], ancilla: usize, c: f64) -> Result<()> {
    state.apply_multiplexed_ry(clock, ancilla, &reciprocal_angles(clock.len(), c)?)
}

/// Spectrum-derived parameters of a prepared system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub time: f64,
}

/// Evolution time for a non-negative spectrum (zero modes excluded).
pub fn choose_time(lambda_min: f64, lambda_max: f64, n_c: usize, scaling: EigenScaling) -> f64 {
    let m = (1u64 << n_c) as f64;
    let max_bin = 2.0 * PI * (1.0 - 1.0 / m) / lambda_max;
    match scaling {
        EigenScaling::MaxBin => max_bin,
        EigenScaling::MinExact => {
            let ratio = lambda_min * (m - 1.0) / lambda_max;
            let bin = if (ratio - ratio.round()).abs() < 1e-7 { ratio.round() } else { ratio.floor() };
            if bin < 1.0 {
                max_bin
            } else {
                2.0 * PI * bin / (m * lambda_min)
            }
        }
    }
}

/// HHL prepared for one matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct HhlSolver {
    cfg: HHLConfig,
    dim: usize,
    n_b: usize,
    negated: bool,
    null_vectors: Vec<Vec<f64>>,
    scaling: Scaling,
    evo: Evolution,
    angles: Vec<f64>,
}

impl HhlSolver {
    pub fn new(a: &SparseSymMatrix, cfg: &HHLConfig) -> Result<Self> {
        if cfg.n_c == 0 {
            return Err(QnsError::Config("at least one clock qubit is required".into()));
        }
        let dim = a.dim();
        let n_b = match cfg.n_b {
            Some(n) => n,
            None => dim.next_power_of_two().trailing_zeros() as usize,
        };
        if dim == 0 || dim > 1 << n_b {
            return Err(QnsError::Config(format!("{dim} unknowns do not fit in {n_b} problem qubits")));
        }
        let dense = a.to_dense();
        let eig = sym_eigen_dense(&dense)?;
        let amax = eig.max_abs();
        if amax == 0.0 {
            return Err(QnsError::Degenerate("zero matrix".into()));
        }
        let zero_tol = 1e-10 * amax;
        let (lo, hi) = (eig.values[0], eig.values[dim - 1]);
        let negated = hi <= zero_tol;
        if !negated && lo < -zero_tol {
            return Err(QnsError::Config(format!("indefinite matrix (eigenvalues {lo:e} … {hi:e}) is not supported")));
        }
        let sign = if negated { -1.0 } else { 1.0 };
        let spectrum: Vec<f64> = eig.values.iter().map(|v| v * sign).filter(|v| *v > zero_tol).collect();
        let lambda_min = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
        let lambda_max = spectrum.iter().cloned().fold(0.0, f64::max);
        let null_vectors = eig
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() <= zero_tol)
            .map(|(c, _)| eig.vectors.column(c).iter().copied().collect())
            .collect();

        // pad with a mid-spectrum identity block
        let padded_dim = 1usize << n_b;
        let mid = 0.5 * (lambda_min + lambda_max);
        let mut h = DMatrix::zeros(padded_dim, padded_dim);
        h.view_mut((0, 0), (dim, dim)).copy_from(&(dense * sign));
        for k in dim..padded_dim {
            h[(k, k)] = mid;
        }

        let time = choose_time(lambda_min, lambda_max, cfg.n_c, cfg.scaling) * cfg.evolution_scale;
        let evo = Evolution::new(&h, time, cfg.backend, cfg.spectral_exec, cfg.trotter_steps, cfg.n_c)?;
        let c = cfg.reciprocal_constant.unwrap_or(1.0 / (1u64 << cfg.n_c) as f64);
        let angles = reciprocal_angles(cfg.n_c, c)?;
        Ok(Self {
            cfg: cfg.clone(),
            dim,
            n_b,
            negated,
            null_vectors,
            scaling: Scaling { lambda_min, lambda_max, time },
            evo,
            angles,
        })
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn total_qubits(&self) -> usize {
        self.n_b + self.cfg.n_c + 1
    }

    /// Runs the circuit for right-hand side `b`. Components of `b` along the
    /// nullspace are projected out first.
    pub fn solve(&self, b: &[f64]) -> Result<HHLResult> {
        if b.len() != self.dim {
            return Err(QnsError::Shape { expected: self.dim, got: b.len() });
        }
        let mut rhs: Vec<f64> = b.iter().map(|v| if self.negated { -v } else { *v }).collect();
        for nv in &self.null_vectors {
            let dot: f64 = nv.iter().zip(&rhs).map(|(p, q)| p * q).sum();
            rhs.iter_mut().zip(nv).for_each(|(r, v)| *r -= dot * v);
        }
        let (b_state, _) = prepare_b(&rhs, self.n_b)?;
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();

        let n_c = self.cfg.n_c;
        let register: Vec<usize> = (0..self.n_b).collect();
        let clock: Vec<usize> = (self.n_b..self.n_b + n_c).collect();
        let ancilla = self.n_b + n_c;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << self.total_qubits()];
        amps[..1 << self.n_b].copy_from_slice(b_state.amplitudes());
        let mut state = StateVector::from_amplitudes(amps)?;

        self.evo.enter_eigenbasis(&mut state, &register)?;
        qpe_core(&mut state, &self.evo, &register, &clock)?;
        state.apply_multiplexed_ry(&clock, ancilla, &self.angles)?;
        inverse_qpe_core(&mut state, &self.evo, &register, &clock)?;

        let success_probability = state.probability(ancilla, 1);
        state.project_and_renormalize(ancilla, 1)?;
        let clock_fixed: Vec<(usize, u8)> = clock.iter().map(|&c| (c, 0)).collect();
        let clock_return_probability = state.project_qubits(&clock_fixed)?;
        self.evo.leave_eigenbasis(&mut state, &register)?;

        let x = state.register_slice(&register, 1 << ancilla);
        // global phase: make ⟨b|x⟩ real and positive
        let overlap = rhs.iter().zip(&x).fold(Complex64::new(0.0, 0.0), |acc, (p, q)| acc + q * *p);
        let rot = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { Complex64::new(1.0, 0.0) };
        let mut solution: Vec<f64> = x[..self.dim].iter().map(|a| (a * rot).re).collect();
        let norm = solution.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(QnsError::PostSelection(0.0));
        }
        solution.iter_mut().for_each(|v| *v /= norm);
        Ok(HHLResult {
            solution,
            success_probability,
            clock_return_probability,
            lambda_min: self.scaling.lambda_min,
            lambda_max: self.scaling.lambda_max,
            evolution_time: self.scaling.time,
            b_norm,
        })
    }
}

/// One-shot HHL solve of `A x = b`.
pub fn hhl_solve(a: &SparseSymMatrix, b: &[f64], cfg: &HHLConfig) -> Result<HHLResult> {
    HhlSolver::new(a, cfg)?.solve(b)
}

/// Rescales a unit-norm quantum solution to the classical reference: norm
/// `‖reference‖₂`, sign chosen to maximize the overlap with the reference.
pub fn calibrate(unit: &[f64], reference: &[f64]) -> Vec<f64> {
    let rnorm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unorm = unit.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rnorm == 0.0 || unorm == 0.0 {
        return vec![0.0; unit.len()];
    }
    let dot: f64 = unit.iter().zip(reference).map(|(p, q)| p * q).sum();
    let s = if dot < 0.0 { -rnorm / unorm } else { rnorm / unorm };
    unit.iter().map(|v| v * s).collect()
}

/// One HHL solve per clock size, reporting the mean ARE against `reference`
/// after [`calibrate`].
pub fn nc_sweep(
    a: &SparseSymMatrix,
    b: &[f64],
    reference: &[f64],
    base: &HHLConfig,
    nc_range: &[usize],
    eps: f64,
) -> Result<Vec<(usize, f64)>> {
    // sweep points are independent, each one runs its own sequential reductions
    crate::par::map_range(nc_range.len(), |k| {
        let n_c = nc_range[k];
        let cfg = HHLConfig { n_c, ..base.clone() };
        let res = hhl_solve(a, b, &cfg)?;
        let cal = calibrate(&res.solution, reference);
        Ok((n_c, crate::metrics::mean(&crate::metrics::are(&cal, reference, eps)?)))
    })
    .into_iter()
    .collect()
}
