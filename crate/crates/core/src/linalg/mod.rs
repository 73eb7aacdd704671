//! Discrete Laplacian assembly, classical reference solvers and the Pauli
//! decomposition used for Hamiltonian simulation.

mod direct;
mod eigen;
mod pauli;
mod sparse;

pub use direct::{direct_solve, DirectSolver};
pub use eigen::{sym_eigen_dense, sym_eigendecomposition, EigenDecomposition};
pub use pauli::{pauli_decompose, pauli_decompose_real, Pauli, PauliString, PauliTermList};
pub use sparse::{
    assemble_laplacian, assemble_laplacian_1d, dirichlet_rhs_fold, dirichlet_rhs_fold_1d, BoundaryKind, LaplacianForm,
    SparseSymMatrix,
};
