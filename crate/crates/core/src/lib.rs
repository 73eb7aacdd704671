//! Hybrid quantum-classical pressure solver for the 2D incompressible
//! Navier-Stokes equations.
//!
//! The projection-method time loop ([`cfd`]) hands its pressure Poisson
//! system to a statevector simulation of HHL ([`hhl`], built on [`qsim`]),
//! reads the solution back through Chebyshev-polynomial state tomography
//! ([`qst`]) and couples everything together in [`hybrid`]. Grids with
//! hyperbolic stretching live in [`grid`], the discrete Laplacian and the
//! classical reference solvers in [`linalg`]. The [`bench`] module holds the
//! benchmark experiments driven by the `qns` command-line tool.
//!
//! Qubit 0 is the least significant bit of a basis-state index everywhere.
//!
//! With the `parallel` feature (on by default) the inner kernels run on the
//! rayon thread pool. Every parallel loop writes disjoint outputs and keeps
//! each floating-point reduction sequential, so results are bit-identical
//! with and without the feature.

// `!(x > 0.0)` is the NaN-rejecting form used for every parameter check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cfd;
pub mod error;
pub mod grid;
pub mod hhl;
pub mod hybrid;
pub mod linalg;
pub mod metrics;
mod par;
pub mod qsim;
pub mod qst;

pub use error::{QnsError, Result};
pub use par::configure_threads;
