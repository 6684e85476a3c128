//! Neumann problems for Hessian quotient equations
//! `[σ_k(Λ(D²u)) / σ_l(Λ(D²u))]^{1/(k-l)} = ψ̃(x, u, Du)`, where `Λ` maps the
//! Hessian eigenvalues to their `p`-fold sums.
//!
//! The crate is layered bottom-up:
//!
//! - [`symfun`]: elementary symmetric functions, Garding cones, the quotient
//!   and its gradient, Newton transforms.
//! - [`spectral`]: Jacobi eigensolver for small symmetric matrices.
//! - [`compound`]: additive compound matrices and the operator `F` with its
//!   matrix gradient.
//! - [`exprlang`]: the expression language for `ψ̃` and `φ`.
//! - [`pde`]: grids, stencils, assembly, damped Newton and continuation,
//!   and the radial reduction on balls.
//! - [`estimates`]: structural, growth and bound checks.
//! - [`cli`]: the batch front end.

pub mod cli;
pub mod compound;
pub mod error;
pub mod estimates;
pub mod exprlang;
pub mod par;
pub mod pde;
pub mod spectral;
pub mod symfun;

pub use compound::OperatorSignature;
pub use error::{Error, Result};
pub use par::Execution;
pub use symfun::{EigenTuple, SymMatrix};
