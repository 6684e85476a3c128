//! Discretization and solution of the Neumann problem
//! `F(D²u) = ψ̃(x,u,Du)` in Ω, `u_ν = φ(x,u)` on ∂Ω.

pub mod assemble;
pub mod grid;
pub mod linsolve;
pub mod problem;
pub mod radial;
pub mod solver;
pub mod stencil;

pub use assemble::{assemble, jacobian, residual, Assembly, SparseMatrix};
pub use grid::{field_to_csv, Field, NodeKind, RectGrid, Side};
pub use problem::{Domain, Equation, Homotopy, ProblemSpec, Structural};
pub use radial::{radial_newton, radial_residual, radial_solve, RadialProfile};
pub use solver::{continuation_solve, newton_solve, ContinuationStep, Failure, SolveOptions, SolveReport, Timings};
pub use stencil::{gradient_at, hessian_at};
