//! Numerical solver and verification harness for standing waves of the
//! quasilinear Schrödinger equation
//!
//! ```text
//! -Delta u + V(x) u - u Delta(u^2) = g(u)
//! ```
//!
//! with possibly indefinite potential. The quasilinear energy is reformulated
//! through the change of variables `u = f(v)`; critical points of the
//! transformed functional `Phi(v)` are computed by mountain-pass or
//! local-linking minimax search plus Newton refinement, and `u = f(v)` is
//! recovered and residual-checked against the original equation.

pub mod cli;
pub mod energy;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod spectrum;
pub mod transform;

pub use error::{QwError, Result};
