//! Finite element homogenization of nondivergence-form elliptic problems
//! A(x/ε):D²u = f on the unit square: invariant measure, homogenized matrix,
//! correctors and their Hessian lifts, H¹/H² macro solves, fine-scale
//! reference solves, reconstruction of u_ε, and convergence studies.

pub mod assemble;
pub mod cell;
pub mod cli;
pub mod coeff;
pub mod error;
pub mod expr;
pub mod geom;
pub mod hct;
pub mod mesh;
pub mod macroprob;
pub mod norms;
pub mod oracle;
pub mod recon;
pub mod quad;
pub mod space;
pub mod study;
pub mod sparse;

pub use error::{Error, Result};

/// CLI entry point; returns the process exit code.
pub fn run_cli() -> i32 {
    cli::run()
}
