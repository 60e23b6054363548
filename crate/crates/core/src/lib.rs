//! A numerical laboratory for trace formulas.
//!
//! The crate discretizes symmetric integral kernels on `[0, 1]`, computes
//! their spectra with Jacobi eigensolvers and checks, at desk scale, the
//! identities that tie eigenvalue sums to diagonal integrals:
//!
//! - `Σ λₖ = Σ Aᵢᵢ` for symmetric matrices ([`linalg`]),
//! - `Σ λₖ = ∫₀¹ G(x,x) dx` for Nyström discretizations ([`nystrom`]),
//! - the Basel sum and the Mercer expansion of the Dirichlet Green's
//!   function ([`mercer`], [`sturm`]),
//! - the theta transformation obtained from the periodic heat semigroup
//!   ([`heat`]),
//! - the correspondence between peaks of the smoothed wave trace of a
//!   rectangle and the lengths of its closed billiard orbits
//!   ([`wavetrace`], [`billiard`]).
//!
//! Functions cross module boundaries as sampled values on a [`Grid`], never
//! as closures, so every experiment can be reproduced from its CSV dumps.

pub mod billiard;
pub mod cli;
mod error;
pub mod heat;
pub mod kernels;
pub mod linalg;
pub mod mercer;
pub mod nystrom;
pub mod quadrature;
pub mod sturm;
mod sum;
pub mod wavetrace;

pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use linalg::{EigenDecomposition, SymMatrix};
pub use quadrature::{Grid, GridKind};
