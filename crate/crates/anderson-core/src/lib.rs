//! Lattice simulation of the renormalised continuous Anderson hamiltonian
//! `H = -Δ + ξ_ε + C_ε` on the box `(-L, L)^d`, `d ∈ {1, 2, 3}`.
//!
//! The crate is organised bottom-up: numerical primitives (`special`,
//! `quadrature`, `fft`, `sparse`) feed the model modules (`noise`, `greens`,
//! `renorm`, `operator`, `spectra`) and `experiments` composes them.

pub mod error;
pub mod experiments;
pub mod fft;
pub mod greens;
pub mod grid;
pub mod mollifier;
pub mod noise;
pub mod operator;
pub mod quadrature;
pub mod renorm;
pub mod rng;
pub mod sparse;
pub mod special;
pub mod spectra;

pub use error::{Error, Result};
pub use grid::{BoundaryCondition, LatticeGrid};
