//! Numerical laboratory for finite-dimensional spectral triples, the JLO
//! character, and shuffle and cyclic-shuffle products of cyclic chains.

pub mod chains;
pub mod combinatorics;
pub mod config;
pub mod error;
pub mod jlo;
pub mod matrix;
pub mod random;
pub mod spectral;
pub mod verify;

pub use chains::{
    br_operation, connes_b, cyclic_shuffle_product, hochschild_b, shuffle_product, Chain, ElementaryChain,
};
pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, GradedSpace};
pub use spectral::{product_triple, Idempotent, SpectralTripleFD};
