#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod cli;
pub mod control;
pub mod demo;
pub mod dp;
pub mod error;
pub mod field;
pub mod gaussian;
pub mod mild;
pub mod model;
pub mod neumann;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod semigroup;
pub mod timequad;

pub use error::{Error, Result};
