#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cooling_dynamics;
pub mod ergodic_kernel;
pub mod error;
pub mod franck_condon;
pub mod ion_chain;
pub mod quadrature;
pub mod spectrum;

pub use error::{Error, Result};
