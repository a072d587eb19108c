#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acvf;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod io;
pub mod latent;
pub mod linalg;
pub mod link;
pub mod marginals;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod sparse_var;
pub mod var_model;

pub use error::{Error, Result};
