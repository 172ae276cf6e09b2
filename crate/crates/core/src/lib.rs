#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod analysis;
pub mod bernstein;
pub mod calculus;
pub mod ctrw;
pub mod error;
pub mod laplace;
pub mod quad;
pub mod semigroup;
pub mod special;

pub use error::{Error, Result};
