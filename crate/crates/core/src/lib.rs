//! Heat-kernel negative Sobolev norms of empirical measures.

pub mod concentration;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod measures;
pub mod norms;
pub mod quadrature;

pub use error::{Error, Result};
