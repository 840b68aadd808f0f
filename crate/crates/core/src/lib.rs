//! Periodic solutions of evolution inclusions
//! `-u'(t) in A(t, u(t)) + d phi(u(t)) + F(t, u(t))`, `u(0) = u(b)`.

pub mod cauchy;
pub mod error;
pub mod grid;
mod linalg;
pub mod monotone;
pub mod periodic;
pub mod relaxation;
pub mod scenario;
pub mod set_valued;

pub use error::{Error, Result};
