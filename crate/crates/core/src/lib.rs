//! Certified enumeration kernels and desk-scale experiments for simultaneous
//! Diophantine approximation on affine subspaces.

pub mod approx;
pub mod approx_fn;
pub mod cli;
pub mod counting;
pub mod error;
pub mod exact;
pub mod fastball;
pub mod interval;
pub mod lattice;
pub mod norm;
pub mod madsum;
pub mod precision;
pub mod sampler;
pub mod selberg;
pub mod subspace;
pub mod ubiquity;
pub mod window;

pub use approx_fn::{ApproxFunction, Threshold};
pub use error::{Error, Result};
pub use exact::ExactReal;
pub use interval::Interval;
pub use precision::Precision;
