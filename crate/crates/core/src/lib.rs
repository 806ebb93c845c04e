//! Information locking toolkit: Haar sampling, entropies, quasi-measurements,
//! locking schemes with their distinguishability bounds, Uhlmann decoders and
//! a locked key distribution demo.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod decode;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod haar;
pub mod locking;
pub mod measure;
pub mod qcore;
pub mod qkd;

pub use error::{Error, Result};
pub use haar::RngSpec;
