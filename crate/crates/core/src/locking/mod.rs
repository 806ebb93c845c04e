//! Locking schemes: construction, the distinguishability functional, its
//! concentration bounds, key-size thresholds and measurement optimization.

mod bounds;
mod optimize;
mod scheme;

pub use bounds::*;
pub use optimize::*;
pub use scheme::*;
