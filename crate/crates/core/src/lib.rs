//! Multiple coupon collection processes on the subset lattice of a finite set.
//!
//! States are subsets of `S = {1, …, N}` stored as bitmasks; a step replaces the
//! state `X` by `X ∪ Z` with `Z` drawn from a distribution `p` on subsets. The
//! crate provides the lattice transforms, the CM/CG matrix families, the
//! embeddability test for `M_p`, the parameter-space algebra with its `Exp` map,
//! dense reference linear algebra, and Monte Carlo engines.

pub mod algebra;
pub mod embedding;
pub mod error;
pub mod lattice;
pub mod model;
pub mod oracle;
pub mod random;
pub mod sim;

pub use error::{Error, Result};
pub use lattice::{Subset, SubsetVector};
pub use model::{CouponDistribution, IndependentSpec, LatticeMatrix, RateVector};
