//! Random stable trees: growth chains, scaling limits, and a recursive
//! distributional fixpoint toolkit.
//!
//! The crate has three layers:
//!
//! * **Trees** ([`tree`]): finite rooted metric trees with marks and leaf
//!   masses, JSON interchange, distances, reduction, rescaling.
//! * **Laws** ([`laws`], [`marchal`]): Dirichlet and stick-breaking samplers,
//!   generalized Pólya urns, the two-parameter Chinese restaurant process,
//!   Mittag-Leffler moments, and the weighted growth chain for random trees
//!   with stability index α ∈ (1,2].
//! * **Fixpoint machinery** ([`concat`], [`ghdist`], [`rde`]): the
//!   single-point concatenation operator on marked trees, a marked
//!   Gromov–Hausdorff distance for small trees, the recursive distributional
//!   iteration built from both, spine martingales, and generation strings.
//!
//! Statistical comparison utilities live in [`stats`], and [`verify`] bundles
//! the crate-level statistical test suites used by the CLI's `verify`
//! subcommand.
//!
//! Everything random takes an explicit RNG; [`rng::SplitMix64`] plus the
//! child-stream derivation in [`rng`] make every sampled object a pure
//! function of a `u64` seed.

#![forbid(unsafe_code)]

pub mod concat;
pub mod error;
mod fenwick;
pub mod ghdist;
pub mod guide;
pub mod laws;
pub mod marchal;
pub mod rde;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
