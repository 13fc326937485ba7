//! The user guide, compiled into doc-tests.
//!
//! Each module below carries one chapter of the mdbook under `book/` as its
//! documentation, so `cargo test --doc` builds and runs every code block in
//! the guide and the prose can never drift from the API it describes.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/trees.md")]
pub mod trees {}

#[doc = include_str!("../../../book/src/growth.md")]
pub mod growth {}

#[doc = include_str!("../../../book/src/laws.md")]
pub mod laws {}

#[doc = include_str!("../../../book/src/concat.md")]
pub mod concat {}

#[doc = include_str!("../../../book/src/rde.md")]
pub mod rde {}

#[doc = include_str!("../../../book/src/verify.md")]
pub mod verify {}
