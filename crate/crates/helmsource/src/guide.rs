//! The user guide, compiled as doc-tests.
//!
//! Chapters live as Markdown under `book/` and render with `mdbook build
//! book`. Including them here keeps every code snippet in the book honest:
//! `cargo test --doc` runs them all.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}

#[doc = include_str!("../../../book/src/quadrature.md")]
pub mod quadrature {}

#[doc = include_str!("../../../book/src/bases.md")]
pub mod bases {}

#[doc = include_str!("../../../book/src/assembly.md")]
pub mod assembly {}

#[doc = include_str!("../../../book/src/regularization.md")]
pub mod regularization {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
