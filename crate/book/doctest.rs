//! The guide's chapters, compiled as rustdoc modules so that `cargo test`
//! runs every Rust snippet in the book against the current library.
//!
//! mdbook cannot link external crates in its own test runner, so each
//! chapter is pulled in here with `include_str!` instead.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/model.md")]
pub mod model {}
#[doc = include_str!("src/time-evolution.md")]
pub mod time_evolution {}
#[doc = include_str!("src/closed-forms.md")]
pub mod closed_forms {}
#[doc = include_str!("src/fixed-point.md")]
pub mod fixed_point {}
#[doc = include_str!("src/enhancement.md")]
pub mod enhancement {}
#[doc = include_str!("src/exploration.md")]
pub mod exploration {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
#[doc = include_str!("src/validation.md")]
pub mod validation {}
