//! Doc-tested chapters of the guide in `book/`.
//!
//! mdbook cannot run chapter code fences as tests by itself, so each
//! chapter is included here as module documentation and `cargo test --doc`
//! exercises every snippet. If a chapter example breaks, the failing module
//! names the file to fix.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/estimand.md")]
pub mod estimand {}

#[doc = include_str!("../../../book/src/first-stage.md")]
pub mod first_stage {}

#[doc = include_str!("../../../book/src/tuning.md")]
pub mod tuning {}

#[doc = include_str!("../../../book/src/inference.md")]
pub mod inference {}

#[doc = include_str!("../../../book/src/hausman.md")]
pub mod hausman {}

#[doc = include_str!("../../../book/src/discrete.md")]
pub mod discrete {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
