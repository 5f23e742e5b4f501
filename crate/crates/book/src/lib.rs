//! Runs the code listings of the guide in `book/` as doc-tests. One module per
//! chapter so a failing listing points at its file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/state_space.md")]
pub mod state_space {}
#[doc = include_str!("../../../book/src/duality.md")]
pub mod duality {}
#[doc = include_str!("../../../book/src/oscillators.md")]
pub mod oscillators {}
#[doc = include_str!("../../../book/src/temporal_norm.md")]
pub mod temporal_norm {}
#[doc = include_str!("../../../book/src/streaming.md")]
pub mod streaming {}
#[doc = include_str!("../../../book/src/heart_rate.md")]
pub mod heart_rate {}
#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
