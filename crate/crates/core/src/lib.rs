//! Unsourced random access over second-order Reed-Muller sequences with
//! multi-antenna successive cancellation and unknown device delays.

pub mod channel;
pub mod codec;
pub mod detector;
mod error;
pub mod pipeline;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
