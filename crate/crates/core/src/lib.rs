//! Watermarking for EVM smart-contract bytecode without touching the runtime.
//!
//! Watermark bytes are elected from nibbles of opcode streams the contract
//! already contains. The owner keeps a Watermark Reference Object (WRO) that
//! locates them and publishes only its Keccak-256 MAC in the creation bytecode.

pub mod analysis;
pub mod cfg;
pub mod cli;
pub mod corpus;
mod error;
pub mod evm;
pub mod hash;
pub mod watermark;
pub mod wro;

pub use error::{Error, Result};
