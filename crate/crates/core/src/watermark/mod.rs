//! Watermark embedding and verification.
//!
//! Embedding never touches runtime bytes. It elects positions that already
//! exist in the contract:
//!
//! 1. the *watermarkable zone* is every non-dispatcher, non-data block with
//!    operands stripped, leaving opcode bytes only;
//! 2. *opcode groups* are runs of 2..=G zone opcodes whose static gas reaches T;
//! 3. a fraction R of all groups is elected and the elected groups of each
//!    block are merged into that block's *byte stream*;
//! 4. each watermark byte is two consecutive nibbles of one stream, one byte
//!    per block, with the N watermarks on disjoint block sets.
//!
//! A block is identified by the first four bytes of the Keccak-256 digest of
//! its stream, and the groups forming the stream are stored alongside so a
//! verifier can rebuild it by plain byte search.

mod election;
mod embed;
mod groups;
mod verify;
mod zone;

pub use election::{assemble_stream, block_hash, elect_groups, elect_watermarks, read_nibble_byte, Election};
pub use embed::{embed, plan, Embedding, Plan, MAX_RUNTIME_SIZE};
pub use groups::{enumerate_opcode_groups, gas_of, has_group_run};
pub use verify::{check_watermarks, verify, watermark_block_offsets, MacSource, VerificationReport, WatermarkCheck};
pub use zone::{watermarkable_zone, Zone, ZoneBlock};

use crate::{Error, Result};

/// Opcode-group shape and election ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupingParams {
    /// Minimum static gas of a group (T).
    pub gas_threshold: u32,
    /// Start-position step (W).
    pub window: usize,
    /// Maximum opcodes per group (G).
    pub max_group_size: usize,
    /// Fraction of all groups elected (R), in (0, 1].
    pub election_ratio: f64,
}

impl GroupingParams {
    pub fn new(gas_threshold: u32, window: usize, max_group_size: usize, election_ratio: f64) -> Result<Self> {
        let p = GroupingParams {
            gas_threshold,
            window,
            max_group_size,
            election_ratio,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gas_threshold < 1 {
            return Err(Error::InvalidParams("gas threshold T must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(Error::InvalidParams("window W must be >= 1".into()));
        }
        if self.max_group_size < 1 {
            return Err(Error::InvalidParams("group size G must be >= 1".into()));
        }
        if !(self.election_ratio > 0.0 && self.election_ratio <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "election ratio R must be in (0, 1], got {}",
                self.election_ratio
            )));
        }
        Ok(())
    }
}

impl Default for GroupingParams {
    fn default() -> Self {
        GroupingParams {
            gas_threshold: 9,
            window: 1,
            max_group_size: 5,
            election_ratio: 0.2,
        }
    }
}

/// Watermark length L (bytes, one block each) and count N.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WatermarkParams {
    pub length: usize,
    pub count: usize,
}

impl WatermarkParams {
    pub fn new(length: usize, count: usize) -> Result<Self> {
        if length < 1 || count < 1 {
            return Err(Error::InvalidParams(format!(
                "watermark length and count must be >= 1, got L={length} N={count}"
            )));
        }
        if length > u16::MAX as usize || count > u16::MAX as usize {
            return Err(Error::InvalidParams("watermark length/count exceed 65535".into()));
        }
        Ok(WatermarkParams { length, count })
    }

    /// Blocks needed: one per byte, disjoint across watermarks.
    pub fn blocks_needed(&self) -> usize {
        self.length * self.count
    }
}

impl Default for WatermarkParams {
    fn default() -> Self {
        WatermarkParams { length: 15, count: 3 }
    }
}

/// A run of consecutive zone opcodes whose gas reaches the threshold.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OpcodeGroup {
    pub block_id: usize,
    /// Index of the first opcode within the block's zone list.
    pub start_index: usize,
    pub opcodes: Vec<u8>,
    pub gas_sum: u32,
}

impl OpcodeGroup {
    pub fn positions(&self) -> std::ops::Range<usize> {
        self.start_index..self.start_index + self.opcodes.len()
    }
}

/// Merged elected groups of one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ByteStream {
    pub block_id: usize,
    /// Covered zone positions, ascending and duplicate-free.
    pub positions: Vec<usize>,
    pub bytes: Vec<u8>,
    /// Distinct group byte sequences forming the stream, by leftmost position.
    pub groups: Vec<Vec<u8>>,
}

impl ByteStream {
    pub fn nibble_len(&self) -> usize {
        self.bytes.len() * 2
    }
}

/// Where one watermark byte lives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementRow {
    pub block_id: usize,
    pub block_hash: [u8; 4],
    pub nibble_offset: u32,
    pub groups: Vec<Vec<u8>>,
}

/// One watermark: its value and the per-byte block records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WatermarkPlacement {
    pub value: Vec<u8>,
    pub rows: Vec<PlacementRow>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let g = GroupingParams::default();
        assert_eq!((g.gas_threshold, g.window, g.max_group_size), (9, 1, 5));
        assert_eq!(g.election_ratio, 0.2);
        let w = WatermarkParams::default();
        assert_eq!((w.length, w.count), (15, 3));
    }

    #[test]
    fn param_validation() {
        assert!(GroupingParams::new(0, 1, 5, 0.2).is_err());
        assert!(GroupingParams::new(9, 0, 5, 0.2).is_err());
        assert!(GroupingParams::new(9, 1, 0, 0.2).is_err());
        assert!(GroupingParams::new(9, 1, 5, 0.0).is_err());
        assert!(GroupingParams::new(9, 1, 5, 1.5).is_err());
        assert!(GroupingParams::new(9, 1, 5, f64::NAN).is_err());
        assert!(GroupingParams::new(9, 1, 5, 1.0).is_ok());
        assert!(WatermarkParams::new(0, 1).is_err());
        assert!(WatermarkParams::new(1, 0).is_err());
        assert_eq!(WatermarkParams::new(5, 2).unwrap().blocks_needed(), 10);
    }
}
