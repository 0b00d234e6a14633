use std::collections::BTreeSet;

use serde::Serialize;

use super::{assemble_stream, block_hash, read_nibble_byte, watermarkable_zone, Zone};
use crate::cfg::{prepare, TOOL_ID};
use crate::wro::{self, Wro, WroMac, WroRow};
use crate::{Error, Result};

/// Where the published MAC comes from.
#[derive(Clone, Copy, Debug)]
pub enum MacSource<'a> {
    /// Creation bytecode carrying the MAC trailer.
    Creation(&'a [u8]),
    Mac(WroMac),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WatermarkCheck {
    pub index: usize,
    #[serde(with = "hex::serde")]
    pub value: Vec<u8>,
    /// Per byte: whether some block rebuilt the stored hash and nibbles.
    pub rows: Vec<bool>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    #[serde(serialize_with = "mac_hex")]
    pub mac: WroMac,
    pub watermarks: Vec<WatermarkCheck>,
}

fn mac_hex<S: serde::Serializer>(m: &WroMac, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&m.to_hex())
}

impl VerificationReport {
    pub fn passed(&self) -> usize {
        self.watermarks.iter().filter(|w| w.passed).count()
    }

    pub fn total(&self) -> usize {
        self.watermarks.len()
    }

    /// At least one watermark survived.
    pub fn success(&self) -> bool {
        self.passed() >= 1
    }
}

/// Checks the WRO MAC, rebuilds the graph and searches every zone block for
/// each stored row. Fails with `MacMismatch` before looking at the runtime if
/// the WRO was altered.
pub fn verify(runtime: &[u8], source: MacSource<'_>, wro: &Wro) -> Result<VerificationReport> {
    let computed = wro::mac(wro)?;
    let expected = match source {
        MacSource::Creation(c) => wro::extract_mac(c)?,
        MacSource::Mac(m) => m,
    };
    if computed != expected {
        return Err(Error::MacMismatch {
            computed: computed.to_hex(),
            embedded: expected.to_hex(),
        });
    }
    Ok(VerificationReport {
        mac: computed,
        watermarks: check_watermarks(runtime, wro)?,
    })
}

fn suspect_zone(runtime: &[u8], wro: &Wro) -> Result<Zone> {
    if wro.tool_id != TOOL_ID {
        return Err(Error::ToolMismatch(wro.tool_id.clone()));
    }
    let cfg = prepare(runtime)?;
    match watermarkable_zone(&cfg) {
        Ok(z) => Ok(z),
        Err(Error::NoZone) => Ok(Zone { blocks: Vec::new() }),
        Err(e) => Err(e),
    }
}

/// Phases two and three of verification, without the MAC check.
pub fn check_watermarks(runtime: &[u8], wro: &Wro) -> Result<Vec<WatermarkCheck>> {
    let zone = suspect_zone(runtime, wro)?;
    Ok(wro
        .watermarks
        .iter()
        .enumerate()
        .map(|(index, w)| {
            let rows: Vec<bool> = w
                .rows
                .iter()
                .zip(&w.value)
                .map(|(row, &byte)| zone.blocks.iter().any(|b| row_matches(&b.opcodes, row, byte)))
                .collect();
            WatermarkCheck {
                index,
                value: w.value.clone(),
                passed: rows.iter().all(|&r| r),
                rows,
            }
        })
        .collect())
}

/// Start offsets of the zone blocks that carry a byte of watermark `index`,
/// or of any watermark when `index` is `None`.
pub fn watermark_block_offsets(runtime: &[u8], wro: &Wro, index: Option<usize>) -> Result<BTreeSet<usize>> {
    let zone = suspect_zone(runtime, wro)?;
    let mut out = BTreeSet::new();
    for (i, w) in wro.watermarks.iter().enumerate() {
        if index.is_some_and(|want| want != i) {
            continue;
        }
        for (row, &byte) in w.rows.iter().zip(&w.value) {
            out.extend(
                zone.blocks
                    .iter()
                    .filter(|b| row_matches(&b.opcodes, row, byte))
                    .map(|b| b.start_offset),
            );
        }
    }
    Ok(out)
}

fn row_matches(opcodes: &[u8], row: &WroRow, byte: u8) -> bool {
    let Some((_, bytes)) = assemble_stream(opcodes, &row.groups) else {
        return false;
    };
    block_hash(&bytes).is_ok_and(|h| h == row.block_hash)
        && read_nibble_byte(&bytes, row.nibble_offset as usize) == Some(byte)
}
