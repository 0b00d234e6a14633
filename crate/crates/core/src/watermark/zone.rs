use crate::cfg::Cfg;
use crate::{Error, Result};

/// Opcode bytes of one eligible block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZoneBlock {
    pub block_id: usize,
    pub start_offset: usize,
    pub opcodes: Vec<u8>,
    /// Bytecode offset of each opcode.
    pub offsets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Zone {
    pub blocks: Vec<ZoneBlock>,
}

impl Zone {
    pub fn block(&self, id: usize) -> Option<&ZoneBlock> {
        self.blocks
            .binary_search_by_key(&id, |b| b.block_id)
            .ok()
            .map(|i| &self.blocks[i])
    }
}

/// Opcode bytes of every block that is neither dispatcher nor data, operands
/// dropped.
pub fn watermarkable_zone(cfg: &Cfg) -> Result<Zone> {
    let blocks: Vec<ZoneBlock> = cfg
        .blocks
        .iter()
        .filter(|b| !b.is_dispatcher && !b.is_data)
        .map(|b| ZoneBlock {
            block_id: b.id,
            start_offset: b.start_offset,
            opcodes: b.opcodes(),
            offsets: b.instructions.iter().map(|i| i.offset).collect(),
        })
        .collect();
    if blocks.is_empty() {
        return Err(Error::NoZone);
    }
    Ok(Zone { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{build_cfg, prepare};

    #[test]
    fn operands_dropped() {
        // entry STOP | JUMPDEST PUSH1 07 ADD
        let cfg = prepare(&[0x00, 0x5b, 0x60, 0x07, 0x01]).unwrap();
        let zone = watermarkable_zone(&cfg).unwrap();
        assert_eq!(zone.blocks.len(), 1);
        assert_eq!(zone.blocks[0].opcodes, vec![0x5b, 0x60, 0x01]);
        assert_eq!(zone.blocks[0].offsets, vec![1, 2, 4]);
    }

    #[test]
    fn dispatcher_excluded() {
        let cfg = prepare(&[0x5b, 0x82, 0x01, 0x91, 0x90, 0x00]).unwrap();
        assert!(matches!(watermarkable_zone(&cfg), Err(Error::NoZone)));
    }

    #[test]
    fn block_listing_zone() {
        let code = [0x00, 0x5b, 0x82, 0x01, 0x91, 0x90, 0x00];
        let zone = watermarkable_zone(&prepare(&code).unwrap()).unwrap();
        assert_eq!(zone.blocks[0].opcodes, vec![0x5b, 0x82, 0x01, 0x91, 0x90, 0x00]);
    }

    #[test]
    fn data_blocks_excluded() {
        // entry STOP | ADD ADD (unreachable) | JUMPDEST ADD
        let cfg = build_cfg(&[0x00, 0x01, 0x01, 0x00, 0x5b, 0x01]).unwrap();
        let zone = watermarkable_zone(&cfg).unwrap();
        let ids: Vec<usize> = zone.blocks.iter().map(|b| b.block_id).collect();
        // build_cfg alone leaves the entry unflagged
        assert_eq!(ids, [0, 2]);
    }
}
