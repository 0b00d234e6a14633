use super::{GroupingParams, OpcodeGroup, Zone};
use crate::evm::static_gas;

pub fn gas_of(opcodes: &[u8]) -> u32 {
    opcodes.iter().map(|&b| static_gas(b)).sum()
}

/// Every qualifying prefix (2..=G opcodes, gas >= T) at each start position,
/// shortest first; start positions advance by W.
pub fn enumerate_opcode_groups(zone: &Zone, params: &GroupingParams) -> Vec<OpcodeGroup> {
    let mut out = Vec::new();
    for block in &zone.blocks {
        let ops = &block.opcodes;
        let mut start = 0;
        while start < ops.len() {
            let mut sum = static_gas(ops[start]);
            let max_end = (start + params.max_group_size).min(ops.len());
            for end in start + 1..max_end {
                sum += static_gas(ops[end]);
                if sum >= params.gas_threshold {
                    out.push(OpcodeGroup {
                        block_id: block.block_id,
                        start_index: start,
                        opcodes: ops[start..=end].to_vec(),
                        gas_sum: sum,
                    });
                }
            }
            start += params.window;
        }
    }
    out
}

/// Whether any run of 2..=G consecutive opcodes reaches the gas threshold.
pub fn has_group_run(opcodes: &[u8], params: &GroupingParams) -> bool {
    (0..opcodes.len()).any(|start| {
        let end = (start + params.max_group_size).min(opcodes.len());
        end - start >= 2 && gas_of(&opcodes[start..end]) >= params.gas_threshold
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::watermark::ZoneBlock;

    fn zone(ops: &[u8]) -> Zone {
        Zone {
            blocks: vec![ZoneBlock {
                block_id: 7,
                start_offset: 0,
                opcodes: ops.to_vec(),
                offsets: (0..ops.len()).collect(),
            }],
        }
    }

    #[test]
    fn worked_example_groups() {
        let groups = enumerate_opcode_groups(&zone(&[0x5b, 0x82, 0x01, 0x91, 0x90]), &GroupingParams::default());
        let listed: Vec<(usize, Vec<u8>, u32)> = groups
            .iter()
            .map(|g| (g.start_index, g.opcodes.clone(), g.gas_sum))
            .collect();
        assert_eq!(
            listed,
            vec![
                (0, vec![0x5b, 0x82, 0x01, 0x91], 10),
                (0, vec![0x5b, 0x82, 0x01, 0x91, 0x90], 13),
                (1, vec![0x82, 0x01, 0x91], 9),
                (1, vec![0x82, 0x01, 0x91, 0x90], 12),
                (2, vec![0x01, 0x91, 0x90], 9),
            ]
        );
        assert!(groups.iter().all(|g| g.block_id == 7));
    }

    #[test]
    fn unreachable_threshold() {
        assert!(enumerate_opcode_groups(&zone(&[0x00]), &GroupingParams::default()).is_empty());
        assert!(!has_group_run(&[0x00], &GroupingParams::default()));
    }

    #[test]
    fn single_expensive_opcode_is_not_a_group() {
        // SHA3 alone exceeds T but groups need two opcodes
        assert!(enumerate_opcode_groups(&zone(&[0x20]), &GroupingParams::default()).is_empty());
        assert_eq!(
            enumerate_opcode_groups(&zone(&[0x20, 0x00]), &GroupingParams::default()).len(),
            1
        );
    }

    #[test]
    fn window_skips_starts() {
        let p = GroupingParams {
            window: 2,
            ..GroupingParams::default()
        };
        let groups = enumerate_opcode_groups(&zone(&[0x5b, 0x82, 0x01, 0x91, 0x90]), &p);
        let starts: Vec<usize> = groups.iter().map(|g| g.start_index).collect();
        assert_eq!(starts, [0, 0, 2]);
    }

    #[test]
    fn group_size_bound() {
        let p = GroupingParams {
            max_group_size: 3,
            ..GroupingParams::default()
        };
        let groups = enumerate_opcode_groups(&zone(&[0x5b, 0x82, 0x01, 0x91, 0x90]), &p);
        assert!(groups.iter().all(|g| g.opcodes.len() <= 3));
        // 5B 82 01 = 7 < 9, so the first start yields nothing
        assert_eq!(groups[0].start_index, 1);
    }

    #[test]
    fn run_detection() {
        let p = GroupingParams::default();
        assert!(has_group_run(&[0x5b, 0x02, 0x01], &p));
        assert!(!has_group_run(&[0x02, 0x01], &p));
    }
}
