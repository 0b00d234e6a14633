mod common;

use evmark::cfg::{build_cfg, dedup_blocks, mark_dispatcher, prepare};
use evmark::evm::disassemble;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn any_code() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(
        prop_oneof![
            4 => any::<u8>(),
            2 => Just(0x5bu8),
            1 => Just(0x56u8),
            1 => Just(0x57u8),
            1 => Just(0x00u8),
        ],
        1..400,
    )
}

proptest! {
    #[test]
    fn build_is_deterministic(code in any_code()) {
        prop_assert_eq!(build_cfg(&code).unwrap(), build_cfg(&code).unwrap());
        prop_assert_eq!(prepare(&code).unwrap(), prepare(&code).unwrap());
    }

    #[test]
    fn blocks_tile_disassembly(code in any_code()) {
        let cfg = build_cfg(&code).unwrap();
        let seq = disassemble(&code).unwrap();
        let mut at = 0;
        let mut count = 0;
        for b in &cfg.blocks {
            prop_assert_eq!(b.start_offset, at);
            prop_assert!(!b.instructions.is_empty());
            at = b.start_offset + b.raw_bytes.len();
            count += b.instructions.len();
        }
        prop_assert_eq!(count, seq.instructions.len());
        let tail: usize = seq.instructions.last().map_or(0, |i| i.end());
        prop_assert_eq!(at, tail);
    }

    #[test]
    fn dedup_idempotent(code in any_code()) {
        let once = dedup_blocks(mark_dispatcher(build_cfg(&code).unwrap()));
        let twice = dedup_blocks(once.clone());
        prop_assert_eq!(&once, &twice);
        let mut raws: Vec<&[u8]> = once.blocks.iter().map(|b| b.raw_bytes.as_slice()).collect();
        let n = raws.len();
        raws.sort();
        raws.dedup();
        prop_assert_eq!(raws.len(), n);
    }

    #[test]
    fn successors_point_at_blocks(code in any_code()) {
        let cfg = prepare(&code).unwrap();
        for b in &cfg.blocks {
            for s in &b.successors {
                prop_assert!(cfg.block(*s).is_some());
            }
        }
    }

    #[test]
    fn appending_blocks_keeps_dispatchers(code in any_code(), extra in any_code()) {
        let before = mark_dispatcher(build_cfg(&code).unwrap());
        // a STOP boundary keeps the original blocks intact
        let mut longer = code.clone();
        if let Some(last) = disassemble(&code).unwrap().instructions.last() {
            if last.is_truncated() {
                return Ok(());
            }
        }
        longer.push(0x00);
        longer.extend(&extra);
        let after = mark_dispatcher(build_cfg(&longer).unwrap());
        for b in before.blocks.iter().filter(|b| b.is_dispatcher) {
            let a = after.block_at_offset(b.start_offset).unwrap();
            prop_assert!(a.is_dispatcher, "block at {} lost its flag", b.start_offset);
        }
    }
}

#[test]
fn entry_is_dispatcher_on_fixtures() {
    for (name, runtime, _) in common::fixtures() {
        let cfg = prepare(&runtime).unwrap();
        assert!(cfg.block_at_offset(0).unwrap().is_dispatcher, "{name}");
        assert_eq!(cfg, prepare(&runtime).unwrap());
    }
}

#[test]
fn synthetic_selector_chain_flagged() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let code = common::realistic_contract(&mut rng);
    let cfg = prepare(&code).unwrap();
    let flagged = cfg.blocks.iter().filter(|b| b.is_dispatcher).count();
    let checks = cfg.blocks.iter().filter(|b| b.is_selector_check()).count();
    assert!(flagged >= 2);
    assert!(flagged <= checks + 1);
}
