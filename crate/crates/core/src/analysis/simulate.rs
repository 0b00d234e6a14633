use std::collections::{BTreeSet, HashMap};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::math::budget_groups;
use super::model::contract_gas_total;
use crate::cfg::prepare;
use crate::evm::{assemble, disassemble, Instruction, InstructionSequence, Opcode};
use crate::watermark::{check_watermarks, gas_of, has_group_run, watermark_block_offsets, GroupingParams};
use crate::wro::Wro;
use crate::{Error, Result};

/// Stack-neutral, operand-free sequences an adversary can splice in. None
/// contains a jump, terminator, JUMPDEST, PUSH or comparison, so inserting one
/// neither splits a block nor creates a selector check.
pub const ATTACK_PALETTE: &[&[u8]] = &[
    &[0x34, 0x34, 0x01, 0x50], // CALLVALUE CALLVALUE ADD POP
    &[0x5a, 0x5a, 0x02, 0x50], // GAS GAS MUL POP
    &[0x34, 0x80, 0x18, 0x50], // CALLVALUE DUP1 XOR POP
    &[0x58, 0x30, 0x16, 0x50], // PC ADDRESS AND POP
    &[0x36, 0x19, 0x19, 0x50], // CALLDATASIZE NOT NOT POP
];

/// Random palette entries concatenated until the gas reaches `threshold`.
pub fn attack_group<R: Rng + ?Sized>(threshold: u32, rng: &mut R) -> Vec<u8> {
    let mut group = Vec::new();
    while group.is_empty() || gas_of(&group) < threshold {
        group.extend_from_slice(ATTACK_PALETTE.choose(rng).unwrap());
    }
    group
}

/// One splice: `group` goes before instruction `at` of the block starting at
/// byte `block_start` (`at` may equal the block length to append).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Insertion {
    pub block_start: usize,
    pub at: usize,
    pub group: Vec<u8>,
}

/// Applies insertions and moves every `PUSHn target; JUMP[I]` whose target is
/// a JUMPDEST, as long as the new target fits the push width.
pub fn insert_groups(runtime: &[u8], insertions: &[Insertion]) -> Result<Vec<u8>> {
    let seq = disassemble(runtime)?;
    let ins = &seq.instructions;

    let mut before: Vec<(usize, &[u8])> = Vec::with_capacity(insertions.len());
    for i in insertions {
        let start = ins
            .binary_search_by_key(&i.block_start, |x| x.offset)
            .map_err(|_| Error::InvalidParams(format!("no instruction at offset {}", i.block_start)))?;
        let abs = start + i.at;
        if abs > ins.len() {
            return Err(Error::InvalidParams(format!(
                "insertion point {} past end of code",
                i.at
            )));
        }
        before.push((abs, &i.group));
    }
    before.sort_by_key(|&(abs, _)| abs);

    let mut out: Vec<Instruction> = Vec::with_capacity(ins.len() + insertions.len() * 4);
    let mut moved: HashMap<usize, usize> = HashMap::new();
    let mut shift = 0;
    let mut next = before.iter().peekable();
    for (idx, x) in ins.iter().enumerate() {
        while let Some(&(_, group)) = next.next_if(|(abs, _)| *abs == idx) {
            shift += group.len();
            out.extend(group.iter().map(|&b| Instruction::new(0, Opcode(b), &[])));
        }
        if x.opcode == Opcode::JUMPDEST {
            moved.insert(x.offset, x.offset + shift);
        }
        out.push(x.clone());
    }
    for &(_, group) in next {
        out.extend(group.iter().map(|&b| Instruction::new(0, Opcode(b), &[])));
    }

    for j in 0..out.len().saturating_sub(1) {
        if !matches!(out[j + 1].opcode, Opcode::JUMP | Opcode::JUMPI) {
            continue;
        }
        let push = &out[j];
        if !push.opcode.is_push() || push.is_truncated() {
            continue;
        }
        let Some(&target) = push.immediate().and_then(|imm| moved.get(&imm)) else {
            continue;
        };
        let width = push.operand.len();
        if width < 8 && target >> (8 * width) != 0 {
            continue;
        }
        let bytes = (target as u64).to_be_bytes();
        let mut operand = vec![0u8; width.saturating_sub(8)];
        operand.extend_from_slice(&bytes[8usize.saturating_sub(width)..]);
        out[j] = Instruction::new(push.offset, push.opcode, &operand);
    }

    assemble(&InstructionSequence::relayout(out))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    /// floor(alpha * psi / T) groups.
    Alpha(f64),
    /// A fixed number of groups.
    Groups(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Targeting {
    /// Any block holding a qualifying opcode run.
    Uniform,
    /// Same, minus every block that carries a watermark byte.
    AvoidWatermarks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub budget: Budget,
    pub trials: usize,
    pub targeting: Targeting,
    pub seed: u64,
    pub grouping: GroupingParams,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Start offsets (in the original runtime) of the distorted blocks.
    pub modified: Vec<usize>,
    pub watermarks_passed: usize,
    /// Every watermark failed.
    pub attack_succeeded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub std_error: f64,
    /// Wilson score interval at 95%.
    pub ci_low: f64,
    pub ci_high: f64,
    pub groups_per_trial: usize,
    pub target_blocks: usize,
    pub log: Vec<TrialRecord>,
}

/// Runs `trials` independent distortion attacks and verifies each result.
pub fn simulate_distortion(runtime: &[u8], wro: &Wro, config: &SimulationConfig) -> Result<SimulationResult> {
    config.grouping.validate()?;
    if check_watermarks(runtime, wro)?.iter().any(|w| !w.passed) {
        return Err(Error::InvalidParams(
            "WRO does not verify against the unmodified runtime".into(),
        ));
    }

    let cfg = prepare(runtime)?;
    let avoid = match config.targeting {
        Targeting::Uniform => BTreeSet::new(),
        Targeting::AvoidWatermarks => watermark_block_offsets(runtime, wro, None)?,
    };
    let targets: Vec<(usize, usize)> = cfg
        .blocks
        .iter()
        .filter(|b| has_group_run(&b.opcodes(), &config.grouping) && !avoid.contains(&b.start_offset))
        .map(|b| (b.start_offset, b.instructions.len()))
        .collect();

    let wanted = match config.budget {
        Budget::Alpha(alpha) => {
            budget_groups(alpha, contract_gas_total(runtime)?, config.grouping.gas_threshold)? as usize
        }
        Budget::Groups(k) => k,
    };
    let k = wanted.min(targets.len());

    let log: Vec<TrialRecord> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
            rng.set_stream(trial as u64);
            let mut modified = Vec::with_capacity(k);
            let mut insertions = Vec::with_capacity(k);
            for i in index::sample(&mut rng, targets.len(), k) {
                let (block_start, len) = targets[i];
                insertions.push(Insertion {
                    block_start,
                    at: rng.gen_range(1..len),
                    group: attack_group(config.grouping.gas_threshold, &mut rng),
                });
                modified.push(block_start);
            }
            modified.sort_unstable();
            let distorted = if insertions.is_empty() {
                runtime.to_vec()
            } else {
                insert_groups(runtime, &insertions)?
            };
            let passed = check_watermarks(&distorted, wro)?.iter().filter(|w| w.passed).count();
            Ok(TrialRecord {
                trial,
                modified,
                watermarks_passed: passed,
                attack_succeeded: passed == 0,
            })
        })
        .collect::<Result<_>>()?;

    let successes = log.iter().filter(|t| t.attack_succeeded).count();
    let n = config.trials.max(1) as f64;
    let rate = successes as f64 / n;
    let (ci_low, ci_high) = wilson(successes, config.trials);
    Ok(SimulationResult {
        trials: config.trials,
        successes,
        rate,
        std_error: (rate * (1.0 - rate) / n).sqrt(),
        ci_low,
        ci_high,
        groups_per_trial: k,
        target_blocks: targets.len(),
        log,
    })
}

fn wilson(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::build_cfg;
    use crate::evm::static_gas;

    #[test]
    fn palette_is_neutral() {
        for g in ATTACK_PALETTE {
            assert!(gas_of(g) >= 9);
            assert!(g.iter().all(|&b| Opcode(b).is_defined() && !Opcode(b).is_push()));
            assert!(g
                .iter()
                .all(|&b| !Opcode(b).is_terminator() && b != 0x5b && b != 0x56 && b != 0x57));
            assert!(g.iter().all(|&b| !matches!(b, 0x10 | 0x11 | 0x14)));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let g = attack_group(30, &mut rng);
        assert!(g.iter().map(|&b| static_gas(b)).sum::<u32>() >= 30);
    }

    #[test]
    fn insertion_relocates_jumps() {
        // PUSH1 06 JUMP | STOP | ADD ADD(unreached) | JUMPDEST STOP
        let code = [0x60, 0x06, 0x56, 0x00, 0x01, 0x01, 0x5b, 0x00];
        let cfg = build_cfg(&code).unwrap();
        assert!(cfg.blocks[0].successors.contains(&3));
        // insert 4 bytes before the JUMP of block 0: the jump pair is split,
        // so put it between the two ADDs instead
        let out = insert_groups(
            &code,
            &[Insertion {
                block_start: 4,
                at: 1,
                group: ATTACK_PALETTE[0].to_vec(),
            }],
        )
        .unwrap();
        assert_eq!(
            out,
            [0x60, 0x0a, 0x56, 0x00, 0x01, 0x34, 0x34, 0x01, 0x50, 0x01, 0x5b, 0x00]
        );
        let cfg = build_cfg(&out).unwrap();
        let dest = cfg.block_at_offset(10).unwrap().id;
        assert!(cfg.blocks[0].successors.contains(&dest));
    }

    #[test]
    fn target_beyond_width_left_alone() {
        // JUMPDEST at 0xfe; the push width of one byte cannot hold 0x102
        let mut code = vec![0x60, 0xfe, 0x56, 0x00, 0x01, 0x01];
        code.resize(0xfe, 0x00);
        code.extend([0x5b, 0x00]);
        let out = insert_groups(
            &code,
            &[Insertion {
                block_start: 4,
                at: 1,
                group: ATTACK_PALETTE[1].to_vec(),
            }],
        )
        .unwrap();
        assert_eq!(out[1], 0xfe);
        assert_eq!(out.len(), code.len() + 4);
    }

    #[test]
    fn bad_insertion_point() {
        let code = [0x60, 0x01, 0x00];
        let err = insert_groups(
            &code,
            &[Insertion {
                block_start: 1,
                at: 0,
                group: vec![0x50],
            }],
        );
        assert!(matches!(err, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
        assert_eq!(wilson(0, 100).0, 0.0);
        assert!(wilson(100, 100).1 > 1.0 - 1e-12);
    }
}
