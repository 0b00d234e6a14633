//! Basic-block partitioning and control-flow edges for runtime bytecode.
//!
//! Blocks start at offset 0, at every JUMPDEST and right after every
//! terminator. Jump edges are only resolved for the `PUSHn imm; JUMP(I)` idiom
//! and only when `imm` lands on a JUMPDEST block; anything else leaves the
//! block without a jump edge. The builder is a pure function of the input
//! bytes, which is what lets a verifier rebuild the same graph later.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;

use crate::evm::{self, Instruction, Opcode};
use crate::Result;

/// Identifier of this CFG builder, recorded in every WRO.
pub const TOOL_ID: &str = concat!("evmark-cfg/", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    pub start_offset: usize,
    pub instructions: Vec<Instruction>,
    pub raw_bytes: Vec<u8>,
    pub is_dispatcher: bool,
    /// Unreachable by construction or holding undecodable bytes.
    pub is_data: bool,
    pub successors: BTreeSet<usize>,
}

impl BasicBlock {
    pub fn end_offset(&self) -> usize {
        self.start_offset + self.raw_bytes.len()
    }

    /// Opcode bytes with operands stripped.
    pub fn opcodes(&self) -> Vec<u8> {
        self.instructions.iter().map(|i| i.opcode.0).collect()
    }

    pub fn last(&self) -> &Instruction {
        self.instructions.last().expect("blocks are never empty")
    }

    pub fn starts_with_jumpdest(&self) -> bool {
        self.instructions[0].opcode == Opcode::JUMPDEST
    }

    /// Selector comparison shape: a PUSH4 later followed by EQ/LT/GT, ending in JUMPI.
    pub fn is_selector_check(&self) -> bool {
        if self.last().opcode != Opcode::JUMPI {
            return false;
        }
        let Some(push4) = self.instructions.iter().position(|i| i.opcode == Opcode::PUSH4) else {
            return false;
        };
        self.instructions[push4 + 1..]
            .iter()
            .any(|i| matches!(i.opcode, Opcode::EQ | Opcode::LT | Opcode::GT))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub tool_id: String,
}

impl Cfg {
    pub fn block(&self, id: usize) -> Option<&BasicBlock> {
        self.blocks
            .binary_search_by_key(&id, |b| b.id)
            .ok()
            .map(|i| &self.blocks[i])
    }

    pub fn block_at_offset(&self, offset: usize) -> Option<&BasicBlock> {
        self.blocks
            .binary_search_by_key(&offset, |b| b.start_offset)
            .ok()
            .map(|i| &self.blocks[i])
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph cfg {\n  node [shape=box fontname=monospace];\n");
        for b in &self.blocks {
            let style = if b.is_dispatcher {
                " style=filled fillcolor=lightgrey"
            } else if b.is_data {
                " style=dashed"
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "  b{} [label=\"#{} @{:#06x}\\n{}\"{}];",
                b.id,
                b.id,
                b.start_offset,
                hex::encode(&b.raw_bytes),
                style
            );
            for t in &b.successors {
                let _ = writeln!(s, "  b{} -> b{};", b.id, t);
            }
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct BlockView<'a> {
            id: usize,
            offset: usize,
            bytes: String,
            dispatcher: bool,
            data: bool,
            successors: &'a BTreeSet<usize>,
        }
        #[derive(Serialize)]
        struct CfgView<'a> {
            tool_id: &'a str,
            blocks: Vec<BlockView<'a>>,
        }
        let view = CfgView {
            tool_id: &self.tool_id,
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockView {
                    id: b.id,
                    offset: b.start_offset,
                    bytes: hex::encode(&b.raw_bytes),
                    dispatcher: b.is_dispatcher,
                    data: b.is_data,
                    successors: &b.successors,
                })
                .collect(),
        };
        serde_json::to_value(view).expect("cfg view serializes")
    }
}

pub fn build_cfg(bytecode: &[u8]) -> Result<Cfg> {
    let seq = evm::disassemble(bytecode)?;

    let mut groups: Vec<Vec<Instruction>> = Vec::new();
    for ins in seq.instructions {
        let split = match groups.last().and_then(|g| g.last()) {
            None => true,
            Some(prev) => ins.opcode == Opcode::JUMPDEST || prev.opcode.is_terminator(),
        };
        if split {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(ins);
    }

    let mut blocks: Vec<BasicBlock> = groups
        .into_iter()
        .enumerate()
        .map(|(id, instructions)| {
            let mut raw_bytes = Vec::new();
            for ins in &instructions {
                ins.encode_into(&mut raw_bytes);
            }
            BasicBlock {
                id,
                start_offset: instructions[0].offset,
                instructions,
                raw_bytes,
                is_dispatcher: false,
                is_data: false,
                successors: BTreeSet::new(),
            }
        })
        .collect();

    let jumpdest_at: HashMap<usize, usize> = blocks
        .iter()
        .filter(|b| b.starts_with_jumpdest())
        .map(|b| (b.start_offset, b.id))
        .collect();

    let count = blocks.len();
    for i in 0..count {
        let b = &blocks[i];
        let last = b.last().opcode;
        let mut succ = BTreeSet::new();
        if matches!(last, Opcode::JUMP | Opcode::JUMPI) && b.instructions.len() >= 2 {
            let push = &b.instructions[b.instructions.len() - 2];
            if push.opcode.is_push() && !push.is_truncated() {
                if let Some(&t) = push.immediate().and_then(|imm| jumpdest_at.get(&imm)) {
                    succ.insert(t);
                }
            }
        }
        let falls_through = last == Opcode::JUMPI || !last.is_terminator();
        if falls_through && i + 1 < count {
            succ.insert(i + 1);
        }

        let undecodable = b
            .instructions
            .iter()
            .any(|ins| !ins.opcode.is_defined() || ins.is_truncated());
        let unreachable_start = i != 0 && !b.starts_with_jumpdest() && blocks[i - 1].last().opcode != Opcode::JUMPI;

        let b = &mut blocks[i];
        b.successors = succ;
        b.is_data = undecodable || unreachable_start;
    }

    Ok(Cfg {
        blocks,
        tool_id: TOOL_ID.to_string(),
    })
}

/// Keeps the lowest-offset block among byte-identical ones. Edges into removed
/// duplicates are redirected to their representative; the survivor is flagged
/// dispatcher if any copy was, and data only if every copy was.
pub fn dedup_blocks(cfg: Cfg) -> Cfg {
    let mut rep_of: HashMap<usize, usize> = HashMap::new();
    let mut first: HashMap<&[u8], usize> = HashMap::new();
    let mut dispatcher: HashMap<usize, bool> = HashMap::new();
    let mut data: HashMap<usize, bool> = HashMap::new();

    for b in &cfg.blocks {
        let rep = *first.entry(b.raw_bytes.as_slice()).or_insert(b.id);
        rep_of.insert(b.id, rep);
        *dispatcher.entry(rep).or_insert(false) |= b.is_dispatcher;
        *data.entry(rep).or_insert(true) &= b.is_data;
    }

    let blocks = cfg
        .blocks
        .iter()
        .filter(|b| rep_of[&b.id] == b.id)
        .map(|b| BasicBlock {
            is_dispatcher: dispatcher[&b.id],
            is_data: data[&b.id],
            successors: b.successors.iter().map(|s| rep_of[s]).collect(),
            ..b.clone()
        })
        .collect();

    Cfg {
        blocks,
        tool_id: cfg.tool_id,
    }
}

/// Flags the entry block and every selector-check block reachable from it
/// through selector-check blocks only.
pub fn mark_dispatcher(mut cfg: Cfg) -> Cfg {
    let index: HashMap<usize, usize> = cfg.blocks.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let Some(entry) = cfg.blocks.iter().position(|b| b.start_offset == 0) else {
        return cfg;
    };

    cfg.blocks[entry].is_dispatcher = true;
    let mut queue = VecDeque::from([entry]);
    while let Some(i) = queue.pop_front() {
        let succ: Vec<usize> = cfg.blocks[i].successors.iter().copied().collect();
        for s in succ {
            let Some(&j) = index.get(&s) else { continue };
            let b = &mut cfg.blocks[j];
            if !b.is_dispatcher && b.is_selector_check() {
                b.is_dispatcher = true;
                queue.push_back(j);
            }
        }
    }
    cfg
}

/// The graph every watermarking step works on: built, dispatcher-marked, deduplicated.
pub fn prepare(bytecode: &[u8]) -> Result<Cfg> {
    Ok(dedup_blocks(mark_dispatcher(build_cfg(bytecode)?)))
}
