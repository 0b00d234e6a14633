//! EVM bytecode decoding, re-encoding and input parsing.
//!
//! Disassembly is a linear sweep from offset 0. Every byte belongs to exactly
//! one instruction: data mixed into code decodes as instructions, unassigned
//! bytes decode as one-byte INVALID-class instructions, and a PUSH running off
//! the end is zero-padded and flagged truncated.

mod opcode;

pub use opcode::{defined_count, static_gas, Opcode};

use std::path::Path;

use crate::{Error, Result};

/// One decoded instruction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: Opcode,
    /// Immediate bytes, always `push_size` long (zero-padded when truncated).
    pub operand: Vec<u8>,
    pub static_gas: u32,
    /// Number of padding bytes added because the operand ran past the input.
    missing: usize,
}

impl Instruction {
    /// Builds an instruction at `offset`; a short operand is zero-padded and
    /// recorded as truncated.
    pub fn new(offset: usize, opcode: Opcode, operand: &[u8]) -> Self {
        let width = opcode.push_size();
        let present = operand.len().min(width);
        let mut padded = operand[..present].to_vec();
        padded.resize(width, 0);
        Instruction {
            offset,
            opcode,
            operand: padded,
            static_gas: opcode.static_gas(),
            missing: width - present,
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.missing > 0
    }

    /// Bytes this instruction occupies in the source.
    pub fn encoded_len(&self) -> usize {
        1 + self.operand.len() - self.missing
    }

    pub fn end(&self) -> usize {
        self.offset + self.encoded_len()
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.opcode.0);
        out.extend_from_slice(&self.operand[..self.operand.len() - self.missing]);
    }

    /// Immediate value as an integer when it fits in `usize`.
    pub fn immediate(&self) -> Option<usize> {
        if self.operand.is_empty() {
            return None;
        }
        let significant = self.operand.iter().skip_while(|&&b| b == 0).count();
        if significant > std::mem::size_of::<usize>() {
            return None;
        }
        Some(self.operand.iter().fold(0usize, |acc, &b| (acc << 8) | b as usize))
    }
}

/// An offset-ordered, gap-free decoding of a byte string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstructionSequence {
    pub instructions: Vec<Instruction>,
    pub source_len: usize,
}

impl InstructionSequence {
    /// Lays instructions out contiguously from offset 0, rewriting offsets.
    pub fn relayout(mut instructions: Vec<Instruction>) -> Self {
        let mut at = 0;
        for ins in &mut instructions {
            ins.offset = at;
            at += ins.encoded_len();
        }
        InstructionSequence {
            instructions,
            source_len: at,
        }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Sum of static gas over all instructions.
    pub fn total_gas(&self) -> u64 {
        self.instructions.iter().map(|i| i.static_gas as u64).sum()
    }
}

/// Decodes the instruction starting at `offset`. Panics if `offset` is out of range.
pub fn decode_instruction(bytes: &[u8], offset: usize) -> Instruction {
    let opcode = Opcode(bytes[offset]);
    let width = opcode.push_size();
    let start = offset + 1;
    let end = (start + width).min(bytes.len());
    Instruction::new(offset, opcode, &bytes[start..end])
}

pub fn disassemble(bytecode: &[u8]) -> Result<InstructionSequence> {
    if bytecode.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut instructions = Vec::with_capacity(bytecode.len() / 2);
    let mut offset = 0;
    while offset < bytecode.len() {
        let ins = decode_instruction(bytecode, offset);
        offset = ins.end();
        instructions.push(ins);
    }
    Ok(InstructionSequence {
        instructions,
        source_len: bytecode.len(),
    })
}

/// Re-encodes a sequence, checking that it tiles `[0, source_len)`.
pub fn assemble(seq: &InstructionSequence) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(seq.source_len);
    let last = seq.instructions.len().saturating_sub(1);
    for (i, ins) in seq.instructions.iter().enumerate() {
        if ins.offset != out.len() || (ins.is_truncated() && i != last) {
            return Err(Error::InconsistentOffsets {
                expected: out.len(),
                found: ins.offset,
            });
        }
        ins.encode_into(&mut out);
    }
    if out.len() != seq.source_len {
        return Err(Error::InconsistentOffsets {
            expected: seq.source_len,
            found: out.len(),
        });
    }
    Ok(out)
}

/// Interprets file contents as hex text (optional `0x`, whitespace ignored)
/// when they look like it, otherwise as raw bytes.
pub fn parse_bytecode(contents: &[u8]) -> Result<Vec<u8>> {
    match hex_text(contents) {
        Some(text) => Ok(hex::decode(text)?),
        None => Ok(contents.to_vec()),
    }
}

/// Strict hex parse used for command-line values and `.hex` files.
pub fn parse_hex(contents: &[u8]) -> Result<Vec<u8>> {
    let text: String = contents
        .iter()
        .filter(|b| !b.is_ascii_whitespace())
        .map(|&b| b as char)
        .collect();
    let text = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .unwrap_or(&text);
    Ok(hex::decode(text)?)
}

fn hex_text(contents: &[u8]) -> Option<String> {
    let text: String = std::str::from_utf8(contents)
        .ok()?
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let body = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .unwrap_or(&text);
    let plausible = !body.is_empty() && body.len().is_multiple_of(2) && body.bytes().all(|b| b.is_ascii_hexdigit());
    plausible.then(|| body.to_string())
}

/// Reads bytecode from disk: `.hex` files are hex text, `.bin` files raw,
/// anything else is sniffed.
pub fn read_bytecode(path: &Path) -> Result<Vec<u8>> {
    let contents = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("hex") => parse_hex(&contents),
        Some("bin") => Ok(contents),
        _ => parse_bytecode(&contents),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_push1() {
        let ins = decode_instruction(&[0x60, 0x01], 0);
        assert_eq!(ins.opcode, Opcode::PUSH1);
        assert_eq!(ins.operand, vec![0x01]);
        assert_eq!(ins.encoded_len(), 2);
        assert!(!ins.is_truncated());
    }

    #[test]
    fn decode_stop() {
        let ins = decode_instruction(&[0x00], 0);
        assert_eq!(ins.opcode, Opcode::STOP);
        assert!(ins.operand.is_empty());
        assert_eq!(ins.encoded_len(), 1);
    }

    #[test]
    fn decode_mid_block() {
        let ins = decode_instruction(&[0x5b, 0x82, 0x01, 0x91], 1);
        assert_eq!(ins.opcode, Opcode(0x82));
        assert_eq!(ins.opcode.to_string(), "DUP3");
        assert_eq!(ins.encoded_len(), 1);
        assert_eq!(ins.static_gas, 3);
    }

    #[test]
    fn disassemble_simple_chain() {
        let seq = disassemble(&[0x60, 0x01, 0x60, 0x02, 0x01]).unwrap();
        let names: Vec<_> = seq.instructions.iter().map(|i| i.opcode.to_string()).collect();
        assert_eq!(names, ["PUSH1", "PUSH1", "ADD"]);
        assert_eq!(seq.instructions[1].operand, vec![0x02]);
        assert_eq!(seq.source_len, 5);
    }

    #[test]
    fn disassemble_block_listing() {
        let seq = disassemble(&[0x5b, 0x82, 0x01, 0x91, 0x90]).unwrap();
        let names: Vec<_> = seq.instructions.iter().map(|i| i.opcode.to_string()).collect();
        assert_eq!(names, ["JUMPDEST", "DUP3", "ADD", "SWAP2", "SWAP1"]);
        let gas: Vec<_> = seq.instructions.iter().map(|i| i.static_gas).collect();
        assert_eq!(gas, [1, 3, 3, 3, 3]);
    }

    #[test]
    fn truncated_push32() {
        let bytes = [0x7f, 0xaa, 0xbb, 0xcc];
        let seq = disassemble(&bytes).unwrap();
        assert_eq!(seq.len(), 1);
        let ins = &seq.instructions[0];
        assert!(ins.is_truncated());
        assert_eq!(ins.operand.len(), 32);
        assert_eq!(&ins.operand[..3], &[0xaa, 0xbb, 0xcc]);
        assert!(ins.operand[3..].iter().all(|&b| b == 0));
        assert_eq!(assemble(&seq).unwrap(), bytes);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(disassemble(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn undefined_byte_is_single_invalid() {
        let seq = disassemble(&[0x0c, 0x60, 0x01]).unwrap();
        assert_eq!(seq.len(), 2);
        assert!(!seq.instructions[0].opcode.is_defined());
        assert_eq!(seq.instructions[0].static_gas, 0);
    }

    #[test]
    fn assemble_push1() {
        let seq = InstructionSequence::relayout(vec![Instruction::new(0, Opcode::PUSH1, &[1])]);
        assert_eq!(assemble(&seq).unwrap(), vec![0x60, 0x01]);
    }

    #[test]
    fn assemble_rejects_gaps() {
        let mut seq = disassemble(&[0x60, 0x01, 0x00]).unwrap();
        seq.instructions[1].offset = 3;
        assert!(matches!(assemble(&seq), Err(Error::InconsistentOffsets { .. })));
        let mut seq = disassemble(&[0x60, 0x01, 0x00]).unwrap();
        seq.source_len = 4;
        assert!(matches!(assemble(&seq), Err(Error::InconsistentOffsets { .. })));
    }

    #[test]
    fn immediate_value() {
        let ins = Instruction::new(0, Opcode(0x61), &[0x01, 0x02]);
        assert_eq!(ins.immediate(), Some(0x0102));
        let mut wide = vec![0u8; 31];
        wide.push(7);
        assert_eq!(Instruction::new(0, Opcode::PUSH32, &wide).immediate(), Some(7));
        assert_eq!(Instruction::new(0, Opcode::PUSH32, &[0xff; 32]).immediate(), None);
    }

    #[test]
    fn hex_and_raw_inputs() {
        assert_eq!(parse_bytecode(b"0x6001\n").unwrap(), vec![0x60, 0x01]);
        assert_eq!(parse_bytecode(b"60 01").unwrap(), vec![0x60, 0x01]);
        assert_eq!(parse_bytecode(&[0x60, 0x01]).unwrap(), vec![0x60, 0x01]);
        assert!(parse_hex(b"0xzz").is_err());
    }
}
