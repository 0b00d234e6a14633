//! Opcode table and static gas schedule (London fork base costs).
//!
//! Only the constant per-opcode charge is modelled. Memory expansion, cold
//! account/slot surcharges and refunds are dynamic and ignored here; for the
//! access-list opcodes the warm cost is used as the static base.

use std::fmt;

#[derive(Clone, Copy, Debug)]
struct OpInfo {
    name: &'static str,
    gas: u32,
}

const fn op(name: &'static str, gas: u32) -> Option<OpInfo> {
    Some(OpInfo { name, gas })
}

static TABLE: [Option<OpInfo>; 256] = build_table();

const fn build_table() -> [Option<OpInfo>; 256] {
    let mut t: [Option<OpInfo>; 256] = [None; 256];

    t[0x00] = op("STOP", 0);
    t[0x01] = op("ADD", 3);
    t[0x02] = op("MUL", 5);
    t[0x03] = op("SUB", 3);
    t[0x04] = op("DIV", 5);
    t[0x05] = op("SDIV", 5);
    t[0x06] = op("MOD", 5);
    t[0x07] = op("SMOD", 5);
    t[0x08] = op("ADDMOD", 8);
    t[0x09] = op("MULMOD", 8);
    t[0x0a] = op("EXP", 10);
    t[0x0b] = op("SIGNEXTEND", 5);

    t[0x10] = op("LT", 3);
    t[0x11] = op("GT", 3);
    t[0x12] = op("SLT", 3);
    t[0x13] = op("SGT", 3);
    t[0x14] = op("EQ", 3);
    t[0x15] = op("ISZERO", 3);
    t[0x16] = op("AND", 3);
    t[0x17] = op("OR", 3);
    t[0x18] = op("XOR", 3);
    t[0x19] = op("NOT", 3);
    t[0x1a] = op("BYTE", 3);
    t[0x1b] = op("SHL", 3);
    t[0x1c] = op("SHR", 3);
    t[0x1d] = op("SAR", 3);

    t[0x20] = op("SHA3", 30);

    t[0x30] = op("ADDRESS", 2);
    t[0x31] = op("BALANCE", 100);
    t[0x32] = op("ORIGIN", 2);
    t[0x33] = op("CALLER", 2);
    t[0x34] = op("CALLVALUE", 2);
    t[0x35] = op("CALLDATALOAD", 3);
    t[0x36] = op("CALLDATASIZE", 2);
    t[0x37] = op("CALLDATACOPY", 3);
    t[0x38] = op("CODESIZE", 2);
    t[0x39] = op("CODECOPY", 3);
    t[0x3a] = op("GASPRICE", 2);
    t[0x3b] = op("EXTCODESIZE", 100);
    t[0x3c] = op("EXTCODECOPY", 100);
    t[0x3d] = op("RETURNDATASIZE", 2);
    t[0x3e] = op("RETURNDATACOPY", 3);
    t[0x3f] = op("EXTCODEHASH", 100);

    t[0x40] = op("BLOCKHASH", 20);
    t[0x41] = op("COINBASE", 2);
    t[0x42] = op("TIMESTAMP", 2);
    t[0x43] = op("NUMBER", 2);
    t[0x44] = op("DIFFICULTY", 2);
    t[0x45] = op("GASLIMIT", 2);
    t[0x46] = op("CHAINID", 2);
    t[0x47] = op("SELFBALANCE", 5);
    t[0x48] = op("BASEFEE", 2);

    t[0x50] = op("POP", 2);
    t[0x51] = op("MLOAD", 3);
    t[0x52] = op("MSTORE", 3);
    t[0x53] = op("MSTORE8", 3);
    t[0x54] = op("SLOAD", 100);
    t[0x55] = op("SSTORE", 100);
    t[0x56] = op("JUMP", 8);
    t[0x57] = op("JUMPI", 10);
    t[0x58] = op("PC", 2);
    t[0x59] = op("MSIZE", 2);
    t[0x5a] = op("GAS", 2);
    t[0x5b] = op("JUMPDEST", 1);

    const PUSH: [&str; 32] = [
        "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9", "PUSH10", "PUSH11", "PUSH12",
        "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19", "PUSH20", "PUSH21", "PUSH22", "PUSH23",
        "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28", "PUSH29", "PUSH30", "PUSH31", "PUSH32",
    ];
    const DUP: [&str; 16] = [
        "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9", "DUP10", "DUP11", "DUP12", "DUP13",
        "DUP14", "DUP15", "DUP16",
    ];
    const SWAP: [&str; 16] = [
        "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8", "SWAP9", "SWAP10", "SWAP11", "SWAP12",
        "SWAP13", "SWAP14", "SWAP15", "SWAP16",
    ];
    let mut i = 0;
    while i < 32 {
        t[0x60 + i] = op(PUSH[i], 3);
        i += 1;
    }
    i = 0;
    while i < 16 {
        t[0x80 + i] = op(DUP[i], 3);
        t[0x90 + i] = op(SWAP[i], 3);
        i += 1;
    }

    t[0xa0] = op("LOG0", 375);
    t[0xa1] = op("LOG1", 750);
    t[0xa2] = op("LOG2", 1125);
    t[0xa3] = op("LOG3", 1500);
    t[0xa4] = op("LOG4", 1875);

    t[0xf0] = op("CREATE", 32000);
    t[0xf1] = op("CALL", 100);
    t[0xf2] = op("CALLCODE", 100);
    t[0xf3] = op("RETURN", 0);
    t[0xf4] = op("DELEGATECALL", 100);
    t[0xf5] = op("CREATE2", 32000);
    t[0xfa] = op("STATICCALL", 100);
    t[0xfd] = op("REVERT", 0);
    t[0xfe] = op("INVALID", 0);
    t[0xff] = op("SELFDESTRUCT", 5000);

    t
}

/// A single EVM opcode byte.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Opcode(pub u8);

impl Opcode {
    pub const STOP: Opcode = Opcode(0x00);
    pub const ADD: Opcode = Opcode(0x01);
    pub const MUL: Opcode = Opcode(0x02);
    pub const LT: Opcode = Opcode(0x10);
    pub const GT: Opcode = Opcode(0x11);
    pub const EQ: Opcode = Opcode(0x14);
    pub const POP: Opcode = Opcode(0x50);
    pub const JUMP: Opcode = Opcode(0x56);
    pub const JUMPI: Opcode = Opcode(0x57);
    pub const JUMPDEST: Opcode = Opcode(0x5b);
    pub const PUSH1: Opcode = Opcode(0x60);
    pub const PUSH4: Opcode = Opcode(0x63);
    pub const PUSH32: Opcode = Opcode(0x7f);
    pub const RETURN: Opcode = Opcode(0xf3);
    pub const REVERT: Opcode = Opcode(0xfd);
    pub const INVALID: Opcode = Opcode(0xfe);
    pub const SELFDESTRUCT: Opcode = Opcode(0xff);

    /// Whether the byte is assigned an instruction in the schedule.
    pub fn is_defined(self) -> bool {
        TABLE[self.0 as usize].is_some()
    }

    /// Mnemonic, or `None` for unassigned bytes.
    pub fn name(self) -> Option<&'static str> {
        TABLE[self.0 as usize].map(|i| i.name)
    }

    /// Static base gas; undefined opcodes cost 0.
    pub fn static_gas(self) -> u32 {
        TABLE[self.0 as usize].map_or(0, |i| i.gas)
    }

    /// Immediate operand width (PUSH1..PUSH32), else 0.
    pub fn push_size(self) -> usize {
        if (0x60..=0x7f).contains(&self.0) {
            (self.0 - 0x5f) as usize
        } else {
            0
        }
    }

    pub fn is_push(self) -> bool {
        self.push_size() > 0
    }

    /// JUMP, JUMPI, STOP, RETURN, REVERT, SELFDESTRUCT and every INVALID-class byte.
    pub fn is_terminator(self) -> bool {
        matches!(self.0, 0x00 | 0x56 | 0x57 | 0xf3 | 0xfd | 0xfe | 0xff) || !self.is_defined()
    }
}

impl fmt::Debug for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(n) => f.write_str(n),
            None => write!(f, "INVALID({:#04x})", self.0),
        }
    }
}

/// Static base gas for an opcode byte.
pub fn static_gas(opcode: u8) -> u32 {
    Opcode(opcode).static_gas()
}

/// Number of opcode bytes with a schedule entry.
pub fn defined_count() -> usize {
    TABLE.iter().filter(|e| e.is_some()).count()
}
