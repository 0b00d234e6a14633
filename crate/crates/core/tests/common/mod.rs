#![allow(dead_code)]

use std::path::PathBuf;

use evmark::evm::read_bytecode;
use rand::Rng;

/// Straightforward Keccak-256 (rate 1088, padding 0x01..0x80) with round
/// constants and rotation offsets derived from their defining recurrences
/// instead of copied tables.
pub mod keccak {
    fn rc_bit(t: usize) -> bool {
        if t.is_multiple_of(255) {
            return true;
        }
        let mut r: u16 = 0x01;
        for _ in 0..t % 255 {
            r <<= 1;
            if r & 0x100 != 0 {
                r ^= 0x171;
            }
        }
        r & 1 == 1
    }

    fn round_constants() -> [u64; 24] {
        let mut rc = [0u64; 24];
        for (i, c) in rc.iter_mut().enumerate() {
            for j in 0..7 {
                if rc_bit(j + 7 * i) {
                    *c |= 1u64 << ((1usize << j) - 1);
                }
            }
        }
        rc
    }

    fn rotation_offsets() -> [[u32; 5]; 5] {
        let mut r = [[0u32; 5]; 5];
        let (mut x, mut y) = (1usize, 0usize);
        for t in 0..24u32 {
            r[x][y] = ((t + 1) * (t + 2) / 2) % 64;
            (x, y) = (y, (2 * x + 3 * y) % 5);
        }
        r
    }

    fn permute(a: &mut [[u64; 5]; 5]) {
        let rc = round_constants();
        let rot = rotation_offsets();
        for c in rc {
            let mut col = [0u64; 5];
            for (x, v) in col.iter_mut().enumerate() {
                *v = a[x][0] ^ a[x][1] ^ a[x][2] ^ a[x][3] ^ a[x][4];
            }
            for x in 0..5 {
                let d = col[(x + 4) % 5] ^ col[(x + 1) % 5].rotate_left(1);
                for lane in a[x].iter_mut() {
                    *lane ^= d;
                }
            }
            let mut b = [[0u64; 5]; 5];
            for x in 0..5 {
                for y in 0..5 {
                    b[y][(2 * x + 3 * y) % 5] = a[x][y].rotate_left(rot[x][y]);
                }
            }
            for x in 0..5 {
                for y in 0..5 {
                    a[x][y] = b[x][y] ^ (!b[(x + 1) % 5][y] & b[(x + 2) % 5][y]);
                }
            }
            a[0][0] ^= c;
        }
    }

    pub fn keccak256(data: &[u8]) -> [u8; 32] {
        const RATE: usize = 136;
        let mut msg = data.to_vec();
        msg.push(0x01);
        while !msg.len().is_multiple_of(RATE) {
            msg.push(0);
        }
        *msg.last_mut().unwrap() |= 0x80;

        let mut a = [[0u64; 5]; 5];
        for chunk in msg.chunks(RATE) {
            for (i, lane) in chunk.chunks(8).enumerate() {
                a[i % 5][i / 5] ^= u64::from_le_bytes(lane.try_into().unwrap());
            }
            permute(&mut a);
        }
        let mut out = [0u8; 32];
        for i in 0..4 {
            out[8 * i..8 * i + 8].copy_from_slice(&a[i % 5][i / 5].to_le_bytes());
        }
        out
    }
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/solc")
}

/// Compiled contracts shipped with the tests: (name, runtime, creation).
pub fn fixtures() -> Vec<(String, Vec<u8>, Vec<u8>)> {
    let dir = fixture_dir();
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.strip_suffix(".runtime.hex").map(str::to_string)
        })
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let runtime = read_bytecode(&dir.join(format!("{n}.runtime.hex"))).unwrap();
            let creation = read_bytecode(&dir.join(format!("{n}.creation.hex"))).unwrap();
            (n, runtime, creation)
        })
        .collect()
}

/// 5-gas opcodes: MUL DIV SDIV MOD SMOD SIGNEXTEND.
const FIVE_GAS: [u8; 6] = [0x02, 0x04, 0x05, 0x06, 0x07, 0x0b];

/// 3-gas opcodes other than EQ/LT/GT and PUSH.
fn three_gas() -> Vec<u8> {
    let mut v = vec![
        0x01, 0x03, 0x12, 0x13, 0x15, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x1b, 0x1c, 0x1d,
    ];
    v.extend(0x80..=0x9f);
    v
}

/// STOP, then `b` distinct `JUMPDEST x y` blocks with x a 5-gas and y a 3-gas
/// opcode. At T = 9 every block holds exactly one group (the whole block), so
/// with R = 1 each block is one electable stream.
pub fn uniform_contract(b: usize) -> Vec<u8> {
    let three = three_gas();
    assert!(b <= FIVE_GAS.len() * three.len());
    let mut code = vec![0x00];
    for i in 0..b {
        code.extend([0x5b, FIVE_GAS[i % FIVE_GAS.len()], three[i / FIVE_GAS.len()]]);
    }
    code
}

enum Item {
    Op(u8),
    Push(Vec<u8>),
    /// PUSH2 holding the offset of block `n`.
    Target(usize),
}

fn item_len(i: &Item) -> usize {
    match i {
        Item::Op(_) => 1,
        Item::Push(v) => 1 + v.len(),
        Item::Target(_) => 3,
    }
}

fn lay_out(blocks: &[Vec<Item>]) -> Vec<u8> {
    let mut starts = Vec::with_capacity(blocks.len());
    let mut at = 0;
    for b in blocks {
        starts.push(at);
        at += b.iter().map(item_len).sum::<usize>();
    }
    let mut code = Vec::with_capacity(at);
    for b in blocks {
        for i in b {
            match i {
                Item::Op(o) => code.push(*o),
                Item::Push(v) => {
                    code.push(0x5f + v.len() as u8);
                    code.extend(v);
                }
                Item::Target(n) => {
                    code.push(0x61);
                    code.extend((starts[*n] as u16).to_be_bytes());
                }
            }
        }
    }
    code
}

/// Body opcode drawn to give a mostly 3-gas mix, as in deployed code.
fn body_op<R: Rng + ?Sized>(rng: &mut R, out: &mut Vec<Item>) {
    const THREE: [u8; 20] = [
        0x01, 0x03, 0x16, 0x17, 0x18, 0x19, 0x15, 0x1b, 0x1c, 0x51, 0x52, 0x35, 0x80, 0x81, 0x82, 0x83, 0x90, 0x91,
        0x92, 0x93,
    ];
    const OTHER: [u8; 12] = [0x50, 0x33, 0x34, 0x30, 0x36, 0x42, 0x43, 0x02, 0x04, 0x06, 0x20, 0x54];
    let r: f64 = rng.gen();
    if r < 0.30 {
        let width = if rng.gen_bool(0.8) { 1 } else { 2 };
        out.push(Item::Push((0..width).map(|_| rng.gen()).collect()));
    } else if r < 0.83 {
        out.push(Item::Op(THREE[rng.gen_range(0..THREE.len())]));
    } else {
        out.push(Item::Op(OTHER[rng.gen_range(0..OTHER.len())]));
    }
}

/// A compiler-shaped contract: selector dispatcher chain, a fallback, then
/// JUMPDEST-led body blocks of random mostly 3-gas code ending in jumps,
/// conditional jumps, fall-throughs or returns. Block count is drawn from
/// 70..=148 (mean 109) and body length from 14..=28 opcodes.
pub fn realistic_contract<R: Rng + ?Sized>(rng: &mut R) -> Vec<u8> {
    let total = rng.gen_range(70..=148usize);
    let functions = rng.gen_range(4..=14usize);
    let first_body = functions + 2;
    let body_count = total - first_body;

    let mut blocks: Vec<Vec<Item>> = Vec::with_capacity(total);
    blocks.push(vec![
        Item::Push(vec![0x80]),
        Item::Push(vec![0x40]),
        Item::Op(0x52),
        Item::Push(vec![0x04]),
        Item::Op(0x36),
        Item::Op(0x10),
        Item::Target(first_body - 1),
        Item::Op(0x57),
    ]);
    for f in 0..functions {
        let mut b = Vec::new();
        if f == 0 {
            b.extend([
                Item::Push(vec![0x00]),
                Item::Op(0x35),
                Item::Push(vec![0xe0]),
                Item::Op(0x1c),
            ]);
        }
        b.push(Item::Op(0x80));
        b.push(Item::Push((0..4).map(|_| rng.gen()).collect()));
        b.push(Item::Op(0x14));
        b.push(Item::Target(first_body + rng.gen_range(0..body_count)));
        b.push(Item::Op(0x57));
        blocks.push(b);
    }
    blocks.push(vec![
        Item::Op(0x5b),
        Item::Push(vec![0x00]),
        Item::Op(0x80),
        Item::Op(0xfd),
    ]);

    for k in 0..body_count {
        let mut b = vec![Item::Op(0x5b)];
        for _ in 0..rng.gen_range(14..=28) {
            body_op(rng, &mut b);
        }
        let last = k + 1 == body_count;
        let r: f64 = rng.gen();
        if last || r < 0.15 {
            if rng.gen_bool(0.5) {
                b.push(Item::Op(0x00));
            } else {
                b.extend([Item::Push(vec![0x20]), Item::Push(vec![0x00]), Item::Op(0xf3)]);
            }
        } else if r < 0.60 {
            b.push(Item::Target(first_body + rng.gen_range(0..body_count)));
            b.push(Item::Op(0x56));
        } else if r < 0.85 {
            b.push(Item::Target(first_body + rng.gen_range(0..body_count)));
            b.push(Item::Op(0x57));
        }
        blocks.push(b);
    }
    lay_out(&blocks)
}

/// Creation stub that copies nothing; enough to carry a MAC trailer.
pub fn stub_creation(runtime: &[u8]) -> Vec<u8> {
    let mut c = vec![0x60, 0x80, 0x60, 0x40, 0x52, 0x00];
    c.extend_from_slice(&runtime[..runtime.len().min(8)]);
    c
}
