use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::Rng;

use super::{ByteStream, OpcodeGroup, PlacementRow, WatermarkParams, WatermarkPlacement, Zone};
use crate::hash::keccak256_prefix4;
use crate::{Error, Result};

/// Elected groups and the per-block streams they form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Election {
    pub elected: Vec<OpcodeGroup>,
    /// One stream per block with at least one elected group, by block id.
    pub streams: Vec<ByteStream>,
}

/// Rebuilds a stream from group byte sequences: each group is matched at its
/// leftmost occurrence and the covered positions are merged. `None` if any
/// group is absent.
pub fn assemble_stream(opcodes: &[u8], groups: &[Vec<u8>]) -> Option<(Vec<usize>, Vec<u8>)> {
    let mut covered = vec![false; opcodes.len()];
    for g in groups {
        let at = leftmost(opcodes, g)?;
        covered[at..at + g.len()].iter_mut().for_each(|c| *c = true);
    }
    let positions: Vec<usize> = (0..opcodes.len()).filter(|&i| covered[i]).collect();
    let bytes = positions.iter().map(|&i| opcodes[i]).collect();
    Some((positions, bytes))
}

fn leftmost(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Elects ceil(R * |groups|) groups uniformly without replacement across the
/// whole contract and merges them per block.
pub fn elect_groups<R: Rng + ?Sized>(groups: &[OpcodeGroup], zone: &Zone, ratio: f64, rng: &mut R) -> Result<Election> {
    if groups.is_empty() {
        return Err(Error::NoGroups);
    }
    let count = election_count(groups.len(), ratio);
    let mut picked = index::sample(rng, groups.len(), count).into_vec();
    picked.sort_unstable();
    let elected: Vec<OpcodeGroup> = picked.into_iter().map(|i| groups[i].clone()).collect();

    let mut per_block: BTreeMap<usize, Vec<Vec<u8>>> = BTreeMap::new();
    for g in &elected {
        let seqs = per_block.entry(g.block_id).or_default();
        if !seqs.contains(&g.opcodes) {
            seqs.push(g.opcodes.clone());
        }
    }

    let mut streams = Vec::with_capacity(per_block.len());
    for (block_id, mut seqs) in per_block {
        let block = zone
            .block(block_id)
            .ok_or_else(|| Error::InvariantViolation(format!("group refers to block {block_id} outside the zone")))?;
        seqs.sort_by_key(|s| (leftmost(&block.opcodes, s), s.len()));
        let (positions, bytes) =
            assemble_stream(&block.opcodes, &seqs).expect("elected groups occur in their own block");
        streams.push(ByteStream {
            block_id,
            positions,
            bytes,
            groups: seqs,
        });
    }
    Ok(Election { elected, streams })
}

/// ceil(ratio * total), at least one.
pub(crate) fn election_count(total: usize, ratio: f64) -> usize {
    // tolerance keeps 0.2 * 35 from rounding up to 8
    let raw = (ratio * total as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(total)
}

/// Block identifier: first four bytes of Keccak-256 over the stream.
pub fn block_hash(stream: &[u8]) -> Result<[u8; 4]> {
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok(keccak256_prefix4(stream))
}

/// The byte spelled by nibbles `offset` and `offset + 1` of `bytes`.
pub fn read_nibble_byte(bytes: &[u8], offset: usize) -> Option<u8> {
    let nibble = |i: usize| -> Option<u8> {
        let b = *bytes.get(i / 2)?;
        Some(if i.is_multiple_of(2) { b >> 4 } else { b & 0x0f })
    };
    Some((nibble(offset)? << 4) | nibble(offset + 1)?)
}

/// Elects L x N distinct blocks (first come first kept among equal block
/// hashes), splits them into N disjoint watermarks and draws one nibble offset
/// per block.
pub fn elect_watermarks<R: Rng + ?Sized>(
    streams: &[ByteStream],
    params: &WatermarkParams,
    rng: &mut R,
) -> Result<Vec<WatermarkPlacement>> {
    let mut seen = HashSet::new();
    let mut candidates: Vec<(&ByteStream, [u8; 4])> = Vec::new();
    for s in streams {
        let Ok(hash) = block_hash(&s.bytes) else { continue };
        if seen.insert(hash) {
            candidates.push((s, hash));
        }
    }

    let needed = params.blocks_needed();
    if candidates.len() < needed {
        return Err(Error::InsufficientBlocks {
            needed,
            available: candidates.len(),
        });
    }

    let chosen = index::sample(rng, candidates.len(), needed).into_vec();
    let placements = chosen
        .chunks(params.length)
        .map(|chunk| {
            let mut value = Vec::with_capacity(params.length);
            let rows = chunk
                .iter()
                .map(|&i| {
                    let (stream, hash) = candidates[i];
                    let offset = rng.gen_range(0..stream.nibble_len() - 1);
                    value.push(read_nibble_byte(&stream.bytes, offset).expect("offset within stream"));
                    PlacementRow {
                        block_id: stream.block_id,
                        block_hash: hash,
                        nibble_offset: offset as u32,
                        groups: stream.groups.clone(),
                    }
                })
                .collect();
            WatermarkPlacement { value, rows }
        })
        .collect();
    Ok(placements)
}
