use rand::Rng;

use super::{
    assemble_stream, elect_groups, elect_watermarks, enumerate_opcode_groups, watermarkable_zone, ByteStream, Election,
    GroupingParams, OpcodeGroup, WatermarkParams, WatermarkPlacement, Zone,
};
use crate::cfg::{build_cfg, prepare, Cfg};
use crate::wro::{self, HashAlgorithm, Wro, WroMac, WroRow, WroWatermark, WRO_VERSION};
use crate::{Error, Result};

/// Deployed-code size limit (EIP-170).
pub const MAX_RUNTIME_SIZE: usize = 24_576;

/// Everything the embedding pipeline decided, before any bytes are written.
#[derive(Clone, Debug)]
pub struct Plan {
    pub cfg: Cfg,
    pub zone: Zone,
    pub groups: Vec<OpcodeGroup>,
    pub election: Election,
    /// Streams that identify their block unambiguously.
    pub eligible: usize,
    pub placements: Vec<WatermarkPlacement>,
}

impl Plan {
    pub fn to_wro(&self, contract_address: [u8; 20]) -> Wro {
        Wro {
            version: WRO_VERSION,
            tool_id: self.cfg.tool_id.clone(),
            hash_alg: HashAlgorithm::Keccak256,
            contract_address,
            watermarks: self
                .placements
                .iter()
                .map(|p| WroWatermark {
                    length: p.value.len() as u16,
                    value: p.value.clone(),
                    rows: p
                        .rows
                        .iter()
                        .map(|r| WroRow {
                            block_hash: r.block_hash,
                            nibble_offset: r.nibble_offset,
                            groups: r.groups.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn blocks_used(&self) -> usize {
        self.placements.iter().map(|p| p.rows.len()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Embedding {
    pub wro: Wro,
    pub mac: WroMac,
    /// Creation bytecode with the MAC trailer appended.
    pub creation: Vec<u8>,
    pub plan: Plan,
}

/// Runs cfg, zone, groups and both elections on `runtime`.
///
/// A stream is only placed if no other block of the undeduplicated graph
/// rebuilds the same bytes from the same groups; otherwise a verifier could
/// match the watermark in the wrong block.
pub fn plan<R: Rng + ?Sized>(runtime: &[u8], g: &GroupingParams, w: &WatermarkParams, rng: &mut R) -> Result<Plan> {
    g.validate()?;
    if runtime.len() > MAX_RUNTIME_SIZE {
        return Err(Error::OversizedContract {
            size: runtime.len(),
            limit: MAX_RUNTIME_SIZE,
        });
    }
    let cfg = prepare(runtime)?;
    let zone = watermarkable_zone(&cfg)?;
    let groups = enumerate_opcode_groups(&zone, g);
    let election = elect_groups(&groups, &zone, g.election_ratio, rng).map_err(|e| match e {
        Error::NoGroups => Error::InsufficientBlocks {
            needed: w.blocks_needed(),
            available: 0,
        },
        other => other,
    })?;

    let raw: Vec<(usize, Vec<u8>)> = build_cfg(runtime)?
        .blocks
        .iter()
        .map(|b| (b.start_offset, b.opcodes()))
        .collect();
    let eligible: Vec<ByteStream> = election
        .streams
        .iter()
        .filter(|s| {
            let own = zone.block(s.block_id).map(|b| b.start_offset);
            !raw.iter().any(|(start, ops)| {
                Some(*start) != own && assemble_stream(ops, &s.groups).is_some_and(|(_, bytes)| bytes == s.bytes)
            })
        })
        .cloned()
        .collect();

    let placements = elect_watermarks(&eligible, w, rng)?;
    Ok(Plan {
        cfg,
        zone,
        groups,
        eligible: eligible.len(),
        election,
        placements,
    })
}

/// Plans a watermark, builds its WRO and appends the WRO MAC to `creation`.
/// The runtime bytes are only read.
pub fn embed<R: Rng + ?Sized>(
    runtime: &[u8],
    creation: &[u8],
    g: &GroupingParams,
    w: &WatermarkParams,
    contract_address: [u8; 20],
    rng: &mut R,
) -> Result<Embedding> {
    let plan = plan(runtime, g, w, rng)?;
    let wro = plan.to_wro(contract_address);
    let mac = wro::mac(&wro)?;
    let creation = wro::embed_mac(creation, &mac)?;
    Ok(Embedding {
        wro,
        mac,
        creation,
        plan,
    })
}
