use std::collections::BTreeSet;

use serde::Serialize;

use super::math::{expected_modified, p_attack_n_interpolated};
use crate::cfg::{prepare, Cfg};
use crate::evm::disassemble;
use crate::watermark::{enumerate_opcode_groups, has_group_run, watermarkable_zone, GroupingParams};
use crate::{Error, Result};

/// Static gas sum over every instruction of the runtime.
pub fn contract_gas_total(runtime: &[u8]) -> Result<u64> {
    Ok(disassemble(runtime)?.total_gas())
}

/// (B, C): zone blocks holding at least one opcode group, and blocks of the
/// whole graph holding a run of at most G opcodes with gas >= T.
pub fn count_candidate_blocks(cfg: &Cfg, g: &GroupingParams) -> (usize, usize) {
    let b = match watermarkable_zone(cfg) {
        Ok(zone) => enumerate_opcode_groups(&zone, g)
            .iter()
            .map(|grp| grp.block_id)
            .collect::<BTreeSet<_>>()
            .len(),
        Err(_) => 0,
    };
    let c = cfg.blocks.iter().filter(|blk| has_group_run(&blk.opcodes(), g)).count();
    (b, c)
}

/// Inputs of the resiliency estimate for one contract.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackModel {
    pub length: u64,
    pub count: u32,
    /// Watermarkable candidate blocks (B).
    pub candidates: u64,
    /// Blocks holding any qualifying opcode run (C).
    pub groupable: u64,
    pub alpha: f64,
    /// Total static gas (psi).
    pub psi: u64,
    pub threshold: u32,
}

impl AttackModel {
    pub fn for_runtime(runtime: &[u8], g: &GroupingParams, length: u64, count: u32, alpha: f64) -> Result<Self> {
        let cfg = prepare(runtime)?;
        let (b, c) = count_candidate_blocks(&cfg, g);
        Ok(AttackModel {
            length,
            count,
            candidates: b as u64,
            groupable: c as u64,
            alpha,
            psi: contract_gas_total(runtime)?,
            threshold: g.gas_threshold,
        })
    }

    /// E(M), clamped to B.
    pub fn expected_modified(&self) -> Result<f64> {
        if self.groupable == 0 {
            return Err(Error::DomainError("contract has no groupable block".into()));
        }
        expected_modified(self.alpha, self.psi, self.threshold, self.candidates, self.groupable)
    }

    /// p_attack_n evaluated at E(M).
    pub fn p_attack_n(&self) -> Result<f64> {
        p_attack_n_interpolated(self.length, self.candidates, self.expected_modified()?, self.count)
    }
}
