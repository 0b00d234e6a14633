//! Resiliency of a watermarked contract against distortion.
//!
//! An adversary who does not know which blocks carry watermark bytes can only
//! splice opcode groups into blocks at random. The probability that M
//! modified blocks out of B candidates hit at least one of the L watermark
//! blocks is hypergeometric; the budget M follows from the ratio alpha of
//! extra gas the adversary accepts. The simulator replays the same attack on
//! real bytecode and verifies the result.

mod math;
mod model;
mod report;
mod simulate;

pub use math::{
    binomial, budget_groups, expected_modified, p_attack, p_attack_closed, p_attack_disjoint, p_attack_exact,
    p_attack_n, p_attack_n_interpolated, to_f64,
};
pub use model::{contract_gas_total, count_candidate_blocks, AttackModel};
pub use report::{cdf_report, CdfReport, CdfRow, CdfSeries, ContractStats, Grid, INTERPOLATION_NOTE};
pub use simulate::{
    attack_group, insert_groups, simulate_distortion, Budget, Insertion, SimulationConfig, SimulationResult, Targeting,
    TrialRecord, ATTACK_PALETTE,
};
