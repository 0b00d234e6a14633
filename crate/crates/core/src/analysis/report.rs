use std::io::Write;

use serde::Serialize;

use super::math::{expected_modified, p_attack_n_interpolated};
use crate::{Error, Result};

/// Per-contract inputs of the resiliency estimate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContractStats {
    pub contract_id: String,
    pub b: u64,
    pub c: u64,
    pub psi: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub lengths: Vec<u64>,
    pub counts: Vec<u32>,
    pub alphas: Vec<f64>,
    pub threshold: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdfRow {
    pub contract_id: String,
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "N")]
    pub n: u32,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: u64,
    #[serde(rename = "C")]
    pub c: u64,
    pub psi: u64,
    #[serde(rename = "E_M")]
    pub e_m: f64,
    pub p_attack: f64,
}

/// Sorted p_attack_n values of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdfSeries {
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "N")]
    pub n: u32,
    pub alpha: f64,
    pub values: Vec<f64>,
}

impl CdfSeries {
    /// Empirical CDF at `x`: fraction of contracts with p_attack <= x.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        k as f64 / self.values.len() as f64
    }

    /// Lower empirical quantile, q in [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.values.len();
        let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.values[idx]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdfReport {
    /// How a fractional E(M) is fed to the integer formula.
    pub interpolation: &'static str,
    /// Contracts with fewer than max(L) candidate blocks.
    pub excluded: Vec<String>,
    pub rows: Vec<CdfRow>,
    pub series: Vec<CdfSeries>,
}

pub const INTERPOLATION_NOTE: &str =
    "p_attack_n evaluated at floor(E_M) and ceil(E_M) and linearly interpolated; E_M clamped to B";

/// Evaluates p_attack_n at E(M) for every contract and grid point. The
/// population is fixed across the grid: contracts whose B is below the
/// largest L (or that have no groupable block) are listed as excluded.
pub fn cdf_report(stats: &[ContractStats], grid: &Grid) -> Result<CdfReport> {
    if grid.lengths.is_empty() || grid.counts.is_empty() || grid.alphas.is_empty() {
        return Err(Error::InvalidParams("empty parameter grid".into()));
    }
    let max_l = *grid.lengths.iter().max().unwrap();
    let (kept, dropped): (Vec<&ContractStats>, Vec<&ContractStats>) =
        stats.iter().partition(|s| s.b >= max_l && s.c >= 1 && s.b <= s.c);
    if kept.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &l in &grid.lengths {
        for &n in &grid.counts {
            for &alpha in &grid.alphas {
                let mut values = Vec::with_capacity(kept.len());
                for s in &kept {
                    let e_m = expected_modified(alpha, s.psi, grid.threshold, s.b, s.c)?;
                    let p = p_attack_n_interpolated(l, s.b, e_m, n)?;
                    values.push(p);
                    rows.push(CdfRow {
                        contract_id: s.contract_id.clone(),
                        l,
                        n,
                        alpha,
                        b: s.b,
                        c: s.c,
                        psi: s.psi,
                        e_m,
                        p_attack: p,
                    });
                }
                values.sort_by(f64::total_cmp);
                series.push(CdfSeries { l, n, alpha, values });
            }
        }
    }
    Ok(CdfReport {
        interpolation: INTERPOLATION_NOTE,
        excluded: dropped.iter().map(|s| s.contract_id.clone()).collect(),
        rows,
        series,
    })
}

impl CdfReport {
    pub fn series(&self, l: u64, n: u32, alpha: f64) -> Option<&CdfSeries> {
        self.series.iter().find(|s| s.l == l && s.n == n && s.alpha == alpha)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
