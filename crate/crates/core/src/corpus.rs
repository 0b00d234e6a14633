//! Contract collections: ingestion with byte-level dedup, block-set
//! similarity, DBSCAN clustering and watermark-uniqueness statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cfg::prepare;
use crate::evm::read_bytecode;
use crate::hash::keccak256;
use crate::watermark::{plan, GroupingParams, WatermarkParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractRecord {
    /// Keccak-256 of the runtime.
    pub id: [u8; 32],
    /// File stem the runtime was first seen under.
    pub name: String,
    pub runtime: Vec<u8>,
    pub creation: Option<Vec<u8>>,
    pub address: Option<[u8; 20]>,
    /// Distinct raw byte strings of the prepared graph's blocks.
    pub blocks: BTreeSet<Vec<u8>>,
}

impl ContractRecord {
    pub fn new(name: impl Into<String>, runtime: Vec<u8>, creation: Option<Vec<u8>>) -> Result<Self> {
        let blocks = prepare(&runtime)?.blocks.into_iter().map(|b| b.raw_bytes).collect();
        Ok(ContractRecord {
            id: keccak256(&runtime),
            name: name.into(),
            runtime,
            creation,
            address: None,
            blocks,
        })
    }

    pub fn id_hex(&self) -> String {
        hex::encode(self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IngestError {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContractSet {
    /// Sorted by id, one record per distinct runtime.
    pub records: Vec<ContractRecord>,
    pub errors: Vec<IngestError>,
}

impl ContractSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Splits `X.creation.hex` into ("X", Some(true)), `X.runtime.bin` into
/// ("X", Some(false)) and anything else into (stem, None).
fn classify(path: &Path) -> (String, Option<bool>) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    match stem.rsplit_once('.') {
        Some((base, "creation")) => (base.to_string(), Some(true)),
        Some((base, "runtime")) => (base.to_string(), Some(false)),
        _ => (stem.to_string(), None),
    }
}

fn list_files(paths: &[PathBuf], errors: &mut Vec<IngestError>) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            match std::fs::read_dir(p) {
                Ok(entries) => {
                    let mut inner: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
                    inner.sort();
                    files.extend(list_files(&inner, errors));
                }
                Err(e) => errors.push(IngestError {
                    path: p.clone(),
                    message: e.to_string(),
                }),
            }
        } else if p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| !n.starts_with('.'))
        {
            files.push(p.clone());
        }
    }
    files
}

/// Reads files and directories (recursively) of hex or raw bytecode. Files
/// named `X.creation.*` attach to `X.runtime.*` in the same directory.
/// Unreadable or unparsable files are reported, not fatal.
pub fn ingest(paths: &[PathBuf]) -> ContractSet {
    let mut errors = Vec::new();
    let files = list_files(paths, &mut errors);

    let mut runtimes: Vec<(PathBuf, String, Vec<u8>)> = Vec::new();
    let mut creations: HashMap<(PathBuf, String), Vec<u8>> = HashMap::new();
    for f in files {
        let bytes = match read_bytecode(&f) {
            Ok(b) => b,
            Err(e) => {
                errors.push(IngestError {
                    path: f,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let dir = f.parent().map(Path::to_path_buf).unwrap_or_default();
        let (name, is_creation) = classify(&f);
        if is_creation == Some(true) {
            creations.insert((dir, name), bytes);
        } else {
            runtimes.push((dir, name, bytes));
        }
    }

    let built: Vec<std::result::Result<ContractRecord, IngestError>> = runtimes
        .into_par_iter()
        .map(|(dir, name, runtime)| {
            let creation = creations.get(&(dir.clone(), name.clone())).cloned();
            ContractRecord::new(name.clone(), runtime, creation).map_err(|e| IngestError {
                path: dir.join(&name),
                message: e.to_string(),
            })
        })
        .collect();

    let mut by_id: BTreeMap<[u8; 32], ContractRecord> = BTreeMap::new();
    for rec in built {
        match rec {
            Ok(r) => {
                by_id.entry(r.id).or_insert(r);
            }
            Err(e) => errors.push(e),
        }
    }
    ContractSet {
        records: by_id.into_values().collect(),
        errors,
    }
}

/// max(|a ∩ b| / |a|, |a ∩ b| / |b|); 0 when either set is empty.
pub fn similarity<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let common = a.intersection(b).count() as f64;
    (common / a.len() as f64).max(common / b.len() as f64)
}

/// Pairwise 1 - similarity.
pub fn distance_matrix(records: &[ContractRecord]) -> Vec<Vec<f64>> {
    (0..records.len())
        .into_par_iter()
        .map(|i| {
            (0..records.len())
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        1.0 - similarity(&records[i].blocks, &records[j].blocks)
                    }
                })
                .collect()
        })
        .collect()
}

/// DBSCAN over a precomputed distance matrix. Neighbourhoods include the
/// point itself and use `distance <= eps`. Returns a cluster label per point,
/// `None` for noise. Points are visited in index order.
pub fn dbscan(dist: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = dist.len();
    let neighbours = |i: usize| -> Vec<usize> { (0..n).filter(|&j| dist[i][j] <= eps).collect() };
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for p in 0..n {
        if visited[p] {
            continue;
        }
        visited[p] = true;
        let seeds = neighbours(p);
        if seeds.len() < min_pts {
            continue;
        }
        let c = next;
        next += 1;
        label[p] = Some(c);
        let mut queue: Vec<usize> = seeds;
        let mut k = 0;
        while k < queue.len() {
            let q = queue[k];
            k += 1;
            if label[q].is_none() {
                label[q] = Some(c);
            }
            if visited[q] {
                continue;
            }
            visited[q] = true;
            let more = neighbours(q);
            if more.len() >= min_pts {
                queue.extend(more);
            }
        }
    }
    label
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    /// Cluster index per record of the set.
    pub labels: Vec<usize>,
    /// Member record indices per cluster, ascending; noise points are singletons.
    pub clusters: Vec<Vec<usize>>,
}

impl Clustering {
    /// Lowest-id member of each cluster (records are sorted by id).
    pub fn representatives(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c[0]).collect()
    }

    pub fn is_representative(&self, i: usize) -> bool {
        self.clusters[self.labels[i]][0] == i
    }
}

pub const DEFAULT_EPS: f64 = 0.3;
pub const DEFAULT_MIN_PTS: usize = 2;

pub fn cluster(set: &ContractSet, eps: f64, min_pts: usize) -> Clustering {
    let raw = dbscan(&distance_matrix(&set.records), eps, min_pts);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(raw.len());
    for (i, l) in raw.iter().enumerate() {
        let c = match l {
            Some(l) => *remap.entry(*l).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            }),
            None => {
                clusters.push(Vec::new());
                clusters.len() - 1
            }
        };
        clusters[c].push(i);
        labels.push(c);
    }
    Clustering { labels, clusters }
}

pub fn write_clusters_csv<W: std::io::Write>(set: &ContractSet, c: &Clustering, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "name", "cluster", "representative"])?;
    for (i, r) in set.records.iter().enumerate() {
        w.write_record([
            r.id_hex(),
            r.name.clone(),
            c.labels[i].to_string(),
            c.is_representative(i).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessRow {
    #[serde(rename = "L")]
    pub length: usize,
    #[serde(rename = "N")]
    pub count: usize,
    pub watermark_size: usize,
    pub contracts: usize,
    /// Contracts that admit L x N electable blocks.
    pub watermarkable: usize,
    /// Watermarkable contracts whose concatenated value occurs once.
    pub unique: usize,
    /// unique / watermarkable; 0 when nothing is watermarkable.
    pub ratio: f64,
}

/// Per-contract RNG derived from the root seed and the runtime id, so results
/// do not depend on corpus order.
pub fn contract_rng(seed: u64, id: &[u8; 32]) -> ChaCha20Rng {
    let mut material = seed.to_le_bytes().to_vec();
    material.extend_from_slice(id);
    ChaCha20Rng::from_seed(keccak256(&material))
}

pub fn uniqueness_stats(
    records: &[ContractRecord],
    w: &WatermarkParams,
    g: &GroupingParams,
    seed: u64,
) -> Result<UniquenessRow> {
    g.validate()?;
    let values: Vec<Option<Vec<u8>>> = records
        .par_iter()
        .map(|r| {
            let mut rng = contract_rng(seed, &r.id);
            plan(&r.runtime, g, w, &mut rng)
                .ok()
                .map(|p| p.placements.iter().flat_map(|pl| pl.value.iter().copied()).collect())
        })
        .collect();
    let mut counts: HashMap<&[u8], usize> = HashMap::new();
    for v in values.iter().flatten() {
        *counts.entry(v).or_default() += 1;
    }
    let watermarkable = values.iter().flatten().count();
    let unique = values.iter().flatten().filter(|v| counts[v.as_slice()] == 1).count();
    Ok(UniquenessRow {
        length: w.length,
        count: w.count,
        watermark_size: w.blocks_needed(),
        contracts: records.len(),
        watermarkable,
        unique,
        ratio: if watermarkable == 0 {
            0.0
        } else {
            unique as f64 / watermarkable as f64
        },
    })
}

pub fn write_uniqueness_csv<W: std::io::Write>(rows: &[UniquenessRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
