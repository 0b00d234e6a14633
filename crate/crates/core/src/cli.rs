//! The `evmark` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::analysis::{
    cdf_report, contract_gas_total, count_candidate_blocks, simulate_distortion, AttackModel, Budget, ContractStats,
    Grid, SimulationConfig, Targeting,
};
use crate::cfg::prepare;
use crate::corpus::{cluster, ingest, uniqueness_stats, write_clusters_csv, write_uniqueness_csv};
use crate::evm::{disassemble, parse_hex, read_bytecode};
use crate::watermark::{embed, verify, GroupingParams, MacSource, WatermarkParams};
use crate::wro::{self, Wro, WroMac};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InsufficientBlocks { .. } | Error::NoZone | Error::NoGroups => EXIT_CAPACITY,
        Error::MacMismatch { .. } | Error::ToolMismatch(_) => EXIT_VERIFY,
        Error::InvalidParams(_) => EXIT_USAGE,
        _ => EXIT_INPUT,
    }
}

#[derive(Parser, Debug)]
#[command(name = "evmark", version, about = "Zero-overhead watermarks for EVM bytecode")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List instructions with offsets and static gas
    Disasm {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Export the prepared control-flow graph
    Cfg {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Elect a watermark and append the WRO MAC to the creation bytecode
    Embed {
        #[arg(long)]
        runtime: PathBuf,
        #[arg(long)]
        creation: PathBuf,
        /// Contract address as 40 hex digits
        #[arg(long)]
        address: Option<String>,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[command(flatten)]
        watermark: WatermarkArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// WRO encoding
        #[arg(long, value_enum, default_value_t = Format::Binary)]
        format: Format,
        /// Output prefix; writes PREFIX.wro and PREFIX.creation.hex
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a suspect runtime against a WRO
    Verify {
        #[arg(long)]
        runtime: PathBuf,
        #[arg(long)]
        wro: PathBuf,
        #[arg(long, conflicts_with = "mac", required_unless_present = "mac")]
        creation: Option<PathBuf>,
        /// Published MAC as 64 hex digits
        #[arg(long)]
        mac: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Attack probabilities for one runtime or a corpus directory
    Analyze {
        /// Runtime file or directory of contracts
        input: PathBuf,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10u64, 15, 20])]
        length: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u32, 3, 5, 7])]
        count: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1f64, 0.2, 0.3])]
        alpha: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo distortion attack against an embedded watermark
    Attack {
        #[arg(long)]
        runtime: PathBuf,
        #[arg(long)]
        wro: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the per-trial log as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster a corpus and report watermark uniqueness
    Cluster {
        dir: PathBuf,
        #[arg(long, default_value_t = crate::corpus::DEFAULT_EPS)]
        eps: f64,
        #[arg(long = "min-pts", default_value_t = crate::corpus::DEFAULT_MIN_PTS)]
        min_pts: usize,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10usize, 15, 20])]
        length: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 3, 5, 7])]
        count: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for clusters.csv and uniqueness.csv
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct GroupingArgs {
    /// Gas threshold of an opcode group
    #[arg(long = "T", default_value_t = 9)]
    t: u32,
    /// Start-position step
    #[arg(long = "W", default_value_t = 1)]
    w: usize,
    /// Maximum opcodes per group
    #[arg(long = "G", default_value_t = 5)]
    g: usize,
    /// Fraction of groups elected
    #[arg(long = "R", default_value_t = 0.2)]
    r: f64,
}

impl GroupingArgs {
    fn params(self) -> Result<GroupingParams> {
        GroupingParams::new(self.t, self.w, self.g, self.r)
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct WatermarkArgs {
    /// Watermark length in bytes (L)
    #[arg(long, default_value_t = 15)]
    length: usize,
    /// Number of watermarks (N)
    #[arg(long, default_value_t = 3)]
    count: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Json,
    Csv,
    Binary,
    Dot,
}

fn unsupported(cmd: &str, f: Format) -> Error {
    Error::InvalidParams(format!("{cmd} does not support --format {f:?}").to_lowercase())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Disasm { input, format } => {
            let seq = disassemble(&read_bytecode(&input)?)?;
            let text = match format {
                Format::Text => {
                    let mut s = String::new();
                    for ins in &seq.instructions {
                        s.push_str(&format!("{:04x} {}", ins.offset, ins.opcode));
                        if !ins.operand.is_empty() {
                            s.push_str(&format!(" 0x{}", hex::encode(&ins.operand)));
                        }
                        if ins.is_truncated() {
                            s.push_str(" (truncated)");
                        }
                        s.push_str(&format!(" gas={}\n", ins.static_gas));
                    }
                    s
                }
                Format::Json => {
                    let items: Vec<_> = seq
                        .instructions
                        .iter()
                        .map(|i| {
                            json!({
                                "offset": i.offset,
                                "opcode": i.opcode.to_string(),
                                "operand": hex::encode(&i.operand),
                                "truncated": i.is_truncated(),
                                "gas": i.static_gas,
                            })
                        })
                        .collect();
                    serde_json::to_string_pretty(&items)? + "\n"
                }
                f => return Err(unsupported("disasm", f)),
            };
            emit(out, &text)?;
        }
        Command::Cfg {
            input,
            format,
            out: path,
        } => {
            let cfg = prepare(&read_bytecode(&input)?)?;
            let text = match format {
                Format::Dot => cfg.to_dot(),
                Format::Json => serde_json::to_string_pretty(&cfg.to_json())? + "\n",
                f => return Err(unsupported("cfg", f)),
            };
            match path {
                Some(p) => write_file(&p, text.as_bytes())?,
                None => emit(out, &text)?,
            }
        }
        Command::Embed {
            runtime,
            creation,
            address,
            grouping,
            watermark,
            seed,
            format,
            out: prefix,
        } => {
            let g = grouping.params()?;
            let w = WatermarkParams::new(watermark.length, watermark.count)?;
            let address: [u8; 20] = match address {
                Some(a) => parse_hex(a.as_bytes())?
                    .try_into()
                    .map_err(|_| Error::InvalidParams("address must be 20 bytes".into()))?,
                None => [0; 20],
            };
            let seed = seed_or_random(seed);
            let code = read_bytecode(&runtime)?;
            let init = read_bytecode(&creation)?;
            let e = embed(&code, &init, &g, &w, address, &mut ChaCha20Rng::seed_from_u64(seed))?;

            let prefix = prefix.unwrap_or_else(|| runtime.with_extension(""));
            let (wro_path, wro_bytes) = match format {
                Format::Binary => (prefix.with_extension("wro"), e.wro.serialize()?),
                Format::Json => (
                    prefix.with_extension("wro.json"),
                    (e.wro.to_json()? + "\n").into_bytes(),
                ),
                f => return Err(unsupported("embed", f)),
            };
            let creation_path = prefix.with_extension("creation.hex");
            write_file(&wro_path, &wro_bytes)?;
            write_file(&creation_path, (hex::encode(&e.creation) + "\n").as_bytes())?;

            let p = &e.plan;
            emit(
                out,
                &format!(
                    "seed: {seed}\nwatermarks: {} x {} bytes\nblocks used: {} of {} eligible\n\
                     elected groups: {} of {}\nmac: {}\nwro: {}\ncreation: {}\n",
                    w.count,
                    w.length,
                    p.blocks_used(),
                    p.eligible,
                    p.election.elected.len(),
                    p.groups.len(),
                    e.mac,
                    wro_path.display(),
                    creation_path.display(),
                ),
            )?;
        }
        Command::Verify {
            runtime,
            wro,
            creation,
            mac,
            format,
        } => {
            let code = read_bytecode(&runtime)?;
            let init;
            let source = match (creation, mac) {
                (Some(c), _) => {
                    init = read_bytecode(&c)?;
                    MacSource::Creation(&init)
                }
                (None, Some(m)) => MacSource::Mac(WroMac::from_hex(&m)?),
                (None, None) => return Err(Error::InvalidParams("need --creation or --mac".into())),
            };
            let bytes = std::fs::read(&wro).map_err(|e| Error::io(&wro, e))?;
            let wro = if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
                Wro::read(&wro)?
            } else {
                let expected = match source {
                    MacSource::Creation(c) => wro::extract_mac(c)?,
                    MacSource::Mac(m) => m,
                };
                wro::deserialize_authenticated(&bytes, &expected)?
            };
            let report = verify(&code, source, &wro)?;
            let text = match format {
                Format::Text => {
                    let mut s = format!("mac: ok {}\n", report.mac);
                    for w in &report.watermarks {
                        let hits = w.rows.iter().filter(|&&r| r).count();
                        let verdict = if w.passed { "pass" } else { "FAIL" };
                        s.push_str(&format!(
                            "watermark {}: {verdict} ({hits}/{} bytes) {}\n",
                            w.index,
                            w.rows.len(),
                            hex::encode(&w.value)
                        ));
                    }
                    s.push_str(&format!("{}/{} verified\n", report.passed(), report.total()));
                    s
                }
                Format::Json => {
                    let mut v = serde_json::to_value(&report)?;
                    v["passed"] = json!(report.passed());
                    v["success"] = json!(report.success());
                    serde_json::to_string_pretty(&v)? + "\n"
                }
                f => return Err(unsupported("verify", f)),
            };
            emit(out, &text)?;
            return Ok(if report.success() { EXIT_OK } else { EXIT_VERIFY });
        }
        Command::Analyze {
            input,
            grouping,
            length,
            count,
            alpha,
            format,
            out: path,
        } => {
            let g = grouping.params()?;
            let stats = if input.is_dir() {
                let set = ingest(&[input]);
                set.records
                    .par_iter()
                    .map(|r| stats_for(&r.id_hex(), &r.runtime, &g))
                    .collect::<Result<Vec<_>>>()?
            } else {
                let code = read_bytecode(&input)?;
                let id = hex::encode(crate::hash::keccak256(&code));
                vec![stats_for(&id, &code, &g)?]
            };
            let grid = Grid {
                lengths: length,
                counts: count,
                alphas: alpha,
                threshold: g.gas_threshold,
            };
            let report = cdf_report(&stats, &grid)?;
            let mut buf = Vec::new();
            match format {
                Format::Csv => report.write_csv(&mut buf)?,
                Format::Json => buf = (report.to_json()? + "\n").into_bytes(),
                Format::Text => {
                    let mut s = format!("contracts: {} (excluded {})\n", stats.len(), report.excluded.len());
                    s.push_str(&format!("{}\n", report.interpolation));
                    for series in &report.series {
                        s.push_str(&format!(
                            "L={} N={} alpha={}: median p_attack {:.6}, max {:.6}\n",
                            series.l,
                            series.n,
                            series.alpha,
                            series.quantile(0.5),
                            series.quantile(1.0)
                        ));
                    }
                    buf = s.into_bytes();
                }
                f => return Err(unsupported("analyze", f)),
            }
            match path {
                Some(p) => write_file(&p, &buf)?,
                None => out.write_all(&buf).map_err(|e| Error::io("<stdout>", e))?,
            }
        }
        Command::Attack {
            runtime,
            wro,
            alpha,
            trials,
            grouping,
            seed,
            format,
            out: path,
        } => {
            let g = grouping.params()?;
            let seed = seed_or_random(seed);
            let code = read_bytecode(&runtime)?;
            let wro = Wro::read(&wro)?;
            let config = SimulationConfig {
                budget: Budget::Alpha(alpha),
                trials,
                targeting: Targeting::Uniform,
                seed,
                grouping: g,
            };
            let result = simulate_distortion(&code, &wro, &config)?;
            let length = wro.watermarks[0].length as u64;
            let model = AttackModel::for_runtime(&code, &g, length, wro.num_watermarks() as u32, alpha)?;
            let analytical = model.p_attack_n().ok();
            if let Some(p) = &path {
                write_file(p, (serde_json::to_string_pretty(&result.log)? + "\n").as_bytes())?;
            }
            let text = match format {
                Format::Text => format!(
                    "seed: {seed}\ntrials: {}\ngroups per trial: {} over {} blocks\n\
                     empirical: {:.6} (95% CI {:.6}..{:.6})\nanalytical: {}\n",
                    result.trials,
                    result.groups_per_trial,
                    result.target_blocks,
                    result.rate,
                    result.ci_low,
                    result.ci_high,
                    analytical.map_or("undefined".to_string(), |p| format!("{p:.6}")),
                ),
                Format::Json => {
                    let v = json!({
                        "seed": seed,
                        "trials": result.trials,
                        "successes": result.successes,
                        "rate": result.rate,
                        "std_error": result.std_error,
                        "ci_low": result.ci_low,
                        "ci_high": result.ci_high,
                        "groups_per_trial": result.groups_per_trial,
                        "target_blocks": result.target_blocks,
                        "model": model,
                        "analytical": analytical,
                    });
                    serde_json::to_string_pretty(&v)? + "\n"
                }
                f => return Err(unsupported("attack", f)),
            };
            emit(out, &text)?;
        }
        Command::Cluster {
            dir,
            eps,
            min_pts,
            grouping,
            length,
            count,
            seed,
            out: out_dir,
        } => {
            let g = grouping.params()?;
            let seed = seed_or_random(seed);
            let set = ingest(&[dir]);
            let clustering = cluster(&set, eps, min_pts);
            let reps: Vec<_> = clustering
                .representatives()
                .into_iter()
                .map(|i| set.records[i].clone())
                .collect();
            let mut rows = Vec::new();
            for &l in &length {
                for &n in &count {
                    rows.push(uniqueness_stats(&reps, &WatermarkParams::new(l, n)?, &g, seed)?);
                }
            }
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let clusters_path = out_dir.join("clusters.csv");
            let uniq_path = out_dir.join("uniqueness.csv");
            let mut buf = Vec::new();
            write_clusters_csv(&set, &clustering, &mut buf)?;
            write_file(&clusters_path, &buf)?;
            let mut buf = Vec::new();
            write_uniqueness_csv(&rows, &mut buf)?;
            write_file(&uniq_path, &buf)?;

            let mut s = format!(
                "seed: {seed}\ncontracts: {}\nskipped files: {}\nclusters: {}\n",
                set.len(),
                set.errors.len(),
                clustering.clusters.len()
            );
            for r in &rows {
                s.push_str(&format!(
                    "L={} N={}: {} unique of {} watermarkable ({:.3}%)\n",
                    r.length,
                    r.count,
                    r.unique,
                    r.watermarkable,
                    100.0 * r.ratio
                ));
            }
            s.push_str(&format!(
                "wrote {} and {}\n",
                clusters_path.display(),
                uniq_path.display()
            ));
            emit(out, &s)?;
        }
    }
    Ok(EXIT_OK)
}

fn stats_for(id: &str, runtime: &[u8], g: &GroupingParams) -> Result<ContractStats> {
    let (b, c) = count_candidate_blocks(&prepare(runtime)?, g);
    Ok(ContractStats {
        contract_id: id.to_string(),
        b: b as u64,
        c: c as u64,
        psi: contract_gas_total(runtime)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("evmark").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_args(&[]).0, EXIT_USAGE);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn disasm_listing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.hex");
        std::fs::write(&p, "6001").unwrap();
        let (code, out, _) = run_args(&["disasm", p.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(out, "0000 PUSH1 0x01 gas=3\n");

        std::fs::write(&p, "").unwrap();
        assert_eq!(run_args(&["disasm", p.to_str().unwrap()]).0, EXIT_INPUT);
        assert_eq!(run_args(&["disasm", "/nonexistent/x.hex"]).0, EXIT_INPUT);
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::NoZone), EXIT_CAPACITY);
        assert_eq!(
            exit_code(&Error::InsufficientBlocks {
                needed: 2,
                available: 1
            }),
            EXIT_CAPACITY
        );
        assert_eq!(
            exit_code(&Error::MacMismatch {
                computed: String::new(),
                embedded: String::new()
            }),
            EXIT_VERIFY
        );
        assert_eq!(exit_code(&Error::EmptyInput), EXIT_INPUT);
        assert_eq!(exit_code(&Error::InvalidParams(String::new())), EXIT_USAGE);
    }
}
