//! Batch experiment front end. Every command writes its machine-readable
//! RunRecord JSON first (atomically), then prints a one-line summary.
//! Exit codes: 0 success, 2 correct-but-non-exhaustive, 1 error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use gcround::cli::{
    replay_record, run_lra, run_oracle, run_pinning, run_pqnorm, CmdOutput, LraArgs, LraMode,
    OracleArgs, PinLemma, PinningArgs, PqArgs,
};
use gcround::constants::{calibrate, default_ledger_path, ConstantsLedger, DEFAULT_CORPUS_SEED};
use gcround::numerics::GridSpec;
use gcround::records::RunRecord;

#[derive(Parser)]
#[command(name = "gcround", version, about = "correlation-rounding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Instance file (CSV matrix or JSON), where applicable
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path for the RunRecord JSON
    #[arg(long)]
    output: Option<PathBuf>,
    /// Key-value config file (flag values win over config entries)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Constants-ledger path (env CORR_ROUND_CONSTANTS also works)
    #[arg(long)]
    constants: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_lo: Option<f64>,
    #[arg(long)]
    grid_hi: Option<f64>,
    #[arg(long)]
    grid_fineness: Option<f64>,
    /// Conditioning-set size budget
    #[arg(long)]
    degree: Option<usize>,
    /// Enumeration budget for oracles
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Low-rank approximation runs (additive / ptas1 / ptask)
    Lra {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "additive")]
        mode: String,
        #[arg(long)]
        p: Option<u32>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        bitcap: Option<u32>,
        #[arg(long)]
        sigma_lo: Option<f64>,
        #[arg(long)]
        sigma_hi: Option<f64>,
        #[arg(long)]
        sigma_fineness: Option<f64>,
    },
    /// p->q operator norm approximation
    Pqnorm {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        sigma_fineness: Option<f64>,
    },
    /// Pinning experiments and the counterexample run
    Pinning {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "variance")]
        lemma: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        trunc: Option<f64>,
        #[arg(long)]
        heavy_p: Option<u32>,
    },
    /// Recompute the calibrated-constants ledger
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        corpus_seed: Option<u64>,
    },
    /// Direct access to the exhaustive oracles
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "lra")]
        kind: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Re-run a RunRecord and verify byte-identical payloads
    Replay {
        #[command(flatten)]
        common: CommonArgs,
        /// Record JSON produced by a previous run
        #[arg(long)]
        record: PathBuf,
    },
}

/// flags > config file > defaults
struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    fn load(path: &Option<PathBuf>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                if let Some((k, v)) = line.split_once('=') {
                    map.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        Ok(Self { map })
    }

    fn f64(&self, key: &str, flag: Option<f64>, default: f64) -> f64 {
        flag.or_else(|| self.map.get(key).and_then(|v| v.parse().ok())).unwrap_or(default)
    }

    fn f64_opt(&self, key: &str, flag: Option<f64>) -> Option<f64> {
        flag.or_else(|| self.map.get(key).and_then(|v| v.parse().ok()))
    }

    fn u64(&self, key: &str, flag: Option<u64>, default: u64) -> u64 {
        flag.or_else(|| self.map.get(key).and_then(|v| v.parse().ok())).unwrap_or(default)
    }

    fn u64_opt(&self, key: &str, flag: Option<u64>) -> Option<u64> {
        flag.or_else(|| self.map.get(key).and_then(|v| v.parse().ok()))
    }

    fn usize_opt(&self, key: &str, flag: Option<usize>) -> Option<usize> {
        flag.or_else(|| self.map.get(key).and_then(|v| v.parse().ok()))
    }
}

fn read_input(common: &CommonArgs) -> Result<Vec<u8>> {
    let path = common
        .input
        .as_ref()
        .ok_or_else(|| anyhow!("--input is required for this command"))?;
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_ledger(common: &CommonArgs) -> ConstantsLedger {
    let path = common.constants.clone().unwrap_or_else(default_ledger_path);
    ConstantsLedger::load(&path).unwrap_or_default()
}

fn grid_from(common: &CommonArgs, cfg: &Config) -> Option<GridSpec> {
    let lo = cfg.f64_opt("grid_lo", common.grid_lo);
    let hi = cfg.f64_opt("grid_hi", common.grid_hi);
    let f = cfg.f64_opt("grid_fineness", common.grid_fineness);
    match (lo, hi, f) {
        (Some(lo), Some(hi), Some(f)) => GridSpec::new(lo, hi, f).ok(),
        _ => None,
    }
}

fn emit(common: &CommonArgs, out: CmdOutput) -> Result<ExitCode> {
    let json = out.record.to_json_pretty();
    if let Some(path) = &common.output {
        gcround::io::write_atomic(path, json.as_bytes())?;
        for (suffix, bytes) in &out.side_files {
            let side = path.with_extension(suffix);
            gcround::io::write_atomic(&side, bytes)?;
        }
        println!("wrote {}", path.display());
    } else {
        println!("{json}");
    }
    println!("{}", out.summary);
    Ok(ExitCode::from(out.exit_code as u8))
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Lra { common, mode, p, k, eps, bitcap, sigma_lo, sigma_hi, sigma_fineness } => {
            let cfg = Config::load(&common.config)?;
            let ledger = load_ledger(&common);
            let sigma = match (
                cfg.f64_opt("sigma_lo", sigma_lo),
                cfg.f64_opt("sigma_hi", sigma_hi),
                cfg.f64_opt("sigma_fineness", sigma_fineness),
            ) {
                (Some(lo), Some(hi), Some(f)) => GridSpec::new(lo, hi, f).ok(),
                _ => None,
            };
            let args = LraArgs {
                input: read_input(&common)?,
                mode: LraMode::parse(&mode).map_err(|e| anyhow!("{e}"))?,
                p: cfg.u64("p", p.map(u64::from), 4) as u32,
                k: cfg.u64("k", k.map(|v| v as u64), 1) as usize,
                eps: cfg.f64("eps", eps, 0.25),
                bitcap: cfg.u64("bitcap", bitcap.map(u64::from), 8) as u32,
                seed: cfg.u64("seed", common.seed, 1),
                oracle_grid: grid_from(&common, &cfg),
                sigma_grid: sigma,
                max_conditioning: cfg.usize_opt("degree", common.degree),
                budget: cfg.u64_opt("budget", common.budget),
            };
            emit(&common, run_lra(&args, &ledger).map_err(|e| anyhow!("{e}"))?)
        }
        Command::Pqnorm { common, p, q, eps, sigma_fineness } => {
            let cfg = Config::load(&common.config)?;
            let ledger = load_ledger(&common);
            let args = PqArgs {
                input: read_input(&common)?,
                p: cfg.f64("p", p, 4.0 / 3.0),
                q: cfg.u64("q", q.map(u64::from), 4) as u32,
                eps: cfg.f64("eps", eps, 0.3),
                seed: cfg.u64("seed", common.seed, 1),
                sigma_fineness: cfg.f64_opt("sigma_fineness", sigma_fineness),
                max_conditioning: cfg.usize_opt("degree", common.degree),
                budget: cfg.u64_opt("budget", common.budget),
            };
            emit(&common, run_pqnorm(&args, &ledger).map_err(|e| anyhow!("{e}"))?)
        }
        Command::Pinning { common, lemma, n, t, q, m, trunc, heavy_p } => {
            let cfg = Config::load(&common.config)?;
            let ledger = load_ledger(&common);
            let input = match &common.input {
                Some(p) => Some(std::fs::read(p).with_context(|| format!("reading {}", p.display()))?),
                None => None,
            };
            let args = PinningArgs {
                input,
                lemma: PinLemma::parse(&lemma).map_err(|e| anyhow!("{e}"))?,
                n: cfg.u64("n", n.map(|v| v as u64), 8) as usize,
                t: cfg.u64("t", t.map(|v| v as u64), 3) as usize,
                q: cfg.f64("q", q, 4.0 / 3.0),
                m: cfg.u64("m", m.map(|v| v as u64), 9) as usize,
                truncation: cfg.f64("trunc", trunc, 1e6),
                seed: cfg.u64("seed", common.seed, 1),
                heavy_p: cfg.u64("heavy_p", heavy_p.map(u64::from), 3) as u32,
            };
            emit(&common, run_pinning(&args, &ledger).map_err(|e| anyhow!("{e}"))?)
        }
        Command::Calibrate { common, force, corpus_seed } => {
            let path = common.constants.clone().unwrap_or_else(default_ledger_path);
            let seed = corpus_seed.unwrap_or(DEFAULT_CORPUS_SEED);
            let fresh = calibrate(seed);
            if path.exists() {
                let old = ConstantsLedger::load(&path)?;
                let diffs = fresh.diff(&old);
                if diffs.is_empty() {
                    println!("ledger unchanged ({} entries)", fresh.entries.len());
                } else {
                    for d in &diffs {
                        println!("{d}");
                    }
                    if !force {
                        return Err(anyhow!(
                            "constants differ; rerun with --force to overwrite {}",
                            path.display()
                        ));
                    }
                }
                if force || diffs.is_empty() {
                    fresh.save(&path)?;
                }
            } else {
                fresh.save(&path)?;
                println!("ledger written to {} ({} entries)", path.display(), fresh.entries.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { common, kind, p, q, k } => {
            let cfg = Config::load(&common.config)?;
            let ledger = load_ledger(&common);
            let grid = grid_from(&common, &cfg)
                .unwrap_or_else(|| GridSpec::new(-2.0, 2.0, 0.5).expect("default grid"));
            let args = OracleArgs {
                input: read_input(&common)?,
                kind,
                p: cfg.f64("p", p, 4.0),
                q: cfg.f64("q", q, 4.0),
                k: cfg.u64("k", k.map(|v| v as u64), 1) as usize,
                grid,
                budget: cfg.u64("budget", common.budget, 1_000_000_000),
            };
            emit(&common, run_oracle(&args, &ledger).map_err(|e| anyhow!("{e}"))?)
        }
        Command::Replay { common, record } => {
            let ledger = load_ledger(&common);
            let bytes = std::fs::read(&record)
                .with_context(|| format!("reading {}", record.display()))?;
            let rec: RunRecord = serde_json::from_slice(&bytes)?;
            let input = match &common.input {
                Some(p) => Some(std::fs::read(p).with_context(|| format!("reading {}", p.display()))?),
                None => None,
            };
            let payload = replay_record(&rec, input.as_deref(), &ledger).map_err(|e| anyhow!("{e}"))?;
            let fresh = serde_json::to_vec(&payload)?;
            if fresh == rec.payload_bytes() {
                println!("replay ok: payload is byte-identical");
                Ok(ExitCode::SUCCESS)
            } else {
                Err(anyhow!("replayed payload differs from the record"))
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

// keep Path in scope for helper signatures on all platforms
#[allow(unused)]
fn _path_witness(_: &Path) {}
