//! Command implementations behind the binary: instance ingestion, run
//! orchestration, record assembly, and replay. Machine-readable output is
//! always produced before any human-readable summary, and summaries never
//! contain values absent from the JSON.

use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::{json, Value};
use thiserror::Error;

use crate::constants::ConstantsLedger;
use crate::exec::ExecMode;
use crate::io::{self, IoError};
use crate::lra::{self, LraConfig, LraInstance, LraOutcome};
use crate::numerics::{lra_bruteforce, pq_bruteforce, GridSpec};
use crate::pinning::counterexample::{
    counterexample_experiment, default_counterexample_tail,
};
use crate::pinning::procedures::{
    pin_discrete_tv, pin_heavy_tailed, pin_truncation, pin_variance, HeavyBoundParams, PinConfig,
    PinningReport,
};
use crate::pinning::DiscreteJoint;
use crate::pqnorm::{pq_additive, PqConfig, PqInstance};
use crate::records::{digest_bytes, RunRecord, ARTIFACT_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Lra(#[from] lra::LraError),
    #[error("{0}")]
    Pq(#[from] crate::pqnorm::PqError),
    #[error("{0}")]
    Pinning(#[from] crate::pinning::PinningError),
    #[error("{0}")]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
}

/// Result of a command: the record (already serializable), the exit code
/// (0 ok, 2 correct-but-non-exhaustive), extra side files, and the
/// human-readable summary to print last.
pub struct CmdOutput {
    pub record: RunRecord,
    pub exit_code: i32,
    pub summary: String,
    /// (file suffix, bytes) side outputs such as covariance-trace CSVs.
    pub side_files: Vec<(String, Vec<u8>)>,
}

fn grid_params(prefix: &str, g: &Option<GridSpec>, params: &mut BTreeMap<String, Value>) {
    if let Some(g) = g {
        params.insert(format!("{prefix}_lo"), json!(g.lo));
        params.insert(format!("{prefix}_hi"), json!(g.hi));
        params.insert(format!("{prefix}_fineness"), json!(g.fineness));
    }
}

fn grid_from_params(prefix: &str, params: &BTreeMap<String, Value>) -> Option<GridSpec> {
    let lo = params.get(&format!("{prefix}_lo"))?.as_f64()?;
    let hi = params.get(&format!("{prefix}_hi"))?.as_f64()?;
    let fineness = params.get(&format!("{prefix}_fineness"))?.as_f64()?;
    GridSpec::new(lo, hi, fineness).ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LraMode {
    Additive,
    Ptas1,
    PtasK,
}

impl LraMode {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "additive" => Ok(Self::Additive),
            "ptas1" | "rank1" => Ok(Self::Ptas1),
            "ptask" | "rankk" => Ok(Self::PtasK),
            other => Err(CliError::BadArgs(format!("unknown mode '{other}'"))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Additive => "additive",
            Self::Ptas1 => "ptas1",
            Self::PtasK => "ptask",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LraArgs {
    pub input: Vec<u8>,
    pub mode: LraMode,
    pub p: u32,
    pub k: usize,
    pub eps: f64,
    pub bitcap: u32,
    pub seed: u64,
    pub oracle_grid: Option<GridSpec>,
    pub sigma_grid: Option<GridSpec>,
    pub max_conditioning: Option<usize>,
    pub budget: Option<u64>,
}

fn lra_outcome_payload(out: &LraOutcome) -> Value {
    serde_json::to_value(out).expect("outcome serializes")
}

pub fn run_lra(args: &LraArgs, ledger: &ConstantsLedger) -> Result<CmdOutput, CliError> {
    let started = Instant::now();
    let a = io::parse_matrix(&args.input)?;
    let digest = digest_bytes(&args.input);
    let instance = LraInstance::new(a, args.p, args.k, args.eps, args.bitcap)?;
    let mut cfg = LraConfig {
        oracle_grid: args.oracle_grid.clone(),
        sigma_grid: args.sigma_grid.clone(),
        ..LraConfig::default()
    };
    if let Some(c) = args.max_conditioning {
        cfg.max_conditioning = c;
    }
    if let Some(b) = args.budget {
        cfg.oracle_budget = b;
    }
    let out = match args.mode {
        LraMode::Additive => lra::lra_additive(&instance, &cfg, args.seed)?,
        LraMode::Ptas1 => lra::lra_ptas_rank1(&instance, &cfg, args.seed)?,
        LraMode::PtasK => lra::lra_ptas_rank_k(&instance, &cfg, args.seed)?,
    };
    let mut params = BTreeMap::new();
    params.insert("mode".into(), json!(args.mode.name()));
    params.insert("p".into(), json!(args.p));
    params.insert("k".into(), json!(args.k));
    params.insert("eps".into(), json!(args.eps));
    params.insert("bitcap".into(), json!(args.bitcap));
    grid_params("grid", &args.oracle_grid, &mut params);
    grid_params("sigma", &args.sigma_grid, &mut params);
    if let Some(c) = args.max_conditioning {
        params.insert("degree".into(), json!(c));
    }
    if let Some(b) = args.budget {
        params.insert("budget".into(), json!(b));
    }
    params.insert("effective_max_conditioning".into(), json!(cfg.max_conditioning));
    params.insert("effective_oracle_budget".into(), json!(cfg.oracle_budget));
    let gap = out.oracle_value.map(|o| out.value - o);
    let record = RunRecord {
        command: "lra".into(),
        instance_digest: digest,
        parameters: params,
        seed: args.seed,
        payload: lra_outcome_payload(&out),
        objective: Some(out.value),
        oracle_value: out.oracle_value,
        gap,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        artifact_version: ARTIFACT_VERSION.into(),
        constants_digest: ledger.digest(),
        non_exhaustive: out.non_exhaustive,
    };
    let exit_code = if out.non_exhaustive { 2 } else { 0 };
    let summary = format!(
        "lra {}: value {:.6e} (source {}), oracle {:?}, gap {:?}",
        args.mode.name(),
        out.value,
        out.best_source,
        out.oracle_value,
        gap
    );
    Ok(CmdOutput { record, exit_code, summary, side_files: Vec::new() })
}

#[derive(Clone, Debug)]
pub struct PqArgs {
    pub input: Vec<u8>,
    pub p: f64,
    pub q: u32,
    pub eps: f64,
    pub seed: u64,
    pub sigma_fineness: Option<f64>,
    pub max_conditioning: Option<usize>,
    pub budget: Option<u64>,
}

pub fn run_pqnorm(args: &PqArgs, ledger: &ConstantsLedger) -> Result<CmdOutput, CliError> {
    let started = Instant::now();
    let a = io::parse_matrix(&args.input)?;
    let digest = digest_bytes(&args.input);
    let inst = PqInstance::new(a, args.p, args.q, args.eps)?;
    let mut cfg = PqConfig::default();
    if let Some(f) = args.sigma_fineness {
        cfg.sigma_fineness = f;
    }
    if let Some(c) = args.max_conditioning {
        cfg.max_conditioning = c;
    }
    if let Some(b) = args.budget {
        cfg.oracle_budget = b;
    }
    let (witness, outcome) = pq_additive(&inst, &cfg, args.seed)?;
    let mut params = BTreeMap::new();
    params.insert("p".into(), json!(args.p));
    params.insert("q".into(), json!(args.q));
    params.insert("eps".into(), json!(args.eps));
    if let Some(f) = args.sigma_fineness {
        params.insert("sigma_fineness".into(), json!(f));
    }
    if let Some(c) = args.max_conditioning {
        params.insert("degree".into(), json!(c));
    }
    if let Some(b) = args.budget {
        params.insert("budget".into(), json!(b));
    }
    let record = RunRecord {
        command: "pqnorm".into(),
        instance_digest: digest,
        parameters: params,
        seed: args.seed,
        payload: serde_json::to_value(&outcome).expect("outcome serializes"),
        objective: Some(witness.lower_bound_qth),
        oracle_value: None,
        gap: Some(witness.gap),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        artifact_version: ARTIFACT_VERSION.into(),
        constants_digest: ledger.digest(),
        non_exhaustive: outcome.non_exhaustive,
    };
    let exit_code = if outcome.non_exhaustive { 2 } else { 0 };
    let summary = format!(
        "pqnorm: lower bound {:.6e}, holder {:.6e}, gap {:.6e} ({} conditioning sets)",
        witness.lower_bound_qth, witness.holder_upper_qth, witness.gap, outcome.conditioning_sets_tried
    );
    Ok(CmdOutput { record, exit_code, summary, side_files: Vec::new() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PinLemma {
    Variance,
    Heavy,
    Truncation,
    DiscreteTv,
    Counterexample,
}

impl PinLemma {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "variance" => Ok(Self::Variance),
            "heavy" | "heavy-tailed" => Ok(Self::Heavy),
            "truncation" => Ok(Self::Truncation),
            "discrete-tv" | "tv" => Ok(Self::DiscreteTv),
            "counterexample" | "dream" => Ok(Self::Counterexample),
            other => Err(CliError::BadArgs(format!("unknown lemma '{other}'"))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Variance => "variance",
            Self::Heavy => "heavy",
            Self::Truncation => "truncation",
            Self::DiscreteTv => "discrete-tv",
            Self::Counterexample => "counterexample",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PinningArgs {
    /// Joint JSON; a built-in seeded joint is generated when absent.
    pub input: Option<Vec<u8>>,
    pub lemma: PinLemma,
    pub n: usize,
    pub t: usize,
    pub q: f64,
    pub m: usize,
    pub truncation: f64,
    pub seed: u64,
    pub heavy_p: u32,
}

impl Default for PinningArgs {
    fn default() -> Self {
        Self {
            input: None,
            lemma: PinLemma::Variance,
            n: 8,
            t: 3,
            q: 4.0 / 3.0,
            m: 9,
            truncation: 1e6,
            seed: 1,
            heavy_p: 3,
        }
    }
}

/// Built-in joints per lemma when no input file is supplied.
pub fn builtin_joint(lemma: PinLemma, n: usize, trunc: f64, seed: u64) -> Result<DiscreteJoint, CliError> {
    match lemma {
        PinLemma::Variance => Ok(crate::constants::random_multi_joint(seed, n.min(10), 48)),
        PinLemma::DiscreteTv => {
            let j = crate::constants::random_multi_joint(seed, n.min(8), 32);
            // snap to a half-integer alphabet so entropies stay small
            let support = j
                .support
                .iter()
                .map(|(x, p)| (x.iter().map(|v| (v * 2.0).round() / 2.0).collect(), *p))
                .collect();
            Ok(DiscreteJoint::new(j.n, support)?)
        }
        PinLemma::Heavy | PinLemma::Truncation => Ok(
            crate::pinning::counterexample::heavy_pair_corpus_joint(seed, n.max(4), 5, trunc)?,
        ),
        PinLemma::Counterexample => Err(CliError::BadArgs(
            "the counterexample experiment runs in closed form; no joint input".into(),
        )),
    }
}

fn trace_csv(report: &PinningReport) -> Vec<u8> {
    let mut s = String::from("s,avg_abs_cov,stderr,avg_abs_cov_offdiag\n");
    for i in 0..report.avg_abs_cov.len() {
        s.push_str(&format!(
            "{},{},{},{}\n",
            i, report.avg_abs_cov[i], report.stderr[i], report.avg_abs_cov_offdiag[i]
        ));
    }
    s.into_bytes()
}

pub fn run_pinning(args: &PinningArgs, ledger: &ConstantsLedger) -> Result<CmdOutput, CliError> {
    let started = Instant::now();
    let cfg = PinConfig::default();
    let mut params = BTreeMap::new();
    params.insert("lemma".into(), json!(args.lemma.name()));
    params.insert("n".into(), json!(args.n));
    params.insert("t".into(), json!(args.t));
    params.insert("q".into(), json!(args.q));
    params.insert("m".into(), json!(args.m));
    params.insert("trunc".into(), json!(args.truncation));
    params.insert("heavy_p".into(), json!(args.heavy_p));

    if args.lemma == PinLemma::Counterexample {
        let report = counterexample_experiment(
            args.n.max(4),
            args.heavy_p,
            &default_counterexample_tail(),
            args.truncation,
            0.1,
        )?;
        let payload = serde_json::to_value(&report).expect("report serializes");
        let summary = format!(
            "counterexample: lhs {:.3e}, dream rhs {:.3e} (ratio {:.1}), pairwise rhs {:.3e} (lhs/rhs {:.3e})",
            report.lhs_post_pinning,
            report.dream_rhs,
            report.ratio_dream,
            report.heavy_rhs,
            report.ratio_heavy
        );
        let record = RunRecord {
            command: "pinning".into(),
            instance_digest: "closed-form".into(),
            parameters: params,
            seed: args.seed,
            payload,
            objective: Some(report.lhs_post_pinning),
            oracle_value: None,
            gap: None,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            artifact_version: ARTIFACT_VERSION.into(),
            constants_digest: ledger.digest(),
            non_exhaustive: false,
        };
        return Ok(CmdOutput { record, exit_code: 0, summary, side_files: Vec::new() });
    }

    let joint = match &args.input {
        Some(bytes) => io::parse_joint(bytes)?,
        None => builtin_joint(args.lemma, args.n, args.truncation, args.seed)?,
    };
    let digest = match &args.input {
        Some(bytes) => digest_bytes(bytes),
        None => digest_bytes(format!("builtin:{}:{}:{}", args.lemma.name(), args.n, args.seed).as_bytes()),
    };
    let report = match args.lemma {
        PinLemma::Variance => pin_variance(
            &joint,
            args.t,
            None,
            args.seed,
            &cfg,
            ledger.get_or("pin_variance_c", 1.5),
        )?,
        PinLemma::Heavy => pin_heavy_tailed(
            &joint,
            args.heavy_p,
            args.t,
            args.seed,
            &cfg,
            HeavyBoundParams {
                exponent: ledger.get_or("heavy_tail_exponent", 0.5),
                c_const: ledger.get_or("heavy_tail_c", 1.5),
            },
        )?,
        PinLemma::Truncation => pin_truncation(&joint, args.q, args.m, args.seed, &cfg, 400)?,
        PinLemma::DiscreteTv => pin_discrete_tv(&joint, args.t, args.seed, &cfg)?,
        PinLemma::Counterexample => unreachable!(),
    };
    let side_files = vec![("trace.csv".to_string(), trace_csv(&report))];
    let summary = format!(
        "pinning {}: best s = {}, value {:.6e}, bound rhs {:.6e}, holds = {}",
        args.lemma.name(),
        report.best_s,
        report.best_value,
        report.bound.rhs,
        report.bound.holds
    );
    let holds = report.bound.holds;
    let record = RunRecord {
        command: "pinning".into(),
        instance_digest: digest,
        parameters: params,
        seed: args.seed,
        payload: serde_json::to_value(&report).expect("report serializes"),
        objective: Some(report.best_value),
        oracle_value: None,
        gap: None,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        artifact_version: ARTIFACT_VERSION.into(),
        constants_digest: ledger.digest(),
        non_exhaustive: !holds,
    };
    Ok(CmdOutput { record, exit_code: if holds { 0 } else { 2 }, summary, side_files })
}

#[derive(Clone, Debug)]
pub struct OracleArgs {
    pub input: Vec<u8>,
    pub kind: String, // "lra" or "pq"
    pub p: f64,
    pub q: f64,
    pub k: usize,
    pub grid: GridSpec,
    pub budget: u64,
}

pub fn run_oracle(args: &OracleArgs, ledger: &ConstantsLedger) -> Result<CmdOutput, CliError> {
    let started = Instant::now();
    let a = io::parse_matrix(&args.input)?;
    let digest = digest_bytes(&args.input);
    let mut params = BTreeMap::new();
    params.insert("kind".into(), json!(args.kind));
    params.insert("p".into(), json!(args.p));
    params.insert("q".into(), json!(args.q));
    params.insert("k".into(), json!(args.k));
    params.insert("budget".into(), json!(args.budget));
    grid_params("grid", &Some(args.grid.clone()), &mut params);
    let (payload, objective, non_exhaustive, summary) = match args.kind.as_str() {
        "lra" => {
            let res = lra_bruteforce(&a, args.p as u32, args.k, &args.grid, args.budget, ExecMode::Parallel)?;
            let s = format!(
                "oracle lra: opt {:.6e}, exhaustive {} ({} evaluations)",
                res.opt_value, res.exhaustive, res.evaluations
            );
            (serde_json::to_value(&res).expect("serializes"), res.opt_value, !res.exhaustive, s)
        }
        "pq" => {
            let res = pq_bruteforce(&a, args.p, args.q, &args.grid, args.budget, ExecMode::Parallel)?;
            let s = format!(
                "oracle pq: value {:.6e}, exhaustive {} ({} evaluations)",
                res.value, res.exhaustive, res.evaluations
            );
            (serde_json::to_value(&res).expect("serializes"), res.value, !res.exhaustive, s)
        }
        other => return Err(CliError::BadArgs(format!("unknown oracle kind '{other}'"))),
    };
    let record = RunRecord {
        command: "oracle".into(),
        instance_digest: digest,
        parameters: params,
        seed: 0,
        payload,
        objective: Some(objective),
        oracle_value: Some(objective),
        gap: Some(0.0),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        artifact_version: ARTIFACT_VERSION.into(),
        constants_digest: ledger.digest(),
        non_exhaustive,
    };
    Ok(CmdOutput {
        record,
        exit_code: if non_exhaustive { 2 } else { 0 },
        summary,
        side_files: Vec::new(),
    })
}

/// Re-run the command a record describes (with the recorded parameters and
/// seed) and return the freshly computed payload. `input` must be supplied
/// for commands that read an instance file and must match the recorded
/// digest.
pub fn replay_record(
    record: &RunRecord,
    input: Option<&[u8]>,
    ledger: &ConstantsLedger,
) -> Result<Value, CliError> {
    let p = &record.parameters;
    let need_input = |bytes: Option<&[u8]>| -> Result<Vec<u8>, CliError> {
        let b = bytes.ok_or_else(|| CliError::Replay("record requires the original input file".into()))?;
        let d = digest_bytes(b);
        if d != record.instance_digest {
            return Err(CliError::Replay(format!(
                "input digest {d} does not match recorded {}",
                record.instance_digest
            )));
        }
        Ok(b.to_vec())
    };
    let getf = |k: &str| p.get(k).and_then(|v| v.as_f64());
    let getu = |k: &str| p.get(k).and_then(|v| v.as_u64());
    match record.command.as_str() {
        "lra" => {
            let args = LraArgs {
                input: need_input(input)?,
                mode: LraMode::parse(p["mode"].as_str().unwrap_or("additive"))?,
                p: getu("p").unwrap_or(4) as u32,
                k: getu("k").unwrap_or(1) as usize,
                eps: getf("eps").unwrap_or(0.25),
                bitcap: getu("bitcap").unwrap_or(8) as u32,
                seed: record.seed,
                oracle_grid: grid_from_params("grid", p),
                sigma_grid: grid_from_params("sigma", p),
                max_conditioning: getu("degree").map(|v| v as usize),
                budget: getu("budget"),
            };
            Ok(run_lra(&args, ledger)?.record.payload)
        }
        "pqnorm" => {
            let args = PqArgs {
                input: need_input(input)?,
                p: getf("p").unwrap_or(4.0 / 3.0),
                q: getu("q").unwrap_or(4) as u32,
                eps: getf("eps").unwrap_or(0.3),
                seed: record.seed,
                sigma_fineness: getf("sigma_fineness"),
                max_conditioning: getu("degree").map(|v| v as usize),
                budget: getu("budget"),
            };
            Ok(run_pqnorm(&args, ledger)?.record.payload)
        }
        "pinning" => {
            let args = PinningArgs {
                input: input.map(|b| b.to_vec()),
                lemma: PinLemma::parse(p["lemma"].as_str().unwrap_or("variance"))?,
                n: getu("n").unwrap_or(8) as usize,
                t: getu("t").unwrap_or(3) as usize,
                q: getf("q").unwrap_or(4.0 / 3.0),
                m: getu("m").unwrap_or(9) as usize,
                truncation: getf("trunc").unwrap_or(1e6),
                seed: record.seed,
                heavy_p: getu("heavy_p").unwrap_or(3) as u32,
            };
            Ok(run_pinning(&args, ledger)?.record.payload)
        }
        "oracle" => {
            let grid = grid_from_params("grid", p)
                .ok_or_else(|| CliError::Replay("oracle record lacks grid".into()))?;
            let args = OracleArgs {
                input: need_input(input)?,
                kind: p["kind"].as_str().unwrap_or("lra").to_string(),
                p: getf("p").unwrap_or(4.0),
                q: getf("q").unwrap_or(4.0),
                k: getu("k").unwrap_or(1) as usize,
                grid,
                budget: getu("budget").unwrap_or(1_000_000_000),
            };
            Ok(run_oracle(&args, ledger)?.record.payload)
        }
        other => Err(CliError::Replay(format!("unknown command '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> ConstantsLedger {
        ConstantsLedger::default()
    }

    fn csv(bytes: &str) -> Vec<u8> {
        bytes.as_bytes().to_vec()
    }

    #[test]
    fn lra_zero_matrix_exits_clean() {
        let args = LraArgs {
            input: csv("0,0\n0,0\n"),
            mode: LraMode::Additive,
            p: 4,
            k: 1,
            eps: 0.25,
            bitcap: 4,
            seed: 7,
            oracle_grid: None,
            sigma_grid: None,
            max_conditioning: None,
            budget: None,
        };
        let out = run_lra(&args, &ledger()).unwrap();
        assert_eq!(out.exit_code, 0);
        assert_eq!(out.record.objective, Some(0.0));
    }

    #[test]
    fn lra_replays_identically() {
        let args = LraArgs {
            input: csv("1,0\n0,1\n"),
            mode: LraMode::Additive,
            p: 4,
            k: 1,
            eps: 0.25,
            bitcap: 4,
            seed: 11,
            oracle_grid: Some(GridSpec::new(-1.0, 1.0, 0.5).unwrap()),
            sigma_grid: Some(GridSpec::new(-1.0, 1.0, 1.0).unwrap()),
            max_conditioning: Some(1),
            budget: None,
        };
        let out = run_lra(&args, &ledger()).unwrap();
        let replayed = replay_record(&out.record, Some(&args.input), &ledger()).unwrap();
        assert_eq!(
            serde_json::to_vec(&replayed).unwrap(),
            out.record.payload_bytes()
        );
    }

    #[test]
    fn replay_rejects_wrong_input() {
        let args = LraArgs {
            input: csv("1,0\n0,1\n"),
            mode: LraMode::Additive,
            p: 4,
            k: 1,
            eps: 0.25,
            bitcap: 4,
            seed: 11,
            oracle_grid: Some(GridSpec::new(-1.0, 1.0, 0.5).unwrap()),
            sigma_grid: Some(GridSpec::new(-1.0, 1.0, 1.0).unwrap()),
            max_conditioning: Some(1),
            budget: None,
        };
        let out = run_lra(&args, &ledger()).unwrap();
        let wrong = csv("2,0\n0,2\n");
        assert!(matches!(
            replay_record(&out.record, Some(&wrong), &ledger()),
            Err(CliError::Replay(_))
        ));
    }

    #[test]
    fn pinning_counterexample_reports_ratio() {
        let args = PinningArgs {
            lemma: PinLemma::Counterexample,
            n: 64,
            truncation: 1e6,
            ..PinningArgs::default()
        };
        let out = run_pinning(&args, &ledger()).unwrap();
        let ratio = out.record.payload["ratio_dream"].as_f64().unwrap();
        assert!(ratio > 100.0, "ratio {ratio}");
    }

    #[test]
    fn pinning_emits_trace_csv() {
        let args = PinningArgs { lemma: PinLemma::Variance, n: 6, t: 2, seed: 5, ..PinningArgs::default() };
        let out = run_pinning(&args, &ledger()).unwrap();
        assert_eq!(out.side_files.len(), 1);
        let csv = String::from_utf8(out.side_files[0].1.clone()).unwrap();
        assert!(csv.starts_with("s,avg_abs_cov"));
        assert!(csv.lines().count() >= 3);
    }

    #[test]
    fn oracle_command_runs() {
        let args = OracleArgs {
            input: csv("1,0\n0,1\n"),
            kind: "lra".into(),
            p: 4.0,
            q: 4.0,
            k: 1,
            grid: GridSpec::new(-1.0, 1.0, 1.0).unwrap(),
            budget: 1_000_000,
        };
        let out = run_oracle(&args, &ledger()).unwrap();
        assert_eq!(out.exit_code, 0);
        assert_eq!(out.record.objective, Some(1.0));
    }

    #[test]
    fn malformed_csv_is_an_error() {
        let args = OracleArgs {
            input: csv("1,2\nbad,4\n"),
            kind: "lra".into(),
            p: 4.0,
            q: 4.0,
            k: 1,
            grid: GridSpec::new(-1.0, 1.0, 1.0).unwrap(),
            budget: 1_000_000,
        };
        match run_oracle(&args, &ledger()) {
            Err(CliError::Io(IoError::Csv { line, .. })) => assert_eq!(line, 2),
            other => panic!("expected csv error, got {:?}", other.is_ok()),
        }
    }
}
