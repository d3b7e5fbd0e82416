//! Additive approximation of hypercontractive matrix p->q norms.
//!
//! The relaxation works in the bilinear form max <y, Ax> over the unit
//! balls ||v||_q <= 1 (y_i = v_i^(q-1)) and ||u||_p* <= 1 (x_j =
//! u_j^(p*-1)); the auxiliary coordinates are deterministic odd powers of
//! the base variables, so they are evaluated as junta functions rather
//! than stored as separate columns. Rounding takes pseudo-means
//! (expectation mode), which preserves the bilinear objective and keeps
//! the witness inside the unit ball by convexity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exec::ExecMode;
use crate::numerics::{
    pq_bruteforce, vector_p_norm, DenseMatrix, GridSpec, NumericsError,
    PqOracleResult,
};
use crate::pseudodist::model::{LinearConstraint, ModelBuilder, Sense, SolveError};
use crate::pseudodist::simplex::SimplexOptions;
use crate::pseudodist::{Alphabet, FamilyError, JuntaTerm, VarId, VariableIndex};

#[derive(Debug, Error)]
pub enum PqError {
    #[error("invalid instance: {0}")]
    BadInstance(String),
    #[error("zero witness vector")]
    ZeroWitness,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("model failure: {0}")]
    Model(String),
}

/// Exponent pair: q even >= 2, p in [q*, 2] with even integer dual p*.
#[derive(Clone, Debug, Serialize)]
pub struct PqInstance {
    pub a: DenseMatrix,
    pub p: f64,
    pub q: u32,
    pub eps: f64,
}

impl PqInstance {
    pub fn new(a: DenseMatrix, p: f64, q: u32, eps: f64) -> Result<Self, PqError> {
        if q < 2 || q % 2 != 0 {
            return Err(PqError::BadInstance(format!("q must be an even integer >= 2, got {q}")));
        }
        if !(1.0 < p && p <= 2.0) {
            return Err(PqError::BadInstance(format!("p must lie in (1, 2], got {p}")));
        }
        let p_star = p / (p - 1.0);
        let rounded = p_star.round();
        if (p_star - rounded).abs() > 1e-6 || rounded < 2.0 || (rounded as u64) % 2 != 0 {
            return Err(PqError::BadInstance(format!(
                "p* = p/(p-1) = {p_star} must be an even integer"
            )));
        }
        let q_star = q as f64 / (q as f64 - 1.0);
        if q_star > p + 1e-9 {
            return Err(PqError::BadInstance(format!("need q* = {q_star} <= p = {p}")));
        }
        if !(0.0 < eps && eps < 1.0) {
            return Err(PqError::BadInstance(format!("eps must be in (0,1), got {eps}")));
        }
        Ok(Self { a, p, q, eps })
    }

    pub fn p_star(&self) -> u32 {
        (self.p / (self.p - 1.0)).round() as u32
    }
}

/// The Holder upper bound sum_i ||A_i||_p*^q on ||A||_(p->q)^q.
pub fn holder_upper(a: &DenseMatrix, p: f64, q: f64) -> f64 {
    let p_star = p / (p - 1.0);
    (0..a.rows())
        .map(|i| vector_p_norm(a.row(i), p_star).powf(q))
        .sum()
}

/// ||Ax||_q^q / ||x||_p^q: a valid lower bound on ||A||_(p->q)^q for any
/// nonzero x.
pub fn witness_value(a: &DenseMatrix, x: &[f64], p: f64, q: f64) -> Result<f64, PqError> {
    let xn = vector_p_norm(x, p);
    if xn == 0.0 {
        return Err(PqError::ZeroWitness);
    }
    let mut axq = 0.0;
    for i in 0..a.rows() {
        let dot: f64 = a.row(i).iter().zip(x).map(|(aa, xx)| aa * xx).sum();
        axq += dot.abs().powf(q);
    }
    Ok(axq / xn.powf(q))
}

/// A certified witness: x on the unit lp sphere, its value, and the gap to
/// the Holder bound.
#[derive(Clone, Debug, Serialize)]
pub struct PqWitness {
    pub x: Vec<f64>,
    pub lower_bound_qth: f64,
    pub holder_upper_qth: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct PqConfig {
    /// Grid fineness on [-1,1] for the unconditioned stage.
    pub sigma_fineness: f64,
    /// Coarser fineness for stages with nonempty conditioning sets.
    pub cond_fineness: f64,
    pub max_conditioning: usize,
    /// Conditioning draws per candidate set.
    pub cond_repeats: usize,
    pub oracle_fineness: f64,
    pub oracle_budget: u64,
    pub cell_budget: usize,
    pub exec: ExecMode,
}

impl Default for PqConfig {
    fn default() -> Self {
        Self {
            sigma_fineness: 0.125,
            cond_fineness: 0.25,
            max_conditioning: 1,
            cond_repeats: 3,
            oracle_fineness: 0.05,
            oracle_budget: 100_000_000,
            cell_budget: 2_000_000,
            exec: ExecMode::Parallel,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PqOutcome {
    pub witness: PqWitness,
    pub y_hat: Vec<f64>,
    pub lp_values: Vec<f64>,
    pub conditioning_sets_tried: usize,
    pub early_exit_certified: bool,
    pub best_conditioning: Vec<(String, f64)>,
    pub non_exhaustive: bool,
    pub seed: u64,
}

pub type StageSolve = (crate::pseudodist::LocalDistributionFamily, f64, Vec<VarId>, Vec<VarId>);

/// Solve the unconditioned relaxation with all conditioning pairs
/// materialized and hand back the family (used by diagnostics and the
/// potential-alignment calibration).
pub fn stage_solve_for_diagnostics(inst: &PqInstance, cfg: &PqConfig) -> Result<StageSolve, PqError> {
    stage_solve(inst, cfg, cfg.sigma_fineness, true)
}

fn stage_solve(
    inst: &PqInstance,
    cfg: &PqConfig,
    fineness: f64,
    with_pairs: bool,
) -> Result<StageSolve, PqError> {
    let a = &inst.a;
    let (n, m) = (a.rows(), a.cols());
    let q = inst.q;
    let p_star = inst.p_star();
    let grid = GridSpec::new(-1.0, 1.0, fineness).map_err(PqError::Numerics)?;
    let alpha = Alphabet::new(grid.points()).map_err(|e| PqError::Model(e.to_string()))?;
    let degree = 2 + cfg.max_conditioning.min(1);
    let mut b = ModelBuilder::new(degree);
    b.set_cell_budget(cfg.cell_budget);
    let v_vars: Vec<VarId> = (0..n)
        .map(|i| b.add_variable(VariableIndex::scalar("v", i), alpha.clone()))
        .collect();
    let u_vars: Vec<VarId> = (0..m)
        .map(|j| b.add_variable(VariableIndex::scalar("u", j), alpha.clone()))
        .collect();
    b.add_constraint(LinearConstraint::le(
        "v_ball",
        v_vars
            .iter()
            .map(|&vv| JuntaTerm::monomial(1.0, vec![(vv, q)]))
            .collect(),
        1.0,
    ));
    b.add_constraint(LinearConstraint::le(
        "u_ball",
        u_vars
            .iter()
            .map(|&uv| JuntaTerm::monomial(1.0, vec![(uv, p_star)]))
            .collect(),
        1.0,
    ));
    let mut obj = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let aij = a.get(i, j);
            if aij == 0.0 {
                continue;
            }
            let qe = (q - 1) as i32;
            let pe = (p_star - 1) as i32;
            obj.push(JuntaTerm::new(1.0, vec![v_vars[i], u_vars[j]], move |vals| {
                aij * vals[0].powi(qe) * vals[1].powi(pe)
            }));
        }
    }
    b.set_objective(obj, Sense::Maximize);
    if with_pairs {
        // conditioning on any single v_t must preserve every marginal
        for &t in &v_vars {
            for &vv in &v_vars {
                if vv != t {
                    b.require_junta(&[t, vv]);
                }
            }
            for &uv in &u_vars {
                b.require_junta(&[t, uv]);
            }
        }
    }
    let model = b.build().map_err(|e| PqError::Model(e.to_string()))?;
    let solved = model.solve(&SimplexOptions::default()).map_err(|e| match e {
        SolveError::Infeasible { .. } => {
            PqError::Model("relaxation infeasible (configuration error)".into())
        }
        other => PqError::Model(other.to_string()),
    })?;
    Ok((solved.family, solved.objective_value, v_vars, u_vars))
}

/// The additive approximation: solve the relaxation, loop over conditioning
/// sets of increasing size, round by pseudo-means, keep the best witness,
/// and stop early once the Holder gap target is certified.
pub fn pq_additive(inst: &PqInstance, cfg: &PqConfig, seed: u64) -> Result<(PqWitness, PqOutcome), PqError> {
    let a = &inst.a;
    let (n, m) = (a.rows(), a.cols());
    let q = inst.q as f64;
    let p_star = inst.p_star();
    let holder = holder_upper(a, inst.p, q);
    if a.is_zero() || holder == 0.0 {
        let mut x = vec![0.0; m];
        if m > 0 {
            x[0] = 1.0;
        }
        let witness = PqWitness { x, lower_bound_qth: 0.0, holder_upper_qth: 0.0, gap: 0.0 };
        let outcome = PqOutcome {
            witness: witness.clone(),
            y_hat: vec![0.0; n],
            lp_values: Vec::new(),
            conditioning_sets_tried: 0,
            early_exit_certified: true,
            best_conditioning: Vec::new(),
            non_exhaustive: false,
            seed,
        };
        return Ok((witness, outcome));
    }

    let target = (1.0 - inst.eps) * holder;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<(String, f64)>)> = None;
    let mut lp_values = Vec::new();
    let mut tried = 0usize;
    let mut certified = false;
    let pe = (p_star - 1) as i32;
    let qe = (inst.q - 1) as i32;

    'stages: for stage in 0..=cfg.max_conditioning.min(n) {
        let fineness = if stage == 0 { cfg.sigma_fineness } else { cfg.cond_fineness };
        let (family, lp_value, v_vars, u_vars) = stage_solve(inst, cfg, fineness, stage > 0)?;
        lp_values.push(lp_value);
        let sets: Vec<Vec<usize>> = if stage == 0 {
            vec![vec![]]
        } else {
            let mut out = Vec::new();
            let mut cur = Vec::new();
            fn rec(start: usize, n: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if cur.len() == s {
                    out.push(cur.clone());
                    return;
                }
                for v in start..n {
                    cur.push(v);
                    rec(v + 1, n, s, cur, out);
                    cur.pop();
                }
            }
            rec(0, n, stage, &mut cur, &mut out);
            out
        };
        for (si, set) in sets.iter().enumerate() {
            let repeats = if set.is_empty() { 1 } else { cfg.cond_repeats };
            for rep in 0..repeats {
                tried += 1;
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed ^ ((stage as u64) << 40) ^ ((si as u64) << 16) ^ rep as u64,
                );
                let t_vars: Vec<VarId> = set.iter().map(|&t| v_vars[t]).collect();
                let (fam, trace) = family.sample_and_condition(&t_vars, &mut rng)?;
                // expectation-mode rounding of the auxiliary coordinates
                let mut x_hat = Vec::with_capacity(m);
                for &uv in &u_vars {
                    let term = JuntaTerm::new(1.0, vec![uv], move |vals| vals[0].powi(pe));
                    x_hat.push(fam.pseudo_expectation(&term)?);
                }
                let mut y_hat = Vec::with_capacity(n);
                for &vv in &v_vars {
                    if let Some(x) = fam.frozen_value(vv) {
                        y_hat.push(x.powi(qe));
                    } else {
                        let term = JuntaTerm::new(1.0, vec![vv], move |vals| vals[0].powi(qe));
                        y_hat.push(fam.pseudo_expectation(&term)?);
                    }
                }
                let xn = vector_p_norm(&x_hat, inst.p);
                if xn == 0.0 {
                    continue;
                }
                let x_unit: Vec<f64> = x_hat.iter().map(|v| v / xn).collect();
                let val = witness_value(a, &x_unit, inst.p, q)?;
                let trace_str: Vec<(String, f64)> =
                    trace.iter().map(|(v, x)| (v.to_string(), *x)).collect();
                if best.as_ref().map_or(true, |b| val > b.0) {
                    best = Some((val, x_unit, y_hat, trace_str));
                }
                if best.as_ref().map(|b| b.0).unwrap_or(0.0) >= target {
                    certified = true;
                    break 'stages;
                }
            }
        }
    }

    let (value, x, y_hat, trace) = best.ok_or(PqError::ZeroWitness)?;
    let witness = PqWitness {
        x,
        lower_bound_qth: value,
        holder_upper_qth: holder,
        gap: holder - value,
    };
    let outcome = PqOutcome {
        witness: witness.clone(),
        y_hat,
        lp_values,
        conditioning_sets_tried: tried,
        early_exit_certified: certified,
        best_conditioning: trace,
        non_exhaustive: !certified,
        seed,
    };
    Ok((witness, outcome))
}

/// Exhaustive oracle on a fine grid (convenience wrapper).
pub fn pq_oracle(inst: &PqInstance, cfg: &PqConfig) -> Result<PqOracleResult, PqError> {
    let grid = GridSpec::new(-1.0, 1.0, cfg.oracle_fineness).map_err(PqError::Numerics)?;
    Ok(pq_bruteforce(&inst.a, inst.p, inst.q as f64, &grid, cfg.oracle_budget, cfg.exec)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct PqDiscretizationCheck {
    pub loss: f64,
    pub bound: f64,
    pub holds: bool,
    pub fine_value: f64,
    pub coarse_value: f64,
}

/// Compare the coarse-grid optimum against a five-fold finer surrogate of
/// the continuous optimum; the loss must obey the grid-fineness bound
/// c_cal * fineness * nm * (sum_i ||A_i||_p*^q)^(1/q).
pub fn pq_discretization_check(
    a: &DenseMatrix,
    p: f64,
    q: f64,
    coarse: &GridSpec,
    budget: u64,
    exec: ExecMode,
    c_cal: f64,
) -> Result<PqDiscretizationCheck, PqError> {
    if !(p <= 2.0 && 2.0 <= q) {
        return Err(PqError::BadInstance(format!("need p <= 2 <= q, got p={p}, q={q}")));
    }
    let coarse_res = pq_bruteforce(a, p, q, coarse, budget, exec)?;
    let fine = GridSpec::new(coarse.lo, coarse.hi, coarse.fineness / 5.0).map_err(PqError::Numerics)?;
    let fine_res = pq_bruteforce(a, p, q, &fine, budget, exec)?;
    let loss = (fine_res.value - coarse_res.value).max(0.0);
    let nm = (a.rows() * a.cols()) as f64;
    let bound = c_cal * coarse.fineness * nm * holder_upper(a, p, q).powf(1.0 / q);
    Ok(PqDiscretizationCheck {
        loss,
        bound,
        holds: loss <= bound + 1e-12,
        fine_value: fine_res.value,
        coarse_value: coarse_res.value,
    })
}
