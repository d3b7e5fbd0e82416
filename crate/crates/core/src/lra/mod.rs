//! Entrywise lp low-rank approximation: the additive scheme, the rank-1
//! multiplicative scheme, and the rank-k multiplicative scheme, all driven
//! by local-distribution relaxations plus correlation rounding, warm-started
//! and certified by the exhaustive oracle at desk scale.

pub mod ident;
pub mod rank_k;

pub use ident::{
    auerbach_basis, balance_residuals, balance_residuals_with, polar_alignment,
    polar_orthogonality_residual, strong_ident_rank1, BalanceMatrices, BalancedPair, IdentError,
};
pub use rank_k::lra_ptas_rank_k;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exec::ExecMode;
use crate::numerics::{
    self, entrywise_p_norm_pow, jacobi_svd, lra_bruteforce, opt_floor, GridSpec,
    NumericsError,
};
use crate::numerics::DenseMatrix;
use crate::pseudodist::model::{LinearConstraint, ModelBuilder, Relation, Sense, SolveError};
use crate::pseudodist::simplex::SimplexOptions;
use crate::pseudodist::{
    Alphabet, FamilyError, JuntaTerm, LocalDistributionFamily, RoundingMode, VarId, VariableIndex,
};

#[derive(Debug, Error)]
pub enum LraError {
    #[error("invalid instance: {0}")]
    BadInstance(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Ident(#[from] IdentError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("model construction failed: {0}")]
    Model(String),
    #[error("every guess was infeasible: {0:?}")]
    AllGuessesInfeasible(Vec<String>),
}

/// The problem instance: integer matrix, even exponent, target rank,
/// accuracy, and bit cap on the entries.
#[derive(Clone, Debug, Serialize)]
pub struct LraInstance {
    pub a: DenseMatrix,
    pub p: u32,
    pub k: usize,
    pub eps: f64,
    pub bitcap: u32,
}

impl LraInstance {
    pub fn new(a: DenseMatrix, p: u32, k: usize, eps: f64, bitcap: u32) -> Result<Self, LraError> {
        if p < 2 || p % 2 != 0 {
            return Err(LraError::BadInstance(format!("p must be even >= 2, got {p}")));
        }
        if !(0.0 < eps && eps < 1.0) {
            return Err(LraError::BadInstance(format!("eps must be in (0,1), got {eps}")));
        }
        if k == 0 {
            return Err(LraError::BadInstance("k must be >= 1".into()));
        }
        let cap = 2f64.powi(bitcap as i32);
        for (idx, e) in a.entries().iter().enumerate() {
            if e.fract() != 0.0 || e.abs() > cap {
                return Err(LraError::BadInstance(format!(
                    "entry {idx} = {e} is not an integer of magnitude <= 2^{bitcap}"
                )));
            }
        }
        Ok(Self { a, p, k, eps, bitcap })
    }
}

/// Exact objective ||A - U V^T||_p^p with dimension checks.
pub fn objective(a: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix, p: u32) -> Result<f64, LraError> {
    if u.rows() != a.rows() || v.rows() != a.cols() || u.cols() != v.cols() {
        return Err(LraError::BadInstance(format!(
            "objective shapes: A {}x{}, U {}x{}, V {}x{}",
            a.rows(),
            a.cols(),
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    Ok(numerics::rank_k_objective(a, u, v, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Oracle,
    SvdHeuristic,
    External,
}

/// A constant-factor starting factorization, rescaled so ||X||_F = ||Y||_F.
#[derive(Clone, Debug, Serialize)]
pub struct WarmStart {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub value: f64,
    pub approx_factor_estimate: f64,
    pub provenance: Provenance,
}

/// Everything the algorithms need beyond the instance. Grids default to
/// instance-derived symmetric grids; the guess grids are seeded by the
/// oracle solution per the desk-scale reduction (the full sweep stays
/// behind `full_guess_sweep`).
#[derive(Clone, Debug)]
pub struct LraConfig {
    pub oracle_grid: Option<GridSpec>,
    pub sigma_grid: Option<GridSpec>,
    pub guess_window: usize,
    pub full_guess_sweep: bool,
    pub max_conditioning: usize,
    pub rounding_draws: usize,
    pub oracle_budget: u64,
    pub cell_budget: usize,
    pub eq_slack: f64,
    pub c_p_threshold: f64,
    pub enable_mixed_holder: bool,
    pub residual_bound_scale: f64,
    pub noise_scale: f64,
    pub exec: ExecMode,
}

impl Default for LraConfig {
    fn default() -> Self {
        Self {
            oracle_grid: None,
            sigma_grid: None,
            guess_window: 1,
            full_guess_sweep: false,
            max_conditioning: 1,
            rounding_draws: 4,
            oracle_budget: 1_000_000_000,
            cell_budget: 2_000_000,
            eq_slack: 1e-6,
            c_p_threshold: 0.01,
            enable_mixed_holder: false,
            residual_bound_scale: 64.0,
            noise_scale: 1e-8,
            exec: ExecMode::Parallel,
        }
    }
}

/// The guessed quantities of one relaxation iteration.
#[derive(Clone, Debug, Default, Serialize)]
pub struct GuessVector {
    /// Additive scheme: [s_u]; rank-1 scheme: s_{u,k} for k = 0..p.
    pub s_u: Vec<f64>,
    pub s_v: Vec<f64>,
    pub d_u: Option<f64>,
    pub d_v: Option<f64>,
    /// Rank-k scheme: flattened canonical tensor guesses.
    pub tensor_u: Option<Vec<f64>>,
    pub tensor_v: Option<Vec<f64>>,
    /// Which balancing candidates the iteration used.
    pub n_choice: Option<(usize, usize)>,
}

/// Output of one algorithm run; the CLI wraps this into a RunRecord.
#[derive(Clone, Debug, Serialize)]
pub struct LraOutcome {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub value: f64,
    pub best_source: String,
    pub best_rounded_value: Option<f64>,
    pub warm_value: f64,
    pub warm_provenance: Provenance,
    pub oracle_value: Option<f64>,
    pub oracle_exhaustive: Option<bool>,
    pub guesses_tried: Vec<GuessVector>,
    pub winning_guess: Option<GuessVector>,
    pub conditioning_trace: Vec<(String, f64)>,
    pub infeasible_guesses: Vec<String>,
    pub lp_values: Vec<f64>,
    pub non_exhaustive: bool,
    pub seed: u64,
}

pub(crate) fn default_range(a: &DenseMatrix, p: u32) -> f64 {
    let frob = a.frobenius_sq().sqrt();
    let lp_root = entrywise_p_norm_pow(a, p).unwrap_or(0.0).powf(1.0 / p as f64);
    let scale = frob.max(lp_root).max(a.max_abs()).max(1.0);
    (2.0 * scale).sqrt().max(a.max_abs()).max(1.0)
}

pub(crate) fn oracle_grid_for(a: &DenseMatrix, p: u32, cfg: &LraConfig) -> GridSpec {
    cfg.oracle_grid.clone().unwrap_or_else(|| {
        let r = default_range(a, p);
        GridSpec::symmetric(r, r / 4.0).expect("valid grid")
    })
}

pub(crate) fn sigma_grid_for(a: &DenseMatrix, p: u32, k: usize, cfg: &LraConfig) -> GridSpec {
    cfg.sigma_grid.clone().unwrap_or_else(|| {
        let r = default_range(a, p);
        let step = if k <= 1 { r / 2.0 } else { r };
        GridSpec::symmetric(r, step).expect("valid grid")
    })
}

pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix-style stream separation
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn zero_factors(n: usize, m: usize, k: usize) -> (DenseMatrix, DenseMatrix) {
    (DenseMatrix::zeros(n, k), DenseMatrix::zeros(m, k))
}

/// Balanced rescale: ||X||_F = ||Y||_F, leaving X Y^T untouched.
pub(crate) fn rescale_balanced(x: &DenseMatrix, y: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let nx = x.frobenius_sq().sqrt();
    let ny = y.frobenius_sq().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return (x.clone(), y.clone());
    }
    let c = (ny / nx).sqrt();
    (x.scale(c), y.scale(1.0 / c))
}

/// Constant-factor warm start: the exhaustive oracle when the budget
/// allows (provenance Oracle, exact at desk scale), otherwise a truncated
/// SVD refined by alternating snapped coordinate descent.
pub fn warm_start(instance: &LraInstance, cfg: &LraConfig) -> Result<WarmStart, LraError> {
    let a = &instance.a;
    let (n, m, k, p) = (a.rows(), a.cols(), instance.k, instance.p);
    if a.is_zero() {
        let (x, y) = zero_factors(n, m, k);
        return Ok(WarmStart { x, y, value: 0.0, approx_factor_estimate: 1.0, provenance: Provenance::Oracle });
    }
    if p == 2 {
        // SVD is the exact minimizer
        let svd = jacobi_svd(a)?;
        let (x, y) = svd.split_factors(k);
        let (x, y) = rescale_balanced(&x, &y);
        let value = objective(a, &x, &y, p)?;
        return Ok(WarmStart { x, y, value, approx_factor_estimate: 1.0, provenance: Provenance::Oracle });
    }
    let grid = oracle_grid_for(a, p, cfg);
    let oracle = lra_bruteforce(a, p, k, &grid, cfg.oracle_budget, cfg.exec)?;
    if oracle.exhaustive {
        let (x, y) = rescale_balanced(&oracle.argmin_u, &oracle.argmin_v);
        let value = objective(a, &x, &y, p)?;
        return Ok(WarmStart { x, y, value, approx_factor_estimate: 1.0, provenance: Provenance::Oracle });
    }
    // SVD + alternating snapped minimization, raced against the partial scan
    let svd = jacobi_svd(a)?;
    let (mut x, mut y) = svd.split_factors(k);
    x = grid.snap_matrix(&x);
    y = grid.snap_matrix(&y);
    let pts = grid.points();
    for _sweep in 0..3 {
        for i in 0..n {
            for t in 0..k {
                let mut best = (x.get(i, t), objective(a, &x, &y, p)?);
                for &c in &pts {
                    let mut xx = x.clone();
                    xx.set(i, t, c);
                    let val = objective(a, &xx, &y, p)?;
                    if val < best.1 {
                        best = (c, val);
                    }
                }
                x.set(i, t, best.0);
            }
        }
        for j in 0..m {
            for t in 0..k {
                let mut best = (y.get(j, t), objective(a, &x, &y, p)?);
                for &c in &pts {
                    let mut yy = y.clone();
                    yy.set(j, t, c);
                    let val = objective(a, &x, &yy, p)?;
                    if val < best.1 {
                        best = (c, val);
                    }
                }
                y.set(j, t, best.0);
            }
        }
    }
    let heur_value = objective(a, &x, &y, p)?;
    let (x, y, _value) = if oracle.opt_value < heur_value {
        let v = objective(a, &oracle.argmin_u, &oracle.argmin_v, p)?;
        (oracle.argmin_u.clone(), oracle.argmin_v.clone(), v)
    } else {
        (x, y, heur_value)
    };
    let (x, y) = rescale_balanced(&x, &y);
    let value = objective(a, &x, &y, p)?;
    let floor = opt_floor(a, p, k, instance.bitcap)?;
    let approx = if floor > 0.0 { (value / floor).max(1.0) } else { 1.0 };
    Ok(WarmStart { x, y, value, approx_factor_estimate: approx, provenance: Provenance::SvdHeuristic })
}

/// All subsets of `items` with size at most `max`, ordered by size then lex.
fn small_subsets(count: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut current: Vec<Vec<usize>> = vec![vec![]];
    for _size in 1..=max.min(count) {
        let mut next = Vec::new();
        for base in &current {
            let start = base.last().map_or(0, |v| v + 1);
            for j in start..count {
                let mut s = base.clone();
                s.push(j);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        current = next;
    }
    out
}

struct RoundingBest {
    value: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    mode: &'static str,
}

/// Round a solved/conditioned family to concrete rank-1 factors: several
/// independent-sampling draws plus the expectation-mode candidate, keeping
/// the exact-objective best.
fn round_rank1(
    a: &DenseMatrix,
    p: u32,
    family: &LocalDistributionFamily,
    u_vars: &[VarId],
    v_vars: &[VarId],
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RoundingBest, LraError> {
    let mut best: Option<RoundingBest> = None;
    let mut consider = |u: Vec<f64>, v: Vec<f64>, mode: &'static str| -> Result<(), LraError> {
        let val = numerics::rank1_objective(a, &u, &v, p);
        if best.as_ref().map_or(true, |b| val < b.value) {
            best = Some(RoundingBest { value: val, u, v, mode });
        }
        Ok(())
    };
    for _ in 0..draws {
        let mut u = Vec::with_capacity(u_vars.len());
        for &var in u_vars {
            u.push(family.round_scalar(var, RoundingMode::Sample, rng)?);
        }
        let mut v = Vec::with_capacity(v_vars.len());
        for &var in v_vars {
            v.push(family.round_scalar(var, RoundingMode::Sample, rng)?);
        }
        consider(u, v, "sample")?;
    }
    let mut u = Vec::with_capacity(u_vars.len());
    for &var in u_vars {
        u.push(family.round_scalar(var, RoundingMode::Expectation, rng)?);
    }
    let mut v = Vec::with_capacity(v_vars.len());
    for &var in v_vars {
        v.push(family.round_scalar(var, RoundingMode::Expectation, rng)?);
    }
    consider(u, v, "expectation")?;
    Ok(best.expect("at least one rounding candidate"))
}

/// Additive scheme (rank 1): loop over guessed power sums (s_u, s_v) and
/// conditioning sets T of v-variables, solve the relaxation with the two
/// power-sum equality constraints, sample-and-condition on v_T, round
/// independently, and return the best candidate (the warm start and the
/// zero factors are always in the candidate set).
pub fn lra_additive(instance: &LraInstance, cfg: &LraConfig, seed: u64) -> Result<LraOutcome, LraError> {
    if instance.k != 1 {
        return Err(LraError::BadInstance("the additive scheme is stated for rank 1".into()));
    }
    let a = &instance.a;
    let (n, m, p) = (a.rows(), a.cols(), instance.p);
    if a.is_zero() {
        let (u, v) = zero_factors(n, m, 1);
        return Ok(LraOutcome {
            u,
            v,
            value: 0.0,
            best_source: "zero-input".into(),
            best_rounded_value: None,
            warm_value: 0.0,
            warm_provenance: Provenance::Oracle,
            oracle_value: Some(0.0),
            oracle_exhaustive: Some(true),
            guesses_tried: Vec::new(),
            winning_guess: None,
            conditioning_trace: Vec::new(),
            infeasible_guesses: Vec::new(),
            lp_values: Vec::new(),
            non_exhaustive: false,
            seed,
        });
    }
    let warm = warm_start(instance, cfg)?;
    let grid = oracle_grid_for(a, p, cfg);
    let oracle = if warm.provenance == Provenance::Oracle && p != 2 {
        Some(lra_bruteforce(a, p, 1, &grid, cfg.oracle_budget, cfg.exec)?)
    } else if p != 2 {
        Some(lra_bruteforce(a, p, 1, &grid, cfg.oracle_budget, cfg.exec)?)
    } else {
        None
    };

    let sigma = sigma_grid_for(a, p, 1, cfg);
    let sigma_alpha = Alphabet::new(sigma.points()).map_err(|e| LraError::Model(e.to_string()))?;

    // oracle-seeded guesses: power sums of the snapped oracle factors
    let (u_seed, v_seed) = match &oracle {
        Some(o) => (
            sigma.snap_vec(&o.argmin_u.col_vec(0)),
            sigma.snap_vec(&o.argmin_v.col_vec(0)),
        ),
        None => (
            sigma.snap_vec(&warm.x.col_vec(0)),
            sigma.snap_vec(&warm.y.col_vec(0)),
        ),
    };
    let pf = p as i32;
    let s_u_center: f64 = u_seed.iter().map(|x| x.powi(pf)).sum();
    let s_v_center: f64 = v_seed.iter().map(|x| x.powi(pf)).sum();

    let mut guesses: Vec<(f64, f64)> = Vec::new();
    if cfg.full_guess_sweep {
        let hi = entrywise_p_norm_pow(a, p)?.sqrt() * 2.0;
        let steps = 8;
        for i in 0..=steps {
            for j in 0..=steps {
                guesses.push((hi * i as f64 / steps as f64, hi * j as f64 / steps as f64));
            }
        }
    } else {
        let w = cfg.guess_window as i64;
        let du = (s_u_center.abs().max(1.0)) * 0.25;
        let dv = (s_v_center.abs().max(1.0)) * 0.25;
        for i in -w..=w {
            for j in -w..=w {
                guesses.push((s_u_center + i as f64 * du, s_v_center + j as f64 * dv));
            }
        }
    }

    let cond_sets = small_subsets(m, cfg.max_conditioning.min(m.saturating_sub(1)));
    let degree = 2 + cfg.max_conditioning;

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, String, GuessVector, Vec<(String, f64)>)> = None;
    let mut best_rounded: Option<f64> = None;
    let mut infeasible = Vec::new();
    let mut lp_values = Vec::new();
    let mut guesses_tried = Vec::new();

    for (gi, &(s_u, s_v)) in guesses.iter().enumerate() {
        let gv = GuessVector { s_u: vec![s_u], s_v: vec![s_v], ..Default::default() };
        guesses_tried.push(gv.clone());
        for (ti, t_set) in cond_sets.iter().enumerate() {
            let mut b = ModelBuilder::new(degree);
            b.set_cell_budget(cfg.cell_budget);
            let u_vars: Vec<VarId> = (0..n)
                .map(|i| b.add_variable(VariableIndex::scalar("u", i), sigma_alpha.clone()))
                .collect();
            let v_vars: Vec<VarId> = (0..m)
                .map(|j| b.add_variable(VariableIndex::scalar("v", j), sigma_alpha.clone()))
                .collect();
            let su_terms: Vec<JuntaTerm> = u_vars
                .iter()
                .map(|&uv| JuntaTerm::monomial(1.0, vec![(uv, p)]))
                .collect();
            b.add_constraint(LinearConstraint {
                name: "power_sum_u".into(),
                terms: su_terms,
                relation: Relation::Eq,
                rhs: s_u,
                slack: cfg.eq_slack,
            });
            let sv_terms: Vec<JuntaTerm> = v_vars
                .iter()
                .map(|&vv| JuntaTerm::monomial(1.0, vec![(vv, p)]))
                .collect();
            b.add_constraint(LinearConstraint {
                name: "power_sum_v".into(),
                terms: sv_terms,
                relation: Relation::Eq,
                rhs: s_v,
                slack: cfg.eq_slack,
            });
            let mut obj = Vec::with_capacity(n * m);
            for i in 0..n {
                for j in 0..m {
                    let aij = a.get(i, j);
                    obj.push(JuntaTerm::new(1.0, vec![u_vars[i], v_vars[j]], move |vals| {
                        (aij - vals[0] * vals[1]).powi(pf)
                    }));
                }
            }
            b.set_objective(obj, Sense::Minimize);
            // conditioning support: every marginal must survive pinning v_T
            for &t in t_set {
                for &uv in &u_vars {
                    b.require_junta(&[uv, v_vars[t]]);
                }
                for &vv in &v_vars {
                    if vv != v_vars[t] {
                        b.require_junta(&[vv, v_vars[t]]);
                    }
                }
            }
            if t_set.len() >= 2 {
                let t_vars: Vec<VarId> = t_set.iter().map(|&t| v_vars[t]).collect();
                b.require_junta(&t_vars);
                for &uv in &u_vars {
                    let mut j = t_vars.clone();
                    j.push(uv);
                    b.require_junta(&j);
                }
                for &vv in &v_vars {
                    if !t_vars.contains(&vv) {
                        let mut j = t_vars.clone();
                        j.push(vv);
                        b.require_junta(&j);
                    }
                }
            }
            let model = b.build().map_err(|e| LraError::Model(e.to_string()))?;
            let solved = match model.solve(&SimplexOptions::default()) {
                Ok(s) => s,
                Err(SolveError::Infeasible { .. }) | Err(SolveError::IterationLimit) => {
                    infeasible.push(format!("guess {gi} (s_u={s_u:.3}, s_v={s_v:.3}), T={t_set:?}"));
                    continue;
                }
                Err(e) => return Err(LraError::Model(e.to_string())),
            };
            lp_values.push(solved.objective_value);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (gi * 1000 + ti) as u64));
            let t_vars: Vec<VarId> = t_set.iter().map(|&t| v_vars[t]).collect();
            let (fam, trace) = solved.family.sample_and_condition(&t_vars, &mut rng)?;
            let rb = round_rank1(a, p, &fam, &u_vars, &v_vars, cfg.rounding_draws, &mut rng)?;
            if best_rounded.map_or(true, |b| rb.value < b) {
                best_rounded = Some(rb.value);
            }
            let trace_str: Vec<(String, f64)> =
                trace.iter().map(|(v, x)| (v.to_string(), *x)).collect();
            if best.as_ref().map_or(true, |b| rb.value < b.0) {
                best = Some((
                    rb.value,
                    rb.u,
                    rb.v,
                    format!("rounding-{}", rb.mode),
                    gv.clone(),
                    trace_str,
                ));
            }
        }
    }

    if best.is_none() && !infeasible.is_empty() {
        return Err(LraError::AllGuessesInfeasible(infeasible));
    }

    // final candidate set: rounded best, warm start, zero factors
    let mut final_u = warm.x.clone();
    let mut final_v = warm.y.clone();
    let mut final_val = warm.value;
    let mut source = "warm-start".to_string();
    let mut winning_guess = None;
    let mut conditioning_trace = Vec::new();
    if let Some((val, u, v, src, gv, trace)) = best {
        if val < final_val {
            final_u = DenseMatrix::column(&u);
            final_v = DenseMatrix::column(&v);
            final_val = val;
            source = src;
            winning_guess = Some(gv);
            conditioning_trace = trace;
        }
    }
    let zero_val = entrywise_p_norm_pow(a, p)?;
    if zero_val < final_val {
        let (u, v) = zero_factors(n, m, 1);
        final_u = u;
        final_v = v;
        final_val = zero_val;
        source = "zero-factors".into();
    }

    Ok(LraOutcome {
        u: final_u,
        v: final_v,
        value: final_val,
        best_source: source,
        best_rounded_value: best_rounded,
        warm_value: warm.value,
        warm_provenance: warm.provenance,
        oracle_value: oracle.as_ref().map(|o| o.opt_value),
        oracle_exhaustive: oracle.as_ref().map(|o| o.exhaustive),
        guesses_tried,
        winning_guess,
        conditioning_trace,
        infeasible_guesses: infeasible,
        lp_values,
        non_exhaustive: oracle.as_ref().map_or(false, |o| !o.exhaustive),
        seed,
    })
}

/// Exact rank-1 factorization when A has rank exactly 1 (pivot scaling on
/// integer inputs gives exact factors).
fn exact_rank1(a: &DenseMatrix) -> Option<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (a.rows(), a.cols());
    let mut pivot = (0usize, 0usize, 0.0f64);
    for i in 0..n {
        for j in 0..m {
            if a.get(i, j).abs() > pivot.2 {
                pivot = (i, j, a.get(i, j).abs());
            }
        }
    }
    if pivot.2 == 0.0 {
        return Some((vec![0.0; n], vec![0.0; m]));
    }
    let (i0, j0, _) = pivot;
    let u: Vec<f64> = (0..n).map(|i| a.get(i, j0)).collect();
    let v: Vec<f64> = (0..m).map(|j| a.get(i0, j) / a.get(i0, j0)).collect();
    for i in 0..n {
        for j in 0..m {
            if a.get(i, j) != u[i] * v[j] {
                return None;
            }
        }
    }
    Some((u, v))
}

pub(crate) fn svd_exact_outcome(instance: &LraInstance, seed: u64, source: &str) -> Result<LraOutcome, LraError> {
    let svd = jacobi_svd(&instance.a)?;
    let (x, y) = svd.split_factors(instance.k);
    let (x, y) = rescale_balanced(&x, &y);
    let value = objective(&instance.a, &x, &y, instance.p)?;
    Ok(LraOutcome {
        u: x,
        v: y,
        value,
        best_source: source.into(),
        best_rounded_value: None,
        warm_value: value,
        warm_provenance: Provenance::Oracle,
        oracle_value: Some(value),
        oracle_exhaustive: Some(true),
        guesses_tried: Vec::new(),
        winning_guess: None,
        conditioning_trace: Vec::new(),
        infeasible_guesses: Vec::new(),
        lp_values: Vec::new(),
        non_exhaustive: false,
        seed,
    })
}

/// Rank-1 multiplicative scheme: early exit on exact rank-1 inputs, warm
/// start, the residual-constrained relaxation over the guessed moment
/// sums (s_{u,k}, s_{v,k}) and residual norms (d_u, d_v) with auxiliary
/// fractional-power variables, conditioning + rounding, and the additive
/// scheme (at accuracy eps * C_p) as a fallback candidate.
pub fn lra_ptas_rank1(instance: &LraInstance, cfg: &LraConfig, seed: u64) -> Result<LraOutcome, LraError> {
    let a = &instance.a;
    let (n, m, p) = (a.rows(), a.cols(), instance.p);
    if instance.k != 1 {
        return Err(LraError::BadInstance("rank-1 scheme needs k = 1".into()));
    }
    if a.is_zero() {
        return lra_additive(instance, cfg, seed);
    }
    if let Some((u, v)) = exact_rank1(a) {
        let um = DenseMatrix::column(&u);
        let vm = DenseMatrix::column(&v);
        let value = objective(a, &um, &vm, p)?;
        return Ok(LraOutcome {
            u: um,
            v: vm,
            value,
            best_source: "rank1-early-exit".into(),
            best_rounded_value: None,
            warm_value: value,
            warm_provenance: Provenance::Oracle,
            oracle_value: Some(value),
            oracle_exhaustive: Some(true),
            guesses_tried: Vec::new(),
            winning_guess: None,
            conditioning_trace: Vec::new(),
            infeasible_guesses: Vec::new(),
            lp_values: Vec::new(),
            non_exhaustive: false,
            seed,
        });
    }
    if p == 2 {
        return svd_exact_outcome(instance, seed, "svd-exact");
    }

    let warm = warm_start(instance, cfg)?;
    let grid = oracle_grid_for(a, p, cfg);
    let oracle = lra_bruteforce(a, p, 1, &grid, cfg.oracle_budget, cfg.exec)?;
    // rescale then snap the warm-start center to the fine grid
    let (wx, wy) = rescale_balanced(&warm.x, &warm.y);
    let x_center = grid.snap_vec(&wx.col_vec(0));
    let y_center = grid.snap_vec(&wy.col_vec(0));

    let sigma = sigma_grid_for(a, p, 1, cfg);
    let sigma_alpha = Alphabet::new(sigma.points()).map_err(|e| LraError::Model(e.to_string()))?;
    let u_seed = sigma.snap_vec(&oracle.argmin_u.col_vec(0));
    let v_seed = sigma.snap_vec(&oracle.argmin_v.col_vec(0));

    let pf = p as i32;
    // oracle-derived centers for every guessed quantity
    let s_u_center: Vec<f64> = (0..=p)
        .map(|kk| {
            (0..n)
                .map(|i| x_center[i].powi((p - kk) as i32) * u_seed[i].powi(kk as i32))
                .sum()
        })
        .collect();
    let s_v_center: Vec<f64> = (0..=p)
        .map(|kk| {
            (0..m)
                .map(|j| y_center[j].powi((p - kk) as i32) * v_seed[j].powi(kk as i32))
                .sum()
        })
        .collect();
    let d_u_center: f64 = (0..n).map(|i| (u_seed[i] - x_center[i]).powi(pf)).sum();
    let d_v_center: f64 = (0..m).map(|j| (v_seed[j] - y_center[j]).powi(pf)).sum();

    // Guess combos: the exact center plus axis-aligned shifts of the
    // residual norms (the full product grid is out of budget by design).
    let mut combos: Vec<(f64, f64)> = vec![(d_u_center, d_v_center)];
    let w = cfg.guess_window as i64;
    let step_u = d_u_center.abs().max(warm.value.max(1.0) * 0.25);
    let step_v = d_v_center.abs().max(warm.value.max(1.0) * 0.25);
    for i in 1..=w {
        combos.push((d_u_center + i as f64 * step_u, d_v_center));
        combos.push(((d_u_center - i as f64 * step_u).max(0.0), d_v_center));
        combos.push((d_u_center, d_v_center + i as f64 * step_v));
        combos.push((d_u_center, (d_v_center - i as f64 * step_v).max(0.0)));
    }

    let cond_sets = small_subsets(m, cfg.max_conditioning.min(m.saturating_sub(1)));
    let degree = (2 + cfg.max_conditioning).max(n.max(m));
    let holder_rows_enabled = n <= 4 && m <= 4;
    let frac_root = {
        // 1 / prod_{q=1}^{p-1} (p - q) = 1 / (p-1)!
        let mut d = 1u32;
        for q in 1..p {
            d *= p - q;
        }
        d
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, String, GuessVector, Vec<(String, f64)>)> = None;
    let mut best_rounded: Option<f64> = None;
    let mut infeasible = Vec::new();
    let mut lp_values = Vec::new();
    let mut guesses_tried = Vec::new();

    for (gi, &(d_u, d_v)) in combos.iter().enumerate() {
        let gv = GuessVector {
            s_u: s_u_center.clone(),
            s_v: s_v_center.clone(),
            d_u: Some(d_u),
            d_v: Some(d_v),
            ..Default::default()
        };
        guesses_tried.push(gv.clone());
        for (ti, t_set) in cond_sets.iter().enumerate() {
            let mut b = ModelBuilder::new(degree);
            b.set_cell_budget(cfg.cell_budget);
            let u_vars: Vec<VarId> = (0..n)
                .map(|i| b.add_variable(VariableIndex::scalar("u", i), sigma_alpha.clone()))
                .collect();
            let v_vars: Vec<VarId> = (0..m)
                .map(|j| b.add_variable(VariableIndex::scalar("v", j), sigma_alpha.clone()))
                .collect();
            // auxiliary fractional-power variables |u_i - x_i|^(1/(p-1)!)
            for (i, &uv) in u_vars.iter().enumerate() {
                let xi = x_center[i];
                let img: Vec<f64> = sigma
                    .points()
                    .iter()
                    .map(|&av| (av - xi).abs().powf(1.0 / frac_root as f64))
                    .collect();
                let alpha = Alphabet::new(img).map_err(|e| LraError::Model(e.to_string()))?;
                let wv = b.add_variable(VariableIndex::vector("w_u", i, 1), alpha);
                b.forbid_assignments(&[uv, wv], move |vals| {
                    (vals[1] - (vals[0] - xi).abs().powf(1.0 / frac_root as f64)).abs() > 1e-9
                });
                // the paper's polynomial pairing row (x - u)^2 = w^(2 (p-1)!)
                b.add_constraint(LinearConstraint::eq(
                    format!("frac_pair_u{i}"),
                    vec![JuntaTerm::new(1.0, vec![uv, wv], move |vals| {
                        (xi - vals[0]).powi(2) - vals[1].powi(2 * frac_root as i32)
                    })],
                    0.0,
                    1e-9,
                ));
            }
            for (j, &vv) in v_vars.iter().enumerate() {
                let yj = y_center[j];
                let img: Vec<f64> = sigma
                    .points()
                    .iter()
                    .map(|&av| (av - yj).abs().powf(1.0 / frac_root as f64))
                    .collect();
                let alpha = Alphabet::new(img).map_err(|e| LraError::Model(e.to_string()))?;
                let wv = b.add_variable(VariableIndex::vector("w_v", j, 1), alpha);
                b.forbid_assignments(&[vv, wv], move |vals| {
                    (vals[1] - (vals[0] - yj).abs().powf(1.0 / frac_root as f64)).abs() > 1e-9
                });
                b.add_constraint(LinearConstraint::eq(
                    format!("frac_pair_v{j}"),
                    vec![JuntaTerm::new(1.0, vec![vv, wv], move |vals| {
                        (yj - vals[0]).powi(2) - vals[1].powi(2 * frac_root as i32)
                    })],
                    0.0,
                    1e-9,
                ));
            }
            // moment-sum equalities for every 0 <= k <= p
            for kk in 0..=p {
                let terms: Vec<JuntaTerm> = (0..n)
                    .map(|i| {
                        let xi = x_center[i];
                        JuntaTerm::new(1.0, vec![u_vars[i]], move |vals| {
                            xi.powi((p - kk) as i32) * vals[0].powi(kk as i32)
                        })
                    })
                    .collect();
                b.add_constraint(LinearConstraint {
                    name: format!("moment_u_{kk}"),
                    terms,
                    relation: Relation::Eq,
                    rhs: s_u_center[kk as usize],
                    slack: cfg.eq_slack,
                });
                let terms: Vec<JuntaTerm> = (0..m)
                    .map(|j| {
                        let yj = y_center[j];
                        JuntaTerm::new(1.0, vec![v_vars[j]], move |vals| {
                            yj.powi((p - kk) as i32) * vals[0].powi(kk as i32)
                        })
                    })
                    .collect();
                b.add_constraint(LinearConstraint {
                    name: format!("moment_v_{kk}"),
                    terms,
                    relation: Relation::Eq,
                    rhs: s_v_center[kk as usize],
                    slack: cfg.eq_slack,
                });
            }
            // residual norm equalities
            let xc = x_center.clone();
            let terms: Vec<JuntaTerm> = (0..n)
                .map(|i| {
                    let xi = xc[i];
                    JuntaTerm::new(1.0, vec![u_vars[i]], move |vals| (vals[0] - xi).powi(pf))
                })
                .collect();
            b.add_constraint(LinearConstraint {
                name: "residual_u".into(),
                terms,
                relation: Relation::Eq,
                rhs: d_u,
                slack: cfg.eq_slack.max(d_u.abs() * 0.5 + 1e-9),
            });
            let yc = y_center.clone();
            let terms: Vec<JuntaTerm> = (0..m)
                .map(|j| {
                    let yj = yc[j];
                    JuntaTerm::new(1.0, vec![v_vars[j]], move |vals| (vals[0] - yj).powi(pf))
                })
                .collect();
            b.add_constraint(LinearConstraint {
                name: "residual_v".into(),
                terms,
                relation: Relation::Eq,
                rhs: d_v,
                slack: cfg.eq_slack.max(d_v.abs() * 0.5 + 1e-9),
            });
            // Holder-derived inequality rows over the full u-side (and
            // v-side) juntas, with the residual norm pinned to its guess
            if holder_rows_enabled {
                let norm_x_p: f64 = x_center.iter().map(|x| x.abs().powi(pf)).sum();
                let norm_y_p: f64 = y_center.iter().map(|y| y.abs().powi(pf)).sum();
                for q in 1..p {
                    for aa in 0..(p - q) {
                        let e_x = p as f64 * aa as f64 / (p - q) as f64;
                        let e_r = p as f64 * (p - q - aa) as f64 / (p - q) as f64;
                        let outer = 2 * (p - q) as i32;
                        let xc = x_center.clone();
                        let term = JuntaTerm::new(1.0, u_vars.clone(), move |vals| {
                            let s: f64 = vals
                                .iter()
                                .enumerate()
                                .map(|(i, &ui)| {
                                    xc[i].abs().powf(e_x) * (ui - xc[i]).abs().powf(e_r)
                                })
                                .sum();
                            s.powi(outer)
                        });
                        let rhs = norm_x_p.powf(2.0 * aa as f64 / (p - q) as f64 * (p - q) as f64)
                            * d_u.abs().powi(2 * (p - q - aa) as i32);
                        b.add_constraint(LinearConstraint::le(
                            format!("holder_u_q{q}_a{aa}"),
                            vec![term],
                            rhs * (1.0 + 1e-6) + 1e-9,
                        ));
                        let yc = y_center.clone();
                        let term = JuntaTerm::new(1.0, v_vars.clone(), move |vals| {
                            let s: f64 = vals
                                .iter()
                                .enumerate()
                                .map(|(j, &vj)| {
                                    yc[j].abs().powf(e_x) * (vj - yc[j]).abs().powf(e_r)
                                })
                                .sum();
                            s.powi(outer)
                        });
                        let rhs = norm_y_p.powf(2.0 * aa as f64 / (p - q) as f64 * (p - q) as f64)
                            * d_v.abs().powi(2 * (p - q - aa) as i32);
                        b.add_constraint(LinearConstraint::le(
                            format!("holder_v_q{q}_b{aa}"),
                            vec![term],
                            rhs * (1.0 + 1e-6) + 1e-9,
                        ));
                    }
                }
            }
            let mut obj = Vec::with_capacity(n * m);
            for i in 0..n {
                for j in 0..m {
                    let aij = a.get(i, j);
                    obj.push(JuntaTerm::new(1.0, vec![u_vars[i], v_vars[j]], move |vals| {
                        (aij - vals[0] * vals[1]).powi(pf)
                    }));
                }
            }
            b.set_objective(obj, Sense::Minimize);
            for &t in t_set {
                for &uv in &u_vars {
                    b.require_junta(&[uv, v_vars[t]]);
                }
                for &vv in &v_vars {
                    if vv != v_vars[t] {
                        b.require_junta(&[vv, v_vars[t]]);
                    }
                }
            }
            let model = b.build().map_err(|e| LraError::Model(e.to_string()))?;
            let solved = match model.solve(&SimplexOptions::default()) {
                Ok(s) => s,
                Err(SolveError::Infeasible { .. }) | Err(SolveError::IterationLimit) => {
                    infeasible.push(format!("guess {gi} (d_u={d_u:.3}, d_v={d_v:.3}), T={t_set:?}"));
                    continue;
                }
                Err(e) => return Err(LraError::Model(e.to_string())),
            };
            lp_values.push(solved.objective_value);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 7_000 + (gi * 100 + ti) as u64));
            let t_vars: Vec<VarId> = t_set.iter().map(|&t| v_vars[t]).collect();
            let (fam, trace) = solved.family.sample_and_condition(&t_vars, &mut rng)?;
            let rb = round_rank1(a, p, &fam, &u_vars, &v_vars, cfg.rounding_draws, &mut rng)?;
            if best_rounded.map_or(true, |b| rb.value < b) {
                best_rounded = Some(rb.value);
            }
            let trace_str: Vec<(String, f64)> =
                trace.iter().map(|(v, x)| (v.to_string(), *x)).collect();
            if best.as_ref().map_or(true, |b| rb.value < b.0) {
                best = Some((rb.value, rb.u, rb.v, "rounding".into(), gv.clone(), trace_str));
            }
        }
    }

    // additive fallback: run at accuracy eps * C_p with the same seed
    let mut fallback_instance = instance.clone();
    fallback_instance.eps = (instance.eps * cfg.c_p_threshold).clamp(1e-6, 0.999);
    let additive = lra_additive(&fallback_instance, cfg, seed)?;

    let mut final_u = warm.x.clone();
    let mut final_v = warm.y.clone();
    let mut final_val = warm.value;
    let mut source = "warm-start".to_string();
    let mut winning_guess = None;
    let mut conditioning_trace = Vec::new();
    if let Some((val, u, v, _src, gv, trace)) = best {
        if val < final_val {
            final_u = DenseMatrix::column(&u);
            final_v = DenseMatrix::column(&v);
            final_val = val;
            source = "relaxation-rounding".into();
            winning_guess = Some(gv);
            conditioning_trace = trace;
        }
    }
    if additive.value < final_val {
        final_u = additive.u.clone();
        final_v = additive.v.clone();
        final_val = additive.value;
        source = "additive-fallback".into();
        winning_guess = additive.winning_guess.clone();
        conditioning_trace = additive.conditioning_trace.clone();
    }

    Ok(LraOutcome {
        u: final_u,
        v: final_v,
        value: final_val,
        best_source: source,
        best_rounded_value: best_rounded,
        warm_value: warm.value,
        warm_provenance: warm.provenance,
        oracle_value: Some(oracle.opt_value),
        oracle_exhaustive: Some(oracle.exhaustive),
        guesses_tried,
        winning_guess,
        conditioning_trace,
        infeasible_guesses: infeasible,
        lp_values,
        non_exhaustive: !oracle.exhaustive || !holder_rows_enabled,
        seed,
    })
}

/// One term of the residual expansion of the objective around the warm
/// start: sum_ij (A_ij - x_i y_j)^q x_i^a (x_i - u_i)^(p-q-a)
///                y_j^b (y_j - v_j)^(p-q-b),
/// evaluated as a pseudo-expectation under the joint pairwise tables and
/// under the product of the one-wise marginals.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionTerm {
    pub q: u32,
    pub a_exp: u32,
    pub b_exp: u32,
    pub joint: f64,
    pub product: f64,
    pub gap: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn residual_decomposition_terms(
    a: &DenseMatrix,
    x: &[f64],
    y: &[f64],
    family: &LocalDistributionFamily,
    u_vars: &[VarId],
    v_vars: &[VarId],
    p: u32,
    q: u32,
    a_exp: u32,
    b_exp: u32,
) -> Result<DecompositionTerm, LraError> {
    if !(1 <= q && q < p) {
        return Err(LraError::BadInstance(format!("need 1 <= q < p, got q={q}, p={p}")));
    }
    if a_exp + b_exp > p - q {
        return Err(LraError::BadInstance(format!(
            "need a + b <= p - q, got a={a_exp}, b={b_exp}, p-q={}",
            p - q
        )));
    }
    let ru = (p - q - a_exp) as i32;
    let rv = (p - q - b_exp) as i32;
    let mut joint = 0.0;
    let mut product = 0.0;
    for (i, &uv) in u_vars.iter().enumerate() {
        let xi = x[i];
        let f_i = move |u: f64| (xi - u).powi(ru);
        let ef = family.pseudo_expectation(&JuntaTerm::new(1.0, vec![uv], move |vals| f_i(vals[0])))?;
        for (j, &vv) in v_vars.iter().enumerate() {
            let yj = y[j];
            let coeff = (a.get(i, j) - xi * yj).powi(q as i32)
                * xi.powi(a_exp as i32)
                * yj.powi(b_exp as i32);
            let g_j = move |v: f64| (yj - v).powi(rv);
            let eg =
                family.pseudo_expectation(&JuntaTerm::new(1.0, vec![vv], move |vals| g_j(vals[0])))?;
            let ejoint = if ru == 0 || rv == 0 {
                ef * eg
            } else {
                let (lo, hi, swap) = if uv < vv { (uv, vv, false) } else { (vv, uv, true) };
                family.pseudo_expectation(&JuntaTerm::new(1.0, vec![lo, hi], move |vals| {
                    let (u, v) = if swap { (vals[1], vals[0]) } else { (vals[0], vals[1]) };
                    f_i(u) * g_j(v)
                }))?
            };
            joint += coeff * ejoint;
            product += coeff * ef * eg;
        }
    }
    Ok(DecompositionTerm { q, a_exp, b_exp, joint, product, gap: joint - product })
}

/// Uniform row-sampling sketch with poly(k, 1/eps) rows; when the target
/// row count reaches n the sketch is a full permutation (covering every
/// row exactly once, so norms are reproduced exactly). No distortion
/// guarantee is claimed; this is an exploratory device.
pub fn sketch_sample(n: usize, k: usize, _p: u32, eps: f64, seed: u64) -> DenseMatrix {
    let target = ((k as f64 / eps.max(1e-6)).powi(2).ceil() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if target >= n {
        // sample without replacement covering all rows: a permutation
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        return DenseMatrix::from_fn(n, n, |r, c| if order[r] == c { 1.0 } else { 0.0 });
    }
    let rows: Vec<usize> = (0..target).map(|_| rng.gen_range(0..n)).collect();
    DenseMatrix::from_fn(target, n, |r, c| if rows[r] == c { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_instance() -> LraInstance {
        let a = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        LraInstance::new(a, 4, 1, 0.25, 4).unwrap()
    }

    fn tiny_cfg() -> LraConfig {
        LraConfig {
            oracle_grid: Some(GridSpec::new(-1.0, 1.0, 0.5).unwrap()),
            sigma_grid: Some(GridSpec::new(-1.0, 1.0, 1.0).unwrap()),
            guess_window: 1,
            max_conditioning: 1,
            rounding_draws: 3,
            ..LraConfig::default()
        }
    }

    #[test]
    fn instance_validation() {
        let a = DenseMatrix::new(1, 2, vec![1.0, 0.5]).unwrap();
        assert!(LraInstance::new(a, 4, 1, 0.5, 4).is_err(), "non-integer entries rejected");
        let a = DenseMatrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(LraInstance::new(a.clone(), 3, 1, 0.5, 4).is_err(), "odd p rejected");
        assert!(LraInstance::new(a.clone(), 4, 1, 1.5, 4).is_err(), "eps out of range");
        assert!(LraInstance::new(a, 4, 0, 0.5, 4).is_err(), "k = 0 rejected");
    }

    #[test]
    fn objective_examples() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = DenseMatrix::zeros(2, 1);
        // zero factors give the full norm power
        assert_eq!(objective(&a, &z, &z, 4).unwrap(), 354.0);
        // exact factorization gives zero
        let u = DenseMatrix::column(&[1.0, 2.0]);
        let v = DenseMatrix::column(&[3.0, -1.0]);
        let prod = u.matmul(&v.transpose()).unwrap();
        assert_eq!(objective(&prod, &u, &v, 4).unwrap(), 0.0);
        // dimension mismatch
        let bad = DenseMatrix::zeros(3, 1);
        assert!(objective(&a, &bad, &z, 4).is_err());
    }

    #[test]
    fn warm_start_rank1_exact() {
        let u = [1.0, 2.0];
        let v = [1.0, -1.0];
        let a = DenseMatrix::outer(&u, &v);
        let inst = LraInstance::new(a, 4, 1, 0.5, 4).unwrap();
        let cfg = LraConfig {
            oracle_grid: Some(GridSpec::new(-2.0, 2.0, 0.5).unwrap()),
            ..LraConfig::default()
        };
        let ws = warm_start(&inst, &cfg).unwrap();
        assert!(ws.value <= 1e-12);
        assert_eq!(ws.provenance, Provenance::Oracle);
        assert!((ws.approx_factor_estimate - 1.0).abs() <= 1e-9);
        // balanced rescale
        assert!((ws.x.frobenius_sq() - ws.y.frobenius_sq()).abs() <= 1e-9);
    }

    #[test]
    fn warm_start_zero_matrix() {
        let inst = LraInstance::new(DenseMatrix::zeros(2, 3), 4, 1, 0.5, 1).unwrap();
        let ws = warm_start(&inst, &LraConfig::default()).unwrap();
        assert_eq!(ws.value, 0.0);
        assert!(ws.x.is_zero() && ws.y.is_zero());
    }

    #[test]
    fn additive_runs_and_respects_warm_start() {
        let inst = small_instance();
        let cfg = tiny_cfg();
        let out = lra_additive(&inst, &cfg, 7).unwrap();
        assert!(out.value <= out.warm_value + 1e-9, "monotone best-so-far");
        // independent enumeration over the oracle grid
        let pts = cfg.oracle_grid.as_ref().unwrap().points();
        let mut expected = f64::INFINITY;
        for &u0 in &pts {
            for &u1 in &pts {
                for &v0 in &pts {
                    for &v1 in &pts {
                        let obj = numerics::rank1_objective(&inst.a, &[u0, u1], &[v0, v1], 4);
                        expected = expected.min(obj);
                    }
                }
            }
        }
        assert_eq!(out.oracle_value, Some(expected));
        assert!(out.value <= expected + 1e-9);
    }

    #[test]
    fn additive_zero_input_short_circuits() {
        let inst = LraInstance::new(DenseMatrix::zeros(2, 2), 4, 1, 0.25, 1).unwrap();
        let out = lra_additive(&inst, &LraConfig::default(), 3).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.best_source, "zero-input");
    }

    #[test]
    fn ptas_rank1_early_exit_is_exact() {
        let a = DenseMatrix::outer(&[2.0, -1.0, 1.0], &[1.0, 2.0]);
        let inst = LraInstance::new(a, 4, 1, 0.5, 4).unwrap();
        let out = lra_ptas_rank1(&inst, &tiny_cfg(), 5).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.best_source, "rank1-early-exit");
    }

    #[test]
    fn ptas_rank1_p2_routes_to_svd() {
        let a = DenseMatrix::new(2, 2, vec![2.0, 0.0, 0.0, 1.0]).unwrap();
        let inst = LraInstance::new(a, 2, 1, 0.5, 4).unwrap();
        let out = lra_ptas_rank1(&inst, &tiny_cfg(), 5).unwrap();
        assert_eq!(out.best_source, "svd-exact");
        assert!((out.value - 1.0).abs() <= 1e-9, "sigma_2^2 = 1");
    }

    #[test]
    fn ptas_rank1_never_worse_than_additive() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let inst = LraInstance::new(a, 4, 1, 0.5, 4).unwrap();
        let cfg = tiny_cfg();
        let seed = 11;
        let ptas = lra_ptas_rank1(&inst, &cfg, seed).unwrap();
        let mut fb = inst.clone();
        fb.eps = (inst.eps * cfg.c_p_threshold).clamp(1e-6, 0.999);
        let additive = lra_additive(&fb, &cfg, seed).unwrap();
        assert!(ptas.value <= additive.value + 1e-9);
    }
}
