//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Calibrated constants come from the checked-in
//! ledger and are asserted on fresh seeds.

use gcround::constants::{
    load_default, random_integer_matrices, random_joint2_corpus, random_multi_joint,
};
use gcround::exec::ExecMode;
use gcround::lra::{
    self, balance_residuals_with, polar_alignment, polar_orthogonality_residual, LraConfig,
    LraInstance,
};
use gcround::numerics::{
    entrywise_p_norm_pow, lra_bruteforce, DenseMatrix, GridSpec,
};
use gcround::pinning::counterexample::{
    counterexample_experiment, default_counterexample_tail, heavy_pair_corpus_joint,
};
use gcround::pinning::procedures::{
    avg_pairwise_tv, mutual_information, pair_tv, pin_discrete_tv, pin_truncation, PinConfig,
};
use gcround::pinning::{
    asymmetric_decrease_check, bregman_decrease_check, three_point_residual,
    variance_reduction_check, BregmanSpec, DiscreteJoint,
};
use gcround::pqnorm::{holder_upper, pq_additive, pq_oracle, PqConfig, PqInstance};
use gcround::pseudodist::model::{LinearConstraint, ModelBuilder, Relation, Sense};
use gcround::pseudodist::simplex::SimplexOptions;
use gcround::pseudodist::{Alphabet, JuntaTerm, LocalDistributionFamily, VariableIndex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FRESH: u64 = 0x5EED_2026;

fn pass(criterion: u32, detail: &str) {
    println!("ACCEPTANCE {criterion}: PASS - {detail}");
}

// 1. Variance-reduction inequality with the exact 1/4 constant.
#[test]
fn criterion_01_variance_reduction() {
    let corpus = random_joint2_corpus(FRESH ^ 1, 10_000, 4);
    let mut worst = f64::INFINITY;
    for j in &corpus {
        let chk = variance_reduction_check(j);
        assert!(chk.lhs >= chk.rhs - 1e-9, "lhs {} rhs {}", chk.lhs, chk.rhs);
        worst = worst.min(chk.lhs - chk.rhs);
    }
    pass(1, &format!("10^4 joints, min(lhs - rhs) = {worst:.3e} >= -1e-9"));
}

// 2. Bregman structure: three-point identity and the variance special case.
#[test]
fn criterion_02_bregman_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(FRESH ^ 2);
    let mut max_resid = 0.0f64;
    for p in [2u32, 4, 6] {
        let spec = BregmanSpec::standard(p).unwrap();
        for _ in 0..10_000 {
            let x = rng.gen_range(-3.0..3.0);
            let y = rng.gen_range(-3.0..3.0);
            let z = rng.gen_range(-3.0..3.0);
            let r = three_point_residual(&spec, x, y, z).abs();
            max_resid = max_resid.max(r);
            assert!(r <= 1e-9, "p={p} residual {r}");
        }
    }
    let b2 = BregmanSpec::standard(2).unwrap();
    let mut max_dev = 0.0f64;
    for i in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(FRESH ^ 0x200 ^ i);
        let side = rng.gen_range(2..6);
        let vals: Vec<f64> = (0..side).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut probs: Vec<f64> = (0..side).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        let dist: Vec<(f64, f64)> = vals.iter().copied().zip(probs.iter().copied()).collect();
        let mean: f64 = dist.iter().map(|(v, p)| v * p).sum();
        let var: f64 = dist.iter().map(|(v, p)| p * (v - mean) * (v - mean)).sum();
        let dev = (b2.uncertainty(&dist) - var / 2.0).abs();
        max_dev = max_dev.max(dev);
        assert!(dev <= 1e-12, "phi(2) vs Var/2 deviation {dev}");
    }
    pass(2, &format!("three-point residual <= {max_resid:.3e}, phi2 = Var/2 within {max_dev:.3e}"));
}

// 3. Potential-decrease lemmas against the ledger constants, fresh seeds.
#[test]
fn criterion_03_decrease_lemmas() {
    let ledger = load_default();
    let c_breg = ledger.get("bregman_decrease_min_ratio_p4").expect("ledger entry");
    let c44 = ledger.get("asymmetric_decrease_min_ratio_p4_q4").expect("ledger entry");
    let c46 = ledger.get("asymmetric_decrease_min_ratio_p4_q6").expect("ledger entry");
    let corpus = random_joint2_corpus(FRESH ^ 3, 1000, 4);
    let mut min_breg = f64::INFINITY;
    let mut min_44 = f64::INFINITY;
    let mut min_46 = f64::INFINITY;
    for j in &corpus {
        let b = bregman_decrease_check(j, 4).unwrap();
        assert!(b.lhs >= -1e-10, "lhs nonnegative");
        if b.rhs_core > 1e-12 {
            min_breg = min_breg.min(b.ratio);
        }
        let a44 = asymmetric_decrease_check(j, 4, 4).unwrap();
        assert!(a44.lhs >= -1e-10);
        if a44.rhs_core > 1e-12 {
            min_44 = min_44.min(a44.ratio);
        }
        let a46 = asymmetric_decrease_check(j, 4, 6).unwrap();
        assert!(a46.lhs >= -1e-10);
        if a46.rhs_core > 1e-12 {
            min_46 = min_46.min(a46.ratio);
        }
    }
    assert!(min_breg >= c_breg, "bregman p4: {min_breg} < ledger {c_breg}");
    assert!(min_44 >= c44, "asymmetric (4,4): {min_44} < ledger {c44}");
    assert!(min_46 >= c46, "asymmetric (4,6): {min_46} < ledger {c46}");
    pass(3, &format!(
        "min ratios {min_breg:.3} / {min_44:.3} / {min_46:.3} vs ledger {c_breg:.3} / {c44:.3} / {c46:.3}"
    ));
}

// 4. Truncation pinning with the explicit constant 7 and exponent (q-1)/2.
#[test]
fn criterion_04_truncation_pinning() {
    let q = 4.0 / 3.0;
    let cfg = PinConfig::default();
    let mut checked = 0;
    let mut best_ts = Vec::new();
    for i in 0..50u64 {
        let joint = heavy_pair_corpus_joint(FRESH ^ 0x400 ^ i, 32, 5, 1e4).unwrap();
        for m in [9usize, 16, 25] {
            let rep = pin_truncation(&joint, q, m, FRESH ^ i ^ m as u64, &cfg, 400).unwrap();
            assert!(
                rep.bound.holds,
                "joint {i}, m {m}: lhs {} vs rhs {}",
                rep.bound.lhs,
                rep.bound.rhs
            );
            checked += 1;
            best_ts.push(rep.best_s);
        }
    }
    let max_t = best_ts.iter().max().copied().unwrap_or(0);
    pass(4, &format!("{checked} joint/m pairs hold with constant 7 (largest accepted t = {max_t})"));
}

// 5. The paired heavy-tailed family separates the one-wise bound from the
// pairwise bound: 100x violation of the former while the latter stays
// sound within a factor 10.
#[test]
fn criterion_05_counterexample_separation() {
    let rep = counterexample_experiment(64, 3, &default_counterexample_tail(), 1e6, 0.1).unwrap();
    assert!(rep.ratio_dream >= 100.0, "dream ratio {}", rep.ratio_dream);
    assert!(rep.ratio_heavy <= 10.0, "pairwise bound violated: {}", rep.ratio_heavy);
    pass(5, &format!(
        "lhs/dream = {:.1} >= 100, lhs/pairwise = {:.3e} <= 10 (n=64, truncation 1e6, pinned {})",
        rep.ratio_dream, rep.ratio_heavy, rep.pinned
    ));
}

// 6. Discrete pinning: per-pair Pinsker bound and a sign test that the
// conditioning trajectories do not trend upward.
#[test]
fn criterion_06_discrete_pinning() {
    let corpus = random_joint2_corpus(FRESH ^ 6, 10_000, 3);
    let mut max_violation = f64::NEG_INFINITY;
    for j in &corpus {
        let tv = pair_tv(j, 0, 1);
        let info = mutual_information(j, 0, 1);
        let v = tv * tv - 0.5 * info;
        max_violation = max_violation.max(v);
        assert!(v <= 1e-9, "Pinsker violated: tv^2 - I/2 = {v}");
    }
    // paired sign test over 200 conditioning trajectories
    let joint = random_multi_joint(FRESH ^ 0x600, 6, 48);
    let steps = 3usize;
    let mut increases = vec![0u32; steps];
    let mut decreases = vec![0u32; steps];
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(FRESH ^ 0x601 ^ seed);
        let mut current = joint.clone();
        let mut unpinned: Vec<usize> = (0..joint.n).collect();
        let mut prev = avg_pairwise_tv(&current);
        for step in increases.iter_mut().zip(decreases.iter_mut()).take(steps) {
            let pick = unpinned[rng.gen_range(0..unpinned.len())];
            let marg = current.marginal(pick);
            let mut draw = rng.gen::<f64>();
            let mut value = marg.last().unwrap().0;
            for (v, p) in &marg {
                if draw < *p {
                    value = *v;
                    break;
                }
                draw -= p;
            }
            current = current.condition_on(&[(pick, value)]).unwrap();
            unpinned.retain(|&v| v != pick);
            let cur = avg_pairwise_tv(&current);
            if cur > prev + 1e-12 {
                *step.0 += 1;
            } else if cur < prev - 1e-12 {
                *step.1 += 1;
            }
            prev = cur;
        }
    }
    // binomial upper tail at fair coin: the expectation-decrease hypothesis
    // survives when observed increases are not significantly dominant
    for s in 0..steps {
        let n = increases[s] + decreases[s];
        if n == 0 {
            continue;
        }
        let p_val = binom_upper_tail(n, increases[s]);
        assert!(
            p_val > 0.01,
            "step {s}: {} increases vs {} decreases (p = {p_val:.4})",
            increases[s],
            decreases[s]
        );
    }
    pass(6, &format!(
        "Pinsker slack max {max_violation:.3e}; sign test counts {:?} up vs {:?} down",
        increases, decreases
    ));
}

fn binom_upper_tail(n: u32, k: u32) -> f64 {
    // P(Binom(n, 1/2) >= k)
    let mut total = 0.0f64;
    let mut log_c = 0.0f64; // log C(n, 0)
    let ln2 = (2.0f64).ln();
    let mut tail = 0.0;
    for i in 0..=n {
        if i > 0 {
            log_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        let p = (log_c - n as f64 * ln2).exp();
        total += p;
        if i >= k {
            tail += p;
        }
    }
    tail / total.max(1e-12)
}

fn fresh_matrices(seed: u64, count: usize) -> Vec<DenseMatrix> {
    random_integer_matrices(seed, count, 3, 3)
}

fn lra_cfg() -> LraConfig {
    LraConfig {
        oracle_grid: Some(GridSpec::new(-2.0, 2.0, 0.5).unwrap()),
        sigma_grid: Some(GridSpec::new(-2.0, 2.0, 1.0).unwrap()),
        guess_window: 1,
        max_conditioning: 1,
        rounding_draws: 3,
        exec: ExecMode::Parallel,
        ..LraConfig::default()
    }
}

// 7. Additive scheme meets OPT + eps ||A||_p^p against the exhaustive oracle.
#[test]
fn criterion_07_lra_additive() {
    let mats = fresh_matrices(FRESH ^ 7, 25);
    let cfg = lra_cfg();
    let eps = 0.25;
    let mut worst_slack = f64::INFINITY;
    for (i, a) in mats.iter().enumerate() {
        let norm_pow = entrywise_p_norm_pow(a, 4).unwrap();
        let inst = LraInstance::new(a.clone(), 4, 1, eps, 4).unwrap();
        let out = lra::lra_additive(&inst, &cfg, FRESH ^ i as u64).unwrap();
        let oracle = out.oracle_value.expect("oracle ran");
        assert_eq!(out.oracle_exhaustive, Some(true));
        let bound = oracle + eps * norm_pow;
        assert!(
            out.value <= bound + 1e-9,
            "instance {i}: value {} > {} (oracle {oracle})",
            out.value,
            bound
        );
        worst_slack = worst_slack.min(bound - out.value);
    }
    pass(7, &format!("25 instances within OPT + eps*norm (min slack {worst_slack:.3e})"));
}

// 8. Rank-1 multiplicative scheme: within 1.5x of the oracle; exact on
// rank-1 inputs.
#[test]
fn criterion_08_lra_rank1() {
    let cfg = lra_cfg();
    let eps = 0.5;
    let mats = fresh_matrices(FRESH ^ 8, 25);
    for (i, a) in mats.iter().enumerate() {
        let inst = LraInstance::new(a.clone(), 4, 1, eps, 4).unwrap();
        let out = lra::lra_ptas_rank1(&inst, &cfg, FRESH ^ 0x800 ^ i as u64).unwrap();
        let oracle = out.oracle_value.expect("oracle ran");
        assert!(
            out.value <= (1.0 + eps) * oracle + 1e-6,
            "instance {i}: {} vs 1.5 * {oracle}",
            out.value
        );
    }
    // constructed rank-1 integer inputs: exact output
    let mut rng = ChaCha8Rng::seed_from_u64(FRESH ^ 0x801);
    for _ in 0..5 {
        let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-2i32..=2) as f64).collect();
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-2i32..=2) as f64).collect();
        let a = DenseMatrix::outer(&u, &v);
        let inst = LraInstance::new(a, 4, 1, eps, 4).unwrap();
        let out = lra::lra_ptas_rank1(&inst, &cfg, 3).unwrap();
        assert_eq!(out.value, 0.0, "rank-1 input must be solved exactly");
    }
    pass(8, "25 instances within 1.5x oracle; 5 rank-1 inputs exact");
}

// 9. Polar alignment, the l2 constant-4 inequality, and residual balancing.
#[test]
fn criterion_09_identifiability_and_balancing() {
    let mut rng = ChaCha8Rng::seed_from_u64(FRESH ^ 9);
    let mut tested = 0;
    while tested < 1000 {
        let k = if tested % 2 == 0 { 2 } else { 3 };
        let x = DenseMatrix::from_fn(6, k, |_, _| rng.gen_range(-2.0..2.0));
        let u = DenseMatrix::from_fn(6, k, |_, _| rng.gen_range(-2.0..2.0));
        let y = DenseMatrix::from_fn(5, k, |_, _| rng.gen_range(-2.0..2.0));
        let v = DenseMatrix::from_fn(5, k, |_, _| rng.gen_range(-2.0..2.0));
        let Ok((m, m_inv)) = polar_alignment(&x, &u) else { continue };
        let scale = u.frobenius_sq() + x.matmul(&m).unwrap().frobenius_sq();
        let res = polar_orthogonality_residual(&x, &u, &m).unwrap();
        assert!(res <= 1e-8 * scale.max(1.0), "orthogonality residual {res}");
        let xm = x.matmul(&m).unwrap();
        let ymt = y.matmul(&m_inv.transpose()).unwrap();
        let t1 = u.add(&xm).unwrap().matmul(&v.sub(&ymt).unwrap().transpose()).unwrap();
        let t2 = u.sub(&xm).unwrap().matmul(&v.add(&ymt).unwrap().transpose()).unwrap();
        let rhs = u
            .matmul(&v.transpose())
            .unwrap()
            .sub(&x.matmul(&y.transpose()).unwrap())
            .unwrap();
        assert!(
            t1.frobenius_sq() + t2.frobenius_sq() <= 4.0 * rhs.frobenius_sq() + 1e-6,
            "constant-4 inequality"
        );
        tested += 1;
    }
    let mut balanced = 0;
    let mut trial = 0u64;
    while balanced < 1000 {
        let p = if balanced % 2 == 0 { 2.0 } else { 4.0 };
        let f = DenseMatrix::from_fn(6, 2, |_, _| rng.gen_range(-2.0..2.0));
        let g = DenseMatrix::from_fn(7, 2, |_, _| rng.gen_range(-2.0..2.0));
        trial += 1;
        let Ok(b) = balance_residuals_with(&f, &g, p, FRESH ^ trial, 6) else { continue };
        assert!(b.holds, "balancing equality/bound failed: {b:?}");
        balanced += 1;
    }
    pass(9, "1000 polar quadruples (k in {2,3}) and 1000 balanced pairs (p in {2,4})");
}

// 10. Rank-k multiplicative scheme at k = 2, plus the k = 1 trace identity.
#[test]
fn criterion_10_lra_rank_k() {
    let cfg = LraConfig {
        oracle_grid: Some(GridSpec::new(-2.0, 2.0, 1.0).unwrap()),
        sigma_grid: Some(GridSpec::new(-2.0, 2.0, 2.0).unwrap()),
        rounding_draws: 2,
        max_conditioning: 0,
        exec: ExecMode::Parallel,
        ..LraConfig::default()
    };
    let eps = 0.5;
    let mats = fresh_matrices(FRESH ^ 10, 10);
    for (i, a) in mats.iter().enumerate() {
        let inst = LraInstance::new(a.clone(), 4, 2, eps, 4).unwrap();
        let out = lra::lra_ptas_rank_k(&inst, &cfg, FRESH ^ 0xA00 ^ i as u64).unwrap();
        let oracle = out.oracle_value.expect("oracle ran");
        assert!(
            out.value <= (1.0 + eps) * oracle + 1e-6,
            "instance {i}: {} vs 1.5 * {oracle}",
            out.value
        );
    }
    // k = 1 path matches the rank-1 scheme trace under a shared seed
    let a = DenseMatrix::new(3, 3, vec![1.0, -2.0, 0.0, 2.0, 1.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
    let inst = LraInstance::new(a, 4, 1, eps, 4).unwrap();
    let k_cfg = lra_cfg();
    let via_k = lra::lra_ptas_rank_k(&inst, &k_cfg, 42).unwrap();
    let direct = lra::lra_ptas_rank1(&inst, &k_cfg, 42).unwrap();
    assert_eq!(via_k.conditioning_trace, direct.conditioning_trace);
    assert_eq!(via_k.value, direct.value);
    pass(10, "10 rank-2 instances within 1.5x oracle; k=1 trace identical to the rank-1 scheme");
}

// 11. p->q additive approximation: two-sided sandwich against the oracle.
#[test]
fn criterion_11_pq_additive() {
    let mats = fresh_matrices(FRESH ^ 11, 25);
    let cfg = PqConfig::default();
    let eps = 0.3;
    let mut worst_gap = 0.0f64;
    for (i, a) in mats.iter().enumerate() {
        let holder = holder_upper(a, 4.0 / 3.0, 4.0);
        if holder == 0.0 {
            continue;
        }
        let inst = PqInstance::new(a.clone(), 4.0 / 3.0, 4, eps).unwrap();
        let (w, _out) = pq_additive(&inst, &cfg, FRESH ^ 0xB00 ^ i as u64).unwrap();
        let oracle = pq_oracle(&inst, &cfg).unwrap();
        let orc_qth = oracle.value.powi(4);
        // feasibility side (holds on every instance, exhaustive or not)
        assert!(
            w.lower_bound_qth <= orc_qth + 1e-6,
            "instance {i}: witness {} above oracle {orc_qth}",
            w.lower_bound_qth
        );
        // additive side
        let slack = eps * holder;
        assert!(
            orc_qth <= w.lower_bound_qth + slack + 1e-9,
            "instance {i}: oracle {orc_qth} vs witness {} + {slack}",
            w.lower_bound_qth
        );
        worst_gap = worst_gap.max((orc_qth - w.lower_bound_qth) / holder.max(1e-12));
    }
    pass(11, &format!("25 instances sandwiched; worst oracle-witness gap = {worst_gap:.3} * holder"));
}

// 12. Engine invariants on 200 solved families: consistency, pseudo-Holder,
// and conditioning preserving linear equalities in expectation.
#[test]
fn criterion_12_engine_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(FRESH ^ 12);
    let mut families = 0;
    while families < 200 {
        let nvars = rng.gen_range(2..=3);
        let degree = rng.gen_range(2..=nvars.max(2));
        // a random true distribution supplies feasible moment constraints
        let alphabets: Vec<Vec<f64>> = (0..nvars)
            .map(|_| {
                let side = rng.gen_range(2..=3);
                let mut pts: Vec<f64> = (0..side).map(|_| rng.gen_range(-1.5..1.5f64)).collect();
                pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                pts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                pts
            })
            .collect();
        if alphabets.iter().any(|a| a.len() < 2) {
            continue;
        }
        let mut cells = Vec::new();
        let mut build_cells = vec![Vec::new()];
        for alpha in &alphabets {
            let mut next = Vec::new();
            for prefix in &build_cells {
                for &v in alpha {
                    let mut c: Vec<f64> = prefix.clone();
                    c.push(v);
                    next.push(c);
                }
            }
            build_cells = next;
        }
        let mut probs: Vec<f64> = (0..build_cells.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        for (c, p) in build_cells.iter().zip(&probs) {
            cells.push((c.clone(), *p));
        }
        // target moments from the true distribution
        let mean = |v: usize| -> f64 { cells.iter().map(|(c, p)| p * c[v]).sum() };

        let mut b = ModelBuilder::new(degree);
        let vars: Vec<_> = (0..nvars)
            .map(|v| {
                b.add_variable(
                    VariableIndex::scalar("x", v),
                    Alphabet::new(alphabets[v].clone()).unwrap(),
                )
            })
            .collect();
        for &v in &vars {
            b.add_constraint(LinearConstraint {
                name: format!("mean_{v}"),
                terms: vec![JuntaTerm::monomial(1.0, vec![(v, 1)])],
                relation: Relation::Eq,
                rhs: mean(v),
                slack: 0.0,
            });
        }
        let obj_var = vars[rng.gen_range(0..vars.len())];
        let other = vars[(obj_var + 1) % vars.len()];
        let obj = if degree >= 2 && obj_var != other {
            JuntaTerm::monomial(1.0, vec![(obj_var, 1), (other, 1)])
        } else {
            JuntaTerm::monomial(1.0, vec![(obj_var, 2)])
        };
        b.set_objective(vec![obj], Sense::Maximize);
        let model = match b.build() {
            Ok(m) => m,
            Err(_) => continue,
        };
        let solved = match model.solve(&SimplexOptions::default()) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let fam: &LocalDistributionFamily = &solved.family;
        // consistency
        let rep = fam.check_feasibility();
        assert!(rep.ok(1e-9), "family infeasible: {rep:?}");
        // pseudo-Holder on a shared junta: E[f^(t-1) g] <= E[f^t]^((t-1)/t) E[g^t]^(1/t)
        for t in [2u32, 4] {
            let v0 = vars[0];
            let a0 = rng.gen_range(-1.0..1.0);
            let b0 = rng.gen_range(-1.0..1.0);
            let f2 = move |x: f64| (x - a0).abs() + 0.1;
            let g2 = move |x: f64| (x - b0).abs() + 0.1;
            let e_mix = fam
                .pseudo_expectation(&JuntaTerm::new(1.0, vec![v0], move |vals| {
                    f2(vals[0]).powi((t - 1) as i32) * g2(vals[0])
                }))
                .unwrap();
            let e_f = fam
                .pseudo_expectation(&JuntaTerm::new(1.0, vec![v0], move |vals| {
                    f2(vals[0]).powi(t as i32)
                }))
                .unwrap();
            let e_g = fam
                .pseudo_expectation(&JuntaTerm::new(1.0, vec![v0], move |vals| {
                    g2(vals[0]).powi(t as i32)
                }))
                .unwrap();
            let tf = t as f64;
            assert!(
                e_mix <= e_f.powf((tf - 1.0) / tf) * e_g.powf(1.0 / tf) + 1e-6,
                "pseudo-Holder violated"
            );
        }
        // conditioning preserves equality constraints in expectation
        let cond_var = vars[rng.gen_range(0..vars.len())];
        let watch = vars[(cond_var + 1) % vars.len()];
        let base = fam
            .pseudo_expectation(&JuntaTerm::monomial(1.0, vec![(watch, 1)]))
            .unwrap();
        let marg = fam.marginal(cond_var).unwrap();
        let pts = fam.alphabet(cond_var).points().to_vec();
        let mut averaged = 0.0;
        let mut used = 0.0;
        for (d, &pr) in marg.iter().enumerate() {
            if pr < 1e-9 {
                continue;
            }
            if watch == cond_var {
                averaged += pr * pts[d];
            } else {
                let cond = fam.condition(cond_var, pts[d]).unwrap();
                averaged += pr
                    * cond
                        .pseudo_expectation(&JuntaTerm::monomial(1.0, vec![(watch, 1)]))
                        .unwrap();
            }
            used += pr;
        }
        assert!(
            (averaged / used.max(1e-12) - base).abs() <= 1e-6,
            "law of total pseudo-expectation violated: {averaged} vs {base}"
        );
        families += 1;
    }
    pass(12, "200 solved families pass consistency, pseudo-Holder, and conditioning suites");
}

// 13. Replay determinism: 20 records replay byte-identically.
#[test]
fn criterion_13_replay_determinism() {
    use gcround::cli::{
        replay_record, run_lra, run_oracle, run_pinning, run_pqnorm, LraArgs, LraMode, OracleArgs,
        PinLemma, PinningArgs, PqArgs,
    };
    let ledger = load_default();
    let mats = fresh_matrices(FRESH ^ 13, 4);
    let mut records = Vec::new();
    for (i, a) in mats.iter().enumerate() {
        let csv = gcround::io::matrix_to_csv(a).into_bytes();
        let args = LraArgs {
            input: csv.clone(),
            mode: if i % 2 == 0 { LraMode::Additive } else { LraMode::Ptas1 },
            p: 4,
            k: 1,
            eps: 0.3,
            bitcap: 4,
            seed: FRESH ^ i as u64,
            oracle_grid: Some(GridSpec::new(-2.0, 2.0, 1.0).unwrap()),
            sigma_grid: Some(GridSpec::new(-2.0, 2.0, 2.0).unwrap()),
            max_conditioning: Some(1),
            budget: None,
        };
        let out = run_lra(&args, &ledger).unwrap();
        records.push((out.record, Some(csv)));
    }
    for (i, a) in mats.iter().enumerate() {
        let csv = gcround::io::matrix_to_csv(a).into_bytes();
        let args = PqArgs {
            input: csv.clone(),
            p: 4.0 / 3.0,
            q: 4,
            eps: 0.3,
            seed: FRESH ^ 0xD00 ^ i as u64,
            sigma_fineness: Some(0.25),
            max_conditioning: Some(1),
            budget: None,
        };
        let out = run_pqnorm(&args, &ledger).unwrap();
        records.push((out.record, Some(csv)));
    }
    for (i, lemma) in [
        PinLemma::Variance,
        PinLemma::Heavy,
        PinLemma::Truncation,
        PinLemma::DiscreteTv,
        PinLemma::Counterexample,
    ]
    .iter()
    .enumerate()
    {
        for rep in 0..2u64 {
            let args = PinningArgs {
                input: None,
                lemma: *lemma,
                n: 8,
                t: 2,
                q: 4.0 / 3.0,
                m: 4,
                truncation: 1e6,
                seed: FRESH ^ 0xE00 ^ (i as u64 * 10 + rep),
                heavy_p: 3,
            };
            let out = run_pinning(&args, &ledger).unwrap();
            records.push((out.record, None));
        }
    }
    for (i, a) in mats.iter().take(2).enumerate() {
        let csv = gcround::io::matrix_to_csv(a).into_bytes();
        let args = OracleArgs {
            input: csv.clone(),
            kind: if i == 0 { "lra".into() } else { "pq".into() },
            p: if i == 0 { 4.0 } else { 4.0 / 3.0 },
            q: 4.0,
            k: 1,
            grid: GridSpec::new(-1.0, 1.0, 0.5).unwrap(),
            budget: 10_000_000,
        };
        let out = run_oracle(&args, &ledger).unwrap();
        records.push((out.record, Some(csv)));
    }
    assert!(records.len() >= 20, "need at least 20 records, have {}", records.len());
    for (i, (record, input)) in records.iter().enumerate() {
        let replayed = replay_record(record, input.as_deref(), &ledger).unwrap();
        assert_eq!(
            serde_json::to_vec(&replayed).unwrap(),
            record.payload_bytes(),
            "record {i} ({}) is not byte-identical on replay",
            record.command
        );
    }
    pass(13, &format!("{} records replayed byte-identically", records.len()));
}
