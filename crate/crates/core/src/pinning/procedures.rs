//! The pinning procedures: estimate how fast conditioning on a few random
//! coordinates kills average pairwise covariance (or total variation), and
//! compare against the potential-driven bounds.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BregmanSpec, DiscreteJoint, PinningError};

/// One conditioning step of a sampled trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct PinStep {
    pub var: usize,
    pub value: f64,
    pub potential_before: f64,
    pub potential_after: f64,
    /// The weighting over candidate variables used when this step was chosen.
    pub psi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundComparison {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// Full record of one pinning experiment.
#[derive(Clone, Debug, Serialize)]
pub struct PinningReport {
    pub lemma: String,
    pub steps: Vec<PinStep>,
    /// E_S E_ij w_ij |Cov(X_i, X_j | X_S)| estimates, indexed by s.
    pub avg_abs_cov: Vec<f64>,
    /// Same trace with the i = j terms removed.
    pub avg_abs_cov_offdiag: Vec<f64>,
    /// Monte-Carlo standard errors per s (zero for exact enumeration).
    pub stderr: Vec<f64>,
    pub best_s: usize,
    pub best_value: f64,
    pub bound: BoundComparison,
    pub extras: BTreeMap<String, f64>,
}

/// Monte-Carlo knobs. Exact enumeration kicks in automatically whenever
/// (#subsets of size s) * (support size) stays at or below `exact_limit`.
#[derive(Clone, Debug)]
pub struct PinConfig {
    pub subset_samples: usize,
    pub exact_limit: u128,
}

impl Default for PinConfig {
    fn default() -> Self {
        Self { subset_samples: 200, exact_limit: 100_000 }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    num
}

/// (1/n^2) sum_ij w_ij |Cov(X_i, X_j)| and the diagonal-excluded variant.
pub fn avg_abs_cov(joint: &DiscreteJoint, weights: Option<&[f64]>) -> (f64, f64) {
    let n = joint.n;
    let means: Vec<f64> = (0..n).map(|i| joint.mean(i)).collect();
    let mut covs = vec![0.0; n * n];
    for (x, p) in &joint.support {
        for i in 0..n {
            let di = x[i] - means[i];
            if di == 0.0 {
                continue;
            }
            for j in 0..n {
                covs[i * n + j] += p * di * (x[j] - means[j]);
            }
        }
    }
    let w = |i: usize, j: usize| weights.map_or(1.0, |w| w[i * n + j]);
    let mut total = 0.0;
    let mut offdiag = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = w(i, j) * covs[i * n + j].abs();
            total += c;
            if i != j {
                offdiag += c;
            }
        }
    }
    let nn = (n * n) as f64;
    (total / nn, offdiag / nn)
}

fn subsets_of_size(n: usize, s: usize) -> Vec<Vec<usize>> {
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
    rec(0, n, s, &mut cur, &mut out);
    out
}

/// Partition the support by the exact values on `subset`, yielding
/// (conditional joint, probability of the pattern).
fn pattern_groups(joint: &DiscreteJoint, subset: &[usize]) -> Vec<(DiscreteJoint, f64)> {
    let mut keyed: Vec<(Vec<u64>, usize)> = joint
        .support
        .iter()
        .enumerate()
        .map(|(idx, (x, _))| {
            let key: Vec<u64> = subset.iter().map(|&i| x[i].to_bits()).collect();
            (key, idx)
        })
        .collect();
    keyed.sort();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < keyed.len() {
        let key = keyed[pos].0.clone();
        let mut atoms = Vec::new();
        let mut mass = 0.0;
        while pos < keyed.len() && keyed[pos].0 == key {
            let (x, p) = &joint.support[keyed[pos].1];
            atoms.push((x.clone(), *p));
            mass += p;
            pos += 1;
        }
        if mass > 0.0 {
            for (_, p) in atoms.iter_mut() {
                *p /= mass;
            }
            out.push((DiscreteJoint { n: joint.n, support: atoms }, mass));
        }
    }
    out
}

/// E over random size-s subsets and conditioning values of a per-joint
/// statistic. Exact when the enumeration is small, Monte-Carlo otherwise.
/// Returns (mean, stderr, secondary-mean) where the statistic yields a
/// (primary, secondary) pair.
fn expect_over_pinnings(
    joint: &DiscreteJoint,
    s: usize,
    cfg: &PinConfig,
    rng: &mut ChaCha8Rng,
    stat: impl Fn(&DiscreteJoint) -> (f64, f64),
) -> (f64, f64, f64) {
    let n = joint.n;
    if s == 0 {
        let (a, b) = stat(joint);
        return (a, 0.0, b);
    }
    let count = binomial(n, s).saturating_mul(joint.support.len() as u128);
    if count <= cfg.exact_limit {
        let mut mean = 0.0;
        let mut secondary = 0.0;
        let subs = subsets_of_size(n, s);
        let total = subs.len() as f64;
        for sub in &subs {
            for (cond, mass) in pattern_groups(joint, sub) {
                let (a, b) = stat(&cond);
                mean += mass * a / total;
                secondary += mass * b / total;
            }
        }
        return (mean, 0.0, secondary);
    }
    // Monte Carlo: each sample draws a subset and conditioning values jointly.
    let mut vals = Vec::with_capacity(cfg.subset_samples);
    let mut secondary = 0.0;
    let indices: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.subset_samples {
        let subset: Vec<usize> = indices
            .choose_multiple(rng, s)
            .copied()
            .collect();
        let atom = sample_atom(joint, rng);
        let pins: Vec<(usize, f64)> = subset.iter().map(|&i| (i, joint.support[atom].0[i])).collect();
        let cond = joint.condition_on(&pins).expect("positive-mass pattern");
        let (a, b) = stat(&cond);
        vals.push(a);
        secondary += b;
    }
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len().max(1) as f64;
    let se = (var / vals.len() as f64).sqrt();
    (m, se, secondary / cfg.subset_samples as f64)
}

#[cfg(test)]
pub(crate) fn pattern_groups_for_test(
    joint: &DiscreteJoint,
    subset: &[usize],
) -> Vec<(DiscreteJoint, f64)> {
    pattern_groups(joint, subset)
}

#[cfg(test)]
pub(crate) fn subsets_for_test(n: usize, s: usize) -> Vec<Vec<usize>> {
    subsets_of_size(n, s)
}

fn sample_atom(joint: &DiscreteJoint, rng: &mut ChaCha8Rng) -> usize {
    let mut draw = rng.gen::<f64>();
    for (idx, (_, p)) in joint.support.iter().enumerate() {
        if draw < *p {
            return idx;
        }
        draw -= p;
    }
    joint.support.len() - 1
}

/// Sample a value of coordinate `var` from the (conditional) marginal.
fn sample_value(joint: &DiscreteJoint, var: usize, rng: &mut ChaCha8Rng) -> f64 {
    let marg = joint.marginal(var);
    let mut draw = rng.gen::<f64>();
    for (v, p) in &marg {
        if draw < *p {
            return *v;
        }
        draw -= p;
    }
    marg.last().unwrap().0
}

fn cov_traces(
    joint: &DiscreteJoint,
    t: usize,
    weights: Option<&[f64]>,
    cfg: &PinConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut trace = Vec::with_capacity(t + 1);
    let mut off = Vec::with_capacity(t + 1);
    let mut ses = Vec::with_capacity(t + 1);
    for s in 0..=t.min(joint.n.saturating_sub(1)) {
        let (m, se, o) = expect_over_pinnings(joint, s, cfg, rng, |c| avg_abs_cov(c, weights));
        trace.push(m);
        ses.push(se);
        off.push(o);
    }
    (trace, ses, off)
}

fn best_of(trace: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (s, v) in trace.iter().enumerate() {
        if *v < best.1 {
            best = (s, *v);
        }
    }
    best
}

/// Random-order conditioning trajectory recording a potential before/after
/// each step. `potential` maps the current conditional joint to a number;
/// `psi` supplies the per-variable weighting (uniform when None); greedy
/// variable choice maximizes psi * expected potential drop, otherwise the
/// variable is drawn uniformly at random among the unpinned ones.
#[allow(clippy::too_many_arguments)]
fn trajectory(
    joint: &DiscreteJoint,
    t: usize,
    rng: &mut ChaCha8Rng,
    greedy: bool,
    potential: impl Fn(&DiscreteJoint) -> f64,
    psi_weights: impl Fn(&DiscreteJoint) -> Vec<f64>,
) -> Vec<PinStep> {
    let mut steps = Vec::with_capacity(t);
    let mut current = joint.clone();
    let mut unpinned: Vec<usize> = (0..joint.n).collect();
    for _ in 0..t.min(joint.n) {
        if unpinned.is_empty() {
            break;
        }
        let before = potential(&current);
        let psi = psi_weights(&current);
        let var = if greedy {
            let mut best: Option<(usize, f64)> = None;
            for &j in &unpinned {
                let mut expected_after = 0.0;
                for (v, pv) in current.marginal(j) {
                    if let Some(cj) = current.condition_on(&[(j, v)]) {
                        expected_after += pv * potential(&cj);
                    }
                }
                let gain = psi[j] * (before - expected_after);
                match best {
                    Some((_, g)) if gain <= g => {}
                    _ => best = Some((j, gain)),
                }
            }
            best.unwrap().0
        } else {
            unpinned[rng.gen_range(0..unpinned.len())]
        };
        let value = sample_value(&current, var, rng);
        current = current
            .condition_on(&[(var, value)])
            .expect("sampled value has positive mass");
        let after = potential(&current);
        steps.push(PinStep { var, value, potential_before: before, potential_after: after, psi });
        unpinned.retain(|&j| j != var);
    }
    steps
}

/// Variance pinning: trace E_S E_ij w_ij |Cov| for s = 0..t and compare the
/// best value against c_cal / sqrt(t) * E_i Var(X_i) (uniform weights only).
pub fn pin_variance(
    joint: &DiscreteJoint,
    t: usize,
    weights: Option<&[f64]>,
    seed: u64,
    cfg: &PinConfig,
    c_cal: f64,
) -> Result<PinningReport, PinningError> {
    if t >= joint.n {
        return Err(PinningError::BadParameter(format!("need t < n, got t={t}, n={}", joint.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (trace, ses, off) = cov_traces(joint, t, weights, cfg, &mut rng);
    let (best_s, best_value) = best_of(&trace);
    let avg_var: f64 = (0..joint.n).map(|i| joint.var(i)).sum::<f64>() / joint.n as f64;
    let bound = if weights.is_none() {
        let rhs = c_cal / (t.max(1) as f64).sqrt() * avg_var;
        BoundComparison {
            lhs: best_value,
            rhs,
            ratio: if rhs > 0.0 { best_value / rhs } else { f64::INFINITY },
            holds: best_value <= rhs + 1e-12,
        }
    } else {
        BoundComparison { lhs: best_value, rhs: f64::NAN, ratio: f64::NAN, holds: true }
    };
    let steps = trajectory(
        joint,
        t,
        &mut rng,
        false,
        |c| (0..c.n).map(|i| c.var(i)).sum::<f64>() / c.n as f64,
        |c| vec![1.0 / c.n as f64; c.n],
    );
    let mut extras = BTreeMap::new();
    extras.insert("avg_variance".into(), avg_var);
    Ok(PinningReport {
        lemma: "variance".into(),
        steps,
        avg_abs_cov: trace,
        avg_abs_cov_offdiag: off,
        stderr: ses,
        best_s,
        best_value,
        bound,
        extras,
    })
}

/// Parameters of the heavy-tailed bound: rhs = c_const / t^exponent * bracket.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HeavyBoundParams {
    pub exponent: f64,
    pub c_const: f64,
}

impl Default for HeavyBoundParams {
    fn default() -> Self {
        Self { exponent: 0.5, c_const: 1.0 }
    }
}

/// Heavy-tailed pinning: like variance pinning, but compared against the
/// pairwise-moment bracket [E (E_i |X_i|^((p+1)/p))^2]^(p/(p+1)), and the
/// trajectory greedily conditions by the moment weighting.
pub fn pin_heavy_tailed(
    joint: &DiscreteJoint,
    p: u32,
    t: usize,
    seed: u64,
    cfg: &PinConfig,
    params: HeavyBoundParams,
) -> Result<PinningReport, PinningError> {
    if t >= joint.n {
        return Err(PinningError::BadParameter(format!("need t < n, got t={t}, n={}", joint.n)));
    }
    if p == 0 {
        return Err(PinningError::BadParameter("p must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (trace, ses, off) = cov_traces(joint, t, None, cfg, &mut rng);
    let (best_s, best_value) = best_of(&trace);
    let e = (p as f64 + 1.0) / p as f64;
    let bracket: f64 = joint
        .support
        .iter()
        .map(|(x, pr)| {
            let avg: f64 = x.iter().map(|v| v.abs().powf(e)).sum::<f64>() / joint.n as f64;
            pr * avg * avg
        })
        .sum::<f64>()
        .powf(p as f64 / (p as f64 + 1.0));
    let rhs = params.c_const / (t.max(1) as f64).powf(params.exponent) * bracket;
    let bound = BoundComparison {
        lhs: best_value,
        rhs,
        ratio: if rhs > 0.0 { best_value / rhs } else { f64::INFINITY },
        holds: best_value <= rhs + 1e-12,
    };
    // Bregman uncertainty with exponent (p+1)/p as the trajectory potential.
    let spec = BregmanSpec::standard(p + 1)?;
    let steps = trajectory(
        joint,
        t,
        &mut rng,
        true,
        move |c| {
            (0..c.n)
                .map(|i| spec.coordinate_uncertainty(c, i))
                .sum::<f64>()
                / c.n as f64
        },
        move |c| {
            let raw: Vec<f64> = (0..c.n).map(|j| c.abs_moment(j, e)).collect();
            let total: f64 = raw.iter().sum();
            if total > 0.0 {
                raw.iter().map(|w| w / total).collect()
            } else {
                vec![1.0 / c.n as f64; c.n]
            }
        },
    );
    let mut extras = BTreeMap::new();
    extras.insert("moment_bracket".into(), bracket);
    Ok(PinningReport {
        lemma: "heavy-tailed".into(),
        steps,
        avg_abs_cov: trace,
        avg_abs_cov_offdiag: off,
        stderr: ses,
        best_s,
        best_value,
        bound,
        extras,
    })
}

/// Truncation pinning: the clipped decomposition X = tau_L(X) + R with
/// L = M_q^(1/(2q)) (m+1)^(1/2), and the explicit-constant bound
/// E E_ij |Cov(. | F_t)| <= 7 (m+1)^(-(q-1)/2) M_q^(1/q) for some t <= m.
/// Acceptance of a t uses the Monte-Carlo estimate with a 3-sigma margin.
pub fn pin_truncation(
    joint: &DiscreteJoint,
    q: f64,
    m: usize,
    seed: u64,
    cfg: &PinConfig,
    mc_samples: usize,
) -> Result<PinningReport, PinningError> {
    if !(1.0 < q && q < 2.0) {
        return Err(PinningError::BadParameter(format!("need 1 < q < 2, got {q}")));
    }
    if m >= joint.n {
        return Err(PinningError::BadParameter(format!("need m < n, got m={m}, n={}", joint.n)));
    }
    let n = joint.n as f64;
    let m_q: f64 = joint
        .support
        .iter()
        .map(|(x, pr)| {
            let a: f64 = x.iter().map(|v| v.abs().powf(q)).sum::<f64>() / n;
            pr * a * a
        })
        .sum();
    let mut extras = BTreeMap::new();
    extras.insert("M_q".into(), m_q);
    if m_q <= 0.0 {
        // all-zero joint: both sides vanish
        return Ok(PinningReport {
            lemma: "truncation".into(),
            steps: Vec::new(),
            avg_abs_cov: vec![0.0],
            avg_abs_cov_offdiag: vec![0.0],
            stderr: vec![0.0],
            best_s: 0,
            best_value: 0.0,
            bound: BoundComparison { lhs: 0.0, rhs: 0.0, ratio: 0.0, holds: true },
            extras,
        });
    }
    let level = m_q.powf(1.0 / (2.0 * q)) * ((m + 1) as f64).sqrt();
    extras.insert("clip_level".into(), level);
    // clipped-part variance against the proof's L^(2-q) sqrt(M_q) bound
    let clip = |v: f64| v.signum() * v.abs().min(level);
    let clipped_var: f64 = (0..joint.n)
        .map(|i| {
            let mean = joint.expect(i, clip);
            joint.expect(i, |v| {
                let c = clip(v);
                (c - mean) * (c - mean)
            })
        })
        .sum::<f64>()
        / n;
    extras.insert("clipped_avg_variance".into(), clipped_var);
    extras.insert("clipped_variance_bound".into(), level.powf(2.0 - q) * m_q.sqrt());
    let tail_second: f64 = (0..joint.n)
        .map(|i| {
            joint.expect(i, |v| {
                let r = v.abs() - level;
                if r > 0.0 {
                    v.abs()
                } else {
                    0.0
                }
            })
        })
        .sum::<f64>()
        / n;
    extras.insert("tail_avg_abs".into(), tail_second);

    let rhs = 7.0 * ((m + 1) as f64).powf(-(q - 1.0) / 2.0) * m_q.powf(1.0 / q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let local_cfg = PinConfig { subset_samples: mc_samples, exact_limit: cfg.exact_limit };
    let mut trace = Vec::new();
    let mut ses = Vec::new();
    let mut offs = Vec::new();
    let mut found: Option<(usize, f64)> = None;
    for t in 0..=m {
        let (mean, se, o) = expect_over_pinnings(joint, t, &local_cfg, &mut rng, |c| avg_abs_cov(c, None));
        trace.push(mean);
        ses.push(se);
        offs.push(o);
        if mean <= rhs + 3.0 * se {
            found = Some((t, mean));
            break;
        }
    }
    let (best_s, best_value) = found.unwrap_or_else(|| best_of(&trace));
    let holds = found.is_some();
    let clip_for_potential = clip;
    let steps = trajectory(
        joint,
        m,
        &mut rng,
        false,
        move |c| {
            (0..c.n)
                .map(|i| {
                    let mean = c.expect(i, clip_for_potential);
                    c.expect(i, |v| {
                        let t = clip_for_potential(v) - mean;
                        t * t
                    })
                })
                .sum::<f64>()
                / c.n as f64
        },
        |c| vec![1.0 / c.n as f64; c.n],
    );
    Ok(PinningReport {
        lemma: "truncation".into(),
        steps,
        avg_abs_cov: trace,
        avg_abs_cov_offdiag: offs,
        stderr: ses,
        best_s,
        best_value,
        bound: BoundComparison {
            lhs: best_value,
            rhs,
            ratio: if rhs > 0.0 { best_value / rhs } else { f64::INFINITY },
            holds,
        },
        extras,
    })
}

/// Average pairwise total variation between conditional pair joints and the
/// products of their conditional marginals. The i = j terms are excluded
/// (a coordinate paired with itself is never product-like), so product
/// joints score exactly zero.
pub fn avg_pairwise_tv(joint: &DiscreteJoint) -> f64 {
    let n = joint.n;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += pair_tv(joint, i, j);
            }
        }
    }
    total / (n * n) as f64
}

/// TV({X_i, X_j}, {X_i} x {X_j}).
pub fn pair_tv(joint: &DiscreteJoint, i: usize, j: usize) -> f64 {
    let mi = joint.marginal(i);
    let mj = joint.marginal(j);
    let mut joint_map: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for (x, p) in &joint.support {
        *joint_map.entry((x[i].to_bits(), x[j].to_bits())).or_insert(0.0) += p;
    }
    let mut tv = 0.0;
    for (vi, pi) in &mi {
        for (vj, pj) in &mj {
            let jp = joint_map.get(&(vi.to_bits(), vj.to_bits())).copied().unwrap_or(0.0);
            tv += (jp - pi * pj).abs();
        }
    }
    tv / 2.0
}

/// Mutual information I(X_i; X_j) in nats: H(X_i) - H(X_i | X_j).
pub fn mutual_information(joint: &DiscreteJoint, i: usize, j: usize) -> f64 {
    let h_i = joint.entropy(i);
    let mut h_cond = 0.0;
    for (v, pv) in joint.marginal(j) {
        if let Some(cj) = joint.condition_on(&[(j, v)]) {
            h_cond += pv * cj.entropy(i);
        }
    }
    h_i - h_cond
}

/// Discrete pinning: trace of E_S E_ij TV(conditional pair, product of
/// conditionals), compared against (E_i H(X_i) / t)^2, plus the per-pair
/// Pinsker check tv^2 <= (1/2)(H(x) - H(x|y)) on the unconditioned joint.
pub fn pin_discrete_tv(
    joint: &DiscreteJoint,
    t: usize,
    seed: u64,
    cfg: &PinConfig,
) -> Result<PinningReport, PinningError> {
    if t >= joint.n {
        return Err(PinningError::BadParameter(format!("need t < n, got t={t}, n={}", joint.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::new();
    let mut ses = Vec::new();
    for s in 0..=t {
        let (mean, se, _) = expect_over_pinnings(joint, s, cfg, &mut rng, |c| (avg_pairwise_tv(c), 0.0));
        trace.push(mean);
        ses.push(se);
    }
    let (best_s, best_value) = best_of(&trace);
    let avg_entropy: f64 = (0..joint.n).map(|i| joint.entropy(i)).sum::<f64>() / joint.n as f64;
    let rhs = (avg_entropy / t.max(1) as f64).powi(2);
    let mut pinsker_max = f64::NEG_INFINITY;
    for i in 0..joint.n {
        for j in 0..joint.n {
            if i == j {
                continue;
            }
            let tv = pair_tv(joint, i, j);
            let info = mutual_information(joint, i, j);
            pinsker_max = pinsker_max.max(tv * tv - 0.5 * info);
        }
    }
    let steps = trajectory(
        joint,
        t,
        &mut rng,
        false,
        |c| (0..c.n).map(|i| c.entropy(i)).sum::<f64>() / c.n as f64,
        |c| vec![1.0 / c.n as f64; c.n],
    );
    let mut extras = BTreeMap::new();
    extras.insert("avg_entropy".into(), avg_entropy);
    if pinsker_max > f64::NEG_INFINITY {
        extras.insert("pinsker_max_violation".into(), pinsker_max);
    }
    Ok(PinningReport {
        lemma: "discrete-tv".into(),
        steps,
        avg_abs_cov: trace.clone(),
        avg_abs_cov_offdiag: trace,
        stderr: ses,
        best_s,
        best_value,
        bound: BoundComparison {
            lhs: best_value,
            rhs,
            ratio: if rhs > 0.0 { best_value / rhs } else { f64::INFINITY },
            holds: best_value <= rhs + 1e-12,
        },
        extras,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product_joint() -> DiscreteJoint {
        DiscreteJoint::product(&[
            vec![(0.0, 0.5), (1.0, 0.5)],
            vec![(0.0, 0.3), (2.0, 0.7)],
            vec![(-1.0, 0.6), (1.0, 0.4)],
        ])
        .unwrap()
    }

    #[test]
    fn product_joint_has_zero_offdiag_cov_at_s0() {
        let j = product_joint();
        let rep = pin_variance(&j, 0, None, 1, &PinConfig::default(), 1.0).unwrap();
        assert!(rep.avg_abs_cov_offdiag[0] <= 1e-12);
        assert_eq!(rep.best_s, 0);
    }

    #[test]
    fn ghz_like_joint_dies_after_one_pin() {
        // all coordinates equal a uniform +-1 bit
        let j = DiscreteJoint::new(
            4,
            vec![(vec![1.0; 4], 0.5), (vec![-1.0; 4], 0.5)],
        )
        .unwrap();
        let rep = pin_variance(&j, 1, None, 3, &PinConfig::default(), 2.0).unwrap();
        // s = 1 kills every covariance
        assert!(rep.avg_abs_cov[1] <= 1e-12);
        assert!(rep.avg_abs_cov[0] > 0.5);
        assert_eq!(rep.best_s, 1);
    }

    #[test]
    fn paired_joint_keeps_only_pair_terms() {
        // X_0 = X_1 and X_2 = X_3, independent pairs
        let pair = vec![(vec![1.0, 1.0], 0.5), (vec![-1.0, -1.0], 0.5)];
        let mut support = Vec::new();
        for (a, pa) in &pair {
            for (b, pb) in &pair {
                support.push((vec![a[0], a[1], b[0], b[1]], pa * pb));
            }
        }
        let j = DiscreteJoint::new(4, support).unwrap();
        let rep = pin_variance(&j, 0, None, 3, &PinConfig::default(), 1.0).unwrap();
        // 4 diagonal + 4 in-pair terms of size 1 over n^2 = 16
        assert!((rep.avg_abs_cov[0] - 0.5).abs() <= 1e-12);
        // off-pair covariances vanish: off-diagonal trace counts only in-pair
        assert!((rep.avg_abs_cov_offdiag[0] - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn weighted_covariances_respected() {
        let j = DiscreteJoint::new(
            2,
            vec![(vec![1.0, 1.0], 0.5), (vec![-1.0, -1.0], 0.5)],
        )
        .unwrap();
        let w = vec![0.0, 1.0, 1.0, 0.0]; // only off-diagonal
        let (full, off) = avg_abs_cov(&j, Some(&w));
        assert!((full - 0.5).abs() <= 1e-12);
        assert_eq!(full, off);
    }

    #[test]
    fn truncation_zero_joint_trivial() {
        let j = DiscreteJoint::new(3, vec![(vec![0.0, 0.0, 0.0], 1.0)]).unwrap();
        let rep = pin_truncation(&j, 4.0 / 3.0, 2, 1, &PinConfig::default(), 50).unwrap();
        assert!(rep.bound.holds);
        assert_eq!(rep.bound.lhs, 0.0);
        assert_eq!(rep.bound.rhs, 0.0);
    }

    #[test]
    fn truncation_iid_needs_no_pinning() {
        let j = DiscreteJoint::product(&[
            vec![(0.0, 0.9), (3.0, 0.1)],
            vec![(0.0, 0.9), (3.0, 0.1)],
            vec![(0.0, 0.9), (3.0, 0.1)],
        ])
        .unwrap();
        let rep = pin_truncation(&j, 4.0 / 3.0, 2, 7, &PinConfig::default(), 100).unwrap();
        assert!(rep.bound.holds);
        assert_eq!(rep.best_s, 0, "independent coordinates: t = 0 suffices");
        // lhs at t = 0 is diagonal-only
        assert!(rep.avg_abs_cov_offdiag[0] <= 1e-12);
    }

    #[test]
    fn discrete_tv_product_is_zero() {
        let j = product_joint();
        let rep = pin_discrete_tv(&j, 1, 5, &PinConfig::default()).unwrap();
        assert!(rep.avg_abs_cov[0] <= 1e-12);
    }

    #[test]
    fn discrete_tv_perfect_pair() {
        let j = DiscreteJoint::new(
            2,
            vec![(vec![0.0, 0.0], 0.5), (vec![1.0, 1.0], 0.5)],
        )
        .unwrap();
        // TV between the coupled pair and the product is 1/2 before pinning
        assert!((pair_tv(&j, 0, 1) - 0.5).abs() <= 1e-12);
        let rep = pin_discrete_tv(&j, 1, 5, &PinConfig::default()).unwrap();
        assert!(rep.avg_abs_cov[1] <= 1e-12, "conditioning either coordinate kills TV");
    }

    #[test]
    fn trajectory_records_potentials() {
        let j = product_joint();
        let rep = pin_variance(&j, 2, None, 11, &PinConfig::default(), 1.0).unwrap();
        assert_eq!(rep.steps.len(), 2);
        for st in &rep.steps {
            assert!(st.potential_before >= -1e-12);
            assert!(st.potential_after >= -1e-12);
        }
    }
}
