//! Potential functions and the pinning laboratory.
//!
//! [`DiscreteJoint`] is the test bed: an explicit finite joint distribution
//! over n real coordinates. On top of it live the Bregman divergence /
//! uncertainty machinery, the conditioning-decreases-uncertainty checks,
//! and the four pinning procedures (variance, heavy-tailed, truncation,
//! discrete TV) in [`procedures`]. The paired heavy-tailed counterexample
//! family is in [`counterexample`].

pub mod counterexample;
pub mod procedures;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PinningError {
    #[error("invalid joint: {0}")]
    BadJoint(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("support budget exceeded: would need {needed} atoms, budget {budget}")]
    SupportBudget { needed: u128, budget: usize },
}

/// Explicit finite joint distribution over n real-valued coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteJoint {
    pub n: usize,
    pub support: Vec<(Vec<f64>, f64)>,
}

impl DiscreteJoint {
    pub fn new(n: usize, support: Vec<(Vec<f64>, f64)>) -> Result<Self, PinningError> {
        if support.is_empty() {
            return Err(PinningError::BadJoint("empty support".into()));
        }
        let mut total = 0.0;
        for (x, p) in &support {
            if x.len() != n {
                return Err(PinningError::BadJoint(format!(
                    "atom has {} coordinates, expected {n}",
                    x.len()
                )));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(PinningError::BadJoint(format!("bad probability {p}")));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(PinningError::BadJoint("non-finite value".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(PinningError::BadJoint(format!("probabilities sum to {total}")));
        }
        Ok(Self { n, support })
    }

    /// Product of independent per-coordinate laws.
    pub fn product(laws: &[Vec<(f64, f64)>]) -> Result<Self, PinningError> {
        let n = laws.len();
        let mut support = vec![(Vec::new(), 1.0)];
        for law in laws {
            let mut next = Vec::with_capacity(support.len() * law.len());
            for (prefix, p) in &support {
                for (v, q) in law {
                    if p * q == 0.0 {
                        continue;
                    }
                    let mut x = prefix.clone();
                    x.push(*v);
                    next.push((x, p * q));
                }
            }
            support = next;
        }
        Self::new(n, support)
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.support.iter().map(|(x, p)| p * x[i]).sum()
    }

    pub fn var(&self, i: usize) -> f64 {
        let m = self.mean(i);
        self.support
            .iter()
            .map(|(x, p)| p * (x[i] - m) * (x[i] - m))
            .sum()
    }

    /// E |X_i|^e for real e > 0.
    pub fn abs_moment(&self, i: usize, e: f64) -> f64 {
        self.support.iter().map(|(x, p)| p * x[i].abs().powf(e)).sum()
    }

    /// E f(X_i).
    pub fn expect(&self, i: usize, f: impl Fn(f64) -> f64) -> f64 {
        self.support.iter().map(|(x, p)| p * f(x[i])).sum()
    }

    /// E f(X_i, X_j).
    pub fn expect2(&self, i: usize, j: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.support.iter().map(|(x, p)| p * f(x[i], x[j])).sum()
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        let mi = self.mean(i);
        let mj = self.mean(j);
        self.support
            .iter()
            .map(|(x, p)| p * (x[i] - mi) * (x[j] - mj))
            .sum()
    }

    /// Distinct values of coordinate i with their probabilities.
    pub fn marginal(&self, i: usize) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut items: Vec<(f64, f64)> = self.support.iter().map(|(x, p)| (x[i], *p)).collect();
        items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (v, p) in items {
            match atoms.last_mut() {
                Some((lv, lp)) if *lv == v => *lp += p,
                _ => atoms.push((v, p)),
            }
        }
        atoms
    }

    /// Condition on exact values of a set of coordinates. Returns `None`
    /// when the event has zero probability.
    pub fn condition_on(&self, pins: &[(usize, f64)]) -> Option<Self> {
        let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut mass = 0.0;
        'atom: for (x, p) in &self.support {
            for (i, v) in pins {
                if x[*i] != *v {
                    continue 'atom;
                }
            }
            kept.push((x.clone(), *p));
            mass += p;
        }
        if mass <= 0.0 {
            return None;
        }
        for (_, p) in kept.iter_mut() {
            *p /= mass;
        }
        Some(Self { n: self.n, support: kept })
    }

    /// Shannon entropy (nats) of coordinate i.
    pub fn entropy(&self, i: usize) -> f64 {
        self.marginal(i)
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(_, p)| -p * p.ln())
            .sum()
    }

    /// Restriction to two coordinates as a standalone joint.
    pub fn pair_joint(&self, i: usize, j: usize) -> DiscreteJoint {
        let support: Vec<(Vec<f64>, f64)> = self
            .support
            .iter()
            .map(|(x, p)| (vec![x[i], x[j]], *p))
            .collect();
        DiscreteJoint { n: 2, support }
    }
}

/// Bregman machinery for the regularizer f(x) = scale * |x|^(p/(p-1)).
/// `BregmanSpec::standard` uses scale (p-1)/p (the uncertainty-generating
/// form); `unit_scale` uses scale 1 (the form the asymmetric decrease
/// inequality is stated with).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BregmanSpec {
    pub p: u32,
    pub scale: f64,
}

impl BregmanSpec {
    pub fn standard(p: u32) -> Result<Self, PinningError> {
        if p < 2 {
            return Err(PinningError::BadParameter(format!("Bregman spec needs p >= 2, got {p}")));
        }
        Ok(Self { p, scale: (p as f64 - 1.0) / p as f64 })
    }

    pub fn unit_scale(p: u32) -> Result<Self, PinningError> {
        if p < 2 {
            return Err(PinningError::BadParameter(format!("Bregman spec needs p >= 2, got {p}")));
        }
        Ok(Self { p, scale: 1.0 })
    }

    /// The exponent p/(p-1).
    pub fn exponent(&self) -> f64 {
        self.p as f64 / (self.p as f64 - 1.0)
    }

    pub fn f(&self, x: f64) -> f64 {
        self.scale * x.abs().powf(self.exponent())
    }

    /// Gradient of f; the subgradient choice at 0 is 0, which keeps
    /// B(x, 0) = f(x) well defined.
    pub fn grad(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        self.scale * self.exponent() * y.signum() * y.abs().powf(1.0 / (self.p as f64 - 1.0))
    }

    /// B(x, y) = f(x) - f(y) - grad f(y) (x - y).
    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        self.f(x) - self.f(y) - self.grad(y) * (x - y)
    }

    /// Bregman uncertainty of a univariate distribution:
    /// scale * (E|x|^(p/(p-1)) - |E x|^(p/(p-1))), the minimum over
    /// constants c of E B(x, c), attained at c = E x.
    pub fn uncertainty(&self, dist: &[(f64, f64)]) -> f64 {
        let e = self.exponent();
        let mut mean = 0.0;
        let mut abs_mom = 0.0;
        for (v, p) in dist {
            mean += p * v;
            abs_mom += p * v.abs().powf(e);
        }
        self.scale * (abs_mom - mean.abs().powf(e))
    }

    /// Uncertainty of coordinate i of a joint.
    pub fn coordinate_uncertainty(&self, joint: &DiscreteJoint, i: usize) -> f64 {
        self.uncertainty(&joint.marginal(i))
    }
}

/// One inequality evaluation: both sides plus the verdict.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub degenerate: bool,
}

/// Variance drop from conditioning u on v versus Cov^2/(4 Var(v)).
pub fn variance_reduction_check(joint2: &DiscreteJoint) -> InequalityCheck {
    assert_eq!(joint2.n, 2, "two-variable joint expected");
    let var_v = joint2.var(1);
    let degenerate = var_v <= 0.0;
    let rhs = if degenerate {
        0.0
    } else {
        let c = joint2.cov(0, 1);
        c * c / (4.0 * var_v)
    };
    let mut cond_var = 0.0;
    for (v, pv) in joint2.marginal(1) {
        if let Some(cj) = joint2.condition_on(&[(1, v)]) {
            cond_var += pv * cj.var(0);
        }
    }
    let lhs = joint2.var(0) - cond_var;
    InequalityCheck { lhs, rhs, holds: lhs >= rhs - 1e-9, degenerate }
}

/// Both sides of the fractional Bregman uncertainty decrease: how much the
/// p-Bregman uncertainty of y falls after conditioning on z, against the
/// covariance-driven core
/// Cov^(2(p-1)) / (E|z|^p' * (E|yz|^p' + E|y|^p' E|z|^p')^((p-2)(2p-1)/p)).
#[derive(Clone, Debug, Serialize)]
pub struct DecreaseCheck {
    pub lhs: f64,
    pub rhs_core: f64,
    /// lhs / rhs_core; infinite when rhs_core is 0 and lhs > 0.
    pub ratio: f64,
}

pub fn bregman_decrease_check(joint2: &DiscreteJoint, p: u32) -> Result<DecreaseCheck, PinningError> {
    if p < 2 || p % 2 != 0 {
        return Err(PinningError::BadParameter(format!("even p >= 2 required, got {p}")));
    }
    let spec = BregmanSpec::standard(p)?;
    let lhs = conditional_divergence_drop(joint2, &spec, |y| y, |z| z);
    let pe = spec.exponent();
    let z_marg = joint2.marginal(1);
    let z_point_mass = z_marg.iter().filter(|(_, p)| *p > 0.0).count() <= 1;
    let rhs_core = if z_point_mass {
        0.0
    } else {
        let cov = joint2.cov(0, 1);
        let ez = joint2.abs_moment(1, pe);
        let ey = joint2.abs_moment(0, pe);
        let eyz = joint2.expect2(0, 1, |y, z| (y.abs() * z.abs()).powf(pe));
        let alpha = eyz + ey * ez;
        if ez <= 0.0 || alpha <= 0.0 {
            0.0
        } else {
            let pf = p as f64;
            cov.abs().powf(2.0 * (pf - 1.0))
                / (ez * alpha.powf((pf - 2.0) * (2.0 * pf - 1.0) / pf))
        }
    };
    let ratio = if rhs_core > 0.0 { lhs / rhs_core } else { f64::INFINITY };
    Ok(DecreaseCheck { lhs, rhs_core, ratio })
}

/// E[B(g(y), E g(y)) - B(g(y), E[g(y) | h(z)])] for a two-coordinate joint,
/// with the divergence taken from `spec`.
pub fn conditional_divergence_drop(
    joint2: &DiscreteJoint,
    spec: &BregmanSpec,
    g: impl Fn(f64) -> f64 + Copy,
    h: impl Fn(f64) -> f64 + Copy,
) -> f64 {
    let mean_g: f64 = joint2.support.iter().map(|(x, p)| p * g(x[0])).sum();
    let base: f64 = joint2
        .support
        .iter()
        .map(|(x, p)| p * spec.divergence(g(x[0]), mean_g))
        .sum();
    // group atoms by h(z)
    let mut items: Vec<(f64, &Vec<f64>, f64)> = joint2
        .support
        .iter()
        .map(|(x, p)| (h(x[1]), x, *p))
        .collect();
    items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut conditioned = 0.0;
    let mut idx = 0;
    while idx < items.len() {
        let key = items[idx].0;
        let mut stop = idx;
        while stop < items.len() && items[stop].0 == key {
            stop += 1;
        }
        let group = &items[idx..stop];
        let mass: f64 = group.iter().map(|(_, _, p)| p).sum();
        if mass > 0.0 {
            let cond_mean: f64 = group.iter().map(|(_, x, p)| p * g(x[0])).sum::<f64>() / mass;
            let d: f64 = group
                .iter()
                .map(|(_, x, p)| p * spec.divergence(g(x[0]), cond_mean))
                .sum();
            conditioned += d;
        }
        idx = stop;
    }
    base - conditioned
}

/// Mirror-descent update in the dual coordinates of the regularizer:
/// s = sign(x)|x|^(1/(p-1)) - eta * gradient, result sign(s)|s|^(p-1).
pub fn mirror_step(spec: &BregmanSpec, current: f64, gradient: f64, eta: f64) -> f64 {
    let pm1 = spec.p as f64 - 1.0;
    let s = current.signum() * current.abs().powf(1.0 / pm1) - eta * gradient;
    s.signum() * s.abs().powf(pm1)
}

/// B(x1, x2) with x2 one mirror step of size delta away, versus the
/// calibrated bound C * (delta^2 |x1|^((p-2)/(p-1)) + delta^p).
pub fn update_divergence_bound_check(
    spec: &BregmanSpec,
    x1: f64,
    delta: f64,
    c_cal: f64,
) -> InequalityCheck {
    let pm1 = spec.p as f64 - 1.0;
    let s = x1.signum() * x1.abs().powf(1.0 / pm1) + delta;
    let x2 = s.signum() * s.abs().powf(pm1);
    let lhs = spec.divergence(x1, x2);
    let rhs = c_cal
        * (delta * delta * x1.abs().powf((spec.p as f64 - 2.0) / pm1)
            + delta.abs().powi(spec.p as i32));
    InequalityCheck { lhs, rhs, holds: lhs <= rhs + 1e-12, degenerate: false }
}

/// Asymmetric potential decrease for even p <= q: the drop in the
/// (unit-scale) Bregman divergence of u^(p-1) after conditioning on v,
/// against Cov(u^(p-1), v^(q-1)) raised to 2q(p-1)/p over the moment core.
pub fn asymmetric_decrease_check(
    joint2: &DiscreteJoint,
    p: u32,
    q: u32,
) -> Result<DecreaseCheck, PinningError> {
    if p % 2 != 0 || q % 2 != 0 || p < 2 || q < p {
        return Err(PinningError::BadParameter(format!(
            "even integers 2 <= p <= q required, got p={p}, q={q}"
        )));
    }
    let spec = BregmanSpec::unit_scale(p)?;
    let pm1 = (p - 1) as i32;
    let lhs = conditional_divergence_drop(joint2, &spec, |u| u.powi(pm1), |v| v);
    let pf = p as f64;
    let qf = q as f64;
    let cov = joint2.expect2(0, 1, |u, v| u.powi(pm1) * v.powi(q as i32 - 1))
        - joint2.expect(0, |u| u.powi(pm1)) * joint2.expect(1, |v| v.powi(q as i32 - 1));
    let ev_q = joint2.abs_moment(1, qf);
    let eu_p = joint2.abs_moment(0, pf);
    let eupvq = joint2.expect2(0, 1, |u, v| u.abs().powf(pf) * v.abs().powf(qf));
    let alpha = eupvq + eu_p * ev_q;
    let z_point_mass = joint2.marginal(1).iter().filter(|(_, pp)| *pp > 0.0).count() <= 1;
    let rhs_core = if z_point_mass || ev_q <= 0.0 || alpha <= 0.0 {
        0.0
    } else {
        cov.abs().powf(2.0 * qf * (pf - 1.0) / pf)
            / (ev_q.powf(((qf - pf) * (pf - 2.0) + pf * qf) / (pf * pf))
                * alpha.powf((2.0 * pf * qf * (pf - 2.0) - (pf * pf - 2.0 * qf)) / (pf * pf)))
    };
    let ratio = if rhs_core > 0.0 { lhs / rhs_core } else { f64::INFINITY };
    Ok(DecreaseCheck { lhs, rhs_core, ratio })
}

/// Three-point identity residual
/// B(x,y) + B(y,z) - B(x,z) - (grad f(z) - grad f(y)) (x - y).
pub fn three_point_residual(spec: &BregmanSpec, x: f64, y: f64, z: f64) -> f64 {
    spec.divergence(x, y) + spec.divergence(y, z)
        - spec.divergence(x, z)
        - (spec.grad(z) - spec.grad(y)) * (x - y)
}

/// Both sides of the powered-potential comparison
/// sum_i |phi_i - E_z phi_{i|z}|^c  vs  sum_i (phi_i^c - E_z phi_{i|z}^c),
/// plus the weakened right side sum_i (phi_i^c - (E_z phi_{i|z})^c) that the
/// three-line convexity argument actually supports.
#[derive(Clone, Debug, Serialize)]
pub struct PowersCheck {
    pub lhs: f64,
    pub rhs_stated: f64,
    pub rhs_weak: f64,
}

pub fn powers_of_bregman_check(
    joint: &DiscreteJoint,
    z_index: usize,
    p: u32,
    c: f64,
) -> Result<PowersCheck, PinningError> {
    let spec = BregmanSpec::standard(p)?;
    let mut lhs = 0.0;
    let mut rhs_stated = 0.0;
    let mut rhs_weak = 0.0;
    let z_marg = joint.marginal(z_index);
    for i in 0..joint.n {
        if i == z_index {
            continue;
        }
        let phi = spec.coordinate_uncertainty(joint, i);
        let mut e_cond = 0.0;
        let mut e_cond_pow = 0.0;
        for (v, pv) in &z_marg {
            if let Some(cj) = joint.condition_on(&[(z_index, *v)]) {
                let u = spec.coordinate_uncertainty(&cj, i);
                e_cond += pv * u;
                e_cond_pow += pv * u.powf(c);
            }
        }
        lhs += (phi - e_cond).abs().powf(c);
        rhs_stated += phi.powf(c) - e_cond_pow;
        rhs_weak += phi.powf(c) - e_cond.powf(c);
    }
    Ok(PowersCheck { lhs, rhs_stated, rhs_weak })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_joint2(rng: &mut ChaCha8Rng, vals: usize) -> DiscreteJoint {
        let values_u: Vec<f64> = (0..vals).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let values_v: Vec<f64> = (0..vals).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut probs: Vec<f64> = (0..vals * vals).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        let mut support = Vec::new();
        for (a, &u) in values_u.iter().enumerate() {
            for (b, &v) in values_v.iter().enumerate() {
                support.push((vec![u, v], probs[a * vals + b]));
            }
        }
        DiscreteJoint::new(2, support).unwrap()
    }

    #[test]
    fn bregman_divergence_examples() {
        let b2 = BregmanSpec::standard(2).unwrap();
        assert_relative_eq!(b2.divergence(3.0, 1.0), 2.0, epsilon = 1e-12);
        let b4 = BregmanSpec::standard(4).unwrap();
        assert_relative_eq!(b4.divergence(1.0, 0.0), 0.75, epsilon = 1e-12);
        for p in [2, 4, 6] {
            let b = BregmanSpec::standard(p).unwrap();
            for x in [-1.5, 0.0, 0.25, 2.0] {
                assert_eq!(b.divergence(x, x), 0.0);
            }
        }
    }

    #[test]
    fn bregman_divergence_nonnegative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [2u32, 4, 6] {
            let b = BregmanSpec::standard(p).unwrap();
            for _ in 0..2000 {
                let x = rng.gen_range(-5.0..5.0);
                let y = rng.gen_range(-5.0..5.0);
                assert!(b.divergence(x, y) >= -1e-12, "p={p} x={x} y={y}");
            }
        }
    }

    #[test]
    fn uncertainty_examples() {
        let b4 = BregmanSpec::standard(4).unwrap();
        // point mass
        assert_eq!(b4.uncertainty(&[(1.7, 1.0)]), 0.0);
        // uniform on {-1, 1}: (3/4) * (1 - 0)
        assert_relative_eq!(
            b4.uncertainty(&[(-1.0, 0.5), (1.0, 0.5)]),
            0.75,
            epsilon = 1e-12
        );
        // p = 2: exactly half the variance
        let b2 = BregmanSpec::standard(2).unwrap();
        let dist = [(-1.0, 0.25), (0.5, 0.5), (2.0, 0.25)];
        let mean: f64 = dist.iter().map(|(v, p)| v * p).sum();
        let var: f64 = dist.iter().map(|(v, p)| p * (v - mean) * (v - mean)).sum();
        assert_relative_eq!(b2.uncertainty(&dist), var / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn uncertainty_is_min_over_constants() {
        // grid search over c cross-checks the closed form
        let b4 = BregmanSpec::standard(4).unwrap();
        let dist = [(-1.5, 0.3), (0.25, 0.4), (2.0, 0.3)];
        let closed = b4.uncertainty(&dist);
        let mut best = f64::INFINITY;
        let mut c = -3.0;
        while c <= 3.0 {
            let val: f64 = dist.iter().map(|(v, p)| p * b4.divergence(*v, c)).sum();
            best = best.min(val);
            c += 1e-4;
        }
        assert_relative_eq!(closed, best, epsilon = 1e-6);
        assert!(closed >= 0.0);
    }

    #[test]
    fn variance_reduction_examples() {
        // independent coordinates
        let ind = DiscreteJoint::product(&[
            vec![(0.0, 0.5), (1.0, 0.5)],
            vec![(-1.0, 0.5), (1.0, 0.5)],
        ])
        .unwrap();
        let chk = variance_reduction_check(&ind);
        assert_relative_eq!(chk.lhs, 0.0, epsilon = 1e-12);
        assert_relative_eq!(chk.rhs, 0.0, epsilon = 1e-12);
        assert!(chk.holds);

        // u = v uniform on {-1, 1}
        let eq = DiscreteJoint::new(
            2,
            vec![(vec![1.0, 1.0], 0.5), (vec![-1.0, -1.0], 0.5)],
        )
        .unwrap();
        let chk = variance_reduction_check(&eq);
        assert_relative_eq!(chk.lhs, 1.0, epsilon = 1e-12);
        assert_relative_eq!(chk.rhs, 0.25, epsilon = 1e-12);
        assert!(chk.holds);

        // degenerate v
        let degen = DiscreteJoint::new(2, vec![(vec![1.0, 0.0], 0.5), (vec![-1.0, 0.0], 0.5)]).unwrap();
        let chk = variance_reduction_check(&degen);
        assert!(chk.degenerate);
        assert_eq!(chk.rhs, 0.0);
    }

    #[test]
    fn bregman_decrease_basics() {
        // independent: zero covariance, rhs_core = 0, lhs >= 0
        let ind = DiscreteJoint::product(&[
            vec![(-1.0, 0.4), (2.0, 0.6)],
            vec![(0.5, 0.7), (-1.5, 0.3)],
        ])
        .unwrap();
        let chk = bregman_decrease_check(&ind, 4).unwrap();
        assert!(chk.lhs >= -1e-12);
        assert!(chk.rhs_core <= 1e-18);

        // p = 2 reduces to half the variance-reduction lhs
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let j = random_joint2(&mut rng, 3);
            let b = bregman_decrease_check(&j, 2).unwrap();
            let v = variance_reduction_check(&j);
            assert_relative_eq!(b.lhs, v.lhs / 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn decrease_lhs_nonnegative_on_random_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let j = random_joint2(&mut rng, 4);
            for p in [2u32, 4, 6] {
                let chk = bregman_decrease_check(&j, p).unwrap();
                assert!(chk.lhs >= -1e-10, "p={p} lhs={}", chk.lhs);
            }
        }
    }

    #[test]
    fn mirror_step_examples() {
        let b4 = BregmanSpec::standard(4).unwrap();
        assert_relative_eq!(mirror_step(&b4, 0.7, 1.3, 0.0), 0.7, epsilon = 1e-12);
        let b2 = BregmanSpec::standard(2).unwrap();
        assert_relative_eq!(mirror_step(&b2, 1.5, 2.0, 0.25), 1.0, epsilon = 1e-12);
        assert_relative_eq!(mirror_step(&b4, 1.0, 1.0, 1.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn update_divergence_bound_examples() {
        let b4 = BregmanSpec::standard(4).unwrap();
        let chk = update_divergence_bound_check(&b4, 1.3, 0.0, 1.0);
        assert!(chk.lhs.abs() <= 1e-12);
        // p = 2: lhs is exactly delta^2 / 2
        let b2 = BregmanSpec::standard(2).unwrap();
        for (x1, d) in [(1.0, 0.5), (-2.0, 1.5), (0.0, -0.75)] {
            let chk = update_divergence_bound_check(&b2, x1, d, 0.5);
            assert_relative_eq!(chk.lhs, d * d / 2.0, epsilon = 1e-12);
            assert!(chk.holds);
        }
    }

    #[test]
    fn asymmetric_matches_symmetric_at_p_eq_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = 4u32;
        for _ in 0..40 {
            let j = random_joint2(&mut rng, 3);
            let asym = asymmetric_decrease_check(&j, p, p).unwrap();
            // feed (u^(p-1), v^(p-1)) moments into the symmetric check
            let powered = DiscreteJoint::new(
                2,
                j.support
                    .iter()
                    .map(|(x, pr)| (vec![x[0].powi(3), x[1].powi(3)], *pr))
                    .collect(),
            )
            .unwrap();
            let sym = bregman_decrease_check(&powered, p).unwrap();
            // unit-scale divergence is p/(p-1) times the standard one
            let scale = p as f64 / (p as f64 - 1.0);
            assert_relative_eq!(asym.lhs, scale * sym.lhs, epsilon = 1e-9, max_relative = 1e-9);
            assert_relative_eq!(asym.rhs_core, sym.rhs_core, epsilon = 1e-12, max_relative = 1e-9);
        }
    }

    #[test]
    fn asymmetric_independent_case() {
        let ind = DiscreteJoint::product(&[
            vec![(-1.0, 0.5), (1.5, 0.5)],
            vec![(0.5, 0.4), (-0.5, 0.6)],
        ])
        .unwrap();
        let chk = asymmetric_decrease_check(&ind, 4, 6).unwrap();
        assert!(chk.lhs >= -1e-12);
        assert!(chk.rhs_core <= 1e-15);
        assert!(asymmetric_decrease_check(&ind, 6, 4).is_err());
        assert!(asymmetric_decrease_check(&ind, 3, 5).is_err());
    }

    #[test]
    fn three_point_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for p in [2u32, 4, 6] {
            let spec = BregmanSpec::standard(p).unwrap();
            for _ in 0..2000 {
                let x = rng.gen_range(-3.0..3.0);
                let y = rng.gen_range(-3.0..3.0);
                let z = rng.gen_range(-3.0..3.0);
                assert!(three_point_residual(&spec, x, y, z).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn mirror_descent_progress_p2() {
        // 1-strongly-convex case with the descent step x' = x - eta*y:
        // eta <y, x - u> <= B(u,x) - B(u,x') + eta^2 |y|^2, in fact with
        // equality up to the eta^2 y^2 / 2 slack at p = 2.
        let b2 = BregmanSpec::standard(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..2000 {
            let x = rng.gen_range(-2.0..2.0);
            let y = rng.gen_range(-2.0..2.0);
            let u = rng.gen_range(-2.0..2.0);
            let eta = rng.gen_range(0.01..1.0);
            let x2 = mirror_step(&b2, x, y, eta);
            let lhs = eta * y * (x - u);
            let rhs = b2.divergence(u, x) - b2.divergence(u, x2) + eta * eta * y * y;
            assert!(lhs <= rhs + 1e-9, "lhs {lhs} rhs {rhs}");
            assert_relative_eq!(
                lhs,
                b2.divergence(u, x) - b2.divergence(u, x2) + eta * eta * y * y / 2.0,
                epsilon = 1e-9
            );
        }
    }
}
