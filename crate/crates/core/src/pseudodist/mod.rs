//! Degree-bounded families of consistent local distributions.
//!
//! A [`LocalDistributionFamily`] holds one probability table per variable
//! subset (junta) up to the family degree, with all tables agreeing on
//! shared marginals. Families are produced by solving the LP relaxation of
//! a [`model::ModelBuilder`]; conditioning, sampling and rounding consume
//! them. Conditioning returns a fresh family of one lower degree — the
//! inputs are never mutated.

pub mod model;
pub mod simplex;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

/// Discrete value set of one variable: sorted, distinct, finite reals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Alphabet(Vec<f64>);

impl Alphabet {
    pub fn new(mut points: Vec<f64>) -> Result<Self, FamilyError> {
        if points.is_empty() {
            return Err(FamilyError::BadAlphabet("empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(FamilyError::BadAlphabet("non-finite point".into()));
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        Ok(Self(points))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the alphabet point equal to `value` (within 1e-12).
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.0
            .iter()
            .position(|p| (p - value).abs() <= 1e-12 * (1.0 + p.abs()))
    }
}

/// Structured variable name: a group tag, an index within the group, and a
/// vector coordinate (0 for scalar variables).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VariableIndex {
    pub group: String,
    pub index: usize,
    pub coord: usize,
}

impl VariableIndex {
    pub fn scalar(group: &str, index: usize) -> Self {
        Self { group: group.into(), index, coord: 0 }
    }

    pub fn vector(group: &str, index: usize, coord: usize) -> Self {
        Self { group: group.into(), index, coord }
    }
}

impl std::fmt::Display for VariableIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.coord == 0 {
            write!(f, "{}[{}]", self.group, self.index)
        } else {
            write!(f, "{}[{}].{}", self.group, self.index, self.coord)
        }
    }
}

/// Position of a variable within a model / family.
pub type VarId = usize;

pub type JuntaClosure = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A coefficient times a function of a few variables. The closure receives
/// the variable values in the order `vars` was given.
#[derive(Clone)]
pub struct JuntaTerm {
    pub coeff: f64,
    /// Sorted, distinct variable ids.
    pub vars: Vec<VarId>,
    /// Evaluates on values aligned with the sorted `vars`.
    pub f: JuntaClosure,
    pub label: String,
}

impl JuntaTerm {
    pub fn new<F>(coeff: f64, vars: Vec<VarId>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::labeled(coeff, vars, f, String::new())
    }

    pub fn labeled<F>(coeff: f64, vars: Vec<VarId>, f: F, label: String) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&i| vars[i]);
        let sorted: Vec<VarId> = order.iter().map(|&i| vars[i]).collect();
        debug_assert!(sorted.windows(2).all(|w| w[0] != w[1]), "duplicate vars in junta");
        // inverse permutation: original position of each sorted slot
        let wrapped: JuntaClosure = if order.iter().enumerate().all(|(a, b)| a == *b) {
            Arc::new(f)
        } else {
            Arc::new(move |sorted_vals: &[f64]| {
                let mut orig = vec![0.0; sorted_vals.len()];
                for (slot, &opos) in order.iter().enumerate() {
                    orig[opos] = sorted_vals[slot];
                }
                f(&orig)
            })
        };
        Self { coeff, vars: sorted, f: wrapped, label }
    }

    /// Monomial helper: coeff * prod var^power.
    pub fn monomial(coeff: f64, powers: Vec<(VarId, u32)>) -> Self {
        let vars: Vec<VarId> = powers.iter().map(|(v, _)| *v).collect();
        let exps: Vec<u32> = powers.iter().map(|(_, e)| *e).collect();
        Self::new(coeff, vars, move |vals| {
            vals.iter()
                .zip(&exps)
                .map(|(v, e)| v.powi(*e as i32))
                .product()
        })
    }
}

impl std::fmt::Debug for JuntaTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "JuntaTerm({} * f{:?} '{}')", self.coeff, self.vars, self.label)
    }
}

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("bad alphabet: {0}")]
    BadAlphabet(String),
    #[error("no table covers variables {0:?} (degree {1})")]
    MissingTable(Vec<VarId>, usize),
    #[error("monomial '{label}' touches {touched} variables, exceeding degree {degree}")]
    DegreeTooSmall { label: String, touched: usize, degree: usize },
    #[error("value {value} is not an alphabet point of variable {var}")]
    UnknownValue { var: String, value: f64 },
    #[error("conditioning on zero-probability value {value} of {var} (mass {mass:.3e})")]
    ZeroProbability { var: String, value: f64, mass: f64 },
    #[error("conditioning budget exhausted: degree {degree} with {requested} requested draws")]
    DegreeExhausted { degree: usize, requested: usize },
    #[error("pairwise covariance needs degree >= 2, family has degree {0}")]
    DegreeTooLowForPairs(usize),
}

/// Mixed-radix shape over the alphabets of a junta; first variable is the
/// most significant digit.
#[derive(Clone, Debug)]
pub(crate) struct Shape {
    pub sizes: Vec<usize>,
}

impl Shape {
    pub fn cells(&self) -> usize {
        self.sizes.iter().product::<usize>().max(1)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut digits = vec![0usize; self.sizes.len()];
        for pos in (0..self.sizes.len()).rev() {
            digits[pos] = idx % self.sizes[pos];
            idx /= self.sizes[pos];
        }
        digits
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        let mut idx = 0usize;
        for (pos, d) in digits.iter().enumerate() {
            idx = idx * self.sizes[pos] + d;
        }
        idx
    }
}

/// One local distribution: a probability table over the joint assignments
/// of a sorted set of variables.
#[derive(Clone, Debug, Serialize)]
pub struct LocalTable {
    pub vars: Vec<VarId>,
    pub probs: Vec<f64>,
}

/// The family: degree, variables with alphabets, and one table per junta.
#[derive(Clone)]
pub struct LocalDistributionFamily {
    vars: Vec<VariableIndex>,
    alphabets: Vec<Arc<Alphabet>>,
    degree: usize,
    tables: BTreeMap<Vec<VarId>, LocalTable>,
    frozen: Vec<(VariableIndex, f64)>,
    eps_feas: f64,
}

/// Deviations from exact feasibility, for the consistency test suites.
#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub min_entry: f64,
    pub max_sum_deviation: f64,
    pub max_consistency_deviation: f64,
}

impl FeasibilityReport {
    pub fn ok(&self, eps: f64) -> bool {
        self.min_entry >= -eps && self.max_sum_deviation <= eps && self.max_consistency_deviation <= 10.0 * eps
    }
}

pub const DEFAULT_EPS_FEAS: f64 = 1e-9;
pub const DEFAULT_EPS_COND: f64 = 1e-10;

impl LocalDistributionFamily {
    pub(crate) fn from_tables(
        vars: Vec<VariableIndex>,
        alphabets: Vec<Arc<Alphabet>>,
        degree: usize,
        tables: BTreeMap<Vec<VarId>, LocalTable>,
        eps_feas: f64,
    ) -> Self {
        Self { vars, alphabets, degree, tables, frozen: Vec::new(), eps_feas }
    }

    /// Encode a true distribution (explicit assignments with probabilities)
    /// as a family of the given degree. Satisfies every feasibility check
    /// exactly, up to float rounding.
    pub fn from_distribution(
        vars: Vec<VariableIndex>,
        alphabets: Vec<Alphabet>,
        degree: usize,
        support: &[(Vec<f64>, f64)],
    ) -> Result<Self, FamilyError> {
        let n = vars.len();
        let alphabets: Vec<Arc<Alphabet>> = alphabets.into_iter().map(Arc::new).collect();
        // digit-encode the support
        let mut digit_support = Vec::with_capacity(support.len());
        for (assignment, p) in support {
            let mut digits = Vec::with_capacity(n);
            for (v, val) in assignment.iter().enumerate() {
                let d = alphabets[v].index_of(*val).ok_or(FamilyError::UnknownValue {
                    var: vars[v].to_string(),
                    value: *val,
                })?;
                digits.push(d);
            }
            digit_support.push((digits, *p));
        }
        let mut tables = BTreeMap::new();
        for subset in subsets_up_to(n, degree) {
            let shape = Shape { sizes: subset.iter().map(|&v| alphabets[v].len()).collect() };
            let mut probs = vec![0.0; shape.cells()];
            for (digits, p) in &digit_support {
                let proj: Vec<usize> = subset.iter().map(|&v| digits[v]).collect();
                probs[shape.encode(&proj)] += p;
            }
            tables.insert(subset.clone(), LocalTable { vars: subset, probs });
        }
        Ok(Self { vars, alphabets, degree, tables, frozen: Vec::new(), eps_feas: DEFAULT_EPS_FEAS })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn variables(&self) -> &[VariableIndex] {
        &self.vars
    }

    pub fn alphabet(&self, var: VarId) -> &Alphabet {
        &self.alphabets[var]
    }

    pub fn frozen(&self) -> &[(VariableIndex, f64)] {
        &self.frozen
    }

    pub fn tables(&self) -> impl Iterator<Item = &LocalTable> {
        self.tables.values()
    }

    pub fn var_id(&self, v: &VariableIndex) -> Option<VarId> {
        self.vars.iter().position(|w| w == v)
    }

    /// 1-wise marginal of a variable (probabilities aligned with its alphabet).
    pub fn marginal(&self, var: VarId) -> Result<Vec<f64>, FamilyError> {
        self.marginal_table(&[var]).map(|t| t.probs)
    }

    /// Marginal table over a sorted set of variables, derived from the
    /// smallest covering table.
    pub fn marginal_table(&self, vars: &[VarId]) -> Result<LocalTable, FamilyError> {
        let mut sorted = vars.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(t) = self.tables.get(&sorted) {
            return Ok(t.clone());
        }
        // smallest superset (tables are keyed by sorted var lists; scan by size)
        let mut best: Option<&LocalTable> = None;
        for (key, table) in &self.tables {
            if sorted.iter().all(|v| key.contains(v))
                && best.map_or(true, |b| key.len() < b.vars.len())
            {
                best = Some(table);
            }
        }
        let sup = best.ok_or_else(|| FamilyError::MissingTable(sorted.clone(), self.degree))?;
        let sup_shape = Shape { sizes: sup.vars.iter().map(|&v| self.alphabets[v].len()).collect() };
        let shape = Shape { sizes: sorted.iter().map(|&v| self.alphabets[v].len()).collect() };
        let pos: Vec<usize> = sorted
            .iter()
            .map(|v| sup.vars.iter().position(|w| w == v).unwrap())
            .collect();
        let mut probs = vec![0.0; shape.cells()];
        for (idx, p) in sup.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let digits = sup_shape.decode(idx);
            let proj: Vec<usize> = pos.iter().map(|&q| digits[q]).collect();
            probs[shape.encode(&proj)] += p;
        }
        Ok(LocalTable { vars: sorted, probs })
    }

    /// Pseudo-expectation of a junta function. Linear in the function and,
    /// by consistency, independent of which covering table evaluates it.
    pub fn pseudo_expectation(&self, term: &JuntaTerm) -> Result<f64, FamilyError> {
        if term.vars.len() > self.degree {
            return Err(FamilyError::DegreeTooSmall {
                label: term.label.clone(),
                touched: term.vars.len(),
                degree: self.degree,
            });
        }
        if term.vars.is_empty() {
            return Ok(term.coeff * (term.f)(&[]));
        }
        let table = self.marginal_table(&term.vars)?;
        let shape = Shape { sizes: table.vars.iter().map(|&v| self.alphabets[v].len()).collect() };
        let mut total = 0.0;
        let mut values = vec![0.0; table.vars.len()];
        for (idx, p) in table.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let digits = shape.decode(idx);
            for (slot, (&v, &d)) in table.vars.iter().zip(&digits).enumerate() {
                values[slot] = self.alphabets[v].points()[d];
            }
            total += p * (term.f)(&values);
        }
        Ok(term.coeff * total)
    }

    /// Sum of pseudo-expectations of several terms.
    pub fn pseudo_expectation_sum(&self, terms: &[JuntaTerm]) -> Result<f64, FamilyError> {
        terms.iter().map(|t| self.pseudo_expectation(t)).sum()
    }

    /// Condition on `var = value`. Every table containing `var` is sliced
    /// and renormalized; a table not containing `var` survives only when
    /// some stored superset includes `var` (its slice is the conditioned
    /// version). The result has degree one lower and `var` frozen.
    pub fn condition(&self, var: VarId, value: f64) -> Result<Self, FamilyError> {
        let digit = self.alphabets[var].index_of(value).ok_or(FamilyError::UnknownValue {
            var: self.vars[var].to_string(),
            value,
        })?;
        let mass = self.marginal(var)?[digit];
        if mass < DEFAULT_EPS_COND {
            return Err(FamilyError::ZeroProbability {
                var: self.vars[var].to_string(),
                value,
                mass,
            });
        }
        let mut new_tables: BTreeMap<Vec<VarId>, LocalTable> = BTreeMap::new();
        for (key, table) in &self.tables {
            let Some(pos) = key.iter().position(|&v| v == var) else { continue };
            let rest: Vec<VarId> = key.iter().copied().filter(|&v| v != var).collect();
            if rest.is_empty() {
                continue;
            }
            let shape = Shape { sizes: key.iter().map(|&v| self.alphabets[v].len()).collect() };
            let rest_shape = Shape { sizes: rest.iter().map(|&v| self.alphabets[v].len()).collect() };
            let mut probs = vec![0.0; rest_shape.cells()];
            let mut slice_mass = 0.0;
            for (idx, p) in table.probs.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let digits = shape.decode(idx);
                if digits[pos] != digit {
                    continue;
                }
                let proj: Vec<usize> = digits
                    .iter()
                    .enumerate()
                    .filter(|(q, _)| *q != pos)
                    .map(|(_, &d)| d)
                    .collect();
                probs[rest_shape.encode(&proj)] += p;
                slice_mass += p;
            }
            if slice_mass <= 0.0 {
                continue;
            }
            for p in probs.iter_mut() {
                *p /= slice_mass;
            }
            new_tables.insert(rest.clone(), LocalTable { vars: rest, probs });
        }
        let mut out = Self {
            vars: self.vars.clone(),
            alphabets: self.alphabets.clone(),
            degree: self.degree.saturating_sub(1),
            tables: new_tables,
            frozen: self.frozen.clone(),
            eps_feas: self.eps_feas,
        };
        out.frozen.push((self.vars[var].clone(), value));
        Ok(out)
    }

    /// Sequentially sample each variable from its current 1-wise marginal
    /// and condition on the draw. Deterministic given the rng. Fails before
    /// any mutation if the degree budget is too small.
    pub fn sample_and_condition<R: Rng>(
        &self,
        vars: &[VarId],
        rng: &mut R,
    ) -> Result<(Self, Vec<(VariableIndex, f64)>), FamilyError> {
        if vars.len() + 2 > self.degree && !vars.is_empty() {
            return Err(FamilyError::DegreeExhausted {
                degree: self.degree,
                requested: vars.len(),
            });
        }
        let mut fam = self.clone();
        let mut trace = Vec::with_capacity(vars.len());
        for &v in vars {
            let marg = fam.marginal(v)?;
            let digit = sample_index(&marg, rng);
            let value = fam.alphabets[v].points()[digit];
            fam = fam.condition(v, value)?;
            trace.push((self.vars[v].clone(), value));
        }
        Ok((fam, trace))
    }

    /// The pinned value of a conditioned variable, if any.
    pub fn frozen_value(&self, var: VarId) -> Option<f64> {
        let name = &self.vars[var];
        self.frozen
            .iter()
            .rev()
            .find(|(v, _)| v == name)
            .map(|(_, x)| *x)
    }

    /// Round one variable: draw from its 1-wise marginal (sample mode) or
    /// return its pseudo-mean (expectation mode). Conditioned variables
    /// round to their pinned value in both modes.
    pub fn round_scalar<R: Rng>(
        &self,
        var: VarId,
        mode: RoundingMode,
        rng: &mut R,
    ) -> Result<f64, FamilyError> {
        if let Some(x) = self.frozen_value(var) {
            return Ok(x);
        }
        let marg = self.marginal(var)?;
        let pts = self.alphabets[var].points();
        Ok(match mode {
            RoundingMode::Sample => pts[sample_index(&marg, rng)],
            RoundingMode::Expectation => marg.iter().zip(pts).map(|(p, x)| p * x).sum(),
        })
    }

    /// Round a group of variables jointly from their junta table (used for
    /// vector-valued variables whose coordinates must stay coupled).
    pub fn round_group<R: Rng>(
        &self,
        vars: &[VarId],
        mode: RoundingMode,
        rng: &mut R,
    ) -> Result<Vec<f64>, FamilyError> {
        match mode {
            RoundingMode::Expectation => vars
                .iter()
                .map(|&v| self.round_scalar(v, RoundingMode::Expectation, rng))
                .collect(),
            RoundingMode::Sample => {
                let unfrozen: Vec<VarId> =
                    vars.iter().copied().filter(|&v| self.frozen_value(v).is_none()).collect();
                if unfrozen.len() < vars.len() {
                    let mut out = Vec::with_capacity(vars.len());
                    let sampled = if unfrozen.is_empty() {
                        Vec::new()
                    } else {
                        self.round_group(&unfrozen, mode, rng)?
                    };
                    let mut si = 0;
                    for &v in vars {
                        if let Some(x) = self.frozen_value(v) {
                            out.push(x);
                        } else {
                            out.push(sampled[si]);
                            si += 1;
                        }
                    }
                    return Ok(out);
                }
                let table = self.marginal_table(vars)?;
                let shape =
                    Shape { sizes: table.vars.iter().map(|&v| self.alphabets[v].len()).collect() };
                let idx = sample_index(&table.probs, rng);
                let digits = shape.decode(idx);
                // report in the caller's order
                let mut out = Vec::with_capacity(vars.len());
                for &v in vars {
                    let slot = table.vars.iter().position(|&w| w == v).unwrap();
                    out.push(self.alphabets[v].points()[digits[slot]]);
                }
                Ok(out)
            }
        }
    }

    /// Covariance of f(x_i) and g(x_j) in their pairwise local distribution
    /// (1-wise when i = j, giving the variance of f).
    pub fn pair_covariance(
        &self,
        var_i: VarId,
        f: &JuntaClosure,
        var_j: VarId,
        g: &JuntaClosure,
    ) -> Result<f64, FamilyError> {
        if var_i != var_j && self.degree < 2 {
            return Err(FamilyError::DegreeTooLowForPairs(self.degree));
        }
        let fi = {
            let f = f.clone();
            JuntaTerm::new(1.0, vec![var_i], move |v| f(&[v[0]]))
        };
        let gj = {
            let g = g.clone();
            JuntaTerm::new(1.0, vec![var_j], move |v| g(&[v[0]]))
        };
        let mean_f = self.pseudo_expectation(&fi)?;
        let mean_g = self.pseudo_expectation(&gj)?;
        let joint = if var_i == var_j {
            let f = f.clone();
            let g = g.clone();
            self.pseudo_expectation(&JuntaTerm::new(1.0, vec![var_i], move |v| {
                f(&[v[0]]) * g(&[v[0]])
            }))?
        } else {
            let f = f.clone();
            let g = g.clone();
            let (lo, hi, swap) = if var_i < var_j { (var_i, var_j, false) } else { (var_j, var_i, true) };
            self.pseudo_expectation(&JuntaTerm::new(1.0, vec![lo, hi], move |v| {
                if swap {
                    f(&[v[1]]) * g(&[v[0]])
                } else {
                    f(&[v[0]]) * g(&[v[1]])
                }
            }))?
        };
        Ok(joint - mean_f * mean_g)
    }

    /// Plain covariance of two variables.
    pub fn covariance(&self, var_i: VarId, var_j: VarId) -> Result<f64, FamilyError> {
        let id: JuntaClosure = Arc::new(|v: &[f64]| v[0]);
        self.pair_covariance(var_i, &id, var_j, &id)
    }

    /// Scan every table for negativity, mass deviation, and marginal
    /// mismatches between each table and its stored sub-tables.
    pub fn check_feasibility(&self) -> FeasibilityReport {
        let mut min_entry = f64::INFINITY;
        let mut max_sum_dev = 0.0f64;
        for table in self.tables.values() {
            let mut sum = 0.0;
            for p in &table.probs {
                min_entry = min_entry.min(*p);
                sum += p;
            }
            max_sum_dev = max_sum_dev.max((sum - 1.0).abs());
        }
        let mut max_cons = 0.0f64;
        for (key, _table) in &self.tables {
            if key.len() < 2 {
                continue;
            }
            for drop in 0..key.len() {
                let sub: Vec<VarId> = key
                    .iter()
                    .enumerate()
                    .filter(|(q, _)| *q != drop)
                    .map(|(_, &v)| v)
                    .collect();
                if let Some(stored) = self.tables.get(&sub) {
                    let derived = self
                        .marginalize_specific(key, &sub)
                        .expect("subset marginal");
                    for (a, b) in derived.iter().zip(&stored.probs) {
                        max_cons = max_cons.max((a - b).abs());
                    }
                }
            }
        }
        if min_entry == f64::INFINITY {
            min_entry = 0.0;
        }
        FeasibilityReport {
            min_entry,
            max_sum_deviation: max_sum_dev,
            max_consistency_deviation: max_cons,
        }
    }

    fn marginalize_specific(&self, from: &[VarId], onto: &[VarId]) -> Option<Vec<f64>> {
        let table = self.tables.get(from)?;
        let shape = Shape { sizes: from.iter().map(|&v| self.alphabets[v].len()).collect() };
        let onto_shape = Shape { sizes: onto.iter().map(|&v| self.alphabets[v].len()).collect() };
        let pos: Vec<usize> = onto
            .iter()
            .map(|v| from.iter().position(|w| w == v).unwrap())
            .collect();
        let mut out = vec![0.0; onto_shape.cells()];
        for (idx, p) in table.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let digits = shape.decode(idx);
            let proj: Vec<usize> = pos.iter().map(|&q| digits[q]).collect();
            out[onto_shape.encode(&proj)] += p;
        }
        Some(out)
    }

    /// JSON export: degree, variables, and all tables.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct TableOut<'a> {
            vars: Vec<String>,
            probs: &'a [f64],
        }
        let tables: Vec<TableOut> = self
            .tables
            .values()
            .map(|t| TableOut {
                vars: t.vars.iter().map(|&v| self.vars[v].to_string()).collect(),
                probs: &t.probs,
            })
            .collect();
        serde_json::json!({
            "degree": self.degree,
            "variables": self.vars.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "frozen": self.frozen.iter().map(|(v, x)| (v.to_string(), x)).collect::<Vec<_>>(),
            "tables": tables,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RoundingMode {
    Sample,
    Expectation,
}

fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        let p = p.max(0.0);
        if draw < p {
            return i;
        }
        draw -= p;
    }
    probs.len() - 1
}

/// All nonempty subsets of 0..n with size at most `k`, sorted by (size, lex).
pub(crate) fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !current.is_empty() {
            out.push(current.clone());
        }
        if current.len() == k {
            return;
        }
        for v in start..n {
            current.push(v);
            rec(v + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sign_pair_family() -> LocalDistributionFamily {
        // perfectly correlated signs: P(x=y=1) = P(x=y=-1) = 1/2
        LocalDistributionFamily::from_distribution(
            vec![VariableIndex::scalar("x", 0), VariableIndex::scalar("y", 0)],
            vec![
                Alphabet::new(vec![-1.0, 1.0]).unwrap(),
                Alphabet::new(vec![-1.0, 1.0]).unwrap(),
            ],
            2,
            &[(vec![1.0, 1.0], 0.5), (vec![-1.0, -1.0], 0.5)],
        )
        .unwrap()
    }

    #[test]
    fn true_distribution_is_exactly_feasible() {
        let fam = sign_pair_family();
        let rep = fam.check_feasibility();
        assert!(rep.ok(1e-12), "{rep:?}");
    }

    #[test]
    fn pseudo_expectation_examples() {
        let fam = sign_pair_family();
        let c = JuntaTerm::new(1.0, vec![], |_| 2.5);
        assert_eq!(fam.pseudo_expectation(&c).unwrap(), 2.5);
        let x = JuntaTerm::monomial(1.0, vec![(0, 1)]);
        assert_eq!(fam.pseudo_expectation(&x).unwrap(), 0.0);
        let x2y2 = JuntaTerm::monomial(1.0, vec![(0, 2), (1, 2)]);
        assert!(fam.pseudo_expectation(&x2y2).unwrap() >= 0.0);
        let xy = JuntaTerm::monomial(1.0, vec![(0, 1), (1, 1)]);
        assert_relative_eq!(fam.pseudo_expectation(&xy).unwrap(), 1.0);
    }

    #[test]
    fn conditioning_sign_model() {
        let fam = sign_pair_family();
        let cond = fam.condition(0, 1.0).unwrap();
        // y marginal becomes a point mass at 1 (Bayes on the 4-cell table)
        let marg = cond.marginal(1).unwrap();
        assert_relative_eq!(marg[1], 1.0, epsilon = 1e-12);
        assert_eq!(cond.degree(), 1);
        assert_eq!(cond.frozen().len(), 1);
        // zero-probability conditioning rejected
        assert!(fam.condition(0, -1.0).is_ok());
        let anti = LocalDistributionFamily::from_distribution(
            vec![VariableIndex::scalar("x", 0)],
            vec![Alphabet::new(vec![0.0, 1.0]).unwrap()],
            1,
            &[(vec![0.0], 1.0)],
        )
        .unwrap();
        assert!(matches!(
            anti.condition(0, 1.0),
            Err(FamilyError::ZeroProbability { .. })
        ));
    }

    #[test]
    fn conditioning_product_family_leaves_marginals() {
        // independent coins
        let fam = LocalDistributionFamily::from_distribution(
            vec![VariableIndex::scalar("x", 0), VariableIndex::scalar("x", 1)],
            vec![
                Alphabet::new(vec![0.0, 1.0]).unwrap(),
                Alphabet::new(vec![0.0, 1.0]).unwrap(),
            ],
            2,
            &[
                (vec![0.0, 0.0], 0.21),
                (vec![0.0, 1.0], 0.09),
                (vec![1.0, 0.0], 0.49),
                (vec![1.0, 1.0], 0.21),
            ],
        )
        .unwrap();
        let before = fam.marginal(1).unwrap();
        let cond = fam.condition(0, 1.0).unwrap();
        let after = cond.marginal(1).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn pair_covariance_examples() {
        let fam = sign_pair_family();
        assert_relative_eq!(fam.covariance(0, 1).unwrap(), 1.0, epsilon = 1e-12);
        // pseudo-variance nonnegative
        assert!(fam.covariance(0, 0).unwrap() >= -1e-12);
    }

    #[test]
    fn sample_and_condition_respects_budget() {
        let fam = sign_pair_family(); // degree 2
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // |vars| = 1 needs degree >= 3
        assert!(matches!(
            fam.sample_and_condition(&[0], &mut rng),
            Err(FamilyError::DegreeExhausted { .. })
        ));
        // empty draw is a no-op
        let (same, trace) = fam.sample_and_condition(&[], &mut rng).unwrap();
        assert!(trace.is_empty());
        assert_eq!(same.degree(), 2);
    }

    #[test]
    fn rounding_modes() {
        let fam = LocalDistributionFamily::from_distribution(
            vec![VariableIndex::scalar("x", 0)],
            vec![Alphabet::new(vec![0.0, 1.0]).unwrap()],
            1,
            &[(vec![0.0], 0.5), (vec![1.0], 0.5)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = fam.round_scalar(0, RoundingMode::Expectation, &mut rng).unwrap();
        assert_relative_eq!(e, 0.5, epsilon = 1e-12);
        let s = fam.round_scalar(0, RoundingMode::Sample, &mut rng).unwrap();
        assert!(s == 0.0 || s == 1.0);

        // point mass: both modes return the point
        let pm = LocalDistributionFamily::from_distribution(
            vec![VariableIndex::scalar("x", 0)],
            vec![Alphabet::new(vec![-0.5, 2.0]).unwrap()],
            1,
            &[(vec![2.0], 1.0)],
        )
        .unwrap();
        assert_eq!(pm.round_scalar(0, RoundingMode::Sample, &mut rng).unwrap(), 2.0);
        assert_eq!(pm.round_scalar(0, RoundingMode::Expectation, &mut rng).unwrap(), 2.0);
    }

    #[test]
    fn subsets_enumeration() {
        let subs = subsets_up_to(3, 2);
        assert_eq!(
            subs,
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2]
            ]
        );
    }

    #[test]
    fn sampled_values_match_marginals_chi_square() {
        // product family; draw 10^4 samples of x and compare to the marginal
        let fam = LocalDistributionFamily::from_distribution(
            vec![VariableIndex::scalar("x", 0), VariableIndex::scalar("x", 1)],
            vec![
                Alphabet::new(vec![0.0, 1.0, 2.0]).unwrap(),
                Alphabet::new(vec![0.0, 1.0]).unwrap(),
            ],
            3,
            &[
                (vec![0.0, 0.0], 0.10),
                (vec![0.0, 1.0], 0.10),
                (vec![1.0, 0.0], 0.25),
                (vec![1.0, 1.0], 0.25),
                (vec![2.0, 0.0], 0.15),
                (vec![2.0, 1.0], 0.15),
            ],
        )
        .unwrap();
        let expected = [0.2, 0.5, 0.3];
        let trials = 10_000usize;
        let mut counts = [0usize; 3];
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let (_, trace) = fam.sample_and_condition(&[0], &mut rng).unwrap();
            counts[trace[0].1 as usize] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(c, e)| {
                let exp = e * trials as f64;
                (*c as f64 - exp).powi(2) / exp
            })
            .sum();
        // df = 2; chi^2 critical value at p = 0.01 is 9.21
        assert!(chi2 < 9.21, "chi2 = {chi2}, counts = {counts:?}");
    }
}
