//! Compilation of local-distribution models into linear programs.
//!
//! Variables of the LP are the cells of every materialized junta table.
//! Rows are: singleton normalization, marginal-consistency between each
//! table and its one-smaller sub-tables, and the user constraints (each a
//! linear functional of pseudo-expectations, enforced with a uniform
//! additive slack). Functional dependences between variables are imposed
//! by zero-forcing the violating cells, which survives conditioning
//! exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::simplex::{self, LpOutcome, LpProblem, RowKind, SimplexOptions};
use super::{
    Alphabet, FamilyError, JuntaTerm, LocalDistributionFamily, LocalTable, Shape, VarId,
    VariableIndex, DEFAULT_EPS_FEAS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Clone)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<JuntaTerm>,
    pub relation: Relation,
    pub rhs: f64,
    pub slack: f64,
}

impl LinearConstraint {
    pub fn eq(name: impl Into<String>, terms: Vec<JuntaTerm>, rhs: f64, slack: f64) -> Self {
        Self { name: name.into(), terms, relation: Relation::Eq, rhs, slack }
    }

    pub fn le(name: impl Into<String>, terms: Vec<JuntaTerm>, rhs: f64) -> Self {
        Self { name: name.into(), terms, relation: Relation::Le, rhs, slack: 0.0 }
    }

    pub fn ge(name: impl Into<String>, terms: Vec<JuntaTerm>, rhs: f64) -> Self {
        Self { name: name.into(), terms, relation: Relation::Ge, rhs, slack: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("constraint '{name}' touches {touched} variables {vars:?}, exceeding degree {degree}")]
    DegreeTooSmall { name: String, vars: Vec<String>, touched: usize, degree: usize },
    #[error("table-cell budget exceeded: model needs {needed} cells, budget {budget}")]
    CellBudget { needed: usize, budget: usize },
    #[error(transparent)]
    Family(#[from] FamilyError),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("model infeasible (phase-one residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error("model unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

type ForbidPredicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// How much marginal consistency the compiled LP enforces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConsistencyMode {
    /// Materialize the full downward closure of every junta and tie every
    /// table to all its one-smaller sub-tables. The reference semantics.
    Full,
    /// Materialize only the declared juntas (plus singletons) and tie each
    /// table to its immediate family subsets. Marginalization composes, so
    /// chains through the family stay consistent; juntas outside the family
    /// are simply not constrained. A weaker but still valid relaxation that
    /// keeps vector-variable models small.
    Anchored,
}

/// Declarative model description; `build` compiles it to an [`LpModel`].
pub struct ModelBuilder {
    vars: Vec<VariableIndex>,
    alphabets: Vec<Arc<Alphabet>>,
    degree: usize,
    constraints: Vec<LinearConstraint>,
    objective: Vec<JuntaTerm>,
    sense: Sense,
    support: Vec<Vec<VarId>>,
    forbidden: Vec<(Vec<VarId>, ForbidPredicate)>,
    cell_budget: usize,
    eps_feas: f64,
    consistency: ConsistencyMode,
}

impl ModelBuilder {
    pub fn new(degree: usize) -> Self {
        Self {
            vars: Vec::new(),
            alphabets: Vec::new(),
            degree,
            constraints: Vec::new(),
            objective: Vec::new(),
            sense: Sense::Minimize,
            support: Vec::new(),
            forbidden: Vec::new(),
            cell_budget: 2_000_000,
            eps_feas: DEFAULT_EPS_FEAS,
            consistency: ConsistencyMode::Full,
        }
    }

    pub fn set_consistency(&mut self, mode: ConsistencyMode) {
        self.consistency = mode;
    }

    pub fn add_variable(&mut self, name: VariableIndex, alphabet: Alphabet) -> VarId {
        self.vars.push(name);
        self.alphabets.push(Arc::new(alphabet));
        self.vars.len() - 1
    }

    pub fn add_constraint(&mut self, c: LinearConstraint) {
        self.constraints.push(c);
    }

    pub fn set_objective(&mut self, terms: Vec<JuntaTerm>, sense: Sense) {
        self.objective = terms;
        self.sense = sense;
    }

    /// Materialize a junta even if no constraint mentions it (needed for
    /// conditioning support and post-solve diagnostics).
    pub fn require_junta(&mut self, vars: &[VarId]) {
        let mut v = vars.to_vec();
        v.sort_unstable();
        v.dedup();
        self.support.push(v);
    }

    /// Zero-force every cell on which `pred` (over the values of `vars`,
    /// in the given order) returns true. Risk-free way to encode exact
    /// functional dependences like w = g(u).
    pub fn forbid_assignments<F>(&mut self, vars: &[VarId], pred: F)
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&i| vars[i]);
        let sorted: Vec<VarId> = order.iter().map(|&i| vars[i]).collect();
        let wrapped: ForbidPredicate = Arc::new(move |sorted_vals: &[f64]| {
            let mut orig = vec![0.0; sorted_vals.len()];
            for (slot, &opos) in order.iter().enumerate() {
                orig[opos] = sorted_vals[slot];
            }
            pred(&orig)
        });
        self.forbidden.push((sorted, wrapped));
    }

    pub fn set_cell_budget(&mut self, budget: usize) {
        self.cell_budget = budget;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn build(self) -> Result<LpModel, ModelError> {
        let degree = self.degree;
        let check = |name: &str, vars: &[VarId]| -> Result<(), ModelError> {
            if vars.len() > degree {
                return Err(ModelError::DegreeTooSmall {
                    name: name.to_string(),
                    vars: vars.iter().map(|&v| self.vars[v].to_string()).collect(),
                    touched: vars.len(),
                    degree,
                });
            }
            Ok(())
        };

        // Collect the junta family: singletons and every term/support/forbid
        // var-set; in Full mode also the whole downward closure.
        let mut juntas: BTreeSet<Vec<VarId>> = BTreeSet::new();
        for v in 0..self.vars.len() {
            juntas.insert(vec![v]);
        }
        let closure = self.consistency == ConsistencyMode::Full;
        let add_set = |set: &[VarId], juntas: &mut BTreeSet<Vec<VarId>>| {
            if set.is_empty() {
                return;
            }
            if closure {
                let k = set.len();
                for mask in 1u32..(1 << k) {
                    let subset: Vec<VarId> =
                        (0..k).filter(|&i| mask & (1 << i) != 0).map(|i| set[i]).collect();
                    juntas.insert(subset);
                }
            } else {
                juntas.insert(set.to_vec());
            }
        };
        for c in &self.constraints {
            for t in &c.terms {
                check(&c.name, &t.vars)?;
                add_set(&t.vars, &mut juntas);
            }
        }
        for t in &self.objective {
            check("objective", &t.vars)?;
            add_set(&t.vars, &mut juntas);
        }
        for s in &self.support {
            check("support junta", s)?;
            add_set(s, &mut juntas);
        }
        for (s, _) in &self.forbidden {
            check("forbidden assignment", s)?;
            add_set(s, &mut juntas);
        }

        let mut juntas: Vec<Vec<VarId>> = juntas.into_iter().collect();
        juntas.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

        let shape_of = |j: &[VarId]| Shape {
            sizes: j.iter().map(|&v| self.alphabets[v].len()).collect(),
        };

        let mut offsets = Vec::with_capacity(juntas.len());
        let mut total_cells = 0usize;
        for j in &juntas {
            offsets.push(total_cells);
            total_cells += shape_of(j).cells();
        }
        if total_cells > self.cell_budget {
            return Err(ModelError::CellBudget { needed: total_cells, budget: self.cell_budget });
        }
        let junta_index: BTreeMap<Vec<VarId>, usize> =
            juntas.iter().cloned().enumerate().map(|(i, j)| (j, i)).collect();

        // Forced-zero mask: a cell dies when any forbid predicate over a
        // subset of its junta fires on the projected values.
        let mut dead = vec![false; total_cells];
        for (fvars, pred) in &self.forbidden {
            for (ji, junta) in juntas.iter().enumerate() {
                if !fvars.iter().all(|v| junta.contains(v)) {
                    continue;
                }
                let shape = shape_of(junta);
                let pos: Vec<usize> = fvars
                    .iter()
                    .map(|v| junta.iter().position(|w| w == v).unwrap())
                    .collect();
                for cell in 0..shape.cells() {
                    if dead[offsets[ji] + cell] {
                        continue;
                    }
                    let digits = shape.decode(cell);
                    let vals: Vec<f64> = pos
                        .iter()
                        .map(|&q| self.alphabets[junta[q]].points()[digits[q]])
                        .collect();
                    if pred(&vals) {
                        dead[offsets[ji] + cell] = true;
                    }
                }
            }
        }

        // Live-column numbering.
        let mut col_of = vec![usize::MAX; total_cells];
        let mut ncols = 0usize;
        for (cell, d) in dead.iter().enumerate() {
            if !d {
                col_of[cell] = ncols;
                ncols += 1;
            }
        }

        let mut rows: Vec<(Vec<(usize, f64)>, RowKind, f64, String)> = Vec::new();

        // Singleton normalization.
        for (ji, junta) in juntas.iter().enumerate() {
            if junta.len() != 1 {
                continue;
            }
            let shape = shape_of(junta);
            let coeffs: Vec<(usize, f64)> = (0..shape.cells())
                .filter_map(|c| {
                    let cell = offsets[ji] + c;
                    (!dead[cell]).then(|| (col_of[cell], 1.0))
                })
                .collect();
            rows.push((coeffs, RowKind::Eq, 1.0, format!("norm_{}", self.vars[junta[0]])));
        }

        // Consistency rows: tie each table to its immediate family subsets
        // (sub-tables with no intermediate family member between them). In
        // Full mode the closure makes these exactly the single-variable
        // drops; in Anchored mode they are the declared anchors.
        for (ji, junta) in juntas.iter().enumerate() {
            if junta.len() < 2 {
                continue;
            }
            let shape = shape_of(junta);
            let subsets: Vec<&Vec<VarId>> = juntas
                .iter()
                .filter(|s| s.len() < junta.len() && s.iter().all(|v| junta.contains(v)))
                .collect();
            let immediate: Vec<&Vec<VarId>> = subsets
                .iter()
                .filter(|s| {
                    !subsets.iter().any(|t| {
                        t.len() > s.len()
                            && t.len() < junta.len()
                            && s.iter().all(|v| t.contains(v))
                    })
                })
                .copied()
                .collect();
            for sub in immediate {
                let sji = junta_index[sub];
                let sub_shape = shape_of(sub);
                let pos: Vec<usize> = sub
                    .iter()
                    .map(|v| junta.iter().position(|w| w == v).unwrap())
                    .collect();
                // accumulate covering cells per projected sub-cell
                let mut per_sub: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sub_shape.cells()];
                for cell in 0..shape.cells() {
                    let abs_cell = offsets[ji] + cell;
                    if dead[abs_cell] {
                        continue;
                    }
                    let digits = shape.decode(cell);
                    let proj: Vec<usize> = pos.iter().map(|&q| digits[q]).collect();
                    per_sub[sub_shape.encode(&proj)].push((col_of[abs_cell], 1.0));
                }
                for (sub_cell, mut coeffs) in per_sub.into_iter().enumerate() {
                    let target = offsets[sji] + sub_cell;
                    if dead[target] {
                        if coeffs.is_empty() {
                            continue; // both sides structurally zero
                        }
                        rows.push((coeffs, RowKind::Eq, 0.0, String::new()));
                    } else {
                        coeffs.push((col_of[target], -1.0));
                        rows.push((coeffs, RowKind::Eq, 0.0, String::new()));
                    }
                }
            }
        }

        // User constraint rows.
        let accumulate = |terms: &[JuntaTerm]| -> Vec<(usize, f64)> {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let mut constant = 0.0;
            for term in terms {
                if term.vars.is_empty() {
                    constant += term.coeff * (term.f)(&[]);
                    continue;
                }
                let ji = junta_index[&term.vars];
                let shape = shape_of(&term.vars);
                for cell in 0..shape.cells() {
                    let abs_cell = offsets[ji] + cell;
                    if dead[abs_cell] {
                        continue;
                    }
                    let digits = shape.decode(cell);
                    let vals: Vec<f64> = term
                        .vars
                        .iter()
                        .zip(&digits)
                        .map(|(&v, &d)| self.alphabets[v].points()[d])
                        .collect();
                    let w = term.coeff * (term.f)(&vals);
                    if w != 0.0 {
                        *acc.entry(col_of[abs_cell]).or_insert(0.0) += w;
                    }
                }
            }
            // Fold the constant into the first singleton normalization-style
            // trick: spread over any normalized table. Simpler: constants are
            // moved to the rhs by the caller; encode via sentinel.
            if constant != 0.0 {
                acc.insert(usize::MAX, constant);
            }
            acc.into_iter().collect()
        };

        let mut user_row_names = Vec::new();
        for c in &self.constraints {
            let mut coeffs = accumulate(&c.terms);
            let mut constant = 0.0;
            coeffs.retain(|(col, w)| {
                if *col == usize::MAX {
                    constant = *w;
                    false
                } else {
                    true
                }
            });
            let rhs = c.rhs - constant;
            match c.relation {
                Relation::Eq if c.slack > 0.0 => {
                    rows.push((coeffs.clone(), RowKind::Le, rhs + c.slack, format!("{}_ub", c.name)));
                    let neg: Vec<(usize, f64)> = coeffs.iter().map(|&(j, w)| (j, -w)).collect();
                    rows.push((neg, RowKind::Le, -(rhs - c.slack), format!("{}_lb", c.name)));
                    user_row_names.push(c.name.clone());
                }
                Relation::Eq => {
                    rows.push((coeffs, RowKind::Eq, rhs, c.name.clone()));
                    user_row_names.push(c.name.clone());
                }
                Relation::Le => {
                    rows.push((coeffs, RowKind::Le, rhs + c.slack, c.name.clone()));
                    user_row_names.push(c.name.clone());
                }
                Relation::Ge => {
                    let neg: Vec<(usize, f64)> = coeffs.iter().map(|&(j, w)| (j, -w)).collect();
                    rows.push((neg, RowKind::Le, -(rhs - c.slack), c.name.clone()));
                    user_row_names.push(c.name.clone());
                }
            }
        }

        // Objective vector.
        let mut objective = vec![0.0; ncols];
        let mut obj_constant = 0.0;
        for (col, w) in accumulate(&self.objective) {
            if col == usize::MAX {
                obj_constant = w;
            } else {
                objective[col] += w;
            }
        }
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        for c in objective.iter_mut() {
            *c *= sign;
        }

        Ok(LpModel {
            vars: self.vars,
            alphabets: self.alphabets,
            degree,
            juntas,
            offsets,
            dead,
            col_of,
            ncols,
            rows,
            objective,
            obj_constant,
            sense: self.sense,
            eps_feas: self.eps_feas,
        })
    }
}

/// Compiled model, ready to solve or export.
pub struct LpModel {
    vars: Vec<VariableIndex>,
    alphabets: Vec<Arc<Alphabet>>,
    degree: usize,
    juntas: Vec<Vec<VarId>>,
    offsets: Vec<usize>,
    dead: Vec<bool>,
    col_of: Vec<usize>,
    ncols: usize,
    rows: Vec<(Vec<(usize, f64)>, RowKind, f64, String)>,
    objective: Vec<f64>,
    obj_constant: f64,
    sense: Sense,
    eps_feas: f64,
}

/// Family plus the LP objective value (in the user's sense).
pub struct SolvedModel {
    pub family: LocalDistributionFamily,
    pub objective_value: f64,
}

impl LpModel {
    pub fn num_columns(&self) -> usize {
        self.ncols
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cells(&self) -> usize {
        self.dead.len()
    }

    pub fn solve(&self, opts: &SimplexOptions) -> Result<SolvedModel, SolveError> {
        let problem = LpProblem {
            ncols: self.ncols,
            rows: self.rows.iter().map(|(c, k, r, _)| (c.clone(), *k, *r)).collect(),
            objective: self.objective.clone(),
        };
        let debug = std::env::var("GCROUND_LP_DEBUG").is_ok();
        let started = std::time::Instant::now();
        if debug {
            eprintln!("[lp] solving {} cols x {} rows", self.ncols, self.rows.len());
        }
        let outcome = simplex::solve(&problem, opts);
        if debug {
            eprintln!("[lp] done in {:.2?}", started.elapsed());
        }
        match outcome {
            LpOutcome::Optimal { x, objective } => {
                let mut tables = BTreeMap::new();
                for (ji, junta) in self.juntas.iter().enumerate() {
                    let shape = Shape {
                        sizes: junta.iter().map(|&v| self.alphabets[v].len()).collect(),
                    };
                    let probs: Vec<f64> = (0..shape.cells())
                        .map(|c| {
                            let cell = self.offsets[ji] + c;
                            if self.dead[cell] {
                                0.0
                            } else {
                                x[self.col_of[cell]]
                            }
                        })
                        .collect();
                    tables.insert(junta.clone(), LocalTable { vars: junta.clone(), probs });
                }
                let family = LocalDistributionFamily::from_tables(
                    self.vars.clone(),
                    self.alphabets.clone(),
                    self.degree,
                    tables,
                    self.eps_feas,
                );
                let sign = match self.sense {
                    Sense::Minimize => 1.0,
                    Sense::Maximize => -1.0,
                };
                Ok(SolvedModel { family, objective_value: sign * objective + self.obj_constant })
            }
            LpOutcome::Infeasible { residual } => Err(SolveError::Infeasible { residual }),
            LpOutcome::Unbounded => Err(SolveError::Unbounded),
            LpOutcome::IterationLimit => Err(SolveError::IterationLimit),
        }
    }

    /// Plain-text LP interchange export (objective row, constraint rows,
    /// bounds) for debugging against external solvers.
    pub fn to_lp_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "\\ local-distribution relaxation: {} columns, {} rows", self.ncols, self.rows.len());
        let _ = writeln!(s, "{}", if self.sense == Sense::Minimize { "Minimize" } else { "Maximize" });
        let sign = if self.sense == Sense::Minimize { 1.0 } else { -1.0 };
        let mut line = String::from(" obj:");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(line, " {:+.12} x{}", sign * c, j);
                if line.len() > 200 {
                    let _ = writeln!(s, "{line}");
                    line = String::from("     ");
                }
            }
        }
        let _ = writeln!(s, "{line}");
        let _ = writeln!(s, "Subject To");
        for (i, (coeffs, kind, rhs, name)) in self.rows.iter().enumerate() {
            let label = if name.is_empty() { format!("c{i}") } else { name.replace(' ', "_") };
            let mut line = format!(" {label}:");
            for (j, w) in coeffs {
                let _ = write!(line, " {w:+.12} x{j}");
                if line.len() > 200 {
                    let _ = writeln!(s, "{line}");
                    line = String::from("     ");
                }
            }
            let op = match kind {
                RowKind::Eq => "=",
                RowKind::Le => "<=",
            };
            let _ = writeln!(s, "{line} {op} {rhs:.12}");
        }
        let _ = writeln!(s, "Bounds");
        for j in 0..self.ncols {
            let _ = writeln!(s, " 0 <= x{j}");
        }
        let _ = writeln!(s, "End");
        s
    }
}
