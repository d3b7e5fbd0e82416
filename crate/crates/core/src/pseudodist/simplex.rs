//! Bundled dense revised-simplex LP solver.
//!
//! Two-phase primal simplex with an explicit basis inverse. Pricing uses
//! Dantzig's rule and switches to Bland's rule after a stall, which breaks
//! cycles on the (heavily degenerate) consistency systems the relaxations
//! produce. Everything is index-ordered, so runs are deterministic.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Le,
}

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub ncols: usize,
    /// (sparse coefficients, kind, rhs)
    pub rows: Vec<(Vec<(usize, f64)>, RowKind, f64)>,
    /// Dense objective over the structural columns; always minimized.
    pub objective: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { pivot_tol: 1e-9, feas_tol: 1e-7, max_iter: 200_000 }
    }
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible { residual: f64 },
    Unbounded,
    IterationLimit,
}

struct Tableau {
    m: usize,
    ncols: usize, // structural + slack
    cols: Vec<Vec<(usize, f64)>>,
    costs: Vec<f64>,
    basis: Vec<usize>,    // >= ncols means artificial for that row
    binv: Vec<f64>,       // m x m row-major
    xb: Vec<f64>,
    artificial_cost: bool,
}

impl Tableau {
    fn col_times_binv_row(&self, row: &[f64], j: usize) -> f64 {
        self.cols[j].iter().map(|&(r, v)| row[r] * v).sum()
    }

    fn basic_cost(&self, var: usize) -> f64 {
        if self.artificial_cost {
            if var >= self.ncols {
                1.0
            } else {
                0.0
            }
        } else if var >= self.ncols {
            0.0
        } else {
            self.costs[var]
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = self.basic_cost(self.basis[i]);
            if cb == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yj, bij) in y.iter_mut().zip(row) {
                *yj += cb * bij;
            }
        }
        y
    }

    fn reduced_cost(&self, y: &[f64], j: usize) -> f64 {
        let cj = if self.artificial_cost { 0.0 } else { self.costs[j] };
        let dot: f64 = self.cols[j].iter().map(|&(r, v)| y[r] * v).sum();
        cj - dot
    }

    fn objective_value(&self) -> f64 {
        (0..self.m)
            .map(|i| self.basic_cost(self.basis[i]) * self.xb[i])
            .sum()
    }

    /// w = B^-1 a_j for a structural/slack column.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(r, v) in &self.cols[j] {
            for i in 0..m {
                w[i] += self.binv[i * m + r] * v;
            }
        }
        w
    }

    fn pivot(&mut self, enter: usize, leave_row: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[leave_row];
        let theta = self.xb[leave_row] / piv;
        for i in 0..m {
            if i != leave_row {
                self.xb[i] -= theta * w[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-11 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[leave_row] = theta;
        // binv[leave_row] /= piv; binv[i] -= w[i] * binv[leave_row]
        let (before, rest) = self.binv.split_at_mut(leave_row * m);
        let (lrow, after) = rest.split_at_mut(m);
        for x in lrow.iter_mut() {
            *x /= piv;
        }
        for (i, chunk) in before.chunks_mut(m).enumerate() {
            let wi = w[i];
            if wi != 0.0 {
                for (c, l) in chunk.iter_mut().zip(lrow.iter()) {
                    *c -= wi * l;
                }
            }
        }
        for (off, chunk) in after.chunks_mut(m).enumerate() {
            let wi = w[leave_row + 1 + off];
            if wi != 0.0 {
                for (c, l) in chunk.iter_mut().zip(lrow.iter()) {
                    *c -= wi * l;
                }
            }
        }
        self.basis[leave_row] = enter;
    }
}

/// Solve a phase: returns Ok(()) at optimality, Err for unbounded/limit.
enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

fn run_phase(t: &mut Tableau, opts: &SimplexOptions, iter_budget: &mut usize) -> PhaseEnd {
    let mut bland = false;
    let mut stall = 0usize;
    let mut last_obj = f64::INFINITY;
    let mut in_basis = vec![false; t.ncols];
    for &b in &t.basis {
        if b < t.ncols {
            in_basis[b] = true;
        }
    }
    loop {
        if *iter_budget == 0 {
            return PhaseEnd::IterationLimit;
        }
        *iter_budget -= 1;

        let y = t.duals();
        // entering column
        let mut enter: Option<(usize, f64)> = None;
        for j in 0..t.ncols {
            if in_basis[j] {
                continue;
            }
            let d = t.reduced_cost(&y, j);
            if d < -opts.pivot_tol {
                if bland {
                    enter = Some((j, d));
                    break;
                }
                match enter {
                    Some((_, best)) if d >= best => {}
                    _ => enter = Some((j, d)),
                }
            }
        }
        let Some((j, _)) = enter else { return PhaseEnd::Optimal };

        let w = t.ftran(j);
        // Lexicographic ratio test: min xb/w over w > tol, ties broken by
        // the lexicographically smallest B^-1 row scaled by 1/w. This is
        // the classical anti-cycling rule; combined with the Bland pricing
        // fallback it terminates on heavily degenerate systems.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.m {
            if w[i] > opts.pivot_tol {
                let ratio = t.xb[i].max(0.0) / w[i];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-10 * (1.0 + lr.abs()) {
                            leave = Some((i, ratio));
                        } else if ratio <= lr + 1e-10 * (1.0 + lr.abs()) {
                            // lexicographic comparison of binv rows / w
                            let m = t.m;
                            let ri = &t.binv[i * m..(i + 1) * m];
                            let rl = &t.binv[li * m..(li + 1) * m];
                            for c in 0..m {
                                let a = ri[c] / w[i];
                                let b = rl[c] / w[li];
                                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                                    if a < b {
                                        leave = Some((i, ratio.min(lr)));
                                    }
                                    break;
                                }
                            }
                        }
                    }
                }
            }
        }
        let Some((leave_row, _)) = leave else { return PhaseEnd::Unbounded };

        let old = t.basis[leave_row];
        if old < t.ncols {
            in_basis[old] = false;
        }
        in_basis[j] = true;
        t.pivot(j, leave_row, &w);

        let obj = t.objective_value();
        if obj < last_obj - 1e-12 {
            last_obj = obj;
            stall = 0;
        } else {
            stall += 1;
            if stall > 200 {
                bland = true;
            }
        }
    }
}

pub fn solve(problem: &LpProblem, opts: &SimplexOptions) -> LpOutcome {
    let n_struct = problem.ncols;
    let n_slack = problem.rows.iter().filter(|r| r.1 == RowKind::Le).count();
    let ncols = n_struct + n_slack;
    let m = problem.rows.len();

    if m == 0 {
        // min c.x over x >= 0 with no constraints
        if problem.objective.iter().any(|c| *c < 0.0) {
            return LpOutcome::Unbounded;
        }
        return LpOutcome::Optimal { x: vec![0.0; n_struct], objective: 0.0 };
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
    let mut b = vec![0.0; m];
    let mut slack_idx = n_struct;
    for (i, (coeffs, kind, rhs)) in problem.rows.iter().enumerate() {
        // row equilibration keeps high-degree constraint rows conditioned
        let max_abs = coeffs
            .iter()
            .map(|(_, v)| v.abs())
            .fold(rhs.abs(), f64::max)
            .max(1e-300);
        let scale = if max_abs > 0.0 { 1.0 / max_abs } else { 1.0 };
        let rhs = rhs * scale;
        let flip = rhs < 0.0;
        let s = if flip { -scale } else { scale };
        b[i] = if flip { -rhs } else { rhs };
        for &(j, v) in coeffs {
            if v != 0.0 {
                cols[j].push((i, s * v));
            }
        }
        if *kind == RowKind::Le {
            cols[slack_idx].push((i, if flip { -1.0 } else { 1.0 }));
            slack_idx += 1;
        }
    }
    let mut costs = vec![0.0; ncols];
    costs[..n_struct].copy_from_slice(&problem.objective);

    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut t = Tableau {
        m,
        ncols,
        cols,
        costs,
        basis: (0..m).map(|i| ncols + i).collect(),
        binv,
        xb: b,
        artificial_cost: true,
    };

    let mut iter_budget = opts.max_iter;

    // Phase I
    match run_phase(&mut t, opts, &mut iter_budget) {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return LpOutcome::Infeasible { residual: f64::INFINITY },
        PhaseEnd::IterationLimit => return LpOutcome::IterationLimit,
    }
    let infeas = t.objective_value();
    let scale = 1.0 + t.xb.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeas > opts.feas_tol * scale {
        return LpOutcome::Infeasible { residual: infeas };
    }

    // Drive basic artificials out where possible; redundant rows keep their
    // artificial basic at value zero.
    for i in 0..t.m {
        if t.basis[i] < t.ncols {
            continue;
        }
        let binv_row: Vec<f64> = t.binv[i * m..(i + 1) * m].to_vec();
        let mut found = None;
        for j in 0..t.ncols {
            if t.basis.contains(&j) {
                continue;
            }
            let wij = t.col_times_binv_row(&binv_row, j);
            if wij.abs() > 1e-7 {
                found = Some(j);
                break;
            }
        }
        if let Some(j) = found {
            let w = t.ftran(j);
            t.pivot(j, i, &w);
            t.xb[i] = t.xb[i].max(0.0);
        }
    }

    // Phase II
    t.artificial_cost = false;
    match run_phase(&mut t, opts, &mut iter_budget) {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return LpOutcome::Unbounded,
        PhaseEnd::IterationLimit => return LpOutcome::IterationLimit,
    }

    let mut x = vec![0.0; n_struct];
    for i in 0..m {
        let v = t.basis[i];
        if v < n_struct {
            x[v] = t.xb[i].max(0.0);
        }
    }
    let objective = x
        .iter()
        .zip(&problem.objective)
        .map(|(xi, ci)| xi * ci)
        .sum();
    LpOutcome::Optimal { x, objective }
}
