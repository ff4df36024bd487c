//! Self-contained linear-program solver: primal simplex over variables with
//! simple lower/upper bounds, two phases, explicit basis inverse with periodic
//! refactorization. Every optimization in this crate reduces to [`solve_lp`].
//!
//! Pivot rule: Dantzig pricing for a bounded number of iterations, then
//! Bland's rule, which guarantees termination. Deterministic for a given
//! program.

use std::fmt::Write as _;
use thiserror::Error;

/// Feasibility tolerance on primal values and residuals.
pub const FEAS_TOL: f64 = 1e-7;
/// Pivot elements smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-9;
/// Relative duality-gap tolerance for an Optimal verdict.
pub const GAP_TOL: f64 = 1e-6;

const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid program: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// A linear program in the form: maximize c'x subject to row constraints
/// (each a sparse combination related to a rhs) and per-variable bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Objective coefficients (maximization).
    pub objective: Vec<f64>,
    /// Sparse column for each variable: (row index, coefficient).
    pub columns: Vec<Vec<(usize, f64)>>,
    /// Relation and right-hand side per row.
    pub rows: Vec<(Relation, f64)>,
    /// Per-variable [lower, upper]; lower must be finite, upper may be +inf.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(n_rows: usize) -> Self {
        LinearProgram {
            objective: Vec::new(),
            columns: Vec::new(),
            rows: vec![(Relation::Le, 0.0); n_rows],
            bounds: Vec::new(),
        }
    }

    /// Adds a variable, returning its index.
    pub fn add_var(&mut self, obj: f64, col: Vec<(usize, f64)>, lower: f64, upper: f64) -> usize {
        self.objective.push(obj);
        self.columns.push(col);
        self.bounds.push((lower, upper));
        self.columns.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let m = self.rows.len();
        if self.objective.len() != self.columns.len() || self.bounds.len() != self.columns.len() {
            return Err(LpError::Invalid("inconsistent variable arrays".into()));
        }
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                if i >= m {
                    return Err(LpError::Invalid(format!("var {j} references row {i} >= {m}")));
                }
                if !a.is_finite() {
                    return Err(LpError::Invalid(format!("non-finite coefficient in var {j}")));
                }
            }
        }
        for (j, &(lo, up)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() {
                return Err(LpError::Invalid(format!("var {j} has non-finite lower bound")));
            }
            if up < lo {
                return Err(LpError::Invalid(format!("var {j} has upper < lower")));
            }
        }
        for (i, &(_, b)) in self.rows.iter().enumerate() {
            if !b.is_finite() {
                return Err(LpError::Invalid(format!("row {i} has non-finite rhs")));
            }
        }
        for &c in &self.objective {
            if !c.is_finite() {
                return Err(LpError::Invalid("non-finite objective coefficient".into()));
            }
        }
        Ok(())
    }

    /// Writes the program to a plain-text fixed format for external
    /// cross-checking. Layout:
    ///
    /// ```text
    /// lp <n_vars> <n_rows>
    /// obj <j>:<coef> ...
    /// bnd <j> <lower> <upper>        (one line per variable)
    /// row <relation> <rhs> <j>:<coef> ...   (one line per row)
    /// ```
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lp {} {}", self.n_vars(), self.n_rows());
        let mut obj = String::from("obj");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(obj, " {j}:{c:.12}");
            }
        }
        let _ = writeln!(out, "{obj}");
        for (j, &(lo, up)) in self.bounds.iter().enumerate() {
            if up.is_finite() {
                let _ = writeln!(out, "bnd {j} {lo:.12} {up:.12}");
            } else {
                let _ = writeln!(out, "bnd {j} {lo:.12} inf");
            }
        }
        // Gather rows from columns for a row-major dump.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_rows()];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                rows[i].push((j, a));
            }
        }
        for (i, &(rel, b)) in self.rows.iter().enumerate() {
            let rel = match rel {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let mut line = format!("row {rel} {b:.12}");
            for &(j, a) in &rows[i] {
                let _ = write!(line, " {j}:{a:.12}");
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn dump_to_file(&self, path: &std::path::Path) -> Result<(), LpError> {
        std::fs::write(path, self.dump())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Numerical breakdown or pivot budget exhausted; distinct from
    /// Infeasible by contract.
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (empty unless Optimal).
    pub primal: Vec<f64>,
    /// Row duals (empty unless Optimal).
    pub dual: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    fn failed(status: LpStatus) -> Self {
        LpSolution { status, primal: Vec::new(), dual: Vec::new(), objective_value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    /// Total variables: structural then one slack per row.
    n_total: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Dense row-major basis inverse.
    binv: Vec<f64>,
    pivots_since_refactor: usize,
    total_pivots: usize,
    max_pivots: usize,
    dantzig_limit: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.n_rows();
        let n = lp.n_vars();
        let n_total = n + m;
        let mut lower = Vec::with_capacity(n_total);
        let mut upper = Vec::with_capacity(n_total);
        for &(lo, up) in &lp.bounds {
            lower.push(lo);
            upper.push(up);
        }
        for &(rel, _) in &lp.rows {
            match rel {
                Relation::Le => {
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                }
                Relation::Ge => {
                    lower.push(f64::NEG_INFINITY);
                    upper.push(0.0);
                }
                Relation::Eq => {
                    lower.push(0.0);
                    upper.push(0.0);
                }
            }
        }
        let mut status = vec![VarStatus::AtLower; n_total];
        let mut x = vec![0.0; n_total];
        for j in 0..n {
            x[j] = lower[j];
        }
        // Initial basis: the slack of each row.
        let basis: Vec<usize> = (n..n_total).collect();
        for &j in &basis {
            status[j] = VarStatus::Basic;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let work = m + n;
        let mut s = Simplex {
            lp,
            m,
            n_total,
            lower,
            upper,
            status,
            x,
            basis,
            binv,
            pivots_since_refactor: 0,
            total_pivots: 0,
            max_pivots: 200 * work + 20_000,
            dantzig_limit: 50 * work + 5_000,
        };
        s.recompute_basics();
        s
    }

    /// Sparse column of variable `j` in the full (structural + slack) system.
    fn column(&self, j: usize) -> ColRef<'_> {
        if j < self.lp.n_vars() {
            ColRef::Structural(&self.lp.columns[j])
        } else {
            ColRef::Slack(j - self.lp.n_vars())
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        match self.column(j) {
            ColRef::Structural(col) => col.iter().map(|&(i, a)| y[i] * a).sum(),
            ColRef::Slack(i) => y[i],
        }
    }

    /// w = B^-1 * a_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        match self.column(j) {
            ColRef::Structural(col) => {
                for &(i, a) in col {
                    for r in 0..m {
                        w[r] += self.binv[r * m + i] * a;
                    }
                }
            }
            ColRef::Slack(i) => {
                for r in 0..m {
                    w[r] = self.binv[r * m + i];
                }
            }
        }
        w
    }

    /// y = z^T B^-1 for a length-m vector z.
    fn btran(&self, z: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let zr = z[r];
            if zr != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for i in 0..m {
                    y[i] += zr * row[i];
                }
            }
        }
        y
    }

    /// Recomputes basic values x_B = B^-1 (b - N x_N).
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs: Vec<f64> = self.lp.rows.iter().map(|&(_, b)| b).collect();
        for j in 0..self.n_total {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                match self.column(j) {
                    ColRef::Structural(col) => {
                        for &(i, a) in col {
                            rhs[i] -= a * self.x[j];
                        }
                    }
                    ColRef::Slack(i) => rhs[i] -= self.x[j],
                }
            }
        }
        for r in 0..m {
            let mut v = 0.0;
            let row = &self.binv[r * m..(r + 1) * m];
            for i in 0..m {
                v += row[i] * rhs[i];
            }
            self.x[self.basis[r]] = v;
        }
    }

    /// Rebuilds the basis inverse from scratch. Returns false on a singular
    /// basis.
    fn refactorize(&mut self) -> bool {
        let m = self.m;
        if m == 0 {
            return true;
        }
        // Dense B, column r = column of basis[r].
        let mut b = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            match self.column(j) {
                ColRef::Structural(col) => {
                    for &(i, a) in col {
                        b[i * m + r] = a;
                    }
                }
                ColRef::Slack(i) => b[i * m + r] = 1.0,
            }
        }
        // Gauss-Jordan with partial pivoting on [B | I].
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut best = col;
            let mut best_abs = b[col * m + col].abs();
            for r in (col + 1)..m {
                let v = b[r * m + col].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            if best_abs < PIVOT_TOL {
                return false;
            }
            if best != col {
                for k in 0..m {
                    b.swap(col * m + k, best * m + k);
                    inv.swap(col * m + k, best * m + k);
                }
            }
            let piv = b[col * m + col];
            for k in 0..m {
                b[col * m + k] /= piv;
                inv[col * m + k] /= piv;
            }
            for r in 0..m {
                if r != col {
                    let f = b[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            b[r * m + k] -= f * b[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        self.recompute_basics();
        true
    }

    /// Applies the pivot update binv <- E * binv for entering column ftran
    /// vector `w` and pivot row `r`.
    fn update_binv(&mut self, w: &[f64], r: usize) {
        let m = self.m;
        let piv = w[r];
        let (head, tail) = self.binv.split_at_mut(r * m);
        let (pivot_row, rest) = tail.split_at_mut(m);
        for k in 0..m {
            pivot_row[k] /= piv;
        }
        for i in 0..r {
            let f = w[i];
            if f != 0.0 {
                let row = &mut head[i * m..(i + 1) * m];
                for k in 0..m {
                    row[k] -= f * pivot_row[k];
                }
            }
        }
        for i in (r + 1)..m {
            let f = w[i];
            if f != 0.0 {
                let row = &mut rest[(i - r - 1) * m..(i - r) * m];
                for k in 0..m {
                    row[k] -= f * pivot_row[k];
                }
            }
        }
    }

    fn infeasibility(&self) -> f64 {
        let mut phi = 0.0;
        for &j in &self.basis {
            if self.x[j] < self.lower[j] - FEAS_TOL {
                phi += self.lower[j] - self.x[j];
            } else if self.x[j] > self.upper[j] + FEAS_TOL {
                phi += self.x[j] - self.upper[j];
            }
        }
        phi
    }

    /// One simplex step for the given objective sense. `phase1` switches
    /// pricing to infeasibility reduction. Returns the step outcome.
    fn step(&mut self, phase1: bool) -> StepResult {
        let m = self.m;
        // Pricing vector.
        let y = if phase1 {
            let mut sigma = vec![0.0; m];
            for (r, &j) in self.basis.iter().enumerate() {
                if self.x[j] > self.upper[j] + FEAS_TOL {
                    sigma[r] = 1.0;
                } else if self.x[j] < self.lower[j] - FEAS_TOL {
                    sigma[r] = -1.0;
                }
            }
            self.btran(&sigma)
        } else {
            let mut cb = vec![0.0; m];
            for (r, &j) in self.basis.iter().enumerate() {
                cb[r] = if j < self.lp.n_vars() { self.lp.objective[j] } else { 0.0 };
            }
            self.btran(&cb)
        };

        // Entering selection. `score_j` is the objective improvement rate per
        // unit of movement in the allowed direction.
        let bland = self.total_pivots >= self.dantzig_limit;
        let mut entering: Option<(usize, f64, f64)> = None; // (var, direction, score)
        for j in 0..self.n_total {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            if self.upper[j] - self.lower[j] <= PIVOT_TOL {
                continue; // fixed variable
            }
            // `d` is the improvement rate for increasing x_j: the reduced
            // cost in phase 2, and -dPhi/dx_j = sigma' B^-1 a_j in phase 1
            // (Phi = total bound violation of the basics, to be minimized).
            let d = if phase1 {
                self.col_dot(j, &y)
            } else {
                let c = if j < self.lp.n_vars() { self.lp.objective[j] } else { 0.0 };
                c - self.col_dot(j, &y)
            };
            let (dir, score) = if self.status[j] == VarStatus::AtLower {
                (1.0, d)
            } else {
                (-1.0, -d)
            };
            if score > 1e-9 {
                if bland {
                    entering = Some((j, dir, score));
                    break;
                }
                match entering {
                    Some((_, _, best)) if best >= score => {}
                    _ => entering = Some((j, dir, score)),
                }
            }
        }
        let Some((q, dir, _)) = entering else {
            return StepResult::NoEntering;
        };

        let w = self.ftran(q);
        // Ratio test: how far can x_q move in direction `dir`.
        let mut theta = self.upper[q] - self.lower[q]; // bound-flip distance
        let mut leaving: Option<(usize, VarStatus)> = None; // (basis position, bound reached)
        for (r, &j) in self.basis.iter().enumerate() {
            let rate = -dir * w[r]; // dx_Bj / dtheta
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let xv = self.x[j];
            let below = xv < self.lower[j] - FEAS_TOL;
            let above = xv > self.upper[j] + FEAS_TOL;
            let (limit, target) = if rate > 0.0 {
                if below {
                    // Rising toward its violated lower bound.
                    ((self.lower[j] - xv) / rate, VarStatus::AtLower)
                } else if above {
                    // Rising further above its upper bound: never blocks.
                    continue;
                } else if self.upper[j].is_finite() {
                    (((self.upper[j] - xv) / rate).max(0.0), VarStatus::AtUpper)
                } else {
                    continue;
                }
            } else if above {
                ((xv - self.upper[j]) / -rate, VarStatus::AtUpper)
            } else if below {
                // Falling further below its lower bound: never blocks.
                continue;
            } else if self.lower[j].is_finite() {
                (((xv - self.lower[j]) / -rate).max(0.0), VarStatus::AtLower)
            } else {
                continue;
            };
            let better = match leaving {
                None => limit < theta - 1e-12,
                Some((cur, _)) => {
                    limit < theta - 1e-12
                        || (limit <= theta + 1e-12 && {
                            if bland {
                                j < self.basis[cur]
                            } else {
                                w[r].abs() > w[cur].abs()
                            }
                        })
                }
            };
            if better {
                theta = limit;
                leaving = Some((r, target));
            }
        }

        match leaving {
            None => {
                if theta.is_finite() {
                    // Bound flip: the entering variable crosses to its other bound.
                    self.apply_move(q, dir, theta, &w);
                    self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    StepResult::Pivoted
                } else if phase1 {
                    StepResult::Numerical
                } else {
                    StepResult::Unbounded
                }
            }
            Some((r, target)) => {
                if !theta.is_finite() || theta < 0.0 {
                    return StepResult::Numerical;
                }
                if w[r].abs() <= PIVOT_TOL {
                    return StepResult::Numerical;
                }
                self.apply_move(q, dir, theta, &w);
                let out = self.basis[r];
                self.status[out] = target;
                self.x[out] = match target {
                    VarStatus::AtLower => self.lower[out],
                    VarStatus::AtUpper => self.upper[out],
                    VarStatus::Basic => unreachable!(),
                };
                self.status[q] = VarStatus::Basic;
                self.basis[r] = q;
                self.update_binv(&w, r);
                self.pivots_since_refactor += 1;
                if self.pivots_since_refactor >= REFACTOR_EVERY && !self.refactorize() {
                    return StepResult::Numerical;
                }
                StepResult::Pivoted
            }
        }
    }

    fn apply_move(&mut self, q: usize, dir: f64, theta: f64, w: &[f64]) {
        if theta == 0.0 {
            return;
        }
        for (r, &j) in self.basis.iter().enumerate() {
            self.x[j] -= dir * theta * w[r];
        }
        self.x[q] += dir * theta;
    }

    fn solve(mut self) -> LpSolution {
        // Phase 1: drive basic infeasibility to zero.
        while self.infeasibility() > FEAS_TOL * (self.m.max(1) as f64) {
            self.total_pivots += 1;
            if self.total_pivots > self.max_pivots {
                return LpSolution::failed(LpStatus::NumericalFailure);
            }
            match self.step(true) {
                StepResult::Pivoted => {}
                StepResult::NoEntering => {
                    // Cannot reduce infeasibility further: primal infeasible.
                    // Re-verify with a fresh factorization to rule out drift.
                    if !self.refactorize() {
                        return LpSolution::failed(LpStatus::NumericalFailure);
                    }
                    if self.infeasibility() > FEAS_TOL * (self.m.max(1) as f64) {
                        return LpSolution::failed(LpStatus::Infeasible);
                    }
                }
                StepResult::Unbounded | StepResult::Numerical => {
                    return LpSolution::failed(LpStatus::NumericalFailure)
                }
            }
        }

        // Phase 2: optimize the real objective.
        loop {
            self.total_pivots += 1;
            if self.total_pivots > self.max_pivots {
                return LpSolution::failed(LpStatus::NumericalFailure);
            }
            match self.step(false) {
                StepResult::Pivoted => {
                    // Query noise in phase 2 can let a basic drift out of
                    // bounds; fall back to phase 1 if so.
                    if self.total_pivots % 512 == 0
                        && self.infeasibility() > FEAS_TOL * (self.m.max(1) as f64)
                    {
                        if !self.refactorize() {
                            return LpSolution::failed(LpStatus::NumericalFailure);
                        }
                        while self.infeasibility() > FEAS_TOL * (self.m.max(1) as f64) {
                            self.total_pivots += 1;
                            if self.total_pivots > self.max_pivots {
                                return LpSolution::failed(LpStatus::NumericalFailure);
                            }
                            match self.step(true) {
                                StepResult::Pivoted => {}
                                _ => return LpSolution::failed(LpStatus::NumericalFailure),
                            }
                        }
                    }
                }
                StepResult::NoEntering => break,
                StepResult::Unbounded => return LpSolution::failed(LpStatus::Unbounded),
                StepResult::Numerical => return LpSolution::failed(LpStatus::NumericalFailure),
            }
        }

        // Clean factorization before extracting the solution.
        if !self.refactorize() {
            return LpSolution::failed(LpStatus::NumericalFailure);
        }
        let n = self.lp.n_vars();
        let primal: Vec<f64> = self.x[..n].to_vec();
        let mut cb = vec![0.0; self.m];
        for (r, &j) in self.basis.iter().enumerate() {
            cb[r] = if j < n { self.lp.objective[j] } else { 0.0 };
        }
        let dual = self.btran(&cb);
        let objective_value = primal
            .iter()
            .zip(&self.lp.objective)
            .map(|(x, c)| x * c)
            .sum();
        LpSolution { status: LpStatus::Optimal, primal, dual, objective_value }
    }
}

enum ColRef<'a> {
    Structural(&'a [(usize, f64)]),
    Slack(usize),
}

enum StepResult {
    Pivoted,
    NoEntering,
    Unbounded,
    Numerical,
}

/// Solves the program. Pure function of its input; deterministic.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    if let Err(_) = lp.validate() {
        return LpSolution::failed(LpStatus::NumericalFailure);
    }
    if lp.n_rows() == 0 {
        // Degenerate: optimize each variable at a bound independently.
        let mut primal = Vec::with_capacity(lp.n_vars());
        let mut obj = 0.0;
        for (j, &c) in lp.objective.iter().enumerate() {
            let (lo, up) = lp.bounds[j];
            let v = if c > 0.0 {
                if up.is_finite() { up } else { return LpSolution::failed(LpStatus::Unbounded) }
            } else {
                lo
            };
            primal.push(v);
            obj += c * v;
        }
        return LpSolution { status: LpStatus::Optimal, primal, dual: Vec::new(), objective_value: obj };
    }
    Simplex::new(lp).solve()
}

/// Residuals of a claimed Optimal solution.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    /// Max violation of row constraints and variable bounds.
    pub max_primal: f64,
    /// Max dual-feasibility violation (row dual signs and reduced-cost signs).
    pub max_dual: f64,
    /// Duality gap |dual objective - primal objective|.
    pub gap: f64,
}

impl ResidualReport {
    pub fn within(&self, tol: f64, obj: f64) -> bool {
        self.max_primal <= tol && self.max_dual <= tol && self.gap <= tol * (1.0 + obj.abs())
    }
}

/// Checks primal feasibility, dual feasibility and the duality gap of an
/// Optimal solution. Independent of the solver's internal state.
pub fn verify_solution(lp: &LinearProgram, sol: &LpSolution) -> ResidualReport {
    assert_eq!(sol.status, LpStatus::Optimal, "verify_solution requires an Optimal solution");
    let m = lp.n_rows();
    let mut activity = vec![0.0; m];
    for (j, col) in lp.columns.iter().enumerate() {
        let xj = sol.primal[j];
        if xj != 0.0 {
            for &(i, a) in col {
                activity[i] += a * xj;
            }
        }
    }
    let mut max_primal: f64 = 0.0;
    for (i, &(rel, b)) in lp.rows.iter().enumerate() {
        let viol = match rel {
            Relation::Le => activity[i] - b,
            Relation::Ge => b - activity[i],
            Relation::Eq => (activity[i] - b).abs(),
        };
        max_primal = max_primal.max(viol);
    }
    for (j, &(lo, up)) in lp.bounds.iter().enumerate() {
        max_primal = max_primal.max(lo - sol.primal[j]);
        if up.is_finite() {
            max_primal = max_primal.max(sol.primal[j] - up);
        }
    }

    // Dual feasibility: for a maximization, Le rows need y >= 0, Ge rows
    // y <= 0, Eq rows free.
    let mut max_dual: f64 = 0.0;
    for (i, &(rel, _)) in lp.rows.iter().enumerate() {
        let y = sol.dual[i];
        match rel {
            Relation::Le => max_dual = max_dual.max(-y),
            Relation::Ge => max_dual = max_dual.max(y),
            Relation::Eq => {}
        }
    }
    // Reduced costs: d_j = c_j - y'a_j. At a finite optimum, d_j > 0 forces
    // x_j to its (finite) upper bound, d_j < 0 to its lower bound. The dual
    // objective y'b + sum_j max(d_j,0) u_j + min(d_j,0) l_j upper-bounds the
    // primal; equality is the gap check.
    let mut dual_obj: f64 = lp.rows.iter().enumerate().map(|(i, &(_, b))| sol.dual[i] * b).sum();
    for (j, col) in lp.columns.iter().enumerate() {
        let d = lp.objective[j] - col.iter().map(|&(i, a)| sol.dual[i] * a).sum::<f64>();
        let (lo, up) = lp.bounds[j];
        if d > FEAS_TOL {
            if up.is_finite() {
                dual_obj += d * up;
            } else {
                max_dual = max_dual.max(d);
            }
        } else if d < -FEAS_TOL {
            dual_obj += d * lo;
        }
    }
    let gap = (dual_obj - sol.objective_value).abs();
    ResidualReport { max_primal: max_primal.max(0.0), max_dual: max_dual.max(0.0), gap }
}
