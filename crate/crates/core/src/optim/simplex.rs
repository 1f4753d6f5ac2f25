//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Pricing defaults to the most negative reduced cost (lowest index on
//! ties) and falls back permanently to Bland's lowest-index rule after a run
//! of degenerate pivots; pure Bland pricing is available but takes far more
//! pivots on the long distance problems. Both are deterministic.
//!
//! The final basis is re-solved from the original data (basis LU) so the
//! reported primal point, duals and gap do not carry the tableau's
//! accumulated rounding.

use serde::{Deserialize, Serialize};

use crate::error::{KblError, Result};
use crate::linalg::{real, Lu, Matrix};

pub const DEFAULT_CONSTRAINT_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarBound {
    Free,
    NonNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize objective · x` subject to the constraints and variable bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, bounds: Vec<VarBound>) -> Self {
        LinearProgram { objective, constraints: Vec::new(), bounds }
    }

    pub fn push(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coefficients, relation, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Structured-text dump for debugging.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    fn validate(&self, cap: usize) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(KblError::DimensionMismatch { expected: n, found: self.bounds.len() });
        }
        if self.constraints.len() > cap {
            return Err(KblError::LpTooLarge { constraints: self.constraints.len(), cap });
        }
        for c in &self.constraints {
            if c.coefficients.len() != n {
                return Err(KblError::DimensionMismatch { expected: n, found: c.coefficients.len() });
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|x| !x.is_finite()) {
                return Err(KblError::InvalidInput("non-finite LP data".into()));
            }
        }
        if self.objective.iter().any(|x| !x.is_finite()) {
            return Err(KblError::InvalidInput("non-finite LP objective".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub primal: Vec<f64>,
    /// Lagrange multiplier per constraint, so that `value = Σ rhs_i · dual_i`.
    pub dual: Vec<f64>,
    pub iterations: usize,
    pub duality_gap: f64,
    pub primal_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    /// Lowest-index entering column, lowest-index leaving variable on ties.
    Bland,
    /// Most negative reduced cost; switches permanently to Bland after a run
    /// of degenerate pivots.
    DantzigThenBland,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub constraint_cap: usize,
    pub pivot_rule: PivotRule,
    pub max_iterations: usize,
    /// Feasibility and objective-agreement tolerance for `Optimal` results.
    pub tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            constraint_cap: DEFAULT_CONSTRAINT_CAP,
            pivot_rule: PivotRule::DantzigThenBland,
            max_iterations: 200_000,
            tolerance: 1e-9,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.validate(opts.constraint_cap)?;
    match solve_once(lp, opts, None) {
        Err(KblError::LpNumerical(first)) => {
            log::debug!("simplex retry with perturbed right-hand side: {first}");
            solve_once(lp, opts, Some(1e-11))
        }
        other => other,
    }
}

const REDUCED_COST_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-7;
const REINVERT_EVERY: usize = 64;
const DEGENERATE_STREAK: usize = 50;

struct Standard {
    /// column → (original var, sign)
    columns: Vec<(usize, f64)>,
    rows: usize,
    /// row-major `rows × total` standard-form matrix, including slacks
    a: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
    total: usize,
    /// first artificial column; artificials occupy `art_start..total_with_art`
    art_start: usize,
    art_rows: Vec<usize>,
    row_sign: Vec<f64>,
    initial_basis: Vec<usize>,
}

fn standardize(lp: &LinearProgram, perturb: Option<f64>) -> Standard {
    let mut columns = Vec::new();
    for (j, bound) in lp.bounds.iter().enumerate() {
        columns.push((j, 1.0));
        if *bound == VarBound::Free {
            columns.push((j, -1.0));
        }
    }
    let m = lp.constraints.len();
    let n_struct = columns.len();
    let n_slack = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    let mut row_sign = Vec::with_capacity(m);
    let mut relations = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut rhs = c.rhs;
        if let Some(eps) = perturb {
            let jitter = 0.5 + ((i * 7919) % 13) as f64 / 13.0;
            rhs += eps * jitter * (1.0 + rhs.abs());
        }
        let (sign, rel) = if rhs < 0.0 {
            let flipped = match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            (-1.0, flipped)
        } else {
            (1.0, c.relation)
        };
        row_sign.push(sign);
        relations.push(rel);
        b.push(sign * rhs);
    }
    let art_rows: Vec<usize> = (0..m).filter(|&i| relations[i] != Relation::Le).collect();
    let art_start = n_struct + n_slack;
    let total = art_start + art_rows.len();
    let mut a = vec![0.0; m * total];
    let mut cost = vec![0.0; total];
    for (col, &(j, s)) in columns.iter().enumerate() {
        cost[col] = s * lp.objective[j];
        for (i, c) in lp.constraints.iter().enumerate() {
            a[i * total + col] = row_sign[i] * s * c.coefficients[j];
        }
    }
    let mut initial_basis = vec![usize::MAX; m];
    let mut slack = n_struct;
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.relation == Relation::Eq {
            continue;
        }
        let coef = if relations[i] == Relation::Le { 1.0 } else { -1.0 };
        a[i * total + slack] = coef;
        if relations[i] == Relation::Le {
            initial_basis[i] = slack;
        }
        slack += 1;
    }
    for (k, &i) in art_rows.iter().enumerate() {
        a[i * total + art_start + k] = 1.0;
        initial_basis[i] = art_start + k;
    }
    Standard { columns, rows: m, a, b, cost, total, art_start, art_rows, row_sign, initial_basis }
}

struct Tableau {
    rows: usize,
    width: usize, // total columns + rhs
    t: Vec<f64>,  // (rows + 1) × width, last row = reduced costs, last column = rhs
    basis: Vec<usize>,
    active: Vec<bool>, // rows not removed as redundant
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let p = self.t[r * w + col];
        for x in &mut self.t[r * w..(r + 1) * w] {
            *x /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let update = |row: &mut [f64]| {
            let f = row[col];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[col] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(update);
        after.chunks_mut(w).for_each(update);
        self.basis[r] = col;
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width;
        let obj = self.rows * w;
        for j in 0..w {
            self.t[obj + j] = if j < cost.len() { cost[j] } else { 0.0 };
        }
        for i in 0..self.rows {
            if !self.active[i] {
                continue;
            }
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.t[obj + j] -= cb * self.t[i * w + j];
                }
            }
        }
    }

    /// Rebuilds the constraint rows as `B⁻¹[A | b]` from the original data
    /// and the reduced-cost row from `cost`, discarding accumulated drift.
    fn reinvert(&mut self, std: &Standard, cost: &[f64]) -> Result<()> {
        let rows: Vec<usize> = (0..self.rows).filter(|&i| self.active[i]).collect();
        let k = rows.len();
        if k > 0 {
            let bmat = Matrix::from_fn(k, k, |r, c| real(std.a[rows[r] * std.total + self.basis[rows[c]]]));
            let lu = Lu::new(&bmat).map_err(|_| KblError::LpNumerical("singular basis on reinversion".into()))?;
            let w = self.width;
            let mut rhs = vec![real(0.0); k];
            for j in 0..w {
                let zero_column = rows.iter().all(|&i| column_entry(std, i, j) == 0.0);
                let sol = if zero_column {
                    None
                } else {
                    for (r, &i) in rows.iter().enumerate() {
                        rhs[r] = real(column_entry(std, i, j));
                    }
                    Some(lu.solve(&rhs)?)
                };
                for (r, &i) in rows.iter().enumerate() {
                    self.t[i * w + j] = sol.as_ref().map_or(0.0, |s| s[r].re);
                }
            }
            for &i in &rows {
                let col = self.basis[i];
                for &i2 in &rows {
                    self.t[i2 * w + col] = if i2 == i { 1.0 } else { 0.0 };
                }
            }
            let bscale = 1.0 + std.b.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            for &i in &rows {
                let x = &mut self.t[i * w + w - 1];
                if *x < 0.0 {
                    if *x < -FEAS_TOL * bscale {
                        return Err(KblError::LpNumerical(format!("basis lost feasibility ({x:e})")));
                    }
                    *x = 0.0;
                }
            }
        }
        self.set_objective(cost);
        Ok(())
    }

    /// Runs simplex iterations on the current objective row, never entering
    /// columns at or beyond `col_limit`. Returns `false` on unboundedness.
    ///
    /// Entering: lowest index with negative reduced cost (Bland), or most
    /// negative under `DantzigThenBland` until a degenerate run. Leaving:
    /// Harris two-pass ratio test preferring the largest pivot among
    /// near-minimal ratios, lowest basic index on ties; a long degenerate run
    /// switches to the strict lowest-index minimum-ratio rule, which together
    /// with Bland entering cannot cycle.
    fn run(
        &mut self,
        std: &Standard,
        cost: &[f64],
        col_limit: usize,
        rule: PivotRule,
        iterations: &mut usize,
        max_iter: usize,
    ) -> Result<bool> {
        let w = self.width;
        let rhs = w - 1;
        let obj = self.rows * w;
        let mut dantzig = rule == PivotRule::DantzigThenBland;
        let mut strict = false;
        let mut degenerate = 0usize;
        let mut since_reinvert = 0usize;
        loop {
            if *iterations >= max_iter {
                return Err(KblError::LpNumerical(format!("iteration limit {max_iter} reached")));
            }
            if since_reinvert >= REINVERT_EVERY {
                self.reinvert(std, cost)?;
                since_reinvert = 0;
            }
            let entering = if !dantzig {
                (0..col_limit).find(|&j| self.t[obj + j] < -REDUCED_COST_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..col_limit {
                    let d = self.t[obj + j];
                    if d < -REDUCED_COST_TOL && best.is_none_or(|(_, b)| d < b) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else {
                if since_reinvert == 0 {
                    return Ok(true);
                }
                // confirm optimality on a fresh factorization
                self.reinvert(std, cost)?;
                since_reinvert = 0;
                continue;
            };
            let candidates = (0..self.rows).filter(|&i| self.active[i] && self.at(i, col) > PIVOT_TOL);
            let leave = if strict {
                let mut best: Option<(usize, f64)> = None;
                for i in candidates {
                    let ratio = self.at(i, rhs).max(0.0) / self.at(i, col);
                    best = match best {
                        Some((r, b)) if !(ratio < b || ratio == b && self.basis[i] < self.basis[r]) => Some((r, b)),
                        _ => Some((i, ratio)),
                    };
                }
                best
            } else {
                let mut theta = f64::INFINITY;
                for i in candidates.clone() {
                    theta = theta.min((self.at(i, rhs).max(0.0) + HARRIS_TOL) / self.at(i, col));
                }
                let mut best: Option<(usize, f64)> = None;
                for i in candidates {
                    let a = self.at(i, col);
                    let ratio = self.at(i, rhs).max(0.0) / a;
                    if ratio > theta {
                        continue;
                    }
                    best = match best {
                        Some((r, ba)) if !(a > ba || a == ba && self.basis[i] < self.basis[r]) => Some((r, ba)),
                        _ => Some((i, a)),
                    };
                }
                best.map(|(i, a)| (i, self.at(i, rhs).max(0.0) / a))
            };
            let Some((row, ratio)) = leave else { return Ok(false) };
            if ratio <= HARRIS_TOL {
                degenerate += 1;
                if degenerate > DEGENERATE_STREAK {
                    dantzig = false;
                    strict = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(row, col);
            *iterations += 1;
            since_reinvert += 1;
        }
    }
}

/// Entry `(i, j)` of `[A | b]` in standard form.
fn column_entry(std: &Standard, i: usize, j: usize) -> f64 {
    if j < std.total {
        std.a[i * std.total + j]
    } else {
        std.b[i]
    }
}

fn solve_once(lp: &LinearProgram, opts: &SimplexOptions, perturb: Option<f64>) -> Result<LpSolution> {
    let std = standardize(lp, perturb);
    let m = std.rows;
    let width = std.total + 1;
    let mut t = vec![0.0; (m + 1) * width];
    for i in 0..m {
        t[i * width..i * width + std.total].copy_from_slice(&std.a[i * std.total..(i + 1) * std.total]);
        t[i * width + std.total] = std.b[i];
    }
    let mut tab = Tableau { rows: m, width, t, basis: std.initial_basis.clone(), active: vec![true; m] };
    let mut iterations = 0;

    if !std.art_rows.is_empty() {
        let mut phase1 = vec![0.0; std.total];
        phase1[std.art_start..].iter_mut().for_each(|x| *x = 1.0);
        tab.set_objective(&phase1);
        tab.run(&std, &phase1, std.total, opts.pivot_rule, &mut iterations, opts.max_iterations)?;
        let infeasibility = -tab.at(m, std.total);
        let bscale = 1.0 + std.b.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if infeasibility > opts.tolerance * bscale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                primal: Vec::new(),
                dual: Vec::new(),
                iterations,
                duality_gap: f64::NAN,
                primal_violation: infeasibility,
            });
        }
        for i in 0..m {
            if tab.basis[i] < std.art_start {
                continue;
            }
            let replacement = (0..std.art_start)
                .filter(|&j| tab.at(i, j).abs() > 1e-9)
                .max_by(|&a, &b| tab.at(i, a).abs().total_cmp(&tab.at(i, b).abs()));
            match replacement {
                Some(j) => tab.pivot(i, j),
                None => tab.active[i] = false,
            }
        }
    }

    tab.set_objective(&std.cost);
    if !tab.run(&std, &std.cost, std.art_start, opts.pivot_rule, &mut iterations, opts.max_iterations)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NEG_INFINITY,
            primal: Vec::new(),
            dual: Vec::new(),
            iterations,
            duality_gap: f64::NAN,
            primal_violation: f64::NAN,
        });
    }
    polish(lp, &std, &tab, iterations, opts)
}

/// Recomputes the basic solution and duals from the original data.
fn polish(lp: &LinearProgram, std: &Standard, tab: &Tableau, iterations: usize, opts: &SimplexOptions) -> Result<LpSolution> {
    let rows: Vec<usize> = (0..std.rows).filter(|&i| tab.active[i]).collect();
    let k = rows.len();
    let basis: Vec<usize> = rows.iter().map(|&i| tab.basis[i]).collect();
    let mut x_std = vec![0.0; std.total];
    let mut y_std = vec![0.0; std.rows];
    if k > 0 {
        let bmat = Matrix::from_fn(k, k, |r, c| real(std.a[rows[r] * std.total + basis[c]]));
        let lu = Lu::new(&bmat).map_err(|_| KblError::LpNumerical("singular final basis".into()))?;
        let rhs: Vec<_> = rows.iter().map(|&i| real(std.b[i])).collect();
        let xb = lu.solve(&rhs)?;
        for (c, &col) in basis.iter().enumerate() {
            x_std[col] = xb[c].re;
        }
        let lu_t = Lu::new(&bmat.adjoint()).map_err(|_| KblError::LpNumerical("singular final basis".into()))?;
        let cb: Vec<_> = basis.iter().map(|&col| real(std.cost.get(col).copied().unwrap_or(0.0))).collect();
        let y = lu_t.solve(&cb)?;
        for (r, &i) in rows.iter().enumerate() {
            y_std[i] = y[r].re;
        }
    }
    let xscale = 1.0 + x_std.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if x_std.iter().any(|&x| x < -opts.tolerance * xscale) || x_std[std.art_start..].iter().any(|&x| x.abs() > opts.tolerance * xscale) {
        let worst = x_std.iter().cloned().fold(f64::INFINITY, f64::min);
        let art = x_std[std.art_start..].iter().fold(0.0f64, |a, x| a.max(x.abs()));
        return Err(KblError::LpNumerical(format!("polished basic solution is infeasible (min {worst:e}, artificial {art:e}, rows {k})")));
    }

    let mut primal = vec![0.0; lp.num_vars()];
    for (col, &(j, s)) in std.columns.iter().enumerate() {
        primal[j] += s * x_std[col].max(0.0);
    }
    let dual: Vec<f64> = (0..std.rows).map(|i| std.row_sign[i] * y_std[i]).collect();

    let value: f64 = lp.objective.iter().zip(&primal).map(|(c, x)| c * x).sum();
    let dual_value: f64 = lp.constraints.iter().zip(&dual).map(|(c, y)| c.rhs * y).sum();
    let mut violation: f64 = 0.0;
    for c in &lp.constraints {
        let lhs: f64 = c.coefficients.iter().zip(&primal).map(|(a, x)| a * x).sum();
        let v = match c.relation {
            Relation::Le => lhs - c.rhs,
            Relation::Ge => c.rhs - lhs,
            Relation::Eq => (lhs - c.rhs).abs(),
        };
        violation = violation.max(v);
    }
    let bscale = 1.0 + lp.constraints.iter().fold(0.0f64, |a, c| a.max(c.rhs.abs()));
    if violation > opts.tolerance * bscale {
        return Err(KblError::LpNumerical(format!("primal violation {violation:e}")));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        primal,
        dual,
        iterations,
        duality_gap: (value - dual_value).abs(),
        primal_violation: violation.max(0.0),
    })
}
