//! Dense two-phase simplex.
//!
//! Pivoting uses Bland's smallest-index rule for both the entering column and
//! ties in the ratio test, so every solve terminates and the pivot sequence is
//! a pure function of the input. Problems with many more rows than columns
//! (the coalition LPs) are solved through their dual, which keeps the tableau
//! at `columns x rows` instead of `rows x rows`.

use crate::{Error, Result};

/// Pivot-eligibility and feasibility tolerance.
pub const LP_TOL: f64 = 1e-9;
/// Default cap on pivots across both phases.
pub const DEFAULT_MAX_PIVOTS: usize = 10_000;
/// Desk-scale limits.
pub const MAX_VARIABLES: usize = 64;
pub const MAX_CONSTRAINTS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable `(lower, upper)`; infinite entries mean unbounded on that side.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// New program with every variable bounded below by zero.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if n > MAX_VARIABLES {
            return Err(Error::capacity(format!("{n} variables exceeds the limit of {MAX_VARIABLES}")));
        }
        if self.constraints.len() > MAX_CONSTRAINTS {
            return Err(Error::capacity(format!(
                "{} constraints exceeds the limit of {MAX_CONSTRAINTS}",
                self.constraints.len()
            )));
        }
        if self.bounds.len() != n {
            return Err(Error::dims(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::dims(format!(
                    "constraint {k} has {} coefficients, objective has {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("constraint {k} has a non-finite entry")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("objective has a non-finite entry"));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::domain(format!("variable {j} has invalid bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    /// `objective . x` when optimal, NaN otherwise.
    pub objective: f64,
    /// Sensitivity of the optimal value to each constraint's right-hand side.
    /// Empty unless optimal.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, pivots: usize) -> Self {
        LpSolution { status, x: Vec::new(), objective: f64::NAN, duals: Vec::new(), pivots }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Dualize tall problems, otherwise run the primal tableau.
    Auto,
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_pivots: usize,
    pub route: Route,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_pivots: DEFAULT_MAX_PIVOTS, route: Route::Auto }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &SolveOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    if lp.bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    }
    let std = Standardized::build(lp);

    let tall = std.rows.len() > 64 && std.rows.len() > 4 * std.ncols;
    let use_dual = match opts.route {
        Route::Auto => tall,
        Route::Primal => false,
        Route::Dual => true,
    };

    let mut sol = if use_dual {
        match solve_standard_via_dual(&std, opts.max_pivots)? {
            Some(s) => s,
            None => solve_standard(&std, opts.max_pivots)?,
        }
    } else {
        solve_standard(&std, opts.max_pivots)?
    };
    if sol.status != LpStatus::Optimal {
        return Ok(LpSolution::without_point(sol.status, sol.pivots));
    }

    let mut x = std.offsets.clone();
    for (col, &(var, sign)) in std.columns.iter().enumerate() {
        x[var] += sign * sol.y[col];
    }
    let sense_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    sol.duals.truncate(lp.constraints.len());
    let duals = sol.duals.iter().map(|d| sense_sign * d).collect();
    let objective = (0..n).map(|j| lp.objective[j] * x[j]).sum();
    Ok(LpSolution { status: LpStatus::Optimal, x, objective, duals, pivots: sol.pivots })
}

/// `min c.y  s.t.  rows,  y >= 0`, obtained from a [`LinearProgram`] by
/// shifting, mirroring or splitting variables. Upper bounds become extra rows
/// appended after the user constraints.
struct Standardized {
    ncols: usize,
    cost: Vec<f64>,
    rows: Vec<Constraint>,
    /// Column -> (original variable, sign).
    columns: Vec<(usize, f64)>,
    offsets: Vec<f64>,
}

impl Standardized {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let sense_sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut columns = Vec::new();
        let mut offsets = vec![0.0; n];
        let mut upper_rows: Vec<(usize, f64)> = Vec::new();
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            if lo.is_finite() {
                offsets[j] = lo;
                columns.push((j, 1.0));
                if hi.is_finite() {
                    upper_rows.push((columns.len() - 1, hi - lo));
                }
            } else if hi.is_finite() {
                offsets[j] = hi;
                columns.push((j, -1.0));
            } else {
                columns.push((j, 1.0));
                columns.push((j, -1.0));
            }
        }
        let ncols = columns.len();
        let cost = columns.iter().map(|&(var, s)| sense_sign * s * lp.objective[var]).collect();
        let mut rows = Vec::with_capacity(lp.constraints.len() + upper_rows.len());
        for c in &lp.constraints {
            let shift: f64 = (0..n).map(|j| c.coeffs[j] * offsets[j]).sum();
            let coeffs = columns.iter().map(|&(var, s)| s * c.coeffs[var]).collect();
            rows.push(Constraint { coeffs, relation: c.relation, rhs: c.rhs - shift });
        }
        for (col, cap) in upper_rows {
            let mut coeffs = vec![0.0; ncols];
            coeffs[col] = 1.0;
            rows.push(Constraint { coeffs, relation: Relation::Le, rhs: cap });
        }
        Standardized { ncols, cost, rows, columns, offsets }
    }
}

struct StdSolution {
    status: LpStatus,
    y: Vec<f64>,
    duals: Vec<f64>,
    pivots: usize,
}

struct Tableau {
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs; the final slot holds minus the objective value.
    obj: Vec<f64>,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let w = self.width;
        self.obj = vec![0.0; w];
        self.obj[..cost.len()].copy_from_slice(cost);
        for r in 0..self.rows() {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.data[r * w..(r + 1) * w];
                for (o, &a) in self.obj.iter_mut().zip(row) {
                    *o -= cb * a;
                }
            }
        }
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(p, q);
        {
            let row = &mut self.data[p * w..(p + 1) * w];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.data[p * w..(p + 1) * w].to_vec();
        for r in 0..self.rows() {
            if r == p {
                continue;
            }
            let f = self.data[r * w + q];
            if f != 0.0 {
                let row = &mut self.data[r * w..(r + 1) * w];
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
            }
        }
        let f = self.obj[q];
        if f != 0.0 {
            for (v, &pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[q] = 0.0;
        }
        self.basis[p] = q;
    }

    /// Bland-rule minimisation over columns with `allowed[j]`.
    /// Returns `Ok(false)` when the problem is unbounded.
    fn run(&mut self, allowed: &[bool], pivots: &mut usize, max_pivots: usize) -> Result<bool> {
        let rhs_col = self.width - 1;
        loop {
            let entering = (0..rhs_col).find(|&j| allowed[j] && self.obj[j] < -LP_TOL);
            let Some(q) = entering else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows() {
                let a = self.at(r, q);
                if a > LP_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            if ratio < best - 1e-12 * (1.0 + best.abs())
                                || ((ratio - best).abs() <= 1e-12 * (1.0 + best.abs())
                                    && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            let Some((p, _)) = leave else { return Ok(false) };
            if *pivots >= max_pivots {
                return Err(Error::IterationLimit(format!("simplex exceeded {max_pivots} pivots")));
            }
            self.pivot(p, q);
            *pivots += 1;
        }
    }
}

fn solve_standard(std: &Standardized, max_pivots: usize) -> Result<StdSolution> {
    let m = std.rows.len();
    let k = std.ncols;

    // Column layout: structural | one slack/surplus per inequality row | artificials.
    let mut slack_of = vec![None; m];
    let mut next = k;
    for (r, row) in std.rows.iter().enumerate() {
        if row.relation != Relation::Eq {
            slack_of[r] = Some(next);
            next += 1;
        }
    }
    let first_art = next;
    let mut flipped = vec![false; m];
    let mut init_col = vec![0usize; m];
    let mut art_of = vec![None; m];
    for (r, row) in std.rows.iter().enumerate() {
        let flip = row.rhs < 0.0;
        flipped[r] = flip;
        let rel = match (row.relation, flip) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (rel, _) => rel,
        };
        if rel == Relation::Le {
            init_col[r] = slack_of[r].expect("inequality row has a slack");
        } else {
            art_of[r] = Some(next);
            init_col[r] = next;
            next += 1;
        }
    }
    let total = next;
    let width = total + 1;
    let mut data = vec![0.0; m * width];
    for (r, row) in std.rows.iter().enumerate() {
        let s = if flipped[r] { -1.0 } else { 1.0 };
        let base = r * width;
        for (j, &a) in row.coeffs.iter().enumerate() {
            data[base + j] = s * a;
        }
        if let Some(sc) = slack_of[r] {
            // Original slack sign: +1 for <=, -1 for >=, then the row flip.
            let orig = if row.relation == Relation::Le { 1.0 } else { -1.0 };
            data[base + sc] = s * orig;
        }
        if let Some(ac) = art_of[r] {
            data[base + ac] = 1.0;
        }
        data[base + total] = s * row.rhs;
    }
    let mut tab = Tableau { width, data, basis: init_col.clone(), obj: Vec::new() };
    let mut pivots = 0usize;

    if first_art < total {
        let mut phase1 = vec![0.0; total];
        for c in phase1.iter_mut().skip(first_art) {
            *c = 1.0;
        }
        tab.set_costs(&phase1);
        let allowed = vec![true; total];
        tab.run(&allowed, &mut pivots, max_pivots)?;
        let infeas = -tab.obj[total];
        let scale = 1.0 + std.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeas > LP_TOL * scale {
            return Ok(StdSolution { status: LpStatus::Infeasible, y: Vec::new(), duals: Vec::new(), pivots });
        }
        // Drive zero-level artificials out of the basis where possible; rows
        // where that fails are redundant and keep a harmless basic artificial.
        for r in 0..m {
            if tab.basis[r] >= first_art {
                if let Some(q) = (0..first_art).find(|&j| tab.at(r, j).abs() > LP_TOL) {
                    tab.pivot(r, q);
                    pivots += 1;
                }
            }
        }
    }

    let mut phase2 = vec![0.0; total];
    phase2[..k].copy_from_slice(&std.cost);
    tab.set_costs(&phase2);
    let allowed: Vec<bool> = (0..total).map(|j| j < first_art).collect();
    if !tab.run(&allowed, &mut pivots, max_pivots)? {
        return Ok(StdSolution { status: LpStatus::Unbounded, y: Vec::new(), duals: Vec::new(), pivots });
    }

    let mut y = vec![0.0; k];
    for r in 0..m {
        let b = tab.basis[r];
        if b < k {
            y[b] = tab.rhs(r).max(0.0);
        }
    }
    let duals = (0..m)
        .map(|r| {
            let d = -tab.obj[init_col[r]];
            if flipped[r] {
                -d
            } else {
                d
            }
        })
        .collect();
    Ok(StdSolution { status: LpStatus::Optimal, y, duals, pivots })
}

/// Solves `min c.y, A y (rel) b, y >= 0` through
/// `max b.u, A^T u <= c` with `u_r >= 0` on `>=` rows, `u_r <= 0` on `<=` rows
/// and `u_r` free on equality rows. Returns `None` when the dual is
/// infeasible, since the primal may then be either infeasible or unbounded.
fn solve_standard_via_dual(std: &Standardized, max_pivots: usize) -> Result<Option<StdSolution>> {
    let m = std.rows.len();
    let k = std.ncols;
    // Dual columns: (primal row, sign).
    let mut dcols: Vec<(usize, f64)> = Vec::with_capacity(m);
    for (r, row) in std.rows.iter().enumerate() {
        match row.relation {
            Relation::Ge => dcols.push((r, 1.0)),
            Relation::Le => dcols.push((r, -1.0)),
            Relation::Eq => {
                dcols.push((r, 1.0));
                dcols.push((r, -1.0));
            }
        }
    }
    // Minimise -b.u so that the sensitivities come out as primal values.
    let cost: Vec<f64> = dcols.iter().map(|&(r, s)| -s * std.rows[r].rhs).collect();
    let rows: Vec<Constraint> = (0..k)
        .map(|j| Constraint {
            coeffs: dcols.iter().map(|&(r, s)| s * std.rows[r].coeffs[j]).collect(),
            relation: Relation::Le,
            rhs: std.cost[j],
        })
        .collect();
    let dual = Standardized {
        ncols: dcols.len(),
        cost,
        rows,
        columns: Vec::new(),
        offsets: Vec::new(),
    };
    let sol = solve_standard(&dual, max_pivots)?;
    match sol.status {
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Ok(Some(StdSolution {
            status: LpStatus::Infeasible,
            y: Vec::new(),
            duals: Vec::new(),
            pivots: sol.pivots,
        })),
        LpStatus::Optimal => {
            // d(min -D)/dc_j = -y_j.
            let y: Vec<f64> = sol.duals.iter().map(|w| (-w).max(0.0)).collect();
            let mut duals = vec![0.0; m];
            for (col, &(r, s)) in dcols.iter().enumerate() {
                duals[r] += s * sol.y[col];
            }
            Ok(Some(StdSolution { status: LpStatus::Optimal, y, duals, pivots: sol.pivots }))
        }
    }
}
