//! Dense two-phase simplex for the small linear programs this crate
//! produces (at most a few dozen rows and a handful of variables).
//!
//! Bland's anti-cycling rule everywhere, so the solver is deterministic and
//! terminates; a generous iteration guard catches float-induced stalls and is
//! reported as a numerical failure, distinct from infeasible/unbounded.
//! Returned solutions are basic, i.e. vertices of the feasible polyhedron.

use thiserror::Error;

/// Feasibility/optimality tolerance, applied after rows are rescaled so the
/// right-hand side has magnitude at most 1.
const TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex iteration guard exceeded ({0} pivots): numerical failure")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `direction (c · x)` subject to row constraints and per-variable bounds.
/// Lower bounds default to 0; upper bounds are optional.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub direction: Direction,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn new(direction: Direction, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            direction,
            objective,
            constraints: Vec::new(),
            lower_bounds: vec![0.0; n],
            upper_bounds: vec![None; n],
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Direction::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Direction::Minimize, objective)
    }

    pub fn constraint(mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        self.constraints.push(Constraint { coeffs, sense, rhs });
        self
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if n == 0 {
            return Err(LpError::Malformed("no variables".into()));
        }
        if self.lower_bounds.len() != n || self.upper_bounds.len() != n {
            return Err(LpError::Malformed(
                "bound vectors do not match width".into(),
            ));
        }
        if !self.objective.iter().all(|v| v.is_finite()) {
            return Err(LpError::Malformed(
                "non-finite objective coefficient".into(),
            ));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "constraint {i} has width {} (expected {n})",
                    c.coeffs.len()
                )));
            }
            if !c.coeffs.iter().all(|v| v.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!(
                    "constraint {i} has a non-finite coefficient"
                )));
            }
        }
        for (j, (&lo, up)) in self
            .lower_bounds
            .iter()
            .zip(self.upper_bounds.iter())
            .enumerate()
        {
            if !lo.is_finite() {
                return Err(LpError::Malformed(format!(
                    "variable {j}: non-finite lower bound"
                )));
            }
            if let Some(u) = up {
                if !u.is_finite() || *u < lo {
                    return Err(LpError::Malformed(format!(
                        "variable {j}: bad upper bound {u}"
                    )));
                }
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

/// `x` and `objective_value` are meaningful only when `status` is
/// [`LpStatus::Optimal`]; `x` is then a basic feasible optimum (a vertex).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    fn non_optimal(status: LpStatus) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective_value: f64::NAN,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    let n = lp.n_vars();

    // Shift variables by their lower bounds so everything is >= 0, and turn
    // upper bounds into explicit rows. Problems here are tiny, so the extra
    // rows cost nothing.
    let lo = &lp.lower_bounds;
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for c in &lp.constraints {
        let shift: f64 = c.coeffs.iter().zip(lo.iter()).map(|(a, l)| a * l).sum();
        rows.push((c.coeffs.clone(), c.sense, c.rhs - shift));
    }
    for (j, up) in lp.upper_bounds.iter().enumerate() {
        if let Some(u) = up {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, Sense::Le, u - lo[j]));
        }
    }

    let mut objective = lp.objective.clone();
    if lp.direction == Direction::Minimize {
        objective.iter_mut().for_each(|v| *v = -*v);
    }

    // Flip rows so rhs >= 0, then rescale each row so the rhs has unit
    // magnitude, which is what the absolute tolerance is calibrated against.
    for (coeffs, sense, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            coeffs.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Eq => Sense::Eq,
                Sense::Ge => Sense::Le,
            };
        }
        let scale = rhs.max(1.0);
        if scale > 1.0 {
            coeffs.iter_mut().for_each(|v| *v /= scale);
            *rhs /= scale;
        }
    }

    let shifted = simplex(&objective, &rows)?;
    Ok(match shifted {
        SimplexOutcome::Infeasible => LpSolution::non_optimal(LpStatus::Infeasible),
        SimplexOutcome::Unbounded => LpSolution::non_optimal(LpStatus::Unbounded),
        SimplexOutcome::Optimal(xs) => {
            let x: Vec<f64> = xs.iter().zip(lo.iter()).map(|(v, l)| v + l).collect();
            // Recompute from x so the reported value is exactly c·x.
            let objective_value = lp.objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
            LpSolution {
                status: LpStatus::Optimal,
                x,
                objective_value,
            }
        }
    })
}

enum SimplexOutcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

/// Maximize `c · x` over `x >= 0` subject to prepared rows with rhs >= 0.
fn simplex(c: &[f64], rows: &[(Vec<f64>, Sense, f64)]) -> Result<SimplexOutcome, LpError> {
    let n = c.len();
    let m = rows.len();

    // Column layout: structural | slack/surplus | artificial | rhs.
    let n_slack = rows
        .iter()
        .filter(|(_, s, _)| matches!(s, Sense::Le | Sense::Ge))
        .count();
    let n_art = rows
        .iter()
        .filter(|(_, s, _)| matches!(s, Sense::Eq | Sense::Ge))
        .count();
    let width = n + n_slack + n_art + 1;
    let rhs_col = width - 1;
    let art_start = n + n_slack;

    let mut t = vec![0.0; m * width];
    let mut basis = vec![0usize; m];
    let mut slack_idx = n;
    let mut art_idx = art_start;
    for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        let row = &mut t[i * width..(i + 1) * width];
        row[..n].copy_from_slice(coeffs);
        row[rhs_col] = *rhs;
        match sense {
            Sense::Le => {
                row[slack_idx] = 1.0;
                basis[i] = slack_idx;
                slack_idx += 1;
            }
            Sense::Ge => {
                row[slack_idx] = -1.0;
                slack_idx += 1;
                row[art_idx] = 1.0;
                basis[i] = art_idx;
                art_idx += 1;
            }
            Sense::Eq => {
                row[art_idx] = 1.0;
                basis[i] = art_idx;
                art_idx += 1;
            }
        }
    }

    let max_pivots = 2000 + 200 * (m + width);
    let mut pivots = 0usize;

    // Phase 1: drive the artificial variables to zero by maximizing their
    // negated sum. The reduced-cost row is the sum of artificial-basis rows.
    if n_art > 0 {
        let mut obj = vec![0.0; width];
        for i in 0..m {
            if basis[i] >= art_start {
                for jj in 0..width {
                    obj[jj] += t[i * width + jj];
                }
            }
        }
        // Artificial columns never re-enter. The auxiliary objective is
        // bounded, so an "unbounded" outcome here means the arithmetic broke.
        if !run_pivots(
            &mut t,
            &mut obj,
            &mut basis,
            m,
            width,
            art_start,
            &mut pivots,
            max_pivots,
        )? {
            return Err(LpError::IterationLimit(pivots));
        }
        if obj[rhs_col] > 1e-7 {
            return Ok(SimplexOutcome::Infeasible);
        }
        // Pivot any artificial still sitting in the basis out on a
        // structural/slack column; a row with no such column is redundant.
        for i in 0..m {
            if basis[i] < art_start {
                continue;
            }
            let row_start = i * width;
            if let Some(j) = (0..art_start).find(|&j| t[row_start + j].abs() > TOL) {
                pivot(&mut t, &mut basis, m, width, i, j);
                pivots += 1;
            }
        }
    }

    // Phase 2: the real objective expressed in the current basis.
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    for i in 0..m {
        let cb = if basis[i] < n { c[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for jj in 0..width {
                obj[jj] -= cb * t[i * width + jj];
            }
        }
    }
    // rhs cell of the objective row accumulates -z; start from the basis value.
    match run_pivots(
        &mut t,
        &mut obj,
        &mut basis,
        m,
        width,
        art_start,
        &mut pivots,
        max_pivots,
    ) {
        Ok(true) => {}
        Ok(false) => return Ok(SimplexOutcome::Unbounded),
        Err(e) => return Err(e),
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i * width + rhs_col].max(0.0);
        }
    }
    Ok(SimplexOutcome::Optimal(x))
}

/// Bland-rule pivoting loop. Returns Ok(false) when an entering column
/// proves the program unbounded.
#[allow(clippy::too_many_arguments)]
fn run_pivots(
    t: &mut [f64],
    obj: &mut [f64],
    basis: &mut [usize],
    m: usize,
    width: usize,
    banned_from: usize,
    pivots: &mut usize,
    max_pivots: usize,
) -> Result<bool, LpError> {
    let rhs_col = width - 1;
    loop {
        // Entering: lowest-index column with positive reduced cost.
        let Some(enter) = (0..banned_from).find(|&j| obj[j] > TOL) else {
            return Ok(true);
        };
        // Leaving: min ratio; ties broken by lowest basic variable index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i * width + enter];
            if a > TOL {
                let ratio = t[i * width + rhs_col] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - TOL || (ratio < lr + TOL && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((leave_row, _)) = leave else {
            return Ok(false);
        };
        *pivots += 1;
        if *pivots > max_pivots {
            return Err(LpError::IterationLimit(*pivots));
        }
        pivot(t, basis, m, width, leave_row, enter);
        // Keep the objective row in sync with the new basis.
        let factor = obj[enter];
        if factor != 0.0 {
            for jj in 0..width {
                obj[jj] -= factor * t[leave_row * width + jj];
            }
        }
        obj[enter] = 0.0;
    }
}

fn pivot(t: &mut [f64], basis: &mut [usize], m: usize, width: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for jj in 0..width {
        t[row * width + jj] /= p;
    }
    t[row * width + col] = 1.0;
    for i in 0..m {
        if i == row {
            continue;
        }
        let factor = t[i * width + col];
        if factor != 0.0 {
            for jj in 0..width {
                t[i * width + jj] -= factor * t[row * width + jj];
            }
            t[i * width + col] = 0.0;
        }
    }
    basis[row] = col;
}
