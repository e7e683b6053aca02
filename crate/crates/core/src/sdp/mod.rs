//! Small conic solver: a linear objective over nonnegative scalars and one
//! Hermitian PSD matrix, subject to `≥` linear constraints.
//!
//! ```txt
//!     min  Σ c_k p_k + Tr(C W)
//!     s.t. Σ a_jk p_k + Tr(S_j W) ≥ b_j    for each constraint j
//!          p ≥ 0,  W ⪰ 0
//! ```
//!
//! The Hermitian block is handled through its real symmetric embedding, so
//! the interior-point core only ever sees real matrices. Rows are scaled to
//! unit norm and the right-hand side to unit magnitude before solving, and
//! the returned point is mapped back and polished to exact primal
//! feasibility. The reported dual objective is a certified lower bound
//! whenever the zero point is dual feasible (nonnegative costs, PSD `C`).

mod io;
mod ipm;

pub use io::{read_problem, write_problem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_real_embedding, real_embedding, CMat, RMat};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Tightest inner tolerance tried when a converged run fails the post-check.
const MIN_INNER_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub scalars: Vec<f64>,
    pub matrix: CMat,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub n_scalars: usize,
    pub psd_dim: usize,
    pub objective_scalars: Vec<f64>,
    pub objective_matrix: CMat,
    pub constraints: Vec<LinearConstraint>,
}

impl ConicProblem {
    /// Problem with a zero objective and no constraints.
    pub fn new(n_scalars: usize, psd_dim: usize) -> Self {
        Self {
            n_scalars,
            psd_dim,
            objective_scalars: vec![0.0; n_scalars],
            objective_matrix: CMat::zeros(psd_dim),
            constraints: Vec::new(),
        }
    }

    pub fn with_objective(mut self, scalars: Vec<f64>, matrix: CMat) -> Self {
        self.objective_scalars = scalars;
        self.objective_matrix = matrix;
        self
    }

    /// Adds `Σ a_k p_k + Tr(S W) ≥ bound`.
    pub fn add_constraint(&mut self, scalars: Vec<f64>, matrix: CMat, bound: f64) {
        self.constraints.push(LinearConstraint {
            scalars,
            matrix,
            bound,
        });
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.objective_scalars.len() != self.n_scalars {
            return bad("objective scalar weights have the wrong length".into());
        }
        if self.objective_matrix.dim() != self.psd_dim || !self.objective_matrix.is_hermitian() {
            return bad("objective matrix must be Hermitian of size psd_dim".into());
        }
        for (j, c) in self.constraints.iter().enumerate() {
            if c.scalars.len() != self.n_scalars {
                return bad(format!(
                    "constraint {j}: wrong number of scalar coefficients"
                ));
            }
            if c.matrix.dim() != self.psd_dim || !c.matrix.is_hermitian() {
                return bad(format!(
                    "constraint {j}: matrix must be Hermitian of size psd_dim"
                ));
            }
            if !c.bound.is_finite()
                || c.scalars.iter().any(|v| !v.is_finite())
                || c.matrix.frobenius_norm().is_nan()
            {
                return bad(format!("constraint {j}: non-finite data"));
            }
        }
        if self.objective_scalars.iter().any(|v| !v.is_finite())
            || !self.objective_matrix.frobenius_norm().is_finite()
        {
            return bad("non-finite objective".into());
        }
        Ok(())
    }

    /// Left-hand side `Σ a_k p_k + Re Tr(S W)` of every constraint.
    pub fn constraint_values(&self, scalars: &[f64], matrix: &CMat) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| lhs(c, scalars, matrix))
            .collect()
    }

    pub fn objective_value(&self, scalars: &[f64], matrix: &CMat) -> f64 {
        dot(&self.objective_scalars, scalars) + self.objective_matrix.trace_product(matrix).re
    }

    /// `Σ_j y_j S_j` and `Σ_j y_j a_j`.
    fn adjoint(&self, y: &[f64]) -> (Vec<f64>, CMat) {
        let mut s = vec![0.0; self.n_scalars];
        let mut m = CMat::zeros(self.psd_dim);
        for (c, yj) in self.constraints.iter().zip(y) {
            for (o, a) in s.iter_mut().zip(&c.scalars) {
                *o += yj * a;
            }
            m = &m + &c.matrix.scale_real(*yj);
        }
        (s, m)
    }

    fn zero_is_dual_feasible(&self) -> bool {
        self.objective_scalars.iter().all(|c| *c >= 0.0)
            && min_hermitian_eigenvalue(&self.objective_matrix) >= 0.0
    }
}

fn lhs(c: &LinearConstraint, scalars: &[f64], matrix: &CMat) -> f64 {
    dot(&c.scalars, scalars) + c.matrix.trace_product(matrix).re
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn min_hermitian_eigenvalue(a: &CMat) -> f64 {
    if a.dim() == 0 {
        return f64::INFINITY;
    }
    real_embedding(a).min_eigenvalue()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub scalars: Vec<f64>,
    pub matrix: CMat,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `max(0, primal − dual)`.
    pub gap: f64,
    pub relative_gap: f64,
    /// Largest constraint violation relative to `1 + |b_j|`.
    pub primal_residual: f64,
    /// Multipliers of the constraints (nonnegative).
    pub duals: Vec<f64>,
    /// Farkas ray for infeasible problems: `y ≥ 0` with `bᵀy > 0` and
    /// `Σ y_j a_j ≤ 0`, `Σ y_j S_j ⪯ 0`.
    pub certificate: Option<Vec<f64>>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

pub fn solve(problem: &ConicProblem, tol: f64) -> Result<ConicSolution> {
    solve_with(
        problem,
        &SolverOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn solve_with(problem: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    problem.validate()?;
    if !(1e-10..=1e-2).contains(&opts.tol) {
        return Err(Error::InvalidInput(format!(
            "tolerance {} outside [1e-10, 1e-2]",
            opts.tol
        )));
    }
    let np = problem.n_scalars;
    let nw = problem.psd_dim;
    let m_all = problem.constraints.len();

    // Rows with no coefficients are either vacuous or certify infeasibility.
    let mut rows = Vec::with_capacity(m_all);
    for (j, c) in problem.constraints.iter().enumerate() {
        let norm = row_norm(c);
        if norm == 0.0 {
            if c.bound > 0.0 {
                let mut ray = vec![0.0; m_all];
                ray[j] = 1.0;
                return Ok(infeasible(problem, ray, 0));
            }
            continue;
        }
        rows.push((j, norm));
    }

    let zero_dual_ok = problem.zero_is_dual_feasible();
    if zero_dual_ok
        && rows
            .iter()
            .all(|&(j, _)| problem.constraints[j].bound <= 0.0)
    {
        // p = 0, W = 0 is feasible and no feasible point has negative cost.
        return Ok(finish(
            problem,
            SolveStatus::Optimal,
            vec![0.0; np],
            CMat::zeros(nw),
            vec![0.0; m_all],
            0,
            opts.tol,
        ));
    }
    if rows.is_empty() {
        // no active rows and a cost that can go negative
        return Ok(finish(
            problem,
            SolveStatus::Unbounded,
            vec![0.0; np],
            CMat::zeros(nw),
            vec![0.0; m_all],
            0,
            opts.tol,
        ));
    }

    let b_scale = rows
        .iter()
        .map(|&(j, r)| (problem.constraints[j].bound / r).abs())
        .fold(0.0, f64::max);
    let b_scale = if b_scale > 0.0 { b_scale } else { 1.0 };
    let c_emb = real_embedding(&problem.objective_matrix).scale(0.5);
    let c_scale = problem
        .objective_scalars
        .iter()
        .map(|v| v.abs())
        .chain(c_emb.as_slice().iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let c_scale = if c_scale > 0.0 { c_scale } else { 1.0 };

    let sf = standard_form(problem, &rows, b_scale, c_scale, false);
    let unscale_y = |y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m_all];
        for (k, &(j, r)) in rows.iter().enumerate() {
            out[j] = (y[k] / r * c_scale).max(0.0);
        }
        out
    };
    let unscale_primal = |res: &ipm::IpmResult| -> (Vec<f64>, CMat) {
        let p = res.l[..np].iter().map(|v| v.max(0.0) * b_scale).collect();
        let w = if nw > 0 {
            from_real_embedding(&res.x).scale_real(b_scale)
        } else {
            CMat::zeros(0)
        };
        (p, w)
    };

    // Polishing and dual repair can cost a little accuracy, so a converged
    // run that fails the post-check is repeated at a tighter inner tolerance.
    let mut inner_tol = 0.1 * opts.tol;
    let mut spent = 0;
    let res = loop {
        let res = ipm::solve(&sf, inner_tol, opts.max_iter, 2.0);
        spent += res.iterations;
        log::debug!(
            "conic solve: {:?} after {} iterations ({} rows, psd {}, inner tol {:.0e})",
            res.exit,
            res.iterations,
            rows.len(),
            nw,
            inner_tol
        );
        if res.exit != ipm::IpmExit::Converged {
            break res;
        }
        let (p, w) = unscale_primal(&res);
        let sol = finish(
            problem,
            SolveStatus::Optimal,
            p,
            w,
            unscale_y(&res.y),
            spent,
            opts.tol,
        );
        if sol.status == SolveStatus::Optimal {
            return Ok(sol);
        }
        log::debug!(
            "post-check failed: rel gap {:.3e}, residual {:.3e}",
            sol.relative_gap,
            sol.primal_residual
        );
        if inner_tol <= MIN_INNER_TOL {
            return Ok(ConicSolution {
                status: SolveStatus::MaxIterations,
                ..sol
            });
        }
        inner_tol = (inner_tol * 1e-2).max(MIN_INNER_TOL);
    };

    // A stalled run may still carry a certificate that meets the tolerance.
    // Only a repaired dual gives a valid bound, so this needs y = 0 feasible.
    if res.exit == ipm::IpmExit::MaxIterations && zero_dual_ok {
        let (p, w) = unscale_primal(&res);
        let sol = finish(
            problem,
            SolveStatus::Optimal,
            p,
            w,
            unscale_y(&res.y),
            spent,
            opts.tol,
        );
        if sol.status == SolveStatus::Optimal && sol.primal_objective.is_finite() {
            return Ok(sol);
        }
    }

    // Not converged: decide feasibility with the auxiliary-slack problem.
    let phase1 = standard_form(problem, &rows, b_scale, 1.0, true);
    let p1 = ipm::solve(&phase1, 0.1 * opts.tol, opts.max_iter, 2.0);
    let shift = p1.l[np];
    let iterations = spent + p1.iterations;
    if p1.exit == ipm::IpmExit::Converged && shift > 10.0 * opts.tol {
        let ray: Vec<f64> = {
            let mut out = vec![0.0; m_all];
            for (k, &(j, r)) in rows.iter().enumerate() {
                out[j] = (p1.y[k] / r).max(0.0);
            }
            out
        };
        return Ok(infeasible(problem, ray, iterations));
    }

    let (p, w) = unscale_primal(&res);
    let diverging_down = res.exit == ipm::IpmExit::Diverged
        && problem.objective_value(&p, &w) < 0.0
        && !zero_dual_ok;
    let status = if diverging_down {
        SolveStatus::Unbounded
    } else {
        SolveStatus::MaxIterations
    };
    let sol = finish(
        problem,
        status,
        p,
        w,
        unscale_y(&res.y),
        iterations,
        opts.tol,
    );
    Ok(ConicSolution { status, ..sol })
}

fn row_norm(c: &LinearConstraint) -> f64 {
    let a2: f64 = c.scalars.iter().map(|v| v * v).sum();
    // ‖emb(S)/2‖_F² = ‖S‖_F² / 2
    (a2 + 0.5 * c.matrix.frobenius_norm().powi(2)).sqrt()
}

fn standard_form(
    problem: &ConicProblem,
    rows: &[(usize, f64)],
    b_scale: f64,
    c_scale: f64,
    phase1: bool,
) -> ipm::StandardForm {
    let np = problem.n_scalars;
    let m = rows.len();
    let extra = usize::from(phase1);
    let nl = np + extra + m;
    let mut c_lin = vec![0.0; nl];
    let c_mat;
    if phase1 {
        c_lin[np] = 1.0;
        c_mat = RMat::zeros(2 * problem.psd_dim);
    } else {
        for k in 0..np {
            c_lin[k] = problem.objective_scalars[k] / c_scale;
        }
        c_mat = real_embedding(&problem.objective_matrix).scale(0.5 / c_scale);
    }
    let mut g = Vec::with_capacity(m);
    let mut a_mats = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for (k, &(j, r)) in rows.iter().enumerate() {
        let c = &problem.constraints[j];
        let mut row = vec![0.0; nl];
        for i in 0..np {
            row[i] = c.scalars[i] / r;
        }
        if phase1 {
            row[np] = 1.0;
        }
        row[np + extra + k] = -1.0;
        g.push(row);
        a_mats.push(real_embedding(&c.matrix).scale(0.5 / r));
        b.push(c.bound / r / b_scale);
    }
    ipm::StandardForm {
        c_lin,
        g,
        c_mat,
        a_mats,
        b,
    }
}

fn infeasible(problem: &ConicProblem, ray: Vec<f64>, iterations: usize) -> ConicSolution {
    ConicSolution {
        status: SolveStatus::Infeasible,
        scalars: vec![0.0; problem.n_scalars],
        matrix: CMat::zeros(problem.psd_dim),
        primal_objective: f64::INFINITY,
        dual_objective: f64::INFINITY,
        gap: 0.0,
        relative_gap: 0.0,
        primal_residual: f64::INFINITY,
        duals: vec![0.0; problem.constraints.len()],
        certificate: Some(ray),
        iterations,
    }
}

/// Polishes a candidate to primal feasibility, repairs the multipliers to
/// dual feasibility, and computes the certificate numbers.
fn finish(
    problem: &ConicProblem,
    status: SolveStatus,
    mut p: Vec<f64>,
    mut w: CMat,
    mut y: Vec<f64>,
    iterations: usize,
    tol: f64,
) -> ConicSolution {
    // Primal, first pass: rows that involve a single scalar and no matrix
    // are met by raising that scalar alone, which is harmless when its
    // column has no negative coefficient.
    let column_nonneg: Vec<bool> = (0..problem.n_scalars)
        .map(|k| problem.constraints.iter().all(|c| c.scalars[k] >= 0.0))
        .collect();
    for c in &problem.constraints {
        let mut nz = c.scalars.iter().enumerate().filter(|(_, a)| **a != 0.0);
        let (Some((k, &a)), None) = (nz.next(), nz.next()) else {
            continue;
        };
        if a > 0.0 && column_nonneg[k] && c.matrix.frobenius_norm() == 0.0 && p[k] * a < c.bound {
            p[k] = c.bound / a;
        }
    }
    // Second pass: the smallest uniform scaling t ≥ 1 that satisfies every row.
    let values = problem.constraint_values(&p, &w);
    let mut t_lo: f64 = 1.0;
    let mut t_hi = f64::INFINITY;
    let mut scalable = true;
    for (c, v) in problem.constraints.iter().zip(&values) {
        if *v > 0.0 {
            t_lo = t_lo.max(c.bound / v);
        } else if *v < 0.0 {
            t_hi = t_hi.min(c.bound / v);
        } else if c.bound > 0.0 {
            scalable = false;
        }
    }
    if scalable && t_lo <= t_hi && t_lo.is_finite() && t_lo > 1.0 {
        for v in p.iter_mut() {
            *v *= t_lo;
        }
        w = w.scale_real(t_lo);
    }

    // Dual: shrink y towards 0 until c − Σ y a ≥ 0 and C − Σ y S ⪰ 0.
    if problem.zero_is_dual_feasible() {
        let (ya, ys) = problem.adjoint(&y);
        let mut t: f64 = 1.0;
        for (c, s) in problem.objective_scalars.iter().zip(&ya) {
            let z = c - s;
            if z < 0.0 {
                t = t.min(c / (c - z));
            }
        }
        if problem.psd_dim > 0 {
            let zmat = &problem.objective_matrix - &ys;
            let lz = min_hermitian_eigenvalue(&zmat);
            if lz < 0.0 {
                let lc = min_hermitian_eigenvalue(&problem.objective_matrix).max(0.0);
                t = t.min(lc / (lc - lz));
            }
        }
        if t < 1.0 {
            for v in y.iter_mut() {
                *v *= t;
            }
        }
    }

    let values = problem.constraint_values(&p, &w);
    let primal_residual = problem
        .constraints
        .iter()
        .zip(&values)
        .map(|(c, v)| ((c.bound - v) / (1.0 + c.bound.abs())).max(0.0))
        .fold(0.0, f64::max);
    let primal_objective = problem.objective_value(&p, &w);
    let dual_objective: f64 = problem
        .constraints
        .iter()
        .zip(&y)
        .map(|(c, yj)| c.bound * yj)
        .sum();
    let gap = (primal_objective - dual_objective).max(0.0);
    let denom = primal_objective.abs().max(dual_objective.abs());
    let relative_gap = if gap == 0.0 { 0.0 } else { gap / denom };
    let bounds_ok = problem
        .constraints
        .iter()
        .zip(&values)
        .all(|(c, v)| c.bound - v <= tol * (1.0 + c.bound.abs()));
    let status = if status == SolveStatus::Optimal && !(relative_gap <= tol && bounds_ok) {
        SolveStatus::MaxIterations
    } else {
        status
    };
    ConicSolution {
        status,
        scalars: p,
        matrix: w,
        primal_objective,
        dual_objective,
        gap,
        relative_gap,
        primal_residual,
        duals: y,
        certificate: None,
        iterations,
    }
}
