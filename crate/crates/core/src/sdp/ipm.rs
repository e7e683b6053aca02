//! Primal-dual path-following core for a real standard-form problem
//!
//! ```txt
//!     min  cᵀl + ⟨C, X⟩
//!     s.t. G l + 𝒜(X) = b,   l ≥ 0,   X ⪰ 0
//! ```
//!
//! with dual
//!
//! ```txt
//!     max  bᵀy
//!     s.t. c − Gᵀy = z ≥ 0,   C − 𝒜*(y) = Z ⪰ 0
//! ```
//!
//! Search directions are HKM (`ΔX = −X + σμZ⁻¹ − XΔZZ⁻¹`, symmetrized) with a
//! Mehrotra predictor-corrector, started from an infeasible interior point.

use crate::linalg::RMat;

/// Fraction-to-boundary factor for step lengths.
pub(crate) const STEP_FRACTION: f64 = 0.98;

/// Iterates whose scale grows past this are treated as diverging.
const DIVERGENCE_LIMIT: f64 = 1e12;

/// Iterations without improvement of the best merit before giving up.
const STALL_LIMIT: usize = 12;
const STALL_MERIT: f64 = 1e-4;

/// `(merit, iteration, l, X, y)` of the best iterate so far.
type BestIterate = (f64, usize, Vec<f64>, RMat, Vec<f64>);

pub(crate) struct StandardForm {
    pub c_lin: Vec<f64>,
    /// Row-major, `m × c_lin.len()`.
    pub g: Vec<Vec<f64>>,
    pub c_mat: RMat,
    pub a_mats: Vec<RMat>,
    pub b: Vec<f64>,
}

impl StandardForm {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn nl(&self) -> usize {
        self.c_lin.len()
    }

    fn n_psd(&self) -> usize {
        self.c_mat.dim()
    }

    fn a_op(&self, x: &RMat) -> Vec<f64> {
        self.a_mats.iter().map(|a| a.inner(x)).collect()
    }

    fn a_adj(&self, y: &[f64]) -> RMat {
        let mut out = RMat::zeros(self.n_psd());
        for (a, yj) in self.a_mats.iter().zip(y) {
            out.axpy(*yj, a);
        }
        out
    }

    fn g_mul(&self, l: &[f64]) -> Vec<f64> {
        self.g
            .iter()
            .map(|row| row.iter().zip(l).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn g_t_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nl()];
        for (row, yj) in self.g.iter().zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yj;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmExit {
    Converged,
    MaxIterations,
    /// Iterates blew up or the Newton system broke down.
    Diverged,
}

pub(crate) struct IpmResult {
    pub exit: IpmExit,
    pub l: Vec<f64>,
    pub x: RMat,
    pub y: Vec<f64>,
    pub iterations: usize,
}

struct Direction {
    dy: Vec<f64>,
    dl: Vec<f64>,
    dz: Vec<f64>,
    dx: RMat,
    dzm: RMat,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn max_step_lin(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

/// Largest `α` with `X + αΔX ⪰ 0`, for `X ≻ 0`.
fn max_step_psd(x: &RMat, dx: &RMat) -> f64 {
    if x.dim() == 0 {
        return f64::INFINITY;
    }
    let Some(l) = x.cholesky() else {
        return 0.0;
    };
    let li = l.lower_inverse();
    let m = &(&li * dx) * &li.transpose();
    let lmin = m.min_eigenvalue();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Cholesky factor of `m`, retrying with a growing diagonal shift when
/// near-degenerate rows make it numerically indefinite.
fn regularized_cholesky(m: &RMat) -> Option<RMat> {
    if let Some(l) = m.cholesky() {
        return Some(l);
    }
    let n = m.dim();
    let base = (0..n)
        .map(|i| m[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut shift = 1e-14 * base;
    while shift <= 1e-6 * base {
        let mut r = m.clone();
        for i in 0..n {
            r[(i, i)] += shift;
        }
        if let Some(l) = r.cholesky() {
            return Some(l);
        }
        shift *= 100.0;
    }
    None
}

pub(crate) fn solve(sf: &StandardForm, tol: f64, max_iter: usize, x0_scale: f64) -> IpmResult {
    let m = sf.m();
    let nl = sf.nl();
    let n = sf.n_psd();

    let mut l = vec![1.0; nl];
    let mut x = RMat::identity(n).scale(x0_scale);
    let mut y = vec![0.0; m];
    let c_scale = 1.0
        + sf.c_lin
            .iter()
            .map(|v| v.abs())
            .fold(sf.c_mat.frobenius_norm(), f64::max);
    let mut z = vec![c_scale; nl];
    let mut zm = RMat::identity(n).scale(c_scale);

    let b_norm = norm(&sf.b);
    let c_norm = (dot(&sf.c_lin, &sf.c_lin) + sf.c_mat.inner(&sf.c_mat)).sqrt();
    let dim = (nl + n) as f64;

    let mut exit = IpmExit::MaxIterations;
    let mut iterations = 0;
    // Close to the optimum, rounding can make later iterates worse than
    // earlier ones; the best one seen is returned when the run stalls.
    let mut best: Option<BestIterate> = None;
    for iter in 0..=max_iter {
        iterations = iter;
        // residuals
        let gl = sf.g_mul(&l);
        let ax = sf.a_op(&x);
        let rp: Vec<f64> = (0..m).map(|j| sf.b[j] - gl[j] - ax[j]).collect();
        let gty = sf.g_t_mul(&y);
        let rd: Vec<f64> = (0..nl).map(|k| sf.c_lin[k] - gty[k] - z[k]).collect();
        let rdm = &(&sf.c_mat - &sf.a_adj(&y)) - &zm;

        let pobj = dot(&sf.c_lin, &l) + sf.c_mat.inner(&x);
        let dobj = dot(&sf.b, &y);
        let mu = (dot(&l, &z) + x.inner(&zm)) / dim;

        let p_inf = norm(&rp) / (1.0 + b_norm);
        let d_inf = (dot(&rd, &rd) + rdm.inner(&rdm)).sqrt() / (1.0 + c_norm);
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let compl = mu * dim / (1.0 + pobj.abs() + dobj.abs());
        log::trace!(
            "ipm {iter:3}: pobj {pobj:.10e} dobj {dobj:.10e} pinf {p_inf:.2e} dinf {d_inf:.2e} mu {mu:.2e}"
        );
        if p_inf <= tol && d_inf <= tol && rel_gap <= tol && compl <= tol {
            exit = IpmExit::Converged;
            best = None;
            break;
        }
        let merit = p_inf.max(d_inf).max(rel_gap).max(compl);
        match &best {
            Some((m, at, ..)) if merit >= *m => {
                // only near-converged runs count as stalled; others may
                // still be heading for a divergence verdict
                if iter - at >= STALL_LIMIT && *m < STALL_MERIT {
                    break;
                }
            }
            _ => best = Some((merit, iter, l.clone(), x.clone(), y.clone())),
        }
        if iter == max_iter {
            break;
        }
        let scale = l
            .iter()
            .chain(&y)
            .map(|v| v.abs())
            .fold(x.trace().max(zm.trace()), f64::max);
        if !scale.is_finite() || scale > DIVERGENCE_LIMIT {
            exit = IpmExit::Diverged;
            break;
        }

        let Some(zinv) = zm.spd_inverse() else {
            exit = IpmExit::Diverged;
            break;
        };

        // Schur complement: G D Gᵀ + [⟨A_i, X A_j Z⁻¹⟩]
        let d: Vec<f64> = l.iter().zip(&z).map(|(a, b)| a / b).collect();
        let xaz: Vec<RMat> = sf.a_mats.iter().map(|a| &(&x * a) * &zinv).collect();
        let mut schur = RMat::zeros(m);
        for i in 0..m {
            for j in i..m {
                let mut v = 0.0;
                for k in 0..nl {
                    v += sf.g[i][k] * d[k] * sf.g[j][k];
                }
                if n > 0 {
                    v += 0.5 * (sf.a_mats[i].inner(&xaz[j]) + sf.a_mats[j].inner(&xaz[i]));
                }
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let Some(schur_l) = regularized_cholesky(&schur) else {
            exit = IpmExit::Diverged;
            break;
        };
        let x_rd_zinv = &(&x * &rdm) * &zinv;

        let direction = |tau_l: &[f64], k_mat: &RMat| -> Direction {
            // M dy = rp − G(τ/z − D r_d) − 𝒜(K − X R_d Z⁻¹)
            let u: Vec<f64> = (0..nl).map(|k| tau_l[k] / z[k] - d[k] * rd[k]).collect();
            let gu = sf.g_mul(&u);
            let ak = sf.a_op(&(k_mat - &x_rd_zinv));
            let rhs: Vec<f64> = (0..m).map(|j| rp[j] - gu[j] - ak[j]).collect();
            let dy = schur_l.cholesky_solve(&rhs);
            let gtdy = sf.g_t_mul(&dy);
            let dz: Vec<f64> = (0..nl).map(|k| rd[k] - gtdy[k]).collect();
            let dzm = &rdm - &sf.a_adj(&dy);
            let dl: Vec<f64> = (0..nl).map(|k| (tau_l[k] - l[k] * dz[k]) / z[k]).collect();
            let dx = (k_mat - &(&(&x * &dzm) * &zinv)).symmetrized();
            Direction {
                dy,
                dl,
                dz,
                dx,
                dzm,
            }
        };

        // predictor
        let tau_aff: Vec<f64> = (0..nl).map(|k| -l[k] * z[k]).collect();
        let k_aff = x.scale(-1.0);
        let aff = direction(&tau_aff, &k_aff);
        let ap = max_step_lin(&l, &aff.dl)
            .min(max_step_psd(&x, &aff.dx))
            .min(1.0);
        let ad = max_step_lin(&z, &aff.dz)
            .min(max_step_psd(&zm, &aff.dzm))
            .min(1.0);
        let mu_aff = {
            let la: Vec<f64> = (0..nl).map(|k| l[k] + ap * aff.dl[k]).collect();
            let za: Vec<f64> = (0..nl).map(|k| z[k] + ad * aff.dz[k]).collect();
            let mut xa = x.clone();
            xa.axpy(ap, &aff.dx);
            let mut zma = zm.clone();
            zma.axpy(ad, &aff.dzm);
            (dot(&la, &za) + xa.inner(&zma)) / dim
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let tau: Vec<f64> = (0..nl)
            .map(|k| sigma * mu - l[k] * z[k] - aff.dl[k] * aff.dz[k])
            .collect();
        let mut k_cor = zinv.scale(sigma * mu);
        k_cor.axpy(-1.0, &x);
        k_cor.axpy(-1.0, &(&(&aff.dx * &aff.dzm) * &zinv));
        let dir = direction(&tau, &k_cor);

        let ap =
            (STEP_FRACTION * max_step_lin(&l, &dir.dl).min(max_step_psd(&x, &dir.dx))).min(1.0);
        let ad =
            (STEP_FRACTION * max_step_lin(&z, &dir.dz).min(max_step_psd(&zm, &dir.dzm))).min(1.0);

        for k in 0..nl {
            l[k] += ap * dir.dl[k];
            z[k] += ad * dir.dz[k];
        }
        for j in 0..m {
            y[j] += ad * dir.dy[j];
        }
        x.axpy(ap, &dir.dx);
        zm.axpy(ad, &dir.dzm);
    }

    if let Some((_, _, bl, bx, by)) = best {
        // a diverging run keeps its last iterate as evidence of unboundedness
        if exit == IpmExit::MaxIterations {
            l = bl;
            x = bx;
            y = by;
        }
    }
    IpmResult {
        exit,
        l,
        x,
        y,
        iterations,
    }
}
