//! Phase-1 BS power minimization.
//!
//! For fixed split factors the problem is
//!
//! ```txt
//!     min  P₁ + P₂ + Tr(W_C)
//!     s.t. β₁ᵢ ≤ Pᵢ gᵢ
//!          β₂ᵢ ≤ Tr(Hᵢ W_C)
//!          β₃ᵢ ≤ Pᵢ gᵢ + Tr(Hᵢ W_C),     i = 1, 2
//!          Pᵢ ≥ 0,  W_C ⪰ 0
//! ```
//!
//! with `gᵢ = |hᵢᴴwᵢ|²` the ZF gains and `Hᵢ = hᵢhᵢᴴ`. Dropping the rank-one
//! requirement on `W_C` makes this an SDP whose optimum lower-bounds the
//! true minimum; it is tight whenever the returned `W_C` has rank one.
//! The split factors themselves are searched on a grid followed by a
//! coordinate golden-section pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{zf_beamformers, BeamformerSet};
use crate::channel::{complex_gaussian, substream, ChannelRealization, Stream};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::rate_model::{beta_coefficients, BetaCoefficients, RateRequirements, SplitFactors};
use crate::sdp::{self, ConicProblem, SolveStatus};

/// Solver tolerance used for every BS problem.
pub const BS_SOLVER_TOL: f64 = 1e-7;
/// `λ₂/λ₁` at or below this counts as rank one.
pub const RANK_RATIO: f64 = 1e-6;
/// A common beam carrying less than this share of the total power counts as
/// absent.
const NEGLIGIBLE_COMMON_SHARE: f64 = 1e-6;
/// Golden-section stopping width in α.
const REFINE_TOL: f64 = 1e-3;
/// Randomization draws used when a common-only relaxation is not rank one.
const EXTRACTION_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "WEW")]
    Wew,
    #[serde(rename = "ZFOnly")]
    ZfOnly,
    #[serde(rename = "CommonOnly")]
    CommonOnly,
    #[serde(rename = "RandomSplit")]
    RandomSplit,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Wew,
        Scheme::ZfOnly,
        Scheme::CommonOnly,
        Scheme::RandomSplit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Wew => "WEW",
            Scheme::ZfOnly => "ZFOnly",
            Scheme::CommonOnly => "CommonOnly",
            Scheme::RandomSplit => "RandomSplit",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme {s:?}")))
    }
}

/// A feasible rank-one common beamformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneBeam {
    pub beam: CVec,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsPowerSolution {
    pub scheme: Scheme,
    pub alpha: SplitFactors,
    pub p1: f64,
    pub p2: f64,
    pub w_c: CMat,
    /// Principal common beam when `w_c` is rank one (or zero), otherwise the
    /// best randomized extraction if one was computed.
    pub common_beam: Option<RankOneBeam>,
    pub total_power: f64,
    pub status: SolveStatus,
    /// Relative duality gap reported by the conic solver (0 for closed forms).
    pub solver_gap: f64,
    /// True when `w_c` has rank above one, so `total_power` is only a lower
    /// bound on what a single common beam needs.
    pub is_lower_bound: bool,
    /// Largest relative constraint violation (0 for closed forms).
    pub primal_residual: f64,
    pub iterations: usize,
}

/// Worst-case certificate quality over a batch of conic solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub solves: u64,
    pub non_optimal: u64,
    pub max_gap: f64,
    pub max_residual: f64,
}

impl SolveStats {
    pub fn record(&mut self, s: &BsPowerSolution) {
        self.solves += 1;
        if s.status != SolveStatus::Optimal {
            self.non_optimal += 1;
        }
        self.max_gap = self.max_gap.max(s.solver_gap);
        self.max_residual = self.max_residual.max(s.primal_residual);
    }

    pub fn merge(&mut self, other: &SolveStats) {
        self.solves += other.solves;
        self.non_optimal += other.non_optimal;
        self.max_gap = self.max_gap.max(other.max_gap);
        self.max_residual = self.max_residual.max(other.max_residual);
    }
}

impl BsPowerSolution {
    pub fn common_power(&self) -> f64 {
        self.w_c.trace().re
    }

    /// Received private and common power `(Pᵢgᵢ, Tr(HᵢW_C))` at each SBS.
    pub fn received_powers(&self, ch: &ChannelRealization) -> Result<([f64; 2], [f64; 2])> {
        let gains = if self.p1 > 0.0 || self.p2 > 0.0 {
            zf_beamformers(&ch.h1, &ch.h2)?.gains()
        } else {
            [0.0; 2]
        };
        let rx_c = [
            ch.h1.outer().trace_product(&self.w_c).re,
            ch.h2.outer().trace_product(&self.w_c).re,
        ];
        Ok(([self.p1 * gains[0], self.p2 * gains[1]], rx_c))
    }

    /// One JSON-lines debug record.
    pub fn debug_record(&self, seed_id: u64) -> serde_json::Value {
        serde_json::json!({
            "seed_id": seed_id,
            "scheme": self.scheme.name(),
            "alpha": [self.alpha.alpha1, self.alpha.alpha2],
            "P1": self.p1,
            "P2": self.p2,
            "tr_wc": self.common_power(),
            "total": self.total_power,
            "status": self.status,
            "gap": self.solver_gap,
            "is_lower_bound": self.is_lower_bound,
        })
    }

    fn better_than(&self, other: &BsPowerSolution) -> bool {
        if self.total_power != other.total_power {
            return self.total_power < other.total_power;
        }
        (self.alpha.alpha1, self.alpha.alpha2) < (other.alpha.alpha1, other.alpha.alpha2)
    }
}

/// Builds the relaxed program for given thresholds and gains.
pub fn build_problem(
    ch: &ChannelRealization,
    betas: &BetaCoefficients,
    gains: [f64; 2],
) -> ConicProblem {
    let dim = ch.h1.dim();
    let mut p = ConicProblem::new(2, dim).with_objective(vec![1.0, 1.0], CMat::identity(dim));
    for (i, h) in ch.channels().into_iter().enumerate() {
        let hh = h.outer();
        let mut a = vec![0.0; 2];
        a[i] = gains[i];
        p.add_constraint(a.clone(), CMat::zeros(dim), betas.beta1[i]);
        p.add_constraint(vec![0.0; 2], hh.clone(), betas.beta2[i]);
        p.add_constraint(a, hh, betas.beta3[i]);
    }
    p
}

fn beamformers_for(ch: &ChannelRealization, alpha: SplitFactors) -> Result<Option<BeamformerSet>> {
    match zf_beamformers(&ch.h1, &ch.h2) {
        Ok(set) => Ok(Some(set)),
        Err(Error::CollinearChannels { .. }) if !alpha.has_private_part() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Principal beam of `w` when it is numerically rank one (or negligible
/// against `total`).
fn principal_beam(w: &CMat, total: f64) -> (Option<RankOneBeam>, bool) {
    let (vals, vecs) = w.hermitian_eigen();
    let l1 = vals[0].max(0.0);
    let l2 = vals.get(1).copied().unwrap_or(0.0).max(0.0);
    let trace = w.trace().re;
    if trace <= NEGLIGIBLE_COMMON_SHARE * total || l1 == 0.0 {
        let beam = vecs[0].scale_real(l1.sqrt()).with_canonical_phase();
        return (Some(RankOneBeam { beam, power: l1 }), false);
    }
    if l2 <= RANK_RATIO * l1 {
        let beam = vecs[0].scale_real(l1.sqrt()).with_canonical_phase();
        (Some(RankOneBeam { beam, power: l1 }), false)
    } else {
        (None, true)
    }
}

fn from_conic(
    scheme: Scheme,
    alpha: SplitFactors,
    sol: sdp::ConicSolution,
) -> Result<BsPowerSolution> {
    match sol.status {
        SolveStatus::Optimal | SolveStatus::MaxIterations => {}
        other => {
            return Err(Error::SolverFailure(format!(
                "conic solver reported {other:?} for a problem that is always feasible"
            )))
        }
    }
    let p1 = sol.scalars[0];
    let p2 = sol.scalars[1];
    let total_power = p1 + p2 + sol.matrix.trace().re;
    let (common_beam, is_lower_bound) = principal_beam(&sol.matrix, total_power);
    Ok(BsPowerSolution {
        scheme,
        alpha,
        p1,
        p2,
        w_c: sol.matrix,
        common_beam,
        total_power,
        status: sol.status,
        solver_gap: sol.relative_gap,
        is_lower_bound,
        primal_residual: sol.primal_residual,
        iterations: sol.iterations,
    })
}

pub fn solve_fixed_alpha(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    alpha: SplitFactors,
    sigma2: f64,
) -> Result<BsPowerSolution> {
    let bf = beamformers_for(ch, alpha)?;
    let gains = bf.map(|b| b.gains()).unwrap_or([0.0; 2]);
    let betas = beta_coefficients(rates, alpha, ch.gamma_m(), sigma2);
    let problem = build_problem(ch, &betas, gains);
    let sol = sdp::solve(&problem, BS_SOLVER_TOL)?;
    from_conic(Scheme::Wew, alpha, sol)
}

/// All-private transmission: `Pᵢ = β₁ᵢ / gᵢ` with no common beam.
pub fn solve_zf_only(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    sigma2: f64,
) -> Result<BsPowerSolution> {
    let bf = zf_beamformers(&ch.h1, &ch.h2)?;
    let alpha = SplitFactors::ALL_PRIVATE;
    let betas = beta_coefficients(rates, alpha, ch.gamma_m(), sigma2);
    let p1 = betas.beta1[0] / bf.gain1;
    let p2 = betas.beta1[1] / bf.gain2;
    let dim = ch.h1.dim();
    Ok(BsPowerSolution {
        scheme: Scheme::ZfOnly,
        alpha,
        p1,
        p2,
        w_c: CMat::zeros(dim),
        common_beam: Some(RankOneBeam {
            beam: CVec::zeros(dim),
            power: 0.0,
        }),
        total_power: p1 + p2,
        status: SolveStatus::Optimal,
        solver_gap: 0.0,
        is_lower_bound: false,
        primal_residual: 0.0,
        iterations: 0,
    })
}

/// All-common transmission: `min Tr(W) s.t. Tr(HᵢW) ≥ β₂ᵢ`, followed by a
/// rank-one extraction when the relaxation is not tight.
pub fn solve_common_only(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    sigma2: f64,
) -> Result<BsPowerSolution> {
    let alpha = SplitFactors::ALL_COMMON;
    let betas = beta_coefficients(rates, alpha, ch.gamma_m(), sigma2);
    let dim = ch.h1.dim();
    let mut problem = ConicProblem::new(2, dim).with_objective(vec![1.0, 1.0], CMat::identity(dim));
    for (i, h) in ch.channels().into_iter().enumerate() {
        problem.add_constraint(vec![0.0; 2], h.outer(), betas.beta2[i]);
    }
    let sol = sdp::solve(&problem, BS_SOLVER_TOL)?;
    let mut out = from_conic(Scheme::CommonOnly, alpha, sol)?;
    if out.is_lower_bound {
        let mut rng = substream(0, ch.seed_id, Stream::Randomization);
        let constraints = [
            (ch.h1.clone(), betas.beta2[0]),
            (ch.h2.clone(), betas.beta2[1]),
        ];
        out.common_beam = Some(extract_rank1(
            &out.w_c,
            &constraints,
            EXTRACTION_SAMPLES,
            &mut rng,
        ));
    }
    Ok(out)
}

fn alpha_grid(step: f64) -> Vec<f64> {
    let mut pts = Vec::new();
    let mut k = 0usize;
    loop {
        let a = k as f64 * step;
        if a >= 1.0 - 1e-12 {
            break;
        }
        pts.push(a);
        k += 1;
    }
    pts.push(1.0);
    pts
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search,
/// returning every evaluated point.
fn golden_section<F>(lo: f64, hi: f64, tol: f64, mut f: F) -> Vec<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut seen = vec![(c, fc), (d, fd)];
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            seen.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            seen.push((d, fd));
        }
    }
    seen
}

/// Joint optimization over the split factors.
pub fn optimize_alpha(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    sigma2: f64,
    grid_step: f64,
) -> Result<BsPowerSolution> {
    optimize_alpha_traced(ch, rates, sigma2, grid_step, &mut SolveStats::default())
}

/// [`optimize_alpha`] that also records every conic solve in `stats`.
pub fn optimize_alpha_traced(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    sigma2: f64,
    grid_step: f64,
    stats: &mut SolveStats,
) -> Result<BsPowerSolution> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidInput(format!(
            "grid_step must lie in (0, 0.5], got {grid_step}"
        )));
    }
    let common = solve_common_only(ch, rates, sigma2)?;
    stats.record(&common);
    let zf = match solve_zf_only(ch, rates, sigma2) {
        Ok(s) => s,
        Err(Error::CollinearChannels { .. }) => {
            // no private streams possible: only α = (0, 0) remains
            return Ok(BsPowerSolution {
                scheme: Scheme::Wew,
                ..common
            });
        }
        Err(e) => return Err(e),
    };

    // The two pure schemes are exact solutions of the corner problems and
    // seed the incumbent.
    let mut best = if common.better_than(&zf) { common } else { zf };
    best.scheme = Scheme::Wew;
    let consider = |cand: BsPowerSolution, best: &mut BsPowerSolution| {
        if cand.status == SolveStatus::Optimal && cand.better_than(best) {
            *best = cand;
        }
    };

    let grid = alpha_grid(grid_step);
    for &a1 in &grid {
        for &a2 in &grid {
            let alpha = SplitFactors::new(a1, a2)?;
            let cand = solve_fixed_alpha(ch, rates, alpha, sigma2)?;
            stats.record(&cand);
            consider(cand, &mut best);
        }
    }

    // One coordinate pass of golden-section search around the incumbent.
    for coord in 0..2 {
        let center = best.alpha.as_array();
        let lo = (center[coord] - grid_step).max(0.0);
        let hi = (center[coord] + grid_step).min(1.0);
        let mut evaluated: Vec<BsPowerSolution> = Vec::new();
        let mut failure = None;
        golden_section(lo, hi, REFINE_TOL, |a| {
            let mut alpha = center;
            alpha[coord] = a;
            let alpha = SplitFactors {
                alpha1: alpha[0],
                alpha2: alpha[1],
            };
            match solve_fixed_alpha(ch, rates, alpha, sigma2) {
                Ok(s) if s.status == SolveStatus::Optimal => {
                    stats.record(&s);
                    let v = s.total_power;
                    evaluated.push(s);
                    v
                }
                Ok(s) => {
                    stats.record(&s);
                    f64::INFINITY
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        for cand in evaluated {
            consider(cand, &mut best);
        }
    }
    Ok(best)
}

/// Split factors drawn uniformly and independently from `[0, 1]`.
pub fn solve_random_alpha<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    sigma2: f64,
    rng: &mut R,
) -> Result<BsPowerSolution> {
    let alpha = SplitFactors::new(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0))?;
    let mut sol = solve_fixed_alpha(ch, rates, alpha, sigma2)?;
    sol.scheme = Scheme::RandomSplit;
    Ok(sol)
}

/// Gaussian randomization: draws `v ~ CN(0, W)`, scales each draw minimally
/// so that `|hᵢᴴv|² ≥ reqᵢ` for every `(hᵢ, reqᵢ)`, and keeps the cheapest.
/// The principal eigenvector is always the first candidate.
pub fn extract_rank1<R: Rng + ?Sized>(
    w: &CMat,
    constraints: &[(CVec, f64)],
    n_samples: usize,
    rng: &mut R,
) -> RankOneBeam {
    let dim = w.dim();
    let (vals, vecs) = w.hermitian_eigen();
    let scale_to_feasible = |v: CVec| -> RankOneBeam {
        let mut t: f64 = 0.0;
        for (h, req) in constraints {
            if *req <= 0.0 {
                continue;
            }
            let g = h.dot(&v).norm_sqr();
            t = t.max(if g > 0.0 { req / g } else { f64::INFINITY });
        }
        if !t.is_finite() {
            return RankOneBeam {
                beam: v,
                power: f64::INFINITY,
            };
        }
        let beam = v.scale_real(t.sqrt());
        let power = beam.norm_sqr();
        RankOneBeam { beam, power }
    };

    let mut best = scale_to_feasible(vecs[0].scale_real(vals[0].max(0.0).sqrt()));
    for _ in 0..n_samples {
        let xi = complex_gaussian(rng, dim);
        let mut v = CVec::zeros(dim);
        for (k, (l, u)) in vals.iter().zip(&vecs).enumerate() {
            let c = u.scale(xi[k] * l.max(0.0).sqrt());
            v = CVec::new(
                v.entries()
                    .iter()
                    .zip(c.entries())
                    .map(|(a, b)| a + b)
                    .collect(),
            );
        }
        let cand = scale_to_feasible(v);
        if cand.power < best.power {
            best = cand;
        }
    }
    best.beam = best.beam.with_canonical_phase();
    best
}
