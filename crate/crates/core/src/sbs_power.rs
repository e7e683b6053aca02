//! Phase-2 SBS power scaling.
//!
//! Each SBS transmits with `ηᵢ P_Sᵢ`, and the BS must decode both XOR
//! broadcasts over a two-sender SIMO MAC:
//!
//! ```txt
//!     min  η₁P_S₁ + η₂P_S₂
//!     s.t. R_Dᵢ      ≤ log₂(1 + ηᵢP_Sᵢ‖hᵢ‖²/σ²)
//!          R_D₁+R_D₂ ≤ log₂|I + (η₁P_S₁H₁ + η₂P_S₂H₂)/σ²|
//!          ηᵢ ≥ 1
//! ```
//!
//! With `cᵢ = ηᵢP_Sᵢ/σ²` the determinant is
//! `(1 + c₁‖h₁‖²)(1 + c₂‖h₂‖²) − c₁c₂|h₁ᴴh₂|²` in every dimension, which is
//! affine in each `cᵢ` separately. The boundary `c₂(c₁)` of the sum-rate
//! constraint is therefore explicit, and `c₁ + c₂(c₁)` is convex with a
//! closed-form stationary point.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{logdet2_psd, CMat};
use crate::rate_model::{snr_for_rate, RateRequirements};
use crate::sdp::SolveStatus;

/// Largest admissible power scaling.
pub const ETA_MAX: f64 = 1e6;
/// Relative slack below which a constraint counts as active.
const ACTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EtaConstraint {
    Rate1,
    Rate2,
    SumRate,
    Floor1,
    Floor2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSolution {
    pub eta1: f64,
    pub eta2: f64,
    /// Power above the wired reference, `Σ (ηᵢ − 1) P_Sᵢ`.
    pub extra_power: f64,
    pub active_constraints: Vec<EtaConstraint>,
    pub status: SolveStatus,
}

impl EtaSolution {
    pub fn eta_sum(&self) -> f64 {
        self.eta1 + self.eta2
    }
}

/// Smallest admissible `ηᵢ` from each single-user rate constraint and the
/// floor at one.
pub fn individual_eta_bounds(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    p_s: f64,
    sigma2: f64,
) -> Result<[f64; 2]> {
    eta_bounds(ch, rates, [p_s; 2], sigma2)
}

fn eta_bounds(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    p_s: [f64; 2],
    sigma2: f64,
) -> Result<[f64; 2]> {
    let mut out = [1.0; 2];
    for (i, h) in ch.channels().into_iter().enumerate() {
        if h.is_zero() {
            return Err(Error::ZeroVector);
        }
        let need = sigma2 * snr_for_rate(rates.r_d[i]) / (p_s[i] * h.norm_sqr());
        out[i] = need.max(1.0);
    }
    Ok(out)
}

/// `(‖h₁‖², ‖h₂‖², ‖h₁‖²‖h₂‖² − |h₁ᴴh₂|²)`.
fn gram(ch: &ChannelRealization) -> (f64, f64, f64) {
    let n1 = ch.h1.norm_sqr();
    let n2 = ch.h2.norm_sqr();
    let x = ch.h1.dot(&ch.h2).norm_sqr();
    (n1, n2, (n1 * n2 - x).max(0.0))
}

/// Sum rate through the rank-two determinant identity.
pub fn sumrate_closed_form(
    eta1: f64,
    eta2: f64,
    ch: &ChannelRealization,
    p_s: f64,
    sigma2: f64,
) -> f64 {
    let c1 = eta1 * p_s / sigma2;
    let c2 = eta2 * p_s / sigma2;
    let n1 = ch.h1.norm_sqr();
    let n2 = ch.h2.norm_sqr();
    let x = ch.h1.dot(&ch.h2).norm_sqr();
    ((1.0 + c1 * n1) * (1.0 + c2 * n2) - c1 * c2 * x).log2()
}

/// Sum rate through a Cholesky log-determinant of the full matrix.
pub fn sumrate_logdet(
    eta1: f64,
    eta2: f64,
    ch: &ChannelRealization,
    p_s: f64,
    sigma2: f64,
) -> Result<f64> {
    let dim = ch.h1.dim();
    let m = &(&CMat::identity(dim) + &ch.h1.outer().scale_real(eta1 * p_s / sigma2))
        + &ch.h2.outer().scale_real(eta2 * p_s / sigma2);
    logdet2_psd(&m)
}

pub fn sumrate_value(eta1: f64, eta2: f64, ch: &ChannelRealization, p_s: f64, sigma2: f64) -> f64 {
    if ch.h1.dim() == 2 {
        sumrate_closed_form(eta1, eta2, ch, p_s, sigma2)
    } else {
        sumrate_logdet(eta1, eta2, ch, p_s, sigma2)
            .unwrap_or_else(|_| sumrate_closed_form(eta1, eta2, ch, p_s, sigma2))
    }
}

/// Minimizes η₁ + η₂ with both SBSs at power `p_s`.
pub fn solve_eta(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    p_s: f64,
    sigma2: f64,
) -> Result<EtaSolution> {
    solve_eta_weighted(ch, rates, [p_s, p_s], sigma2)
}

/// Minimizes `η₁P_S₁ + η₂P_S₂`.
pub fn solve_eta_weighted(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    p_s: [f64; 2],
    sigma2: f64,
) -> Result<EtaSolution> {
    if !(p_s.iter().all(|p| *p > 0.0 && p.is_finite()) && sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "SBS powers {p_s:?} and noise {sigma2} must be positive"
        )));
    }
    let a = eta_bounds(ch, rates, p_s, sigma2)?;
    let (n1, n2, d) = gram(ch);
    // work with cᵢ = ηᵢP_Sᵢ/σ², where the objective is c₁ + c₂ up to σ²
    let to_c = |i: usize, eta: f64| eta * p_s[i] / sigma2;
    let to_eta = |i: usize, c: f64| c * sigma2 / p_s[i];
    let l = [to_c(0, a[0]), to_c(1, a[1])];
    let target = snr_for_rate(rates.r_d[0] + rates.r_d[1]) + 1.0;
    let det = |c1: f64, c2: f64| (1.0 + c1 * n1) * (1.0 + c2 * n2) - c1 * c2 * (n1 * n2 - d);

    let (c1, c2) = if det(l[0], l[1]) >= target {
        (l[0], l[1])
    } else {
        // boundary: det(c₁, c₂) = 1 + c₁n₁ + c₂(n₂ + c₁d) = T
        let c2_of = |c1: f64| ((target - 1.0 - c1 * n1) / (n2 + c1 * d)).max(l[1]);
        let c1_hi = (target - 1.0 - l[1] * n2) / (n1 + l[1] * d);
        let k = n1 * n2 + d * (target - 1.0);
        let c1_star = if d > 1e-14 * n1 * n2 {
            // root of 1 − k/(n₂ + c₁d)² = 0, written without cancellation
            (n2 * (n1 - n2) + d * (target - 1.0)) / (d * (k.sqrt() + n2))
        } else if (n1 - n2).abs() <= 1e-12 * n1.max(n2) {
            // c₁ + c₂ is flat along the boundary: pick η₁ = η₂
            let s = (target - 1.0) / n1;
            s * p_s[0] / (p_s[0] + p_s[1])
        } else if n1 > n2 {
            c1_hi
        } else {
            l[0]
        };
        let c1 = c1_star.clamp(l[0], c1_hi.max(l[0]));
        let mut c2 = c2_of(c1);
        // guard against rounding on the boundary
        while det(c1, c2) < target {
            c2 = c2 * (1.0 + f64::EPSILON) + f64::MIN_POSITIVE;
        }
        (c1, c2)
    };

    let eta1 = to_eta(0, c1).max(a[0]);
    let eta2 = to_eta(1, c2).max(a[1]);
    if !(eta1 <= ETA_MAX && eta2 <= ETA_MAX) {
        return Err(Error::SolverFailure(format!(
            "power scaling ({eta1}, {eta2}) exceeds {ETA_MAX}"
        )));
    }

    let mut active = Vec::new();
    let slack = |have: f64, need: f64| have - need <= ACTIVE_TOL * need.abs().max(1.0);
    let single = |i: usize, eta: f64| (1.0 + to_c(i, eta) * [n1, n2][i]).log2();
    if rates.r_d[0] > 0.0 && slack(single(0, eta1), rates.r_d[0]) {
        active.push(EtaConstraint::Rate1);
    }
    if rates.r_d[1] > 0.0 && slack(single(1, eta2), rates.r_d[1]) {
        active.push(EtaConstraint::Rate2);
    }
    if slack(
        det(to_c(0, eta1), to_c(1, eta2)).log2(),
        rates.r_d[0] + rates.r_d[1],
    ) {
        active.push(EtaConstraint::SumRate);
    }
    if eta1 == 1.0 {
        active.push(EtaConstraint::Floor1);
    }
    if eta2 == 1.0 {
        active.push(EtaConstraint::Floor2);
    }

    Ok(EtaSolution {
        eta1,
        eta2,
        extra_power: p_s[0] * (eta1 - 1.0) + p_s[1] * (eta2 - 1.0),
        active_constraints: active,
        status: SolveStatus::Optimal,
    })
}

/// Checks every phase-2 constraint with rate slack `tol`.
pub fn eta_feasible(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    eta: [f64; 2],
    p_s: f64,
    sigma2: f64,
    tol: f64,
) -> bool {
    let single = |i: usize| (1.0 + eta[i] * p_s * ch.channels()[i].norm_sqr() / sigma2).log2();
    eta[0] >= 1.0
        && eta[1] >= 1.0
        && single(0) >= rates.r_d[0] - tol
        && single(1) >= rates.r_d[1] - tol
        && sumrate_value(eta[0], eta[1], ch, p_s, sigma2) >= rates.r_d[0] + rates.r_d[1] - tol
}
