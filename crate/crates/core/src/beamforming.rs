//! Zero-forcing beamformers for the two private streams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orth_projector, CVec};

/// Channels closer than this to collinear cannot be zero-forced.
pub const EPS_COLLINEAR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    pub w1: CVec,
    pub w2: CVec,
    /// `|h₁ᴴw₁|²`
    pub gain1: f64,
    /// `|h₂ᴴw₂|²`
    pub gain2: f64,
    /// `|h₁ᴴh₂|² / (‖h₁‖²‖h₂‖²)`
    pub collinearity: f64,
}

impl BeamformerSet {
    pub fn gains(&self) -> [f64; 2] {
        [self.gain1, self.gain2]
    }
}

pub fn collinearity(h1: &CVec, h2: &CVec) -> Result<f64> {
    if h1.is_zero() || h2.is_zero() {
        return Err(Error::ZeroVector);
    }
    let c = h1.dot(h2).norm_sqr() / (h1.norm_sqr() * h2.norm_sqr());
    Ok(c.clamp(0.0, 1.0))
}

/// Unit-norm ZF directions: `w_i ∝ (I − h_j(h_jᴴh_j)⁻¹h_jᴴ) h_i`, so that
/// stream `i` is nulled at SBS `j`.
pub fn zf_beamformers(h1: &CVec, h2: &CVec) -> Result<BeamformerSet> {
    let collinearity = collinearity(h1, h2)?;
    if 1.0 - collinearity <= EPS_COLLINEAR {
        return Err(Error::CollinearChannels { collinearity });
    }
    let w1 = orth_projector(h2)?
        .mul_vec(h1)
        .normalized()?
        .with_canonical_phase();
    let w2 = orth_projector(h1)?
        .mul_vec(h2)
        .normalized()?
        .with_canonical_phase();
    let mut set = BeamformerSet {
        w1,
        w2,
        gain1: 0.0,
        gain2: 0.0,
        collinearity,
    };
    let (g1, g2) = effective_gains(&set, h1, h2);
    set.gain1 = g1;
    set.gain2 = g2;
    Ok(set)
}

pub fn effective_gains(set: &BeamformerSet, h1: &CVec, h2: &CVec) -> (f64, f64) {
    (h1.dot(&set.w1).norm_sqr(), h2.dot(&set.w2).norm_sqr())
}
