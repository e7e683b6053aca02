//! Scenario configuration and seeded Rayleigh channel draws.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVec;

/// Largest accepted rate in bit/s/Hz; beyond it the SNR thresholds
/// `2^r − 1` lose all precision long before they overflow.
pub const MAX_RATE: f64 = 100.0;

/// Which target rate fixes the MS–SBS SNR that enters the phase-1 decoding
/// constraints as interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaSource {
    #[default]
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Half the BS antenna count.
    pub m: usize,
    /// Noise power; all reported powers are relative to it.
    pub sigma2: f64,
    pub r_u1: f64,
    pub r_u2: f64,
    pub r_d1: f64,
    pub r_d2: f64,
    /// SBS transmit power of the wired reference. `None` derives it from the
    /// downlink rates with a unit MS–SBS gain.
    pub p_s: Option<f64>,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub gamma_source: GammaSource,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m: 1,
            sigma2: 1.0,
            r_u1: 1.0,
            r_u2: 1.0,
            r_d1: 4.0,
            r_d2: 4.0,
            p_s: None,
            n_realizations: 1000,
            master_seed: 2015,
            gamma_source: GammaSource::Uplink,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        for (name, r) in [
            ("r_u1", self.r_u1),
            ("r_u2", self.r_u2),
            ("r_d1", self.r_d1),
            ("r_d2", self.r_d2),
        ] {
            if !(0.0..=MAX_RATE).contains(&r) {
                return bad(format!("{name} must lie in [0, {MAX_RATE}], got {r}"));
            }
        }
        if self.r_u1 > self.r_d1 || self.r_u2 > self.r_d2 {
            return bad("uplink rates must not exceed downlink rates".into());
        }
        if let Some(p) = self.p_s {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("p_s must be positive, got {p}"));
            }
        }
        if self.n_realizations == 0 {
            return bad("n_realizations must be positive".into());
        }
        Ok(())
    }

    pub fn antennas(&self) -> usize {
        2 * self.m
    }

    /// SBS power of the wired reference.
    pub fn sbs_power(&self) -> f64 {
        self.p_s.unwrap_or_else(|| {
            let (_, _, gs1, gs2) = derive_link_snrs(self);
            let p = self.sigma2 * gs1.max(gs2);
            if p > 0.0 {
                p
            } else {
                self.sigma2
            }
        })
    }

    pub fn with_downlink_rate(&self, r_d: f64) -> Self {
        Self {
            r_d1: r_d,
            r_d2: r_d,
            ..self.clone()
        }
    }
}

/// One scenario draw. The same draw serves both phases (reciprocal channels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h1: CVec,
    pub h2: CVec,
    pub gamma_m1: f64,
    pub gamma_m2: f64,
    pub seed_id: u64,
}

impl ChannelRealization {
    /// Builds a realization from explicit channels, deriving the MS–SBS SNRs
    /// from the configuration.
    pub fn from_channels(h1: CVec, h2: CVec, config: &ScenarioConfig) -> Self {
        let (gamma_m1, gamma_m2, _, _) = derive_link_snrs(config);
        Self {
            h1,
            h2,
            gamma_m1,
            gamma_m2,
            seed_id: 0,
        }
    }

    pub fn gamma_m(&self) -> [f64; 2] {
        [self.gamma_m1, self.gamma_m2]
    }

    pub fn channels(&self) -> [&CVec; 2] {
        [&self.h1, &self.h2]
    }

    /// Copy with both BS–SBS channels scaled by `sqrt(power_gain)`.
    pub fn with_power_gain(&self, power_gain: f64) -> Self {
        let s = power_gain.sqrt();
        Self {
            h1: self.h1.scale_real(s),
            h2: self.h2.scale_real(s),
            ..self.clone()
        }
    }
}

/// Stream tags keep independent random quantities of one realization on
/// separate generators.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Channel = 1,
    SplitFactors = 2,
    Randomization = 3,
    Payload = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-realization generator, a pure function of `(master_seed, seed_id,
/// stream)`.
pub fn substream(master_seed: u64, seed_id: u64, stream: Stream) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(master_seed) ^ seed_id) ^ stream as u64);
    ChaCha8Rng::seed_from_u64(key)
}

/// One standard normal pair by Box–Muller.
fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // u1 in (0, 1] keeps the logarithm finite
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

/// Draws a vector of i.i.d. CN(0, 1) coefficients.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVec {
    let s = 0.5f64.sqrt();
    CVec::new(
        (0..dim)
            .map(|_| {
                let (a, b) = box_muller(rng);
                Complex64::new(a * s, b * s)
            })
            .collect(),
    )
}

pub fn sample_rayleigh(seed_id: u64, config: &ScenarioConfig) -> ChannelRealization {
    let mut rng = substream(config.master_seed, seed_id, Stream::Channel);
    let dim = config.antennas();
    let h1 = complex_gaussian(&mut rng, dim);
    let h2 = complex_gaussian(&mut rng, dim);
    let (gamma_m1, gamma_m2, _, _) = derive_link_snrs(config);
    ChannelRealization {
        h1,
        h2,
        gamma_m1,
        gamma_m2,
        seed_id,
    }
}

/// SNRs implied by the wired reference rates: `(γ_M1, γ_M2, γ_S1, γ_S2)`.
pub fn derive_link_snrs(config: &ScenarioConfig) -> (f64, f64, f64, f64) {
    let snr = |r: f64| r.exp2() - 1.0;
    let (gm1, gm2) = match config.gamma_source {
        GammaSource::Uplink => (snr(config.r_u1), snr(config.r_u2)),
        GammaSource::Downlink => (snr(config.r_d1), snr(config.r_d2)),
    };
    (gm1, gm2, snr(config.r_d1), snr(config.r_d2))
}

/// Writes CSV rows `seed_id, Re/Im of every coefficient of h1 then h2,
/// gammaM1, gammaM2` with a header line.
pub fn write_channels_csv<W: Write>(
    mut out: W,
    realizations: &[ChannelRealization],
) -> std::io::Result<()> {
    let Some(first) = realizations.first() else {
        return Ok(());
    };
    let dim = first.h1.dim();
    let mut header = vec!["seed_id".to_string()];
    for name in ["h1", "h2"] {
        for k in 0..dim {
            header.push(format!("{name}_{k}_re"));
            header.push(format!("{name}_{k}_im"));
        }
    }
    header.push("gamma_m1".into());
    header.push("gamma_m2".into());
    writeln!(out, "{}", header.join(","))?;
    for r in realizations {
        let mut fields = vec![r.seed_id.to_string()];
        for h in r.channels() {
            for z in h.entries() {
                fields.push(format!("{:e}", z.re));
                fields.push(format!("{:e}", z.im));
            }
        }
        fields.push(format!("{:e}", r.gamma_m1));
        fields.push(format!("{:e}", r.gamma_m2));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
