//! Rate and SNR algebra of the two-SBS backhaul.
//!
//! At SBS `i` the BS private stream, the concatenated common stream and the
//! MS uplink arrive together. The BS streams are decoded first with the
//! uplink treated as noise, which is where every `(1 + γ_Mi)` factor comes
//! from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility slack on rate constraints, in bits.
pub const EPS_RATE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRequirements {
    pub r_u: [f64; 2],
    pub r_d: [f64; 2],
}

impl RateRequirements {
    pub fn new(r_u: [f64; 2], r_d: [f64; 2]) -> Result<Self> {
        let rates = Self { r_u, r_d };
        rates.validate()?;
        Ok(rates)
    }

    /// Symmetric requirements: both MSs share the uplink and downlink rate.
    pub fn symmetric(r_u: f64, r_d: f64) -> Result<Self> {
        Self::new([r_u; 2], [r_d; 2])
    }

    pub fn validate(&self) -> Result<()> {
        for r in self.r_u.iter().chain(&self.r_d) {
            if !(*r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "rate {r} is not a finite nonnegative value"
                )));
            }
        }
        if self.r_u[0] > self.r_d[0] || self.r_u[1] > self.r_d[1] {
            return Err(Error::InvalidInput(
                "uplink rate exceeds downlink rate".into(),
            ));
        }
        Ok(())
    }

    pub fn from_scenario(cfg: &crate::channel::ScenarioConfig) -> Self {
        Self {
            r_u: [cfg.r_u1, cfg.r_u2],
            r_d: [cfg.r_d1, cfg.r_d2],
        }
    }
}

/// Fraction of each downlink message sent on the private ZF stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFactors {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl SplitFactors {
    pub const ALL_PRIVATE: SplitFactors = SplitFactors {
        alpha1: 1.0,
        alpha2: 1.0,
    };
    pub const ALL_COMMON: SplitFactors = SplitFactors {
        alpha1: 0.0,
        alpha2: 0.0,
    };

    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha1) || !(0.0..=1.0).contains(&alpha2) {
            return Err(Error::InvalidInput(format!(
                "split factors must lie in [0, 1], got ({alpha1}, {alpha2})"
            )));
        }
        Ok(Self { alpha1, alpha2 })
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.alpha1, self.alpha2]
    }

    pub fn has_private_part(&self) -> bool {
        self.alpha1 > 0.0 || self.alpha2 > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRates {
    pub r_p: [f64; 2],
    pub r_c: [f64; 2],
}

impl SplitRates {
    /// Common-stream rate decoded at every SBS: `R_C1 + R_C2`.
    pub fn common_total(&self) -> f64 {
        self.r_c[0] + self.r_c[1]
    }
}

pub fn split_rates(alpha: SplitFactors, rates: &RateRequirements) -> SplitRates {
    let a = alpha.as_array();
    let mut out = SplitRates {
        r_p: [0.0; 2],
        r_c: [0.0; 2],
    };
    for i in 0..2 {
        let r_d = rates.r_d[i];
        // The larger part is at least r_d/2, so subtracting it from r_d is
        // exact and the two parts sum back to r_d bit for bit.
        if a[i] >= 0.5 {
            out.r_p[i] = a[i] * r_d;
            out.r_c[i] = r_d - out.r_p[i];
        } else {
            out.r_c[i] = (1.0 - a[i]) * r_d;
            out.r_p[i] = r_d - out.r_c[i];
        }
    }
    out
}

/// Linear SNR thresholds (scaled by σ²) equivalent to the three MAC
/// constraints at each SBS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCoefficients {
    /// Private-stream threshold.
    pub beta1: [f64; 2],
    /// Common-stream threshold.
    pub beta2: [f64; 2],
    /// Sum-rate threshold.
    pub beta3: [f64; 2],
}

/// `2^r − 1` without cancellation for small `r`.
pub fn snr_for_rate(r: f64) -> f64 {
    if r < 0.5 {
        (r * std::f64::consts::LN_2).exp_m1()
    } else {
        r.exp2() - 1.0
    }
}

pub fn rate_for_snr(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

pub fn beta_coefficients(
    rates: &RateRequirements,
    alpha: SplitFactors,
    gamma_m: [f64; 2],
    sigma2: f64,
) -> BetaCoefficients {
    let split = split_rates(alpha, rates);
    let rc = split.common_total();
    let mut out = BetaCoefficients {
        beta1: [0.0; 2],
        beta2: [0.0; 2],
        beta3: [0.0; 2],
    };
    for i in 0..2 {
        let scale = sigma2 * (1.0 + gamma_m[i]);
        out.beta1[i] = scale * snr_for_rate(split.r_p[i]);
        out.beta2[i] = scale * snr_for_rate(rc);
        out.beta3[i] = scale * snr_for_rate(split.r_p[i] + rc);
    }
    out
}

/// Whether each SBS can decode its private stream and the common stream
/// while treating its MS uplink as noise.
pub fn mac_feasible(
    gamma_p: [f64; 2],
    gamma_c: [f64; 2],
    gamma_m: [f64; 2],
    rates: &RateRequirements,
    alpha: SplitFactors,
) -> [bool; 2] {
    let split = split_rates(alpha, rates);
    let rc = split.common_total();
    let mut out = [false; 2];
    for i in 0..2 {
        let noise = 1.0 + gamma_m[i];
        let private_ok = split.r_p[i] <= rate_for_snr(gamma_p[i] / noise) + EPS_RATE;
        let common_ok = rc <= rate_for_snr(gamma_c[i] / noise) + EPS_RATE;
        let sum_ok =
            split.r_p[i] + rc <= rate_for_snr((gamma_p[i] + gamma_c[i]) / noise) + EPS_RATE;
        out[i] = private_ok && common_ok && sum_ok;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::zf_beamformers;
    use crate::channel::complex_gaussian;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rates(r_d: [f64; 2]) -> RateRequirements {
        RateRequirements::new([0.0; 2], r_d).unwrap()
    }

    #[test]
    fn split_examples() {
        let r = rates([2.0, 3.0]);
        let s = split_rates(SplitFactors::ALL_PRIVATE, &r);
        assert_eq!((s.r_p, s.r_c), ([2.0, 3.0], [0.0, 0.0]));
        let s = split_rates(SplitFactors::ALL_COMMON, &r);
        assert_eq!((s.r_p, s.r_c), ([0.0, 0.0], [2.0, 3.0]));
        let s = split_rates(SplitFactors::new(0.5, 0.5).unwrap(), &rates([2.0, 2.0]));
        assert_eq!((s.r_p, s.r_c), ([1.0, 1.0], [1.0, 1.0]));
    }

    proptest! {
        #[test]
        fn split_sums_to_downlink(a1 in 0.0..=1.0f64, a2 in 0.0..=1.0f64, r1 in 0.0..20.0f64, r2 in 0.0..20.0f64) {
            let r = rates([r1, r2]);
            let s = split_rates(SplitFactors::new(a1, a2).unwrap(), &r);
            prop_assert_eq!(s.r_p[0] + s.r_c[0], r1);
            prop_assert_eq!(s.r_p[1] + s.r_c[1], r2);
        }

        #[test]
        fn beta_monotone(a1 in 0.0..=1.0f64, a2 in 0.0..=1.0f64, r in 0.0..10.0f64, dr in 0.0..2.0f64, g in 0.0..10.0f64, dg in 0.0..5.0f64) {
            let alpha = SplitFactors::new(a1, a2).unwrap();
            let base = beta_coefficients(&rates([r, r]), alpha, [g, g], 1.0);
            let more_rate = beta_coefficients(&rates([r + dr, r]), alpha, [g, g], 1.0);
            let more_gamma = beta_coefficients(&rates([r, r]), alpha, [g + dg, g], 1.0);
            for i in 0..2 {
                prop_assert!(more_rate.beta1[i] >= base.beta1[i]);
                prop_assert!(more_rate.beta2[i] >= base.beta2[i]);
                prop_assert!(more_rate.beta3[i] >= base.beta3[i]);
                prop_assert!(more_gamma.beta1[i] >= base.beta1[i]);
                prop_assert!(more_gamma.beta2[i] >= base.beta2[i]);
                prop_assert!(more_gamma.beta3[i] >= base.beta3[i]);
                prop_assert!(base.beta3[i] >= base.beta1[i].max(base.beta2[i]));
            }
        }

        #[test]
        fn wired_rates_round_trip(r in 0.0..30.0f64) {
            prop_assert!((rate_for_snr(snr_for_rate(r)) - r).abs() <= 1e-12 * (1.0 + r));
        }
    }

    #[test]
    fn beta_examples() {
        let b = beta_coefficients(
            &rates([2.0, 2.0]),
            SplitFactors::new(0.5, 0.5).unwrap(),
            [1.0, 1.0],
            1.0,
        );
        assert_eq!(b.beta1, [2.0, 2.0]);
        assert_eq!(b.beta2, [6.0, 6.0]);
        assert_eq!(b.beta3, [14.0, 14.0]);

        let b = beta_coefficients(
            &rates([2.0, 2.0]),
            SplitFactors::ALL_PRIVATE,
            [1.0, 1.0],
            1.0,
        );
        assert_eq!(b.beta2, [0.0, 0.0]);
        assert_eq!(b.beta1, [6.0, 6.0]);
        assert_eq!(b.beta3, b.beta1);

        let b = beta_coefficients(
            &rates([2.0, 2.0]),
            SplitFactors::ALL_COMMON,
            [1.0, 1.0],
            1.0,
        );
        assert_eq!(b.beta1, [0.0, 0.0]);

        // no uplink interference: thresholds are the bare SNRs
        let b = beta_coefficients(
            &rates([1.0, 3.0]),
            SplitFactors::ALL_PRIVATE,
            [0.0, 0.0],
            1.0,
        );
        assert_eq!(b.beta1, [1.0, 7.0]);
    }

    #[test]
    fn mac_examples() {
        let r = RateRequirements::new([1.0, 1.0], [2.0, 2.0]).unwrap();
        let ok = mac_feasible(
            [6.0, 6.0],
            [0.0, 0.0],
            [1.0, 1.0],
            &r,
            SplitFactors::ALL_PRIVATE,
        );
        assert_eq!(ok, [true, true]);
        let ok = mac_feasible(
            [5.99, 6.0],
            [0.0, 0.0],
            [1.0, 1.0],
            &r,
            SplitFactors::ALL_PRIVATE,
        );
        assert_eq!(ok, [false, true]);

        let zero = rates([0.0, 0.0]);
        assert_eq!(
            mac_feasible(
                [0.0; 2],
                [0.0; 2],
                [0.0; 2],
                &zero,
                SplitFactors::ALL_PRIVATE
            ),
            [true, true]
        );
        assert_eq!(
            mac_feasible(
                [0.0; 2],
                [5.0; 2],
                [0.0; 2],
                &rates([1.0, 1.0]),
                SplitFactors::ALL_PRIVATE
            ),
            [false, false]
        );
    }

    #[test]
    fn rate_form_matches_beta_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sigma2 = 1.0;
        let mut disagreements = 0;
        let mut feasible = 0;
        for _ in 0..10_000 {
            let h1 = complex_gaussian(&mut rng, 2);
            let h2 = complex_gaussian(&mut rng, 2);
            let Ok(bf) = zf_beamformers(&h1, &h2) else {
                continue;
            };
            let r_d = [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)];
            let r_u = [rng.gen_range(0.0..=r_d[0]), rng.gen_range(0.0..=r_d[1])];
            let r = RateRequirements::new(r_u, r_d).unwrap();
            let alpha = SplitFactors::new(rng.gen(), rng.gen()).unwrap();
            let gm = [snr_for_rate(r_u[0]), snr_for_rate(r_u[1])];
            let p = [rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0)];
            let wc = complex_gaussian(&mut rng, 2).scale_real(rng.gen_range(0.0..12.0));

            let rx_p = [p[0] * bf.gain1, p[1] * bf.gain2];
            let rx_c = [h1.dot(&wc).norm_sqr(), h2.dot(&wc).norm_sqr()];
            let gp = rx_p.map(|v| v / sigma2);
            let gc = rx_c.map(|v| v / sigma2);
            let by_rate = mac_feasible(gp, gc, gm, &r, alpha);

            let b = beta_coefficients(&r, alpha, gm, sigma2);
            for i in 0..2 {
                let by_beta = b.beta1[i] <= rx_p[i]
                    && b.beta2[i] <= rx_c[i]
                    && b.beta3[i] <= rx_p[i] + rx_c[i];
                feasible += by_beta as usize;
                if by_beta != by_rate[i] {
                    // only admissible inside the ε_rate band around the boundary
                    assert!(!by_beta && by_rate[i]);
                    let split = split_rates(alpha, &r);
                    let rc = split.common_total();
                    let noise = 1.0 + gm[i];
                    let slack = [
                        rate_for_snr(gp[i] / noise) - split.r_p[i],
                        rate_for_snr(gc[i] / noise) - rc,
                        rate_for_snr((gp[i] + gc[i]) / noise) - split.r_p[i] - rc,
                    ];
                    assert!(slack.iter().all(|s| *s >= -EPS_RATE));
                    disagreements += 1;
                }
            }
        }
        assert!(feasible > 1000 && feasible < 19_000, "feasible {feasible}");
        assert!(disagreements < 5);
    }

    #[test]
    fn beta_snr_inversion_exact() {
        let r = rates([3.0, 3.0]);
        let b = beta_coefficients(&r, SplitFactors::ALL_PRIVATE, [0.0, 0.0], 2.0);
        assert_abs_diff_eq!(rate_for_snr(b.beta1[0] / 2.0), 3.0, epsilon = 1e-12);
    }
}
