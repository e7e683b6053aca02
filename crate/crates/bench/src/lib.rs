//! Shared fixtures for the solver benchmarks.

use wew_core::beamforming::zf_beamformers;
use wew_core::bs_power::build_problem;
use wew_core::channel::{sample_rayleigh, ChannelRealization, ScenarioConfig};
use wew_core::rate_model::{beta_coefficients, RateRequirements, SplitFactors};
use wew_core::sdp::ConicProblem;

/// Default scenario at downlink rate `r_d` with `m` antenna pairs.
pub fn scenario(m: usize, r_d: f64) -> ScenarioConfig {
    ScenarioConfig {
        m,
        ..Default::default()
    }
    .with_downlink_rate(r_d)
}

/// A fixed draw and its rate targets.
pub fn instance(
    m: usize,
    r_d: f64,
    seed_id: u64,
) -> (ChannelRealization, RateRequirements, ScenarioConfig) {
    let cfg = scenario(m, r_d);
    (
        sample_rayleigh(seed_id, &cfg),
        RateRequirements::from_scenario(&cfg),
        cfg,
    )
}

/// The relaxed BS program at a mixed split, the common case inside the
/// split-factor search.
pub fn bs_problem(m: usize, r_d: f64, seed_id: u64) -> ConicProblem {
    let (ch, rates, cfg) = instance(m, r_d, seed_id);
    let alpha = SplitFactors::new(0.5, 0.5).expect("valid split");
    let gains = zf_beamformers(&ch.h1, &ch.h2)
        .expect("generic draw")
        .gains();
    let betas = beta_coefficients(&rates, alpha, ch.gamma_m(), cfg.sigma2);
    build_problem(&ch, &betas, gains)
}
