//! Monte Carlo sweep over the downlink rate.
//!
//! Every scheme and every rate point sees the same channel draws
//! (`seed_id = 0..n`), so comparisons hold realization by realization.
//! Realizations are solved in parallel and reduced in seed order, which
//! keeps the output bit-identical for any thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bs_power::{
    optimize_alpha_traced, solve_common_only, solve_random_alpha, solve_zf_only, BsPowerSolution,
    Scheme, SolveStats,
};
use crate::channel::{sample_rayleigh, substream, ChannelRealization, ScenarioConfig, Stream};
use crate::error::{Error, Result};
use crate::rate_model::RateRequirements;
use crate::sbs_power::solve_eta;
use crate::sdp::SolveStatus;

/// Stand-in for the dB value of zero power.
pub const DB_FLOOR: f64 = -300.0;

pub const CSV_HEADER: &str =
    "R_D,scheme,mean_power_db,std_power_db,n_ok,n_failed,mean_eta_sum,mean_extra_power_db";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean in linear power, then dB.
    #[default]
    DbOfMean,
    /// Mean of per-realization dB values.
    MeanOfDb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    /// Downlink rates applied to both MSs.
    pub rd_sweep: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub grid_step: f64,
    pub include_sbs_problem: bool,
    pub averaging: Averaging,
    /// Power gain applied to the SBS–BS channels of phase 2 only.
    pub sbs_channel_gain: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            rd_sweep: (1..=10).map(f64::from).collect(),
            schemes: Scheme::ALL.to_vec(),
            grid_step: 0.1,
            include_sbs_problem: true,
            averaging: Averaging::DbOfMean,
            sbs_channel_gain: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        self.scenario.validate()?;
        if self.rd_sweep.is_empty() {
            return bad("rd_sweep must not be empty".into());
        }
        for &rd in &self.rd_sweep {
            self.scenario.with_downlink_rate(rd).validate()?;
        }
        if self.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
            return bad(format!(
                "grid_step must lie in (0, 0.5], got {}",
                self.grid_step
            ));
        }
        if !(self.sbs_channel_gain > 0.0 && self.sbs_channel_gain.is_finite()) {
            return bad(format!(
                "sbs_channel_gain must be positive, got {}",
                self.sbs_channel_gain
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub r_d: f64,
    pub scheme: Scheme,
    pub mean_power_db: f64,
    pub std_power_db: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_eta_sum: f64,
    pub mean_extra_power_db: f64,
    /// Linear means behind the dB columns, relative to σ².
    pub mean_power: f64,
    pub mean_extra_power: f64,
    pub solver: SolveStats,
}

/// Everything computed for one seed at one rate point.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutcome {
    pub seed_id: u64,
    /// One entry per configured scheme, `None` on failure.
    pub solutions: Vec<Option<BsPowerSolution>>,
    pub stats: Vec<SolveStats>,
    /// `(η₁ + η₂, extra power)` when the SBS problem is enabled and solved.
    pub sbs: Option<(f64, f64)>,
}

pub fn to_db(power_linear: f64, sigma2: f64) -> Result<f64> {
    if !(power_linear > 0.0) {
        return Err(Error::NonPositivePower(power_linear));
    }
    Ok(10.0 * (power_linear / sigma2).log10())
}

fn db_or_floor(power_linear: f64, sigma2: f64) -> f64 {
    to_db(power_linear, sigma2).unwrap_or(DB_FLOOR)
}

/// Solves one scheme on one draw. Conic solves are recorded in `stats`;
/// random split factors come from the draw's own substream.
pub fn solve_scheme(
    scheme: Scheme,
    ch: &ChannelRealization,
    rates: &RateRequirements,
    scenario: &ScenarioConfig,
    grid_step: f64,
    stats: &mut SolveStats,
) -> Result<BsPowerSolution> {
    let sigma2 = scenario.sigma2;
    match scheme {
        Scheme::Wew => optimize_alpha_traced(ch, rates, sigma2, grid_step, stats),
        Scheme::ZfOnly => solve_zf_only(ch, rates, sigma2),
        Scheme::CommonOnly => {
            let s = solve_common_only(ch, rates, sigma2)?;
            stats.record(&s);
            Ok(s)
        }
        Scheme::RandomSplit => {
            let mut rng = substream(scenario.master_seed, ch.seed_id, Stream::SplitFactors);
            let s = solve_random_alpha(ch, rates, sigma2, &mut rng)?;
            stats.record(&s);
            Ok(s)
        }
    }
}

/// Solves every configured scheme for one seed at downlink rate `r_d`.
pub fn evaluate_realization(
    config: &ExperimentConfig,
    r_d: f64,
    seed_id: u64,
) -> RealizationOutcome {
    let scenario = config.scenario.with_downlink_rate(r_d);
    let sigma2 = scenario.sigma2;
    let rates = RateRequirements::from_scenario(&scenario);
    let ch = sample_rayleigh(seed_id, &scenario);

    let mut solutions = Vec::with_capacity(config.schemes.len());
    let mut stats = Vec::with_capacity(config.schemes.len());
    for &scheme in &config.schemes {
        let mut st = SolveStats::default();
        let result = solve_scheme(scheme, &ch, &rates, &scenario, config.grid_step, &mut st);
        let sol = match result {
            Ok(s) => (s.status == SolveStatus::Optimal).then_some(s),
            Err(e) => {
                log::debug!("seed {seed_id}, R_D {r_d}, {scheme}: {e}");
                None
            }
        };
        solutions.push(sol);
        stats.push(st);
    }

    let sbs = if config.include_sbs_problem {
        let uplink = ch.with_power_gain(config.sbs_channel_gain);
        match solve_eta(&uplink, &rates, scenario.sbs_power(), sigma2) {
            Ok(e) => Some((e.eta_sum(), e.extra_power)),
            Err(e) => {
                log::debug!("seed {seed_id}, R_D {r_d}, SBS problem: {e}");
                None
            }
        }
    } else {
        None
    };

    RealizationOutcome {
        seed_id,
        solutions,
        stats,
        sbs,
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Reduces per-seed outcomes (in seed order) to one row per scheme.
pub fn aggregate(
    config: &ExperimentConfig,
    r_d: f64,
    outcomes: &[RealizationOutcome],
) -> Vec<ResultRow> {
    let sigma2 = config.scenario.sigma2;
    let sbs: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.sbs).collect();
    let eta_sums: Vec<f64> = sbs.iter().map(|s| s.0).collect();
    let extras: Vec<f64> = sbs.iter().map(|s| s.1).collect();
    let (mean_eta_sum, _) = mean_std(&eta_sums);
    let (mean_extra, _) = mean_std(&extras);
    let mean_extra_power_db = if extras.is_empty() {
        f64::NAN
    } else {
        db_or_floor(mean_extra, sigma2)
    };

    config
        .schemes
        .iter()
        .enumerate()
        .map(|(k, scheme)| {
            let powers: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.solutions[k].as_ref().map(|s| s.total_power))
                .collect();
            let mut solver = SolveStats::default();
            for o in outcomes {
                solver.merge(&o.stats[k]);
            }
            let (mean, std) = mean_std(&powers);
            let (mean_power_db, std_power_db) = if powers.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                match config.averaging {
                    Averaging::DbOfMean => {
                        let db = db_or_floor(mean, sigma2);
                        let spread = if mean > 0.0 {
                            db_or_floor(mean + std, sigma2) - db
                        } else {
                            0.0
                        };
                        (db, spread)
                    }
                    Averaging::MeanOfDb => {
                        let dbs: Vec<f64> =
                            powers.iter().map(|p| db_or_floor(*p, sigma2)).collect();
                        mean_std(&dbs)
                    }
                }
            };
            ResultRow {
                r_d,
                scheme: *scheme,
                mean_power_db,
                std_power_db,
                n_ok: powers.len(),
                n_failed: outcomes.len() - powers.len(),
                mean_eta_sum,
                mean_extra_power_db,
                mean_power: mean / sigma2,
                mean_extra_power: mean_extra / sigma2,
                solver,
            }
        })
        .collect()
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let n = config.scenario.n_realizations as u64;
    let mut rows = Vec::new();
    for &r_d in &config.rd_sweep {
        log::info!("R_D = {r_d}: solving {n} realizations");
        let outcomes: Vec<RealizationOutcome> = (0..n)
            .into_par_iter()
            .map(|id| evaluate_realization(config, r_d, id))
            .collect();
        rows.extend(aggregate(config, r_d, &outcomes));
    }
    Ok(rows)
}

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn write_csv<W: Write + ?Sized>(out: &mut W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.r_d,
            r.scheme,
            fmt_float(r.mean_power_db),
            fmt_float(r.std_power_db),
            r.n_ok,
            r.n_failed,
            fmt_float(r.mean_eta_sum),
            fmt_float(r.mean_extra_power_db),
        )?;
    }
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Gnuplot script drawing BS power per scheme and the SBS extra power
/// from the CSV at `csv_path`.
pub fn gnuplot_script(csv_path: &str, schemes: &[Scheme]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 1200,480\n");
    s.push_str("set output 'sweep.png'\n");
    s.push_str("set multiplot layout 1,2\n");
    s.push_str("set xlabel 'downlink rate R_D [bit/s/Hz]'\n");
    s.push_str("set ylabel 'BS transmit power [dB rel. noise]'\n");
    s.push_str("set grid\n");
    let curves: Vec<String> = schemes
        .iter()
        .map(|sc| {
            format!(
                "'{csv_path}' using 1:(strcol(2) eq '{sc}' ? $3 : NaN) with linespoints title '{sc}'"
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    s.push_str("set ylabel 'extra SBS power [dB rel. noise]'\n");
    let first = schemes.first().map(Scheme::name).unwrap_or("WEW");
    s.push_str(&format!(
        "plot '{csv_path}' using 1:(strcol(2) eq '{first}' ? $8 : NaN) with linespoints title 'extra SBS power'\n"
    ));
    s.push_str("unset multiplot\n");
    s
}
