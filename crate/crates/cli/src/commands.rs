use serde_json::json;
use wew_core::bs_power::{optimize_alpha, solve_fixed_alpha, BsPowerSolution, SolveStats};
use wew_core::channel::{sample_rayleigh, substream, write_channels_csv, Stream};
use wew_core::experiment::{gnuplot_script, run_sweep, solve_scheme, to_db, write_csv};
use wew_core::netcode::{exhaustive_round_trip, simulate_two_phase, Payloads};
use wew_core::rate_model::{RateRequirements, SplitFactors};
use wew_core::sbs_power::solve_eta;
use wew_core::sdp::SolveStatus;

use crate::config::CliConfig;
use crate::{io_failure, CliError, Output};

fn core_error(context: &str, e: wew_core::Error) -> CliError {
    match e {
        wew_core::Error::InvalidInput(m) => CliError::Usage(format!("{context}: {m}")),
        other => CliError::Failure(format!("{context}: {other}")),
    }
}

pub fn gen_channels(cfg: &CliConfig, out: &mut Output) -> Result<(), CliError> {
    let scenario = &cfg.experiment.scenario;
    let draws: Vec<_> = (0..scenario.n_realizations as u64)
        .map(|id| sample_rayleigh(id, scenario))
        .collect();
    write_channels_csv(out.writer(), &draws).map_err(io_failure)?;
    log::info!("wrote {} channel draws", draws.len());
    Ok(())
}

fn bs_record(s: &BsPowerSolution, seed_id: u64, sigma2: f64) -> serde_json::Value {
    let mut rec = s.debug_record(seed_id);
    rec["total_db"] = json!(to_db(s.total_power, sigma2).ok());
    rec["common_beam_power"] = json!(s.common_beam.as_ref().map(|b| b.power));
    rec
}

pub fn solve_bs(cfg: &CliConfig, out: &mut Output) -> Result<(), CliError> {
    let scenario = &cfg.experiment.scenario;
    let inst = &cfg.instance;
    let rates = RateRequirements::from_scenario(scenario);
    let ch = sample_rayleigh(inst.seed_id, scenario);

    let results: Vec<(String, Result<BsPowerSolution, wew_core::Error>)> = match (
        inst.alpha1,
        inst.alpha2,
    ) {
        (Some(a1), Some(a2)) => {
            let alpha = SplitFactors::new(a1, a2).map_err(|e| core_error("split factors", e))?;
            vec![(
                format!("alpha=({a1}, {a2})"),
                solve_fixed_alpha(&ch, &rates, alpha, scenario.sigma2),
            )]
        }
        (None, None) => cfg
            .experiment
            .schemes
            .iter()
            .map(|&scheme| {
                let mut stats = SolveStats::default();
                let r = solve_scheme(
                    scheme,
                    &ch,
                    &rates,
                    scenario,
                    cfg.experiment.grid_step,
                    &mut stats,
                );
                (scheme.to_string(), r)
            })
            .collect(),
        _ => return Err(CliError::Usage(
            "set both alpha1 and alpha2 to fix the split, or neither to run the configured schemes"
                .into(),
        )),
    };

    let mut failures = Vec::new();
    for (label, result) in results {
        match result {
            Ok(s) => {
                out.line(&bs_record(&s, inst.seed_id, scenario.sigma2).to_string())?;
                if s.status != SolveStatus::Optimal {
                    failures.push(format!(
                        "{label}: solver stopped with status {:?}",
                        s.status
                    ));
                }
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(failures.join("; ")))
    }
}

pub fn solve_sbs(cfg: &CliConfig, out: &mut Output) -> Result<(), CliError> {
    let scenario = &cfg.experiment.scenario;
    let seed_id = cfg.instance.seed_id;
    let rates = RateRequirements::from_scenario(scenario);
    let ch = sample_rayleigh(seed_id, scenario).with_power_gain(cfg.experiment.sbs_channel_gain);
    let p_s = scenario.sbs_power();
    let s =
        solve_eta(&ch, &rates, p_s, scenario.sigma2).map_err(|e| core_error("SBS problem", e))?;
    let rec = json!({
        "seed_id": seed_id,
        "p_s": p_s,
        "eta1": s.eta1,
        "eta2": s.eta2,
        "eta_sum": s.eta_sum(),
        "extra_power": s.extra_power,
        "active_constraints": s.active_constraints,
        "status": s.status,
    });
    out.line(&rec.to_string())?;
    if s.status == SolveStatus::Optimal {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "SBS problem stopped with status {:?}",
            s.status
        )))
    }
}

pub fn run_experiment(cfg: &CliConfig, out: &mut Output) -> Result<(), CliError> {
    let rows = run_sweep(&cfg.experiment).map_err(|e| core_error("sweep", e))?;
    write_csv(out.writer(), &rows).map_err(io_failure)?;
    if let Some(path) = out.path() {
        let script = path.with_extension("gp");
        let csv_name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        std::fs::write(&script, gnuplot_script(&csv_name, &cfg.experiment.schemes))
            .map_err(io_failure)?;
        log::info!("plot script written to {}", script.display());
    }
    let failed: usize = rows.iter().map(|r| r.n_failed).sum();
    if failed > 0 {
        log::warn!("{failed} scheme solves failed and were excluded from the means");
    }
    Ok(())
}

pub fn verify_protocol(
    cfg: &CliConfig,
    max_bits: usize,
    instances: u64,
    out: &mut Output,
) -> Result<(), CliError> {
    let scenario = &cfg.experiment.scenario;
    let check = exhaustive_round_trip(max_bits);
    let mut summary = serde_json::to_value(check).expect("serializes");
    summary["check"] = json!("xor_exhaustive");
    out.line(&summary.to_string())?;
    log::info!(
        "XOR round trips up to {max_bits} bits: {} pairs, {} errors",
        check.pairs,
        check.errors
    );

    let rates = RateRequirements::from_scenario(scenario);
    let p_s = scenario.sbs_power();
    let mut problems = Vec::new();
    if check.errors > 0 {
        problems.push(format!("{} XOR round trips failed", check.errors));
    }
    for seed_id in 0..instances {
        let ch = sample_rayleigh(seed_id, scenario);
        let bs = optimize_alpha(&ch, &rates, scenario.sigma2, cfg.experiment.grid_step)
            .map_err(|e| core_error(&format!("seed {seed_id}, BS problem"), e))?;
        let eta = solve_eta(&ch, &rates, p_s, scenario.sigma2)
            .map_err(|e| core_error(&format!("seed {seed_id}, SBS problem"), e))?;
        let mut rng = substream(scenario.master_seed, seed_id, Stream::Payload);
        let payloads = Payloads::random(&rates, &mut rng);
        let report = simulate_two_phase(&ch, &rates, &bs, &eta, &payloads, scenario.sigma2, p_s)
            .map_err(|e| core_error(&format!("seed {seed_id}, protocol"), e))?;
        out.line(&report.to_json_line())?;
        if !report.consistent || (report.all_delivered() && !report.wired_equivalent()) {
            problems.push(format!(
                "seed {seed_id}: delivery disagrees with feasibility"
            ));
        } else if !report.all_delivered() {
            problems.push(format!(
                "seed {seed_id}: optimizers reported an infeasible instance"
            ));
        }
    }
    log::info!("{instances} end-to-end runs, {} problems", problems.len());
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(problems.join("; ")))
    }
}
