//! `simulate`: draw one hidden chain path plus its observation series, filter
//! it back, and report how well the posterior tracks the true state.

use anyhow::{anyhow, Result};
use ctmc_hums_core::markov_chain::simulate_chain;
use ctmc_hums_core::observation::simulate_observation;
use ctmc_hums_core::zakai::ZakaiFilter;
use serde_json::json;

use crate::config::{filter_config, model_spec, scheme_name, Settings};
use crate::report::{matrix_json, OutputDir, Summary};

/// Observation RNG stream, decorrelated from the chain stream.
pub const OBSERVATION_SEED_SALT: u64 = 0x9e37_79b9;

/// Floor applied when filtering data generated with a tiny or zero noise
/// scale: the filter itself needs a strictly positive noise parameter.
pub const MIN_FILTER_NOISE_SCALE: f64 = 0.05;

/// Mean absolute tracking error of `probs` against the true path, overall and
/// excluding `band` time units after each jump (the filter needs a few
/// observations to re-learn the state, so the settling window is reported
/// separately).
pub fn tracking_error(
    path: &ctmc_hums_core::markov_chain::ChainPath<f64>,
    times: &[f64],
    probs: &[f64],
    target_state: usize,
    band: f64,
) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut total_n = 0usize;
    let mut outside = 0.0;
    let mut outside_n = 0usize;
    for (&t, &p) in times.iter().zip(probs) {
        let truth = if path.state_at(t.min(path.horizon()))? == target_state {
            1.0
        } else {
            0.0
        };
        let err = (p - truth).abs();
        total += err;
        total_n += 1;
        let settling = path
            .jump_times()
            .iter()
            .any(|&tj| t >= tj && t < tj + band);
        if !settling {
            outside += err;
            outside_n += 1;
        }
    }
    if total_n == 0 {
        return Err(anyhow!("empty trajectory"));
    }
    Ok((total / total_n as f64, outside / outside_n.max(1) as f64))
}

pub fn run(settings: &Settings, out: &OutputDir) -> Result<()> {
    let model = model_spec(settings, false)?;
    let fcfg = filter_config(settings)?;
    let dt = settings.f64("sim.dt", 0.01)?;
    let horizon = settings.f64("sim.horizon", 200.0)?;
    let seed = settings.u64("sim.seed", 1)?;
    let initial = settings.usize("sim.initial_state", 0)?;
    let target_state = settings.usize("decision.target_state", 1)?;

    let path = simulate_chain(&model.a, initial, horizon, seed)?;
    let series =
        simulate_observation(&path, &model.c, dt, model.noise_scale, seed ^ OBSERVATION_SEED_SALT)?;
    log::info!(
        "simulated {} steps, {} jumps, noise scale {}",
        series.n_increments(),
        path.n_jumps(),
        model.noise_scale
    );

    let filter_noise = model.noise_scale.max(MIN_FILTER_NOISE_SCALE);
    if filter_noise != model.noise_scale {
        log::warn!("filter noise scale floored at {MIN_FILTER_NOISE_SCALE}");
    }
    let filter = ZakaiFilter::new(model.a.clone(), model.c.clone(), filter_noise, fcfg)?;
    let traj = filter.run(&series, &model.p0)?;

    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    let chain_file = out.write("chain.csv", &buf)?;
    buf.clear();
    series.write_csv(&mut buf)?;
    let obs_file = out.write("observations.csv", &buf)?;
    buf.clear();
    traj.write_csv(&mut buf)?;
    let post_file = out.write("posterior.csv", &buf)?;

    let probs = traj.state_probs(target_state);
    let (mae, mae_outside_band) =
        tracking_error(&path, traj.times(), &probs, target_state, 2.0)?;
    println!(
        "simulate: {} steps, {} jumps | tracking MAE {:.4} (excl. settling band {:.4})",
        series.n_increments(),
        path.n_jumps(),
        mae,
        mae_outside_band
    );

    let mut summary = Summary::new("simulate", settings);
    summary.set("seed", json!(seed));
    summary.set("dt", json!(dt));
    summary.set("horizon", json!(horizon));
    summary.set("scheme", json!(scheme_name(filter.config().scheme)));
    summary.set("noise_scale", json!(model.noise_scale));
    summary.set("generator", matrix_json(&model.a));
    summary.set("slopes", json!(model.c.as_slice()));
    summary.set("n_steps", json!(series.n_increments()));
    summary.set("n_jumps", json!(path.n_jumps()));
    summary.set("target_state", json!(target_state));
    summary.set("mae", json!(mae));
    summary.set("mae_outside_band", json!(mae_outside_band));
    summary.set("clamp_events", json!(traj.terminal().clamp_events()));
    summary.set("terminal_posterior", json!(traj.terminal().q()));
    summary.add_file("chain", &chain_file);
    summary.add_file("observations", &obs_file);
    summary.add_file("posterior", &post_file);
    summary.write(out)?;
    Ok(())
}
