//! `estimate`: iterative parameter estimation from an observation series
//! file, wrapping the filtered jump-count / occupation / drift statistics.

use std::path::Path;

use anyhow::{anyhow, Result};
use ctmc_hums_core::estimation::{estimate_parameters, EstimationConfig};
use ctmc_hums_core::markov_chain::GeneratorMatrix;
use ctmc_hums_core::observation::SlopeVector;
use serde_json::json;

use crate::commands::read_series;
use crate::config::{filter_config, model_spec, Settings};
use crate::report::{matrix_json, OutputDir, Summary};

pub fn run(settings: &Settings, series_path: &Path, out: &OutputDir) -> Result<()> {
    let model = model_spec(settings, false)?;
    let fcfg = filter_config(settings)?;
    let series = read_series(series_path)?;

    // Initial guesses default to the model parameters; override with
    // estimate.a0 / estimate.c0 to start somewhere else.
    let a0 = match settings.get("estimate.a0") {
        Some(_) => GeneratorMatrix::from_rows(&settings.matrix("estimate.a0", &[])?)
            .map_err(|e| anyhow!("key `estimate.a0`: {e}"))?,
        None => model.a.clone(),
    };
    let c0 = match settings.get("estimate.c0") {
        Some(_) => SlopeVector::new(settings.vec_f64("estimate.c0", &[])?)
            .map_err(|e| anyhow!("key `estimate.c0`: {e}"))?,
        None => model.c.clone(),
    };
    let ecfg = EstimationConfig {
        max_iters: settings.usize("estimate.max_iters", 50)?,
        rel_tol: settings.f64("estimate.rel_tol", 1e-4)?,
        estimate_a: settings.bool("estimate.rates", true)?,
        estimate_c: settings.bool("estimate.slopes", true)?,
    };

    log::info!(
        "estimating from {} increments (rates: {}, slopes: {})",
        series.n_increments(),
        ecfg.estimate_a,
        ecfg.estimate_c
    );
    let result = estimate_parameters(
        &series,
        &a0,
        &c0,
        model.noise_scale,
        &model.p0,
        fcfg,
        &ecfg,
    )?;

    let report = result.render_report();
    let report_file = out.write("iterations.txt", report.as_bytes())?;
    print!("{report}");

    let mut summary = Summary::new("estimate", settings);
    summary.set("n_increments", json!(series.n_increments()));
    summary.set("iterations", json!(result.n_iterations()));
    summary.set("converged", json!(result.converged));
    summary.set("a0", matrix_json(&a0));
    summary.set("c0", json!(c0.as_slice()));
    summary.set("a_hat", matrix_json(&result.a_hat));
    summary.set("c_hat", json!(result.c_hat.as_slice()));
    summary.set("noise_scale", json!(model.noise_scale));
    summary.add_file("iterations", &report_file);
    summary.write(out)?;
    Ok(())
}
