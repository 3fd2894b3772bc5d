//! `filter`: run the posterior filter over an observation series file and
//! write the probability trajectory plus the filtered statistics.

use std::path::Path;

use anyhow::Result;
use ctmc_hums_core::zakai::ZakaiFilter;
use serde_json::json;

use crate::commands::read_series;
use crate::commands::simulate::MIN_FILTER_NOISE_SCALE;
use crate::config::{filter_config, model_spec, scheme_name, Settings};
use crate::report::{OutputDir, Summary};

pub fn run(settings: &Settings, series_path: &Path, out: &OutputDir) -> Result<()> {
    let model = model_spec(settings, false)?;
    let fcfg = filter_config(settings)?;
    let series = read_series(series_path)?;

    let noise = model.noise_scale.max(MIN_FILTER_NOISE_SCALE);
    if noise != model.noise_scale {
        log::warn!("filter noise scale floored at {MIN_FILTER_NOISE_SCALE}");
    }
    let filter = ZakaiFilter::new(model.a.clone(), model.c.clone(), noise, fcfg)?;
    let traj = filter.run(&series, &model.p0)?;

    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    let post_file = out.write("posterior.csv", &buf)?;

    let st = traj.terminal();
    let f = st.reduce_functionals();
    let n = st.n_states();
    let occupations: Vec<f64> = (0..n).map(|i| f.occupation(i)).collect();
    let drifts: Vec<f64> = (0..n).map(|i| f.drift(i)).collect();
    let jump_counts: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { f.jump_count(i, j) }).collect())
        .collect();

    println!(
        "filter: {} steps over [{}, {}], terminal posterior {:?}",
        st.steps(),
        series.time(0),
        series.time(series.len() - 1),
        st.q()
    );

    let mut summary = Summary::new("filter", settings);
    summary.set("scheme", json!(scheme_name(filter.config().scheme)));
    summary.set("noise_scale", json!(noise));
    summary.set("n_steps", json!(st.steps()));
    summary.set("elapsed", json!(st.t()));
    summary.set("log_likelihood_scale", json!(st.log_norm()));
    summary.set("clamp_events", json!(st.clamp_events()));
    summary.set("terminal_posterior", json!(st.q()));
    summary.set("occupation", json!(occupations));
    summary.set("drift", json!(drifts));
    summary.set("jump_count", json!(jump_counts));
    summary.add_file("posterior", &post_file);
    summary.write(out)?;
    Ok(())
}
