//! `pipeline`: the full fleet workflow — clean, temperature-correct, smooth,
//! filter, and apply the maintenance rule to every appliance — with
//! per-appliance artifacts and a fleet-level confusion table.

use std::io::Write as _;
use std::path::Path;

use anyhow::Result;
use ctmc_hums_core::csvfmt::fmt_scalar;
use ctmc_hums_core::logbook::read_fleet;
use ctmc_hums_core::pipeline::{
    pooled_fit, run_appliance, score_results, AppliancePipelineResult, PipelineConfig,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{decision_rule, filter_config, model_spec, Settings};
use crate::report::{confusion_json, matrix_json, OutputDir, Summary};

/// Build the fleet pipeline configuration from settings (industrial defaults).
pub fn pipeline_config(settings: &Settings) -> Result<PipelineConfig<f64>> {
    let model = model_spec(settings, true)?;
    let defaults = PipelineConfig::<f64>::industrial();
    Ok(PipelineConfig {
        a: model.a,
        c: model.c,
        p0: model.p0,
        filter: filter_config(settings)?,
        rule: decision_rule(settings)?,
        window: settings.usize("prep.window", defaults.window)?,
        reference_temp: settings.f64("prep.reference_temp", defaults.reference_temp)?,
        pooled_regression: settings.bool("prep.pooled", defaults.pooled_regression)?,
        noise_scale: settings.f64_opt("prep.noise_scale")?,
        calibration_points: settings
            .usize("prep.calibration_points", defaults.calibration_points)?,
        min_noise_scale: settings.f64("prep.min_noise_scale", defaults.min_noise_scale)?,
    })
}

/// Run every appliance concurrently; order of results follows the fleet.
pub fn run_fleet_parallel(
    fleet: &ctmc_hums_core::logbook::FleetDataset<f64>,
    cfg: &PipelineConfig<f64>,
) -> Result<(Vec<AppliancePipelineResult<f64>>, Vec<(String, String)>)> {
    let shared = if cfg.pooled_regression {
        Some(pooled_fit(fleet, cfg)?)
    } else {
        None
    };
    let outcomes: Vec<_> = fleet
        .appliances()
        .par_iter()
        .map(|logbook| {
            (
                logbook.appliance_id().to_string(),
                run_appliance(logbook, cfg, shared.as_ref()),
            )
        })
        .collect();
    let mut results = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (id, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => failures.push((id, e.to_string())),
        }
    }
    Ok((results, failures))
}

/// Per-appliance posterior CSV with absolute startup indices.
fn posterior_csv(r: &AppliancePipelineResult<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let n = r.trajectory.n_states();
    write!(buf, "startup_index")?;
    for i in 0..n {
        write!(buf, ",p_state_{i}")?;
    }
    writeln!(buf)?;
    for (k, q) in r.trajectory.posterior().iter().enumerate() {
        write!(buf, "{}", r.startup_indices[k])?;
        for &p in q {
            write!(buf, ",{}", fmt_scalar(p))?;
        }
        writeln!(buf)?;
    }
    Ok(buf)
}

fn smoothed_csv(r: &AppliancePipelineResult<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "startup_index,tmf_smoothed")?;
    for (k, &v) in r.smoothed.values().iter().enumerate() {
        writeln!(buf, "{},{}", r.startup_indices[k], fmt_scalar(v))?;
    }
    Ok(buf)
}

pub fn run(settings: &Settings, fleet_path: &Path, out: &OutputDir) -> Result<()> {
    let cfg = pipeline_config(settings)?;
    let fleet = read_fleet::<f64>(fleet_path)?;
    log::info!("pipeline over {} appliances from {}", fleet.len(), fleet_path.display());

    let (results, failures) = run_fleet_parallel(&fleet, &cfg)?;
    let confusion = score_results(&results)?;

    // Per-appliance artifacts.
    let mut detection_rows = Vec::new();
    let mut detections_csv = Vec::new();
    writeln!(
        detections_csv,
        "appliance_id,detected,detection_startup,failed,failure_startup,noise_scale,dropped_records"
    )?;
    for r in &results {
        let id = &r.appliance_id;
        out.write(&format!("appliances/{id}_smoothed.csv"), &smoothed_csv(r)?)?;
        out.write(&format!("appliances/{id}_posterior.csv"), &posterior_csv(r)?)?;
        writeln!(
            detections_csv,
            "{},{},{},{},{},{},{}",
            id,
            r.outcome.detected(),
            r.detection_startup.map_or(String::new(), |s| s.to_string()),
            r.failed,
            r.failure_startup.map_or(String::new(), |s| s.to_string()),
            fmt_scalar(r.noise_scale_used),
            r.dropped_records
        )?;
        detection_rows.push(json!({
            "appliance_id": id,
            "detected": r.outcome.detected(),
            "detection_startup": r.detection_startup,
            "failed": r.failed,
            "failure_startup": r.failure_startup,
            "noise_scale": r.noise_scale_used,
            "dropped_records": r.dropped_records,
        }));
    }
    let detections_file = out.write("detections.csv", &detections_csv)?;
    let table = confusion.render_table();
    let table_file = out.write("confusion.txt", table.as_bytes())?;

    println!(
        "pipeline: {} appliances processed, {} failed to process",
        results.len(),
        failures.len()
    );
    print!("{table}");
    for (id, err) in &failures {
        eprintln!("pipeline: appliance {id} skipped: {err}");
    }

    let mut summary = Summary::new("pipeline", settings);
    summary.set("fleet", json!(fleet_path.display().to_string()));
    summary.set("appliances", json!(fleet.len()));
    summary.set("processed", json!(results.len()));
    summary.set("generator", matrix_json(&cfg.a));
    summary.set("slopes", json!(cfg.c.as_slice()));
    summary.set("window", json!(cfg.window));
    summary.set("threshold", json!(cfg.rule.threshold));
    summary.set("run_length", json!(cfg.rule.run_length));
    summary.set("confusion", confusion_json(&confusion));
    summary.set("detections", json!(detection_rows));
    summary.set(
        "failed_appliances",
        json!(failures
            .iter()
            .map(|(id, err)| json!({"appliance_id": id, "error": err}))
            .collect::<Vec<_>>()),
    );
    summary.add_file("detections", &detections_file);
    summary.add_file("confusion_table", &table_file);
    summary.write(out)?;
    Ok(())
}
