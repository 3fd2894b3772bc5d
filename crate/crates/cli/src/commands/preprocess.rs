//! `preprocess`: clean logbook records, remove the ambient-temperature trend
//! by regression, and smooth with a trailing moving average — without
//! filtering. Useful for inspecting what the pipeline would feed the filter.

use std::path::Path;

use anyhow::{anyhow, Result};
use ctmc_hums_core::csvfmt::fmt_scalar;
use ctmc_hums_core::logbook::read_fleet;
use ctmc_hums_core::pipeline::pooled_fit;
use ctmc_hums_core::preprocessing::{
    clean_points, correct_tmf, fit_temperature_regression, smooth,
};
use serde_json::json;

use crate::config::Settings;
use crate::report::{OutputDir, Summary};

pub fn run(settings: &Settings, fleet_path: &Path, out: &OutputDir) -> Result<()> {
    let window = settings.usize("prep.window", 20)?;
    let reference_temp = settings.f64("prep.reference_temp", 20.0)?;
    let pooled = settings.bool("prep.pooled", false)?;

    let fleet = read_fleet::<f64>(fleet_path)?;
    log::info!("preprocessing {} appliances (window {window})", fleet.len());

    // Pooled regression borrows the pipeline's fleet-wide fit (same maths,
    // same configuration surface).
    let shared_fit = if pooled {
        let mut cfg = ctmc_hums_core::pipeline::PipelineConfig::industrial();
        cfg.window = window;
        cfg.reference_temp = reference_temp;
        cfg.pooled_regression = true;
        Some(pooled_fit(&fleet, &cfg)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for logbook in fleet.appliances() {
        let id = logbook.appliance_id().to_string();
        let points: Vec<(f64, f64)> =
            logbook.records().iter().map(|r| (r.initial_temp, r.tmf)).collect();
        let (kept, kept_idx, dropped) = clean_points(&points);
        let fit = match &shared_fit {
            Some(f) => f.clone().with_reference_temp(reference_temp),
            None => match fit_temperature_regression(&kept) {
                Ok(f) => f.with_reference_temp(reference_temp),
                Err(e) => {
                    failures.push(json!({"appliance_id": id, "error": e.to_string()}));
                    continue;
                }
            },
        };
        let corrected: Vec<f64> =
            kept.iter().map(|&(temp, tmf)| correct_tmf(temp, tmf, &fit)).collect();
        let smoothed = match smooth(&corrected, window) {
            Ok(s) => s,
            Err(e) => {
                failures.push(json!({"appliance_id": id, "error": e.to_string()}));
                continue;
            }
        };

        // Absolute startup indices survive record dropping: smoothed point k
        // belongs to the record that produced the window's last value.
        use std::io::Write;
        let mut buf = Vec::new();
        writeln!(buf, "startup_index,tmf_corrected,tmf_smoothed")?;
        for (k, &v) in smoothed.values().iter().enumerate() {
            let rec = kept_idx[window - 1 + k];
            writeln!(
                buf,
                "{},{},{}",
                logbook.records()[rec].startup_index,
                fmt_scalar(corrected[window - 1 + k]),
                fmt_scalar(v)
            )?;
        }
        let file = out.write(&format!("{id}_tmf.csv"), &buf)?;
        rows.push(json!({
            "appliance_id": id,
            "records": logbook.records().len(),
            "dropped": dropped,
            "regression_slope": fit.slope,
            "regression_intercept": fit.intercept,
            "smoothed_points": smoothed.len(),
            "first_startup": smoothed.start_index(),
            "file": file.display().to_string(),
        }));
    }

    if rows.is_empty() && !failures.is_empty() {
        return Err(anyhow!("no appliance could be preprocessed"));
    }
    println!(
        "preprocess: {} appliances written, {} failed, window {window}",
        rows.len(),
        failures.len()
    );

    let mut summary = Summary::new("preprocess", settings);
    summary.set("window", json!(window));
    summary.set("reference_temp", json!(reference_temp));
    summary.set("pooled", json!(pooled));
    summary.set("appliances", json!(rows));
    summary.set("failed_appliances", json!(failures));
    summary.write(out)?;
    Ok(())
}
