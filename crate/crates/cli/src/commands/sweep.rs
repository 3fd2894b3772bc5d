//! `sweep`: evaluate a grid of run-length rules over one fleet — filter every
//! appliance once, then score each (threshold, run length) combination.

use std::io::Write as _;
use std::path::Path;

use anyhow::Result;
use ctmc_hums_core::csvfmt::fmt_scalar;
use ctmc_hums_core::decision::{render_sweep_table, sweep_rules, GroundTruth};
use ctmc_hums_core::logbook::read_fleet;
use serde_json::json;

use crate::commands::pipeline::{pipeline_config, run_fleet_parallel};
use crate::config::Settings;
use crate::report::{confusion_json, OutputDir, Summary};

pub fn run(settings: &Settings, fleet_path: &Path, out: &OutputDir) -> Result<()> {
    let cfg = pipeline_config(settings)?;
    let thresholds = settings.vec_f64("sweep.thresholds", &[0.99, 0.999, 0.9999])?;
    let run_lengths = settings.vec_usize("sweep.run_lengths", &[1, 3, 5])?;

    let fleet = read_fleet::<f64>(fleet_path)?;
    log::info!(
        "sweep over {} appliances: {} thresholds x {} run lengths",
        fleet.len(),
        thresholds.len(),
        run_lengths.len()
    );
    let (results, failures) = run_fleet_parallel(&fleet, &cfg)?;

    // One filter pass per appliance; the rule grid reuses the posteriors.
    let posteriors: Vec<Vec<f64>> = results
        .iter()
        .map(|r| r.trajectory.state_probs(cfg.rule.target_state))
        .collect();
    let truths: Vec<GroundTruth> = results.iter().map(|r| r.scored().1).collect();
    let rows = sweep_rules(
        &posteriors,
        &truths,
        &thresholds,
        &run_lengths,
        cfg.rule.target_state,
    )?;

    let table = render_sweep_table(&rows);
    let table_file = out.write("sweep.txt", table.as_bytes())?;
    let mut csv = Vec::new();
    writeln!(csv, "threshold,run_length,true_positive,false_positive,false_negative,true_negative")?;
    let mut cells = Vec::new();
    for (rule, m) in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_scalar(rule.threshold),
            rule.run_length,
            m.true_positive,
            m.false_positive,
            m.false_negative,
            m.true_negative
        )?;
        cells.push(json!({
            "threshold": rule.threshold,
            "run_length": rule.run_length,
            "confusion": confusion_json(m),
        }));
    }
    let csv_file = out.write("sweep.csv", &csv)?;

    println!("sweep: {} appliances, {} rule combinations", results.len(), rows.len());
    print!("{table}");
    for (id, err) in &failures {
        eprintln!("sweep: appliance {id} skipped: {err}");
    }

    let mut summary = Summary::new("sweep", settings);
    summary.set("fleet", json!(fleet_path.display().to_string()));
    summary.set("processed", json!(results.len()));
    summary.set("thresholds", json!(thresholds));
    summary.set("run_lengths", json!(run_lengths));
    summary.set("cells", json!(cells));
    summary.set(
        "failed_appliances",
        json!(failures
            .iter()
            .map(|(id, err)| json!({"appliance_id": id, "error": err}))
            .collect::<Vec<_>>()),
    );
    summary.add_file("table", &table_file);
    summary.add_file("grid", &csv_file);
    summary.write(out)?;
    Ok(())
}
