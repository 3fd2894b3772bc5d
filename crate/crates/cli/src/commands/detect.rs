//! `detect`: apply the run-length maintenance rule to a posterior trajectory
//! file produced by `filter`, `simulate`, or `pipeline`.

use std::path::Path;

use anyhow::{bail, Result};
use ctmc_hums_core::decision::detect;
use serde_json::json;

use crate::commands::read_posterior;
use crate::config::{decision_rule, Settings};
use crate::report::{OutputDir, Summary};

pub fn run(settings: &Settings, posterior_path: &Path, out: &OutputDir) -> Result<()> {
    let rule = decision_rule(settings)?;
    let (times, probs) = read_posterior(posterior_path)?;
    let n_states = probs[0].len();
    if rule.target_state >= n_states {
        bail!(
            "decision.target_state {} out of range: {} has {} states",
            rule.target_state,
            posterior_path.display(),
            n_states
        );
    }
    let target: Vec<f64> = probs.iter().map(|q| q[rule.target_state]).collect();
    let outcome = detect(&target, &rule)?;

    match outcome.detection_index {
        Some(k) => println!(
            "detect: rule (threshold {}, run length {}) fired at index {k} (t = {})",
            rule.threshold, rule.run_length, times[k]
        ),
        None => println!(
            "detect: rule (threshold {}, run length {}) never fired over {} points",
            rule.threshold,
            rule.run_length,
            target.len()
        ),
    }

    let mut summary = Summary::new("detect", settings);
    summary.set("threshold", json!(rule.threshold));
    summary.set("run_length", json!(rule.run_length));
    summary.set("target_state", json!(rule.target_state));
    summary.set("n_points", json!(target.len()));
    summary.set("fired", json!(outcome.detected()));
    summary.set("detection_index", json!(outcome.detection_index));
    summary.set("detection_time", json!(outcome.detection_index.map(|k| times[k])));
    summary.write(out)?;
    Ok(())
}
