//! `fleet-gen`: write a synthetic appliance fleet with known degradation
//! onsets — ground truth for exercising the pipeline end to end.

use anyhow::Result;
use ctmc_hums_core::logbook::{generate_synthetic_fleet, write_fleet, FleetGenConfig};
use ctmc_hums_core::markov_chain::GeneratorMatrix;
use ctmc_hums_core::observation::SlopeVector;
use serde_json::json;

use crate::config::Settings;
use crate::report::{OutputDir, Summary};

pub fn run(settings: &Settings, out: &OutputDir) -> Result<()> {
    let seed = settings.u64("fleet.seed", settings.u64("sim.seed", 1)?)?;
    let defaults = FleetGenConfig::<f64>::industrial(seed);
    let model = crate::config::model_spec(settings, true)?;
    let cfg = FleetGenConfig {
        n_stable: settings.usize("fleet.stable", defaults.n_stable)?,
        n_degrading: settings.usize("fleet.degrading", defaults.n_degrading)?,
        a: settings
            .get("model.a")
            .map(|_| -> Result<GeneratorMatrix<f64>> { Ok(model.a.clone()) })
            .transpose()?
            .unwrap_or(defaults.a),
        c: settings
            .get("model.c")
            .map(|_| -> Result<SlopeVector<f64>> { Ok(model.c.clone()) })
            .transpose()?
            .unwrap_or(defaults.c),
        noise_scale: settings.f64("fleet.noise_scale", defaults.noise_scale)?,
        horizon: settings.usize("fleet.horizon", defaults.horizon)?,
        smoothing_window: settings.usize("prep.window", defaults.smoothing_window)?,
        seed,
        ..defaults
    };

    let fleet = generate_synthetic_fleet(&cfg)?;
    let target = out.file("fleet.csv");
    write_fleet(&fleet, &target)?;

    let mut rows = Vec::new();
    for a in fleet.appliances() {
        rows.push(json!({
            "appliance_id": a.appliance_id(),
            "records": a.records().len(),
            "failed": a.failed(),
            "failure_startup": a.failure_startup(),
        }));
    }
    let n_failed = fleet.appliances().iter().filter(|a| a.failed()).count();
    println!(
        "fleet-gen: {} appliances ({} degrading, {} failed) -> {}",
        fleet.len(),
        cfg.n_degrading,
        n_failed,
        target.display()
    );

    let mut summary = Summary::new("fleet-gen", settings);
    summary.set("seed", json!(seed));
    summary.set("stable", json!(cfg.n_stable));
    summary.set("degrading", json!(cfg.n_degrading));
    summary.set("horizon", json!(cfg.horizon));
    summary.set("noise_scale", json!(cfg.noise_scale));
    summary.set("failed", json!(n_failed));
    summary.set("appliances", json!(rows));
    summary.add_file("fleet", &target);
    summary.write(out)?;
    Ok(())
}
