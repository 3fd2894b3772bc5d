//! `sensitivity`: filter the same simulated data under deliberately
//! mis-specified rate matrices and slope vectors, and measure how much the
//! maintenance decision changes.

use anyhow::{anyhow, Result};
use ctmc_hums_core::csvfmt::fmt_scalar;
use ctmc_hums_core::decision::{detect, DecisionRule};
use ctmc_hums_core::markov_chain::{simulate_chain, GeneratorMatrix};
use ctmc_hums_core::observation::{simulate_observation, SlopeVector};
use ctmc_hums_core::zakai::{FilterConfig, ZakaiFilter};
use serde_json::json;

use crate::commands::simulate::OBSERVATION_SEED_SALT;
use crate::config::{decision_rule, filter_config, model_spec, ModelSpec, Settings};
use crate::report::{OutputDir, Summary};

/// One mis-specified parameter set to filter under.
#[derive(Debug, Clone)]
pub struct Variant {
    pub name: String,
    pub a: GeneratorMatrix<f64>,
    pub c: SlopeVector<f64>,
}

/// Agreement between the decisions a variant makes and the true-parameter
/// decisions over a batch of trajectories.
#[derive(Debug, Clone)]
pub struct VariantScore {
    pub name: String,
    /// Trajectories on which fired-vs-not matches the true-parameter filter.
    pub n_agree: usize,
    pub n_trajectories: usize,
    /// |detection index difference| on trajectories where both fired.
    pub gaps: Vec<usize>,
}

impl VariantScore {
    pub fn agreement(&self) -> f64 {
        self.n_agree as f64 / self.n_trajectories.max(1) as f64
    }

    pub fn median_gap(&self) -> Option<f64> {
        if self.gaps.is_empty() {
            return None;
        }
        let mut g = self.gaps.clone();
        g.sort_unstable();
        let m = g.len();
        Some(if m % 2 == 1 {
            g[m / 2] as f64
        } else {
            (g[m / 2 - 1] + g[m / 2]) as f64 / 2.0
        })
    }
}

/// The default perturbation study: two alternative generators and three
/// alternative slope vectors around the baseline model.
pub fn default_variants(settings: &Settings) -> Result<Vec<Variant>> {
    let build_a = |key: &str, rows: &[Vec<f64>]| -> Result<GeneratorMatrix<f64>> {
        GeneratorMatrix::from_rows(&settings.matrix(key, rows)?)
            .map_err(|e| anyhow!("key `{key}`: {e}"))
    };
    let build_c = |key: &str, vals: &[f64]| -> Result<SlopeVector<f64>> {
        SlopeVector::new(settings.vec_f64(key, vals)?).map_err(|e| anyhow!("key `{key}`: {e}"))
    };
    let base = model_spec(settings, false)?;
    let a1 = build_a("sensitivity.a1", &[vec![-0.01, 0.01], vec![0.04, -0.04]])?;
    let a2 = build_a("sensitivity.a2", &[vec![-0.2, 0.2], vec![0.08, -0.08]])?;
    let c1 = build_c("sensitivity.c1", &[-0.5, 0.5])?;
    let c2 = build_c("sensitivity.c2", &[-1.0, 0.5])?;
    let c3 = build_c("sensitivity.c3", &[0.0, 1.0])?;
    Ok(vec![
        Variant { name: "A1".into(), a: a1, c: base.c.clone() },
        Variant { name: "A2".into(), a: a2, c: base.c.clone() },
        Variant { name: "c1".into(), a: base.a.clone(), c: c1 },
        Variant { name: "c2".into(), a: base.a.clone(), c: c2 },
        Variant { name: "c3".into(), a: base.a.clone(), c: c3 },
    ])
}

/// Run the study: simulate `n_trajectories` datasets under the true model,
/// filter each under the true parameters and every variant, and compare the
/// run-length decisions. Returns the per-variant scores plus the posterior
/// overlay of the first trajectory (true parameters first).
pub fn study(
    model: &ModelSpec,
    variants: &[Variant],
    fcfg: FilterConfig<f64>,
    rule: &DecisionRule<f64>,
    dt: f64,
    horizon: f64,
    initial: usize,
    base_seed: u64,
    n_trajectories: usize,
) -> Result<(Vec<VariantScore>, Vec<f64>, Vec<Vec<f64>>)> {
    let mut scores: Vec<VariantScore> = variants
        .iter()
        .map(|v| VariantScore {
            name: v.name.clone(),
            n_agree: 0,
            n_trajectories,
            gaps: Vec::new(),
        })
        .collect();
    let mut overlay_times = Vec::new();
    let mut overlay: Vec<Vec<f64>> = Vec::new();

    for k in 0..n_trajectories {
        let seed = base_seed.wrapping_add(k as u64);
        let path = simulate_chain(&model.a, initial, horizon, seed)?;
        let series = simulate_observation(
            &path,
            &model.c,
            dt,
            model.noise_scale,
            seed ^ OBSERVATION_SEED_SALT,
        )?;
        let run_one = |a: &GeneratorMatrix<f64>,
                       c: &SlopeVector<f64>|
         -> Result<(Option<usize>, Vec<f64>)> {
            let filter = ZakaiFilter::new(a.clone(), c.clone(), model.noise_scale, fcfg)?;
            let traj = filter.run(&series, &model.p0)?;
            let probs = traj.state_probs(rule.target_state);
            let outcome = detect(&probs, rule)?;
            Ok((outcome.detection_index, probs))
        };

        let (true_idx, true_probs) = run_one(&model.a, &model.c)?;
        if k == 0 {
            overlay_times = (0..series.len()).map(|j| series.time(j)).collect();
            overlay.push(true_probs);
        }
        for (v, score) in variants.iter().zip(scores.iter_mut()) {
            let (idx, probs) = run_one(&v.a, &v.c)?;
            if k == 0 {
                overlay.push(probs);
            }
            match (true_idx, idx) {
                (Some(t), Some(p)) => {
                    score.n_agree += 1;
                    score.gaps.push(t.abs_diff(p));
                }
                (None, None) => score.n_agree += 1,
                _ => {}
            }
        }
    }
    Ok((scores, overlay_times, overlay))
}

fn overlay_csv(
    names: &[String],
    times: &[f64],
    overlay: &[Vec<f64>],
) -> Result<Vec<u8>> {
    use std::io::Write;
    let mut buf = Vec::new();
    write!(buf, "t,p_true")?;
    for name in names {
        write!(buf, ",p_{name}")?;
    }
    writeln!(buf)?;
    for (j, &t) in times.iter().enumerate() {
        write!(buf, "{}", fmt_scalar(t))?;
        for series in overlay {
            write!(buf, ",{}", fmt_scalar(series[j]))?;
        }
        writeln!(buf)?;
    }
    Ok(buf)
}

pub fn run(settings: &Settings, out: &OutputDir) -> Result<()> {
    let model = model_spec(settings, false)?;
    let fcfg = filter_config(settings)?;
    let rule = decision_rule(settings)?;
    let variants = default_variants(settings)?;
    let dt = settings.f64("sim.dt", 0.01)?;
    let horizon = settings.f64("sim.horizon", 200.0)?;
    let seed = settings.u64("sim.seed", 1)?;
    let initial = settings.usize("sim.initial_state", 0)?;
    let n_trajectories = settings.usize("sensitivity.trajectories", 50)?;

    log::info!("sensitivity study over {n_trajectories} trajectories, {} variants", variants.len());
    let (scores, times, overlay) = study(
        &model,
        &variants,
        fcfg,
        &rule,
        dt,
        horizon,
        initial,
        seed,
        n_trajectories,
    )?;

    let names: Vec<String> = variants.iter().map(|v| v.name.clone()).collect();
    let overlay_file = out.write("overlay.csv", &overlay_csv(&names, &times, &overlay)?)?;

    println!("sensitivity: {n_trajectories} trajectories");
    println!("{:<6} {:>10} {:>12} {:>12}", "set", "agreement", "median gap", "both fired");
    let mut rows = Vec::new();
    for s in &scores {
        let gap = s.median_gap();
        println!(
            "{:<6} {:>9.1}% {:>12} {:>12}",
            s.name,
            100.0 * s.agreement(),
            gap.map_or_else(|| "-".into(), |g| format!("{g:.1}")),
            s.gaps.len()
        );
        rows.push(json!({
            "name": s.name,
            "agreement": s.agreement(),
            "n_agree": s.n_agree,
            "median_gap": gap,
            "both_fired": s.gaps.len(),
        }));
    }

    let mut summary = Summary::new("sensitivity", settings);
    summary.set("seed", json!(seed));
    summary.set("trajectories", json!(n_trajectories));
    summary.set("variants", json!(rows));
    summary.add_file("overlay", &overlay_file);
    summary.write(out)?;
    Ok(())
}
