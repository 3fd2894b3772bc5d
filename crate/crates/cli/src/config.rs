//! Plain-text `key = value` configuration with dotted section names.
//!
//! A config file looks like:
//!
//! ```text
//! # two-state health model
//! model.a           = [[-0.1, 0.1], [0.05, -0.05]]
//! model.c           = [-1, 1]
//! model.noise_scale = 1
//! sim.dt            = 0.01
//! filter.scheme     = robust
//! ```
//!
//! Values stay strings until a typed getter parses them, so unknown keys are
//! rejected eagerly (catching typos) while value errors carry the key name.
//! Precedence, lowest to highest: built-in per-command defaults, config file,
//! `--set key=value` overrides, named CLI flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ctmc_hums_core::markov_chain::{GeneratorMatrix, InitialLaw};
use ctmc_hums_core::observation::SlopeVector;
use ctmc_hums_core::zakai::{FilterConfig, Scheme};

/// Every key the tool understands, with a one-line meaning. Doubles as the
/// validation whitelist and the `--help-config` text source.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("model.a", "generator matrix, row-major bracket syntax [[a00,a01],[a10,a11]]"),
    ("model.c", "per-state observation drift slopes, e.g. [-1, 1]"),
    ("model.p0", "initial state law, e.g. [0.5, 0.5]"),
    ("model.noise_scale", "observation noise scale (>= 0 for data generation; filtering floors it at prep.min_noise_scale)"),
    ("sim.dt", "simulation/filter grid step"),
    ("sim.horizon", "simulated time horizon"),
    ("sim.seed", "base RNG seed"),
    ("sim.initial_state", "chain start state (0-based)"),
    ("filter.scheme", "posterior update scheme: robust | euler"),
    ("filter.renormalize_every", "steps between stored-functional renormalizations"),
    ("filter.clamp_eps", "relative floor applied to posterior components"),
    ("decision.threshold", "posterior threshold of the run-length alert rule"),
    ("decision.run_length", "consecutive startups required above the threshold"),
    ("decision.target_state", "state index the rule watches (0-based)"),
    ("prep.window", "trailing moving-average window (startups)"),
    ("prep.reference_temp", "temperature the regression correction maps data to"),
    ("prep.pooled", "true = one temperature regression across the fleet"),
    ("prep.calibration_points", "leading increments used to calibrate noise_scale"),
    ("prep.min_noise_scale", "floor for the calibrated noise scale"),
    ("prep.noise_scale", "fixed noise scale for logbook filtering (skips calibration)"),
    ("sensitivity.trajectories", "number of simulated trajectories in the sensitivity study"),
    ("sensitivity.a1", "rate-matrix variant 1"),
    ("sensitivity.a2", "rate-matrix variant 2"),
    ("sensitivity.c1", "slope variant 1"),
    ("sensitivity.c2", "slope variant 2"),
    ("sensitivity.c3", "slope variant 3"),
    ("estimate.a0", "initial generator guess for iterative estimation"),
    ("estimate.c0", "initial slope guess for iterative estimation"),
    ("estimate.max_iters", "iteration cap for the estimator"),
    ("estimate.rel_tol", "relative-change convergence tolerance"),
    ("estimate.rates", "true = re-estimate the generator off-diagonals"),
    ("estimate.slopes", "true = re-estimate the drift slopes"),
    ("fleet.stable", "synthetic fleet: number of appliances that never degrade"),
    ("fleet.degrading", "synthetic fleet: number of appliances that degrade"),
    ("fleet.horizon", "synthetic fleet: startups recorded per appliance"),
    ("fleet.noise_scale", "synthetic fleet: raw Tmf noise scale"),
    ("fleet.seed", "synthetic fleet seed (defaults to sim.seed)"),
    ("sweep.thresholds", "comma list of thresholds for the rule sweep"),
    ("sweep.run_lengths", "comma list of run lengths for the rule sweep"),
    ("out.dir", "output directory"),
    ("workers", "worker threads for fleet commands (0 = all cores)"),
];

fn known(key: &str) -> bool {
    KNOWN_KEYS.iter().any(|(k, _)| *k == key)
}

/// Render the key reference (used by `--help-config`).
pub fn render_key_reference() -> String {
    let mut s = String::from("Configuration keys (key = value, dotted sections, # comments):\n");
    for (k, d) in KNOWN_KEYS {
        let _ = writeln!(s, "  {k:<26} {d}");
    }
    s
}

/// Layered string-to-string settings with typed, validating getters.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse one `key = value` line; `#` starts a comment, blanks skipped.
    fn parse_line(&mut self, line: &str, lineno: usize, origin: &str) -> Result<()> {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            return Ok(());
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{origin}:{lineno}: expected `key = value`, got `{line}`"))?;
        self.set(key.trim(), value.trim())
            .with_context(|| format!("{origin}:{lineno}"))?;
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (idx, line) in text.lines().enumerate() {
            self.parse_line(line, idx + 1, &path.display().to_string())?;
        }
        Ok(())
    }

    /// Set one key, rejecting names the tool does not know.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            bail!("unknown configuration key `{key}` (see --help-config)");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply a `--set key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got `{pair}`"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    /// Resolved view for reports.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow!("key `{key}`: expected {what}, got `{raw}`")),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parse::<f64>(key, "a number")?.unwrap_or(default))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.parse::<f64>(key, "a number")
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parse::<u64>(key, "a nonnegative integer")?.unwrap_or(default))
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parse::<usize>(key, "a nonnegative integer")?.unwrap_or(default))
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => match raw.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(anyhow!("key `{key}`: expected true/false, got `{raw}`")),
            },
        }
    }

    /// Comma-separated numbers; brackets optional: `[1, 2]` or `1,2`.
    pub fn vec_f64(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => parse_vector(raw).with_context(|| format!("key `{key}`")),
        }
    }

    pub fn vec_usize(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .trim()
                .trim_start_matches('[')
                .trim_end_matches(']')
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<usize>()
                        .map_err(|_| anyhow!("key `{key}`: bad integer `{f}`"))
                })
                .collect(),
        }
    }

    /// Row-major matrix in bracket syntax: `[[-0.1, 0.1], [0.05, -0.05]]`.
    pub fn matrix(&self, key: &str, default: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => parse_matrix(raw).with_context(|| format!("key `{key}`")),
        }
    }

    pub fn scheme(&self, key: &str, default: Scheme) -> Result<Scheme> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => parse_scheme(raw),
        }
    }
}

pub fn parse_scheme(raw: &str) -> Result<Scheme> {
    match raw.to_ascii_lowercase().as_str() {
        "euler" => Ok(Scheme::Euler),
        "robust" => Ok(Scheme::Robust),
        _ => Err(anyhow!("scheme must be `euler` or `robust`, got `{raw}`")),
    }
}

pub fn scheme_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Euler => "euler",
        Scheme::Robust => "robust",
    }
}

fn parse_vector(raw: &str) -> Result<Vec<f64>> {
    let inner = raw.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        bail!("empty vector");
    }
    inner
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("bad number `{}` in vector `{raw}`", f.trim()))
        })
        .collect()
}

fn parse_matrix(raw: &str) -> Result<Vec<Vec<f64>>> {
    let s = raw.trim();
    let s = s
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| anyhow!("matrix must be wrapped in [...], got `{raw}`"))?;
    let mut rows = Vec::new();
    let mut depth = 0usize;
    let mut start = None;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => {
                if depth == 0 {
                    start = Some(i + 1);
                }
                depth += 1;
            }
            ']' => {
                depth = depth.checked_sub(1).ok_or_else(|| anyhow!("unbalanced `]`"))?;
                if depth == 0 {
                    let row = &s[start.take().ok_or_else(|| anyhow!("unbalanced `]`"))?..i];
                    rows.push(parse_vector(row)?);
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        bail!("unbalanced `[` in matrix `{raw}`");
    }
    if rows.is_empty() {
        bail!("matrix `{raw}` has no rows");
    }
    Ok(rows)
}

/// The fully-resolved hidden-state model shared by most commands.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub a: GeneratorMatrix<f64>,
    pub c: SlopeVector<f64>,
    pub p0: InitialLaw<f64>,
    pub noise_scale: f64,
}

/// Built-in model defaults; `industrial` selects the fleet-pipeline family.
pub fn model_spec(settings: &Settings, industrial: bool) -> Result<ModelSpec> {
    let (a_default, c_default, p0_default): (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) = if industrial {
        (
            vec![vec![-0.01, 0.01], vec![0.001, -0.001]],
            vec![0.0, 1.0],
            vec![0.99, 0.01],
        )
    } else {
        (
            vec![vec![-0.1, 0.1], vec![0.05, -0.05]],
            vec![-1.0, 1.0],
            vec![0.5, 0.5],
        )
    };
    let a_rows = settings.matrix("model.a", &a_default)?;
    let a = GeneratorMatrix::from_rows(&a_rows).map_err(|e| anyhow!("key `model.a`: {e}"))?;
    let c_vals = settings.vec_f64("model.c", &c_default)?;
    let c = SlopeVector::new(c_vals).map_err(|e| anyhow!("key `model.c`: {e}"))?;
    let p0_vals = settings.vec_f64("model.p0", &p0_default)?;
    let p0 = InitialLaw::new(p0_vals).map_err(|e| anyhow!("key `model.p0`: {e}"))?;
    let noise_scale = settings.f64("model.noise_scale", if industrial { 0.3 } else { 1.0 })?;
    if !(noise_scale.is_finite() && noise_scale >= 0.0) {
        bail!("key `model.noise_scale`: must be a finite nonnegative number");
    }
    Ok(ModelSpec { a, c, p0, noise_scale })
}

/// Filter configuration from settings.
pub fn filter_config(settings: &Settings) -> Result<FilterConfig<f64>> {
    let defaults = FilterConfig::<f64>::default();
    let cfg = FilterConfig {
        scheme: settings.scheme("filter.scheme", defaults.scheme)?,
        renormalize_every: settings
            .usize("filter.renormalize_every", defaults.renormalize_every)?,
        clamp_eps: settings.f64("filter.clamp_eps", defaults.clamp_eps)?,
    };
    cfg.validate().map_err(|e| anyhow!("filter configuration: {e}"))?;
    Ok(cfg)
}

/// Decision rule from settings.
pub fn decision_rule(settings: &Settings) -> Result<ctmc_hums_core::decision::DecisionRule<f64>> {
    let defaults = ctmc_hums_core::decision::DecisionRule::<f64>::default();
    let rule = ctmc_hums_core::decision::DecisionRule {
        threshold: settings.f64("decision.threshold", defaults.threshold)?,
        run_length: settings.usize("decision.run_length", defaults.run_length)?,
        target_state: settings.usize("decision.target_state", defaults.target_state)?,
    };
    rule.validate().map_err(|e| anyhow!("decision rule: {e}"))?;
    Ok(rule)
}
