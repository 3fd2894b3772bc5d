//! End-to-end appliance pipeline: clean the logbook, correct for initial
//! temperature, smooth, filter, and decide — keeping track of how grid
//! indices map back to absolute startup numbers so detections and failures
//! are compared in the same units.

use thiserror::Error;

use crate::decision::{
    detect, score_fleet, ConfusionMatrix, DecisionError, DecisionRule, DetectionOutcome,
    GroundTruth,
};
use crate::estimation::industrial_defaults;
use crate::logbook::{ApplianceLogbook, FleetDataset};
use crate::markov_chain::{GeneratorMatrix, InitialLaw, ModelError};
use crate::observation::{ObservationError, ObservationSeries, SlopeVector};
use crate::preprocessing::{
    clean_points, correct_tmf, fit_temperature_regression, smooth, PreprocessError, RegressionFit,
    SmoothedSeries, DEFAULT_REFERENCE_TEMP, DEFAULT_WINDOW,
};
use crate::scalar::Scalar;
use crate::zakai::{FilterConfig, FilterError, FilterTrajectory, ZakaiFilter};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("appliance {id}: needs at least {need} usable records, got {got}")]
    NotEnoughData { id: String, got: usize, need: usize },
    #[error("invalid pipeline configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig<T> {
    pub a: GeneratorMatrix<T>,
    pub c: SlopeVector<T>,
    pub p0: InitialLaw<T>,
    pub filter: FilterConfig<T>,
    pub rule: DecisionRule<T>,
    pub window: usize,
    pub reference_temp: T,
    /// Fit the temperature regression on the whole fleet instead of per
    /// appliance.
    pub pooled_regression: bool,
    /// Observation noise level; `None` calibrates it per appliance from the
    /// spread of first differences over the leading calibration span.
    pub noise_scale: Option<T>,
    pub calibration_points: usize,
    /// Calibration floor: keeps the filter well-posed on eerily quiet data.
    pub min_noise_scale: T,
}

impl<T: Scalar> PipelineConfig<T> {
    /// Industrial working parameters: two-state model, degraded-state slope
    /// one, strong prior on starting healthy.
    pub fn industrial() -> Self {
        let (a, c) = industrial_defaults();
        Self {
            a,
            c,
            p0: InitialLaw::new(vec![T::of(0.99), T::of(0.01)]).expect("valid constant law"),
            filter: FilterConfig::default(),
            rule: DecisionRule::default(),
            window: DEFAULT_WINDOW,
            reference_temp: T::of(DEFAULT_REFERENCE_TEMP),
            pooled_regression: false,
            noise_scale: None,
            calibration_points: 50,
            min_noise_scale: T::of(0.05),
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if self.window == 0 {
            return Err(PipelineError::BadConfig("window must be >= 1".into()));
        }
        if self.rule.target_state >= self.a.n_states() {
            return Err(PipelineError::BadConfig(format!(
                "target state {} out of range for {} states",
                self.rule.target_state,
                self.a.n_states()
            )));
        }
        if !(self.min_noise_scale > T::zero()) {
            return Err(PipelineError::BadConfig("min_noise_scale must be positive".into()));
        }
        if let Some(ns) = self.noise_scale {
            if !(ns > T::zero() && ns.is_finite()) {
                return Err(PipelineError::BadConfig(format!(
                    "noise_scale must be positive and finite, got {ns}"
                )));
            }
        }
        Ok(())
    }
}

/// Everything the pipeline produced for one appliance.
#[derive(Debug, Clone)]
pub struct AppliancePipelineResult<T> {
    pub appliance_id: String,
    pub smoothed: SmoothedSeries<T>,
    /// Absolute startup index of each smoothed/filtered grid point.
    pub startup_indices: Vec<u64>,
    pub trajectory: FilterTrajectory<T>,
    pub outcome: DetectionOutcome,
    /// Absolute startup at which the rule fired, when it did.
    pub detection_startup: Option<u64>,
    pub noise_scale_used: T,
    pub dropped_records: usize,
    pub failed: bool,
    pub failure_startup: Option<u64>,
}

impl<T: Scalar> AppliancePipelineResult<T> {
    /// Detection and ground truth in absolute startup numbers, ready for
    /// fleet scoring.
    pub fn scored(&self) -> (DetectionOutcome, GroundTruth) {
        (
            DetectionOutcome { detection_index: self.detection_startup.map(|v| v as usize) },
            GroundTruth {
                failed: self.failed,
                failure_index: self.failure_startup.map(|v| v as usize),
            },
        )
    }
}

/// Fit one temperature regression over every appliance's usable records.
pub fn pooled_fit<T: Scalar>(
    fleet: &FleetDataset<T>,
    cfg: &PipelineConfig<T>,
) -> Result<RegressionFit<T>, PipelineError> {
    let mut all = Vec::new();
    for a in fleet.appliances() {
        let points: Vec<(T, T)> =
            a.records().iter().map(|r| (r.initial_temp, r.tmf)).collect();
        let (kept, _, _) = clean_points(&points);
        all.extend(kept);
    }
    Ok(fit_temperature_regression(&all)?.with_reference_temp(cfg.reference_temp))
}

/// Run the full chain on one appliance. `shared_fit` supplies the pooled
/// regression when fleet pooling is enabled; otherwise the fit is computed
/// from this appliance's own records.
pub fn run_appliance<T: Scalar>(
    logbook: &ApplianceLogbook<T>,
    cfg: &PipelineConfig<T>,
    shared_fit: Option<&RegressionFit<T>>,
) -> Result<AppliancePipelineResult<T>, PipelineError> {
    cfg.validate()?;
    let id = logbook.appliance_id().to_string();

    let points: Vec<(T, T)> =
        logbook.records().iter().map(|r| (r.initial_temp, r.tmf)).collect();
    let (kept, kept_idx, dropped) = clean_points(&points);
    // The smoothed series must hold at least two points for a filter grid.
    let need = cfg.window + 1;
    if kept.len() < need {
        return Err(PipelineError::NotEnoughData { id, got: kept.len(), need });
    }

    let fit = match shared_fit {
        Some(f) => *f,
        None => fit_temperature_regression(&kept)?.with_reference_temp(cfg.reference_temp),
    };
    let corrected: Vec<T> = kept.iter().map(|&(t, y)| correct_tmf(t, y, &fit)).collect();
    let smoothed = smooth(&corrected, cfg.window)?;

    // Grid point k covers the window of cleaned records ending at cleaned
    // position window-1+k; its startup number is that record's.
    let startup_indices: Vec<u64> = (0..smoothed.len())
        .map(|k| logbook.records()[kept_idx[cfg.window - 1 + k]].startup_index)
        .collect();

    let noise_scale_used = match cfg.noise_scale {
        Some(ns) => ns,
        None => calibrate_noise(smoothed.values(), cfg.calibration_points)
            .max(cfg.min_noise_scale),
    };

    let series = ObservationSeries::from_values(
        T::of(cfg.window as f64),
        T::one(),
        smoothed.values().to_vec(),
    )?;
    let filter = ZakaiFilter::new(cfg.a.clone(), cfg.c.clone(), noise_scale_used, cfg.filter)?;
    let trajectory = filter.run(&series, &cfg.p0)?;

    let probs = trajectory.state_probs(cfg.rule.target_state);
    let outcome = detect(&probs, &cfg.rule)?;
    let detection_startup = outcome.detection_index.map(|j| startup_indices[j]);

    Ok(AppliancePipelineResult {
        appliance_id: id,
        smoothed,
        startup_indices,
        trajectory,
        outcome,
        detection_startup,
        noise_scale_used,
        dropped_records: dropped,
        failed: logbook.failed(),
        failure_startup: logbook.failure_startup(),
    })
}

/// Sample standard deviation of the first differences over the leading
/// calibration span.
fn calibrate_noise<T: Scalar>(values: &[T], span: usize) -> T {
    let n_diffs = (values.len() - 1).min(span.max(2));
    let diffs: Vec<T> = (0..n_diffs).map(|k| values[k + 1] - values[k]).collect();
    if diffs.len() < 2 {
        return T::zero();
    }
    let n = T::of(diffs.len() as f64);
    let mean = diffs.iter().copied().fold(T::zero(), |s, v| s + v) / n;
    let ss = diffs.iter().map(|&d| (d - mean) * (d - mean)).fold(T::zero(), |s, v| s + v);
    (ss / (n - T::one())).sqrt()
}

#[derive(Debug, Clone)]
pub struct FleetPipelineResult<T> {
    pub appliances: Vec<AppliancePipelineResult<T>>,
    /// Appliances that could not be processed: (id, reason). One bad logbook
    /// never aborts the rest of the fleet.
    pub failures: Vec<(String, String)>,
    pub confusion: ConfusionMatrix,
}

/// Score the per-appliance results into one confusion matrix.
pub fn score_results<T: Scalar>(
    results: &[AppliancePipelineResult<T>],
) -> Result<ConfusionMatrix, PipelineError> {
    let items: Vec<_> = results.iter().map(|r| r.scored()).collect();
    Ok(score_fleet(&items)?)
}

/// Run every appliance in the fleet sequentially. (Callers wanting
/// parallelism can run `run_appliance` per appliance themselves — results
/// are order-independent — then finish with `score_results`.)
pub fn run_fleet<T: Scalar>(
    fleet: &FleetDataset<T>,
    cfg: &PipelineConfig<T>,
) -> Result<FleetPipelineResult<T>, PipelineError> {
    cfg.validate()?;
    let shared = if cfg.pooled_regression { Some(pooled_fit(fleet, cfg)?) } else { None };
    let mut appliances = Vec::with_capacity(fleet.len());
    let mut failures = Vec::new();
    for logbook in fleet.appliances() {
        match run_appliance(logbook, cfg, shared.as_ref()) {
            Ok(res) => appliances.push(res),
            Err(e) => failures.push((logbook.appliance_id().to_string(), e.to_string())),
        }
    }
    let confusion = score_results(&appliances)?;
    Ok(FleetPipelineResult { appliances, failures, confusion })
}
