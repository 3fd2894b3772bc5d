//! Run-length maintenance decisions on posterior trajectories, and fleet
//! scoring of those decisions against ground truth.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error("invalid decision rule: {0}")]
    BadRule(String),
    #[error("probability out of range at index {index}: {value}")]
    BadProbability { index: usize, value: f64 },
    #[error("inconsistent appliance record: {0}")]
    InconsistentRecord(String),
    #[error("sweep grids must be non-empty")]
    EmptyGrid,
    #[error("{posteriors} posterior series but {truths} ground-truth records")]
    LengthMismatch { posteriors: usize, truths: usize },
}

/// Fire when the target-state posterior stays at or above `threshold` for
/// `run_length` consecutive points. "Equals 1" is expressed as a threshold
/// just below 1 because normalized floating-point posteriors never sit at
/// exact unity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule<T> {
    pub threshold: T,
    pub run_length: usize,
    pub target_state: usize,
}

impl<T: Scalar> Default for DecisionRule<T> {
    fn default() -> Self {
        Self { threshold: T::one() - T::of(1e-3), run_length: 3, target_state: 1 }
    }
}

impl<T: Scalar> DecisionRule<T> {
    pub fn validate(&self) -> Result<(), DecisionError> {
        if !(self.threshold > T::zero() && self.threshold <= T::one()) {
            return Err(DecisionError::BadRule(format!(
                "threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        if self.run_length == 0 {
            return Err(DecisionError::BadRule("run_length must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionOutcome {
    /// First index (0-based, in the posterior sequence) at which the rule
    /// fired; `None` when it never did.
    pub detection_index: Option<usize>,
}

impl DetectionOutcome {
    pub fn detected(&self) -> bool {
        self.detection_index.is_some()
    }
}

/// Apply the rule to one appliance's target-state posterior sequence.
///
/// The run must be consecutive: any dip below the threshold resets it.
pub fn detect<T: Scalar>(
    probs: &[T],
    rule: &DecisionRule<T>,
) -> Result<DetectionOutcome, DecisionError> {
    rule.validate()?;
    let slack = T::of(1e-12);
    let mut run = 0usize;
    for (k, &p) in probs.iter().enumerate() {
        if !(p.is_finite() && p >= -slack && p <= T::one() + slack) {
            return Err(DecisionError::BadProbability {
                index: k,
                value: p.to_f64().unwrap_or(f64::NAN),
            });
        }
        if p >= rule.threshold {
            run += 1;
            if run >= rule.run_length {
                return Ok(DetectionOutcome { detection_index: Some(k) });
            }
        } else {
            run = 0;
        }
    }
    Ok(DetectionOutcome { detection_index: None })
}

/// What actually happened to an appliance, in the same index space as the
/// detection outcome it is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruth {
    pub failed: bool,
    pub failure_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    /// Aligned text table: rows = detected / not detected, columns = failure
    /// observed / no failure.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14}{:>18}{:>14}\n", "", "failure observed", "no failure"));
        out.push_str(&format!(
            "{:<14}{:>18}{:>14}\n",
            "detected", self.true_positive, self.false_positive
        ));
        out.push_str(&format!(
            "{:<14}{:>18}{:>14}\n",
            "not detected", self.false_negative, self.true_negative
        ));
        out
    }
}

/// Score a fleet of detection outcomes.
///
/// A detection only counts as a true positive when it lands strictly before
/// the failure; detecting at or after the failure startup is a miss, because
/// the alert exists to schedule maintenance before the breakdown.
pub fn score_fleet(
    items: &[(DetectionOutcome, GroundTruth)],
) -> Result<ConfusionMatrix, DecisionError> {
    let mut m = ConfusionMatrix::default();
    for (k, (outcome, truth)) in items.iter().enumerate() {
        if truth.failed {
            let fail_at = truth.failure_index.ok_or_else(|| {
                DecisionError::InconsistentRecord(format!(
                    "appliance {k} is marked failed but has no failure index"
                ))
            })?;
            match outcome.detection_index {
                Some(d) if d < fail_at => m.true_positive += 1,
                _ => m.false_negative += 1,
            }
        } else if outcome.detected() {
            m.false_positive += 1;
        } else {
            m.true_negative += 1;
        }
    }
    Ok(m)
}

/// Exhaustive rule-grid evaluation over a fleet of target-state posterior
/// sequences. Returns one confusion matrix per (threshold, run_length) pair.
pub fn sweep_rules<T: Scalar>(
    posteriors: &[Vec<T>],
    truths: &[GroundTruth],
    thresholds: &[T],
    run_lengths: &[usize],
    target_state: usize,
) -> Result<Vec<(DecisionRule<T>, ConfusionMatrix)>, DecisionError> {
    if thresholds.is_empty() || run_lengths.is_empty() {
        return Err(DecisionError::EmptyGrid);
    }
    if posteriors.len() != truths.len() {
        return Err(DecisionError::LengthMismatch {
            posteriors: posteriors.len(),
            truths: truths.len(),
        });
    }
    let mut out = Vec::with_capacity(thresholds.len() * run_lengths.len());
    for &threshold in thresholds {
        for &run_length in run_lengths {
            let rule = DecisionRule { threshold, run_length, target_state };
            let mut items = Vec::with_capacity(posteriors.len());
            for (probs, &truth) in posteriors.iter().zip(truths.iter()) {
                items.push((detect(probs, &rule)?, truth));
            }
            out.push((rule, score_fleet(&items)?));
        }
    }
    Ok(out)
}

/// Text comparison table for a rule sweep.
pub fn render_sweep_table<T: Scalar>(rows: &[(DecisionRule<T>, ConfusionMatrix)]) -> String {
    let mut out = String::from("threshold     run_length  TP    FP    FN    TN\n");
    for (rule, m) in rows {
        out.push_str(&format!(
            "{:<12.6e}  {:<10}  {:<4}  {:<4}  {:<4}  {:<4}\n",
            rule.threshold,
            rule.run_length,
            m.true_positive,
            m.false_positive,
            m.false_negative,
            m.true_negative
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(threshold: f64, run_length: usize) -> DecisionRule<f64> {
        DecisionRule { threshold, run_length, target_state: 1 }
    }

    #[test]
    fn default_rule_values() {
        let r = DecisionRule::<f64>::default();
        assert_eq!(r.threshold, 1.0 - 1e-3);
        assert_eq!(r.run_length, 3);
        assert_eq!(r.target_state, 1);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn rule_validation() {
        assert!(rule(0.0, 3).validate().is_err());
        assert!(rule(1.1, 3).validate().is_err());
        assert!(rule(0.5, 0).validate().is_err());
        assert!(rule(1.0, 1).validate().is_ok());
    }

    #[test]
    fn all_zeros_never_fires() {
        let out = detect(&[0.0f64; 10], &DecisionRule::default()).unwrap();
        assert!(!out.detected());
        assert_eq!(out.detection_index, None);
    }

    #[test]
    fn fires_at_end_of_first_full_run() {
        let probs = [0.2, 1.0, 1.0, 1.0, 0.5];
        let out = detect(&probs, &DecisionRule::default()).unwrap();
        assert_eq!(out.detection_index, Some(3));
    }

    #[test]
    fn dip_resets_the_run() {
        let probs = [1.0, 1.0, 0.9, 1.0, 1.0, 1.0];
        let out = detect(&probs, &DecisionRule::default()).unwrap();
        assert_eq!(out.detection_index, Some(5));
    }

    #[test]
    fn vacuously_small_threshold_fires_immediately() {
        // Clamped posteriors are strictly positive, so a tiny threshold
        // passes everywhere and the rule fires once the run fills.
        let probs = [1e-6, 2e-6, 5e-6, 1e-5];
        let out = detect(&probs, &rule(1e-12, 3)).unwrap();
        assert_eq!(out.detection_index, Some(2));
    }

    #[test]
    fn run_length_one_is_plain_threshold_crossing() {
        let out = detect(&[0.4, 0.6], &rule(0.5, 1)).unwrap();
        assert_eq!(out.detection_index, Some(1));
    }

    #[test]
    fn bad_probabilities_are_rejected() {
        assert!(matches!(
            detect(&[0.5, 1.5], &DecisionRule::default()),
            Err(DecisionError::BadProbability { index: 1, .. })
        ));
        assert!(matches!(
            detect(&[f64::NAN], &DecisionRule::default()),
            Err(DecisionError::BadProbability { index: 0, .. })
        ));
        // A one-ulp overshoot from normalization is tolerated.
        let just_over = 1.0 + f64::EPSILON;
        assert!(detect(&[just_over], &rule(0.5, 1)).unwrap().detected());
    }

    #[test]
    fn fleet_scoring_matches_reference_shape() {
        // 28 appliances: 5 failed (3 caught in time, 1 late, 1 missed),
        // 23 healthy and quiet.
        let mut items = Vec::new();
        for _ in 0..3 {
            items.push((
                DetectionOutcome { detection_index: Some(40) },
                GroundTruth { failed: true, failure_index: Some(90) },
            ));
        }
        items.push((
            DetectionOutcome { detection_index: Some(95) },
            GroundTruth { failed: true, failure_index: Some(90) },
        ));
        items.push((
            DetectionOutcome { detection_index: None },
            GroundTruth { failed: true, failure_index: Some(50) },
        ));
        for _ in 0..23 {
            items.push((
                DetectionOutcome { detection_index: None },
                GroundTruth { failed: false, failure_index: None },
            ));
        }
        let m = score_fleet(&items).unwrap();
        assert_eq!(m.true_positive, 3);
        assert_eq!(m.false_negative, 2);
        assert_eq!(m.false_positive, 0);
        assert_eq!(m.true_negative, 23);
        assert_eq!(m.total(), 28);
        let table = m.render_table();
        assert!(table.contains("detected"));
        assert!(table.contains("failure observed"));
    }

    #[test]
    fn detection_at_failure_startup_is_late() {
        let items = [(
            DetectionOutcome { detection_index: Some(90) },
            GroundTruth { failed: true, failure_index: Some(90) },
        )];
        let m = score_fleet(&items).unwrap();
        assert_eq!(m.false_negative, 1);
        assert_eq!(m.true_positive, 0);
    }

    #[test]
    fn failed_without_index_is_inconsistent() {
        let items = [(
            DetectionOutcome { detection_index: None },
            GroundTruth { failed: true, failure_index: None },
        )];
        assert!(matches!(
            score_fleet(&items),
            Err(DecisionError::InconsistentRecord(_))
        ));
    }

    #[test]
    fn quiet_healthy_fleet_is_all_true_negative() {
        let items: Vec<_> = (0..7)
            .map(|_| {
                (
                    DetectionOutcome { detection_index: None },
                    GroundTruth { failed: false, failure_index: None },
                )
            })
            .collect();
        let m = score_fleet(&items).unwrap();
        assert_eq!(m.true_negative, 7);
        assert_eq!(m.total(), 7);
    }

    #[test]
    fn single_rule_sweep_equals_direct_scoring() {
        let posteriors = vec![vec![0.2, 0.999, 0.9995, 0.9999, 0.9999], vec![0.1, 0.2, 0.3, 0.2, 0.1]];
        let truths = vec![
            GroundTruth { failed: true, failure_index: Some(10) },
            GroundTruth { failed: false, failure_index: None },
        ];
        let rows = sweep_rules(&posteriors, &truths, &[0.999], &[3], 1).unwrap();
        assert_eq!(rows.len(), 1);
        let direct: Vec<_> = posteriors
            .iter()
            .zip(truths.iter())
            .map(|(p, &t)| (detect(p, &rows[0].0).unwrap(), t))
            .collect();
        assert_eq!(rows[0].1, score_fleet(&direct).unwrap());
        assert_eq!(rows[0].1.true_positive, 1);
        assert_eq!(rows[0].1.true_negative, 1);

        assert!(matches!(
            sweep_rules(&posteriors, &truths, &[], &[3], 1),
            Err(DecisionError::EmptyGrid)
        ));
        assert!(matches!(
            sweep_rules(&posteriors, &truths[..1], &[0.9], &[3], 1),
            Err(DecisionError::LengthMismatch { .. })
        ));
        let table = render_sweep_table(&rows);
        assert!(table.contains("TP"));
        assert!(table.lines().count() >= 2);
    }

    #[test]
    fn monotonicity_smoke() {
        let probs = [0.2, 0.95, 0.97, 0.99, 0.5, 0.99, 0.995, 0.999];
        let lo = detect(&probs, &rule(0.9, 2)).unwrap().detection_index;
        let hi = detect(&probs, &rule(0.99, 2)).unwrap().detection_index;
        assert!(lo <= hi || hi.is_none(), "{lo:?} vs {hi:?}");
        let short = detect(&probs, &rule(0.9, 2)).unwrap().detection_index;
        let long = detect(&probs, &rule(0.9, 4)).unwrap().detection_index;
        match (short, long) {
            (Some(s), Some(l)) => assert!(s <= l),
            (None, Some(_)) => panic!("longer run detected where shorter did not"),
            _ => {}
        }
    }
}
