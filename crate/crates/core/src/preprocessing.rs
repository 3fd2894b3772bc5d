//! Logbook signal conditioning: temperature correction of raw cool-down
//! times by linear regression, then a trailing moving average. The output
//! series is what the filter consumes as its observation path.

use std::io;

use thiserror::Error;

use crate::csvfmt::fmt_scalar;
use crate::scalar::Scalar;

/// Trailing window length used when none is configured.
pub const DEFAULT_WINDOW: usize = 20;

/// Reference initial temperature (degrees C) the correction maps onto.
pub const DEFAULT_REFERENCE_TEMP: f64 = 10.0;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("all initial temperatures are equal; temperature regression is degenerate")]
    DegenerateRegression,
    #[error("need at least {need} points for the regression, got {got}")]
    TooFewPoints { got: usize, need: usize },
    #[error("series of length {got} is shorter than the window {need}")]
    SeriesTooShort { got: usize, need: usize },
    #[error("window must be >= 1")]
    BadWindow,
    #[error("non-finite input: {0}")]
    NonFinite(String),
}

/// Ordinary least squares of cool-down time on initial temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFit<T> {
    pub intercept: T,
    pub slope: T,
    pub n_points: usize,
    pub reference_temp: T,
}

impl<T: Scalar> RegressionFit<T> {
    pub fn with_reference_temp(mut self, reference_temp: T) -> Self {
        self.reference_temp = reference_temp;
        self
    }
}

/// Fit tmf = intercept + slope * initial_temp by least squares.
///
/// `points` are `(initial_temp, tmf)` pairs. The reference temperature of the
/// returned fit defaults to [`DEFAULT_REFERENCE_TEMP`].
pub fn fit_temperature_regression<T: Scalar>(
    points: &[(T, T)],
) -> Result<RegressionFit<T>, PreprocessError> {
    if points.len() < 2 {
        return Err(PreprocessError::TooFewPoints { got: points.len(), need: 2 });
    }
    for (k, &(t, y)) in points.iter().enumerate() {
        if !t.is_finite() || !y.is_finite() {
            return Err(PreprocessError::NonFinite(format!("point {k}: ({t}, {y})")));
        }
    }
    let n = T::of(points.len() as f64);
    let mean_t = points.iter().map(|&(t, _)| t).fold(T::zero(), |s, v| s + v) / n;
    let mean_y = points.iter().map(|&(_, y)| y).fold(T::zero(), |s, v| s + v) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(t, y) in points {
        let dt = t - mean_t;
        sxx = sxx + dt * dt;
        sxy = sxy + dt * (y - mean_y);
    }
    if sxx == T::zero() {
        return Err(PreprocessError::DegenerateRegression);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    Ok(RegressionFit {
        intercept,
        slope,
        n_points: points.len(),
        reference_temp: T::of(DEFAULT_REFERENCE_TEMP),
    })
}

/// Map one reading to the fit's reference temperature:
/// corrected = tmf - slope * (initial_temp - reference_temp).
pub fn correct_tmf<T: Scalar>(initial_temp: T, tmf: T, fit: &RegressionFit<T>) -> T {
    tmf - fit.slope * (initial_temp - fit.reference_temp)
}

/// Trailing moving average of the corrected series.
///
/// `values[k]` holds the smoothed value for (1-based) startup
/// `start_index + k`; the first defined point needs a full window of history,
/// so `start_index` equals the window length.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSeries<T> {
    start_index: usize,
    values: Vec<T>,
}

impl<T: Scalar> SmoothedSeries<T> {
    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 1-based startup index of `values[k]`.
    pub fn startup_index(&self, k: usize) -> usize {
        self.start_index + k
    }

    /// CSV with columns `startup_index,tmf_l`.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "startup_index,tmf_l")?;
        for (k, &v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.startup_index(k), fmt_scalar(v))?;
        }
        Ok(())
    }
}

/// Trailing moving average: output j is the plain mean of the `window` most
/// recent inputs ending at j. Each point is summed independently (no rolling
/// update), so no drift accumulates along the series.
pub fn smooth<T: Scalar>(values: &[T], window: usize) -> Result<SmoothedSeries<T>, PreprocessError> {
    if window == 0 {
        return Err(PreprocessError::BadWindow);
    }
    if values.len() < window {
        return Err(PreprocessError::SeriesTooShort { got: values.len(), need: window });
    }
    for (k, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(PreprocessError::NonFinite(format!("value {k}: {v}")));
        }
    }
    let inv = T::one() / T::of(window as f64);
    let mut out = Vec::with_capacity(values.len() - window + 1);
    for end in window..=values.len() {
        let mut s = T::zero();
        for &v in &values[end - window..end] {
            s = s + v;
        }
        out.push(s * inv);
    }
    Ok(SmoothedSeries { start_index: window, values: out })
}

/// Data hygiene before regression: drop readings whose cool-down time is
/// non-positive or non-finite (or whose temperature is non-finite), keeping
/// track of which original positions survived.
///
/// Returns the kept `(initial_temp, tmf)` pairs, the original index of each
/// kept pair, and the number dropped.
pub fn clean_points<T: Scalar>(points: &[(T, T)]) -> (Vec<(T, T)>, Vec<usize>, usize) {
    let mut kept = Vec::with_capacity(points.len());
    let mut kept_idx = Vec::with_capacity(points.len());
    let mut dropped = 0usize;
    for (k, &(t, y)) in points.iter().enumerate() {
        if t.is_finite() && y.is_finite() && y > T::zero() {
            kept.push((t, y));
            kept_idx.push(k);
        } else {
            dropped += 1;
        }
    }
    (kept, kept_idx, dropped)
}
