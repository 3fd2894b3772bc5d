//! Cumulative observation process on a uniform grid: per-state drift plus
//! Brownian noise, plus the wrapper for real preprocessed series.

use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::csvfmt::{fmt_scalar, parse_field};
use crate::markov_chain::ChainPath;
use crate::scalar::{Scalar, SimScalar};

#[derive(Debug, Error)]
pub enum ObservationError {
    #[error("invalid slope vector: {0}")]
    BadSlope(String),
    #[error("series too short: got {got} grid points, need {need}")]
    SeriesTooShort { got: usize, need: usize },
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("slope vector has {slopes} entries but the path has {states} states")]
    DimMismatch { slopes: usize, states: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Per-state drift of the observation process (`c_i` = slope while in state i).
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeVector<T> {
    c: Vec<T>,
}

impl<T: Scalar> SlopeVector<T> {
    pub fn new(c: Vec<T>) -> Result<Self, ObservationError> {
        if c.is_empty() {
            return Err(ObservationError::BadSlope("empty slope vector".into()));
        }
        for (i, &v) in c.iter().enumerate() {
            if !v.is_finite() {
                return Err(ObservationError::BadSlope(format!("component {i} is {v}")));
            }
        }
        Ok(Self { c })
    }

    pub fn two_state(c0: T, c1: T) -> Self {
        Self { c: vec![c0, c1] }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn get(&self, i: usize) -> T {
        self.c[i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.c
    }
}

/// Cumulative observations `y[k] = Y(t0 + k*dt)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries<T> {
    t0: T,
    dt: T,
    y: Vec<T>,
}

impl<T: Scalar> ObservationSeries<T> {
    /// Wrap preprocessed values as the cumulative process on a uniform grid.
    pub fn from_values(t0: T, dt: T, y: Vec<T>) -> Result<Self, ObservationError> {
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(ObservationError::BadGrid(format!("dt {dt} not positive")));
        }
        if !t0.is_finite() {
            return Err(ObservationError::BadGrid(format!("t0 {t0} not finite")));
        }
        if y.len() < 2 {
            return Err(ObservationError::SeriesTooShort { got: y.len(), need: 2 });
        }
        if let Some((k, &v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ObservationError::BadGrid(format!("value {v} at grid index {k}")));
        }
        Ok(Self { t0, dt, y })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[T] {
        &self.y
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + T::from_usize(k).unwrap() * self.dt
    }

    pub fn n_increments(&self) -> usize {
        self.y.len() - 1
    }

    /// `ΔY_k = y[k+1] - y[k]`.
    pub fn increment(&self, k: usize) -> T {
        self.y[k + 1] - self.y[k]
    }

    pub fn increments(&self) -> impl Iterator<Item = T> + '_ {
        self.y.windows(2).map(|w| w[1] - w[0])
    }

    /// CSV with columns `t,y`.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,y")?;
        for (k, &v) in self.y.iter().enumerate() {
            writeln!(w, "{},{}", fmt_scalar(self.time(k)), fmt_scalar(v))?;
        }
        Ok(())
    }

    /// Parse the `t,y` format back; the grid must be uniform.
    pub fn read_csv<R: io::BufRead>(r: R) -> Result<Self, ObservationError> {
        let mut times: Vec<T> = Vec::new();
        let mut values: Vec<T> = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if idx == 0 {
                if line.trim() != "t,y" {
                    return Err(ObservationError::Parse {
                        line: 1,
                        msg: format!("expected header `t,y`, got `{line}`"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut fields = line.split(',');
            let (Some(tf), Some(yf), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(ObservationError::Parse {
                    line: lineno,
                    msg: "expected exactly 2 columns".into(),
                });
            };
            times.push(
                parse_field(tf, "t").map_err(|msg| ObservationError::Parse { line: lineno, msg })?,
            );
            values.push(
                parse_field(yf, "y").map_err(|msg| ObservationError::Parse { line: lineno, msg })?,
            );
        }
        if times.len() < 2 {
            return Err(ObservationError::SeriesTooShort { got: times.len(), need: 2 });
        }
        let t0 = times[0];
        let dt = times[1] - times[0];
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(ObservationError::BadGrid(format!("grid step {dt} not positive")));
        }
        let tol = dt * T::of(1e-6);
        for (k, &t) in times.iter().enumerate() {
            let expected = t0 + T::from_usize(k).unwrap() * dt;
            if (t - expected).abs() > tol {
                return Err(ObservationError::BadGrid(format!(
                    "non-uniform grid at row {}: t={t}, expected {expected}",
                    k + 2
                )));
            }
        }
        Self::from_values(t0, dt, values)
    }
}

/// Euler-Maruyama simulation of the observation process along a chain path.
///
/// `Y(0) = 0` and `Y(t_{k+1}) = Y(t_k) + c(X_{t_k})*dt + noise_scale*sqrt(dt)*xi_k`
/// with independent standard normal `xi_k`; the chain is sampled at grid left
/// endpoints. `noise_scale = 0` gives the noiseless limit. Deterministic given
/// the seed.
pub fn simulate_observation<T: SimScalar>(
    path: &ChainPath<T>,
    c: &SlopeVector<T>,
    dt: T,
    noise_scale: T,
    seed: u64,
) -> Result<ObservationSeries<T>, ObservationError> {
    if c.dim() != path.n_states() {
        return Err(ObservationError::DimMismatch { slopes: c.dim(), states: path.n_states() });
    }
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(ObservationError::BadGrid(format!("dt {dt} not positive")));
    }
    if !(noise_scale.is_finite() && noise_scale >= T::zero()) {
        return Err(ObservationError::BadGrid(format!("noise scale {noise_scale} negative")));
    }
    let n_steps = (path.horizon() / dt).floor().to_usize().unwrap_or(0);
    if n_steps < 2 {
        return Err(ObservationError::SeriesTooShort { got: n_steps + 1, need: 3 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_dt = dt.sqrt();
    let mut y = Vec::with_capacity(n_steps + 1);
    y.push(T::zero());
    // Walk the jump times in lockstep with the grid instead of a binary
    // search per step.
    let jump_times = path.jump_times();
    let states = path.states();
    let mut seg = 0usize;
    let mut cur = T::zero();
    for k in 0..n_steps {
        let t_k = T::from_usize(k).unwrap() * dt;
        while seg < jump_times.len() && jump_times[seg] <= t_k {
            seg += 1;
        }
        let state = states[seg];
        let mut next = cur + c.get(state) * dt;
        if noise_scale > T::zero() {
            next = next + noise_scale * sqrt_dt * T::std_normal(&mut rng);
        }
        y.push(next);
        cur = next;
    }
    ObservationSeries::from_values(T::zero(), dt, y)
}
