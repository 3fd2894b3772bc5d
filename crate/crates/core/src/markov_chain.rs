//! Finite-state continuous-time Markov chains: generator validation, exact
//! jump-chain simulation, transition matrices, and the forward law.
//!
//! Convention: generators are row-stochastic in rates. `a[i][j]` with `i != j`
//! is the jump rate i -> j, rows sum to zero, and the law of the chain evolves
//! as `dp/dt = p A` for row vectors `p`. Code that propagates column vectors
//! (the filter) applies the transpose.

use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::csvfmt::fmt_scalar;
use crate::scalar::{Scalar, SimScalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state space needs at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("expected {expected} entries for a {n}x{n} matrix, got {got}")]
    BadShape { n: usize, expected: usize, got: usize },
    #[error("row {row} is not a generator row: {reason}")]
    NonGenerator { row: usize, reason: String },
    #[error("invalid initial law: {0}")]
    BadLaw(String),
    #[error("invalid chain path: {0}")]
    BadPath(String),
    #[error("state index {state} out of range for {n} states")]
    StateOutOfRange { state: usize, n: usize },
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid argument: {0}")]
    BadArgument(String),
}

/// Labeled finite state space; states are indices into the label list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self, ModelError> {
        if labels.len() < 2 {
            return Err(ModelError::TooFewStates(labels.len()));
        }
        Ok(Self { labels })
    }

    /// The two-state space used by the degradation model.
    pub fn stable_degraded() -> Self {
        Self { labels: vec!["stable".into(), "degraded".into()] }
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }
}

/// Row-convention generator (Q-matrix) of a continuous-time chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> GeneratorMatrix<T> {
    /// Validate and wrap a row-major `n x n` rate matrix.
    ///
    /// Off-diagonal entries must be nonnegative and each row must sum to zero
    /// within `T::sum_tol()`.
    pub fn new(n: usize, entries: Vec<T>) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::TooFewStates(n));
        }
        if entries.len() != n * n {
            return Err(ModelError::BadShape { n, expected: n * n, got: entries.len() });
        }
        for i in 0..n {
            let row = &entries[i * n..(i + 1) * n];
            let mut sum = T::zero();
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ModelError::NonGenerator {
                        row: i,
                        reason: format!("non-finite entry at column {j}"),
                    });
                }
                if j != i && v < T::zero() {
                    return Err(ModelError::NonGenerator {
                        row: i,
                        reason: format!("negative off-diagonal rate at column {j}"),
                    });
                }
                sum = sum + v;
            }
            if sum.abs() > T::sum_tol() {
                return Err(ModelError::NonGenerator {
                    row: i,
                    reason: format!("row sums to {sum}, not 0"),
                });
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, ModelError> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(ModelError::BadShape { n, expected: n * n, got: r.len() * n });
            }
        }
        Self::new(n, rows.iter().flatten().copied().collect())
    }

    /// Two-state generator with rate `up` for 0 -> 1 and `down` for 1 -> 0.
    pub fn two_state(up: T, down: T) -> Result<Self, ModelError> {
        Self::new(2, vec![-up, up, down, -down])
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn rate(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Total exit rate from state i (`-a_ii`).
    pub fn exit_rate(&self, i: usize) -> T {
        -self.rate(i, i)
    }

    /// `out = A^T v` — how the filtering recursions apply the generator to
    /// column vectors.
    pub fn transpose_apply(&self, v: &[T], out: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for x in out.iter_mut() {
            *x = T::zero();
        }
        for (j, &vj) in v.iter().enumerate() {
            let row = self.row(j);
            for (i, o) in out.iter_mut().enumerate() {
                *o = *o + row[i] * vj;
            }
        }
    }
}

/// Probability distribution over states.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialLaw<T> {
    probs: Vec<T>,
}

impl<T: Scalar> InitialLaw<T> {
    /// Nonnegative components summing to 1 within `T::sum_tol()`.
    pub fn new(probs: Vec<T>) -> Result<Self, ModelError> {
        if probs.len() < 2 {
            return Err(ModelError::TooFewStates(probs.len()));
        }
        let mut sum = T::zero();
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < T::zero() {
                return Err(ModelError::BadLaw(format!("component {i} is {p}")));
            }
            sum = sum + p;
        }
        if (sum - T::one()).abs() > T::sum_tol() {
            return Err(ModelError::BadLaw(format!("components sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::TooFewStates(n));
        }
        let w = T::one() / T::from_usize(n).unwrap();
        Ok(Self { probs: vec![w; n] })
    }

    pub fn point_mass(n: usize, state: usize) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::TooFewStates(n));
        }
        if state >= n {
            return Err(ModelError::StateOutOfRange { state, n });
        }
        let mut probs = vec![T::zero(); n];
        probs[state] = T::one();
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }
}

/// Piecewise-constant sample path of the chain.
///
/// `states[k]` holds on `[jump_times[k-1], jump_times[k])` with the convention
/// `jump_times[-1] = 0`; the path is right-continuous at jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath<T> {
    n_states: usize,
    states: Vec<usize>,
    jump_times: Vec<T>,
    horizon: T,
}

impl<T: Scalar> ChainPath<T> {
    pub fn new(
        n_states: usize,
        states: Vec<usize>,
        jump_times: Vec<T>,
        horizon: T,
    ) -> Result<Self, ModelError> {
        if n_states < 2 {
            return Err(ModelError::TooFewStates(n_states));
        }
        if !(horizon.is_finite() && horizon > T::zero()) {
            return Err(ModelError::BadPath(format!("horizon {horizon} not positive")));
        }
        if states.len() != jump_times.len() + 1 {
            return Err(ModelError::BadPath(format!(
                "{} states for {} jumps",
                states.len(),
                jump_times.len()
            )));
        }
        for &s in &states {
            if s >= n_states {
                return Err(ModelError::StateOutOfRange { state: s, n: n_states });
            }
        }
        for w in states.windows(2) {
            if w[0] == w[1] {
                return Err(ModelError::BadPath("recorded jump does not change the state".into()));
            }
        }
        let mut prev = T::zero();
        for &t in &jump_times {
            if !(t.is_finite() && t > prev && t <= horizon) {
                return Err(ModelError::BadPath(format!(
                    "jump time {t} not strictly increasing within (0, {horizon}]"
                )));
            }
            prev = t;
        }
        Ok(Self { n_states, states, jump_times, horizon })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn jump_times(&self) -> &[T] {
        &self.jump_times
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// Path value at `t`, right-continuous.
    pub fn state_at(&self, t: T) -> Result<usize, ModelError> {
        if !(t >= T::zero() && t <= self.horizon) {
            return Err(ModelError::TimeOutOfRange {
                t: t.to_f64().unwrap_or(f64::NAN),
                horizon: self.horizon.to_f64().unwrap_or(f64::NAN),
            });
        }
        let k = self.jump_times.partition_point(|&jt| jt <= t);
        Ok(self.states[k])
    }

    /// `(start, end, state)` triples covering `[0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = (T, T, usize)> + '_ {
        (0..self.states.len()).map(move |k| {
            let start = if k == 0 { T::zero() } else { self.jump_times[k - 1] };
            let end = if k < self.jump_times.len() { self.jump_times[k] } else { self.horizon };
            (start, end, self.states[k])
        })
    }

    /// CSV with columns `t_jump,state_index`; the initial state is written as
    /// a first row with t_jump = 0.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_jump,state_index")?;
        writeln!(w, "{},{}", fmt_scalar(T::zero()), self.states[0])?;
        for (k, &t) in self.jump_times.iter().enumerate() {
            writeln!(w, "{},{}", fmt_scalar(t), self.states[k + 1])?;
        }
        Ok(())
    }
}

/// Exact jump-chain / holding-time simulation.
///
/// Holding time in state i is exponential with rate `-a_ii`; the next state j
/// is drawn with probability `a_ij / (-a_ii)`. Absorbing states (zero exit
/// rate) hold forever; the path truncates at the horizon. Deterministic given
/// the seed.
pub fn simulate_chain<T: SimScalar>(
    a: &GeneratorMatrix<T>,
    initial: usize,
    horizon: T,
    seed: u64,
) -> Result<ChainPath<T>, ModelError> {
    let n = a.n_states();
    if initial >= n {
        return Err(ModelError::StateOutOfRange { state: initial, n });
    }
    if !(horizon.is_finite() && horizon > T::zero()) {
        return Err(ModelError::BadArgument(format!("horizon {horizon} not positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = vec![initial];
    let mut jump_times = Vec::new();
    let mut cur = initial;
    let mut t = T::zero();
    loop {
        let rate = a.exit_rate(cur);
        if rate <= T::zero() {
            break;
        }
        t = t + T::unit_exp(&mut rng) / rate;
        if t > horizon {
            break;
        }
        // Draw the destination proportional to the off-diagonal rates.
        let mut u = T::open01(&mut rng) * rate;
        let mut next = cur;
        for j in 0..n {
            if j == cur {
                continue;
            }
            let r = a.rate(cur, j);
            if r <= T::zero() {
                continue;
            }
            next = j;
            if u <= r {
                break;
            }
            u = u - r;
        }
        jump_times.push(t);
        states.push(next);
        cur = next;
    }
    ChainPath::new(n, states, jump_times, horizon)
}

/// Row-stochastic transition matrix `exp(t A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> TransitionMatrix<T> {
    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    /// `out = v P` for a row vector; equivalently `out = P^T v` for a column
    /// vector, which is how the filter uses it.
    pub fn apply_left(&self, v: &[T], out: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for x in out.iter_mut() {
            *x = T::zero();
        }
        for (j, &vj) in v.iter().enumerate() {
            let row = &self.entries[j * n..(j + 1) * n];
            for (i, o) in out.iter_mut().enumerate() {
                *o = *o + vj * row[i];
            }
        }
    }

    fn identity(n: usize) -> Self {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = T::one();
        }
        Self { n, entries }
    }

    fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = self.entries[i * n + k];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..n {
                    entries[i * n + j] = entries[i * n + j] + aik * other.entries[k * n + j];
                }
            }
        }
        Self { n, entries }
    }

    fn clamp_and_renormalize_rows(&mut self) {
        let n = self.n;
        for i in 0..n {
            let row = &mut self.entries[i * n..(i + 1) * n];
            let mut sum = T::zero();
            for v in row.iter_mut() {
                if *v < T::zero() {
                    *v = T::zero();
                }
                sum = sum + *v;
            }
            if sum > T::zero() {
                for v in row.iter_mut() {
                    *v = *v / sum;
                }
            }
        }
    }
}

// Largest uniformization intensity handled in one series evaluation; beyond
// this the exponential is split and squared so Poisson weights stay
// representable (also in f32).
const UNIFORMIZATION_CAP: f64 = 30.0;

/// `exp(t A)` by uniformization, with scaling-and-squaring for large `t`.
/// Rows are clamped to [0, 1] and renormalized to sum 1.
pub fn transition_matrix<T: Scalar>(
    a: &GeneratorMatrix<T>,
    t: T,
) -> Result<TransitionMatrix<T>, ModelError> {
    if !(t.is_finite() && t >= T::zero()) {
        return Err(ModelError::BadArgument(format!("time {t} not a finite nonnegative real")));
    }
    let n = a.n_states();
    let mut lambda = T::zero();
    for i in 0..n {
        lambda = lambda.max(a.exit_rate(i));
    }
    if lambda <= T::zero() || t == T::zero() {
        return Ok(TransitionMatrix::identity(n));
    }

    let cap = T::of(UNIFORMIZATION_CAP);
    let mut squarings = 0u32;
    let mut step = t;
    while lambda * step > cap {
        step = step / (T::one() + T::one());
        squarings += 1;
    }

    // M = I + A/lambda is stochastic; exp(step*A) = sum_k Pois(lambda*step)(k) M^k.
    let mut m = TransitionMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            m.entries[i * n + j] = m.entries[i * n + j] + a.rate(i, j) / lambda;
        }
    }
    let q = lambda * step;
    let mut weight = (-q).exp();
    let mut acc = weight;
    let mut term = TransitionMatrix::identity(n);
    let mut sum = TransitionMatrix::identity(n);
    for e in sum.entries.iter_mut() {
        *e = *e * weight;
    }
    let mut k = T::zero();
    while T::one() - acc > T::expm_tol() {
        k = k + T::one();
        term = term.matmul(&m);
        weight = weight * q / k;
        if weight == T::zero() {
            break;
        }
        for (s, v) in sum.entries.iter_mut().zip(term.entries.iter()) {
            *s = *s + weight * *v;
        }
        acc = acc + weight;
    }
    sum.clamp_and_renormalize_rows();

    for _ in 0..squarings {
        sum = sum.matmul(&sum);
        sum.clamp_and_renormalize_rows();
    }
    Ok(sum)
}

/// Law of the chain at time `t`: `p_t = p_0 exp(t A)`, renormalized to sum 1.
pub fn forward_law<T: Scalar>(
    a: &GeneratorMatrix<T>,
    p0: &InitialLaw<T>,
    t: T,
) -> Result<InitialLaw<T>, ModelError> {
    if p0.dim() != a.n_states() {
        return Err(ModelError::DimMismatch(format!(
            "law has {} components, generator has {} states",
            p0.dim(),
            a.n_states()
        )));
    }
    let p = transition_matrix(a, t)?;
    let mut out = vec![T::zero(); a.n_states()];
    p.apply_left(p0.probs(), &mut out);
    let mut sum = T::zero();
    for v in out.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
        sum = sum + *v;
    }
    for v in out.iter_mut() {
        *v = *v / sum;
    }
    Ok(InitialLaw { probs: out })
}
