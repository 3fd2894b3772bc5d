//! Unnormalized (Zakai) filtering of the hidden chain given cumulative
//! observations, together with the auxiliary recursions for jump counts,
//! occupation times, and observation drift that feed parameter estimation.
//!
//! All recursions are propagated in a per-step renormalized basis: the
//! emitted posterior `q` always sums to 1 and the accumulated log of the
//! normalization mass lives in `log_norm`. Ratios of filtered functionals are
//! invariant to this rescaling.

use std::io;

use thiserror::Error;

use crate::csvfmt::fmt_scalar;
use crate::markov_chain::{transition_matrix, InitialLaw, ModelError, TransitionMatrix};
use crate::observation::{ObservationSeries, SlopeVector};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("numerical blowup at step {step}: {what}")]
    NumericalBlowup { step: u64, what: String },
    #[error("invalid filter configuration: {0}")]
    BadConfig(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("noise scale must be positive and finite, got {0}")]
    BadNoiseScale(f64),
    #[error("grid step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Discretization scheme for the filtering recursions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Direct Euler discretization of the linear stochastic recursions.
    /// Can produce negative unnormalized mass at large increments.
    Euler,
    /// Exponential splitting: exact generator transport `exp(A^T dt)` with
    /// explicit Gaussian likelihood weights. Default; positive by construction.
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig<T> {
    pub scheme: Scheme,
    /// Cadence (in steps) at which the auxiliary arrays are rescaled.
    pub renormalize_every: usize,
    /// Posterior components are floored at `clamp_eps * max_component` before
    /// renormalization; each flooring is counted on the state.
    pub clamp_eps: T,
}

impl<T: Scalar> Default for FilterConfig<T> {
    fn default() -> Self {
        Self { scheme: Scheme::Robust, renormalize_every: 1, clamp_eps: T::of(1e-6) }
    }
}

impl<T: Scalar> FilterConfig<T> {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.renormalize_every == 0 {
            return Err(FilterError::BadConfig("renormalize_every must be >= 1".into()));
        }
        if !(self.clamp_eps > T::zero() && self.clamp_eps <= T::of(1e-3)) {
            return Err(FilterError::BadConfig(format!(
                "clamp_eps {} outside (0, 1e-3]",
                self.clamp_eps
            )));
        }
        Ok(())
    }
}

/// Running filter state.
///
/// `q` is the normalized posterior. The auxiliary arrays hold, per functional
/// and state component, the unnormalized filtered value in the internally
/// rescaled basis; `reduce_functionals` contracts them against the ones
/// vector at a consistent scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState<T> {
    n: usize,
    q: Vec<T>,
    log_norm: T,
    /// Elapsed filtering time.
    t: T,
    /// `jump_aux[(i*n + j)*n + k]`: component k of the filtered i->j jump-count vector.
    jump_aux: Vec<T>,
    /// `occ_aux[i*n + k]`: component k of the filtered state-i occupation vector.
    occ_aux: Vec<T>,
    /// `drift_aux[i*n + k]`: component k of the filtered state-i drift vector.
    drift_aux: Vec<T>,
    /// Product of per-step normalizers not yet folded into the aux arrays.
    pending: T,
    steps: u64,
    clamp_events: u64,
}

impl<T: Scalar> FilterState<T> {
    pub fn n_states(&self) -> usize {
        self.n
    }

    /// Normalized posterior; sums to 1.
    pub fn q(&self) -> &[T] {
        &self.q
    }

    /// Accumulated log of the total unnormalized mass.
    pub fn log_norm(&self) -> T {
        self.log_norm
    }

    /// Elapsed filtering time.
    pub fn t(&self) -> T {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of posterior components floored by clamp_eps so far.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// Contract the auxiliary arrays against the ones vector, rescaled so the
    /// values are directly comparable as ratios (the total mass is 1).
    pub fn reduce_functionals(&self) -> ReducedFunctionals<T> {
        let n = self.n;
        let contract = |block: &[T]| -> T {
            let mut s = T::zero();
            for &v in block {
                s = s + v;
            }
            s / self.pending
        };
        let mut jump = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    jump[i * n + j] = contract(&self.jump_aux[(i * n + j) * n..(i * n + j + 1) * n]);
                }
            }
        }
        let occupation: Vec<T> =
            (0..n).map(|i| contract(&self.occ_aux[i * n..(i + 1) * n])).collect();
        let drift: Vec<T> = (0..n).map(|i| contract(&self.drift_aux[i * n..(i + 1) * n])).collect();
        ReducedFunctionals { n, jump, occupation, drift }
    }
}

/// Filtered functionals contracted against the ones vector, normalized by the
/// total mass: jump counts, occupation times, and accumulated drift.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFunctionals<T> {
    n: usize,
    jump: Vec<T>,
    occupation: Vec<T>,
    drift: Vec<T>,
}

impl<T: Scalar> ReducedFunctionals<T> {
    pub fn n_states(&self) -> usize {
        self.n
    }

    /// Filtered number of i -> j jumps.
    pub fn jump_count(&self, i: usize, j: usize) -> T {
        self.jump[i * self.n + j]
    }

    /// Filtered time spent in state i.
    pub fn occupation(&self, i: usize) -> T {
        self.occupation[i]
    }

    /// Filtered observation increment accumulated while in state i.
    pub fn drift(&self, i: usize) -> T {
        self.drift[i]
    }
}

/// Posterior path over a whole observation series.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrajectory<T> {
    times: Vec<T>,
    posterior: Vec<Vec<T>>,
    terminal: FilterState<T>,
}

impl<T: Scalar> FilterTrajectory<T> {
    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// One normalized posterior vector per grid point.
    pub fn posterior(&self) -> &[Vec<T>] {
        &self.posterior
    }

    pub fn terminal(&self) -> &FilterState<T> {
        &self.terminal
    }

    pub fn n_states(&self) -> usize {
        self.terminal.n
    }

    /// Posterior probability of one state along the grid.
    pub fn state_probs(&self, state: usize) -> Vec<T> {
        self.posterior.iter().map(|p| p[state]).collect()
    }

    /// CSV with columns `t,p_state_0,...,p_state_{N-1}`.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for i in 0..self.n_states() {
            write!(w, ",p_state_{i}")?;
        }
        writeln!(w)?;
        for (t, p) in self.times.iter().zip(self.posterior.iter()) {
            write!(w, "{}", fmt_scalar(*t))?;
            for &v in p {
                write!(w, ",{}", fmt_scalar(v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Scratch buffers and the per-grid-step transition operator.
struct StepOp<T> {
    dt: T,
    trans: Option<TransitionMatrix<T>>,
    q_pre: Vec<T>,
    tmp: Vec<T>,
    psi: Vec<T>,
}

/// The filter: model parameters plus configuration.
#[derive(Debug, Clone)]
pub struct ZakaiFilter<T> {
    a: crate::markov_chain::GeneratorMatrix<T>,
    c: SlopeVector<T>,
    noise_scale: T,
    cfg: FilterConfig<T>,
}

impl<T: Scalar> ZakaiFilter<T> {
    pub fn new(
        a: crate::markov_chain::GeneratorMatrix<T>,
        c: SlopeVector<T>,
        noise_scale: T,
        cfg: FilterConfig<T>,
    ) -> Result<Self, FilterError> {
        if c.dim() != a.n_states() {
            return Err(FilterError::DimMismatch(format!(
                "slope vector has {} entries, generator has {} states",
                c.dim(),
                a.n_states()
            )));
        }
        if !(noise_scale.is_finite() && noise_scale > T::zero()) {
            return Err(FilterError::BadNoiseScale(noise_scale.to_f64().unwrap_or(f64::NAN)));
        }
        cfg.validate()?;
        Ok(Self { a, c, noise_scale, cfg })
    }

    pub fn generator(&self) -> &crate::markov_chain::GeneratorMatrix<T> {
        &self.a
    }

    pub fn slopes(&self) -> &SlopeVector<T> {
        &self.c
    }

    pub fn noise_scale(&self) -> T {
        self.noise_scale
    }

    pub fn config(&self) -> &FilterConfig<T> {
        &self.cfg
    }

    /// Fresh state: posterior = p0, auxiliaries zero, elapsed time zero.
    pub fn init(&self, p0: &InitialLaw<T>) -> Result<FilterState<T>, FilterError> {
        let n = self.a.n_states();
        if p0.dim() != n {
            return Err(FilterError::DimMismatch(format!(
                "initial law has {} components, generator has {} states",
                p0.dim(),
                n
            )));
        }
        Ok(FilterState {
            n,
            q: p0.probs().to_vec(),
            log_norm: T::zero(),
            t: T::zero(),
            jump_aux: vec![T::zero(); n * n * n],
            occ_aux: vec![T::zero(); n * n],
            drift_aux: vec![T::zero(); n * n],
            pending: T::one(),
            steps: 0,
            clamp_events: 0,
        })
    }

    fn make_op(&self, dt: T) -> Result<StepOp<T>, FilterError> {
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(FilterError::BadStep(dt.to_f64().unwrap_or(f64::NAN)));
        }
        let n = self.a.n_states();
        let trans = match self.cfg.scheme {
            Scheme::Euler => None,
            Scheme::Robust => Some(transition_matrix(&self.a, dt)?),
        };
        Ok(StepOp {
            dt,
            trans,
            q_pre: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
            psi: vec![T::zero(); n],
        })
    }

    /// Advance one grid step with observation increment `dy`.
    pub fn step(&self, state: &FilterState<T>, dy: T, dt: T) -> Result<FilterState<T>, FilterError> {
        let mut op = self.make_op(dt)?;
        let mut next = state.clone();
        self.advance(&mut next, dy, &mut op)?;
        Ok(next)
    }

    /// Run over a whole series, returning the posterior path.
    pub fn run(
        &self,
        series: &ObservationSeries<T>,
        p0: &InitialLaw<T>,
    ) -> Result<FilterTrajectory<T>, FilterError> {
        let mut st = self.init(p0)?;
        let mut op = self.make_op(series.dt())?;
        let m = series.len();
        let mut times = Vec::with_capacity(m);
        let mut posterior = Vec::with_capacity(m);
        times.push(series.time(0));
        posterior.push(st.q.clone());
        for k in 0..series.n_increments() {
            self.advance(&mut st, series.increment(k), &mut op)?;
            times.push(series.time(k + 1));
            posterior.push(st.q.clone());
        }
        Ok(FilterTrajectory { times, posterior, terminal: st })
    }

    /// Run over a whole series keeping only the terminal state (no posterior
    /// path storage) — what iterative estimation needs.
    pub fn run_terminal(
        &self,
        series: &ObservationSeries<T>,
        p0: &InitialLaw<T>,
    ) -> Result<FilterState<T>, FilterError> {
        let mut st = self.init(p0)?;
        let mut op = self.make_op(series.dt())?;
        for k in 0..series.n_increments() {
            self.advance(&mut st, series.increment(k), &mut op)?;
        }
        Ok(st)
    }

    fn advance(&self, st: &mut FilterState<T>, dy: T, op: &mut StepOp<T>) -> Result<(), FilterError> {
        let n = st.n;
        let dt = op.dt;
        let inv2 = T::one() / (self.noise_scale * self.noise_scale);
        let pending = st.pending;
        op.q_pre.copy_from_slice(&st.q);

        match self.cfg.scheme {
            Scheme::Euler => {
                // sigma_{k+1} = sigma_k + A^T sigma_k dt + C sigma_k dy,
                // C = diag(c)/noise_scale^2; sources added from the pre-step
                // posterior.
                let dy_l = dy * inv2;
                let euler_vec = |a: &crate::markov_chain::GeneratorMatrix<T>,
                                 c: &SlopeVector<T>,
                                 v: &mut [T],
                                 tmp: &mut [T]| {
                    a.transpose_apply(v, tmp);
                    for i in 0..n {
                        v[i] = v[i] + dt * tmp[i] + dy_l * c.get(i) * v[i];
                    }
                };
                euler_vec(&self.a, &self.c, &mut st.q, &mut op.tmp);
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let block = &mut st.jump_aux[(i * n + j) * n..(i * n + j + 1) * n];
                        euler_vec(&self.a, &self.c, block, &mut op.tmp);
                        // Jump-count source: mass a_ij * sigma_i enters at the
                        // destination state j.
                        block[j] = block[j] + pending * dt * self.a.rate(i, j) * op.q_pre[i];
                    }
                }
                for i in 0..n {
                    let block = &mut st.occ_aux[i * n..(i + 1) * n];
                    euler_vec(&self.a, &self.c, block, &mut op.tmp);
                    block[i] = block[i] + pending * dt * op.q_pre[i];
                }
                for i in 0..n {
                    let block = &mut st.drift_aux[i * n..(i + 1) * n];
                    euler_vec(&self.a, &self.c, block, &mut op.tmp);
                    // dt source carries c_i; the dy source enters unscaled.
                    block[i] = block[i] + pending * (self.c.get(i) * dt + dy) * op.q_pre[i];
                }
            }
            Scheme::Robust => {
                // Standard forward-algorithm splitting: transport by
                // exp(A^T dt), then reweight by the Gaussian likelihood Psi
                // of the increment at the destination state. Attaching the
                // emission after the transition keeps the posterior fully
                // informed by the newest increment, which matters on coarse
                // grids (per-startup filtering): the reverse order caps the
                // reachable posterior at 1 - a_ji*dt no matter how strong
                // the evidence is. The weights are defined up to a common
                // factor (absorbed by renormalization), so the max exponent
                // is subtracted before exponentiating and re-added to
                // log_norm.
                let trans = op.trans.as_ref().expect("robust scheme has a transition matrix");
                let half = T::of(0.5);
                let mut max_g = T::neg_infinity();
                for i in 0..n {
                    let ci = self.c.get(i);
                    let g = ci * dy * inv2 - ci * ci * dt * inv2 * half;
                    op.psi[i] = g;
                    max_g = max_g.max(g);
                }
                if !max_g.is_finite() {
                    return Err(FilterError::NumericalBlowup {
                        step: st.steps + 1,
                        what: format!("likelihood exponent {max_g}"),
                    });
                }
                for g in op.psi.iter_mut() {
                    *g = (*g - max_g).exp();
                }

                let robust_vec = |v: &mut [T], psi: &[T], tmp: &mut [T]| {
                    trans.apply_left(v, tmp);
                    for i in 0..n {
                        v[i] = psi[i] * tmp[i];
                    }
                };

                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let block = &mut st.jump_aux[(i * n + j) * n..(i * n + j + 1) * n];
                        block[j] = block[j] + pending * dt * self.a.rate(i, j) * op.q_pre[i];
                        robust_vec(block, &op.psi, &mut op.tmp);
                    }
                }
                for i in 0..n {
                    let block = &mut st.occ_aux[i * n..(i + 1) * n];
                    block[i] = block[i] + pending * dt * op.q_pre[i];
                    robust_vec(block, &op.psi, &mut op.tmp);
                }
                for i in 0..n {
                    let block = &mut st.drift_aux[i * n..(i + 1) * n];
                    // Plain dy here: the likelihood weight applied right
                    // after already supplies the c_i*dt cross-variation
                    // (psi_i * dy carries an extra c_i*dy^2/noise^2 term
                    // whose mean is c_i*dt), so adding it explicitly as in
                    // the Euler form would double-count it.
                    block[i] = block[i] + pending * dy * op.q_pre[i];
                    robust_vec(block, &op.psi, &mut op.tmp);
                }
                robust_vec(&mut st.q, &op.psi, &mut op.tmp);
                st.log_norm = st.log_norm + max_g;
            }
        }

        // Clamp, renormalize, fold.
        let mut mx = T::neg_infinity();
        for &v in st.q.iter() {
            mx = mx.max(v);
        }
        if !(mx.is_finite() && mx > T::zero()) {
            return Err(FilterError::NumericalBlowup {
                step: st.steps + 1,
                what: format!("max posterior mass {mx}"),
            });
        }
        let floor = self.cfg.clamp_eps * mx;
        let mut mass = T::zero();
        for v in st.q.iter_mut() {
            if *v < floor {
                *v = floor;
                st.clamp_events += 1;
            }
            mass = mass + *v;
        }
        if !mass.is_finite() {
            return Err(FilterError::NumericalBlowup {
                step: st.steps + 1,
                what: format!("posterior mass {mass}"),
            });
        }
        for v in st.q.iter_mut() {
            *v = *v / mass;
        }
        st.log_norm = st.log_norm + mass.ln();
        st.pending = st.pending * mass;
        st.steps += 1;
        st.t = st.t + dt;

        let cap = T::max_value().sqrt();
        if st.steps % self.cfg.renormalize_every as u64 == 0
            || st.pending > cap
            || st.pending < T::one() / cap
        {
            let p = st.pending;
            for v in st
                .jump_aux
                .iter_mut()
                .chain(st.occ_aux.iter_mut())
                .chain(st.drift_aux.iter_mut())
            {
                *v = *v / p;
            }
            st.pending = T::one();
        }

        for &v in st.jump_aux.iter().chain(st.occ_aux.iter()).chain(st.drift_aux.iter()) {
            if !v.is_finite() {
                return Err(FilterError::NumericalBlowup {
                    step: st.steps,
                    what: format!("auxiliary value {v}"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov_chain::GeneratorMatrix;

    fn zero_gen() -> GeneratorMatrix<f64> {
        GeneratorMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap()
    }

    fn law(p: &[f64]) -> InitialLaw<f64> {
        InitialLaw::new(p.to_vec()).unwrap()
    }

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn init_copies_law_and_zeroes_aux() {
        for p in [[1.0, 0.0], [0.5, 0.5], [0.99, 0.01]] {
            let f = ZakaiFilter::new(
                zero_gen(),
                SlopeVector::two_state(-1.0, 1.0),
                1.0,
                FilterConfig::default(),
            )
            .unwrap();
            let st = f.init(&law(&p)).unwrap();
            assert_eq!(st.q(), &p);
            assert_eq!(st.log_norm(), 0.0);
            assert_eq!(st.t(), 0.0);
            let red = st.reduce_functionals();
            assert_eq!(red.jump_count(0, 1), 0.0);
            assert_eq!(red.occupation(0), 0.0);
            assert_eq!(red.drift(1), 0.0);
        }
    }

    #[test]
    fn uninformative_slopes_leave_posterior_unchanged() {
        for scheme in [Scheme::Euler, Scheme::Robust] {
            let cfg = FilterConfig { scheme, ..FilterConfig::default() };
            let f =
                ZakaiFilter::new(zero_gen(), SlopeVector::two_state(0.7, 0.7), 1.0, cfg).unwrap();
            let st = f.init(&law(&[0.3, 0.7])).unwrap();
            for dy in [-0.5, 0.0, 0.37] {
                let next = f.step(&st, dy, 0.01).unwrap();
                assert!(approx(next.q()[0], 0.3, 1e-14), "{scheme:?} dy={dy}: {:?}", next.q());
                assert!(approx(next.q()[1], 0.7, 1e-14));
            }
        }
    }

    #[test]
    fn one_step_robust_matches_hand_oracle() {
        // A=0, c=(-1,1), noise 1, q=(0.5,0.5), dy=0.5, dt=0.01:
        // q' proportional to (0.5*exp(-0.5-0.005), 0.5*exp(0.5-0.005)).
        let f = ZakaiFilter::new(
            zero_gen(),
            SlopeVector::two_state(-1.0, 1.0),
            1.0,
            FilterConfig::default(),
        )
        .unwrap();
        let st = f.init(&law(&[0.5, 0.5])).unwrap();
        let next = f.step(&st, 0.5, 0.01).unwrap();
        let w0 = 0.5 * (-0.5f64 - 0.005).exp();
        let w1 = 0.5 * (0.5f64 - 0.005).exp();
        assert!(approx(next.q()[0], w0 / (w0 + w1), 1e-14), "{:?}", next.q());
        assert!(approx(next.q()[1], w1 / (w0 + w1), 1e-14));
        // log_norm holds the full unnormalized mass.
        assert!(approx(next.log_norm(), (w0 + w1).ln(), 1e-14));
        assert!(next.q()[1] > 0.7, "posterior tilts toward state 2");
    }

    #[test]
    fn zero_increments_favor_zero_slope_state() {
        let f = ZakaiFilter::new(
            zero_gen(),
            SlopeVector::two_state(0.0, 1.0),
            1.0,
            FilterConfig::default(),
        )
        .unwrap();
        let series = ObservationSeries::from_values(0.0, 0.1, vec![0.0; 200]).unwrap();
        let traj = f.run(&series, &law(&[0.5, 0.5])).unwrap();
        let last = traj.posterior().last().unwrap();
        assert!(last[0] > 0.99, "drift-0 observations favor the zero-slope state: {last:?}");
    }

    #[test]
    fn uninformative_slopes_constant_over_series() {
        let f = ZakaiFilter::new(
            zero_gen(),
            SlopeVector::two_state(0.4, 0.4),
            1.0,
            FilterConfig::default(),
        )
        .unwrap();
        let series =
            ObservationSeries::from_values(0.0, 0.1, (0..100).map(|k| (k as f64).sin()).collect())
                .unwrap();
        let traj = f.run(&series, &law(&[0.25, 0.75])).unwrap();
        for p in traj.posterior() {
            assert!(approx(p[0], 0.25, 1e-12));
        }
    }

    #[test]
    fn euler_negative_mass_is_clamped_and_counted() {
        let cfg = FilterConfig { scheme: Scheme::Euler, ..FilterConfig::default() };
        let f = ZakaiFilter::new(zero_gen(), SlopeVector::two_state(-1.0, 1.0), 1.0, cfg).unwrap();
        let st = f.init(&law(&[0.5, 0.5])).unwrap();
        // dy = 2 makes the state-1 factor (1 + dy*c_0) negative.
        let next = f.step(&st, 2.0, 0.01).unwrap();
        assert_eq!(next.clamp_events(), 1);
        assert!(next.q()[0] > 0.0 && next.q().iter().sum::<f64>() > 0.999999999);
    }

    #[test]
    fn blowup_reports_step_index() {
        // With both slopes negative, an increment with dy*c/noise^2 < -1
        // flips the sign of every Euler-updated component: the total mass
        // goes negative, which must surface as an error, not a panic.
        let cfg = FilterConfig { scheme: Scheme::Euler, ..FilterConfig::default() };
        let f = ZakaiFilter::new(zero_gen(), SlopeVector::two_state(-1.0, -1.0), 1.0, cfg).unwrap();
        let st = f.init(&law(&[0.5, 0.5])).unwrap();
        let st = f.step(&st, 0.1, 0.01).unwrap();
        let err = f.step(&st, 2.0, 0.01).unwrap_err();
        match err {
            FilterError::NumericalBlowup { step, .. } => assert_eq!(step, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn renormalize_cadence_does_not_change_results() {
        let a = GeneratorMatrix::from_rows(&[vec![-0.1, 0.1], vec![0.05, -0.05]]).unwrap();
        let values: Vec<f64> =
            (0..300).scan(0.0, |acc, k| {
                *acc += 0.01 + 0.05 * ((k * 37 % 100) as f64 / 100.0 - 0.5);
                Some(*acc)
            })
            .collect();
        let series = ObservationSeries::from_values(0.0, 0.01, values).unwrap();
        for scheme in [Scheme::Euler, Scheme::Robust] {
            let mk = |every: usize| {
                let cfg = FilterConfig { scheme, renormalize_every: every, ..Default::default() };
                let f = ZakaiFilter::new(
                    a.clone(),
                    SlopeVector::two_state(-1.0, 1.0),
                    1.0,
                    cfg,
                )
                .unwrap();
                f.run(&series, &law(&[0.9, 0.1])).unwrap()
            };
            let every_step = mk(1);
            let lazy = mk(7);
            for (p, q) in every_step.posterior().iter().zip(lazy.posterior().iter()) {
                assert!(approx(p[0], q[0], 1e-12));
            }
            let r1 = every_step.terminal().reduce_functionals();
            let r7 = lazy.terminal().reduce_functionals();
            assert!(approx(r1.jump_count(0, 1), r7.jump_count(0, 1), 1e-10));
            assert!(approx(r1.occupation(0), r7.occupation(0), 1e-10));
            assert!(approx(r1.drift(1), r7.drift(1), 1e-10));
        }
    }

    #[test]
    fn trajectory_csv_includes_every_grid_point() {
        let f = ZakaiFilter::new(
            zero_gen(),
            SlopeVector::two_state(0.0, 1.0),
            1.0,
            FilterConfig::default(),
        )
        .unwrap();
        let series = ObservationSeries::from_values(20.0, 1.0, vec![0.0, 0.5, 1.0]).unwrap();
        let traj = f.run(&series, &law(&[0.99, 0.01])).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,p_state_0,p_state_1");
        assert_eq!(lines.len(), 4);
        // Values round-trip bit-exactly through the 17-digit format.
        let q0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(q0.to_bits(), 0.99f64.to_bits());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            ZakaiFilter::new(
                zero_gen(),
                SlopeVector::two_state(0.0, 1.0),
                0.0,
                FilterConfig::default()
            ),
            Err(FilterError::BadNoiseScale(_))
        ));
        let bad = FilterConfig { clamp_eps: 0.5, ..FilterConfig::<f64>::default() };
        assert!(bad.validate().is_err());
        let bad = FilterConfig { renormalize_every: 0, ..FilterConfig::<f64>::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn filter_works_at_f32() {
        let a = GeneratorMatrix::<f32>::from_rows(&[vec![-0.1, 0.1], vec![0.05, -0.05]]).unwrap();
        let f = ZakaiFilter::new(
            a,
            SlopeVector::two_state(-1.0f32, 1.0),
            1.0,
            FilterConfig::default(),
        )
        .unwrap();
        let series =
            ObservationSeries::from_values(0.0f32, 0.1, (0..50).map(|k| k as f32 * 0.1).collect())
                .unwrap();
        let traj = f.run(&series, &InitialLaw::new(vec![0.5f32, 0.5]).unwrap()).unwrap();
        let last = traj.posterior().last().unwrap();
        assert!((last[0] + last[1] - 1.0).abs() < 1e-6);
        assert!(last[1] > 0.9, "slope-1 data favors state 2: {last:?}");
    }
}
