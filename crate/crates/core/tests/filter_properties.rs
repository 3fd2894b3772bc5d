//! Cross-module behavior of the posterior filter on simulated data:
//! conservation laws, agreement between the two update schemes, convergence
//! order under grid refinement, and the reduced-functional identities.

use ctmc_hums_core::markov_chain::{forward_law, simulate_chain, GeneratorMatrix, InitialLaw};
use ctmc_hums_core::observation::{simulate_observation, ObservationSeries, SlopeVector};
use ctmc_hums_core::zakai::{FilterConfig, Scheme, ZakaiFilter};
use proptest::prelude::*;

fn baseline_generator() -> GeneratorMatrix<f64> {
    GeneratorMatrix::two_state(0.1, 0.05).unwrap()
}

fn baseline_slopes() -> SlopeVector<f64> {
    SlopeVector::two_state(-1.0, 1.0)
}

fn config(scheme: Scheme) -> FilterConfig<f64> {
    FilterConfig { scheme, ..FilterConfig::default() }
}

/// Simulate one hidden path plus observations and run the filter over it.
fn simulated_series(
    a: &GeneratorMatrix<f64>,
    c: &SlopeVector<f64>,
    noise_scale: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> ObservationSeries<f64> {
    let path = simulate_chain(a, 0, horizon, seed).unwrap();
    simulate_observation(&path, c, dt, noise_scale, seed ^ 0x9e37_79b9).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every emitted posterior is a probability vector: components in [0, 1]
    /// and total mass 1 within 1e-9, for both schemes, across random models.
    #[test]
    fn posteriors_are_normalized_probability_vectors(
        up in 0.01f64..2.0,
        down in 0.01f64..2.0,
        c0 in -2.0f64..2.0,
        c1 in -2.0f64..2.0,
        noise_scale in 0.3f64..2.0,
        seed in 0u64..1_000_000,
        scheme in prop_oneof![Just(Scheme::Euler), Just(Scheme::Robust)],
    ) {
        let a = GeneratorMatrix::two_state(up, down).unwrap();
        let c = SlopeVector::two_state(c0, c1);
        let series = simulated_series(&a, &c, noise_scale, 0.01, 4.0, seed);
        let p0 = InitialLaw::uniform(2).unwrap();
        let filter = ZakaiFilter::new(a, c, noise_scale, config(scheme)).unwrap();
        // The explicit Euler update can lose positivity on rough draws (the
        // reason the robust scheme is the default); a run that errors out
        // emits nothing, so the normalization property is about successful
        // runs. The robust scheme must always succeed on this domain.
        let traj = match filter.run(&series, &p0) {
            Ok(traj) => traj,
            Err(e) => {
                prop_assert!(
                    scheme == Scheme::Euler,
                    "robust scheme must not fail, got {e}"
                );
                return Ok(());
            }
        };
        for q in traj.posterior() {
            let mass: f64 = q.iter().sum();
            prop_assert!((mass - 1.0).abs() <= 1e-9, "mass {mass}");
            for &p in q {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&p), "component {p}");
            }
        }
    }
}

/// On fine grids the Euler and robust updates follow the same dynamics: the
/// sup-norm distance between their posterior paths stays below 5e-2.
#[test]
fn schemes_agree_on_fine_grids() {
    let a = baseline_generator();
    let c = baseline_slopes();
    let p0 = InitialLaw::uniform(2).unwrap();
    for seed in 1..=5u64 {
        let series = simulated_series(&a, &c, 1.0, 1e-3, 50.0, seed);
        let euler =
            ZakaiFilter::new(a.clone(), c.clone(), 1.0, config(Scheme::Euler)).unwrap();
        let robust =
            ZakaiFilter::new(a.clone(), c.clone(), 1.0, config(Scheme::Robust)).unwrap();
        let te = euler.run(&series, &p0).unwrap();
        let tr = robust.run(&series, &p0).unwrap();
        let mut sup: f64 = 0.0;
        for (qe, qr) in te.posterior().iter().zip(tr.posterior()) {
            for (pe, pr) in qe.iter().zip(qr) {
                sup = sup.max((pe - pr).abs());
            }
        }
        assert!(sup <= 5e-2, "seed {seed}: scheme disagreement {sup}");
    }
}

/// The filtered occupation times sum to the elapsed time (the state is always
/// somewhere), within 1%; jump counts are nonnegative and drifts finite.
#[test]
fn occupation_identity_holds() {
    let a = baseline_generator();
    let c = baseline_slopes();
    let p0 = InitialLaw::uniform(2).unwrap();
    for scheme in [Scheme::Euler, Scheme::Robust] {
        let series = simulated_series(&a, &c, 1.0, 0.01, 200.0, 7);
        let filter = ZakaiFilter::new(a.clone(), c.clone(), 1.0, config(scheme)).unwrap();
        let st = filter.run_terminal(&series, &p0).unwrap();
        let f = st.reduce_functionals();
        let occ_total = f.occupation(0) + f.occupation(1);
        let elapsed = st.t();
        assert!(
            (occ_total - elapsed).abs() <= 0.01 * elapsed,
            "{scheme:?}: occupation total {occ_total} vs elapsed {elapsed}"
        );
        for i in 0..2 {
            for j in 0..2 {
                if i != j {
                    assert!(f.jump_count(i, j) >= 0.0, "negative jump count");
                }
            }
            assert!(f.drift(i).is_finite(), "drift not finite");
        }
    }
}

/// First-order convergence under grid refinement: filtering the same
/// observation path at dt and dt/2 against a dt/8 reference, halving the step
/// roughly halves the sup error (median ratio across seeds in [1.5, 3]).
#[test]
fn halving_dt_roughly_halves_error_vs_reference() {
    let a = baseline_generator();
    let c = baseline_slopes();
    let p0 = InitialLaw::uniform(2).unwrap();
    let dt_fine = 0.005; // = dt/8
    let horizon = 40.0;
    let mut ratios = Vec::new();
    for seed in 1..=5u64 {
        let fine = simulated_series(&a, &c, 1.0, dt_fine, horizon, seed);
        // Subsample the same observation path onto coarser grids.
        let coarsen = |stride: usize| {
            let vals: Vec<f64> =
                fine.values().iter().step_by(stride).copied().collect();
            ObservationSeries::from_values(0.0, dt_fine * stride as f64, vals).unwrap()
        };
        let run = |series: &ObservationSeries<f64>| {
            ZakaiFilter::new(a.clone(), c.clone(), 1.0, config(Scheme::Robust))
                .unwrap()
                .run(series, &p0)
                .unwrap()
        };
        let reference = run(&fine);
        let sup_err = |stride: usize| {
            let traj = run(&coarsen(stride));
            let mut sup: f64 = 0.0;
            for (k, q) in traj.posterior().iter().enumerate() {
                let r = &reference.posterior()[k * stride];
                for (pc, pr) in q.iter().zip(r) {
                    sup = sup.max((pc - pr).abs());
                }
            }
            sup
        };
        ratios.push(sup_err(8) / sup_err(4));
    }
    ratios.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = ratios[ratios.len() / 2];
    assert!(
        (1.5..=3.0).contains(&median),
        "refinement ratios {ratios:?}, median {median}"
    );
}

/// Equal slopes make the observations carry no information about the state:
/// the robust posterior coincides with the prior law propagated by the
/// generator, to 1e-9, at every grid point.
#[test]
fn uninformative_observations_reduce_to_forward_law() {
    let a = baseline_generator();
    let c = SlopeVector::two_state(0.7, 0.7);
    let p0 = InitialLaw::new(vec![0.9, 0.1]).unwrap();
    let series = simulated_series(&a, &c, 0.5, 0.02, 30.0, 3);
    let filter =
        ZakaiFilter::new(a.clone(), c.clone(), 0.5, config(Scheme::Robust)).unwrap();
    let traj = filter.run(&series, &p0).unwrap();
    for (k, q) in traj.posterior().iter().enumerate() {
        let t = 0.02 * k as f64;
        let law = forward_law(&a, &p0, t).unwrap();
        for (p_filter, p_law) in q.iter().zip(law.probs()) {
            assert!(
                (p_filter - p_law).abs() <= 1e-9,
                "t={t}: posterior {p_filter} vs forward law {p_law}"
            );
        }
    }
}

/// Estimation on simulated diffusion data moves from a perturbed initial
/// guess toward the generating parameters.
#[test]
fn estimation_on_simulated_data_moves_toward_truth() {
    use ctmc_hums_core::estimation::{estimate_parameters, EstimationConfig};

    let a_true = baseline_generator();
    let c_true = baseline_slopes();
    let series = simulated_series(&a_true, &c_true, 1.0, 0.01, 2000.0, 11);
    let a0 = GeneratorMatrix::two_state(0.3, 0.15).unwrap();
    let c0 = SlopeVector::two_state(-0.4, 0.4);
    let p0 = InitialLaw::uniform(2).unwrap();
    let ecfg = EstimationConfig {
        max_iters: 10,
        estimate_a: true,
        estimate_c: true,
        ..EstimationConfig::default()
    };
    let res = estimate_parameters(
        &series,
        &a0,
        &c0,
        1.0,
        &p0,
        config(Scheme::Robust),
        &ecfg,
    )
    .unwrap();
    for i in 0..2 {
        let err_new = (res.c_hat.get(i) - c_true.get(i)).abs();
        let err_old = (c0.get(i) - c_true.get(i)).abs();
        assert!(
            err_new < err_old,
            "slope {i} did not improve: {} -> {}",
            c0.get(i),
            res.c_hat.get(i)
        );
    }
    assert!(res.a_hat.rate(0, 1) > 0.0 && res.a_hat.rate(1, 0) > 0.0);
}
