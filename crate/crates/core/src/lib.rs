//! Continuous-time hidden-Markov filtering for degradation monitoring.
//!
//! The crate simulates finite-state Markov chains observed through a noisy
//! cumulative drift signal, filters the hidden state with unnormalized
//! (Zakai-style) recursions, estimates the model parameters from the filtered
//! statistics, and wraps the whole chain-to-decision path for fleets of
//! appliances whose health is tracked through maintenance logbooks.
//!
//! Everything numeric is generic over the scalar type through [`Scalar`]
//! (in practice `f64` or `f32`); the `*64` aliases at the crate root pick the
//! double-precision instantiations used by the CLI.

pub mod csvfmt;
pub mod decision;
pub mod estimation;
pub mod logbook;
pub mod markov_chain;
pub mod observation;
pub mod pipeline;
pub mod preprocessing;
pub mod scalar;
pub mod zakai;

pub use scalar::{Scalar, SimScalar};

pub type GeneratorMatrix64 = markov_chain::GeneratorMatrix<f64>;
pub type InitialLaw64 = markov_chain::InitialLaw<f64>;
pub type ChainPath64 = markov_chain::ChainPath<f64>;
pub type TransitionMatrix64 = markov_chain::TransitionMatrix<f64>;
pub type SlopeVector64 = observation::SlopeVector<f64>;
pub type ObservationSeries64 = observation::ObservationSeries<f64>;
pub type FilterConfig64 = zakai::FilterConfig<f64>;
pub type FilterState64 = zakai::FilterState<f64>;
pub type FilterTrajectory64 = zakai::FilterTrajectory<f64>;
