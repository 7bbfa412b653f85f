//! Non-asymptotic lower bounds for unbiased parameter estimation in
//! rearrangement-invariant norms.
//!
//! Every regular unbiased estimator of a one-dimensional parameter obeys
//! a Rao-Cramer-type inequality in any rearrangement-invariant norm Y:
//! the sqrt(n)-normalized deviation, measured in the associate norm Y',
//! is at least the reciprocal of the score's CLT(Y) norm. This crate
//! computes those right-hand sides for the Lebesgue-Riesz, Grand
//! Lebesgue, exponential Orlicz and Lorentz families, and verifies them
//! with quadrature oracles and seeded Monte Carlo simulation:
//!
//! * [`families`] — parametric families (density, score, sampler) and the
//!   regularity identities;
//! * [`quadrature`] — adaptive Gauss-Kronrod integration over the line
//!   and half-line, the oracle layer for everything analytic;
//! * [`norms`] — the four norm evaluators on analytic and empirical
//!   inputs, the associate-norm pairing estimate and the exponential tail
//!   envelope;
//! * [`transforms`] — Young-Fenchel conjugation, the sum-stabilized
//!   envelope phi_bar, the Rosenthal-weighted psi_R and the natural
//!   generating functions of a family;
//! * [`fisher`] — generalized Fisher information in every supported norm;
//! * [`bounds`] — the bound right-hand sides and their constants;
//! * [`montecarlo`] — the seeded, worker-count-invariant simulation
//!   engine and end-to-end bound verification;
//! * [`acceptance`] — the pinned verification battery.
//!
//! With the default `parallel` feature, Monte Carlo replicates run on a
//! rayon pool; every replicate owns a counter-based substream and results
//! are reduced in replicate order, so output is bit-identical for any
//! worker count (including the sequential fallback build).

#![forbid(unsafe_code)]

pub mod acceptance;
pub mod bounds;
pub mod exec;
pub mod families;
pub mod fisher;
pub mod montecarlo;
pub mod norms;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod transforms;
