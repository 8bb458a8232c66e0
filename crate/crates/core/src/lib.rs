//! Simulation and inference for one-dimensional recurrent random walks in
//! i.i.d. random environments with finite support.
//!
//! The environment at each positive site is drawn from
//! `η = Σ p_i δ_{a_i}`; the walk is reflected at 0. From a single observed
//! trajectory the crate estimates the support `a` and the weights `p` by
//! maximum likelihood (MLE) and maximum pseudo-likelihood (MPLE), and
//! provides the limiting criterion `L_∞` through an infinite-valley Monte
//! Carlo sampler together with closed forms for the Temkin, two-point and
//! lazy Temkin families.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`model`] | parameter types, model families, entropy / KL |
//! | [`environment`] | environment sampling, potential, reversible measure |
//! | [`walk`] | quenched walk simulation and local-time counters |
//! | [`valley`] | valley bottom / border, deep-site diagnostics |
//! | [`likelihood`] | `ℓ_n`, `L_n`, β thresholds, classification, `K_n`, `r_n` |
//! | [`optimize`] | Brent 1-D search and box-projected Nelder-Mead |
//! | [`estimators`] | MLE, MPLE, Adelman-Enriquez, naive estimator |
//! | [`infinite_valley`] | `L_∞` Monte Carlo and closed forms |
//! | [`experiment`] | configuration, replicate runner, CSV, summaries |
//!
//! All logarithms are natural.

// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod environment;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod infinite_valley;
pub mod likelihood;
pub mod model;
pub mod optimize;
pub mod rng;
pub mod valley;
pub mod walk;

pub use environment::{potential, reversible_measure, sample_environment, Environment, PotentialProfile};
pub use error::{Error, Result};
pub use estimators::{ae_estimator_temkin, mle, mple, naive_estimator, Estimate, Method};
pub use likelihood::{
    beta_thresholds, classify_sites, criterion_k, log_likelihood, pseudo_likelihood_l, remainder, BetaThresholds, SiteClassification,
};
pub use model::{entropy, entropy_vec, family_to_theta, kl, kl_vec, recurrence_defect, FamilyKind, ModelFamily, ThetaParams};
pub use optimize::{maximize_1d, maximize_box, Interval, OptimResult, SearchBox};
pub use walk::{simulate_walk, stats_from_path, WalkStats, Walker};
