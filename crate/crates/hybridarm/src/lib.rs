//! Hybrid control arm analysis for survival trials.
//!
//! A randomized trial that favors the intervention arm (2:1 or 3:1) can add
//! external standard-of-care patients, e.g. from an EHR registry, to its
//! control arm. This crate implements six analysis strategies for such a
//! hybrid design and the machinery to study their operating
//! characteristics:
//!
//! - **trial only** and **full pooling** (the reference and the negative
//!   control),
//! - **power prior**: all externals at a fixed weight `alpha`,
//! - **normalized power prior**: `alpha` estimated from the data,
//! - **Lin's method**: score matching plus score weighting,
//! - **data-adaptive weighting (DAW)**: the most trial-like externals,
//!   weighted by standardized inverse odds of trial membership so the
//!   augmented trial is balanced 1:1.
//!
//! Estimation runs through a weighted Cox model with the treatment
//! indicator as the sole covariate. The [`sim`] and [`harness`] modules
//! generate synthetic trial/external cohorts and measure bias, variance,
//! coverage, power, type I error, and effective sample size over replicated
//! scenarios; the `hybridarm` binary drives sweeps from a config file and
//! analyzes CSV datasets.
//!
//! See the crate's `examples/` directory for one runnable example per major
//! capability.

pub mod config;
pub mod cox;
pub mod dataset;
mod error;
pub mod harness;
pub mod km;
pub mod logistic;
pub mod methods;
pub mod model;
pub mod sim;
mod stats;
pub mod streams;

pub use error::{Error, Result};
pub use model::{
    validate_cohort, AnalysisEntry, AnalysisSet, Cohort, Method, MethodResult, Source, Subject,
    Treatment, Violation,
};
