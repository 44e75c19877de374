//! Deterministic simulator core for differentially private federated
//! cyberattack detection.
//!
//! A fixed number of clusters each train a local multilayer perceptron on a
//! private shard of 21-feature network-traffic records, clip their local
//! update, perturb the resulting parameters with calibrated Gaussian, Laplace
//! or moments-accountant noise, and a coordinator averages the perturbed
//! models every round. The crate also carries the privacy-budget composition
//! rules and the detection metrics used to report on a run.
//!
//! The crate is `no_std` (it needs `alloc`). Wall-clock time and parallel
//! execution are injected through [`federation::Clock`] and
//! [`federation::Executor`] so that every result is a pure function of the
//! configuration and its seeds.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(rust_2018_idioms, missing_debug_implementations)]

extern crate alloc;

pub mod accountant;
pub mod data;
pub mod dp;
mod error;
pub mod federation;
mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
