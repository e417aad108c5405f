//! Pure exploration of causal bandits.
//!
//! The crate is organized around a few layers:
//!
//! - [`graph`]: causal DAGs over observed/hidden/reward nodes, surgery,
//!   d-separation, and admissible sequences for do-effect identification.
//! - [`scm`]: executable structural causal models (tabular CPTs and binary
//!   GLMs), interventional sampling, and exact enumeration oracles for
//!   rewards, joints, gaps, and observability scores.
//! - [`estimation`]: finite-sample machinery — GLM maximum likelihood,
//!   plug-in sequence estimators, confidence radii, and interval merging.
//! - [`explore`]: the bandit algorithms themselves (observation-assisted
//!   LUCB-style fixed-confidence algorithms, classical baselines, and a
//!   fixed-budget successive-reject variant) over a common environment
//!   contract.
//! - [`complexity`]: observation thresholds, hardness sums, and
//!   asymptotic-order sample-complexity predictors.
//!
//! The crate is `no_std` (with `alloc`); all randomness flows through the
//! splittable counter-based generator in [`rng`], so every simulation is
//! bitwise reproducible from a seed.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod complexity;
pub mod estimation;
pub mod explore;
pub mod graph;
pub mod math;
pub mod rng;
pub mod scm;
