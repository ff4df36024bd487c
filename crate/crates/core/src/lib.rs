//! Welfare-aware matching of users to content providers, with an ecosystem
//! simulator and experiment workbench built on top.
//!
//! Layering, bottom to top:
//! - [`model`]: domain types (users, providers, instances) and the reward /
//!   utility primitives.
//! - [`lp`]: a self-contained bounded-variable simplex solver.
//! - [`matching`]: constrained-welfare matching policies (exact, greedy,
//!   LP-relaxation rounding) and regret accounting.
//! - [`colgen`]: column generation for non-linear (sigmoid) utilities.
//! - [`ecosim`]: epoch-based ecosystem simulation with provider viability
//!   dynamics.
//! - [`workbench`]: synthetic data generation, file formats, experiment
//!   running and reporting; surfaced through the `ecomatch` binary.

pub mod colgen;
pub mod ecosim;
pub mod fixtures;
pub mod lp;
pub mod matching;
pub mod model;
pub mod workbench;
