//! Exact pricing engine for non-convex electricity markets.
//!
//! Solves centralized dispatch, computes convex hull (minimum-uplift) prices,
//! builds restricted opportunity sets per player, and prices over those
//! restricted sets with full uplift accounting. All core arithmetic is exact
//! rational; the oracle module provides independent floating-point
//! brute-force verifiers.

pub mod curvelib;
pub mod dual;
pub mod feasets;
pub mod model;
pub mod oracle;
pub mod primal;
pub mod rat;
pub mod simplex;

pub use model::{builtin_example, load_scenario, scenario_to_json, Scenario};
