//! Desk-scale numerics for markets under nondominated model uncertainty.
//!
//! The crate revolves around finite event trees carrying several transition
//! laws at once (a nondominated family) and around measures that may lose
//! mass to an absorbing cemetery state. On top of those it provides:
//!
//! * [`pathspace`] — grid paths with a cemetery state, lifetimes, killing,
//!   concatenation, and a Skorokhod-style metric;
//! * [`models`] — scenario-tree families, conditioning and pasting, and
//!   seeded Euler simulation of drift/volatility-uncertain dynamics;
//! * [`deflator`] — supermartingale deflators and the exit-measure
//!   construction that turns them into killed transition laws;
//! * [`na1`] — a constructive check of no-arbitrage of the first kind with
//!   martingale weights or an explicit arbitrage certificate;
//! * [`superhedge`] — robust superhedging prices by backward recursion on
//!   trees and by a worst-case-volatility PDE, plus hedge extraction and
//!   pathwise verification.
//!
//! All randomized routines take an explicit 64-bit seed and derive one RNG
//! stream per sample or path, so results do not depend on thread count.

pub mod deflator;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod models;
pub mod na1;
pub mod pathspace;
pub mod superhedge;

pub use error::{Error, Result};
pub use models::{ModelLaw, TreeFamily, TreeNode, TreeSpec, UncertaintySpec};
pub use pathspace::{Lifetime, Path};

/// Default seed used by every randomized entry point when none is given.
pub const DEFAULT_SEED: u64 = 42;
