//! Robust superhedging: tree pricing, the worst-case-volatility PDE, hedge
//! extraction, and verification.

pub mod bsb;
pub mod claims;
pub mod strategy;
pub mod tree;
pub mod verify;

pub use bsb::{black_scholes_call, bsb_solve, BsbGrid, BsbSurface, Stepper};
pub use claims::{Claim, ClaimKind};
pub use strategy::{
    covariation_estimate, extract_strategy_covariation, extract_strategy_envelope,
    CovariationEstimate, HedgeStrategy,
};
pub use tree::{
    dpp_check, dual_enumerate, sublinear_price_tree, supermartingale_check, SupermartGap,
    ValueProcess,
};
pub use verify::{
    verify_superhedge_mc, verify_superhedge_tree, McVerifyReport, TreeVerifyReport, VolSelection,
};
