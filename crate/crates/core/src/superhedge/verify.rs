//! Pathwise verification of superhedges.
//!
//! Tree mode re-plays the hedge exactly along every quasi-surely supported
//! path and checks the terminal wealth against the claim, plus the
//! monotonicity of the residual `Z - Z_0 - gains`. Monte Carlo mode drives
//! the PDE deltas along simulated paths whose per-step volatility is drawn
//! uniformly from the admitted interval or adversarially from the value
//! surface's convexity, and reports the worst shortfall.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::tree::TreeFamily;
use crate::superhedge::bsb::BsbSurface;
use crate::superhedge::claims::Claim;
use crate::superhedge::strategy::HedgeStrategy;
use crate::superhedge::tree::ValueProcess;

/// Exact tree verification report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TreeVerifyReport {
    pub terminal_nodes: usize,
    pub violations: usize,
    pub min_slack: f64,
    /// Count of supported edges along which the residual `Z - Z_0 - gains`
    /// increases beyond tolerance.
    pub monotone_violations: usize,
    pub tolerance: f64,
}

/// Replays `x + sum H . dS` along every supported path of the tree.
pub fn verify_superhedge_tree(
    fam: &TreeFamily,
    x: f64,
    hedge: &HedgeStrategy,
    claim: &Claim,
    values: Option<&ValueProcess>,
    tolerance: f64,
) -> Result<TreeVerifyReport> {
    claim.validate_on(fam)?;
    let reachable = fam.qs_reachable();
    let n = fam.nodes().len();
    let mut wealth = vec![f64::NAN; n];
    wealth[fam.root()] = x;
    let mut order: Vec<usize> = (0..n).filter(|&id| reachable[id]).collect();
    order.sort_by_key(|&id| (fam.node(id).level, id));

    let mut monotone_violations = 0;
    for &id in &order {
        if id != fam.root() && wealth[id].is_nan() {
            continue;
        }
        let node = fam.node(id);
        if node.children.is_empty() {
            continue;
        }
        let h = hedge
            .hedge(id)
            .ok_or_else(|| Error::InvalidArgument(format!("no hedge at supported node {id}")))?;
        if h.len() != fam.dim() {
            return Err(Error::InvalidArgument(format!("hedge dimension at node {id}")));
        }
        for &c in &fam.supports(id) {
            let gain: f64 = h
                .iter()
                .zip(fam.node(c).s.iter().zip(&node.s))
                .map(|(hj, (sc, sv))| hj * (sc - sv))
                .sum();
            wealth[c] = wealth[id] + gain;
            if let Some(zp) = values {
                // Residual increment: (Z_c - gains_c) - (Z_v - gains_v).
                let inc = zp.values[c] - zp.values[id] - gain;
                if inc > tolerance {
                    monotone_violations += 1;
                }
            }
        }
    }

    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    let mut terminal_nodes = 0;
    for &id in &order {
        if !fam.is_terminal(id) || wealth[id].is_nan() {
            continue;
        }
        terminal_nodes += 1;
        let slack = wealth[id] - claim.eval_node(fam.node(id));
        min_slack = min_slack.min(slack);
        if slack < -tolerance {
            violations += 1;
        }
    }
    Ok(TreeVerifyReport {
        terminal_nodes,
        violations,
        min_slack,
        monotone_violations,
        tolerance,
    })
}

/// How the per-step volatility is chosen along simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolSelection {
    /// Uniform draw from `[sigma_lo, sigma_hi]` each step.
    Uniform,
    /// Adverse draw from the surface: `sigma_hi` where the value is locally
    /// convex, `sigma_lo` otherwise.
    Adversarial,
}

/// Monte Carlo verification report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct McVerifyReport {
    pub paths: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub min_slack: f64,
    pub epsilon: f64,
    pub initial_capital: f64,
}

/// Verifies the surface's deltas on `n` Euler paths from `s0`: wealth starts
/// at the surface price and rebalances once per grid step; a path violates
/// when its terminal wealth falls more than `epsilon` short of the payoff.
pub fn verify_superhedge_mc(
    surface: &BsbSurface,
    claim: &Claim,
    s0: f64,
    selection: VolSelection,
    n: usize,
    seed: u64,
    epsilon: f64,
) -> Result<McVerifyReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let steps = surface.times.len() - 1;
    let dt = surface.times[1] - surface.times[0];
    let sqrt_dt = dt.sqrt();
    let x0 = surface.price_at(s0);
    let (lo, hi) = (surface.sigma_lo, surface.sigma_hi);

    let slacks: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 + 1);
            let mut s = s0;
            let mut wealth = x0;
            for k in 0..steps {
                let sigma = match selection {
                    VolSelection::Uniform => rng.gen_range(lo..=hi),
                    VolSelection::Adversarial => {
                        if surface.convexity_sign(k, s) >= 0.0 {
                            hi
                        } else {
                            lo
                        }
                    }
                };
                let z: f64 = rng.sample(StandardNormal);
                let delta = surface.delta_at(k, s);
                let next = (s + s * sigma * sqrt_dt * z).max(0.0);
                wealth += delta * (next - s);
                s = next;
            }
            wealth - claim.eval_scalar(s).unwrap_or(0.0)
        })
        .collect();

    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = slacks.iter().filter(|&&x| x < -epsilon).count();
    Ok(McVerifyReport {
        paths: n,
        violations,
        violation_rate: violations as f64 / n as f64,
        min_slack,
        epsilon,
        initial_capital: x0,
    })
}
