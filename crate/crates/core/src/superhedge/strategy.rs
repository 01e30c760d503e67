//! Hedge extraction from a value process.
//!
//! Two routes to the same strategy: the envelope route picks, at every
//! supported interior node, a vector `h` with
//! `Z_v + h . (S_c - S_v) >= Z_c` at every charged child (the supporting
//! hyperplane of the node problem, least-norm among minimizers); the
//! covariation route forms one-step conditional covariances under a killed
//! measure and combines them through the Moore-Penrose pseudoinverse,
//! `H = c^{SZ} (c^S)^+`. On one-dimensional trees both coincide wherever
//! the optimizing measure gives the asset a nondegenerate one-step
//! variance.

use crate::deflator::KilledMeasure;
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, pinv_symmetric};
use crate::models::tree::TreeFamily;
use crate::superhedge::tree::ValueProcess;

/// Node-indexed hedge vectors; `None` at terminal or unsupported nodes
/// (the strategy is zero there).
#[derive(Debug, Clone)]
pub struct HedgeStrategy {
    pub vectors: Vec<Option<Vec<f64>>>,
}

impl HedgeStrategy {
    pub fn hedge(&self, node: usize) -> Option<&[f64]> {
        self.vectors.get(node).and_then(|h| h.as_deref())
    }
}

/// One-step conditional covariation data at a node.
#[derive(Debug, Clone)]
pub struct CovariationEstimate {
    /// `d x d` covariance of the asset increment, conditional on survival.
    pub c_s: Vec<Vec<f64>>,
    /// Covariance of asset increment and value increment.
    pub c_sz: Vec<f64>,
    /// Trace clock increment.
    pub clock: f64,
}

/// Supporting-hyperplane hedges for every supported interior node. The
/// pricer builds values and hedges jointly, so this reads them back; the
/// covariation route below re-derives the strategy independently.
pub fn extract_strategy_envelope(fam: &TreeFamily, zp: &ValueProcess) -> Result<HedgeStrategy> {
    if zp.hedges.len() != fam.nodes().len() {
        return Err(Error::InvalidArgument(
            "value process does not belong to this family".into(),
        ));
    }
    Ok(HedgeStrategy {
        vectors: zp.hedges.clone(),
    })
}

/// One-step conditional covariances at a node under a killed measure,
/// conditional on survival.
pub fn covariation_estimate(
    fam: &TreeFamily,
    values: &[f64],
    killed: &KilledMeasure,
    node: usize,
) -> Option<CovariationEstimate> {
    let w = killed.node_weights(node)?;
    let n = fam.node(node);
    let d = fam.dim();
    let mass: f64 = w.children.iter().sum();
    if mass <= 0.0 {
        return Some(CovariationEstimate {
            c_s: vec![vec![0.0; d]; d],
            c_sz: vec![0.0; d],
            clock: 0.0,
        });
    }
    let cond: Vec<f64> = w.children.iter().map(|&q| q / mass).collect();
    let mut mean_s = vec![0.0; d];
    let mut mean_z = 0.0;
    for (&c, &q) in n.children.iter().zip(&cond) {
        for j in 0..d {
            mean_s[j] += q * (fam.node(c).s[j] - n.s[j]);
        }
        mean_z += q * (values[c] - values[node]);
    }
    let mut c_s = vec![vec![0.0; d]; d];
    let mut c_sz = vec![0.0; d];
    for (&c, &q) in n.children.iter().zip(&cond) {
        let ds: Vec<f64> = (0..d)
            .map(|j| fam.node(c).s[j] - n.s[j] - mean_s[j])
            .collect();
        let dz = values[c] - values[node] - mean_z;
        for j in 0..d {
            for k in 0..d {
                c_s[j][k] += q * ds[j] * ds[k];
            }
            c_sz[j] += q * ds[j] * dz;
        }
    }
    let clock = (0..d).map(|j| c_s[j][j]).sum();
    Some(CovariationEstimate { c_s, c_sz, clock })
}

/// Covariation hedges `H = c^{SZ} (c^S)^+` under a killed measure; zero at
/// nodes the measure does not reach alive.
pub fn extract_strategy_covariation(
    fam: &TreeFamily,
    zp: &ValueProcess,
    killed: &KilledMeasure,
) -> Result<HedgeStrategy> {
    let d = fam.dim();
    let mut vectors: Vec<Option<Vec<f64>>> = vec![None; fam.nodes().len()];
    for node in fam.nodes() {
        if node.children.is_empty() {
            continue;
        }
        if killed.alive_reach_prob(fam, node.id) == 0.0 {
            continue;
        }
        let Some(est) = covariation_estimate(fam, &zp.values, killed, node.id) else {
            continue;
        };
        let pinv = pinv_symmetric(&est.c_s, 1e-10)?;
        let h: Vec<f64> = mat_vec(&pinv, &est.c_sz);
        debug_assert_eq!(h.len(), d);
        vectors[node.id] = Some(h);
    }
    Ok(HedgeStrategy { vectors })
}
