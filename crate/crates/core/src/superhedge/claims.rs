//! Nonnegative terminal claims, evaluable on tree nodes or on a scalar
//! terminal asset value.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::tree::{TreeFamily, TreeNode};

/// Payoff shapes. All of them are nonnegative by construction except
/// `Table`, which is validated against the tree it is priced on.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClaimKind {
    Call {
        strike: f64,
        #[serde(default)]
        asset: usize,
    },
    Put {
        strike: f64,
        #[serde(default)]
        asset: usize,
    },
    Constant {
        value: f64,
    },
    /// Weighted-sum call on a basket.
    BasketCall {
        weights: Vec<f64>,
        strike: f64,
    },
    /// Explicit values per terminal node id; nodes absent from the table
    /// pay zero. Encodes path-dependent claims, since tree nodes carry
    /// their history.
    Table {
        values: HashMap<usize, f64>,
    },
}

/// A claim at the tree horizon (or the PDE horizon).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(transparent)]
pub struct Claim {
    pub kind: ClaimKind,
}

impl Claim {
    pub fn new(kind: ClaimKind) -> Self {
        Claim { kind }
    }

    pub fn call(strike: f64) -> Self {
        Claim::new(ClaimKind::Call { strike, asset: 0 })
    }

    pub fn put(strike: f64) -> Self {
        Claim::new(ClaimKind::Put { strike, asset: 0 })
    }

    pub fn constant(value: f64) -> Self {
        Claim::new(ClaimKind::Constant { value })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Payoff at a terminal tree node.
    pub fn eval_node(&self, node: &TreeNode) -> f64 {
        match &self.kind {
            ClaimKind::Call { strike, asset } => (node.s[*asset] - strike).max(0.0),
            ClaimKind::Put { strike, asset } => (strike - node.s[*asset]).max(0.0),
            ClaimKind::Constant { value } => *value,
            ClaimKind::BasketCall { weights, strike } => {
                let basket: f64 = weights.iter().zip(&node.s).map(|(w, s)| w * s).sum();
                (basket - strike).max(0.0)
            }
            ClaimKind::Table { values } => values.get(&node.id).copied().unwrap_or(0.0),
        }
    }

    /// Payoff as a function of a scalar terminal value, for the PDE engine.
    pub fn eval_scalar(&self, s: f64) -> Result<f64> {
        match &self.kind {
            ClaimKind::Call { strike, .. } => Ok((s - strike).max(0.0)),
            ClaimKind::Put { strike, .. } => Ok((strike - s).max(0.0)),
            ClaimKind::Constant { value } => Ok(*value),
            _ => Err(Error::InvalidClaim(
                "scalar payoff requires call, put or constant".into(),
            )),
        }
    }

    /// Rejects claims that are negative or non-finite at a quasi-surely
    /// supported terminal node.
    pub fn validate_on(&self, fam: &TreeFamily) -> Result<()> {
        if let ClaimKind::Constant { value } = &self.kind {
            if *value < 0.0 {
                return Err(Error::InvalidClaim(format!("negative constant {value}")));
            }
        }
        let reachable = fam.qs_reachable();
        for node in fam.nodes() {
            if !fam.is_terminal(node.id) || !reachable[node.id] {
                continue;
            }
            let f = self.eval_node(node);
            if !f.is_finite() {
                return Err(Error::InvalidClaim(format!(
                    "payoff not finite at node {}",
                    node.id
                )));
            }
            if f < 0.0 {
                return Err(Error::InvalidClaim(format!(
                    "payoff {f} negative at supported terminal node {}",
                    node.id
                )));
            }
        }
        Ok(())
    }
}
