//! No-arbitrage of the first kind on finite tree families.
//!
//! The check is constructive in both directions. At every node a model
//! reaches, [`node_feasibility`] solves the max-min program
//!
//! ```text
//! maximize t   subject to   q_c >= t,  sum q_c = 1,  sum q_c S_c = S_v
//! ```
//!
//! over the children charged by that model. A strictly positive optimum
//! yields strictly positive one-step martingale weights; assembling them
//! over the model's support gives a full-mass martingale measure charging
//! exactly the model's edges. A nonpositive optimum at some node yields a
//! separating hedge vector whose one-step wealth is nonnegative on the
//! model's children and strictly positive on at least one of them: an
//! arbitrage certificate for that model, which refutes the family-level
//! condition.

use serde::{Deserialize, Serialize};

use crate::deflator::{KilledMeasure, NodeWeights};
use crate::error::{Error, Result};
use crate::lp::{solve, LpProblem, LpSolution};
use crate::models::tree::TreeFamily;

/// Feasibility margin below which a node counts as failing.
pub const FEASIBILITY_THRESHOLD: f64 = 1e-10;

/// Result of the one-step feasibility program at a node.
#[derive(Debug, Clone)]
pub enum NodeFeasibility {
    /// Strictly positive weights summing to one with the martingale
    /// property; `margin` is the optimal minimum weight.
    Feasible { weights: Vec<f64>, margin: f64 },
    /// No interior solution; `margin` is the (nonpositive) optimum, or
    /// `-inf` when even the affine constraints admit no solution.
    Infeasible { margin: f64 },
}

impl NodeFeasibility {
    pub fn margin(&self) -> f64 {
        match self {
            NodeFeasibility::Feasible { margin, .. } => *margin,
            NodeFeasibility::Infeasible { margin } => *margin,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            NodeFeasibility::Feasible { weights, .. } => Some(weights),
            NodeFeasibility::Infeasible { .. } => None,
        }
    }
}

/// Solves the max-min feasibility program for one node.
///
/// Variables are substituted as `q_c = u_c + t` with `u_c >= 0` and `t`
/// split into positive and negative parts, which keeps the program in
/// standard form for the dense simplex.
pub fn node_feasibility(s_v: &[f64], children: &[Vec<f64>]) -> Result<NodeFeasibility> {
    let m = children.len();
    let d = s_v.len();
    if m == 0 {
        return Err(Error::InvalidArgument("node needs at least one child".into()));
    }
    for c in children {
        if c.len() != d {
            return Err(Error::InvalidArgument("child dimension mismatch".into()));
        }
    }
    // Columns: u_1..u_m, t+, t-.
    let mut objective = vec![0.0; m + 2];
    objective[m] = 1.0;
    objective[m + 1] = -1.0;
    let mut eq = Vec::with_capacity(d + 1);
    let mut mass = vec![1.0; m + 2];
    mass[m] = m as f64;
    mass[m + 1] = -(m as f64);
    eq.push((mass, 1.0));
    for j in 0..d {
        let mut row = vec![0.0; m + 2];
        let mut total = 0.0;
        for (c, child) in children.iter().enumerate() {
            row[c] = child[j];
            total += child[j];
        }
        row[m] = total;
        row[m + 1] = -total;
        eq.push((row, s_v[j]));
    }
    let problem = LpProblem {
        objective,
        eq,
        ub: vec![],
    };
    match solve(&problem)? {
        LpSolution::Optimal { x, value } => {
            if value > FEASIBILITY_THRESHOLD {
                let raw: Vec<f64> = (0..m).map(|c| x[c] + value).collect();
                let total: f64 = raw.iter().sum();
                let weights = raw.iter().map(|q| q / total).collect();
                Ok(NodeFeasibility::Feasible {
                    weights,
                    margin: value,
                })
            } else {
                Ok(NodeFeasibility::Infeasible { margin: value })
            }
        }
        LpSolution::Infeasible => Ok(NodeFeasibility::Infeasible {
            margin: f64::NEG_INFINITY,
        }),
        LpSolution::Unbounded => Err(Error::InvalidArgument(
            "feasibility program cannot be unbounded".into(),
        )),
    }
}

/// Separating hedge for an infeasible node: maximizes the total clipped
/// one-step wealth over `|h|_inf <= 1` subject to the wealth being
/// nonnegative at every charged child.
fn separating_hedge(s_v: &[f64], children: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = children.len();
    let d = s_v.len();
    // Columns: h+_1..h+_d, h-_1..h-_d, s_1..s_m.
    let cols = 2 * d + m;
    let mut objective = vec![0.0; cols];
    for c in 0..m {
        objective[2 * d + c] = 1.0;
    }
    let mut ub = Vec::new();
    for (c, child) in children.iter().enumerate() {
        let delta: Vec<f64> = child.iter().zip(s_v).map(|(a, b)| a - b).collect();
        // -h . delta <= 0 keeps the wealth nonnegative.
        let mut row = vec![0.0; cols];
        for j in 0..d {
            row[j] = -delta[j];
            row[d + j] = delta[j];
        }
        ub.push((row.clone(), 0.0));
        // s_c <= h . delta clips the profit at each child.
        let mut row2 = vec![0.0; cols];
        for j in 0..d {
            row2[j] = -delta[j];
            row2[d + j] = delta[j];
        }
        row2[2 * d + c] = 1.0;
        ub.push((row2, 0.0));
        // s_c <= 1.
        let mut cap = vec![0.0; cols];
        cap[2 * d + c] = 1.0;
        ub.push((cap, 1.0));
    }
    for j in 0..2 * d {
        let mut cap = vec![0.0; cols];
        cap[j] = 1.0;
        ub.push((cap, 1.0));
    }
    match solve(&LpProblem {
        objective,
        eq: vec![],
        ub,
    })? {
        LpSolution::Optimal { x, .. } => Ok((0..d).map(|j| x[j] - x[d + j]).collect()),
        _ => Err(Error::InvalidArgument("separation program must be solvable".into())),
    }
}

/// One-step arbitrage witness for a specific model: holding `hedge` over
/// the step out of `node` costs nothing, never loses on the children the
/// model charges, and wins strictly on at least one of them. The claim
/// equals that wealth on the charged children and zero elsewhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArbitrageCertificate {
    pub node: usize,
    pub model: usize,
    pub hedge: Vec<f64>,
    /// `(child id, wealth)` for every child the model charges.
    pub claim: Vec<(usize, f64)>,
}

/// Per-(node, model) feasibility record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: usize,
    pub model: usize,
    pub margin: f64,
    pub weights: Option<Vec<f64>>,
}

/// Outcome of the family-level check: either one full-mass martingale
/// measure per model, or a certificate from the first failing node.
#[derive(Debug)]
pub struct Na1Report {
    pub holds: bool,
    pub records: Vec<NodeRecord>,
    /// One killed measure per model when the condition holds; they carry no
    /// cemetery mass and charge exactly the model's edges.
    pub measures: Vec<KilledMeasure>,
    pub certificate: Option<ArbitrageCertificate>,
}

/// Decides the no-arbitrage condition by breadth-first node feasibility
/// over each model's support.
pub fn na1_check(fam: &TreeFamily) -> Result<Na1Report> {
    let mut records = Vec::new();
    let mut per_model: Vec<Vec<Option<NodeWeights>>> =
        vec![vec![None; fam.nodes().len()]; fam.models().len()];

    let mut order: Vec<usize> = (0..fam.nodes().len()).collect();
    order.sort_by_key(|&id| (fam.node(id).level, id));

    for &id in &order {
        let node = fam.node(id);
        if node.children.is_empty() {
            continue;
        }
        for model in 0..fam.models().len() {
            if fam.reach_prob(model, id) == 0.0 {
                continue;
            }
            let probs = fam.model(model).transition(id).expect("interior node");
            let charged: Vec<usize> = (0..node.children.len())
                .filter(|&pos| probs[pos] > 0.0)
                .collect();
            let child_values: Vec<Vec<f64>> = charged
                .iter()
                .map(|&pos| fam.node(node.children[pos]).s.clone())
                .collect();
            let feas = node_feasibility(&node.s, &child_values)?;
            records.push(NodeRecord {
                node: id,
                model,
                margin: feas.margin(),
                weights: feas.weights().map(|w| w.to_vec()),
            });
            match feas {
                NodeFeasibility::Feasible { weights, .. } => {
                    let mut full = vec![0.0; node.children.len()];
                    for (k, &pos) in charged.iter().enumerate() {
                        full[pos] = weights[k];
                    }
                    per_model[model][id] = Some(NodeWeights {
                        children: full,
                        cemetery: 0.0,
                    });
                }
                NodeFeasibility::Infeasible { .. } => {
                    let hedge = separating_hedge(&node.s, &child_values)?;
                    let claim = charged
                        .iter()
                        .map(|&pos| {
                            let child = node.children[pos];
                            let wealth: f64 = hedge
                                .iter()
                                .zip(fam.node(child).s.iter().zip(&node.s))
                                .map(|(h, (sc, sv))| h * (sc - sv))
                                .sum();
                            (child, wealth)
                        })
                        .collect();
                    return Ok(Na1Report {
                        holds: false,
                        records,
                        measures: Vec::new(),
                        certificate: Some(ArbitrageCertificate {
                            node: id,
                            model,
                            hedge,
                            claim,
                        }),
                    });
                }
            }
        }
    }

    let measures = per_model
        .into_iter()
        .map(|weights| KilledMeasure::new(fam, weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(Na1Report {
        holds: true,
        records,
        measures,
        certificate: None,
    })
}

/// Re-evaluates a certificate against a family: the recorded wealth must
/// match a recomputation, stay above `-1e-12` on every charged child, and
/// exceed `1e-9` on at least one.
pub fn certificate_validate(fam: &TreeFamily, cert: &ArbitrageCertificate) -> bool {
    if cert.node >= fam.nodes().len() || cert.model >= fam.models().len() {
        return false;
    }
    let node = fam.node(cert.node);
    if cert.hedge.len() != node.s.len() {
        return false;
    }
    let Some(probs) = fam.model(cert.model).transition(cert.node) else {
        return false;
    };
    let charged: Vec<usize> = node
        .children
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&c, _)| c)
        .collect();
    let recorded: std::collections::HashMap<usize, f64> = cert.claim.iter().copied().collect();
    if recorded.len() != charged.len() {
        return false;
    }
    let mut strict = false;
    for &child in &charged {
        let Some(&claimed) = recorded.get(&child) else {
            return false;
        };
        let wealth: f64 = cert
            .hedge
            .iter()
            .zip(fam.node(child).s.iter().zip(&node.s))
            .map(|(h, (sc, sv))| h * (sc - sv))
            .sum();
        if (wealth - claimed).abs() > 1e-9 {
            return false;
        }
        if wealth < -1e-12 {
            return false;
        }
        if wealth > 1e-9 {
            strict = true;
        }
    }
    strict
}
