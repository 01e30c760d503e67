//! Shared generators and independent oracles for the integration suites.
//!
//! Everything here is test-side machinery: the brute-force oracles do not
//! touch the library's LP or envelope code paths.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quasisure::models::tree::{ModelLaw, TreeFamily, TreeNode};
use quasisure::pathspace::Path;
use quasisure::superhedge::{Claim, ClaimKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Parameters for random tree families.
pub struct TreeGenConfig {
    pub dim: usize,
    pub max_periods: usize,
    pub max_children: usize,
    pub max_models: usize,
    /// Probability that a node's children are pushed to one side of the
    /// node value, which usually breaks per-model feasibility there.
    pub break_prob: f64,
    /// Probability that a model zeroes one of its transition weights.
    pub zero_prob: f64,
}

impl TreeGenConfig {
    pub fn feasible(dim: usize) -> Self {
        TreeGenConfig {
            dim,
            max_periods: 3,
            max_children: 4,
            max_models: 3,
            break_prob: 0.0,
            zero_prob: 0.15,
        }
    }

    pub fn mixed(dim: usize) -> Self {
        TreeGenConfig {
            dim,
            max_periods: 3,
            max_children: 3,
            max_models: 2,
            break_prob: 0.12,
            zero_prob: 0.10,
        }
    }
}

/// Random tree family on positive asset values. Child increments straddle
/// the node value unless a break is injected, so generated families mostly
/// satisfy the no-arbitrage condition when `break_prob` is zero.
pub fn random_tree(cfg: &TreeGenConfig, rng: &mut ChaCha8Rng) -> TreeFamily {
    let periods = 1 + rng.gen_range(0..cfg.max_periods);
    let d = cfg.dim;
    let mut nodes: Vec<TreeNode> = vec![TreeNode {
        id: 0,
        level: 0,
        s: (0..d).map(|_| 60.0 + 80.0 * rng.gen::<f64>()).collect(),
        parent: None,
        children: Vec::new(),
    }];
    let mut frontier = vec![0usize];
    for level in 1..=periods {
        let mut next = Vec::new();
        for &p in &frontier {
            let k = rng.gen_range(2..=cfg.max_children.max(2));
            let parent_s = nodes[p].s.clone();
            let broken = rng.gen::<f64>() < cfg.break_prob;
            let shift: Vec<f64> = (0..d)
                .map(|_| {
                    if broken {
                        // One-sided push: children land on one side.
                        0.04 + 0.10 * rng.gen::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut increments: Vec<Vec<f64>> = Vec::with_capacity(k);
            for c in 0..k {
                let inc: Vec<f64> = (0..d)
                    .map(|j| {
                        let raw = if broken {
                            shift[j] * (0.5 + rng.gen::<f64>())
                        } else {
                            // Alternate signs so the hull straddles zero.
                            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                            sign * (0.03 + 0.22 * rng.gen::<f64>())
                        };
                        raw
                    })
                    .collect();
                increments.push(inc);
            }
            if !broken && d > 1 {
                // Make the last increment oppose the sum of the others, so
                // zero lies inside the hull in every coordinate.
                let last = increments.len() - 1;
                for j in 0..d {
                    let sum: f64 = increments[..last].iter().map(|v| v[j]).sum();
                    increments[last][j] = -sum * (0.4 + 0.8 * rng.gen::<f64>());
                }
            }
            for inc in increments {
                let id = nodes.len();
                let s: Vec<f64> = parent_s
                    .iter()
                    .zip(&inc)
                    .map(|(sv, dj)| (sv * (1.0 + dj)).max(0.01))
                    .collect();
                nodes.push(TreeNode {
                    id,
                    level,
                    s,
                    parent: Some(p),
                    children: Vec::new(),
                });
                nodes[p].children.push(id);
                next.push(id);
            }
        }
        frontier = next;
    }

    let n_models = 1 + rng.gen_range(0..cfg.max_models);
    let models: Vec<ModelLaw> = (0..n_models)
        .map(|m| {
            let mut trans = vec![None; nodes.len()];
            for node in &nodes {
                if node.children.is_empty() {
                    continue;
                }
                let k = node.children.len();
                let mut w: Vec<f64> = (0..k).map(|_| 0.05 + rng.gen::<f64>()).collect();
                for x in w.iter_mut() {
                    if rng.gen::<f64>() < cfg.zero_prob {
                        *x = 0.0;
                    }
                }
                if w.iter().all(|&x| x == 0.0) {
                    w[rng.gen_range(0..k)] = 1.0;
                }
                let total: f64 = w.iter().sum();
                for x in w.iter_mut() {
                    *x /= total;
                }
                trans[node.id] = Some(w);
            }
            ModelLaw::new(format!("m{m}"), trans)
        })
        .collect();
    let times: Vec<f64> = (0..=periods).map(|l| l as f64).collect();
    TreeFamily::from_parts(times, nodes, models).expect("generated family is valid")
}

/// Random nonnegative claim on the family's terminal layer.
pub fn random_claim(fam: &TreeFamily, rng: &mut ChaCha8Rng) -> Claim {
    let root = fam.node(0).s[0];
    match rng.gen_range(0..4) {
        0 => Claim::new(ClaimKind::Call {
            strike: root * (0.8 + 0.4 * rng.gen::<f64>()),
            asset: rng.gen_range(0..fam.dim()),
        }),
        1 => Claim::new(ClaimKind::Put {
            strike: root * (0.8 + 0.4 * rng.gen::<f64>()),
            asset: rng.gen_range(0..fam.dim()),
        }),
        2 => Claim::constant(0.5 + 3.0 * rng.gen::<f64>()),
        _ => {
            let values = fam
                .nodes()
                .iter()
                .filter(|n| fam.is_terminal(n.id))
                .map(|n| (n.id, 5.0 * rng.gen::<f64>()))
                .collect();
            Claim::new(ClaimKind::Table { values })
        }
    }
}

/// Largest payoff over quasi-surely supported terminal nodes.
pub fn max_supported_payoff(fam: &TreeFamily, claim: &Claim) -> f64 {
    let reachable = fam.qs_reachable();
    fam.nodes()
        .iter()
        .filter(|n| fam.is_terminal(n.id) && reachable[n.id])
        .map(|n| claim.eval_node(n))
        .fold(0.0, f64::max)
}

/// Brute-force one-step feasibility decision on a simplex grid: does a grid
/// weight vector with every entry at least one quantum hit the martingale
/// constraint within the grid's own resolution? Independent of the
/// library's LP: plain enumeration and arithmetic.
pub fn grid_feasibility(s_v: &[f64], children: &[Vec<f64>], step: f64) -> bool {
    let m = children.len();
    let d = s_v.len();
    let n = (1.0 / step).round() as usize;
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            children
                .iter()
                .map(|c| (c[j] - s_v[j]).abs())
                .fold(0.0_f64, f64::max)
                .max(1e-12)
        })
        .collect();
    if m == 1 {
        return (0..d).all(|j| (children[0][j] - s_v[j]).abs() / scale[j] <= 2.0 * step);
    }
    let mut k = vec![1usize; m];
    let mut found = false;
    fn rec(
        idx: usize,
        remaining: usize,
        k: &mut Vec<usize>,
        m: usize,
        check: &mut impl FnMut(&[usize]) -> bool,
        found: &mut bool,
    ) {
        if *found {
            return;
        }
        if idx + 1 == m {
            k[idx] = remaining;
            if k[idx] >= 1 && check(k) {
                *found = true;
            }
            return;
        }
        // Each remaining coordinate keeps at least one quantum.
        for v in 1..=(remaining.saturating_sub(m - idx - 1)) {
            k[idx] = v;
            rec(idx + 1, remaining - v, k, m, check, found);
            if *found {
                return;
            }
        }
    }
    let mut check = |k: &[usize]| -> bool {
        (0..d).all(|j| {
            let mean: f64 = k
                .iter()
                .zip(children)
                .map(|(&ki, c)| ki as f64 * step * c[j])
                .sum();
            (mean - s_v[j]).abs() / scale[j] <= 2.0 * step
        })
    };
    rec(0, n, &mut k, m, &mut check, &mut found);
    found
}

/// Random path on a random grid, possibly killed partway.
pub fn random_path(dim: usize, rng: &mut ChaCha8Rng) -> Path {
    let len = rng.gen_range(2..=6);
    let mut grid = vec![0.0];
    for _ in 1..len {
        grid.push(grid.last().unwrap() + 0.2 + rng.gen::<f64>());
    }
    let kill_index = if rng.gen::<f64>() < 0.4 {
        Some(rng.gen_range(1..len))
    } else {
        None
    };
    let mut values: Vec<Option<Vec<f64>>> = Vec::with_capacity(len);
    for i in 0..len {
        if kill_index.is_some_and(|k| i >= k) {
            values.push(None);
        } else {
            values.push(Some((0..dim).map(|_| 4.0 * rng.gen::<f64>() - 2.0).collect()));
        }
    }
    Path::new(grid, values).expect("generated path is valid")
}

/// Rejection-samples a killed measure from the pricing-feasible class: the
/// alive part is a random martingale mixture of the charged children,
/// scaled by a random survival mass.
pub fn sample_feasible_measure(
    fam: &TreeFamily,
    rng: &mut ChaCha8Rng,
) -> Option<quasisure::deflator::KilledMeasure> {
    use quasisure::deflator::NodeWeights;
    let reachable = fam.qs_reachable();
    let mut weights = vec![None; fam.nodes().len()];
    for node in fam.nodes() {
        if node.children.is_empty() || !reachable[node.id] {
            continue;
        }
        let charged: Vec<usize> = (0..node.children.len())
            .filter(|&pos| {
                fam.models()
                    .iter()
                    .any(|m| m.transition(node.id).map_or(false, |p| p[pos] > 0.0))
            })
            .collect();
        let d = fam.dim();
        let mut accepted: Option<Vec<f64>> = None;
        'tries: for _ in 0..200 {
            let raw: Vec<f64> = charged.iter().map(|_| 0.01 + rng.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let r: Vec<f64> = raw.iter().map(|x| x / total).collect();
            // Project onto the martingale affine set.
            let mut c = vec![vec![1.0; charged.len()]];
            let mut rhs = vec![1.0];
            for j in 0..d {
                c.push(
                    charged
                        .iter()
                        .map(|&pos| fam.node(node.children[pos]).s[j] - node.s[j])
                        .collect(),
                );
                rhs.push(0.0);
            }
            let Ok(p) = quasisure::linalg::project_affine(&r, &c, &rhs) else {
                continue;
            };
            if p.iter().any(|&x| x < 0.0) {
                continue;
            }
            for (row, &want) in c.iter().zip(&rhs) {
                let got: f64 = row.iter().zip(&p).map(|(a, b)| a * b).sum();
                if (got - want).abs() > 1e-9 {
                    continue 'tries;
                }
            }
            // Exact renormalization so the node weights sum cleanly.
            let total: f64 = p.iter().sum();
            accepted = Some(p.iter().map(|x| x / total).collect());
            break;
        }
        let mixture = accepted?;
        let mass = rng.gen_range(0.2..=1.0);
        let mut full = vec![0.0; node.children.len()];
        for (k, &pos) in charged.iter().enumerate() {
            full[pos] = mass * mixture[k];
        }
        weights[node.id] = Some(NodeWeights {
            children: full,
            cemetery: 1.0 - mass,
        });
    }
    quasisure::deflator::KilledMeasure::new(fam, weights).ok()
}
