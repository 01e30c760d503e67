//! Sublinear-expectation pricing on tree families.
//!
//! The robust price of a nonnegative terminal claim is computed by a
//! backward recursion over quasi-sure supports. At each node the value is
//! the supremum of `sum_c q_c Z_c` over killed weights
//!
//! ```text
//! q >= 0,   m := sum_c q_c <= 1,   sum_c q_c S_c = m S_v,
//! ```
//!
//! that is, sub-stochastic weights whose alive-conditional part is a
//! martingale mixture of the charged children; the missing mass dies
//! carrying the current value and contributes zero to the claim. For
//! nonnegative claims the supremum is attained at full mass whenever a
//! martingale mixture exists, so killed and full-mass feasible classes
//! share the same value; at nodes admitting no such mixture every feasible
//! weight is zero and the value is zero.
//!
//! In one dimension the recursion is evaluated exactly as the upper concave
//! envelope of the child points at the node value; in higher dimensions by
//! a small dense LP. [`dual_enumerate`] re-derives the root value from an
//! independent brute-force route (projected simplex grids plus exhaustive
//! basic solutions) for use as an oracle.

use crate::deflator::{KilledMeasure, NodeWeights};
use crate::error::{Error, Result};
use crate::linalg::{dot, project_affine, solve_dense};
use crate::lp::{solve, LpProblem, LpSolution};
use crate::models::tree::TreeFamily;
use crate::na1::na1_check;
use crate::superhedge::claims::Claim;

/// Node-indexed value process together with the optimizing killed weights
/// and the supporting hedges.
#[derive(Debug, Clone)]
pub struct ValueProcess {
    /// Value per node; zero at nodes outside the quasi-sure support.
    pub values: Vec<f64>,
    /// Optimizing weights per interior supported node (full child vector
    /// plus cemetery mass).
    pub weights: Vec<Option<NodeWeights>>,
    /// Supporting hedge per interior supported node. Values and hedges are
    /// built jointly: each node value dominates `Z_c - h . dS_c` exactly in
    /// machine arithmetic, so hedge verification cannot drown in solver
    /// roundoff.
    pub hedges: Vec<Option<Vec<f64>>>,
    pub reachable: Vec<bool>,
    /// Whether the family passed the no-arbitrage check; pricing proceeds
    /// either way.
    pub na1_holds: bool,
    /// Nodes where no martingale mixture of charged children exists and the
    /// value was forced to zero.
    pub degenerate_nodes: Vec<usize>,
}

impl ValueProcess {
    pub fn root_value(&self) -> f64 {
        self.values[0]
    }
}

/// Charged child positions at a node: union of the models' supports.
fn support_positions(fam: &TreeFamily, node: usize) -> Vec<usize> {
    let n = fam.node(node);
    (0..n.children.len())
        .filter(|&pos| {
            fam.models()
                .iter()
                .any(|m| m.transition(node).map_or(false, |p| p[pos] > 0.0))
        })
        .collect()
}

/// Upper concave hull of `(x, y)` points, returned as hull vertices with
/// strictly increasing x. Duplicate x keep the largest y.
fn upper_hull(points: &mut Vec<(f64, f64, usize)>) -> Vec<(f64, f64, usize)> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    points.dedup_by(|next, prev| (next.0 - prev.0) == 0.0);
    let mut hull: Vec<(f64, f64, usize)> = Vec::with_capacity(points.len());
    for &p in points.iter() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// One-dimensional node problem: envelope of the child points at `s_v`.
/// Returns `(value, weights over the given children)`, or `None` when `s_v`
/// lies outside the hull of the children.
fn envelope_node(
    s_v: f64,
    children: &[(f64, f64)],
) -> Option<(f64, Vec<f64>)> {
    let scale = children
        .iter()
        .map(|(s, _)| s.abs())
        .fold(s_v.abs(), f64::max)
        .max(1.0);
    let tol = 1e-9 * scale;
    let mut pts: Vec<(f64, f64, usize)> = children
        .iter()
        .enumerate()
        .map(|(i, &(s, z))| (s, z, i))
        .collect();
    let hull = upper_hull(&mut pts);
    let lo = hull.first().unwrap();
    let hi = hull.last().unwrap();
    if s_v < lo.0 - tol || s_v > hi.0 + tol {
        return None;
    }
    let x = s_v.clamp(lo.0, hi.0);
    let mut weights = vec![0.0; children.len()];
    // Bracketing hull segment.
    let mut k = 0;
    while k + 1 < hull.len() && hull[k + 1].0 < x {
        k += 1;
    }
    if hull.len() == 1 || (x - hull[k].0).abs() == 0.0 {
        weights[hull[k].2] = 1.0;
        return Some((hull[k].1, weights));
    }
    let (x0, y0, i0) = hull[k];
    let (x1, y1, i1) = hull[k + 1];
    let lambda = (x1 - x) / (x1 - x0);
    weights[i0] = lambda;
    weights[i1] = 1.0 - lambda;
    Some((lambda * y0 + (1.0 - lambda) * y1, weights))
}

/// Multi-dimensional node problem via the dense simplex.
fn lp_node(
    s_v: &[f64],
    children: &[(Vec<f64>, f64)],
) -> Result<Option<(f64, Vec<f64>)>> {
    let m = children.len();
    let d = s_v.len();
    let objective: Vec<f64> = children.iter().map(|(_, z)| *z).collect();
    let mut eq = Vec::with_capacity(d);
    for j in 0..d {
        let row: Vec<f64> = children.iter().map(|(s, _)| s[j] - s_v[j]).collect();
        eq.push((row, 0.0));
    }
    let ub = vec![(vec![1.0; m], 1.0)];
    match solve(&LpProblem { objective, eq, ub })? {
        LpSolution::Optimal { x, value } => {
            let mass: f64 = x.iter().sum();
            if mass <= 1e-9 && value.abs() <= 1e-12 {
                // Only the trivial weight is feasible when no martingale
                // mixture exists; flag it so callers can warn.
                let full = full_mass_exists(s_v, children)?;
                if !full {
                    return Ok(None);
                }
            }
            Ok(Some((value.max(0.0), x)))
        }
        LpSolution::Infeasible => Ok(None),
        LpSolution::Unbounded => Err(Error::InvalidArgument(
            "node program cannot be unbounded".into(),
        )),
    }
}

/// Least-absolute supporting slope in one dimension: the slope interval is
/// `[max upward chord, min downward chord]` relative to `z_v`.
fn hedge_1d(s_v: f64, z_v: f64, children: &[(f64, f64)]) -> f64 {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &(s_c, z_c) in children {
        let ds = s_c - s_v;
        if ds.abs() <= 1e-14 * s_v.abs().max(1.0) {
            continue;
        }
        let bound = (z_c - z_v) / ds;
        if ds > 0.0 {
            lo = lo.max(bound);
        } else {
            hi = hi.min(bound);
        }
    }
    if lo > hi {
        return 0.5 * (lo + hi);
    }
    0.0_f64.clamp(
        if lo.is_finite() { lo } else { f64::MIN },
        if hi.is_finite() { hi } else { f64::MAX },
    )
}

/// Minimax supporting hedge in higher dimensions: phase one minimizes the
/// worst uncovered gap `max_c (z_c - h . dS_c)`, phase two picks the
/// least-infinity-norm vector among its minimizers.
fn hedge_lp(s_v: &[f64], z_ref: f64, children: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
    let d = s_v.len();
    // Phase one columns: h+_1..h+_d, h-_1..h-_d, u+, u-.
    let cols = 2 * d + 2;
    let mut objective = vec![0.0; cols];
    objective[2 * d] = -1.0;
    objective[2 * d + 1] = 1.0;
    let mut ub = Vec::with_capacity(children.len());
    for (s_c, z_c) in children {
        let mut row = vec![0.0; cols];
        for j in 0..d {
            let ds = s_c[j] - s_v[j];
            row[j] = -ds;
            row[d + j] = ds;
        }
        row[2 * d] = -1.0;
        row[2 * d + 1] = 1.0;
        ub.push((row, z_ref - z_c));
    }
    let minimax = match solve(&LpProblem {
        objective,
        eq: vec![],
        ub,
    })? {
        LpSolution::Optimal { value, .. } => -value + z_ref,
        // Unbounded gap means an arbitrage direction covers everything;
        // anchor the cover at the reference level.
        LpSolution::Unbounded => z_ref,
        LpSolution::Infeasible => {
            return Err(Error::InvalidArgument("hedge phase one infeasible".into()))
        }
    };
    // Phase two columns: h+_1..h+_d, h-_1..h-_d, t.
    let cols = 2 * d + 1;
    let mut objective = vec![0.0; cols];
    objective[2 * d] = -1.0;
    let mut ub = Vec::new();
    for (s_c, z_c) in children {
        let mut row = vec![0.0; cols];
        for j in 0..d {
            let ds = s_c[j] - s_v[j];
            row[j] = -ds;
            row[d + j] = ds;
        }
        ub.push((row, minimax + 1e-11 - z_c));
    }
    for j in 0..d {
        let mut pos = vec![0.0; cols];
        pos[j] = 1.0;
        pos[d + j] = -1.0;
        pos[2 * d] = -1.0;
        ub.push((pos, 0.0));
        let mut neg = vec![0.0; cols];
        neg[j] = -1.0;
        neg[d + j] = 1.0;
        neg[2 * d] = -1.0;
        ub.push((neg, 0.0));
    }
    match solve(&LpProblem {
        objective,
        eq: vec![],
        ub,
    })? {
        LpSolution::Optimal { x, .. } => Ok((0..d).map(|j| x[j] - x[d + j]).collect()),
        other => Err(Error::InvalidArgument(format!(
            "hedge phase two failed: {other:?}"
        ))),
    }
}

fn full_mass_exists(s_v: &[f64], children: &[(Vec<f64>, f64)]) -> Result<bool> {
    let m = children.len();
    let d = s_v.len();
    let mut eq = vec![(vec![1.0; m], 1.0)];
    for j in 0..d {
        let row: Vec<f64> = children.iter().map(|(s, _)| s[j] - s_v[j]).collect();
        eq.push((row, 0.0));
    }
    Ok(matches!(
        solve(&LpProblem {
            objective: vec![0.0; m],
            eq,
            ub: vec![],
        })?,
        LpSolution::Optimal { .. }
    ))
}

/// Backward sublinear-expectation recursion over quasi-sure supports.
pub fn sublinear_price_tree(fam: &TreeFamily, claim: &Claim) -> Result<ValueProcess> {
    claim.validate_on(fam)?;
    let na1_holds = na1_check(fam)?.holds;
    let reachable = fam.qs_reachable();
    let n = fam.nodes().len();
    let mut values = vec![0.0; n];
    let mut weights: Vec<Option<NodeWeights>> = vec![None; n];
    let mut hedges: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut degenerate = Vec::new();

    let mut order: Vec<usize> = (0..n).filter(|&id| reachable[id]).collect();
    order.sort_by_key(|&id| std::cmp::Reverse((fam.node(id).level, id)));

    for &id in &order {
        let node = fam.node(id);
        if fam.is_terminal(id) {
            values[id] = claim.eval_node(node);
            continue;
        }
        let spt = support_positions(fam, id);
        let lp_children: Vec<(Vec<f64>, f64)> = spt
            .iter()
            .map(|&pos| {
                let c = node.children[pos];
                (fam.node(c).s.clone(), values[c])
            })
            .collect();
        let solved: Option<(f64, Vec<f64>)> = if fam.dim() == 1 {
            let children: Vec<(f64, f64)> = lp_children
                .iter()
                .map(|(s, z)| (s[0], *z))
                .collect();
            envelope_node(node.s[0], &children)
        } else {
            lp_node(&node.s, &lp_children)?
        };
        let (mut value, spt_weights, is_degenerate) = match solved {
            Some((value, w)) => (value.max(0.0), w, false),
            // No martingale mixture: every feasible weight kills all mass
            // and the continuation value collapses to zero.
            None => (0.0, vec![0.0; spt.len()], true),
        };
        // Supporting hedge, computed jointly with the value: the stored
        // value dominates z_c - h . dS_c in exact machine arithmetic, so
        // downstream verification is free of solver roundoff.
        let hedge = if fam.dim() == 1 {
            let children: Vec<(f64, f64)> = lp_children
                .iter()
                .map(|(s, z)| (s[0], *z))
                .collect();
            vec![hedge_1d(node.s[0], value, &children)]
        } else {
            hedge_lp(&node.s, value, &lp_children)?
        };
        let achieved = lp_children
            .iter()
            .map(|(s_c, z_c)| {
                let gain: f64 = hedge
                    .iter()
                    .zip(s_c.iter().zip(&node.s))
                    .map(|(h, (sc, sv))| h * (sc - sv))
                    .sum();
                z_c - gain
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if achieved.is_finite() {
            value = value.max(achieved).max(0.0);
        }
        values[id] = value;
        let mut full = vec![0.0; node.children.len()];
        for (k, &pos) in spt.iter().enumerate() {
            full[pos] = spt_weights[k].max(0.0);
        }
        let mass: f64 = full.iter().sum();
        weights[id] = Some(NodeWeights {
            children: full,
            cemetery: (1.0 - mass).max(0.0),
        });
        hedges[id] = Some(hedge);
        if is_degenerate {
            degenerate.push(id);
        }
    }
    Ok(ValueProcess {
        values,
        weights,
        hedges,
        reachable,
        na1_holds,
        degenerate_nodes: degenerate,
    })
}

/// Brute-force dual value: per-node candidate weights from a projected
/// simplex grid and from exhaustive basic solutions of the martingale
/// system, folded backward by linearity. Guarded to four periods.
///
/// Candidates are martingale mixtures at full mass plus the total-kill
/// weight; intermediate masses are omitted because the node objective is
/// linear in the total mass, so its maximum over `[0, 1]` sits at an
/// endpoint.
pub fn dual_enumerate(fam: &TreeFamily, claim: &Claim, grid_step: f64) -> Result<f64> {
    if fam.terminal_level() > 4 {
        return Err(Error::TooLarge(
            "dual enumeration is limited to four periods".into(),
        ));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidArgument("grid step must lie in (0, 0.5]".into()));
    }
    claim.validate_on(fam)?;
    let reachable = fam.qs_reachable();
    let n = fam.nodes().len();
    let steps = (1.0 / grid_step).round() as usize;
    let mut values = vec![0.0; n];

    let mut order: Vec<usize> = (0..n).filter(|&id| reachable[id]).collect();
    order.sort_by_key(|&id| std::cmp::Reverse((fam.node(id).level, id)));

    for &id in &order {
        let node = fam.node(id);
        if fam.is_terminal(id) {
            values[id] = claim.eval_node(node);
            continue;
        }
        let spt = support_positions(fam, id);
        let m = spt.len();
        let child_s: Vec<&[f64]> = spt
            .iter()
            .map(|&pos| fam.node(node.children[pos]).s.as_slice())
            .collect();
        let child_z: Vec<f64> = spt
            .iter()
            .map(|&pos| values[node.children[pos]])
            .collect();
        let d = fam.dim();

        // Constraint stack: total mass one plus the centered martingale rows.
        let mut constraint = vec![vec![1.0; m]];
        let mut rhs = vec![1.0];
        for j in 0..d {
            constraint.push(child_s.iter().map(|s| s[j] - node.s[j]).collect());
            rhs.push(0.0);
        }

        let mut best = 0.0_f64; // total kill is always available
        let mut consider = |q: &[f64]| {
            if q.iter().any(|&x| x < -1e-12) {
                return;
            }
            let mass: f64 = q.iter().sum();
            if mass > 1.0 + 1e-9 {
                return;
            }
            for (row, &r) in constraint.iter().zip(&rhs) {
                if (dot(row, q) - r).abs() > 1e-7 {
                    return;
                }
            }
            let v = dot(q, &child_z);
            if v > best {
                best = v;
            }
        };

        // Projected simplex grid.
        let count = compositions_count(steps, m);
        if count > 3_000_000 {
            return Err(Error::TooLarge(format!(
                "grid of {count} points at node {id}"
            )));
        }
        let mut composition = vec![0usize; m];
        enumerate_compositions(steps, m, 0, &mut composition, &mut |k| {
            let r: Vec<f64> = k.iter().map(|&x| x as f64 * grid_step).collect();
            if let Ok(p) = project_affine(&r, &constraint, &rhs) {
                let clipped: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
                consider(&clipped);
            }
        });

        // Exhaustive basic solutions: supports of size at most d + 1.
        let max_support = (d + 1).min(m);
        for support in subsets_up_to(m, max_support) {
            let k = support.len();
            let a: Vec<Vec<f64>> = constraint
                .iter()
                .map(|row| support.iter().map(|&c| row[c]).collect())
                .collect();
            // Normal equations of the (d+1) x k system.
            let mut ata = vec![vec![0.0; k]; k];
            let mut atb = vec![0.0; k];
            for (row, &r) in a.iter().zip(&rhs) {
                for i in 0..k {
                    for j in 0..k {
                        ata[i][j] += row[i] * row[j];
                    }
                    atb[i] += row[i] * r;
                }
            }
            let Some(sol) = solve_dense(&ata, &atb) else {
                continue;
            };
            // Accept only genuine solutions of the full system.
            let mut q = vec![0.0; m];
            for (i, &c) in support.iter().enumerate() {
                q[c] = sol[i];
            }
            consider(&q);
        }

        values[id] = best;
    }
    Ok(values[0])
}

fn compositions_count(total: usize, parts: usize) -> usize {
    // C(total + parts - 1, parts - 1), saturating.
    let mut acc: usize = 1;
    for i in 0..parts.saturating_sub(1) {
        acc = acc.saturating_mul(total + i + 1) / (i + 1);
    }
    acc
}

fn enumerate_compositions(
    total: usize,
    parts: usize,
    idx: usize,
    scratch: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if idx + 1 == parts {
        scratch[idx] = total;
        f(scratch);
        return;
    }
    for k in 0..=total {
        scratch[idx] = k;
        enumerate_compositions(total - k, parts, idx + 1, scratch, f);
    }
}

fn subsets_up_to(m: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << m) {
        let size = mask.count_ones() as usize;
        if size <= max_size {
            out.push((0..m).filter(|&i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

/// Worst one-step supermartingale gap of a value field under a killed
/// measure; the cemetery contributes zero.
#[derive(Debug, Clone, Copy)]
pub struct SupermartGap {
    pub ok: bool,
    pub worst_gap: f64,
    pub worst_node: Option<usize>,
}

/// Checks `sum_c q_c Z_c <= Z_v` at every node the measure reaches alive.
pub fn supermartingale_check(
    fam: &TreeFamily,
    values: &[f64],
    killed: &KilledMeasure,
) -> SupermartGap {
    let mut worst_gap = 0.0_f64;
    let mut worst_node = None;
    for node in fam.nodes() {
        if node.children.is_empty() {
            continue;
        }
        let Some(w) = killed.node_weights(node.id) else {
            continue;
        };
        if killed.alive_reach_prob(fam, node.id) == 0.0 {
            continue;
        }
        let mean: f64 = node
            .children
            .iter()
            .zip(&w.children)
            .map(|(&c, &q)| q * values[c])
            .sum();
        let gap = mean - values[node.id];
        if gap > worst_gap {
            worst_gap = gap;
            worst_node = Some(node.id);
        }
    }
    SupermartGap {
        ok: worst_gap <= 1e-12,
        worst_gap,
        worst_node,
    }
}

/// Dynamic-programming residual: root value in one pass against the
/// two-stage computation through an intermediate level. The inner stage
/// prices on the conditioned subtrees (all models' subtree laws), the outer
/// stage prices the inner values as a terminal claim on the truncated tree.
pub fn dpp_check(fam: &TreeFamily, claim: &Claim, level: usize) -> Result<f64> {
    if level == 0 || level > fam.terminal_level() {
        return Err(Error::InvalidArgument(format!(
            "intermediate level {level} out of range"
        )));
    }
    let one_pass = sublinear_price_tree(fam, claim)?.root_value();

    // Inner stage: conditioned value at every supported level node.
    let reachable = fam.qs_reachable();
    let mut inner = std::collections::HashMap::new();
    for &v in &fam.nodes_at_level(level) {
        if !reachable[v] {
            continue;
        }
        let value = if fam.is_terminal(v) {
            claim.eval_node(fam.node(v))
        } else {
            let sub = subtree_family_all_models(fam, v)?;
            let table: std::collections::HashMap<usize, f64> = sub
                .family
                .nodes()
                .iter()
                .filter(|n| sub.family.is_terminal(n.id))
                .map(|n| (n.id, claim.eval_node(fam.node(sub.node_map[n.id]))))
                .collect();
            let inner_claim = Claim::new(crate::superhedge::claims::ClaimKind::Table {
                values: table,
            });
            sublinear_price_tree(&sub.family, &inner_claim)?.root_value()
        };
        inner.insert(v, value);
    }

    // Outer stage: truncate at the level and price the inner values.
    let truncated = truncate_family(fam, level)?;
    let table: std::collections::HashMap<usize, f64> = truncated
        .family
        .nodes()
        .iter()
        .filter(|n| truncated.family.is_terminal(n.id))
        .filter_map(|n| {
            inner
                .get(&truncated.node_map[n.id])
                .map(|&v| (n.id, v))
        })
        .collect();
    let outer_claim = Claim::new(crate::superhedge::claims::ClaimKind::Table { values: table });
    let two_stage = sublinear_price_tree(&truncated.family, &outer_claim)?.root_value();
    Ok((one_pass - two_stage).abs())
}

struct MappedFamily {
    family: TreeFamily,
    /// `node_map[new_id] = original_id`.
    node_map: Vec<usize>,
}

/// Subtree as a standalone family keeping every model's subtree law. Unlike
/// per-model conditioning this does not drop models that miss the node; the
/// pasting closure makes all of them available below it.
fn subtree_family_all_models(fam: &TreeFamily, node: usize) -> Result<MappedFamily> {
    let ids = fam.subtree(node);
    let mut new_id = std::collections::HashMap::new();
    for (k, &v) in ids.iter().enumerate() {
        new_id.insert(v, k);
    }
    let base_level = fam.node(node).level;
    let nodes: Vec<crate::models::tree::TreeNode> = ids
        .iter()
        .map(|&v| {
            let n = fam.node(v);
            crate::models::tree::TreeNode {
                id: new_id[&v],
                level: n.level - base_level,
                s: n.s.clone(),
                parent: if v == node {
                    None
                } else {
                    n.parent.map(|p| new_id[&p])
                },
                children: n.children.iter().map(|c| new_id[c]).collect(),
            }
        })
        .collect();
    let times: Vec<f64> = fam.times()[base_level..]
        .iter()
        .map(|t| t - fam.times()[base_level])
        .collect();
    let models = fam
        .models()
        .iter()
        .map(|law| {
            let mut trans = vec![None; nodes.len()];
            for &v in &ids {
                if let Some(p) = law.transition(v) {
                    trans[new_id[&v]] = Some(p.to_vec());
                }
            }
            crate::models::tree::ModelLaw::new(law.name.clone(), trans)
        })
        .collect();
    Ok(MappedFamily {
        family: TreeFamily::from_parts(times, nodes, models)?,
        node_map: ids,
    })
}

fn truncate_family(fam: &TreeFamily, level: usize) -> Result<MappedFamily> {
    let keep: Vec<usize> = fam
        .nodes()
        .iter()
        .filter(|n| n.level <= level)
        .map(|n| n.id)
        .collect();
    let mut new_id = std::collections::HashMap::new();
    for (k, &v) in keep.iter().enumerate() {
        new_id.insert(v, k);
    }
    let nodes: Vec<crate::models::tree::TreeNode> = keep
        .iter()
        .map(|&v| {
            let n = fam.node(v);
            crate::models::tree::TreeNode {
                id: new_id[&v],
                level: n.level,
                s: n.s.clone(),
                parent: n.parent.map(|p| new_id[&p]),
                children: if n.level == level {
                    Vec::new()
                } else {
                    n.children.iter().map(|c| new_id[c]).collect()
                },
            }
        })
        .collect();
    let times = fam.times()[..=level].to_vec();
    let models = fam
        .models()
        .iter()
        .map(|law| {
            let mut trans = vec![None; nodes.len()];
            for &v in &keep {
                if fam.node(v).level < level {
                    if let Some(p) = law.transition(v) {
                        trans[new_id[&v]] = Some(p.to_vec());
                    }
                }
            }
            crate::models::tree::ModelLaw::new(law.name.clone(), trans)
        })
        .collect();
    Ok(MappedFamily {
        family: TreeFamily::from_parts(times, nodes, models)?,
        node_map: keep,
    })
}
