//! Finite event trees with a family of transition laws.
//!
//! A [`TreeFamily`] is a rooted tree whose nodes carry asset values in
//! `R^d`, together with a finite list of [`ModelLaw`]s assigning transition
//! probabilities over each node's children. Zero-probability edges encode
//! null sets, so the family is genuinely nondominated: different models may
//! charge different parts of the tree. The quasi-sure support of a node is
//! the set of children charged by at least one model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;

/// One node of the event tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    pub level: usize,
    pub s: Vec<f64>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Transition probabilities of a single model, aligned with each node's
/// child order. Zero entries are genuine null edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelLaw {
    pub name: String,
    trans: Vec<Option<Vec<f64>>>,
}

impl ModelLaw {
    pub fn new(name: impl Into<String>, trans: Vec<Option<Vec<f64>>>) -> Self {
        ModelLaw {
            name: name.into(),
            trans,
        }
    }

    /// Transition vector over the children of `node`, if any.
    pub fn transition(&self, node: usize) -> Option<&[f64]> {
        self.trans.get(node).and_then(|t| t.as_deref())
    }
}

/// A finite event tree plus a finite set of model laws on it.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFamily {
    times: Vec<f64>,
    nodes: Vec<TreeNode>,
    models: Vec<ModelLaw>,
    dim: usize,
}

/// Subtree produced by conditioning at a node, with maps back to the
/// original node ids and model indices.
#[derive(Debug, Clone)]
pub struct ConditionedFamily {
    pub family: TreeFamily,
    /// `node_map[new_id] = original_id`.
    pub node_map: Vec<usize>,
    /// `model_map[new_idx] = original_idx`; models that do not reach the
    /// conditioning node are dropped.
    pub model_map: Vec<usize>,
}

/// Per-node replacement transitions used by [`TreeFamily::paste`]. The outer
/// key is a node at the pasting level, the inner map assigns transitions to
/// nodes of that subtree (original ids).
#[derive(Debug, Clone, Default)]
pub struct PasteKernel(pub HashMap<usize, HashMap<usize, Vec<f64>>>);

impl TreeFamily {
    /// Builds and validates a family from raw parts. The root must be node
    /// 0; children must sit one level below their parent; every model must
    /// assign a probability vector over the children of every non-terminal
    /// node, summing to one within 1e-12.
    pub fn from_parts(
        times: Vec<f64>,
        nodes: Vec<TreeNode>,
        models: Vec<ModelLaw>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidTree("no nodes".into()));
        }
        if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTree(
                "times must be strictly increasing with at least two points".into(),
            ));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InvalidTree(format!(
                    "node ids must be dense and sorted; found {} at {}",
                    n.id, i
                )));
            }
        }
        if nodes[0].parent.is_some() || nodes[0].level != 0 {
            return Err(Error::InvalidTree("node 0 must be the root at level 0".into()));
        }
        let dim = nodes[0].s.len();
        if dim == 0 {
            return Err(Error::InvalidTree("zero-dimensional asset".into()));
        }
        let horizon = times.len() - 1;
        for n in &nodes {
            if n.s.len() != dim {
                return Err(Error::InvalidTree(format!("node {}: dimension mismatch", n.id)));
            }
            if n.s.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidTree(format!("node {}: non-finite value", n.id)));
            }
            if n.level > horizon {
                return Err(Error::InvalidTree(format!("node {}: level beyond horizon", n.id)));
            }
            if n.level < horizon && n.children.is_empty() {
                return Err(Error::InvalidTree(format!(
                    "node {}: interior node without children",
                    n.id
                )));
            }
            if n.level == horizon && !n.children.is_empty() {
                return Err(Error::InvalidTree(format!(
                    "node {}: terminal node with children",
                    n.id
                )));
            }
            for &c in &n.children {
                let child = nodes
                    .get(c)
                    .ok_or_else(|| Error::InvalidTree(format!("dangling child {c}")))?;
                if child.parent != Some(n.id) {
                    return Err(Error::InvalidTree(format!(
                        "child {} does not point back to parent {}",
                        c, n.id
                    )));
                }
                if child.level != n.level + 1 {
                    return Err(Error::InvalidTree(format!(
                        "child {} skips levels under {}",
                        c, n.id
                    )));
                }
            }
            if n.id != 0 {
                let p = n
                    .parent
                    .ok_or_else(|| Error::InvalidTree(format!("node {} has no parent", n.id)))?;
                if !nodes[p].children.contains(&n.id) {
                    return Err(Error::InvalidTree(format!("node {} dangles off {}", n.id, p)));
                }
            }
        }
        if models.is_empty() {
            return Err(Error::InvalidTree("at least one model law is required".into()));
        }
        for m in &models {
            if m.trans.len() != nodes.len() {
                return Err(Error::InvalidTree(format!(
                    "model {}: transition table length mismatch",
                    m.name
                )));
            }
            for n in &nodes {
                match m.transition(n.id) {
                    Some(p) => {
                        if n.children.is_empty() {
                            return Err(Error::InvalidTree(format!(
                                "model {}: transitions on terminal node {}",
                                m.name, n.id
                            )));
                        }
                        if p.len() != n.children.len() {
                            return Err(Error::InvalidTree(format!(
                                "model {}: transition length mismatch at node {}",
                                m.name, n.id
                            )));
                        }
                        if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                            return Err(Error::InvalidTree(format!(
                                "model {}: negative probability at node {}",
                                m.name, n.id
                            )));
                        }
                        let sum: f64 = p.iter().sum();
                        if (sum - 1.0).abs() > PROB_TOL {
                            return Err(Error::InvalidTree(format!(
                                "model {}: probabilities at node {} sum to {}",
                                m.name, n.id, sum
                            )));
                        }
                    }
                    None => {
                        if !n.children.is_empty() {
                            return Err(Error::InvalidTree(format!(
                                "model {}: missing transitions at node {}",
                                m.name, n.id
                            )));
                        }
                    }
                }
            }
        }
        Ok(TreeFamily {
            times,
            nodes,
            models,
            dim,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn models(&self) -> &[ModelLaw] {
        &self.models
    }

    pub fn model(&self, idx: usize) -> &ModelLaw {
        &self.models[idx]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn terminal_level(&self) -> usize {
        self.times.len() - 1
    }

    pub fn is_terminal(&self, id: usize) -> bool {
        self.nodes[id].level == self.terminal_level()
    }

    pub fn nodes_at_level(&self, level: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.level == level)
            .map(|n| n.id)
            .collect()
    }

    /// Probability under `model` of reaching `node` from the root.
    pub fn reach_prob(&self, model: usize, node: usize) -> f64 {
        let law = &self.models[model];
        let mut p = 1.0;
        let mut cur = node;
        while let Some(parent) = self.nodes[cur].parent {
            let pos = self.nodes[parent]
                .children
                .iter()
                .position(|&c| c == cur)
                .expect("validated tree");
            p *= law.transition(parent).expect("validated tree")[pos];
            if p == 0.0 {
                return 0.0;
            }
            cur = parent;
        }
        p
    }

    /// Children charged with positive probability by at least one model:
    /// the quasi-sure support at `node`.
    pub fn supports(&self, node: usize) -> Vec<usize> {
        let n = &self.nodes[node];
        n.children
            .iter()
            .enumerate()
            .filter(|(pos, _)| {
                self.models
                    .iter()
                    .any(|m| m.transition(node).map_or(false, |p| p[*pos] > 0.0))
            })
            .map(|(_, &c)| c)
            .collect()
    }

    /// Flags the nodes reachable from the root through quasi-sure supports.
    pub fn qs_reachable(&self) -> Vec<bool> {
        let mut flag = vec![false; self.nodes.len()];
        let mut stack = vec![self.root()];
        flag[self.root()] = true;
        while let Some(v) = stack.pop() {
            for c in self.supports(v) {
                if !flag[c] {
                    flag[c] = true;
                    stack.push(c);
                }
            }
        }
        flag
    }

    /// Expectation of a terminal-node function under one model.
    pub fn expect_terminal(&self, model: usize, f: impl Fn(&TreeNode) -> f64) -> f64 {
        self.nodes
            .iter()
            .filter(|n| self.is_terminal(n.id))
            .map(|n| {
                let p = self.reach_prob(model, n.id);
                if p > 0.0 {
                    p * f(n)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// All node ids in the subtree rooted at `node`, in BFS order.
    pub fn subtree(&self, node: usize) -> Vec<usize> {
        let mut out = vec![node];
        let mut head = 0;
        while head < out.len() {
            let v = out[head];
            head += 1;
            out.extend_from_slice(&self.nodes[v].children);
        }
        out
    }

    /// Ancestor of `node` at the given level.
    pub fn ancestor_at(&self, node: usize, level: usize) -> Result<usize> {
        let mut cur = node;
        while self.nodes[cur].level > level {
            cur = self.nodes[cur]
                .parent
                .ok_or_else(|| Error::InvalidTree("level underflow".into()))?;
        }
        if self.nodes[cur].level != level {
            return Err(Error::InvalidTree(format!(
                "node {node} has no ancestor at level {level}"
            )));
        }
        Ok(cur)
    }

    /// Conditions the family at `node`: the subtree becomes a family of its
    /// own, keeping asset values (the conditioned market starts at the
    /// node's value) and keeping each surviving model's subtree transitions,
    /// which are exactly its conditional law given the node. Models that do
    /// not reach the node are dropped; failing that for all models is an
    /// error.
    pub fn condition(&self, node: usize) -> Result<ConditionedFamily> {
        if node >= self.nodes.len() {
            return Err(Error::InvalidTree(format!("no node {node}")));
        }
        if self.is_terminal(node) {
            return Err(Error::InvalidTree(format!(
                "cannot condition at terminal node {node}"
            )));
        }
        let model_map: Vec<usize> = (0..self.models.len())
            .filter(|&m| self.reach_prob(m, node) > 0.0)
            .collect();
        if model_map.is_empty() {
            return Err(Error::InvalidTree(format!(
                "node {node} has zero mass under every model"
            )));
        }
        let ids = self.subtree(node);
        let mut new_id = HashMap::new();
        for (k, &v) in ids.iter().enumerate() {
            new_id.insert(v, k);
        }
        let base_level = self.nodes[node].level;
        let nodes: Vec<TreeNode> = ids
            .iter()
            .map(|&v| {
                let n = &self.nodes[v];
                TreeNode {
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
        let times: Vec<f64> = self.times[base_level..]
            .iter()
            .map(|t| t - self.times[base_level])
            .collect();
        let models: Vec<ModelLaw> = model_map
            .iter()
            .map(|&m| {
                let law = &self.models[m];
                let mut trans = vec![None; nodes.len()];
                for &v in &ids {
                    if let Some(p) = law.transition(v) {
                        trans[new_id[&v]] = Some(p.to_vec());
                    }
                }
                ModelLaw::new(law.name.clone(), trans)
            })
            .collect();
        Ok(ConditionedFamily {
            family: TreeFamily::from_parts(times, nodes, models)?,
            node_map: ids,
            model_map,
        })
    }

    /// Glues a new model law: `base` transitions strictly before level `s`,
    /// kernel transitions from level `s` on. Every node at level `s` that
    /// the base model reaches must have a kernel entry; kernel entries must
    /// stay inside their own subtree.
    pub fn paste(&self, base: usize, s: usize, kernel: &PasteKernel) -> Result<ModelLaw> {
        if base >= self.models.len() {
            return Err(Error::InvalidTree(format!("no model {base}")));
        }
        if s == 0 || s > self.terminal_level() {
            return Err(Error::InvalidTree(format!("pasting level {s} out of range")));
        }
        let base_law = &self.models[base];
        let mut trans: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for n in &self.nodes {
            if n.level < s {
                trans[n.id] = base_law.transition(n.id).map(|p| p.to_vec());
            }
        }
        for (&anchor, replacement) in &kernel.0 {
            if self.nodes.get(anchor).map(|n| n.level) != Some(s) {
                return Err(Error::InvalidTree(format!(
                    "kernel key {anchor} is not a level-{s} node"
                )));
            }
            let sub: Vec<usize> = self.subtree(anchor);
            for &u in replacement.keys() {
                if !sub.contains(&u) {
                    return Err(Error::InvalidTree(format!(
                        "kernel at {anchor} references foreign node {u}"
                    )));
                }
            }
            for &u in &sub {
                if self.nodes[u].children.is_empty() {
                    continue;
                }
                let p = replacement.get(&u).ok_or_else(|| {
                    Error::InvalidTree(format!("kernel at {anchor} misses node {u}"))
                })?;
                trans[u] = Some(p.clone());
            }
        }
        for n in &self.nodes {
            if n.level >= s && !n.children.is_empty() && trans[n.id].is_none() {
                let anchor = self.ancestor_at(n.id, s)?;
                if self.reach_prob(base, anchor) > 0.0 {
                    return Err(Error::InvalidTree(format!(
                        "kernel misses reachable level-{s} node {anchor}"
                    )));
                }
                // Unreachable subtree: keep the base transitions so the law
                // stays well-formed everywhere.
                trans[n.id] = base_law.transition(n.id).map(|p| p.to_vec());
            }
        }
        let law = ModelLaw::new(format!("{}+paste@{}", base_law.name, s), trans);
        // Revalidate through a throwaway family.
        TreeFamily::from_parts(
            self.times.clone(),
            self.nodes.clone(),
            vec![law.clone()],
        )?;
        Ok(law)
    }

    /// Conditional transitions of `model` restricted to the subtree of
    /// `anchor`, keyed by original node id. Convenience for building paste
    /// kernels.
    pub fn subtree_law(&self, model: usize, anchor: usize) -> HashMap<usize, Vec<f64>> {
        self.subtree(anchor)
            .into_iter()
            .filter_map(|u| {
                self.models[model]
                    .transition(u)
                    .map(|p| (u, p.to_vec()))
            })
            .collect()
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        spec.build()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TreeSpec = serde_json::from_str(text)?;
        spec.build()
    }

    /// Serializes the family as an explicit-format document.
    pub fn to_json(&self) -> Result<String> {
        let spec = TreeSpec::Explicit {
            times: self.times.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSpec {
                    id: n.id,
                    time: n.level,
                    s: n.s.clone(),
                })
                .collect(),
            edges: self
                .nodes
                .iter()
                .flat_map(|n| n.children.iter().map(|&c| EdgeSpec { from: n.id, to: c }))
                .collect(),
            models: self
                .models
                .iter()
                .map(|m| ModelSpec {
                    name: Some(m.name.clone()),
                    probs: self
                        .nodes
                        .iter()
                        .flat_map(|n| {
                            let t = m.transition(n.id).unwrap_or(&[]);
                            n.children
                                .iter()
                                .zip(t)
                                .map(|(&c, &p)| ProbSpec {
                                    from: n.id,
                                    to: c,
                                    p,
                                })
                                .collect::<Vec<_>>()
                        })
                        .collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&spec)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: usize,
    pub time: usize,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbSpec {
    pub from: usize,
    pub to: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub probs: Vec<ProbSpec>,
}

/// JSON document describing a tree family: either explicit nodes, edges and
/// models, or a lattice generator block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeSpec {
    Explicit {
        times: Vec<f64>,
        nodes: Vec<NodeSpec>,
        edges: Vec<EdgeSpec>,
        models: Vec<ModelSpec>,
    },
    /// Non-recombining binomial lattice with multiplicative factors.
    Binomial {
        s0: f64,
        up: f64,
        down: f64,
        periods: usize,
        /// One `(p_up, p_down)` pair per model.
        models: Vec<Vec<f64>>,
        #[serde(default)]
        dt: Option<f64>,
    },
    /// Non-recombining lattice with an arbitrary factor set per step.
    Lattice {
        s0: f64,
        factors: Vec<f64>,
        periods: usize,
        models: Vec<Vec<f64>>,
        #[serde(default)]
        dt: Option<f64>,
    },
    /// Two-model family whose factors span a volatility interval: each model
    /// is the martingale binomial lattice of one endpoint volatility, living
    /// on the union of both supports.
    VolInterval {
        s0: f64,
        sigma_lo: f64,
        sigma_hi: f64,
        periods: usize,
        dt: f64,
    },
}

impl TreeSpec {
    pub fn build(&self) -> Result<TreeFamily> {
        match self {
            TreeSpec::Explicit {
                times,
                nodes,
                edges,
                models,
            } => build_explicit(times, nodes, edges, models),
            TreeSpec::Binomial {
                s0,
                up,
                down,
                periods,
                models,
                dt,
            } => build_lattice(*s0, &[*up, *down], *periods, models, dt.unwrap_or(1.0)),
            TreeSpec::Lattice {
                s0,
                factors,
                periods,
                models,
                dt,
            } => build_lattice(*s0, factors, *periods, models, dt.unwrap_or(1.0)),
            TreeSpec::VolInterval {
                s0,
                sigma_lo,
                sigma_hi,
                periods,
                dt,
            } => build_vol_interval(*s0, *sigma_lo, *sigma_hi, *periods, *dt),
        }
    }
}

fn build_explicit(
    times: &[f64],
    nodes: &[NodeSpec],
    edges: &[EdgeSpec],
    models: &[ModelSpec],
) -> Result<TreeFamily> {
    let n = nodes.len();
    let mut built: Vec<TreeNode> = Vec::with_capacity(n);
    let mut sorted = nodes.to_vec();
    sorted.sort_by_key(|x| x.id);
    for (i, spec) in sorted.iter().enumerate() {
        if spec.id != i {
            return Err(Error::InvalidTree(format!("node ids must be 0..{}", n - 1)));
        }
        built.push(TreeNode {
            id: spec.id,
            level: spec.time,
            s: spec.s.clone(),
            parent: None,
            children: Vec::new(),
        });
    }
    for e in edges {
        if e.from >= n || e.to >= n {
            return Err(Error::InvalidTree(format!("dangling edge {}->{}", e.from, e.to)));
        }
        if built[e.to].parent.is_some() {
            return Err(Error::InvalidTree(format!("node {} has two parents", e.to)));
        }
        built[e.to].parent = Some(e.from);
        let child = e.to;
        built[e.from].children.push(child);
    }
    let laws: Vec<ModelLaw> = models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut by_edge: HashMap<(usize, usize), f64> = HashMap::new();
            for p in &m.probs {
                by_edge.insert((p.from, p.to), p.p);
            }
            let mut trans = vec![None; n];
            for node in &built {
                if node.children.is_empty() {
                    continue;
                }
                let v: Option<Vec<f64>> = node
                    .children
                    .iter()
                    .map(|&c| by_edge.get(&(node.id, c)).copied())
                    .collect();
                trans[node.id] = Some(v.ok_or_else(|| {
                    Error::InvalidTree(format!(
                        "model {k}: missing probability on an edge out of node {}",
                        node.id
                    ))
                })?);
            }
            Ok(ModelLaw::new(
                m.name.clone().unwrap_or_else(|| format!("m{k}")),
                trans,
            ))
        })
        .collect::<Result<_>>()?;
    TreeFamily::from_parts(times.to_vec(), built, laws)
}

fn build_lattice(
    s0: f64,
    factors: &[f64],
    periods: usize,
    models: &[Vec<f64>],
    dt: f64,
) -> Result<TreeFamily> {
    if s0 < 0.0 {
        return Err(Error::InvalidTree("lattice start value must be nonnegative".into()));
    }
    if factors.is_empty() || factors.iter().any(|&f| f < 0.0 || !f.is_finite()) {
        return Err(Error::InvalidTree("lattice factors must be nonnegative".into()));
    }
    if periods == 0 {
        return Err(Error::InvalidTree("lattice needs at least one period".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidTree("step length must be positive".into()));
    }
    let k = factors.len();
    let total: usize = (0..=periods).map(|l| k.pow(l as u32)).sum();
    if total > 500_000 {
        return Err(Error::TooLarge(format!("lattice with {total} nodes")));
    }
    let mut nodes = vec![TreeNode {
        id: 0,
        level: 0,
        s: vec![s0],
        parent: None,
        children: Vec::new(),
    }];
    let mut frontier = vec![0usize];
    for level in 1..=periods {
        let mut next = Vec::new();
        for &p in &frontier {
            for &f in factors {
                let id = nodes.len();
                nodes.push(TreeNode {
                    id,
                    level,
                    s: vec![nodes[p].s[0] * f],
                    parent: Some(p),
                    children: Vec::new(),
                });
                nodes[p].children.push(id);
                next.push(id);
            }
        }
        frontier = next;
    }
    let laws: Vec<ModelLaw> = models
        .iter()
        .enumerate()
        .map(|(i, probs)| {
            if probs.len() != k {
                return Err(Error::InvalidTree(format!(
                    "model {i}: expected {k} probabilities"
                )));
            }
            let mut trans = vec![None; nodes.len()];
            for n in &nodes {
                if !n.children.is_empty() {
                    trans[n.id] = Some(probs.clone());
                }
            }
            Ok(ModelLaw::new(format!("m{i}"), trans))
        })
        .collect::<Result<_>>()?;
    let times = (0..=periods).map(|l| l as f64 * dt).collect();
    TreeFamily::from_parts(times, nodes, laws)
}

fn build_vol_interval(
    s0: f64,
    sigma_lo: f64,
    sigma_hi: f64,
    periods: usize,
    dt: f64,
) -> Result<TreeFamily> {
    if !(sigma_lo > 0.0 && sigma_hi > sigma_lo) {
        return Err(Error::InvalidTree(
            "volatility interval requires 0 < sigma_lo < sigma_hi".into(),
        ));
    }
    let sqrt_dt = dt.sqrt();
    let factors = vec![
        (sigma_hi * sqrt_dt).exp(),
        (sigma_lo * sqrt_dt).exp(),
        (-sigma_lo * sqrt_dt).exp(),
        (-sigma_hi * sqrt_dt).exp(),
    ];
    // Each endpoint volatility charges its own up/down pair with the
    // martingale weights of that binomial step.
    let crr = |u: f64, d: f64| (1.0 - d) / (u - d);
    let p_hi = crr(factors[0], factors[3]);
    let p_lo = crr(factors[1], factors[2]);
    let models = vec![
        vec![p_hi, 0.0, 0.0, 1.0 - p_hi],
        vec![0.0, p_lo, 1.0 - p_lo, 0.0],
    ];
    build_lattice(s0, &factors, periods, &models, dt)
}
