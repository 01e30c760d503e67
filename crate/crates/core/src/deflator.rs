//! Supermartingale deflators and killed measures.
//!
//! A [`Deflator`] is a strictly positive node-indexed process `Y` with unit
//! root value. When `Y` is a one-step supermartingale under a model `P`,
//! the exit construction [`follmer_extend`] turns it into a
//! [`KilledMeasure`] `Q` with per-node child weights `q_c = p_c Y_c / Y_v`
//! and cemetery mass for the deficit, the unique measure whose prior-to-
//! lifetime density with respect to `P` is `Y`. The density identity
//! `Q(A, alive) = E_P[Y 1_A]` is checked exactly on cylinder events by
//! [`density_identity_residual`].
//!
//! The continuous-time counterpart, where the lifetime is announced by a
//! sequence of stopping times, is demonstrated on the inverse-Bessel
//! example: [`inverse_bessel_demo`] measures the mass lost by the exit
//! measure against a closed-form Gaussian oracle, and
//! [`announce_lifetime`] checks announcement on simulated absorbed paths.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::normal_cdf;
use crate::models::tree::TreeFamily;
use crate::pathspace::{Lifetime, Path};

const TOL: f64 = 1e-12;

/// Strictly positive node-indexed process with `Y_root = 1`, optionally
/// factored into a martingale part and a nonincreasing part.
#[derive(Debug, Clone, PartialEq)]
pub struct Deflator {
    values: Vec<f64>,
    factorization: Option<Factorization>,
}

/// Multiplicative factorization `Y = martingale_part * decreasing_part`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub martingale_part: Vec<f64>,
    pub decreasing_part: Vec<f64>,
}

impl Deflator {
    /// Normalizes the root value to one and requires strict positivity.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
            return Err(Error::InvalidDeflator(
                "deflator values must be strictly positive".into(),
            ));
        }
        let root = values[0];
        for y in values.iter_mut() {
            *y /= root;
        }
        Ok(Deflator {
            values,
            factorization: None,
        })
    }

    /// Accepts a user-provided factorization and verifies its axioms: both
    /// parts positive, the decreasing part in `(0, 1]` starting at one and
    /// nonincreasing along every edge, product equal to the total.
    pub fn factored(
        fam: &TreeFamily,
        martingale_part: Vec<f64>,
        decreasing_part: Vec<f64>,
    ) -> Result<Self> {
        let n = fam.nodes().len();
        if martingale_part.len() != n || decreasing_part.len() != n {
            return Err(Error::InvalidDeflator("factor length mismatch".into()));
        }
        if decreasing_part[0] != 1.0 {
            return Err(Error::InvalidDeflator("decreasing part must start at 1".into()));
        }
        for &d in &decreasing_part {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::InvalidDeflator(
                    "decreasing part must take values in (0, 1]".into(),
                ));
            }
        }
        for node in fam.nodes() {
            for &c in &node.children {
                if decreasing_part[c] > decreasing_part[node.id] + 1e-15 {
                    return Err(Error::InvalidDeflator(format!(
                        "decreasing part rises along edge {} -> {}",
                        node.id, c
                    )));
                }
            }
        }
        let values: Vec<f64> = martingale_part
            .iter()
            .zip(&decreasing_part)
            .map(|(m, d)| m * d)
            .collect();
        let mut out = Deflator::new(values)?;
        out.factorization = Some(Factorization {
            martingale_part,
            decreasing_part,
        });
        Ok(out)
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn factorization(&self) -> Option<&Factorization> {
        self.factorization.as_ref()
    }

    /// JSON document `{"y": {node id: value}, "martingale_part": ...,
    /// "decreasing_part": ...}`; the factor maps are present only for
    /// factored deflators.
    pub fn to_json(&self) -> Result<String> {
        let mut doc = serde_json::Map::new();
        let to_map = |values: &[f64]| -> serde_json::Value {
            let mut map = serde_json::Map::new();
            for (id, &y) in values.iter().enumerate() {
                map.insert(id.to_string(), serde_json::json!(y));
            }
            serde_json::Value::Object(map)
        };
        doc.insert("y".into(), to_map(&self.values));
        if let Some(f) = &self.factorization {
            doc.insert("martingale_part".into(), to_map(&f.martingale_part));
            doc.insert("decreasing_part".into(), to_map(&f.decreasing_part));
        }
        Ok(serde_json::to_string_pretty(&serde_json::Value::Object(doc))?)
    }

    /// Parses the format written by [`Deflator::to_json`]. Factored
    /// documents are re-validated against the family.
    pub fn from_json(fam: &TreeFamily, text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text)?;
        let read_map = |key: &str| -> Result<Option<Vec<f64>>> {
            let Some(map) = doc.get(key) else {
                return Ok(None);
            };
            let map = map.as_object().ok_or_else(|| {
                Error::InvalidDeflator(format!("{key} must be an object of node values"))
            })?;
            let mut values = vec![f64::NAN; fam.nodes().len()];
            for (k, v) in map {
                let id: usize = k.parse().map_err(|_| {
                    Error::InvalidDeflator(format!("bad node id {k:?} in {key}"))
                })?;
                if id >= values.len() {
                    return Err(Error::InvalidDeflator(format!("node {id} not in family")));
                }
                values[id] = v.as_f64().ok_or_else(|| {
                    Error::InvalidDeflator(format!("bad value for node {id} in {key}"))
                })?;
            }
            if values.iter().any(|x| x.is_nan()) {
                return Err(Error::InvalidDeflator(format!("{key} misses some nodes")));
            }
            Ok(Some(values))
        };
        match (read_map("martingale_part")?, read_map("decreasing_part")?) {
            (Some(m), Some(d)) => Deflator::factored(fam, m, d),
            (None, None) => {
                let y = read_map("y")?
                    .ok_or_else(|| Error::InvalidDeflator("missing \"y\" map".into()))?;
                Deflator::new(y)
            }
            _ => Err(Error::InvalidDeflator(
                "factored form needs both martingale_part and decreasing_part".into(),
            )),
        }
    }
}

/// Transition weights of one node of a killed measure: probabilities over
/// the children plus explicit cemetery mass.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NodeWeights {
    pub children: Vec<f64>,
    pub cemetery: f64,
}

/// Node-indexed killed transition law on a tree family.
#[derive(Debug, Clone, PartialEq)]
pub struct KilledMeasure {
    weights: Vec<Option<NodeWeights>>,
}

impl KilledMeasure {
    pub fn new(fam: &TreeFamily, weights: Vec<Option<NodeWeights>>) -> Result<Self> {
        if weights.len() != fam.nodes().len() {
            return Err(Error::InvalidDeflator("weight table length mismatch".into()));
        }
        for (id, w) in weights.iter().enumerate() {
            if let Some(w) = w {
                if w.children.len() != fam.node(id).children.len() {
                    return Err(Error::InvalidDeflator(format!(
                        "weights at node {id} do not match the children"
                    )));
                }
                if w.children.iter().any(|&q| q < 0.0) || w.cemetery < -TOL {
                    return Err(Error::InvalidDeflator(format!(
                        "negative weight at node {id}"
                    )));
                }
                let total: f64 = w.children.iter().sum::<f64>() + w.cemetery;
                if (total - 1.0).abs() > TOL {
                    return Err(Error::InvalidDeflator(format!(
                        "weights at node {id} sum to {total}"
                    )));
                }
            }
        }
        Ok(KilledMeasure { weights })
    }

    pub fn node_weights(&self, node: usize) -> Option<&NodeWeights> {
        self.weights.get(node).and_then(|w| w.as_ref())
    }

    /// Probability of reaching `node` alive: the product of child weights
    /// along the root path.
    pub fn alive_reach_prob(&self, fam: &TreeFamily, node: usize) -> f64 {
        let mut p = 1.0;
        let mut cur = node;
        while let Some(parent) = fam.node(cur).parent {
            let pos = fam.node(parent)
                .children
                .iter()
                .position(|&c| c == cur)
                .expect("validated tree");
            match self.node_weights(parent) {
                Some(w) => p *= w.children[pos],
                None => return 0.0,
            }
            if p == 0.0 {
                return 0.0;
            }
            cur = parent;
        }
        p
    }

    /// Total cemetery mass accumulated up to and including `level`.
    pub fn killed_mass_by(&self, fam: &TreeFamily, level: usize) -> f64 {
        let alive: f64 = fam
            .nodes_at_level(level)
            .iter()
            .map(|&v| self.alive_reach_prob(fam, v))
            .sum();
        1.0 - alive
    }

    /// JSON document mapping node ids to their weight vectors.
    pub fn to_json(&self) -> Result<String> {
        let mut map = serde_json::Map::new();
        for (id, w) in self.weights.iter().enumerate() {
            if let Some(w) = w {
                map.insert(id.to_string(), serde_json::to_value(w)?);
            }
        }
        Ok(serde_json::to_string_pretty(&serde_json::Value::Object(map))?)
    }

    /// Parses the format written by [`KilledMeasure::to_json`].
    pub fn from_json(fam: &TreeFamily, text: &str) -> Result<Self> {
        let doc: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
        let mut weights = vec![None; fam.nodes().len()];
        for (k, v) in doc {
            let id: usize = k
                .parse()
                .map_err(|_| Error::InvalidDeflator(format!("bad node id {k:?}")))?;
            if id >= weights.len() {
                return Err(Error::InvalidDeflator(format!("node {id} not in family")));
            }
            weights[id] = Some(serde_json::from_value(v)?);
        }
        KilledMeasure::new(fam, weights)
    }
}

/// Outcome of the one-step supermartingale test.
#[derive(Debug, Clone, Copy)]
pub struct SupermartingaleCheck {
    pub is_supermartingale: bool,
    /// Largest value of `sum_c p_c Y_c - Y_v` over checked nodes; positive
    /// values are violations.
    pub worst_gap: f64,
    pub worst_node: Option<usize>,
}

/// Checks `sum_c p_c Y_c <= Y_v` at every node the model reaches.
pub fn is_supermartingale_deflator(
    fam: &TreeFamily,
    model: usize,
    deflator: &Deflator,
) -> SupermartingaleCheck {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_node = None;
    for node in fam.nodes() {
        if node.children.is_empty() || fam.reach_prob(model, node.id) == 0.0 {
            continue;
        }
        let p = fam.model(model).transition(node.id).expect("interior node");
        let mean: f64 = node
            .children
            .iter()
            .zip(p)
            .map(|(&c, &pc)| pc * deflator.value(c))
            .sum();
        let gap = mean - deflator.value(node.id);
        if gap > worst_gap {
            worst_gap = gap;
            worst_node = Some(node.id);
        }
    }
    if worst_node.is_none() {
        worst_gap = 0.0;
    }
    SupermartingaleCheck {
        is_supermartingale: worst_gap <= TOL,
        worst_gap,
        worst_node,
    }
}

/// Exit-measure construction: `q_c = p_c Y_c / Y_v` with the supermartingale
/// deficit as cemetery mass. Mass is lost exactly at nodes where `Y` is a
/// strict one-step supermartingale, and the alive edges are exactly the
/// model's charged edges.
pub fn follmer_extend(fam: &TreeFamily, model: usize, deflator: &Deflator) -> Result<KilledMeasure> {
    let check = is_supermartingale_deflator(fam, model, deflator);
    if !check.is_supermartingale {
        return Err(Error::InvalidDeflator(format!(
            "not a supermartingale: gap {} at node {:?}",
            check.worst_gap, check.worst_node
        )));
    }
    let mut weights = vec![None; fam.nodes().len()];
    for node in fam.nodes() {
        if node.children.is_empty() || fam.reach_prob(model, node.id) == 0.0 {
            continue;
        }
        let p = fam.model(model).transition(node.id).expect("interior node");
        let yv = deflator.value(node.id);
        let children: Vec<f64> = node
            .children
            .iter()
            .zip(p)
            .map(|(&c, &pc)| pc * deflator.value(c) / yv)
            .collect();
        let cemetery = (1.0 - children.iter().sum::<f64>()).max(0.0);
        weights[node.id] = Some(NodeWeights { children, cemetery });
    }
    KilledMeasure::new(fam, weights)
}

/// `|Q(A, alive at level) - E_P[Y 1_A]|` for a union `A` of level-`t` nodes.
pub fn density_identity_residual(
    fam: &TreeFamily,
    model: usize,
    deflator: &Deflator,
    killed: &KilledMeasure,
    level: usize,
    set: &[usize],
) -> Result<f64> {
    for &v in set {
        if fam.node(v).level != level {
            return Err(Error::InvalidArgument(format!(
                "node {v} is not at level {level}"
            )));
        }
    }
    let q_side: f64 = set.iter().map(|&v| killed.alive_reach_prob(fam, v)).sum();
    let p_side: f64 = set
        .iter()
        .map(|&v| fam.reach_prob(model, v) * deflator.value(v))
        .sum();
    Ok((q_side - p_side).abs())
}

/// Announcement times of one path for one level: the first grid index at
/// which the monitored coordinate enters `[0, level)`, if any.
#[derive(Debug, Clone)]
pub struct AnnouncementReport {
    pub levels: Vec<f64>,
    /// `times[path][level]` is the announcing grid index.
    pub times: Vec<Vec<Option<usize>>>,
    /// Paths that die without every level announcing strictly before death.
    pub violations: usize,
    /// Number of paths with finite lifetime.
    pub died: usize,
}

/// Evaluates the announcement scheme `tau_n = inf {t : X_t in [0, eps_n)}`
/// on sampled killed trajectories. The levels must decrease strictly.
pub fn announce_lifetime(paths: &[Path], levels: &[f64]) -> Result<AnnouncementReport> {
    if levels.is_empty()
        || levels.iter().any(|&e| !(e > 0.0))
        || levels.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidArgument(
            "levels must be positive and strictly decreasing".into(),
        ));
    }
    let mut times = Vec::with_capacity(paths.len());
    let mut violations = 0;
    let mut died = 0;
    for path in paths {
        let death = match path.lifetime() {
            Lifetime::Finite(i) => {
                died += 1;
                Some(i)
            }
            Lifetime::Infinite => None,
        };
        let horizon = death.unwrap_or(path.len());
        let mut per_level = Vec::with_capacity(levels.len());
        let mut ok = true;
        for &eps in levels {
            let hit = (0..horizon).find(|&i| {
                let v = path.value(i).expect("alive before death")[0];
                v < eps
            });
            if death.is_some() && hit.is_none() {
                ok = false;
            }
            per_level.push(hit);
        }
        if death.is_some() && !ok {
            violations += 1;
        }
        times.push(per_level);
    }
    Ok(AnnouncementReport {
        levels: levels.to_vec(),
        times,
        violations,
        died,
    })
}

/// Brownian paths from `x0`, absorbed into the cemetery at the first grid
/// point where they reach zero or below. These are the killed dynamics of
/// the inverse-Bessel exit measure, used to demonstrate announcement.
pub fn simulate_absorbed_brownian(
    x0: f64,
    horizon: f64,
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Path>> {
    if !(x0 > 0.0) || !(horizon > 0.0) || steps == 0 || n == 0 {
        return Err(Error::InvalidArgument("bad absorbed-walk parameters".into()));
    }
    let dt = horizon / steps as f64;
    let sqrt_dt = dt.sqrt();
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    (0..n)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 + 1);
            let mut values: Vec<Option<Vec<f64>>> = Vec::with_capacity(steps + 1);
            let mut x = x0;
            let mut dead = false;
            values.push(Some(vec![x]));
            for _ in 0..steps {
                if dead {
                    values.push(None);
                    continue;
                }
                let z: f64 = rng.sample(StandardNormal);
                x += sqrt_dt * z;
                if x <= 0.0 {
                    dead = true;
                    values.push(None);
                } else {
                    values.push(Some(vec![x]));
                }
            }
            Path::new(grid.clone(), values)
        })
        .collect()
}

/// Monte Carlo report of the inverse-Bessel mass-loss demo.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BesselReport {
    pub horizon: f64,
    pub samples: usize,
    pub seed: u64,
    /// Monte Carlo estimate of `E[1/R_T]` for the Bessel(3) endpoint from 1.
    pub estimate: f64,
    pub std_error: f64,
    /// Closed form `2 Phi(1/sqrt(T)) - 1`.
    pub oracle: f64,
    pub z_score: f64,
    /// `1 - estimate`: mass the exit measure sends to the cemetery by `T`.
    pub cemetery_estimate: f64,
    /// Closed form `2 (1 - Phi(1/sqrt(T)))`.
    pub cemetery_oracle: f64,
}

impl BesselReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "estimate,oracle,std_error,z_score,cemetery_estimate,cemetery_oracle,samples,horizon,seed\n",
        );
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            self.estimate,
            self.oracle,
            self.std_error,
            self.z_score,
            self.cemetery_estimate,
            self.cemetery_oracle,
            self.samples,
            self.horizon,
            self.seed
        ));
        out
    }
}

/// Closed-form `E[1/R_T]` for a Bessel(3) process started at 1.
pub fn inverse_bessel_oracle(horizon: f64) -> f64 {
    2.0 * normal_cdf(1.0 / horizon.sqrt()) - 1.0
}

/// Samples `R_T = |e_1 + W_T|` exactly through a 3-d Gaussian endpoint and
/// reports the Monte Carlo mean of `1/R_T` against the closed-form oracle.
/// The deficit of the mean below one is the cemetery mass of the associated
/// exit measure.
pub fn inverse_bessel_demo(horizon: f64, n: usize, seed: u64) -> Result<BesselReport> {
    if !(horizon > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("bad demo parameters".into()));
    }
    let sqrt_t = horizon.sqrt();
    // Per-chunk partial sums in a fixed order keep the result bit-identical
    // across thread counts.
    const CHUNK: usize = 8192;
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for idx in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(idx as u64 + 1);
                let w1: f64 = rng.sample(StandardNormal);
                let w2: f64 = rng.sample(StandardNormal);
                let w3: f64 = rng.sample(StandardNormal);
                let x = 1.0 + sqrt_t * w1;
                let y = sqrt_t * w2;
                let z = sqrt_t * w3;
                let r = (x * x + y * y + z * z).sqrt();
                let v = 1.0 / r;
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0) * n as f64 / (n as f64 - 1.0).max(1.0);
    let std_error = (var / n as f64).sqrt();
    let oracle = inverse_bessel_oracle(horizon);
    let z_score = if std_error > 0.0 {
        (mean - oracle) / std_error
    } else {
        0.0
    };
    Ok(BesselReport {
        horizon,
        samples: n,
        seed,
        estimate: mean,
        std_error,
        oracle,
        z_score,
        cemetery_estimate: 1.0 - mean,
        cemetery_oracle: 2.0 * (1.0 - normal_cdf(1.0 / sqrt_t)),
    })
}
