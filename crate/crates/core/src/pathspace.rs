//! Grid paths with an absorbing cemetery state.
//!
//! A [`Path`] is a piecewise-constant trajectory in `R^d` on a finite time
//! grid, extended by a cemetery symbol. Once a path hits the cemetery it
//! stays there; the first such grid index is its [`Lifetime`]. Operations
//! cover killing at a deterministic time, concatenation with a time shift,
//! the lifetime-dependent time change, and a Polish-space metric that
//! combines a lifetime distance with a Skorokhod-style distance of the
//! time-changed alive segments.
//!
//! All types are immutable after construction and all operations are pure.

use crate::error::{Error, Result};

/// First cemetery index of a path, or `Infinite` when it never dies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lifetime {
    Finite(usize),
    Infinite,
}

impl Lifetime {
    pub fn is_finite(&self) -> bool {
        matches!(self, Lifetime::Finite(_))
    }
}

/// Piecewise-constant grid path in `R^d` with cemetery entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: Vec<f64>,
    values: Vec<Option<Vec<f64>>>,
    dim: usize,
}

impl Path {
    /// Builds a path and enforces the structural invariants: strictly
    /// increasing grid starting at zero, alive start, absorption after the
    /// first cemetery entry, finite coordinates.
    pub fn new(grid: Vec<f64>, values: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::InvalidPath(
                "grid and values must be nonempty and of equal length".into(),
            ));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidPath("grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPath("grid must be strictly increasing".into()));
        }
        let dim = match &values[0] {
            Some(v) if !v.is_empty() => v.len(),
            Some(_) => return Err(Error::InvalidPath("zero-dimensional value".into())),
            None => return Err(Error::InvalidPath("path must start alive".into())),
        };
        let mut dead = false;
        for v in &values {
            match v {
                None => dead = true,
                Some(x) => {
                    if dead {
                        return Err(Error::InvalidPath(
                            "cemetery entries must absorb the path".into(),
                        ));
                    }
                    if x.len() != dim {
                        return Err(Error::InvalidPath("inconsistent dimension".into()));
                    }
                    if x.iter().any(|c| !c.is_finite()) {
                        return Err(Error::InvalidPath("non-finite coordinate".into()));
                    }
                }
            }
        }
        Ok(Path { grid, values, dim })
    }

    /// Path with no cemetery entries.
    pub fn alive(grid: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        Path::new(grid, values.into_iter().map(Some).collect())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value at grid index `i`; `None` is the cemetery.
    pub fn value(&self, i: usize) -> Option<&[f64]> {
        self.values[i].as_deref()
    }

    pub fn starts_at_origin(&self) -> bool {
        self.values[0]
            .as_ref()
            .is_some_and(|v| v.iter().all(|&c| c == 0.0))
    }

    /// First cemetery index, or `Infinite`.
    pub fn lifetime(&self) -> Lifetime {
        match self.values.iter().position(|v| v.is_none()) {
            Some(i) => Lifetime::Finite(i),
            None => Lifetime::Infinite,
        }
    }

    /// Grid time of the first cemetery entry, `+inf` for immortal paths.
    pub fn lifetime_time(&self) -> f64 {
        match self.lifetime() {
            Lifetime::Finite(i) => self.grid[i],
            Lifetime::Infinite => f64::INFINITY,
        }
    }

    /// Kills the path from time `t` on: grid points `>= t` become cemetery.
    ///
    /// Lifetimes are strictly positive, so the initial value always
    /// survives; killing at or below time zero therefore kills from the
    /// first positive grid point. Idempotent by construction.
    pub fn kill_at(&self, t: f64) -> Path {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if i > 0 && self.grid[i] >= t {
                    None
                } else {
                    v.clone()
                }
            })
            .collect();
        Path {
            grid: self.grid.clone(),
            values,
            dim: self.dim,
        }
    }

    /// Concatenates `suffix` onto `self` at time `t` with the usual shift:
    /// the result follows `self` before `t` and `self(t) + suffix(s - t)`
    /// from `t` on, with `x + cemetery = cemetery`.
    pub fn concat(&self, t: f64, suffix: &Path) -> Result<Path> {
        let anchor = self
            .grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::InvalidPath(format!("time {t} is not a grid point")))?;
        let base = self.values[anchor]
            .clone()
            .ok_or_else(|| Error::InvalidPath("prefix is dead at the splice time".into()))?;
        if suffix.dim != self.dim {
            return Err(Error::InvalidPath("dimension mismatch".into()));
        }
        if !suffix.starts_at_origin() {
            return Err(Error::InvalidPath("suffix must start at the origin".into()));
        }
        let mut grid = Vec::with_capacity(anchor + suffix.len());
        let mut values = Vec::with_capacity(anchor + suffix.len());
        for i in 0..anchor {
            grid.push(self.grid[i]);
            values.push(self.values[i].clone());
        }
        for (s, v) in suffix.grid.iter().zip(&suffix.values) {
            grid.push(self.grid[anchor] + s);
            values.push(v.as_ref().map(|x| {
                x.iter().zip(&base).map(|(a, b)| a + b).collect::<Vec<f64>>()
            }));
        }
        Path::new(grid, values)
    }

    /// Distance combining the lifetime metric `|1/z - 1/z'|` with the
    /// Skorokhod distance of the time-changed alive segments.
    pub fn distance(&self, other: &Path) -> f64 {
        let z1 = self.lifetime_time();
        let z2 = other.lifetime_time();
        let inv = |z: f64| if z.is_infinite() { 0.0 } else { 1.0 / z };
        let lifetime_term = (inv(z1) - inv(z2)).abs();
        let a = self.canonical_steps();
        let b = other.canonical_steps();
        lifetime_term + skorokhod_step_distance(&a, &b)
    }

    /// Canonical step representation of the time-changed alive segment:
    /// start value plus genuine jumps (value changes) at time-changed times.
    fn canonical_steps(&self) -> StepFn {
        let z = self.lifetime_time();
        let alive_len = match self.lifetime() {
            Lifetime::Finite(i) => i,
            Lifetime::Infinite => self.len(),
        };
        let start = self.values[0].clone().expect("alive start");
        let mut jumps = Vec::new();
        let mut current = &start;
        for i in 1..alive_len {
            let v = self.values[i].as_ref().expect("alive prefix");
            if v != current {
                let s = time_change_inverse(z, self.grid[i]).expect("alive time below lifetime");
                jumps.push((s, v.clone()));
                current = v;
            }
        }
        StepFn { start, jumps }
    }

    /// CSV rows `time,component_1..component_d,alive`; cemetery rows carry
    /// an alive flag of 0 and blank components.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for j in 1..=self.dim {
            out.push_str(&format!(",component_{j}"));
        }
        out.push_str(",alive\n");
        for (t, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{t}"));
            match v {
                Some(x) => {
                    for c in x {
                        out.push_str(&format!(",{c}"));
                    }
                    out.push_str(",1\n");
                }
                None => {
                    for _ in 0..self.dim {
                        out.push(',');
                    }
                    out.push_str(",0\n");
                }
            }
        }
        out
    }

    /// Parses the format written by [`Path::to_csv`].
    pub fn from_csv(text: &str) -> Result<Path> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidPath("empty csv".into()))?;
        let dim = header.split(',').count().saturating_sub(2);
        if dim == 0 {
            return Err(Error::InvalidPath("csv header lacks components".into()));
        }
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 2 {
                return Err(Error::InvalidPath(format!("bad csv row: {line}")));
            }
            let t: f64 = fields[0]
                .parse()
                .map_err(|_| Error::InvalidPath(format!("bad time: {}", fields[0])))?;
            grid.push(t);
            let alive = fields[dim + 1].trim() == "1";
            if alive {
                let mut v = Vec::with_capacity(dim);
                for f in &fields[1..=dim] {
                    v.push(
                        f.parse()
                            .map_err(|_| Error::InvalidPath(format!("bad component: {f}")))?,
                    );
                }
                values.push(Some(v));
            } else {
                values.push(None);
            }
        }
        Path::new(grid, values)
    }
}

/// Lifetime-parametrized time change: identity for immortal paths, a
/// saturating exponential clock `z (1 - e^{-t})` onto `[0, z)` otherwise.
pub fn time_change(z: f64, t: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument("lifetime parameter must be positive".into()));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument("time must be nonnegative".into()));
    }
    if z.is_infinite() {
        Ok(t)
    } else {
        Ok(z * (1.0 - (-t).exp()))
    }
}

/// Inverse of [`time_change`] on `[0, z)`.
pub fn time_change_inverse(z: f64, u: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument("lifetime parameter must be positive".into()));
    }
    if z.is_infinite() {
        if u < 0.0 {
            return Err(Error::InvalidArgument("time must be nonnegative".into()));
        }
        return Ok(u);
    }
    if !(0.0..).contains(&u) || u >= z {
        return Err(Error::InvalidArgument(format!("{u} outside [0, {z})")));
    }
    Ok(-(1.0 - u / z).ln())
}

/// Step function: `start` on `[0, t_1)`, then the k-th jump value from its
/// jump time on. Jump values differ from their predecessors.
struct StepFn {
    start: Vec<f64>,
    jumps: Vec<(f64, Vec<f64>)>,
}

impl StepFn {
    fn value(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.start
        } else {
            &self.jumps[k - 1].1
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact Skorokhod J1 distance between two finite step functions.
///
/// Dynamic program over monotone alignments of the two jump sequences: a
/// diagonal step matches two jumps and pays their time offset, horizontal
/// and vertical steps leave a jump unmatched and only pay the value gap of
/// the new overlap segment. For step functions this minimax equals the
/// infimum over continuous reparametrizations, so the metric axioms hold
/// exactly (up to rounding).
fn skorokhod_step_distance(x: &StepFn, y: &StepFn) -> f64 {
    let m = x.jumps.len();
    let n = y.jumps.len();
    let cost = |i: usize, j: usize| euclid(x.value(i), y.value(j));
    let mut dp = vec![vec![f64::INFINITY; n + 1]; m + 1];
    dp[0][0] = cost(0, 0);
    for i in 0..=m {
        for j in 0..=n {
            if i == 0 && j == 0 {
                continue;
            }
            let here = cost(i, j);
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(dp[i - 1][j].max(here));
            }
            if j > 0 {
                best = best.min(dp[i][j - 1].max(here));
            }
            if i > 0 && j > 0 {
                let time_gap = (x.jumps[i - 1].0 - y.jumps[j - 1].0).abs();
                best = best.min(dp[i - 1][j - 1].max(time_gap).max(here));
            }
            dp[i][j] = best;
        }
    }
    dp[m][n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p1(grid: &[f64], vals: &[Option<f64>]) -> Path {
        Path::new(
            grid.to_vec(),
            vals.iter().map(|v| v.map(|x| vec![x])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn lifetime_examples() {
        let alive = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(1.0), Some(2.0)]);
        assert_eq!(alive.lifetime(), Lifetime::Infinite);

        let dying = p1(&[0.0, 1.0, 2.0, 3.0], &[Some(0.0), Some(1.0), None, None]);
        assert_eq!(dying.lifetime(), Lifetime::Finite(2));
    }

    #[test]
    fn construction_rejects_bad_paths() {
        assert!(Path::new(vec![0.0], vec![None]).is_err());
        assert!(Path::new(
            vec![0.0, 1.0],
            vec![Some(vec![0.0]), Some(vec![f64::NAN])]
        )
        .is_err());
        // Resurrection is not a path.
        assert!(Path::new(
            vec![0.0, 1.0, 2.0],
            vec![Some(vec![0.0]), None, Some(vec![1.0])]
        )
        .is_err());
        assert!(Path::new(vec![0.5, 1.0], vec![Some(vec![0.0]), Some(vec![1.0])]).is_err());
    }

    #[test]
    fn kill_at_matches_lifetime() {
        let p = p1(&[0.0, 1.0, 2.0, 3.0], &[Some(0.0), Some(1.0), Some(2.0), Some(3.0)]);
        let killed = p.kill_at(2.0);
        assert_eq!(killed.lifetime(), Lifetime::Finite(2));
        // Killing at the first positive grid point keeps only the start alive.
        let k1 = p.kill_at(1.0);
        assert_eq!(k1.lifetime(), Lifetime::Finite(1));
        // Idempotent.
        assert_eq!(killed.kill_at(2.0), killed);
        // A huge horizon is the identity on immortal paths.
        assert_eq!(p.kill_at(1e12), p);
        // Killing before an existing cemetery shortens the lifetime.
        let q = p.kill_at(3.0);
        assert_eq!(q.kill_at(1.5).lifetime(), Lifetime::Finite(2));
    }

    #[test]
    fn concat_at_zero_returns_suffix() {
        let prefix = p1(&[0.0, 1.0], &[Some(0.0), Some(5.0)]);
        let suffix = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(2.0), Some(3.0)]);
        let glued = prefix.concat(0.0, &suffix).unwrap();
        assert_eq!(glued, suffix);
    }

    #[test]
    fn concat_frozen_suffix_freezes_prefix_value() {
        let prefix = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(4.0), Some(9.0)]);
        let suffix = p1(&[0.0, 1.0], &[Some(0.0), Some(0.0)]);
        let glued = prefix.concat(1.0, &suffix).unwrap();
        assert_eq!(glued.grid(), &[0.0, 1.0, 2.0]);
        assert_eq!(glued.value(1).unwrap(), &[4.0]);
        assert_eq!(glued.value(2).unwrap(), &[4.0]);
    }

    #[test]
    fn concat_lifetime_shifts_by_anchor() {
        let prefix = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(4.0), Some(9.0)]);
        let suffix = p1(&[0.0, 1.0, 2.0], &[Some(0.0), None, None]);
        let glued = prefix.concat(1.0, &suffix).unwrap();
        // Suffix dies at its time 1, so the spliced path dies at 1 + 1.
        assert_eq!(glued.lifetime_time(), 2.0);
        assert_eq!(glued.value(1).unwrap(), &[4.0]);
    }

    #[test]
    fn concat_rejects_bad_inputs() {
        let prefix = p1(&[0.0, 1.0, 2.0], &[Some(0.0), None, None]);
        let suffix = p1(&[0.0, 1.0], &[Some(0.0), Some(1.0)]);
        assert!(prefix.concat(1.0, &suffix).is_err());
        assert!(prefix.concat(0.5, &suffix).is_err());
        let off_origin = p1(&[0.0, 1.0], &[Some(1.0), Some(2.0)]);
        let alive = p1(&[0.0, 1.0], &[Some(0.0), Some(1.0)]);
        assert!(alive.concat(0.0, &off_origin).is_err());
    }

    #[test]
    fn kill_concat_compatibility() {
        let prefix = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(4.0), Some(9.0)]);
        let suffix = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(1.0), Some(2.0)]);
        let glued = prefix.concat(1.0, &suffix).unwrap();
        let lhs = glued.kill_at(1.0);
        let rhs = prefix.kill_at(1.0);
        assert_eq!(lhs.lifetime_time(), rhs.lifetime_time());
        assert_eq!(lhs.value(0), rhs.value(0));
    }

    #[test]
    fn time_change_examples() {
        assert_abs_diff_eq!(time_change(f64::INFINITY, 5.0).unwrap(), 5.0);
        assert_abs_diff_eq!(
            time_change(2.0, std::f64::consts::LN_2).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(time_change(0.0, 1.0).is_err());
        assert!(time_change(-1.0, 1.0).is_err());
        for &z in &[0.5, 1.0, 3.0, f64::INFINITY] {
            for &t in &[0.0, 0.1, 1.0, 4.5] {
                let u = time_change(z, t).unwrap();
                assert!(u < z);
                assert_abs_diff_eq!(time_change_inverse(z, u).unwrap(), t, epsilon = 1e-9);
            }
        }
        // Strictly increasing with supremum z (below the saturation range
        // of the exponential).
        let z = 2.0;
        let mut prev = -1.0;
        for k in 0..30 {
            let u = time_change(z, k as f64).unwrap();
            assert!(u > prev && u < z);
            prev = u;
        }
    }

    #[test]
    fn distance_axioms_and_examples() {
        let p = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(1.0), Some(2.0)]);
        assert_eq!(p.distance(&p), 0.0);

        // Two immortal paths: lifetime term vanishes.
        let q = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(1.5), Some(2.0)]);
        let d = p.distance(&q);
        assert!(d > 0.0);
        assert_abs_diff_eq!(d, q.distance(&p), epsilon = 1e-15);

        // Immortal vs killed at grid time 2: the lifetime term is 1/2. The
        // immortal partner is built so that both time-changed alive
        // segments are the same step function (jump to 1 at ln 2), making
        // the total distance exactly the lifetime term.
        let killed = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(1.0), None]);
        let frozen = p1(
            &[0.0, std::f64::consts::LN_2, 5.0],
            &[Some(0.0), Some(1.0), Some(1.0)],
        );
        let d2 = frozen.distance(&killed);
        assert_abs_diff_eq!(d2, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn distance_identifies_equal_step_functions_across_grids() {
        let p = p1(&[0.0, 1.0, 2.0], &[Some(0.0), Some(0.0), Some(3.0)]);
        let q = p1(
            &[0.0, 0.5, 1.0, 2.0, 4.0],
            &[Some(0.0), Some(0.0), Some(0.0), Some(3.0), Some(3.0)],
        );
        assert_abs_diff_eq!(p.distance(&q), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let p = Path::new(
            vec![0.0, 0.5, 1.0],
            vec![Some(vec![0.0, 1.0]), Some(vec![2.5, -1.0]), None],
        )
        .unwrap();
        let text = p.to_csv();
        let back = Path::from_csv(&text).unwrap();
        assert_eq!(p, back);
    }
}
