//! Worst-case-volatility pricing PDE in one dimension.
//!
//! Solves `v_t + 1/2 sup_{sigma in [lo, hi]} sigma^2 s^2 v_ss = 0` backward
//! from the payoff: the adverse volatility is `hi` wherever the second
//! difference of the value is nonnegative and `lo` otherwise (ties take
//! `hi`). The default stepper is implicit in the diffusion with the
//! coefficient frozen from the previous time level and one Picard
//! refinement per step; an explicit stepper is available behind its
//! stability bound. Boundaries: the value is frozen at `s = 0` and the
//! second derivative vanishes at `s_max`.

use crate::error::{Error, Result};
use crate::linalg::normal_cdf;
use crate::models::sde::UncertaintySpec;
use crate::superhedge::claims::Claim;

/// Space-time resolution of the solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BsbGrid {
    pub n_t: usize,
    pub n_s: usize,
    pub s_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    /// Implicit diffusion with frozen coefficients and one Picard pass.
    ImplicitFrozen,
    /// Explicit scheme; rejected when `dt > ds^2 / (sigma_hi^2 s_max^2)`.
    Explicit,
}

/// Value and delta surfaces on the grid; row `k` is time `times[k]`.
#[derive(Debug, Clone)]
pub struct BsbSurface {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl BsbSurface {
    fn interp_row(&self, row: &[f64], s: f64) -> f64 {
        let ds = self.s[1] - self.s[0];
        let x = (s / ds).clamp(0.0, (self.s.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.s.len() - 2);
        let w = x - i as f64;
        (1.0 - w) * row[i] + w * row[i + 1]
    }

    /// Price read off the initial time level.
    pub fn price_at(&self, s0: f64) -> f64 {
        self.interp_row(&self.v[0], s0)
    }

    /// Delta at time index `k`, linearly interpolated in space.
    pub fn delta_at(&self, k: usize, s: f64) -> f64 {
        self.interp_row(&self.delta[k.min(self.delta.len() - 1)], s)
    }

    /// Sign of the second difference at time index `k` near `s`; drives the
    /// adverse volatility selection along simulated paths.
    pub fn convexity_sign(&self, k: usize, s: f64) -> f64 {
        let row = &self.v[k.min(self.v.len() - 1)];
        let ds = self.s[1] - self.s[0];
        let i = ((s / ds).round() as usize).clamp(1, self.s.len() - 2);
        let dd = row[i + 1] - 2.0 * row[i] + row[i - 1];
        if dd >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// CSV rows `t,s,v,delta`, row-major in time then space.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,v,delta\n");
        for (k, t) in self.times.iter().enumerate() {
            for (i, s) in self.s.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", t, s, self.v[k][i], self.delta[k][i]));
            }
        }
        out
    }
}

/// Zero-rate Black-Scholes call value; the closed-form reference for the
/// singleton-volatility case.
pub fn black_scholes_call(s0: f64, strike: f64, sigma: f64, t: f64) -> f64 {
    if s0 <= 0.0 {
        return 0.0;
    }
    let vol = sigma * t.sqrt();
    if vol <= 0.0 {
        return (s0 - strike).max(0.0);
    }
    let d1 = ((s0 / strike).ln() + 0.5 * vol * vol) / vol;
    let d2 = d1 - vol;
    s0 * normal_cdf(d1) - strike * normal_cdf(d2)
}

/// Backward solve of the worst-case-volatility equation for a claim on the
/// terminal asset value.
pub fn bsb_solve(
    spec: &UncertaintySpec,
    claim: &Claim,
    grid: BsbGrid,
    stepper: Stepper,
) -> Result<BsbSurface> {
    spec.validate()?;
    if spec.dim() != 1 {
        return Err(Error::InvalidArgument("the PDE engine is one-dimensional".into()));
    }
    let (sigma_lo, sigma_hi) = spec.vol_bounds()?;
    if grid.n_t == 0 || grid.n_s < 4 || !(grid.s_max > 0.0) {
        return Err(Error::InvalidArgument("degenerate grid".into()));
    }
    let n_t = grid.n_t;
    let n_s = grid.n_s;
    let dt = spec.horizon / n_t as f64;
    let ds = grid.s_max / n_s as f64;
    if stepper == Stepper::Explicit {
        let bound = ds * ds / (sigma_hi * sigma_hi * grid.s_max * grid.s_max);
        if dt > bound {
            return Err(Error::UnstableGrid(format!(
                "explicit stepper needs dt <= {bound:.3e}, got {dt:.3e}"
            )));
        }
    }
    let s: Vec<f64> = (0..=n_s).map(|i| i as f64 * ds).collect();
    let times: Vec<f64> = (0..=n_t).map(|k| k as f64 * dt).collect();
    let mut v = vec![vec![0.0; n_s + 1]; n_t + 1];
    for i in 0..=n_s {
        let payoff = claim.eval_scalar(s[i])?;
        if payoff < 0.0 || !payoff.is_finite() {
            return Err(Error::InvalidClaim(format!("payoff {payoff} at s = {}", s[i])));
        }
        v[n_t][i] = payoff;
    }
    let floor_value = v[n_t][0];

    let lo2 = sigma_lo * sigma_lo;
    let hi2 = sigma_hi * sigma_hi;
    let select = |row: &[f64], i: usize| -> f64 {
        let dd = row[i + 1] - 2.0 * row[i] + row[i - 1];
        if dd >= 0.0 {
            hi2
        } else {
            lo2
        }
    };

    for k in (0..n_t).rev() {
        let prev = v[k + 1].clone();
        let next = match stepper {
            Stepper::Explicit => {
                let mut row = prev.clone();
                for i in 1..n_s {
                    let sig2 = select(&prev, i);
                    let a = 0.5 * sig2 * s[i] * s[i] * dt / (ds * ds);
                    row[i] = prev[i] + a * (prev[i + 1] - 2.0 * prev[i] + prev[i - 1]);
                }
                row[0] = floor_value;
                row[n_s] = 2.0 * row[n_s - 1] - row[n_s - 2];
                row
            }
            Stepper::ImplicitFrozen => {
                let sel: Vec<f64> = (1..n_s).map(|i| select(&prev, i)).collect();
                let first = implicit_step(&prev, &sel, &s, dt, ds, floor_value);
                // One Picard refinement with coefficients from the solve.
                let sel2: Vec<f64> = (1..n_s).map(|i| select(&first, i)).collect();
                if sel2 == sel {
                    first
                } else {
                    implicit_step(&prev, &sel2, &s, dt, ds, floor_value)
                }
            }
        };
        v[k] = next;
    }

    let mut delta = vec![vec![0.0; n_s + 1]; n_t + 1];
    for k in 0..=n_t {
        for i in 0..=n_s {
            delta[k][i] = if i == 0 {
                (v[k][1] - v[k][0]) / ds
            } else if i == n_s {
                (v[k][n_s] - v[k][n_s - 1]) / ds
            } else {
                (v[k][i + 1] - v[k][i - 1]) / (2.0 * ds)
            };
        }
    }
    Ok(BsbSurface {
        times,
        s,
        v,
        delta,
        sigma_lo,
        sigma_hi,
    })
}

/// One implicit diffusion step: tridiagonal interior rows, a Dirichlet
/// floor at `s = 0` and a vanishing second difference at `s_max`.
fn implicit_step(
    prev: &[f64],
    sel: &[f64],
    s: &[f64],
    dt: f64,
    ds: f64,
    floor_value: f64,
) -> Vec<f64> {
    let n = prev.len() - 1;
    // Forward sweep writes v_i = e_i + g_i v_{i+1}.
    let mut e = vec![0.0; n + 1];
    let mut g = vec![0.0; n + 1];
    e[0] = floor_value;
    g[0] = 0.0;
    for i in 1..n {
        let a = 0.5 * sel[i - 1] * s[i] * s[i] * dt / (ds * ds);
        let b = 1.0 + 2.0 * a;
        let denom = b - a * g[i - 1];
        e[i] = (prev[i] + a * e[i - 1]) / denom;
        g[i] = a / denom;
    }
    // Last row: v_{n-2} - 2 v_{n-1} + v_n = 0.
    let denom = 1.0 - 2.0 * g[n - 1] + g[n - 2] * g[n - 1];
    let numer = 2.0 * e[n - 1] - e[n - 2] - g[n - 2] * e[n - 1];
    let mut out = vec![0.0; n + 1];
    out[n] = numer / denom;
    for i in (0..n).rev() {
        out[i] = e[i] + g[i] * out[i + 1];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sde::VolSet;
    use approx::assert_abs_diff_eq;

    fn spec(lo: f64, hi: f64) -> UncertaintySpec {
        UncertaintySpec {
            s0: vec![100.0],
            drift: vec![(0.0, 0.0)],
            vol: VolSet::Interval {
                sigma_lo: lo,
                sigma_hi: hi,
            },
            horizon: 1.0,
            steps: 400,
        }
    }

    #[test]
    fn singleton_volatility_matches_black_scholes() {
        let surface = bsb_solve(
            &spec(0.2, 0.2),
            &Claim::call(100.0),
            BsbGrid {
                n_t: 400,
                n_s: 400,
                s_max: 400.0,
            },
            Stepper::ImplicitFrozen,
        )
        .unwrap();
        let price = surface.price_at(100.0);
        let oracle = black_scholes_call(100.0, 100.0, 0.2, 1.0);
        assert!(
            (price - oracle).abs() / oracle <= 0.005,
            "price {price} vs oracle {oracle}"
        );
    }

    #[test]
    fn constant_payoff_is_flat() {
        let surface = bsb_solve(
            &spec(0.1, 0.2),
            &Claim::constant(3.0),
            BsbGrid {
                n_t: 50,
                n_s: 60,
                s_max: 300.0,
            },
            Stepper::ImplicitFrozen,
        )
        .unwrap();
        for row in &surface.v {
            for &x in row {
                assert_abs_diff_eq!(x, 3.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn convex_payoff_selects_high_volatility() {
        let uncertain = bsb_solve(
            &spec(0.1, 0.2),
            &Claim::call(100.0),
            BsbGrid {
                n_t: 400,
                n_s: 400,
                s_max: 400.0,
            },
            Stepper::ImplicitFrozen,
        )
        .unwrap();
        let oracle = black_scholes_call(100.0, 100.0, 0.2, 1.0);
        let price = uncertain.price_at(100.0);
        assert!(
            (price - oracle).abs() / oracle <= 0.005,
            "price {price} vs oracle {oracle}"
        );
    }

    #[test]
    fn explicit_stepper_guards_stability() {
        let r = bsb_solve(
            &spec(0.2, 0.2),
            &Claim::call(100.0),
            BsbGrid {
                n_t: 100,
                n_s: 400,
                s_max: 400.0,
            },
            Stepper::Explicit,
        );
        assert!(matches!(r, Err(Error::UnstableGrid(_))));
        // A time grid satisfying the bound runs and stays close to the
        // implicit answer.
        let fine = bsb_solve(
            &spec(0.2, 0.2),
            &Claim::call(100.0),
            BsbGrid {
                n_t: 6500,
                n_s: 100,
                s_max: 400.0,
            },
            Stepper::Explicit,
        )
        .unwrap();
        let oracle = black_scholes_call(100.0, 100.0, 0.2, 1.0);
        assert!((fine.price_at(100.0) - oracle).abs() / oracle <= 0.02);
    }

    #[test]
    fn grid_refinement_contracts() {
        let price = |n: usize| {
            bsb_solve(
                &spec(0.1, 0.2),
                &Claim::call(100.0),
                BsbGrid {
                    n_t: n,
                    n_s: n,
                    s_max: 400.0,
                },
                Stepper::ImplicitFrozen,
            )
            .unwrap()
            .price_at(100.0)
        };
        let p1 = price(100);
        let p2 = price(200);
        let p4 = price(400);
        let c1 = (p2 - p1).abs();
        let c2 = (p4 - p2).abs();
        assert!(
            c2 <= c1 / 1.7,
            "refinement contracted only from {c1:.3e} to {c2:.3e}"
        );
    }

    #[test]
    fn deltas_are_bounded_for_a_call() {
        let surface = bsb_solve(
            &spec(0.2, 0.2),
            &Claim::call(100.0),
            BsbGrid {
                n_t: 100,
                n_s: 200,
                s_max: 400.0,
            },
            Stepper::ImplicitFrozen,
        )
        .unwrap();
        for k in 0..surface.delta.len() {
            for i in 0..surface.delta[k].len() {
                let d = surface.delta[k][i];
                assert!((-1e-9..=1.0 + 1e-9).contains(&d), "delta {d} at ({k},{i})");
            }
        }
    }
}
