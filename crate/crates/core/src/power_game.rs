//! Iterative best-response power control and Nash-equilibrium checks.
//!
//! Player `i` has utility
//! `U_i(q) = (μ_i/t_i) M_ii q_i − ½ M_ii q_i² − q_i (Σ_{j≠i} M_ij q_j + σ_i²)`
//! whose maximizer over `[0, q_max,i]` is the clamped update
//! `q_i ← clamp(μ_i/t_i − (Σ_{j≠i} M_ij q_j + σ_i²)/M_ii, 0, q_max,i)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerGame {
    /// Gain matrix; strictly positive diagonal, nonnegative elsewhere.
    pub m: DMatrix<f64>,
    pub mu: Vec<f64>,
    /// Per-player scheduling scale, strictly positive.
    pub t: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub q_max: Vec<f64>,
    pub q: Vec<f64>,
    pub tau_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub q: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PowerGame {
    /// Game starting from zero power.
    pub fn new(
        m: DMatrix<f64>,
        mu: Vec<f64>,
        t: Vec<f64>,
        sigma2: Vec<f64>,
        q_max: Vec<f64>,
    ) -> Result<Self> {
        let n = m.nrows();
        let game = Self {
            q: vec![0.0; n],
            m,
            mu,
            t,
            sigma2,
            q_max,
            tau_iter: 0,
        };
        game.validate()?;
        Ok(game)
    }

    pub fn players(&self) -> usize {
        self.m.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.m.nrows();
        if !self.m.is_square() {
            return Err(Error::InvalidGame(format!(
                "gain matrix is {}x{}",
                self.m.nrows(),
                self.m.ncols()
            )));
        }
        for (name, len) in [
            ("mu", self.mu.len()),
            ("t", self.t.len()),
            ("sigma2", self.sigma2.len()),
            ("q_max", self.q_max.len()),
            ("q", self.q.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has length {len}, expected {n}"
                )));
            }
        }
        for i in 0..n {
            if !(self.m[(i, i)] > 0.0) {
                return Err(Error::InvalidGame(format!("M[{i},{i}] = {} is not positive", self.m[(i, i)])));
            }
            for j in 0..n {
                if !(self.m[(i, j)] >= 0.0) || !self.m[(i, j)].is_finite() {
                    return Err(Error::InvalidGame(format!("M[{i},{j}] = {} is invalid", self.m[(i, j)])));
                }
            }
            if !(self.t[i] > 0.0) {
                return Err(invalid("t", format!("t[{i}] = {} must be > 0", self.t[i])));
            }
            if !(self.sigma2[i] >= 0.0) {
                return Err(invalid("sigma2", format!("sigma2[{i}] = {} must be >= 0", self.sigma2[i])));
            }
            if !(self.q_max[i] > 0.0) {
                return Err(invalid("q_max", format!("q_max[{i}] = {} must be > 0", self.q_max[i])));
            }
            if !self.mu[i].is_finite() {
                return Err(invalid("mu", format!("mu[{i}] is not finite")));
            }
        }
        Ok(())
    }

    fn interference(&self, i: usize, q: &[f64]) -> f64 {
        (0..self.players())
            .filter(|&j| j != i)
            .map(|j| self.m[(i, j)] * q[j])
            .sum::<f64>()
            + self.sigma2[i]
    }

    /// Unconstrained best response of player `i` against `q`.
    pub fn raw_response(&self, i: usize, q: &[f64]) -> f64 {
        self.mu[i] / self.t[i] - self.interference(i, q) / self.m[(i, i)]
    }

    /// One synchronous (Jacobi) best-response step from the current powers.
    pub fn best_response_step(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(self.jacobi(&self.q))
    }

    fn jacobi(&self, q: &[f64]) -> Vec<f64> {
        let next: Vec<f64> = (0..self.players())
            .map(|i| self.raw_response(i, q).clamp(0.0, self.q_max[i]))
            .collect();
        debug_assert!(next
            .iter()
            .zip(&self.q_max)
            .all(|(v, m)| (0.0..=*m).contains(v)));
        next
    }

    /// Applies one step in place.
    pub fn step(&mut self) -> Result<()> {
        self.q = self.best_response_step()?;
        self.tau_iter += 1;
        Ok(())
    }

    pub fn utility(&self, i: usize, q: &[f64]) -> f64 {
        let mii = self.m[(i, i)];
        (self.mu[i] / self.t[i]) * mii * q[i] - 0.5 * mii * q[i] * q[i]
            - q[i] * self.interference(i, q)
    }

    /// Spectral radius of `D⁻¹(M − D)`; below one the update is a contraction.
    pub fn coupling_radius(&self) -> f64 {
        let n = self.players();
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c[(i, j)] = self.m[(i, j)] / self.m[(i, i)];
                }
            }
        }
        c.complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Steps until the ∞-norm change drops below `eps` or `max_iter` steps ran.
/// Exhausting the cap is reported through `converged = false`.
pub fn iterate_to_convergence(game: &mut PowerGame, eps: f64, max_iter: usize) -> Result<Convergence> {
    if !(eps > 0.0) {
        return Err(invalid("eps", format!("{eps} must be > 0")));
    }
    game.validate()?;
    for it in 1..=max_iter {
        let next = game.jacobi(&game.q);
        let delta = next
            .iter()
            .zip(&game.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        game.q = next;
        game.tau_iter += 1;
        if delta < eps {
            return Ok(Convergence { q: game.q.clone(), iterations: it, converged: true });
        }
    }
    Ok(Convergence { q: game.q.clone(), iterations: max_iter, converged: false })
}

/// True when no player gains more than `tol` by deviating to any of `grid`
/// evenly spaced powers in `[0, q_max,i]`.
pub fn verify_nash(game: &PowerGame, q_star: &[f64], grid: usize, tol: f64) -> bool {
    let n = game.players();
    if q_star.len() != n {
        return false;
    }
    let mut q = q_star.to_vec();
    for i in 0..n {
        let base = game.utility(i, q_star);
        let steps = grid.max(2) - 1;
        for k in 0..=steps {
            q[i] = game.q_max[i] * k as f64 / steps as f64;
            if game.utility(i, &q) > base + tol {
                return false;
            }
        }
        q[i] = q_star[i];
    }
    true
}

/// Concave single-variable utility families for the source and relay sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilityFamily {
    /// `a p − b p²`.
    Quadratic { a: f64, b: f64 },
    /// `ln(1 + p) − c p`.
    LogLinear { c: f64 },
}

impl UtilityFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilityFamily::Quadratic { a, b } => {
                if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(invalid("b", format!("quadratic utility needs b > 0, got {b}")));
                }
            }
            UtilityFamily::LogLinear { c } => {
                if !(c > 0.0) || !c.is_finite() {
                    return Err(invalid("c", format!("log-linear utility needs c > 0, got {c}")));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, p: f64) -> f64 {
        match *self {
            UtilityFamily::Quadratic { a, b } => a * p - b * p * p,
            UtilityFamily::LogLinear { c } => (1.0 + p).ln() - c * p,
        }
    }

    /// Maximizer over `p ≥ 0`.
    pub fn argmax(&self) -> f64 {
        match *self {
            UtilityFamily::Quadratic { a, b } => (a / (2.0 * b)).max(0.0),
            UtilityFamily::LogLinear { c } => (1.0 / c - 1.0).max(0.0),
        }
    }
}

/// A power utility plus a concave head-count term `w ln n − cost·n` over
/// `1..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityParams {
    pub power: UtilityFamily,
    pub count_weight: f64,
    pub count_cost: f64,
    pub n_max: u32,
}

impl Default for UtilityParams {
    fn default() -> Self {
        Self {
            power: UtilityFamily::Quadratic { a: 1.0, b: 1.0 },
            count_weight: 2.0,
            count_cost: 1.0,
            n_max: 4,
        }
    }
}

impl UtilityParams {
    pub fn validate(&self) -> Result<()> {
        self.power.validate()?;
        if !(self.count_weight >= 0.0) || !(self.count_cost >= 0.0) {
            return Err(invalid("count_weight", "count term must have nonnegative weight and cost"));
        }
        if self.n_max == 0 {
            return Err(invalid("n_max", "must be >= 1"));
        }
        Ok(())
    }

    pub fn count_value(&self, n: u32) -> f64 {
        self.count_weight * f64::from(n).ln() - self.count_cost * f64::from(n)
    }

    /// Integer maximizer of the count term; ties go to the smaller count.
    pub fn best_count(&self) -> u32 {
        let cont = if self.count_cost > 0.0 {
            self.count_weight / self.count_cost
        } else {
            f64::from(self.n_max)
        };
        let lo = (cont.floor() as u32).clamp(1, self.n_max);
        let hi = (cont.ceil() as u32).clamp(1, self.n_max);
        if self.count_value(hi) > self.count_value(lo) {
            hi
        } else {
            lo
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityOptimum {
    pub p_s: f64,
    pub n: u32,
    pub p_r: f64,
    pub m: u32,
}

/// Stationary points of the source and relay utilities.
pub fn maximize_utilities(us: &UtilityParams, ur: &UtilityParams) -> Result<UtilityOptimum> {
    us.validate()?;
    ur.validate()?;
    Ok(UtilityOptimum {
        p_s: us.power.argmax(),
        n: us.best_count(),
        p_r: ur.power.argmax(),
        m: ur.best_count(),
    })
}
