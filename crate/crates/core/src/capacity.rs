//! Cooperative sum capacity of a source/relay pair and its maximization
//! over transmit covariances.
//!
//! The rate is `log2 det(I + Ns^½ M̃1 Q1 M̃1ᵀ Ns^½ + Nr^½ M̃2 Q2 M̃2ᵀ Nr^½)`
//! with `M̃1 = [M1; βM2]` and `M̃2 = [βM1; M2]`. The feasible set is
//! `Q1, Q2 ⪰ 0`, `tr Q1 + tr Q2 ≤ P`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

const PSD_TOL: f64 = 1e-9;

/// Channel description for one cooperative source/relay pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoopChannel {
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    /// Coupling between the two branches, in [0, 1].
    pub beta: f64,
    /// Total transmit power budget, W.
    pub power_budget: f64,
    /// Source-side noise weighting (PSD, square of the stacked row count).
    pub ns: DMatrix<f64>,
    /// Relay-side noise weighting.
    pub nr: DMatrix<f64>,
}

impl CoopChannel {
    /// Channel with identity noise weighting.
    pub fn new(m1: DMatrix<f64>, m2: DMatrix<f64>, beta: f64, power_budget: f64) -> Self {
        let rows = m1.nrows() + m2.nrows();
        Self {
            m1,
            m2,
            beta,
            power_budget,
            ns: DMatrix::identity(rows, rows),
            nr: DMatrix::identity(rows, rows),
        }
    }

    pub fn stacked_rows(&self) -> usize {
        self.m1.nrows() + self.m2.nrows()
    }

    /// Covariance dimension (the shared column count).
    pub fn tx_dim(&self) -> usize {
        self.m1.ncols()
    }

    fn validate(&self) -> Result<()> {
        if self.m1.ncols() != self.m2.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "m1 has {} columns, m2 has {}",
                self.m1.ncols(),
                self.m2.ncols()
            )));
        }
        let rows = self.stacked_rows();
        for (name, n) in [("ns", &self.ns), ("nr", &self.nr)] {
            if n.nrows() != rows || n.ncols() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {rows}x{rows}",
                    n.nrows(),
                    n.ncols()
                )));
            }
            check_psd(name, n)?;
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta", format!("{} is not in [0, 1]", self.beta)));
        }
        if !(self.power_budget >= 0.0 && self.power_budget.is_finite()) {
            return Err(invalid("power_budget", format!("{} must be >= 0", self.power_budget)));
        }
        Ok(())
    }
}

/// Deterministic state matrix and the randomization vector it is applied to.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub g: DMatrix<f64>,
    pub r: DVector<f64>,
}

/// Returns `(M̃1, M̃2)`.
pub fn stack_channels(ch: &CoopChannel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if ch.m1.ncols() != ch.m2.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "m1 has {} columns, m2 has {}",
            ch.m1.ncols(),
            ch.m2.ncols()
        )));
    }
    let (r1, r2, c) = (ch.m1.nrows(), ch.m2.nrows(), ch.m1.ncols());
    let mut s1 = DMatrix::zeros(r1 + r2, c);
    let mut s2 = DMatrix::zeros(r1 + r2, c);
    s1.rows_mut(0, r1).copy_from(&ch.m1);
    s1.rows_mut(r1, r2).copy_from(&(&ch.m2 * ch.beta));
    s2.rows_mut(0, r1).copy_from(&(&ch.m1 * ch.beta));
    s2.rows_mut(r1, r2).copy_from(&ch.m2);
    Ok((s1, s2))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{name} is not square")));
    }
    let asym = (m - m.transpose()).abs().max();
    let scale = m.abs().max().max(1.0);
    if asym > 1e-9 * scale {
        return Err(invalid(name, "matrix is not symmetric"));
    }
    let min_eig = SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOL * scale {
        return Err(invalid(
            name,
            format!("matrix is indefinite (eigenvalue {min_eig:e})"),
        ));
    }
    Ok(())
}

/// Symmetric PSD square root.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Precomputed effective channels `A_i = N_i^½ M̃_i`.
struct Objective {
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
}

impl Objective {
    fn new(ch: &CoopChannel) -> Result<Self> {
        let (s1, s2) = stack_channels(ch)?;
        Ok(Self {
            a1: psd_sqrt(&ch.ns) * s1,
            a2: psd_sqrt(&ch.nr) * s2,
        })
    }

    fn k_matrix(&self, q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.a1.nrows();
        let k = DMatrix::identity(n, n)
            + &self.a1 * q1 * self.a1.transpose()
            + &self.a2 * q2 * self.a2.transpose();
        symmetrize(&k)
    }

    fn rate(&self, q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
        let k = self.k_matrix(q1, q2);
        // K is SPD; the Cholesky log-determinant is the stable route.
        match k.clone().cholesky() {
            Some(ch) => {
                let l = ch.l();
                2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>() / std::f64::consts::LN_2
            }
            None => k.determinant().max(f64::MIN_POSITIVE).log2(),
        }
    }

    /// Gradients `A_iᵀ K⁻¹ A_i / ln 2`.
    fn gradient(&self, q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let k = self.k_matrix(q1, q2);
        let kinv = k
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| k.try_inverse())
            .expect("I + PSD is invertible");
        let g1 = symmetrize(&(self.a1.transpose() * &kinv * &self.a1)) / std::f64::consts::LN_2;
        let g2 = symmetrize(&(self.a2.transpose() * &kinv * &self.a2)) / std::f64::consts::LN_2;
        (g1, g2)
    }
}

/// Cooperative rate for fixed covariances, in bits/s/Hz.
pub fn r_coop(ch: &CoopChannel, q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> Result<f64> {
    ch.validate()?;
    let c = ch.tx_dim();
    for (name, q) in [("q1", q1), ("q2", q2)] {
        if q.nrows() != c || q.ncols() != c {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, expected {c}x{c}",
                q.nrows(),
                q.ncols()
            )));
        }
        check_psd(name, q)?;
    }
    let used = q1.trace() + q2.trace();
    if used > ch.power_budget * (1.0 + 1e-9) + 1e-12 {
        return Err(invalid(
            "covariances",
            format!("trace sum {used} exceeds budget {}", ch.power_budget),
        ));
    }
    Ok(Objective::new(ch)?.rate(q1, q2).max(0.0))
}

/// Euclidean projection of `v` onto `{x ≥ 0, Σx ≤ budget}`.
fn project_capped_simplex(v: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - budget) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Frobenius projection of the pair onto the trace-constrained PSD set.
fn project_pair(
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
    budget: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let e1 = SymmetricEigen::new(symmetrize(q1));
    let e2 = SymmetricEigen::new(symmetrize(q2));
    let n1 = e1.eigenvalues.len();
    let all: Vec<f64> = e1.eigenvalues.iter().chain(e2.eigenvalues.iter()).copied().collect();
    let p = project_capped_simplex(&all, budget);
    let d1 = DVector::from_column_slice(&p[..n1]);
    let d2 = DVector::from_column_slice(&p[n1..]);
    let r1 = &e1.eigenvectors * DMatrix::from_diagonal(&d1) * e1.eigenvectors.transpose();
    let r2 = &e2.eigenvectors * DMatrix::from_diagonal(&d2) * e2.eigenvectors.transpose();
    (symmetrize(&r1), symmetrize(&r2))
}

fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Result of [`maximize_r_coop`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoopOptimum {
    pub rate: f64,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub iterations: usize,
    /// Certified upper bound on `optimum − rate` at termination.
    pub gap: f64,
}

/// Iteration cap used by [`maximize_r_coop`].
pub const DEFAULT_MAX_ITER: usize = 20_000;

/// Maximizes the cooperative rate by projected gradient ascent with Armijo
/// backtracking. Terminates once the Frank-Wolfe duality gap (an upper bound
/// on the suboptimality of a concave objective) drops below
/// `tolerance · max(1, rate)`.
pub fn maximize_r_coop(ch: &CoopChannel, tolerance: f64) -> Result<CoopOptimum> {
    maximize_r_coop_with_cap(ch, tolerance, DEFAULT_MAX_ITER)
}

pub fn maximize_r_coop_with_cap(
    ch: &CoopChannel,
    tolerance: f64,
    max_iter: usize,
) -> Result<CoopOptimum> {
    ch.validate()?;
    if !(tolerance > 0.0) {
        return Err(invalid("tolerance", format!("{tolerance} must be > 0")));
    }
    let c = ch.tx_dim();
    let budget = ch.power_budget;
    if budget == 0.0 || c == 0 {
        return Ok(CoopOptimum {
            rate: 0.0,
            q1: DMatrix::zeros(c, c),
            q2: DMatrix::zeros(c, c),
            iterations: 0,
            gap: 0.0,
        });
    }
    let obj = Objective::new(ch)?;
    let share = budget / (2 * c) as f64;
    let mut q1 = DMatrix::identity(c, c) * share;
    let mut q2 = DMatrix::identity(c, c) * share;
    let mut f = obj.rate(&q1, &q2);
    let mut step = 1.0 / budget.max(1e-12);
    let mut gap = f64::INFINITY;

    for it in 0..max_iter {
        let (g1, g2) = obj.gradient(&q1, &q2);
        let lin_max = budget * max_eigenvalue(&g1).max(max_eigenvalue(&g2)).max(0.0);
        let lin_cur = (&g1.component_mul(&q1)).sum() + (&g2.component_mul(&q2)).sum();
        gap = (lin_max - lin_cur).max(0.0);
        if gap <= tolerance * f.max(1.0) {
            return Ok(CoopOptimum {
                rate: f.max(0.0),
                q1,
                q2,
                iterations: it,
                gap,
            });
        }
        // Armijo backtracking along the projection arc.
        let mut t = step * 2.0;
        loop {
            let (n1, n2) = project_pair(&(&q1 + &g1 * t), &(&q2 + &g2 * t), budget);
            let d1 = &n1 - &q1;
            let d2 = &n2 - &q2;
            let decrease = (&g1.component_mul(&d1)).sum() + (&g2.component_mul(&d2)).sum();
            let fn_ = obj.rate(&n1, &n2);
            if fn_ >= f + 1e-4 * decrease || t < 1e-14 {
                step = t;
                if fn_ >= f {
                    q1 = n1;
                    q2 = n2;
                    f = fn_;
                }
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        gap,
    })
}

/// `min(2 R_t, R_coop)`.
pub fn achievable_min_rate(r_t: f64, r_coop_val: f64) -> f64 {
    (2.0 * r_t).min(r_coop_val)
}

/// `x̃ = G r`.
pub fn randomize_state(s: &StateMatrix) -> Result<DVector<f64>> {
    if s.g.ncols() != s.r.len() {
        return Err(Error::DimensionMismatch(format!(
            "state matrix has {} columns but r has length {}",
            s.g.ncols(),
            s.r.len()
        )));
    }
    Ok(&s.g * &s.r)
}
