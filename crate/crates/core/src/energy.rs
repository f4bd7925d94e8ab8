//! Per-bit energy and transmit-power budgets for cooperative MIMO links.
//!
//! A cooperative round has two phases. In the local phase the cluster head
//! shares the data with the `J` cooperating nodes inside its cluster; in the
//! long-haul phase those nodes jointly transmit (BPSK) to a remote receiver.
//! All quantities are SI: watts, hertz, metres, joules per bit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Radio and link-budget constants shared by both phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// RF power amplifier efficiency factor.
    pub alpha: f64,
    /// Receiver noise figure (linear).
    pub n_f: f64,
    /// Channel gain factor at the 2 m reference distance.
    pub sigma2: f64,
    /// Link margin (linear).
    pub link_margin: f64,
    /// Transmitter circuit power, W.
    pub p_ct: f64,
    /// Receiver circuit power, W.
    pub p_cr: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Single-sided noise power spectral density, W/Hz.
    pub n0: f64,
    /// Target bit error rate, strictly inside (0, 1).
    pub p_b: f64,
    /// Carrier wavelength, m.
    pub lambda: f64,
    /// Transmit antenna gain (linear).
    pub h_t: f64,
    /// Receive antenna gain (linear).
    pub h_r: f64,
    /// Gain constant of the local (intra-cluster) phase.
    pub g1: f64,
    /// Number of cooperating nodes.
    pub j_coop: u32,
}

impl Default for EnergyParams {
    /// Simulator defaults. `g1` folds the thermal noise density into a 30 dB
    /// gain factor so the local term stays on the same scale as the
    /// long-haul term.
    fn default() -> Self {
        Self {
            alpha: 0.4706,
            n_f: 10.0,
            sigma2: 1.0,
            link_margin: 100.0,
            p_ct: 0.0982,
            p_cr: 0.1125,
            bandwidth: 10e3,
            n0: 4e-21,
            p_b: 1e-3,
            lambda: 0.12,
            h_t: 1.0,
            h_r: 1.0,
            g1: 4e-18,
            j_coop: 2,
        }
    }
}

impl EnergyParams {
    /// Checks every field against its physical domain.
    pub fn validate(&self) -> Result<()> {
        if !(self.p_b > 0.0 && self.p_b < 1.0) {
            return Err(invalid("p_b", format!("{} is not in (0, 1)", self.p_b)));
        }
        if self.n_f < 1.0 || !self.n_f.is_finite() {
            return Err(invalid("n_f", format!("{} must be >= 1", self.n_f)));
        }
        if self.link_margin < 1.0 || !self.link_margin.is_finite() {
            return Err(invalid(
                "link_margin",
                format!("{} must be >= 1", self.link_margin),
            ));
        }
        let positive = [
            ("alpha", self.alpha),
            ("sigma2", self.sigma2),
            ("p_ct", self.p_ct),
            ("p_cr", self.p_cr),
            ("bandwidth", self.bandwidth),
            ("n0", self.n0),
            ("lambda", self.lambda),
            ("h_t", self.h_t),
            ("h_r", self.h_r),
            ("g1", self.g1),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be strictly positive")));
            }
        }
        if self.j_coop == 0 {
            return Err(invalid("j_coop", "at least one cooperating node is required"));
        }
        Ok(())
    }

    /// Same constants with a different cooperation degree.
    pub fn with_j(&self, j: u32) -> Self {
        Self {
            j_coop: j,
            ..self.clone()
        }
    }

    fn j(&self) -> f64 {
        f64::from(self.j_coop)
    }
}

/// Geometry of one cooperative transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Long-haul distance of each cooperating node to the receiver, m.
    pub distances: Vec<f64>,
    /// Path-loss exponent of each of those links.
    pub path_loss_exponents: Vec<f64>,
    /// Maximum distance from a cooperating node to the cluster head, m.
    pub e_max: f64,
}

impl LinkGeometry {
    /// `j` cooperating nodes all at distance `d` with a common exponent.
    pub fn uniform(j: u32, d: f64, k: f64, e_max: f64) -> Self {
        Self {
            distances: vec![d; j as usize],
            path_loss_exponents: vec![k; j as usize],
            e_max,
        }
    }
}

/// Energy per bit of the local phase.
///
/// `(p_ct + J p_cr)/B + 2(1+α) n_f σ² (−ln p_b) g1 e_max² M_l`. The log
/// term is negative for any valid BER, so it is carried as `−ln p_b`.
pub fn energy_local(params: &EnergyParams, geom: &LinkGeometry) -> Result<f64> {
    params.validate()?;
    if !(geom.e_max >= 0.0) || !geom.e_max.is_finite() {
        return Err(invalid("e_max", format!("{} must be >= 0", geom.e_max)));
    }
    let circuit = (params.p_ct + params.j() * params.p_cr) / params.bandwidth;
    let distance_term = 2.0
        * (1.0 + params.alpha)
        * params.n_f
        * params.sigma2
        * (-params.p_b.ln())
        * params.g1
        * geom.e_max
        * geom.e_max
        * params.link_margin;
    Ok(circuit + distance_term)
}

/// Energy per bit of the long-haul cooperative phase.
///
/// `(J p_ct + p_cr)/B + (1+α)(N0 / p_b^{1/J}) Σ_j 16π² d_j^{k_j} / (λ² H_t H_r) · σ² M_l n_f`.
pub fn energy_longhaul(params: &EnergyParams, geom: &LinkGeometry) -> Result<f64> {
    params.validate()?;
    check_longhaul_geometry(params, geom)?;
    let circuit = (params.j() * params.p_ct + params.p_cr) / params.bandwidth;
    let denom = params.lambda * params.lambda * params.h_t * params.h_r;
    let path_sum: f64 = geom
        .distances
        .iter()
        .zip(&geom.path_loss_exponents)
        .map(|(&d, &k)| 16.0 * PI * PI * d.powf(k) / denom)
        .sum();
    let amp = (1.0 + params.alpha) * (params.n0 / params.p_b.powf(1.0 / params.j()))
        * path_sum
        * params.sigma2
        * params.link_margin
        * params.n_f;
    Ok(circuit + amp)
}

fn check_longhaul_geometry(params: &EnergyParams, geom: &LinkGeometry) -> Result<()> {
    let j = params.j_coop as usize;
    if geom.distances.len() != j || geom.path_loss_exponents.len() != j {
        return Err(invalid(
            "distances",
            format!(
                "expected {j} distances and exponents, got {} and {}",
                geom.distances.len(),
                geom.path_loss_exponents.len()
            ),
        ));
    }
    if let Some(d) = geom.distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(invalid("distances", format!("distance {d} must be > 0")));
    }
    if let Some(k) = geom.path_loss_exponents.iter().find(|k| !(**k >= 1.0)) {
        return Err(invalid("path_loss_exponents", format!("exponent {k} must be >= 1")));
    }
    Ok(())
}

/// Local plus long-haul energy of one cooperative round.
pub fn total_energy_per_bit(params: &EnergyParams, geom: &LinkGeometry) -> Result<f64> {
    Ok(energy_local(params, geom)? + energy_longhaul(params, geom)?)
}

/// Path-gain function `G(d, k)` used for the cluster-head transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathGain {
    /// `d^k`.
    #[default]
    PowerLaw,
    /// `(d / d0)^k`.
    Reference { d0: f64 },
}

impl PathGain {
    pub fn eval(&self, d: f64, k: f64) -> f64 {
        match *self {
            PathGain::PowerLaw => d.powf(k),
            PathGain::Reference { d0 } => (d / d0).powf(k),
        }
    }
}

/// Transmit power a node needs to reach its cluster head:
/// `G(d, k) N0 B / p_b^{1/J}`.
pub fn cluster_head_power(
    params: &EnergyParams,
    d_jt: f64,
    k_jt: f64,
    gain_fn: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    params.validate()?;
    if !(d_jt > 0.0 && d_jt.is_finite()) {
        return Err(invalid("d_jt", format!("distance {d_jt} must be > 0")));
    }
    Ok(gain_fn(d_jt, k_jt) * params.n0 * params.bandwidth / params.p_b.powf(1.0 / params.j()))
}

/// SNR floor `τ R²` for covering a range `R`.
pub fn min_transmit_power(tau: f64, range_r: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("tau", format!("{tau} must be > 0")));
    }
    if !(range_r >= 0.0 && range_r.is_finite()) {
        return Err(invalid("range_r", format!("{range_r} must be >= 0")));
    }
    Ok(tau * range_r * range_r)
}

/// Precomputed coefficients of [`total_energy_per_bit`] for `j` cooperating
/// nodes at a common distance and exponent, for hot loops that evaluate
/// millions of hops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopEnergy {
    pub j: u32,
    circuit: f64,
    local: f64,
    amp: f64,
}

impl HopEnergy {
    pub fn new(params: &EnergyParams, j: u32) -> Result<Self> {
        let p = params.with_j(j);
        p.validate()?;
        let jf = p.j();
        let circuit = (p.p_ct + jf * p.p_cr) / p.bandwidth + (jf * p.p_ct + p.p_cr) / p.bandwidth;
        let local = 2.0
            * (1.0 + p.alpha)
            * p.n_f
            * p.sigma2
            * (-p.p_b.ln())
            * p.g1
            * p.link_margin;
        let amp = (1.0 + p.alpha) * (p.n0 / p.p_b.powf(1.0 / jf)) * 16.0 * PI * PI
            / (p.lambda * p.lambda * p.h_t * p.h_r)
            * p.sigma2
            * p.link_margin
            * p.n_f;
        Ok(Self { j, circuit, local, amp })
    }

    /// Energy per bit for a hop of length `d` with exponent `k`.
    pub fn eval(&self, d: f64, k: f64, e_max: f64) -> f64 {
        let dk = if k == 2.0 {
            d * d
        } else if k == 3.0 {
            d * d * d
        } else if k == 4.0 {
            let d2 = d * d;
            d2 * d2
        } else {
            d.powf(k)
        };
        self.circuit + self.local * e_max * e_max + self.amp * f64::from(self.j) * dk
    }
}
