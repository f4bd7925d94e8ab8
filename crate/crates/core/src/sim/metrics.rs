//! Run metrics and their per-sample time series.

use serde::{Deserialize, Serialize};

/// One metrics row. Counters are cumulative from the start of the run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub time: f64,
    pub node_count: usize,
    /// `(mode energy + idle) / (reference energy + idle)`.
    pub relative_energy: f64,
    /// Blocked session attempts over all attempts, percent.
    pub blocking_prob: f64,
    /// Successful MAC addressing exchanges over attempts.
    pub addressing_ratio: f64,
    pub mean_hops: f64,
    pub max_tolerated_hops: usize,
    pub session_attempts: u64,
    pub sessions_blocked: u64,
    pub sessions_dropped: u64,
    pub blocked_no_route: u64,
    pub blocked_capacity: u64,
    /// Blocked because the contention-weighted path delay exceeds the budget.
    pub blocked_delay: u64,
    pub active_flows: usize,
    pub mac_attempts: u64,
    pub mac_successes: u64,
    pub injected_bits: f64,
    pub delivered_bits: f64,
    pub in_flight_bits: f64,
    pub dropped_bits: f64,
    pub tx_energy_j: f64,
    pub reference_energy_j: f64,
    pub idle_energy_j: f64,
    pub sessions_committed: u64,
    pub sessions_aborted: u64,
    pub route_changes: u64,
}

impl MetricsFrame {
    /// Ratio with the empty-workload conventions: no attempts gives 0.
    pub fn ratio(num: f64, den: f64) -> f64 {
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Bits are conserved up to rounding.
    pub fn conserves_bits(&self) -> bool {
        let lhs = self.delivered_bits + self.in_flight_bits + self.dropped_bits;
        (lhs - self.injected_bits).abs() <= 1e-9 * self.injected_bits.max(1.0)
    }
}

/// Result of one engine run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunOutput {
    pub mode: String,
    pub seed: u64,
    pub node_count: usize,
    /// Connected components of the initial disk graph over members.
    pub components: usize,
    pub final_frame: MetricsFrame,
    pub series: Vec<MetricsFrame>,
    /// `(time, channel, load)` rows, sampled with the metrics.
    #[serde(skip)]
    pub channel_loads: Vec<(f64, u16, u32)>,
    /// Protocol trace as CSV text, when tracing is on.
    #[serde(skip)]
    pub trace: Option<String>,
    /// `(id, x, y, role, cell)` at the start of the run.
    #[serde(skip)]
    pub placements: Vec<(usize, f64, f64, String, Option<usize>)>,
    /// Checks that failed during the run; all zero in a sound run.
    pub hierarchy_violations: u64,
    pub exclusiveness_violations: u64,
    pub capacity_violations: u64,
}
