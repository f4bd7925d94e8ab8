//! Run configuration: a TOML document with dotted namespaces
//! (`scenario.node_count`, `traffic.flows`, ...). Absent keys take defaults,
//! unknown keys are rejected, and environment variables can override any key.
//!
//! Environment overrides use the prefix `MCCA_` with `__` between the section
//! and the key, e.g. `MCCA_SCENARIO__NODE_COUNT=400`. Values are parsed as TOML
//! scalars, falling back to a plain string.
//!
//! Interference range equals the radio range: a transmitter disturbs exactly
//! the receivers it could reach.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyParams, PathGain};
use crate::error::{Error, Result};
use crate::negotiation::ProtocolConfig;
use crate::power_game::UtilityParams;
use crate::topology::Scenario;

pub const ENV_PREFIX: &str = "MCCA_";

/// Protocol variant a run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Single-node transmissions at full power on statically hashed channels.
    BaselineNoCoop,
    /// Cooperative transmissions and the power game, channels static.
    StrategyGameOnly,
    /// Cooperation, power game, channel adjustment with negotiation, relays.
    MccaClss,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::BaselineNoCoop, Mode::StrategyGameOnly, Mode::MccaClss];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::BaselineNoCoop => "baseline_no_coop",
            Mode::StrategyGameOnly => "strategy_game_only",
            Mode::MccaClss => "mcca_clss",
        }
    }

    pub fn cooperative(&self) -> bool {
        !matches!(self, Mode::BaselineNoCoop)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config { key: "mode".into(), reason: format!("unknown mode `{s}`") })
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Transmission (and interference) range, m.
    pub range_m: f64,
    /// Neighbors kept per node in the routing graph, nearest first.
    pub neighbor_cap: usize,
    /// Path-loss exponent of member-to-member hops.
    pub path_loss_exponent: f64,
    /// Path-loss exponent of head-to-head long-haul links.
    pub backbone_path_loss_exponent: f64,
    /// Distance at which the normalized path gain is 1, m.
    pub reference_distance_m: f64,
    /// Relay placement range on backbone edges, m.
    pub relay_range_m: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            range_m: 1000.0,
            neighbor_cap: 16,
            path_loss_exponent: 4.0,
            backbone_path_loss_exponent: 2.0,
            reference_distance_m: 100.0,
            relay_range_m: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub alpha: f64,
    pub n_f: f64,
    pub sigma2: f64,
    pub link_margin: f64,
    pub p_ct: f64,
    pub p_cr: f64,
    pub bandwidth: f64,
    pub n0: f64,
    pub p_b: f64,
    pub lambda: f64,
    pub h_t: f64,
    pub h_r: f64,
    pub g1: f64,
    /// Largest cooperation degree.
    pub j_coop: u32,
    /// Circuit power of an idle node, W.
    pub idle_power_w: f64,
    pub path_gain: PathGain,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        let p = EnergyParams::default();
        Self {
            alpha: p.alpha,
            n_f: p.n_f,
            sigma2: p.sigma2,
            link_margin: p.link_margin,
            p_ct: p.p_ct,
            p_cr: p.p_cr,
            bandwidth: p.bandwidth,
            n0: p.n0,
            p_b: p.p_b,
            lambda: p.lambda,
            h_t: p.h_t,
            h_r: p.h_r,
            g1: p.g1,
            j_coop: p.j_coop,
            idle_power_w: 1e-3,
            path_gain: PathGain::PowerLaw,
        }
    }
}

impl EnergyConfig {
    pub fn params(&self) -> EnergyParams {
        EnergyParams {
            alpha: self.alpha,
            n_f: self.n_f,
            sigma2: self.sigma2,
            link_margin: self.link_margin,
            p_ct: self.p_ct,
            p_cr: self.p_cr,
            bandwidth: self.bandwidth,
            n0: self.n0,
            p_b: self.p_b,
            lambda: self.lambda,
            h_t: self.h_t,
            h_r: self.h_r,
            g1: self.g1,
            j_coop: self.j_coop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Concurrent session slots.
    pub flows: usize,
    pub demand_bps: f64,
    /// Raw capacity of every link, bit/s.
    pub link_capacity_bps: f64,
    pub mean_session_s: f64,
    pub mean_gap_s: f64,
    /// Access delay of one hop on an uncontended channel, s.
    pub per_hop_delay_s: f64,
    /// End-to-end delay a session tolerates, s.
    pub delay_budget_s: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            flows: 64,
            demand_bps: 4_000.0,
            link_capacity_bps: 256_000.0,
            mean_session_s: 64.0,
            mean_gap_s: 16.0,
            per_hop_delay_s: 0.002,
            delay_budget_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    pub step_m: f64,
    pub tick_s: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self { step_m: 1.0, tick_s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacConfig {
    pub channels: u16,
    /// Receiver-list cap of a multicast RTS.
    pub receiver_cap: usize,
    pub attempt_interval_s: f64,
    /// Distance at which the mean channel quality equals the floor, m.
    pub quality_range_m: f64,
    pub quality_floor: f64,
    pub success_prob: f64,
    /// Overload threshold as a multiple of mean per-channel contention.
    pub overload_factor: f64,
    /// Below this many flows a node picks the least-loaded candidate.
    pub receiver_load_threshold: u32,
    /// Target channels considered per overloaded link.
    pub max_targets: usize,
    pub rate_tolerance: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            channels: 128,
            receiver_cap: 8,
            attempt_interval_s: 32.0,
            quality_range_m: 150.0,
            quality_floor: 1.0,
            success_prob: 0.9,
            overload_factor: 1.5,
            receiver_load_threshold: 2,
            max_targets: 4,
            rate_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub eps: f64,
    pub max_iter: usize,
    pub q_max: f64,
    /// Noise power at every receiver, W.
    pub noise: f64,
    /// SNR floor coefficient: power never drops below `tau × hop²`.
    pub tau: f64,
    pub source_utility: UtilityParams,
    pub relay_utility: UtilityParams,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            eps: crate::power_game::DEFAULT_EPS,
            max_iter: crate::power_game::DEFAULT_MAX_ITER,
            q_max: 1.0,
            noise: 0.01,
            tau: 1e-7,
            source_utility: UtilityParams::default(),
            relay_utility: UtilityParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub base_delay: f64,
    pub reply_timer_factor: f64,
    pub notify_timer_factor: f64,
    pub max_attempts: u32,
    /// Loss probability of each physical protocol packet.
    pub loss_p: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            base_delay: p.base_delay,
            reply_timer_factor: p.reply_timer_factor,
            notify_timer_factor: p.notify_timer_factor,
            max_attempts: p.max_attempts,
            loss_p: 0.05,
        }
    }
}

impl ProtocolSection {
    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            base_delay: self.base_delay,
            reply_timer_factor: self.reply_timer_factor,
            notify_timer_factor: self.notify_timer_factor,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub sim_time_s: f64,
    pub refresh_interval_s: f64,
    pub sample_interval_s: f64,
    pub modes: Vec<Mode>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            sim_time_s: 4096.0,
            refresh_interval_s: 64.0,
            sample_interval_s: 16.0,
            modes: Mode::ALL.to_vec(),
        }
    }
}

/// Which key to sweep and over which values. An empty `values` list means a
/// single run at the configured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: String,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { variable: "scenario.node_count".into(), values: Vec::new(), seeds: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Write the per-sample time series of every run.
    pub time_series: bool,
    pub placements: bool,
    pub channel_loads: bool,
    pub trace: bool,
    /// Pair each cooperative mode with the baseline at the same point.
    pub comparison: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            time_series: true,
            placements: false,
            channel_loads: false,
            trace: false,
            comparison: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub radio: RadioConfig,
    pub energy: EnergyConfig,
    pub traffic: TrafficConfig,
    pub mobility: MobilityConfig,
    pub mac: MacConfig,
    pub game: GameConfig,
    pub protocol: ProtocolSection,
    pub sim: SimSection,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

fn cfg_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config { key: key.into(), reason: reason.into() }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(key, format!("{v} must be > 0")))
    }
}

fn unit(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(cfg_err(key, format!("{v} is not in [0, 1]")))
    }
}

/// Re-labels a parameter error from a building block with its config path.
fn scoped(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => cfg_err(&format!("{section}.{name}"), reason),
        other => other,
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let r = &self.radio;
        positive("radio.range_m", r.range_m)?;
        positive("radio.reference_distance_m", r.reference_distance_m)?;
        positive("radio.relay_range_m", r.relay_range_m)?;
        if r.neighbor_cap == 0 {
            return Err(cfg_err("radio.neighbor_cap", "must be >= 1"));
        }
        for (k, v) in [
            ("radio.path_loss_exponent", r.path_loss_exponent),
            ("radio.backbone_path_loss_exponent", r.backbone_path_loss_exponent),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(cfg_err(k, format!("{v} must be >= 1")));
            }
        }
        self.energy.params().validate().map_err(|e| scoped("energy", e))?;
        if !(self.energy.idle_power_w >= 0.0 && self.energy.idle_power_w.is_finite()) {
            return Err(cfg_err("energy.idle_power_w", "must be >= 0"));
        }
        if let PathGain::Reference { d0 } = self.energy.path_gain {
            positive("energy.path_gain.d0", d0)?;
        }
        let t = &self.traffic;
        positive("traffic.demand_bps", t.demand_bps)?;
        positive("traffic.link_capacity_bps", t.link_capacity_bps)?;
        positive("traffic.mean_session_s", t.mean_session_s)?;
        positive("traffic.mean_gap_s", t.mean_gap_s)?;
        positive("traffic.per_hop_delay_s", t.per_hop_delay_s)?;
        positive("traffic.delay_budget_s", t.delay_budget_s)?;
        if t.demand_bps > t.link_capacity_bps {
            return Err(cfg_err("traffic.demand_bps", "exceeds the link capacity"));
        }
        positive("mobility.tick_s", self.mobility.tick_s)?;
        if !(self.mobility.step_m >= 0.0 && self.mobility.step_m.is_finite()) {
            return Err(cfg_err("mobility.step_m", "must be >= 0"));
        }
        let m = &self.mac;
        if m.channels < 2 {
            return Err(cfg_err("mac.channels", "at least two channels are required"));
        }
        if m.receiver_cap == 0 {
            return Err(cfg_err("mac.receiver_cap", "must be >= 1"));
        }
        positive("mac.attempt_interval_s", m.attempt_interval_s)?;
        positive("mac.quality_range_m", m.quality_range_m)?;
        positive("mac.quality_floor", m.quality_floor)?;
        unit("mac.success_prob", m.success_prob)?;
        if !(m.overload_factor >= 1.0) {
            return Err(cfg_err("mac.overload_factor", "must be >= 1"));
        }
        if m.max_targets == 0 {
            return Err(cfg_err("mac.max_targets", "must be >= 1"));
        }
        positive("mac.rate_tolerance", m.rate_tolerance)?;
        let g = &self.game;
        positive("game.eps", g.eps)?;
        positive("game.q_max", g.q_max)?;
        positive("game.noise", g.noise)?;
        positive("game.tau", g.tau)?;
        if g.max_iter == 0 {
            return Err(cfg_err("game.max_iter", "must be >= 1"));
        }
        g.source_utility.validate().map_err(|e| scoped("game.source_utility", e))?;
        g.relay_utility.validate().map_err(|e| scoped("game.relay_utility", e))?;
        self.protocol.protocol().validate().map_err(|e| scoped("protocol", e))?;
        unit("protocol.loss_p", self.protocol.loss_p)?;
        let s = &self.sim;
        positive("sim.sim_time_s", s.sim_time_s)?;
        positive("sim.refresh_interval_s", s.refresh_interval_s)?;
        positive("sim.sample_interval_s", s.sample_interval_s)?;
        if s.modes.is_empty() {
            return Err(cfg_err("sim.modes", "at least one mode is required"));
        }
        if !self.sweep.values.is_empty() && lookup_f64(self, &self.sweep.variable).is_none() {
            return Err(cfg_err(
                "sweep.variable",
                format!("`{}` is not a numeric config key", self.sweep.variable),
            ));
        }
        Ok(())
    }

    /// Parses a TOML document, applies `overrides` (dotted key, raw value)
    /// and validates the result.
    pub fn from_toml_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err("<parse>", e.to_string()))?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, parse_scalar(v))?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| cfg_err("<schema>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err("<dump>", e.to_string()))
    }

    /// Copy with one dotted key replaced.
    pub fn with_value(&self, key: &str, value: toml::Value) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| cfg_err(key, e.to_string()))?;
        set_dotted(&mut table, key, value)?;
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| cfg_err(key, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Expands the sweep into concrete configurations, one per value, each
    /// with an empty sweep. Without sweep values the config itself is returned.
    pub fn sweep_points(&self) -> Result<Vec<(f64, RunConfig)>> {
        let mut base = self.clone();
        base.sweep.values.clear();
        if self.sweep.values.is_empty() {
            let v = lookup_f64(&base, &self.sweep.variable).unwrap_or(f64::NAN);
            return Ok(vec![(v, base)]);
        }
        self.sweep
            .values
            .iter()
            .map(|&v| Ok((v, base.with_value(&self.sweep.variable, sweep_value(v))?)))
            .collect()
    }

    /// Seeds to run: the sweep's list, or the scenario seed.
    pub fn seeds(&self) -> Vec<u64> {
        if self.sweep.seeds.is_empty() {
            vec![self.scenario.seed]
        } else {
            self.sweep.seeds.clone()
        }
    }
}

/// Loads `path` with environment overrides applied.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml_with(&text, &env_overrides(std::env::vars()))
}

/// Translates `MCCA_SECTION__KEY=value` pairs into dotted overrides.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            if !rest.contains("__") {
                return None;
            }
            Some((rest.to_ascii_lowercase().replace("__", "."), v))
        })
        .collect();
    out.sort();
    out
}

/// Parses a sweep override such as `scenario.node_count=200..1200:200` or
/// `traffic.flows=16,32,64`.
pub fn parse_sweep(spec: &str) -> Result<SweepConfig> {
    let (var, vals) = spec
        .split_once('=')
        .ok_or_else(|| cfg_err("sweep", format!("`{spec}` is not of the form key=values")))?;
    let bad = || cfg_err("sweep", format!("cannot parse values `{vals}`"));
    let values = if let Some((range, step)) = vals.split_once(':') {
        let (a, b) = range.split_once("..").ok_or_else(bad)?;
        let (a, b, s): (f64, f64, f64) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
            step.trim().parse().map_err(|_| bad())?,
        );
        if !(s > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / s + 1e-9).floor() as usize;
        (0..=n).map(|i| a + s * i as f64).collect()
    } else {
        vals.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<Result<Vec<f64>>>()?
    };
    Ok(SweepConfig { variable: var.trim().to_string(), values, seeds: Vec::new() })
}

fn sweep_value(v: f64) -> toml::Value {
    if v.fract() == 0.0 && v.abs() < 9e15 {
        toml::Value::Integer(v as i64)
    } else {
        toml::Value::Float(v)
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().ok_or_else(|| cfg_err(key, "empty key"))?;
    let mut t = table;
    for p in path {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| cfg_err(key, format!("`{p}` is not a section")))?;
    }
    // A float-typed key given an integer value keeps its float type.
    let value = match (t.get(*last), value) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    t.insert(last.to_string(), value);
    Ok(())
}

fn lookup_f64(cfg: &RunConfig, key: &str) -> Option<f64> {
    let table = toml::Table::try_from(cfg).ok()?;
    let mut v: &toml::Value = table.get(key.split('.').next()?)?;
    for p in key.split('.').skip(1) {
        v = v.get(p)?;
    }
    match v {
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::Float(f) => Some(*f),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.scenario.width, 12_000.0);
        assert_eq!(c.scenario.height, 6_000.0);
        assert_eq!(c.mac.channels, 128);
        assert_eq!(c.traffic.link_capacity_bps, 256_000.0);
        assert_eq!(c.traffic.flows, 64);
        assert_eq!(c.sim.sim_time_s, 4096.0);
    }

    #[test]
    fn bad_ber_names_the_key() {
        let err = RunConfig::from_toml("[energy]\np_b = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("energy.p_b"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[energy]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("nonsense = 3\n").is_err());
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let c = RunConfig::from_toml_with(
            "scenario.node_count = 300\n",
            &[("traffic.flows".into(), "8".into()), ("traffic.delay_budget_s".into(), "1".into())],
        )
        .unwrap();
        assert_eq!(c.scenario.node_count, 300);
        assert_eq!(c.traffic.flows, 8);
        assert_eq!(c.traffic.delay_budget_s, 1.0);
    }

    #[test]
    fn env_prefix_mapping() {
        let o = env_overrides(vec![
            ("MCCA_SCENARIO__NODE_COUNT".to_string(), "400".to_string()),
            ("MCCA_NOPE".to_string(), "1".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ]);
        assert_eq!(o, vec![("scenario.node_count".to_string(), "400".to_string())]);
    }

    #[test]
    fn dump_round_trips() {
        let mut c = RunConfig::default();
        c.scenario.node_count = 321;
        c.energy.path_gain = PathGain::Reference { d0: 2.0 };
        c.sweep = parse_sweep("scenario.node_count=200..1200:200").unwrap();
        c.sweep.seeds = vec![1, 2];
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn sweep_arithmetic() {
        let mut c = RunConfig::default();
        c.sweep = parse_sweep("scenario.node_count=200..1200:200").unwrap();
        let pts = c.sweep_points().unwrap();
        assert_eq!(pts.len(), 6);
        let counts: Vec<usize> = pts.iter().map(|(_, c)| c.scenario.node_count).collect();
        assert_eq!(counts, vec![200, 400, 600, 800, 1000, 1200]);
        assert!(pts.iter().all(|(_, c)| c.sweep.values.is_empty()));
        assert_eq!(parse_sweep("traffic.per_hop_delay_s=0.001,0.002").unwrap().values, vec![0.001, 0.002]);
        assert!(parse_sweep("scenario.node_count").is_err());
    }

    #[test]
    fn sweep_of_unknown_key_rejected() {
        let mut c = RunConfig::default();
        c.sweep = parse_sweep("scenario.bogus=1,2").unwrap();
        assert!(c.validate().is_err());
    }
}
