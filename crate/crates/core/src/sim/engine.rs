//! The discrete-event engine.
//!
//! Members sit on the cross arms and random-walk along them; the member
//! nearest each base station heads its cell. Sessions are routed member →
//! own head → head backbone (minimum spanning tree) → sink's head → sink,
//! each leg on minimum-energy paths. Routes, clusters and powers are
//! refreshed periodically; in `mcca_clss` mode every refresh also runs an
//! overload-driven channel adjustment episode through the negotiation
//! protocol.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::admission::{admit_flow, FlowNetwork, PathShare};
use super::event::{EventKind, EventQueue};
use super::metrics::{MetricsFrame, RunOutput};
use super::routing::{HopModel, RoutingGraph, Tree};
use crate::capacity::{achievable_min_rate, maximize_r_coop, randomize_state, CoopChannel, StateMatrix};
use crate::channel_mac::{
    detect_overload, enumerate_candidates, mac_exchange, recover_priority, select_candidate, Candidate, ChannelTable,
    LinkId, MacOutcome, RtsFrame, SelectionRule,
};
use crate::config::{Mode, RunConfig};
use crate::energy::min_transmit_power;
use crate::error::Result;
use crate::negotiation::{
    AdjustmentTarget, BernoulliLoss, Delta, Initiation, Negotiator, Proposal, RouteUpdates, Scheduled,
    SessionRequest,
};
use crate::power_game::{iterate_to_convergence, maximize_utilities, PowerGame};
use crate::rng::{self, streams};
use crate::topology::{
    build_mst, check_connectivity, form_clusters, generate_scenario, hard_handoff, join_nearest_head, place_relays,
    Arm, Cell, Cluster, Graph, NodeState, Point, Role, TopologyGraphs,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowState {
    Active,
    Blocked,
    Completed,
    Dropped,
}

/// One directed transmission of a route.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Hop {
    tx: usize,
    rx: usize,
    /// Energy per bit before the interference penalty, J/bit.
    energy: f64,
}

impl Hop {
    fn link(&self) -> LinkId {
        LinkId::new(self.tx, self.rx)
    }
}

#[derive(Debug, Clone)]
struct Route {
    hops: Vec<Hop>,
    ref_energy: f64,
}

impl Route {
    fn nodes(&self, source: usize) -> Vec<usize> {
        std::iter::once(source).chain(self.hops.iter().map(|h| h.rx)).collect()
    }
}

/// A constant-bit-rate session.
#[derive(Debug, Clone)]
pub struct Flow {
    pub id: usize,
    pub slot: usize,
    pub source: usize,
    pub sink: usize,
    /// bit/s.
    pub demand: f64,
    pub route: Vec<PathShare>,
    pub state: FlowState,
    paths: Vec<(Vec<Hop>, f64)>,
    ref_per_bit: f64,
    energy_per_bit: f64,
    delay: f64,
    start: f64,
    last: f64,
    injected: f64,
    delivered: f64,
    mac_reorder: bool,
}

impl Flow {
    fn hops(&self) -> impl Iterator<Item = (&Hop, f64)> + '_ {
        self.paths.iter().flat_map(|(h, share)| h.iter().map(move |x| (x, *share)))
    }

    fn hop_count(&self) -> usize {
        self.paths.iter().map(|p| p.0.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Default)]
struct Slot {
    rng: Option<ChaCha8Rng>,
    flow: Option<usize>,
    mac_rng: Option<ChaCha8Rng>,
}

#[derive(Debug, Default, Clone)]
struct Totals {
    attempts: u64,
    blocked: u64,
    dropped_sessions: u64,
    admitted: u64,
    hops_sum: u64,
    max_hops: usize,
    mac_attempts: u64,
    mac_successes: u64,
    // Bits and energy of finished flows.
    injected: f64,
    delivered: f64,
    dropped: f64,
    tx_energy: f64,
    ref_energy: f64,
    route_changes: u64,
    /// Blocked for lack of route, capacity, delay.
    blocked_by: [u64; 3],
}

/// Backbone transmissions between two heads, with the reference cost.
#[derive(Debug, Clone, Default)]
struct BackboneLeg {
    hops: Vec<Hop>,
    ref_energy: f64,
}

/// Applies committed channel moves to the live table.
struct ChannelApplier<'a> {
    table: &'a mut ChannelTable,
    dirty: &'a mut BTreeSet<u16>,
}

impl AdjustmentTarget for ChannelApplier<'_> {
    fn apply(&mut self, proposal: &Proposal) {
        for d in &proposal.deltas {
            if let Delta::Channel { link, from, to } = d {
                if self.table.channel_of(*link) == *from && self.table.assign(*link, *to).is_ok() {
                    self.dirty.extend(from.iter().copied());
                    self.dirty.insert(*to);
                }
            }
        }
    }
}

/// Agreement rule of a participator: the proposal still matches its links.
fn still_valid(table: &ChannelTable, proposal: &Proposal) -> bool {
    proposal.deltas.iter().all(|d| match d {
        Delta::Channel { link, from, .. } => table.channel_of(*link) == *from,
        _ => true,
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub struct Engine {
    cfg: RunConfig,
    mode: Mode,
    seed: u64,
    sim_time: f64,
    now: f64,
    queue: EventQueue,

    nodes: Vec<NodeState>,
    members: usize,
    cells: Vec<Cell>,
    arms: Vec<Arm>,
    clusters: Vec<Option<Cluster>>,
    /// Cell index of every member's cluster.
    cluster_of: Vec<usize>,
    /// Arc-length coordinate of every member on its arm.
    coord: Vec<f64>,
    mobility_rngs: Vec<ChaCha8Rng>,

    model: HopModel,
    reference: HopModel,
    graph: RoutingGraph,
    to_head: BTreeMap<usize, Tree>,
    from_head: BTreeMap<usize, Tree>,
    to_head_ref: BTreeMap<usize, Tree>,
    from_head_ref: BTreeMap<usize, Tree>,
    /// Backbone tree over present cells: (cell, cell) pairs.
    mst: Vec<(usize, usize)>,
    /// Relay node ids per backbone edge, in the order from the first cell.
    relays: BTreeMap<(usize, usize), Vec<usize>>,
    legs: BTreeMap<(usize, usize), BackboneLeg>,

    topo: TopologyGraphs,
    table: ChannelTable,
    alloc: BTreeMap<LinkId, f64>,
    powers: BTreeMap<LinkId, f64>,
    penalty: BTreeMap<LinkId, f64>,
    dirty: BTreeSet<u16>,

    slots: Vec<Slot>,
    flows: BTreeMap<usize, Flow>,
    next_flow: usize,
    totals: Totals,

    negotiator: Negotiator,
    loss: BernoulliLoss,
    route_updates: RouteUpdates,
    pending_updates: Vec<(usize, usize)>,
    target_power: f64,

    pub hierarchy_violations: u64,
    pub exclusiveness_violations: u64,
    pub capacity_violations: u64,
    series: Vec<MetricsFrame>,
    channel_loads: Vec<(f64, u16, u32)>,
    components: usize,
}

impl Engine {
    pub fn new(cfg: &RunConfig, mode: Mode, sim_time: f64, seed: u64) -> Result<Self> {
        let mut cfg = cfg.clone();
        cfg.scenario.seed = seed;
        cfg.validate()?;
        if !(sim_time > 0.0) {
            return Err(crate::error::invalid("sim_time", format!("{sim_time} must be > 0")));
        }
        let (mut nodes, cells) = generate_scenario(&cfg.scenario)?;
        let arms = cfg.scenario.layout().arms;
        let members = cfg.scenario.node_count;
        let clusters = form_clusters(&mut nodes, &cells);
        let coord: Vec<f64> = (0..members)
            .map(|i| arms[nodes[i].arm.unwrap_or(0)].coordinate(&nodes[i].position))
            .collect();
        let mobility_rngs = (0..members).map(|i| rng::substream(seed, streams::MOBILITY, i as u64)).collect();

        let params = cfg.energy.params();
        let opt = maximize_utilities(&cfg.game.source_utility, &cfg.game.relay_utility)?;
        let j_max = if mode.cooperative() { cfg.energy.j_coop.min(opt.n.max(1)) } else { 1 };
        let model = HopModel::new(&params, j_max)?;
        let reference = HopModel::new(&params, 1)?;

        let member_pts: Vec<Point> = nodes[..members].iter().map(|n| n.position).collect();
        let components = check_connectivity(&member_pts, cfg.radio.range_m).components;

        let slots = (0..cfg.traffic.flows)
            .map(|s| Slot {
                rng: Some(rng::substream(seed, streams::FLOWS, s as u64)),
                flow: None,
                mac_rng: Some(rng::substream(seed, streams::MAC, s as u64)),
            })
            .collect();
        let negotiator = Negotiator::new(cfg.protocol.protocol())?.with_trace(cfg.output.trace);
        let loss = BernoulliLoss::new(cfg.protocol.loss_p, rng::stream(seed, streams::LOSS))?;
        let table = ChannelTable::new(cfg.mac.channels);

        let mut e = Engine {
            mode,
            seed,
            sim_time,
            now: 0.0,
            queue: EventQueue::new(),
            members,
            cells,
            arms,
            clusters,
            cluster_of: vec![0; members],
            coord,
            mobility_rngs,
            model,
            reference,
            graph: RoutingGraph::default(),
            to_head: BTreeMap::new(),
            from_head: BTreeMap::new(),
            to_head_ref: BTreeMap::new(),
            from_head_ref: BTreeMap::new(),
            mst: Vec::new(),
            relays: BTreeMap::new(),
            legs: BTreeMap::new(),
            topo: TopologyGraphs::default(),
            table,
            alloc: BTreeMap::new(),
            powers: BTreeMap::new(),
            penalty: BTreeMap::new(),
            dirty: BTreeSet::new(),
            slots,
            flows: BTreeMap::new(),
            next_flow: 0,
            totals: Totals::default(),
            negotiator,
            loss,
            route_updates: RouteUpdates::default(),
            pending_updates: Vec::new(),
            target_power: opt.p_s,
            hierarchy_violations: 0,
            exclusiveness_violations: 0,
            capacity_violations: 0,
            series: Vec::new(),
            channel_loads: Vec::new(),
            components,
            nodes: Vec::new(),
            cfg,
        };
        e.nodes = nodes;
        e.build_backbone();
        Ok(e)
    }

    fn head_of(&self, cell: usize) -> Option<usize> {
        self.clusters.get(cell).and_then(|c| c.as_ref()).map(|c| c.head)
    }

    fn present_cells(&self) -> Vec<usize> {
        (0..self.clusters.len()).filter(|&c| self.clusters[c].is_some()).collect()
    }

    /// Spanning tree over the heads and, in the full scheme, relays on its edges.
    fn build_backbone(&mut self) {
        let cells = self.present_cells();
        let pts: Vec<Point> = cells.iter().map(|&c| self.nodes[self.head_of(c).unwrap()].position).collect();
        self.mst = build_mst(&pts).into_iter().map(|(a, b)| (cells[a], cells[b])).collect();
        if self.mode == Mode::MccaClss {
            for &(a, b) in &self.mst.clone() {
                let (pa, pb) = (self.nodes[self.head_of(a).unwrap()].position, self.nodes[self.head_of(b).unwrap()].position);
                let mut ids = Vec::new();
                for p in place_relays(pa, pb, self.cfg.radio.relay_range_m) {
                    let id = self.nodes.len();
                    let mut n = NodeState::new(id, p, Role::CognitiveRelay);
                    n.cluster_id = Some(hard_handoff(&p, &self.cells));
                    self.nodes.push(n);
                    ids.push(id);
                }
                self.relays.insert((a, b), ids);
            }
        }
    }

    /// Runs the event loop to the end of the simulation.
    pub fn run(mut self) -> Result<RunOutput> {
        let placements = self
            .nodes
            .iter()
            .map(|n| (n.id, n.position.x, n.position.y, n.role.as_str().to_string(), n.cluster_id))
            .collect();
        self.refresh()?;
        self.queue.push(self.cfg.mobility.tick_s, EventKind::MobilityTick);
        self.queue.push(0.0, EventKind::MetricSample);
        for s in 0..self.slots.len() {
            let gap = self.draw_exp(s, self.cfg.traffic.mean_gap_s);
            self.queue.push(gap, EventKind::FlowArrival { slot: s });
        }
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.sim_time {
                break;
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::ProtocolDelivery { msg, copy: _ } => {
                    let table = &self.table;
                    let out = self.negotiator.deliver(
                        self.now,
                        &msg,
                        &mut |_, p| still_valid(table, p),
                        &mut self.loss,
                    );
                    self.schedule(out);
                }
                EventKind::TimerExpiry { session, timer } => {
                    let mut target = ChannelApplier { table: &mut self.table, dirty: &mut self.dirty };
                    let out = self.negotiator.on_timer(self.now, session, timer, &mut target, &mut self.loss);
                    self.schedule(out);
                    self.check_hierarchy();
                }
                EventKind::ProtocolRetry { request } => self.retry(request)?,
                EventKind::FlowEnd { slot } => self.on_flow_end(slot),
                EventKind::MobilityTick => {
                    self.mobility_tick();
                    let next = self.now + self.cfg.mobility.tick_s;
                    let period = self.cfg.sim.refresh_interval_s;
                    let k = (self.now / period).round();
                    if (self.now - k * period).abs() < 1e-9 {
                        self.refresh()?;
                    }
                    self.queue.push(next, EventKind::MobilityTick);
                }
                EventKind::FlowArrival { slot } => self.on_arrival(slot)?,
                EventKind::MacAttempt { slot } => self.on_mac_attempt(slot)?,
                EventKind::MetricSample => {
                    self.sample()?;
                    self.queue.push(self.now + self.cfg.sim.sample_interval_s, EventKind::MetricSample);
                }
            }
            if !self.negotiator.check_exclusiveness() {
                self.exclusiveness_violations += 1;
            }
            self.negotiator.prune();
        }
        self.now = self.sim_time;
        let last = self.series.last().map(|f| f.time);
        if last != Some(self.sim_time) {
            self.sample()?;
        }
        let trace = if self.cfg.output.trace {
            let mut buf = Vec::new();
            self.negotiator.write_trace(&mut buf)?;
            Some(String::from_utf8_lossy(&buf).into_owned())
        } else {
            None
        };
        Ok(RunOutput {
            mode: self.mode.as_str().to_string(),
            seed: self.seed,
            node_count: self.members,
            components: self.components,
            final_frame: self.series.last().cloned().unwrap_or_default(),
            series: std::mem::take(&mut self.series),
            channel_loads: std::mem::take(&mut self.channel_loads),
            trace,
            placements,
            hierarchy_violations: self.hierarchy_violations,
            exclusiveness_violations: self.exclusiveness_violations,
            capacity_violations: self.capacity_violations,
        })
    }

    fn schedule(&mut self, items: Vec<Scheduled>) {
        for s in items {
            match s {
                Scheduled::Deliver { at, msg, copy } => self.queue.push(at, EventKind::ProtocolDelivery { msg, copy }),
                Scheduled::Timer { at, session, timer } => {
                    self.queue.push(at, EventKind::TimerExpiry { session, timer })
                }
                Scheduled::Retry { at, request } => self.queue.push(at, EventKind::ProtocolRetry { request }),
            }
        }
    }

    fn retry(&mut self, request: SessionRequest) -> Result<()> {
        if !still_valid(&self.table, &request.proposal) {
            return Ok(());
        }
        let mut target = ChannelApplier { table: &mut self.table, dirty: &mut self.dirty };
        let (init, out) = self.negotiator.initiate(self.now, request.clone(), &self.topo, &mut self.loss, &mut target)?;
        if init == Initiation::Refused && request.attempt < self.negotiator.cfg.max_attempts {
            let at = self.now + self.negotiator.cfg.backoff(request.attempt);
            self.queue.push(
                at,
                EventKind::ProtocolRetry { request: SessionRequest { attempt: request.attempt + 1, ..request } },
            );
        } else {
            self.schedule(out);
        }
        Ok(())
    }

    fn check_hierarchy(&mut self) {
        if !self.topo.hierarchy_holds() {
            self.hierarchy_violations += 1;
        }
    }

    fn draw_exp(&mut self, slot: usize, mean: f64) -> f64 {
        let rng = self.slots[slot].rng.as_mut().unwrap();
        let u: f64 = rng.random();
        -mean * (1.0 - u).ln()
    }

    // ---- mobility and refresh -------------------------------------------

    fn mobility_tick(&mut self) {
        let step = self.cfg.mobility.step_m;
        for i in 0..self.members {
            let n = &self.nodes[i];
            if !n.role.is_mobile() {
                continue;
            }
            let arm = self.arms[n.arm.unwrap_or(0)];
            let len = arm.length();
            let dir = if self.mobility_rngs[i].random::<bool>() { 1.0 } else { -1.0 };
            let mut s = self.coord[i] + dir * step;
            if s < 0.0 {
                s = -s;
            }
            if s > len {
                s = 2.0 * len - s;
            }
            let s = s.clamp(0.0, len);
            self.coord[i] = s;
            let p = arm.at(s);
            let n = &mut self.nodes[i];
            n.position = p;
            n.cluster_id = Some(hard_handoff(&p, &self.cells));
        }
    }

    /// Re-clusters, rebuilds routing, reroutes live sessions, recomputes
    /// powers and, in the full scheme, runs an adjustment episode.
    fn refresh(&mut self) -> Result<()> {
        self.advance_all();
        join_nearest_head(&mut self.nodes, &mut self.clusters);
        for (c, cl) in self.clusters.iter_mut().enumerate() {
            if let Some(cl) = cl {
                cl.recompute(&self.nodes);
                self.cluster_of[cl.head] = c;
                for &m in &cl.members {
                    self.cluster_of[m] = c;
                }
            }
        }
        let pts: Vec<Point> = self.nodes[..self.members].iter().map(|n| n.position).collect();
        let k = self.cfg.radio.path_loss_exponent;
        self.graph = RoutingGraph::build(&pts, self.cfg.radio.range_m, self.cfg.radio.neighbor_cap, k, &self.model);
        self.to_head.clear();
        self.from_head.clear();
        self.to_head_ref.clear();
        self.from_head_ref.clear();
        for c in self.present_cells() {
            let h = self.head_of(c).unwrap();
            self.to_head.insert(c, self.graph.tree(h, true, false));
            self.from_head.insert(c, self.graph.tree(h, false, false));
            if self.mode.cooperative() {
                self.to_head_ref.insert(c, self.graph.tree(h, true, true));
                self.from_head_ref.insert(c, self.graph.tree(h, false, true));
            }
        }
        self.build_legs();

        // Connectivity graph: member links plus the backbone.
        let mut g = Graph::new(self.nodes.len());
        for (a, b) in self.graph.edges() {
            g.add_edge(a, b);
        }
        for leg in self.legs.values() {
            for h in &leg.hops {
                g.add_edge(h.tx, h.rx);
            }
        }

        // Reroute live sessions.
        let ids: Vec<usize> = self.flows.keys().copied().collect();
        for id in ids {
            self.reroute(id, &g);
        }

        // Idle links lose their channel; the graphs are rebuilt on the new G.
        let stale: Vec<LinkId> = self
            .table
            .assignment()
            .keys()
            .copied()
            .filter(|l| self.table.link_flows(*l) == 0 || !g.has_edge(l.0, l.1))
            .collect();
        for l in stale {
            if let Some(c) = self.table.channel_of(l) {
                self.dirty.insert(c);
            }
            self.table.unassign(l);
        }
        let mut topo = TopologyGraphs::new(g);
        for l in self.table.assignment().keys() {
            topo.use_link(l.0, l.1);
        }
        self.topo = topo;
        self.check_hierarchy();

        for (node, flow) in std::mem::take(&mut self.pending_updates) {
            let out = self.route_updates.route_update(node, flow, &mut self.loss);
            if out.update_sent && !out.accepted {
                self.pending_updates.push((node, flow));
            }
        }

        if self.mode == Mode::MccaClss {
            self.adjustment_episode()?;
        }
        self.recompute_powers(true)?;
        Ok(())
    }

    fn build_legs(&mut self) {
        self.legs.clear();
        let kb = self.cfg.radio.backbone_path_loss_exponent;
        let cells = self.present_cells();
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b) in &self.mst {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        // One edge, one direction.
        let edge = |e: &Engine, a: usize, b: usize| -> BackboneLeg {
            let (ha, hb) = (e.head_of(a).unwrap(), e.head_of(b).unwrap());
            let (pa, pb) = (e.nodes[ha].position, e.nodes[hb].position);
            let d = pa.dist(&pb).max(1e-3);
            let direct = e.model.best(d, kb, e.graph.partners(ha)).0;
            let ref_energy = e.reference.single(d, kb);
            let mut hops = vec![Hop { tx: ha, rx: hb, energy: direct }];
            let relays = e
                .relays
                .get(&(a, b))
                .cloned()
                .or_else(|| e.relays.get(&(b, a)).map(|r| r.iter().rev().copied().collect()));
            if let Some(r) = relays.filter(|r| !r.is_empty()) {
                let chain: Vec<usize> = std::iter::once(ha).chain(r).chain(std::iter::once(hb)).collect();
                let relayed: Vec<Hop> = chain
                    .windows(2)
                    .map(|w| {
                        let d = e.nodes[w[0]].position.dist(&e.nodes[w[1]].position).max(1e-3);
                        let energy = if w[0] == ha {
                            e.model.best(d, kb, e.graph.partners(ha)).0
                        } else {
                            e.reference.single(d, kb)
                        };
                        Hop { tx: w[0], rx: w[1], energy }
                    })
                    .collect();
                if relayed.iter().map(|h| h.energy).sum::<f64>() < direct {
                    hops = relayed;
                }
            }
            BackboneLeg { hops, ref_energy }
        };
        for &s in &cells {
            // Walk the tree from s, extending legs edge by edge.
            let mut stack = vec![(s, BackboneLeg::default())];
            let mut seen = BTreeSet::from([s]);
            while let Some((u, leg)) = stack.pop() {
                for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                    if seen.insert(v) {
                        let step = edge(self, u, v);
                        let mut l = leg.clone();
                        l.hops.extend(step.hops);
                        l.ref_energy += step.ref_energy;
                        self.legs.insert((s, v), l.clone());
                        stack.push((v, l));
                    }
                }
            }
        }
    }

    // ---- routing and admission ------------------------------------------

    fn member_hop(&self, tx: usize, rx: usize) -> Option<Hop> {
        self.graph.hop_cost(tx, rx).map(|(energy, _)| Hop { tx, rx, energy })
    }

    /// Hierarchical minimum-energy route, or `None` when disconnected.
    fn route(&self, src: usize, dst: usize) -> Option<Route> {
        let (cs, cd) = (self.cluster_of[src], self.cluster_of[dst]);
        let to = self.to_head.get(&cs)?;
        let from = self.from_head.get(&cd)?;
        let up = to.path(src)?;
        let down = from.path(dst)?;
        let mut hops = Vec::with_capacity(up.len() + down.len());
        for w in up.windows(2) {
            hops.push(self.member_hop(w[0], w[1])?);
        }
        let mut ref_energy = 0.0;
        if cs != cd {
            let leg = self.legs.get(&(cs, cd))?;
            hops.extend(leg.hops.iter().copied());
            ref_energy += leg.ref_energy;
        }
        for w in down.windows(2) {
            hops.push(self.member_hop(w[0], w[1])?);
        }
        if self.mode.cooperative() {
            ref_energy += self.to_head_ref[&cs].dist[src] + self.from_head_ref[&cd].dist[dst];
        } else {
            ref_energy += to.dist[src] + from.dist[dst];
        }
        Some(Route { hops, ref_energy })
    }

    fn static_channel(&self, link: LinkId) -> u16 {
        let key = ((link.0 as u64) << 32) | link.1 as u64;
        (splitmix(key ^ 0x5EED) % u64::from(self.cfg.mac.channels)) as u16
    }

    fn choose_channel(&self, link: LinkId, tx: usize) -> Result<u16> {
        if let Some(c) = self.table.channel_of(link) {
            return Ok(c);
        }
        match self.mode {
            Mode::MccaClss => {
                // Least contended; among ties, the first at or after the hashed channel.
                let profile = self.table.contention_profile(&self.topo, tx)?;
                let low = profile.iter().copied().min().unwrap_or(0);
                let n = profile.len();
                let start = self.static_channel(link) as usize;
                Ok((0..n).map(|i| (start + i) % n).find(|&c| profile[c] == low).unwrap_or(start) as u16)
            }
            _ => Ok(self.static_channel(link)),
        }
    }

    /// Assigns channels to the unassigned links of `hops` and returns the
    /// links it assigned together with the contention-weighted path delay.
    fn assign_path(&mut self, hops: &[Hop]) -> Result<(Vec<LinkId>, f64)> {
        let mut fresh = Vec::new();
        let mut delay = 0.0;
        for h in hops {
            let l = h.link();
            if self.table.channel_of(l).is_none() {
                let c = self.choose_channel(l, h.tx)?;
                self.table.assign(l, c)?;
                self.topo.assign_link(l.0, l.1);
                self.dirty.insert(c);
                fresh.push(l);
            }
            let c = self.table.channel_of(l).unwrap();
            let contention = self.table.contention_on(&self.topo, h.tx, c).max(1);
            delay += self.cfg.traffic.per_hop_delay_s * f64::from(contention);
        }
        Ok((fresh, delay))
    }

    fn release_assignment(&mut self, fresh: &[LinkId]) {
        for l in fresh {
            if self.table.link_flows(*l) == 0 {
                self.table.unassign(*l);
                self.topo.g2.remove_edge(l.0, l.1);
            }
        }
    }

    fn residual(&self, l: LinkId) -> f64 {
        self.cfg.traffic.link_capacity_bps - self.alloc.get(&l).copied().unwrap_or(0.0)
    }

    /// Splits `demand` over the residual network when the primary path lacks
    /// capacity on some link.
    fn multipath(&self, src: usize, dst: usize, demand: f64, primary: &Route) -> Option<Vec<(Vec<Hop>, f64)>> {
        let mut net = FlowNetwork::new(self.nodes.len());
        let mut energy: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b) in self.graph.edges() {
            let l = LinkId::new(a, b);
            let cap = self.residual(l);
            let (ab, _) = self.graph.hop_cost(a, b).unwrap();
            let (ba, _) = self.graph.hop_cost(b, a).unwrap();
            net.add_arc(a, b, cap, ab);
            net.add_arc(b, a, cap, ba);
            energy.insert((a, b), ab);
            energy.insert((b, a), ba);
        }
        for h in primary.hops.iter().filter(|h| h.tx >= self.members || h.rx >= self.members) {
            net.add_arc(h.tx, h.rx, self.residual(h.link()), h.energy);
            energy.insert((h.tx, h.rx), h.energy);
        }
        let shares = admit_flow(&net, src, dst, demand)?;
        Some(
            shares
                .into_iter()
                .map(|s| {
                    let hops = s
                        .nodes
                        .windows(2)
                        .map(|w| Hop { tx: w[0], rx: w[1], energy: energy[&(w[0], w[1])] })
                        .collect();
                    (hops, s.rate / demand)
                })
                .collect(),
        )
    }

    /// Finds paths with capacity for `demand`: the primary route when it fits,
    /// a fractional split otherwise.
    fn capacity_paths(&self, src: usize, dst: usize, demand: f64, route: &Route) -> Option<Vec<(Vec<Hop>, f64)>> {
        let mut need: BTreeMap<LinkId, f64> = BTreeMap::new();
        for h in &route.hops {
            *need.entry(h.link()).or_default() += demand;
        }
        if need.iter().all(|(l, d)| self.residual(*l) + 1e-9 >= *d) {
            Some(vec![(route.hops.clone(), 1.0)])
        } else {
            self.multipath(src, dst, demand, route)
        }
    }

    fn nearest_member(&self, p: &Point, exclude: Option<usize>) -> usize {
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.members {
            if Some(i) == exclude {
                continue;
            }
            let d = self.nodes[i].position.dist(p);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn random_point(&mut self, slot: usize) -> Point {
        let total: f64 = self.arms.iter().map(Arm::length).sum();
        let rng = self.slots[slot].rng.as_mut().unwrap();
        let mut s = rng.random::<f64>() * total;
        for a in &self.arms {
            if s <= a.length() {
                return a.at(s);
            }
            s -= a.length();
        }
        self.arms.last().unwrap().b
    }

    fn on_arrival(&mut self, slot: usize) -> Result<()> {
        let ps = self.random_point(slot);
        let pd = self.random_point(slot);
        let duration = self.draw_exp(slot, self.cfg.traffic.mean_session_s);
        self.queue.push(self.now + duration, EventKind::FlowEnd { slot });
        self.totals.attempts += 1;
        if self.members < 2 {
            self.totals.blocked += 1;
            return Ok(());
        }
        let src = self.nearest_member(&ps, None);
        let dst = self.nearest_member(&pd, Some(src));
        let demand = self.cfg.traffic.demand_bps;

        let admitted = self.try_admit(src, dst, demand)?;
        let Some((paths, ref_energy, delay)) = admitted else {
            self.totals.blocked += 1;
            return Ok(());
        };
        let id = self.next_flow;
        self.next_flow += 1;
        let mut flow = Flow {
            id,
            slot,
            source: src,
            sink: dst,
            demand,
            route: Vec::new(),
            state: FlowState::Active,
            paths,
            ref_per_bit: ref_energy,
            energy_per_bit: 0.0,
            delay,
            start: self.now,
            last: self.now,
            injected: 0.0,
            delivered: 0.0,
            mac_reorder: false,
        };
        self.commit_paths(&mut flow);
        self.totals.admitted += 1;
        let hops = flow.hop_count();
        self.totals.hops_sum += hops as u64;
        self.totals.max_hops = self.totals.max_hops.max(hops);
        self.slots[slot].flow = Some(id);
        self.flows.insert(id, flow);
        self.queue.push(self.now, EventKind::MacAttempt { slot });
        Ok(())
    }

    /// Route, capacity, channel and delay checks. On success the links are
    /// left with channels assigned (not yet loaded).
    #[allow(clippy::type_complexity)]
    fn try_admit(&mut self, src: usize, dst: usize, demand: f64) -> Result<Option<(Vec<(Vec<Hop>, f64)>, f64, f64)>> {
        let Some(route) = self.route(src, dst) else {
            self.totals.blocked_by[0] += 1;
            return Ok(None);
        };
        let Some(paths) = self.capacity_paths(src, dst, demand, &route) else {
            self.totals.blocked_by[1] += 1;
            return Ok(None);
        };
        let mut fresh = Vec::new();
        let mut delay: f64 = 0.0;
        for (hops, _) in &paths {
            let (f, d) = self.assign_path(hops)?;
            fresh.extend(f);
            delay = delay.max(d);
        }
        if delay > self.cfg.traffic.delay_budget_s {
            self.release_assignment(&fresh);
            self.totals.blocked_by[2] += 1;
            return Ok(None);
        }
        Ok(Some((paths, route.ref_energy, delay)))
    }

    /// Loads the flow's links and fills its public route and energy.
    fn commit_paths(&mut self, flow: &mut Flow) {
        flow.route = flow
            .paths
            .iter()
            .map(|(hops, share)| PathShare {
                nodes: Route { hops: hops.clone(), ref_energy: 0.0 }.nodes(flow.source),
                rate: share * flow.demand,
            })
            .collect();
        let mut links: BTreeMap<LinkId, f64> = BTreeMap::new();
        for (h, share) in flow.hops() {
            *links.entry(h.link()).or_default() += share * flow.demand;
        }
        for (l, rate) in links {
            let a = self.alloc.entry(l).or_default();
            *a += rate;
            if *a > self.cfg.traffic.link_capacity_bps * (1.0 + 1e-9) {
                self.capacity_violations += 1;
            }
            if self.table.channel_of(l).is_none() {
                let c = self.choose_channel(l, l.0).unwrap_or(0);
                let _ = self.table.assign(l, c);
            }
            self.table.add_flow(l);
            self.topo.use_link(l.0, l.1);
            if let Some(c) = self.table.channel_of(l) {
                self.dirty.insert(c);
            }
        }
        flow.energy_per_bit = self.flow_energy(flow);
    }

    fn release_paths(&mut self, flow: &Flow) {
        let mut links: BTreeMap<LinkId, f64> = BTreeMap::new();
        for (h, share) in flow.hops() {
            *links.entry(h.link()).or_default() += share * flow.demand;
        }
        for (l, rate) in links {
            if let Some(a) = self.alloc.get_mut(&l) {
                *a -= rate;
                if *a <= 1e-6 {
                    self.alloc.remove(&l);
                }
            }
            self.table.remove_flow(l);
            if self.table.link_flows(l) == 0 {
                self.topo.g1.remove_edge(l.0, l.1);
            }
            if let Some(c) = self.table.channel_of(l) {
                self.dirty.insert(c);
            }
        }
    }

    fn flow_energy(&self, flow: &Flow) -> f64 {
        flow.hops()
            .map(|(h, share)| share * h.energy * self.penalty.get(&h.link()).copied().unwrap_or(1.0))
            .sum()
    }

    fn reroute(&mut self, id: usize, g: &Graph) {
        let flow = self.flows.remove(&id).unwrap();
        let intact = flow.hops().all(|(h, _)| g.has_edge(h.tx, h.rx));
        let fresh = self.route(flow.source, flow.sink);
        let old_nodes = flow.route.first().map(|p| p.nodes.clone()).unwrap_or_default();
        let same = fresh.as_ref().is_some_and(|r| {
            flow.paths.len() == 1 && r.nodes(flow.source) == old_nodes
        });
        if same {
            let mut flow = flow;
            flow.ref_per_bit = fresh.unwrap().ref_energy;
            self.flows.insert(id, flow);
            return;
        }
        if fresh.is_none() && intact {
            self.flows.insert(id, flow);
            return;
        }
        self.release_paths(&flow);
        let mut flow = flow;
        let Some(r) = fresh else {
            // No route any more: what is in flight is lost.
            flow.state = FlowState::Dropped;
            self.finish(flow, false);
            return;
        };
        let Some(paths) = self.capacity_paths(flow.source, flow.sink, flow.demand, &r) else {
            flow.state = FlowState::Dropped;
            self.finish(flow, false);
            return;
        };
        let new_nodes = r.nodes(flow.source);
        let common = old_nodes.iter().zip(&new_nodes).take_while(|(a, b)| a == b).count();
        let pivot = old_nodes[common.saturating_sub(1)];
        self.route_updates.register_change(pivot, [(id, flow.source)]);
        self.pending_updates.push((pivot, id));
        self.totals.route_changes += 1;
        flow.paths = paths;
        flow.ref_per_bit = r.ref_energy;
        let links: Vec<Hop> = flow.hops().map(|(h, _)| *h).collect();
        let delay = links.iter().len() as f64 * self.cfg.traffic.per_hop_delay_s;
        flow.delay = delay;
        self.commit_paths(&mut flow);
        self.flows.insert(id, flow);
    }

    // ---- accounting -----------------------------------------------------

    fn advance(&mut self, id: usize) {
        let now = self.now;
        let f = self.flows.get_mut(&id).unwrap();
        if now <= f.last {
            return;
        }
        f.injected += f.demand * (now - f.last);
        let in_flight = f.demand * (now - f.start).min(f.delay);
        let delivered = (f.injected - in_flight).max(f.delivered);
        let dd = delivered - f.delivered;
        f.delivered = delivered;
        f.last = now;
        self.totals.tx_energy += dd * f.energy_per_bit;
        self.totals.ref_energy += dd * f.ref_per_bit;
    }

    fn advance_all(&mut self) {
        let ids: Vec<usize> = self.flows.keys().copied().collect();
        for id in ids {
            self.advance(id);
        }
    }

    /// Retires a flow; `drain` delivers what is in flight, otherwise it is lost.
    fn finish(&mut self, mut flow: Flow, drain: bool) {
        let rest = flow.injected - flow.delivered;
        if drain {
            flow.delivered += rest;
            self.totals.tx_energy += rest * flow.energy_per_bit;
            self.totals.ref_energy += rest * flow.ref_per_bit;
        } else {
            self.totals.dropped += rest;
            self.totals.dropped_sessions += 1;
        }
        self.totals.injected += flow.injected;
        self.totals.delivered += flow.delivered;
        if self.slots[flow.slot].flow == Some(flow.id) {
            self.slots[flow.slot].flow = None;
        }
    }

    fn on_flow_end(&mut self, slot: usize) {
        if let Some(id) = self.slots[slot].flow {
            self.advance(id);
            let mut flow = self.flows.remove(&id).unwrap();
            self.release_paths(&flow);
            flow.state = FlowState::Completed;
            self.finish(flow, true);
        }
        let gap = self.draw_exp(slot, self.cfg.traffic.mean_gap_s);
        self.queue.push(self.now + gap, EventKind::FlowArrival { slot });
    }

    // ---- MAC --------------------------------------------------------------

    /// Next-hop candidates of the flow's source, best first.
    fn mac_candidates(&self, flow: &Flow) -> Vec<(usize, f64)> {
        let src = flow.source;
        let first = flow.paths[0].0.first().map(|h| h.rx);
        let cs = self.cluster_of[src];
        let mut out: Vec<(f64, usize, f64)> = Vec::new();
        if let Some(tree) = self.to_head.get(&cs).filter(|t| t.root != src && t.reachable(src)) {
            for &v in self.graph.neighbors(src) {
                if tree.dist[v] < tree.dist[src] {
                    let (c, _) = self.graph.hop_cost(src, v).unwrap();
                    out.push((c + tree.dist[v], v, self.graph.hop_len(src, v).unwrap()));
                }
            }
        }
        if out.is_empty() {
            if let Some(rx) = first {
                let d = self.nodes[src].position.dist(&self.nodes[rx].position);
                out.push((0.0, rx, d));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.truncate(self.cfg.mac.receiver_cap);
        out.into_iter().map(|(_, v, d)| (v, d)).collect()
    }

    fn on_mac_attempt(&mut self, slot: usize) -> Result<()> {
        let Some(id) = self.slots[slot].flow else { return Ok(()) };
        let flow = &self.flows[&id];
        let mut cands = self.mac_candidates(flow);
        if cands.is_empty() {
            return Ok(());
        }
        let reorder = flow.mac_reorder;
        let k = self.cfg.radio.path_loss_exponent;
        let mac = self.cfg.mac.clone();
        let rng = self.slots[slot].mac_rng.as_mut().unwrap();
        if reorder {
            let list: Vec<usize> = cands.iter().map(|c| c.0).collect();
            let weights: Vec<f64> = list
                .iter()
                .map(|&v| self.table.incident_links(v).map(|l| f64::from(self.table.link_flows(l))).sum())
                .collect();
            let order = recover_priority(&list, &weights, rng);
            cands.sort_by_key(|c| order.iter().position(|&v| v == c.0));
        }
        let g = DMatrix::from_diagonal(&DVector::from_iterator(
            cands.len(),
            cands.iter().map(|c| (mac.quality_range_m / c.1.max(1e-3)).powf(k)),
        ));
        let r = DVector::from_iterator(cands.len(), (0..cands.len()).map(|_| -(1.0 - rng.random::<f64>()).ln()));
        let quality = randomize_state(&StateMatrix { g, r })?;
        let rts = RtsFrame::new(self.flows[&id].source, cands.iter().map(|c| c.0).collect(), id as u64)?;
        let outcome = mac_exchange(&rts, quality.as_slice(), mac.quality_floor, mac.success_prob, rng)?;
        self.totals.mac_attempts += 1;
        let ok = matches!(outcome, MacOutcome::Winner { .. });
        if ok {
            self.totals.mac_successes += 1;
        }
        self.flows.get_mut(&id).unwrap().mac_reorder = !ok;
        self.queue.push(self.now + mac.attempt_interval_s, EventKind::MacAttempt { slot });
        Ok(())
    }

    // ---- power game and interference --------------------------------------

    fn gain(&self, d: f64) -> f64 {
        let d0 = self.cfg.radio.reference_distance_m;
        (d0 / d.max(1e-3)).powf(self.cfg.radio.path_loss_exponent)
    }

    fn link_len(&self, l: LinkId) -> f64 {
        self.nodes[l.0].position.dist(&self.nodes[l.1].position)
    }

    /// Interference coupling of link `j` onto link `i`: the gain over the
    /// shortest distance between their endpoints, zero beyond the radio range
    /// or when the links share a node.
    fn coupling(&self, i: LinkId, j: LinkId) -> f64 {
        if i.touches(j.0) || i.touches(j.1) {
            return 0.0;
        }
        let ends = |l: LinkId| [self.nodes[l.0].position, self.nodes[l.1].position];
        let mut d = f64::INFINITY;
        for a in ends(i) {
            for b in ends(j) {
                d = d.min(a.dist(&b));
            }
        }
        if d > self.cfg.radio.range_m {
            0.0
        } else {
            self.gain(d.max(1.0))
        }
    }

    /// Recomputes powers and penalties on dirty channels (all with `all`).
    ///
    /// A link's penalty is `1 + Σ_j min(1, M_ij q_j / (M_ii q_max))` over its
    /// co-channel interferers: an interferer costs at most one extra airtime.
    fn recompute_powers(&mut self, all: bool) -> Result<()> {
        let dirty = std::mem::take(&mut self.dirty);
        let chans: BTreeSet<u16> = if all { (0..self.cfg.mac.channels).collect() } else { dirty };
        if chans.is_empty() {
            return Ok(());
        }
        let table = &self.table;
        let stale = |l: &LinkId| table.channel_of(*l).is_none_or(|c| chans.contains(&c));
        self.powers.retain(|l, _| !stale(l));
        self.penalty.retain(|l, _| !stale(l));
        let g = self.cfg.game.clone();
        for &c in &chans {
            let live: Vec<LinkId> = self.table.links_on(c).filter(|l| self.table.link_flows(*l) > 0).collect();
            if live.is_empty() {
                continue;
            }
            let n = live.len();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = self.gain(self.link_len(live[i]));
                for j in 0..i {
                    let v = self.coupling(live[i], live[j]);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let q: Vec<f64> = if self.mode.cooperative() && n > 1 {
                let mut game =
                    PowerGame::new(m.clone(), vec![self.target_power; n], vec![1.0; n], vec![g.noise; n], vec![g.q_max; n])?;
                let conv = iterate_to_convergence(&mut game, g.eps, g.max_iter)?;
                if !conv.converged {
                    log::debug!("power game on channel {c} stopped after {} iterations", conv.iterations);
                }
                conv.q
                    .iter()
                    .zip(&live)
                    .map(|(&q, l)| {
                        let floor = min_transmit_power(g.tau, self.link_len(*l)).unwrap_or(0.0).min(g.q_max);
                        q.max(floor)
                    })
                    .collect()
            } else if self.mode.cooperative() {
                vec![self.target_power.clamp(0.0, g.q_max); n]
            } else {
                vec![g.q_max; n]
            };
            for i in 0..n {
                let full = m[(i, i)] * g.q_max;
                let extra: f64 = (0..n).filter(|&j| j != i).map(|j| (m[(i, j)] * q[j] / full).min(1.0)).sum();
                self.powers.insert(live[i], q[i]);
                self.penalty.insert(live[i], 1.0 + extra);
            }
        }
        let ids: Vec<usize> = self.flows.keys().copied().collect();
        for id in ids {
            let e = self.flow_energy(&self.flows[&id]);
            self.flows.get_mut(&id).unwrap().energy_per_bit = e;
        }
        Ok(())
    }

    // ---- channel adjustment -------------------------------------------------

    /// Cooperative rate of a link if moved to the candidate's channel.
    fn candidate_rate(&self, cand: &Candidate) -> Result<f64> {
        let (tx, rx) = (cand.link.0, cand.link.1);
        let partner = |u: usize| -> usize {
            if u < self.members {
                self.graph.neighbors(u).iter().copied().min_by(|&a, &b| {
                    let pa = self.nodes[u].position.dist(&self.nodes[a].position);
                    let pb = self.nodes[u].position.dist(&self.nodes[b].position);
                    pa.total_cmp(&pb).then(a.cmp(&b))
                }).unwrap_or(u)
            } else {
                u
            }
        };
        let (tp, rp) = (partner(tx), partner(rx));
        let amp = |a: usize, b: usize| self.gain(self.nodes[a].position.dist(&self.nodes[b].position)).sqrt();
        let m1 = DMatrix::from_row_slice(1, 2, &[amp(tx, rx), amp(tp, rx)]);
        let m2 = DMatrix::from_row_slice(1, 2, &[amp(tx, rp), amp(tp, rp)]);
        let noise = self.cfg.game.noise;
        let interference: f64 = self
            .table
            .links_on(cand.to)
            .filter(|l| *l != cand.link)
            .map(|l| self.coupling(cand.link, l) * self.powers.get(&l).copied().unwrap_or(self.cfg.game.q_max))
            .sum();
        let w = 1.0 / (noise + interference);
        let mut ch = CoopChannel::new(m1.clone(), m2, 0.5, self.cfg.game.q_max);
        ch.ns *= w;
        ch.nr *= w;
        let coop = maximize_r_coop(&ch, self.cfg.mac.rate_tolerance)?.rate;
        let direct = (1.0 + m1[(0, 0)].powi(2) * self.cfg.game.q_max * w).log2();
        Ok(achievable_min_rate(direct, coop))
    }

    fn adjustment_episode(&mut self) -> Result<()> {
        let nodes: Vec<usize> = (0..self.topo.g2.node_count()).filter(|&n| self.topo.g2.degree(n) >= 2).collect();
        self.table.refresh_contention(&self.topo, &nodes)?;
        for node in nodes {
            if self.negotiator.is_locked(node) {
                continue;
            }
            let threshold = self.table.overload_threshold(node, self.cfg.mac.overload_factor);
            let Some(c) = detect_overload(&self.table, node, threshold) else { continue };
            let cands = enumerate_candidates(&self.table, &self.topo, node, c, self.cfg.mac.max_targets)?;
            if cands.is_empty() {
                continue;
            }
            let rates = cands.iter().map(|x| self.candidate_rate(x)).collect::<Result<Vec<f64>>>()?;
            let loads: Vec<f64> = cands.iter().map(|x| f64::from(self.table.load(x.to))).collect();
            let node_load: u32 = self.table.incident_links(node).map(|l| self.table.link_flows(l)).sum();
            let rule = if node_load < self.cfg.mac.receiver_load_threshold {
                SelectionRule::MinLoad
            } else {
                SelectionRule::MaxRate
            };
            let Some(i) = select_candidate(&self.table, &self.topo, node, c, &cands, &rates, &loads, rule)? else {
                continue;
            };
            let cand = cands[i];
            let request = SessionRequest {
                initiator: node,
                proposal: Proposal {
                    deltas: vec![Delta::Channel { link: cand.link, from: Some(cand.from), to: cand.to }],
                },
                attempt: 1,
            };
            let mut target = ChannelApplier { table: &mut self.table, dirty: &mut self.dirty };
            let (_, out) = self.negotiator.initiate(self.now, request, &self.topo, &mut self.loss, &mut target)?;
            self.schedule(out);
        }
        Ok(())
    }

    // ---- sampling ------------------------------------------------------------

    fn sample(&mut self) -> Result<()> {
        self.advance_all();
        let t = &self.totals;
        let mut injected = t.injected;
        let mut delivered = t.delivered;
        for f in self.flows.values() {
            injected += f.injected;
            delivered += f.delivered;
        }
        let dropped = t.dropped;
        let in_flight = (injected - delivered - dropped).max(0.0);
        let idle = self.cfg.energy.idle_power_w * self.members as f64 * self.now;
        let frame = MetricsFrame {
            time: self.now,
            node_count: self.members,
            relative_energy: if t.ref_energy + idle > 0.0 { (t.tx_energy + idle) / (t.ref_energy + idle) } else { 1.0 },
            blocking_prob: 100.0 * MetricsFrame::ratio(t.blocked as f64, t.attempts as f64),
            addressing_ratio: MetricsFrame::ratio(t.mac_successes as f64, t.mac_attempts as f64),
            mean_hops: MetricsFrame::ratio(t.hops_sum as f64, t.admitted as f64),
            max_tolerated_hops: t.max_hops,
            session_attempts: t.attempts,
            sessions_blocked: t.blocked,
            sessions_dropped: t.dropped_sessions,
            blocked_no_route: t.blocked_by[0],
            blocked_capacity: t.blocked_by[1],
            blocked_delay: t.blocked_by[2],
            active_flows: self.flows.len(),
            mac_attempts: t.mac_attempts,
            mac_successes: t.mac_successes,
            injected_bits: injected,
            delivered_bits: delivered,
            in_flight_bits: injected - delivered - dropped,
            dropped_bits: dropped,
            tx_energy_j: t.tx_energy,
            reference_energy_j: t.ref_energy,
            idle_energy_j: idle,
            sessions_committed: self.negotiator.stats.committed,
            sessions_aborted: self.negotiator.stats.aborted,
            route_changes: t.route_changes,
        };
        debug_assert!(in_flight >= 0.0);
        self.series.push(frame);
        if self.cfg.output.channel_loads {
            for (c, &load) in self.table.loads().iter().enumerate() {
                if load > 0 {
                    self.channel_loads.push((self.now, c as u16, load));
                }
            }
        }
        self.recompute_powers(false)
    }
}

/// Runs one simulation.
pub fn run(cfg: &RunConfig, mode: Mode, sim_time: f64, seed: u64) -> Result<RunOutput> {
    Engine::new(cfg, mode, sim_time, seed)?.run()
}
