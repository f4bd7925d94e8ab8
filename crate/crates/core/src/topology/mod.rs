//! Scenario geometry, clustering, spanning trees, relay placement and
//! neighborhood graphs.

mod connectivity;
mod graphs;
mod handoff;
mod mst;
mod relays;
mod scenario;

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

pub use connectivity::{check_connectivity, Connectivity, SpatialGrid};
pub use graphs::{two_hop_neighborhood, Graph, TopologyGraphs};
pub use handoff::hard_handoff;
pub use mst::{build_mst, tree_weight};
pub use relays::place_relays;
pub use scenario::{form_clusters, generate_scenario, join_nearest_head, Arm, Scenario, ScenarioLayout};

/// A position on the terrain, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Member,
    ClusterHead,
    CognitiveRelay,
    BaseStation,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Member => "member",
            Role::ClusterHead => "cluster_head",
            Role::CognitiveRelay => "cognitive_relay",
            Role::BaseStation => "base_station",
        }
    }

    pub fn is_mobile(&self) -> bool {
        matches!(self, Role::Member)
    }
}

/// Capacity of a node's relay buffer.
pub const RELAY_BUFFER_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: usize,
    pub position: Point,
    pub role: Role,
    /// Cell the node is attached to (hard handoff).
    pub cluster_id: Option<usize>,
    pub tx_power: f64,
    pub channels: BTreeSet<u16>,
    /// Pending cooperation requests, oldest first.
    pub relay_buffer: VecDeque<usize>,
    /// Arm index for members; `None` for fixed infrastructure.
    pub arm: Option<usize>,
}

impl NodeState {
    pub fn new(id: usize, position: Point, role: Role) -> Self {
        Self {
            id,
            position,
            role,
            cluster_id: None,
            tx_power: 0.0,
            channels: BTreeSet::new(),
            relay_buffer: VecDeque::new(),
            arm: None,
        }
    }

    /// Queues a cooperation request, refusing it when the buffer is full.
    pub fn buffer_request(&mut self, from: usize) -> bool {
        if self.relay_buffer.len() >= RELAY_BUFFER_CAP {
            return false;
        }
        self.relay_buffer.push_back(from);
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub head: usize,
    pub members: BTreeSet<usize>,
    /// Largest member-to-head distance, m.
    pub e_max: f64,
}

impl Cluster {
    pub fn new(head: usize) -> Self {
        Self {
            head,
            members: BTreeSet::new(),
            e_max: 0.0,
        }
    }

    pub fn recompute(&mut self, nodes: &[NodeState]) {
        let h = nodes[self.head].position;
        self.e_max = self
            .members
            .iter()
            .map(|&m| nodes[m].position.dist(&h))
            .fold(0.0, f64::max);
    }

    pub fn insert(&mut self, member: usize, nodes: &[NodeState]) {
        self.members.insert(member);
        self.recompute(nodes);
    }

    pub fn remove(&mut self, member: usize, nodes: &[NodeState]) {
        self.members.remove(&member);
        self.recompute(nodes);
    }
}
