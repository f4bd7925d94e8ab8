use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{hard_handoff, Cell, Cluster, NodeState, Point, Role};
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Static description of a dual-cross, seven-cell deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Terrain width, m.
    pub width: f64,
    /// Terrain height, m.
    pub height: f64,
    /// Cell radius, m.
    pub cell_radius: f64,
    /// Node spacing along the cross arms, m.
    pub spacing: f64,
    pub seed: u64,
    pub node_count: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            width: 12_000.0,
            height: 6_000.0,
            cell_radius: 3_000.0,
            spacing: 1.0,
            seed: 1,
            node_count: 600,
        }
    }
}

/// One straight arm of a cross.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub a: Point,
    pub b: Point,
}

impl Arm {
    pub fn length(&self) -> f64 {
        self.a.dist(&self.b)
    }

    /// Point at arc-length `s` from `a`.
    pub fn at(&self, s: f64) -> Point {
        let len = self.length();
        if len == 0.0 {
            return self.a;
        }
        self.a.lerp(&self.b, (s / len).clamp(0.0, 1.0))
    }

    /// Arc-length coordinate of the projection of `p` onto the arm.
    pub fn coordinate(&self, p: &Point) -> f64 {
        let (dx, dy) = (self.b.x - self.a.x, self.b.y - self.a.y);
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return 0.0;
        }
        let t = ((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / len2;
        t.clamp(0.0, 1.0) * len2.sqrt()
    }
}

/// Cells and arms derived from a [`Scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLayout {
    pub cells: Vec<Cell>,
    /// Horizontal A, vertical A, horizontal B, vertical B.
    pub arms: Vec<Arm>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let cfg = |key: &str, reason: String| Error::Config {
            key: format!("scenario.{key}"),
            reason,
        };
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            return Err(cfg("cell_radius", format!("{} must be > 0", self.cell_radius)));
        }
        if !(self.width >= 4.0 * self.cell_radius) {
            return Err(cfg(
                "width",
                format!(
                    "{} m is too small for seven cells of radius {} m (need >= {})",
                    self.width,
                    self.cell_radius,
                    4.0 * self.cell_radius
                ),
            ));
        }
        if !(self.height >= 2.0 * self.cell_radius) {
            return Err(cfg(
                "height",
                format!(
                    "{} m is too small for seven cells of radius {} m (need >= {})",
                    self.height,
                    self.cell_radius,
                    2.0 * self.cell_radius
                ),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(cfg("spacing", format!("{} must be > 0", self.spacing)));
        }
        if self.node_count == 0 {
            return Err(cfg("node_count", "at least one node is required".into()));
        }
        let slots = self.slots().len();
        if self.node_count > slots {
            return Err(cfg(
                "node_count",
                format!("{} exceeds the {slots} lattice slots on the crosses", self.node_count),
            ));
        }
        Ok(())
    }

    pub fn layout(&self) -> ScenarioLayout {
        let (w, h, r) = (self.width, self.height, self.cell_radius);
        let centers = [
            (w / 2.0, h / 2.0),
            (w / 4.0, h / 2.0),
            (3.0 * w / 4.0, h / 2.0),
            (w / 4.0, 3.0 * h / 4.0),
            (w / 4.0, h / 4.0),
            (3.0 * w / 4.0, 3.0 * h / 4.0),
            (3.0 * w / 4.0, h / 4.0),
        ];
        let cells = centers
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Cell {
                id,
                center: Point::new(x, y),
                radius: r,
            })
            .collect();
        let arms = vec![
            Arm { a: Point::new(0.0, h / 2.0), b: Point::new(w / 2.0, h / 2.0) },
            Arm { a: Point::new(w / 4.0, 0.0), b: Point::new(w / 4.0, h) },
            Arm { a: Point::new(w / 2.0, h / 2.0), b: Point::new(w, h / 2.0) },
            Arm { a: Point::new(3.0 * w / 4.0, 0.0), b: Point::new(3.0 * w / 4.0, h) },
        ];
        ScenarioLayout { cells, arms }
    }

    /// Lattice slots `(arm, point)` at multiples of the spacing. Points shared
    /// by two arms appear once, owned by the horizontal arm.
    pub fn slots(&self) -> Vec<(usize, Point)> {
        let d = self.spacing;
        let (w, h) = (self.width, self.height);
        let mut out = Vec::new();
        let nx = (w / d).floor() as usize;
        for i in 0..=nx {
            let x = i as f64 * d;
            let arm = if x < w / 2.0 { 0 } else { 2 };
            out.push((arm, Point::new(x, h / 2.0)));
        }
        let ny = (h / d).floor() as usize;
        for (arm, x) in [(1, w / 4.0), (3, 3.0 * w / 4.0)] {
            let on_lattice = ((x / d).round() * d - x).abs() < 1e-9;
            for j in 0..=ny {
                let y = j as f64 * d;
                if on_lattice && (y - h / 2.0).abs() < 1e-9 {
                    continue;
                }
                out.push((arm, Point::new(x, y)));
            }
        }
        out
    }
}

/// Places members on distinct lattice slots and base stations at the cell
/// centres. Members take ids `0..node_count`; base stations follow.
///
/// Slots are drawn by a partial Fisher-Yates shuffle, so for a fixed seed the
/// member set at `n` nodes is a prefix of the set at any larger count.
pub fn generate_scenario(cfg: &Scenario) -> Result<(Vec<NodeState>, Vec<Cell>)> {
    cfg.validate()?;
    let layout = cfg.layout();
    let slots = cfg.slots();
    let mut order: Vec<usize> = (0..slots.len()).collect();
    let mut rng = rng::stream(cfg.seed, streams::PLACEMENT);
    let mut nodes = Vec::with_capacity(cfg.node_count + layout.cells.len());
    for i in 0..cfg.node_count {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
        let (arm, p) = slots[order[i]];
        let mut n = NodeState::new(i, p, Role::Member);
        n.arm = Some(arm);
        n.cluster_id = Some(hard_handoff(&p, &layout.cells));
        nodes.push(n);
    }
    for c in &layout.cells {
        let mut bs = NodeState::new(nodes.len(), c.center, Role::BaseStation);
        bs.cluster_id = Some(c.id);
        nodes.push(bs);
    }
    Ok((nodes, layout.cells))
}

/// Elects one head per cell (the attached member nearest the base station)
/// and joins every other member to its nearest head. Returns clusters indexed
/// by cell; cells without members get `None`.
pub fn form_clusters(nodes: &mut [NodeState], cells: &[Cell]) -> Vec<Option<Cluster>> {
    let mut heads: Vec<Option<usize>> = vec![None; cells.len()];
    for n in nodes.iter() {
        if !matches!(n.role, Role::Member | Role::ClusterHead) {
            continue;
        }
        let Some(c) = n.cluster_id else { continue };
        let d = n.position.dist(&cells[c].center);
        match heads[c] {
            Some(h) if nodes[h].position.dist(&cells[c].center) <= d => {}
            _ => heads[c] = Some(n.id),
        }
    }
    for n in nodes.iter_mut() {
        if n.role == Role::ClusterHead {
            n.role = Role::Member;
        }
    }
    let mut clusters: Vec<Option<Cluster>> = heads
        .iter()
        .map(|h| {
            h.map(|h| {
                nodes[h].role = Role::ClusterHead;
                Cluster::new(h)
            })
        })
        .collect();
    join_nearest_head(nodes, &mut clusters);
    clusters
}

/// Rebuilds cluster membership for fixed heads.
pub fn join_nearest_head(nodes: &mut [NodeState], clusters: &mut [Option<Cluster>]) {
    let heads: Vec<(usize, usize)> = clusters
        .iter()
        .enumerate()
        .filter_map(|(c, cl)| cl.as_ref().map(|cl| (c, cl.head)))
        .collect();
    for cl in clusters.iter_mut().flatten() {
        cl.members.clear();
    }
    if heads.is_empty() {
        return;
    }
    for i in 0..nodes.len() {
        if nodes[i].role != Role::Member {
            continue;
        }
        let p = nodes[i].position;
        let mut best = heads[0];
        let mut best_d = p.dist(&nodes[best.1].position);
        for &(c, h) in &heads[1..] {
            let d = p.dist(&nodes[h].position);
            if d < best_d {
                best = (c, h);
                best_d = d;
            }
        }
        if let Some(cl) = clusters[best.0].as_mut() {
            cl.members.insert(i);
        }
    }
    for cl in clusters.iter_mut().flatten() {
        cl.recompute(nodes);
    }
}
