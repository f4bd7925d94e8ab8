use std::collections::BTreeSet;

use super::Point;
use super::connectivity::SpatialGrid;
use crate::error::{Error, Result};

/// Undirected simple graph over node ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self { adj: vec![BTreeSet::new(); n] }
    }

    /// Disk graph: an edge joins every pair closer than or at `radius`.
    pub fn disk(points: &[Point], radius: f64) -> Self {
        let mut g = Graph::new(points.len());
        let grid = SpatialGrid::new(points, radius);
        for (i, p) in points.iter().enumerate() {
            for j in grid.within(points, p, radius) {
                if j > i {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn ensure_nodes(&mut self, n: usize) {
        if self.adj.len() < n {
            self.adj.resize(n, BTreeSet::new());
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.ensure_nodes(a.max(b) + 1);
        self.adj[a].insert(b);
        self.adj[b].insert(a);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        if let Some(s) = self.adj.get_mut(a) {
            s.remove(&b);
        }
        if let Some(s) = self.adj.get_mut(b) {
            s.remove(&a);
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj.get(a).is_some_and(|s| s.contains(&b))
    }

    pub fn neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj.get(a).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adj.get(a).map_or(0, BTreeSet::len)
    }

    /// Edges as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.range(a + 1..).map(move |&b| (a, b)))
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.edges().all(|(a, b)| other.has_edge(a, b))
    }
}

/// The hierarchy `G1 ⊆ G2 ⊆ G` of scheme graph, channel-assignment graph and
/// connectivity graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TopologyGraphs {
    pub g: Graph,
    pub g2: Graph,
    pub g1: Graph,
}

impl TopologyGraphs {
    pub fn new(g: Graph) -> Self {
        let n = g.node_count();
        Self { g, g2: Graph::new(n), g1: Graph::new(n) }
    }

    pub fn node_count(&self) -> usize {
        self.g.node_count()
    }

    pub fn hierarchy_holds(&self) -> bool {
        self.g1.is_subgraph_of(&self.g2) && self.g2.is_subgraph_of(&self.g)
    }

    /// Adds a link to `G2` (and `G`, keeping the hierarchy).
    pub fn assign_link(&mut self, a: usize, b: usize) {
        self.g.add_edge(a, b);
        self.g2.add_edge(a, b);
    }

    /// Adds a link to every level.
    pub fn use_link(&mut self, a: usize, b: usize) {
        self.assign_link(a, b);
        self.g1.add_edge(a, b);
    }
}

/// Nodes within two hops of `node` in `G2`, excluding `node`.
pub fn two_hop_neighborhood(graphs: &TopologyGraphs, node: usize) -> Result<BTreeSet<usize>> {
    if node >= graphs.node_count().max(graphs.g2.node_count()) {
        return Err(Error::UnknownNode(node));
    }
    let g2 = &graphs.g2;
    let mut out = BTreeSet::new();
    for a in g2.neighbors(node) {
        out.insert(a);
        out.extend(g2.neighbors(a));
    }
    out.remove(&node);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_and_star() {
        let mut t = TopologyGraphs::new(Graph::new(5));
        assert!(two_hop_neighborhood(&t, 0).unwrap().is_empty());
        for leaf in 1..5 {
            t.assign_link(0, leaf);
        }
        assert_eq!(two_hop_neighborhood(&t, 0).unwrap(), (1..5).collect());
        assert_eq!(two_hop_neighborhood(&t, 1).unwrap(), [0, 2, 3, 4].into());
        assert!(matches!(two_hop_neighborhood(&t, 9), Err(Error::UnknownNode(9))));
    }

    #[test]
    fn hierarchy() {
        let mut t = TopologyGraphs::new(Graph::new(3));
        t.use_link(0, 1);
        t.assign_link(1, 2);
        assert!(t.hierarchy_holds());
        t.g.remove_edge(1, 2);
        assert!(!t.hierarchy_holds());
    }

    #[test]
    fn edges_are_ordered_pairs() {
        let mut g = Graph::new(4);
        g.add_edge(3, 1);
        g.add_edge(0, 2);
        g.add_edge(2, 2);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 3)]);
        assert_eq!(g.edge_count(), 2);
    }
}
