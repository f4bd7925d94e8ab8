//! Minimum-energy routing over the member connectivity graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::energy::{EnergyParams, HopEnergy};
use crate::error::Result;
use crate::topology::{Point, SpatialGrid};

/// Per-hop energy for every allowed cooperation degree.
#[derive(Debug, Clone)]
pub struct HopModel {
    degrees: Vec<HopEnergy>,
}

impl HopModel {
    /// Degrees `1..=j_max`.
    pub fn new(params: &EnergyParams, j_max: u32) -> Result<Self> {
        let degrees = (1..=j_max.max(1)).map(|j| HopEnergy::new(params, j)).collect::<Result<_>>()?;
        Ok(Self { degrees })
    }

    pub fn j_max(&self) -> u32 {
        self.degrees.len() as u32
    }

    /// Cheapest degree for a hop of length `d`. `partners[i]` is the distance
    /// from the transmitter to its `i+1`-th nearest neighbor; degrees without
    /// enough partners are skipped.
    pub fn best(&self, d: f64, k: f64, partners: &[f64]) -> (f64, u32) {
        let mut best = (self.degrees[0].eval(d, k, 0.0), 1);
        for h in &self.degrees[1..] {
            let need = h.j as usize - 1;
            let Some(&e) = partners.get(need - 1) else { break };
            let c = h.eval(d, k, e);
            if c < best.0 {
                best = (c, h.j);
            }
        }
        best
    }

    /// Energy of a non-cooperative hop.
    pub fn single(&self, d: f64, k: f64) -> f64 {
        self.degrees[0].eval(d, k, 0.0)
    }
}

/// Symmetric neighbor graph over members with directed hop costs, stored in
/// compressed rows sorted by neighbor id.
#[derive(Debug, Clone, Default)]
pub struct RoutingGraph {
    pub n: usize,
    offsets: Vec<usize>,
    nbr: Vec<usize>,
    len: Vec<f64>,
    /// Cost of `u → nbr` with the mode's cooperation.
    cost_out: Vec<f64>,
    /// Cost of `nbr → u` with the mode's cooperation.
    cost_in: Vec<f64>,
    ref_out: Vec<f64>,
    ref_in: Vec<f64>,
    /// Nearest-neighbor distances per node, ascending.
    partners: Vec<Vec<f64>>,
}

impl RoutingGraph {
    /// Links every node to its `cap` nearest nodes within `range` (and
    /// symmetrically back).
    pub fn build(points: &[Point], range: f64, cap: usize, k: f64, model: &HopModel) -> Self {
        let n = points.len();
        let grid = SpatialGrid::new(points, range);
        let mut near: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n);
        for (u, p) in points.iter().enumerate() {
            let mut c: Vec<(f64, usize)> = grid
                .within(points, p, range)
                .into_iter()
                .filter(|&v| v != u)
                .map(|v| (p.dist(&points[v]), v))
                .collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            c.truncate(cap);
            near.push(c);
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, list) in near.iter().enumerate() {
            for &(_, v) in list {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let partners: Vec<Vec<f64>> = near
            .iter()
            .map(|l| l.iter().take(model.j_max() as usize).map(|x| x.0).collect())
            .collect();
        let mut g = RoutingGraph { n, partners, offsets: vec![0], ..Default::default() };
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            for &v in list.iter() {
                let d = points[u].dist(&points[v]);
                g.nbr.push(v);
                g.len.push(d);
                g.cost_out.push(model.best(d, k, &g.partners[u]).0);
                g.cost_in.push(model.best(d, k, &g.partners[v]).0);
                let r = model.single(d, k);
                g.ref_out.push(r);
                g.ref_in.push(r);
            }
            g.offsets.push(g.nbr.len());
        }
        g
    }

    pub fn edge_count(&self) -> usize {
        self.nbr.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.nbr[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    fn slot(&self, u: usize, v: usize) -> Option<usize> {
        self.neighbors(u).binary_search(&v).ok().map(|i| self.offsets[u] + i)
    }

    /// Mode and reference cost of the hop `u → v`, if the hop exists.
    pub fn hop_cost(&self, u: usize, v: usize) -> Option<(f64, f64)> {
        self.slot(u, v).map(|e| (self.cost_out[e], self.ref_out[e]))
    }

    pub fn hop_len(&self, u: usize, v: usize) -> Option<f64> {
        self.slot(u, v).map(|e| self.len[e])
    }

    pub fn partners(&self, u: usize) -> &[f64] {
        &self.partners[u]
    }

    /// Shortest paths from every node to `root` (`toward = true`) or from
    /// `root` to every node, under the mode or the reference cost.
    pub fn tree(&self, root: usize, toward: bool, reference: bool) -> Tree {
        let mut dist = vec![f64::INFINITY; self.n];
        let mut link = vec![usize::MAX; self.n];
        let mut heap = BinaryHeap::new();
        dist[root] = 0.0;
        heap.push(Item(0.0, root));
        let costs = match (toward, reference) {
            (true, false) => &self.cost_in,
            (true, true) => &self.ref_in,
            (false, false) => &self.cost_out,
            (false, true) => &self.ref_out,
        };
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for e in self.offsets[u]..self.offsets[u + 1] {
                let v = self.nbr[e];
                let nd = d + costs[e];
                if nd < dist[v] || (nd == dist[v] && u < link[v]) {
                    let improved = nd < dist[v];
                    dist[v] = nd;
                    link[v] = u;
                    if improved {
                        heap.push(Item(nd, v));
                    }
                }
            }
        }
        Tree { root, toward, dist, link }
    }
}

/// A shortest-path tree. For a tree toward the root `link[u]` is the next hop
/// of `u`; for a tree from the root it is the predecessor of `u`.
#[derive(Debug, Clone)]
pub struct Tree {
    pub root: usize,
    pub toward: bool,
    pub dist: Vec<f64>,
    pub link: Vec<usize>,
}

impl Tree {
    pub fn reachable(&self, u: usize) -> bool {
        self.dist[u].is_finite()
    }

    /// Node path between `u` and the root, in travel direction.
    pub fn path(&self, u: usize) -> Option<Vec<usize>> {
        if !self.reachable(u) {
            return None;
        }
        let mut p = vec![u];
        let mut x = u;
        while x != self.root {
            x = self.link[x];
            p.push(x);
        }
        if !self.toward {
            p.reverse();
        }
        Some(p)
    }
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, gap: f64) -> Vec<Point> {
        (0..n).map(|i| Point::new(i as f64 * gap, 0.0)).collect()
    }

    #[test]
    fn cooperation_only_with_partners() {
        let m = HopModel::new(&EnergyParams::default(), 2).unwrap();
        let (c1, j1) = m.best(2000.0, 4.0, &[]);
        assert_eq!(j1, 1);
        let (c2, j2) = m.best(2000.0, 4.0, &[10.0]);
        assert_eq!(j2, 2);
        assert!(c2 < c1);
        assert_eq!(m.best(1.0, 4.0, &[10.0]).1, 1);
    }

    #[test]
    fn trees_agree_with_brute_force() {
        let pts: Vec<Point> = [(0.0, 0.0), (30.0, 5.0), (55.0, -3.0), (90.0, 0.0), (140.0, 2.0), (160.0, 40.0)]
            .iter()
            .map(|&(x, y)| Point::new(x, y))
            .collect();
        let m = HopModel::new(&EnergyParams::default(), 2).unwrap();
        let g = RoutingGraph::build(&pts, 200.0, 3, 4.0, &m);
        // Floyd-Warshall on the same arc costs.
        let n = pts.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for u in 0..n {
            d[u][u] = 0.0;
            for &v in g.neighbors(u) {
                d[u][v] = g.hop_cost(u, v).unwrap().0;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        for root in 0..n {
            let to = g.tree(root, true, false);
            let from = g.tree(root, false, false);
            for u in 0..n {
                assert!((to.dist[u] - d[u][root]).abs() <= 1e-12 * d[u][root].max(1e-30));
                assert!((from.dist[u] - d[root][u]).abs() <= 1e-12 * d[root][u].max(1e-30));
                let p = to.path(u).unwrap();
                assert_eq!((p[0], *p.last().unwrap()), (u, root));
                let walked: f64 = p.windows(2).map(|w| g.hop_cost(w[0], w[1]).unwrap().0).sum();
                assert!((walked - to.dist[u]).abs() <= 1e-12 * walked.max(1e-30));
            }
        }
    }

    #[test]
    fn neighbor_cap_and_range() {
        let pts = line(10, 10.0);
        let m = HopModel::new(&EnergyParams::default(), 1).unwrap();
        let g = RoutingGraph::build(&pts, 25.0, 8, 2.0, &m);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.neighbors(5), &[3, 4, 6, 7]);
        let g = RoutingGraph::build(&pts, 1000.0, 1, 2.0, &m);
        assert_eq!(g.neighbors(0), &[1]);
        assert!(g.tree(0, false, false).reachable(9));
        let split = vec![Point::new(0.0, 0.0), Point::new(500.0, 0.0)];
        let g = RoutingGraph::build(&split, 100.0, 4, 2.0, &m);
        assert!(!g.tree(0, true, false).reachable(1));
        assert!(g.tree(0, true, false).path(1).is_none());
    }
}
