//! Flow admission by min-cost flow with fractional splitting.

use std::collections::VecDeque;

/// A directed capacitated graph with per-arc cost.
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    n: usize,
    // Arc 2i is forward, 2i+1 its residual twin.
    to: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

/// One path of an admitted flow and the demand it carries, bit/s.
#[derive(Debug, Clone, PartialEq)]
pub struct PathShare {
    pub nodes: Vec<usize>,
    pub rate: f64,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        Self { n, adj: vec![Vec::new(); n], ..Default::default() }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        let m = self.to.len();
        self.to.extend([to, from]);
        self.cap.extend([cap.max(0.0), 0.0]);
        self.cost.extend([cost, -cost]);
        self.adj[from].push(m);
        self.adj[to].push(m + 1);
    }

    /// Both directions of an undirected link, each with its own capacity.
    pub fn add_link(&mut self, a: usize, b: usize, cap: f64, cost: f64) {
        self.add_arc(a, b, cap, cost);
        self.add_arc(b, a, cap, cost);
    }

    fn from_of(&self, arc: usize) -> usize {
        self.to[arc ^ 1]
    }

    /// Shortest path in the residual graph (SPFA; residual costs may be negative).
    fn shortest(&self, s: usize, eps: f64) -> (Vec<f64>, Vec<Option<usize>>) {
        let mut dist = vec![f64::INFINITY; self.n];
        let mut pred = vec![None; self.n];
        let mut inq = vec![false; self.n];
        let mut q = VecDeque::new();
        dist[s] = 0.0;
        q.push_back(s);
        inq[s] = true;
        while let Some(u) = q.pop_front() {
            inq[u] = false;
            for &a in &self.adj[u] {
                if self.cap[a] <= eps {
                    continue;
                }
                let v = self.to[a];
                let nd = dist[u] + self.cost[a];
                if nd < dist[v] - 1e-15 * nd.abs().max(1.0) {
                    dist[v] = nd;
                    pred[v] = Some(a);
                    if !inq[v] {
                        inq[v] = true;
                        q.push_back(v);
                    }
                }
            }
        }
        (dist, pred)
    }
}

/// Routes `demand` from `source` to `sink` at minimum total cost, splitting
/// across paths where one path lacks capacity. Returns the path shares, or
/// `None` (blocked) when the max flow falls short of the demand.
pub fn admit_flow(net: &FlowNetwork, source: usize, sink: usize, demand: f64) -> Option<Vec<PathShare>> {
    if source >= net.n || sink >= net.n || !(demand > 0.0) {
        return None;
    }
    if source == sink {
        return Some(vec![PathShare { nodes: vec![source], rate: demand }]);
    }
    let eps = demand * 1e-9;
    let mut res = net.clone();
    let mut remaining = demand;
    while remaining > eps {
        let (dist, pred) = res.shortest(source, eps);
        if !dist[sink].is_finite() {
            return None;
        }
        let mut push = remaining;
        let mut v = sink;
        while let Some(a) = pred[v] {
            push = push.min(res.cap[a]);
            v = res.from_of(a);
        }
        let mut v = sink;
        while let Some(a) = pred[v] {
            res.cap[a] -= push;
            res.cap[a ^ 1] += push;
            v = res.from_of(a);
        }
        remaining -= push;
    }
    Some(decompose(net, &res, source, sink, demand, eps))
}

fn decompose(net: &FlowNetwork, res: &FlowNetwork, source: usize, sink: usize, demand: f64, eps: f64) -> Vec<PathShare> {
    // Net flow on each forward arc.
    let mut flow: Vec<f64> = (0..net.to.len())
        .map(|a| if a % 2 == 0 { (net.cap[a] - res.cap[a]).max(0.0) } else { 0.0 })
        .collect();
    // Cancel opposite flows on the two arcs of an undirected link.
    for u in 0..net.n {
        for &a in &net.adj[u] {
            if a % 2 != 0 {
                continue;
            }
            let v = net.to[a];
            for &b in &net.adj[v] {
                if b % 2 == 0 && net.to[b] == u && flow[a] > 0.0 && flow[b] > 0.0 {
                    let m = flow[a].min(flow[b]);
                    flow[a] -= m;
                    flow[b] -= m;
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut left = demand;
    while left > eps {
        let mut nodes = vec![source];
        let mut arcs = Vec::new();
        let mut seen = vec![false; net.n];
        seen[source] = true;
        let mut u = source;
        while u != sink {
            let next = net.adj[u].iter().copied().find(|&a| a % 2 == 0 && flow[a] > eps && !seen[net.to[a]]);
            let Some(a) = next else { break };
            u = net.to[a];
            seen[u] = true;
            nodes.push(u);
            arcs.push(a);
        }
        if u != sink {
            break;
        }
        let rate = arcs.iter().map(|&a| flow[a]).fold(left, f64::min);
        for &a in &arcs {
            flow[a] -= rate;
        }
        left -= rate;
        out.push(PathShare { nodes, rate });
    }
    out
}

/// Plain max-flow value (Edmonds-Karp), used to cross-check admission.
pub fn max_flow(net: &FlowNetwork, source: usize, sink: usize) -> f64 {
    let mut res = net.clone();
    let mut total = 0.0;
    loop {
        let mut pred: Vec<Option<usize>> = vec![None; res.n];
        let mut q = VecDeque::from([source]);
        let mut seen = vec![false; res.n];
        seen[source] = true;
        while let Some(u) = q.pop_front() {
            for &a in &res.adj[u] {
                let v = res.to[a];
                if !seen[v] && res.cap[a] > 1e-12 {
                    seen[v] = true;
                    pred[v] = Some(a);
                    q.push_back(v);
                }
            }
        }
        if !seen[sink] || source == sink {
            return total;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while let Some(a) = pred[v] {
            push = push.min(res.cap[a]);
            v = res.from_of(a);
        }
        let mut v = sink;
        while let Some(a) = pred[v] {
            res.cap[a] -= push;
            res.cap[a ^ 1] += push;
            v = res.from_of(a);
        }
        total += push;
    }
}
