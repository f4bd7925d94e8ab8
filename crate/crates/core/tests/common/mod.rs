//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls into the code it checks.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;

use mcca_core::negotiation::{
    AdjustmentState, Delta, LocalDriver, MessageKind, Negotiator, Phase, Proposal, ProtocolConfig,
    ProtocolMessage, ScriptedLoss, SessionRequest,
};
use mcca_core::channel_mac::LinkId;
use mcca_core::energy::EnergyParams;
use mcca_core::power_game::PowerGame;
use mcca_core::topology::{Graph, Point, TopologyGraphs};
use nalgebra::{DMatrix, Matrix2};
use rand::Rng;

// ---------------------------------------------------------------- energy

pub struct Ep {
    pub alpha: f64,
    pub n_f: f64,
    pub sigma2: f64,
    pub margin: f64,
    pub p_ct: f64,
    pub p_cr: f64,
    pub b: f64,
    pub n0: f64,
    pub p_b: f64,
    pub lambda: f64,
    pub h_t: f64,
    pub h_r: f64,
    pub g1: f64,
    pub j: u32,
}

pub fn reference() -> EnergyParams {
    EnergyParams {
        alpha: 0.4706,
        n_f: 10.0,
        sigma2: 1.0,
        link_margin: 10.0,
        p_ct: 0.0982,
        p_cr: 0.1125,
        bandwidth: 10e3,
        n0: 4e-21,
        p_b: 1e-3,
        lambda: 0.12,
        h_t: 1.0,
        h_r: 1.0,
        g1: 1.0,
        j_coop: 2,
    }
}

pub fn ep(p: &EnergyParams) -> Ep {
    Ep {
        alpha: p.alpha,
        n_f: p.n_f,
        sigma2: p.sigma2,
        margin: p.link_margin,
        p_ct: p.p_ct,
        p_cr: p.p_cr,
        b: p.bandwidth,
        n0: p.n0,
        p_b: p.p_b,
        lambda: p.lambda,
        h_t: p.h_t,
        h_r: p.h_r,
        g1: p.g1,
        j: p.j_coop,
    }
}

pub fn random_params<R: Rng>(r: &mut R) -> EnergyParams {
    EnergyParams {
        alpha: 0.1 + r.random::<f64>(),
        n_f: 1.0 + r.random::<f64>() * 20.0,
        sigma2: 0.1 + r.random::<f64>() * 3.0,
        link_margin: 1.0 + r.random::<f64>() * 1000.0,
        p_ct: 0.01 + r.random::<f64>() * 0.2,
        p_cr: 0.01 + r.random::<f64>() * 0.2,
        bandwidth: 1e3 + r.random::<f64>() * 1e5,
        n0: 1e-21 + r.random::<f64>() * 1e-20,
        p_b: 10f64.powf(-1.0 - 5.0 * r.random::<f64>()),
        lambda: 0.05 + r.random::<f64>() * 0.3,
        h_t: 0.5 + r.random::<f64>() * 2.0,
        h_r: 0.5 + r.random::<f64>() * 2.0,
        g1: 1e-18 + r.random::<f64>() * 1e-17,
        j_coop: r.random_range(1..=4),
    }
}

pub fn local_oracle(p: &Ep, e_max: f64) -> f64 {
    let j = p.j as f64;
    (p.p_ct + j * p.p_cr) / p.b
        + 2.0 * (1.0 + p.alpha) * p.n_f * p.sigma2 * (1.0 / p.p_b).ln() * p.g1 * e_max.powi(2) * p.margin
}

pub fn longhaul_oracle(p: &Ep, d: &[f64], k: &[f64]) -> f64 {
    let j = p.j as f64;
    let mut sum = 0.0;
    for (di, ki) in d.iter().zip(k) {
        sum += 16.0 * PI.powi(2) * di.powf(*ki) / (p.lambda.powi(2) * p.h_t * p.h_r);
    }
    (j * p.p_ct + p.p_cr) / p.b
        + (1.0 + p.alpha) * p.n0 * (1.0 / p.p_b).powf(1.0 / j) * sum * p.sigma2 * p.margin * p.n_f
}

pub fn head_power_oracle(p: &Ep, d: f64, k: f64) -> f64 {
    d.powf(k) * p.n0 * p.b * (1.0 / p.p_b).powf(1.0 / p.j as f64)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Total energy of `j` nodes at a common distance under the reference set.
pub fn total_oracle(p: &Ep, d: f64, k: f64, e_max: f64) -> f64 {
    let n = p.j as usize;
    local_oracle(p, e_max) + longhaul_oracle(p, &vec![d; n], &vec![k; n])
}

/// Bisection for the distance where J=2 becomes cheaper than J=1.
pub fn crossover(p1: &Ep, p2: &Ep, k: f64, e_max: f64, lo: f64, hi: f64) -> Option<f64> {
    let f = |d: f64| total_oracle(p2, d, k, e_max) - total_oracle(p1, d, k, e_max);
    let (mut a, mut b) = (lo, hi);
    if f(a) <= 0.0 || f(b) >= 0.0 {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

// ---------------------------------------------------------------- MST

/// Minimum spanning tree by enumerating every labelled tree through its
/// Prüfer sequence. Returns the weight and the normalized edge set.
pub fn mst_by_enumeration(pts: &[Point]) -> (f64, BTreeSet<(usize, usize)>) {
    let n = pts.len();
    let d = |a: usize, b: usize| ((pts[a].x - pts[b].x).powi(2) + (pts[a].y - pts[b].y).powi(2)).sqrt();
    if n == 2 {
        return (d(0, 1), BTreeSet::from([(0, 1)]));
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut best = (f64::INFINITY, BTreeSet::new());
    loop {
        let edges = prufer_decode(&seq, n);
        let w: f64 = edges.iter().map(|&(a, b)| d(a, b)).sum();
        if w < best.0 {
            best = (w, edges);
        }
        let mut i = 0;
        while i < len {
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
        if i == len {
            break;
        }
    }
    best
}

fn prufer_decode(seq: &[usize], n: usize) -> BTreeSet<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = BTreeSet::new();
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.insert((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.insert((rest[0], rest[1]));
    edges
}

pub fn normalized(edges: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
    edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect()
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, side: f64) -> Vec<Point> {
    (0..n).map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)).collect()
}

// ---------------------------------------------------------------- connectivity

pub fn components_union_find(pts: &[Point], r: f64) -> usize {
    let n = pts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            let d2 = (pts[i].x - pts[j].x).powi(2) + (pts[i].y - pts[j].y).powi(2);
            if d2 <= r * r {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// Nodes at BFS depth 1 or 2 from `src`.
pub fn two_hop_bfs(adj: &[Vec<usize>], src: usize) -> BTreeSet<usize> {
    let mut depth = vec![usize::MAX; adj.len()];
    depth[src] = 0;
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        if depth[u] == 2 {
            continue;
        }
        for &v in &adj[u] {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                q.push_back(v);
            }
        }
    }
    (0..adj.len()).filter(|&v| depth[v] == 1 || depth[v] == 2).collect()
}

// ---------------------------------------------------------------- power game

/// Random diagonally dominant game whose interior fixed point is known.
pub fn random_game<R: Rng>(rng: &mut R, n: usize) -> PowerGame {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j {
                let v = rng.random::<f64>() * 0.2;
                m[(i, j)] = v;
                off += v;
            }
        }
        m[(i, i)] = off + 0.5 + rng.random::<f64>() * 2.0;
    }
    let t: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
    let sigma2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 0.1).collect();
    let mu: Vec<f64> = (0..n).map(|_| 1.0 + rng.random::<f64>() * 4.0).collect();
    let q_max: Vec<f64> = (0..n).map(|_| 5.0 + rng.random::<f64>() * 20.0).collect();
    PowerGame::new(m, mu, t, sigma2, q_max).unwrap()
}

/// Solves `Σ_j M_ij q_j = M_ii μ_i/t_i − σ_i²` by Gaussian elimination with
/// partial pivoting.
pub fn linear_fixed_point(g: &PowerGame) -> Vec<f64> {
    let n = g.players();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| g.m[(i, j)]).collect();
            row.push(g.m[(i, i)] * g.mu[i] / g.t[i] - g.sigma2[i]);
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..=n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x
}

pub fn is_interior(g: &PowerGame, q: &[f64]) -> bool {
    q.iter().zip(&g.q_max).all(|(v, m)| *v > 1e-9 && *v < m - 1e-9)
}

// ---------------------------------------------------------------- capacity

pub fn random_channel<R: Rng>(rng: &mut R) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let mut g = || rng.random::<f64>() * 2.0 - 1.0;
    let m1 = DMatrix::from_fn(2, 2, |_, _| g());
    let m2 = DMatrix::from_fn(2, 2, |_, _| g());
    let beta = (g() + 1.0) / 2.0;
    (m1, m2, beta)
}

fn rot(t: f64) -> Matrix2<f64> {
    Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos())
}

/// `log2 det(I + A1 Q1 A1ᵀ + A2 Q2 A2ᵀ)` with the stacked channels written
/// out by hand.
pub fn coop_rate_oracle(m1: &DMatrix<f64>, m2: &DMatrix<f64>, beta: f64, q1: &Matrix2<f64>, q2: &Matrix2<f64>) -> f64 {
    let mut a1 = DMatrix::<f64>::zeros(4, 2);
    let mut a2 = DMatrix::<f64>::zeros(4, 2);
    for r in 0..2 {
        for c in 0..2 {
            a1[(r, c)] = m1[(r, c)];
            a1[(r + 2, c)] = beta * m2[(r, c)];
            a2[(r, c)] = beta * m1[(r, c)];
            a2[(r + 2, c)] = m2[(r, c)];
        }
    }
    let q1 = DMatrix::from_fn(2, 2, |r, c| q1[(r, c)]);
    let q2 = DMatrix::from_fn(2, 2, |r, c| q2[(r, c)]);
    let k = DMatrix::<f64>::identity(4, 4) + &a1 * q1 * a1.transpose() + &a2 * q2 * a2.transpose();
    k.determinant().log2()
}

/// Rate at parameters `(θ1, θ2, w1..w4)`: eigenvalues are the budget split
/// in proportion to the nonnegative weights.
fn rate_at(m1: &DMatrix<f64>, m2: &DMatrix<f64>, beta: f64, budget: f64, x: &[f64; 6]) -> f64 {
    let w: Vec<f64> = x[2..].iter().map(|v| v.max(0.0)).collect();
    let s: f64 = w.iter().sum();
    if s <= 0.0 {
        return 0.0;
    }
    let e: Vec<f64> = w.iter().map(|v| budget * v / s).collect();
    let (r1, r2) = (rot(x[0]), rot(x[1]));
    let q1 = r1 * Matrix2::new(e[0], 0.0, 0.0, e[1]) * r1.transpose();
    let q2 = r2 * Matrix2::new(e[2], 0.0, 0.0, e[3]) * r2.transpose();
    coop_rate_oracle(m1, m2, beta, &q1, &q2)
}

/// Grid search over rotations and budget splits refined by compass search
/// from the best few grid points.
pub fn capacity_oracle(m1: &DMatrix<f64>, m2: &DMatrix<f64>, beta: f64, budget: f64) -> f64 {
    if budget == 0.0 {
        return 0.0;
    }
    let f = |x: &[f64; 6]| rate_at(m1, m2, beta, budget, x);
    let mut pts: Vec<(f64, [f64; 6])> = Vec::new();
    let steps = 6;
    let na = 8;
    for a in 0..na {
        for b in 0..na {
            let (t1, t2) = (PI * a as f64 / na as f64, PI * b as f64 / na as f64);
            for i in 0..=steps {
                for j in 0..=steps - i {
                    for k in 0..=steps - i - j {
                        let l = steps - i - j - k;
                        let x = [t1, t2, i as f64, j as f64, k as f64, l as f64];
                        pts.push((f(&x), x));
                    }
                }
            }
        }
    }
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = f64::NEG_INFINITY;
    for (v0, x0) in pts.into_iter().take(6) {
        let (mut v, mut x) = (v0, x0);
        let mut step = 1.0;
        while step > 1e-9 {
            let mut improved = false;
            for d in 0..6 {
                for s in [1.0, -1.0] {
                    let mut y = x;
                    y[d] += s * step * if d < 2 { 0.5 } else { 1.0 };
                    if d >= 2 && y[d] < 0.0 {
                        y[d] = 0.0;
                    }
                    let fy = f(&y);
                    if fy > v {
                        v = fy;
                        x = y;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(v);
    }
    best.max(0.0)
}

// ---------------------------------------------------------------- negotiation

/// Fate of one logical message: which of its three copies are lost.
pub type Fate = [bool; 3];

/// Logical message slots of a 2-participator session, in a fixed order:
/// request, reply and notification for participators 1 and 2.
pub const SLOTS: [(MessageKind, usize); 6] = [
    (MessageKind::AdjustRequest, 1),
    (MessageKind::AdjustRequest, 2),
    (MessageKind::AdjustReply, 1),
    (MessageKind::AdjustReply, 2),
    (MessageKind::AdjustNotification, 1),
    (MessageKind::AdjustNotification, 2),
];

fn slot_of(msg: &ProtocolMessage) -> Option<usize> {
    let peer = if msg.kind == MessageKind::AdjustReply { msg.sender } else { msg.receiver };
    SLOTS.iter().position(|&(k, p)| k == msg.kind && p == peer)
}

/// Outcome the protocol must reach: commit exactly when every request, reply
/// and notification gets through and both participators agree.
pub fn expected_phase(fates: &[Fate; 6], agree: [bool; 2]) -> Phase {
    let through = |s: usize| fates[s].iter().any(|lost| !lost);
    let req = [through(0), through(1)];
    let rep = [through(2), through(3)];
    let not = [through(4), through(5)];
    let all_replies = req[0] && req[1] && rep[0] && rep[1];
    if all_replies && agree[0] && agree[1] && not[0] && not[1] {
        Phase::Committed
    } else {
        Phase::Aborted
    }
}

pub fn star(n: usize) -> TopologyGraphs {
    let mut t = TopologyGraphs::new(Graph::new(n));
    for leaf in 1..n {
        t.assign_link(0, leaf);
    }
    t
}

pub fn channel_proposal(links: &[(usize, usize)], to: u16) -> Proposal {
    Proposal {
        deltas: links.iter().map(|&(a, b)| Delta::Channel { link: LinkId::new(a, b), from: None, to }).collect(),
    }
}

/// Runs one 2-participator session on a 3-node star under scripted fates.
pub fn run_scripted(fates: &[Fate; 6], agree: [bool; 2]) -> (Phase, AdjustmentState, u64) {
    let topo = star(3);
    let neg = Negotiator::new(ProtocolConfig::default()).unwrap();
    let mut d = LocalDriver::new(neg, &topo);
    let mut st = AdjustmentState::default();
    let fates = *fates;
    let mut loss = ScriptedLoss(move |m: &ProtocolMessage, copy: u8| match slot_of(m) {
        Some(s) => fates[s][copy as usize],
        None => false,
    });
    let req = SessionRequest { initiator: 0, proposal: channel_proposal(&[(0, 1), (0, 2)], 3), attempt: 1 };
    let init = d.start(req, &mut loss, &mut st).unwrap();
    let mcca_core::negotiation::Initiation::Started(id) = init else { panic!("{init:?}") };
    let mut decide = |n: usize, _: &Proposal| agree[n - 1];
    d.run(&mut decide, &mut loss, &mut st, false).unwrap();
    let phase = d.negotiator.session(id).unwrap().phase;
    (phase, st, d.exclusiveness_violations)
}

/// Copy patterns that cover every position of the first surviving copy.
pub const PATTERNS: [Fate; 4] = [
    [false, false, false],
    [true, false, true],
    [true, true, false],
    [true, true, true],
];

/// Enumerates every combination of copy patterns and decisions and counts
/// the cases where the protocol disagrees with the oracle or breaks
/// atomicity. Returns `(cases, mismatches)`.
pub fn enumerate_fates() -> (usize, usize) {
    let mut cases = 0;
    let mut bad = 0;
    let total = PATTERNS.len().pow(6);
    for code in 0..total {
        let mut c = code;
        let mut fates = [[false; 3]; 6];
        for f in fates.iter_mut() {
            *f = PATTERNS[c % PATTERNS.len()];
            c /= PATTERNS.len();
        }
        for agree in [[true, true], [true, false], [false, true], [false, false]] {
            cases += 1;
            let (phase, st, excl) = run_scripted(&fates, agree);
            let want = expected_phase(&fates, agree);
            let atomic = match phase {
                Phase::Committed => st.channels.len() == 2,
                _ => st == AdjustmentState::default(),
            };
            if phase != want || !atomic || excl != 0 {
                bad += 1;
            }
        }
    }
    (cases, bad)
}
