//! Channel bookkeeping, two-hop contention, overload handling and the
//! multicast-RTS / prioritized-CTS exchange.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::topology::{two_hop_neighborhood, TopologyGraphs};

pub const DEFAULT_CHANNELS: u16 = 128;
pub const DEFAULT_RECEIVER_CAP: usize = 8;
pub const DEFAULT_OVERLOAD_FACTOR: f64 = 1.5;

/// Undirected link, stored with the smaller endpoint first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId(pub usize, pub usize);

impl LinkId {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            LinkId(a, b)
        } else {
            LinkId(b, a)
        }
    }

    pub fn touches(&self, n: usize) -> bool {
        self.0 == n || self.1 == n
    }

    pub fn other(&self, n: usize) -> usize {
        if self.0 == n {
            self.1
        } else {
            self.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelTable {
    pub channel_count: u16,
    assignment: BTreeMap<LinkId, u16>,
    by_channel: Vec<BTreeSet<LinkId>>,
    incident: BTreeMap<usize, BTreeSet<LinkId>>,
    /// Active flows per link.
    link_flows: BTreeMap<LinkId, u32>,
    /// Active flows per channel, summed over its links.
    load: Vec<u32>,
    /// Cached per-(node, channel) contention, see [`ChannelTable::refresh_contention`].
    contention: BTreeMap<(usize, u16), u32>,
}

impl ChannelTable {
    pub fn new(channel_count: u16) -> Self {
        Self {
            channel_count,
            by_channel: vec![BTreeSet::new(); channel_count as usize],
            load: vec![0; channel_count as usize],
            ..Default::default()
        }
    }

    fn check_channel(&self, c: u16) -> Result<()> {
        if c >= self.channel_count {
            return Err(Error::UnknownChannel(c));
        }
        Ok(())
    }

    pub fn channel_of(&self, link: LinkId) -> Option<u16> {
        self.assignment.get(&link).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<LinkId, u16> {
        &self.assignment
    }

    pub fn links_on(&self, c: u16) -> impl Iterator<Item = LinkId> + '_ {
        self.by_channel
            .get(c as usize)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    pub fn incident_links(&self, node: usize) -> impl Iterator<Item = LinkId> + '_ {
        self.incident
            .get(&node)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    /// Channels used by links incident to `node`, ascending.
    pub fn node_channels(&self, node: usize) -> BTreeSet<u16> {
        self.incident_links(node)
            .filter_map(|l| self.channel_of(l))
            .collect()
    }

    pub fn load(&self, c: u16) -> u32 {
        self.load.get(c as usize).copied().unwrap_or(0)
    }

    pub fn loads(&self) -> &[u32] {
        &self.load
    }

    pub fn link_flows(&self, link: LinkId) -> u32 {
        self.link_flows.get(&link).copied().unwrap_or(0)
    }

    /// Assigns (or moves) `link` to channel `c`.
    pub fn assign(&mut self, link: LinkId, c: u16) -> Result<()> {
        self.check_channel(c)?;
        let flows = self.link_flows(link);
        if let Some(old) = self.assignment.insert(link, c) {
            self.by_channel[old as usize].remove(&link);
            self.load[old as usize] -= flows;
        }
        self.by_channel[c as usize].insert(link);
        self.load[c as usize] += flows;
        self.incident.entry(link.0).or_default().insert(link);
        self.incident.entry(link.1).or_default().insert(link);
        Ok(())
    }

    pub fn unassign(&mut self, link: LinkId) {
        if let Some(old) = self.assignment.remove(&link) {
            self.by_channel[old as usize].remove(&link);
            self.load[old as usize] -= self.link_flows(link);
            for n in [link.0, link.1] {
                if let Some(s) = self.incident.get_mut(&n) {
                    s.remove(&link);
                    if s.is_empty() {
                        self.incident.remove(&n);
                    }
                }
            }
        }
    }

    pub fn add_flow(&mut self, link: LinkId) {
        *self.link_flows.entry(link).or_default() += 1;
        if let Some(c) = self.channel_of(link) {
            self.load[c as usize] += 1;
        }
    }

    pub fn remove_flow(&mut self, link: LinkId) {
        let Some(f) = self.link_flows.get_mut(&link) else { return };
        *f -= 1;
        if *f == 0 {
            self.link_flows.remove(&link);
        }
        if let Some(c) = self.channel_of(link) {
            self.load[c as usize] -= 1;
        }
    }

    /// Recounts loads from the assignment; true when the cached counts agree.
    pub fn check_invariants(&self) -> bool {
        let mut load = vec![0u32; self.channel_count as usize];
        for (l, &c) in &self.assignment {
            if c >= self.channel_count {
                return false;
            }
            load[c as usize] += self.link_flows(*l);
        }
        load == self.load
    }

    /// Per-channel link counts in the two-hop range of `node` (inclusive).
    pub fn contention_profile(&self, topo: &TopologyGraphs, node: usize) -> Result<Vec<u32>> {
        let mut area = two_hop_neighborhood(topo, node)?;
        area.insert(node);
        let mut out = vec![0u32; self.channel_count as usize];
        for &n in &area {
            for l in self.incident_links(n) {
                // Count each link once, at its first endpoint inside the area.
                let first = if area.contains(&l.0) { l.0 } else { l.1 };
                if first == n {
                    if let Some(c) = self.channel_of(l) {
                        out[c as usize] += 1;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Entry `c` of [`ChannelTable::contention_profile`] without building the
    /// whole profile.
    pub fn contention_on(&self, topo: &TopologyGraphs, node: usize, c: u16) -> u32 {
        let g2 = &topo.g2;
        let near = |x: usize| {
            x == node
                || (node < g2.node_count()
                    && (g2.has_edge(node, x) || g2.neighbors(node).any(|a| a != x && g2.has_edge(a, x))))
        };
        self.links_on(c).filter(|l| near(l.0) || near(l.1)).count() as u32
    }

    /// Stores the contention of every channel `node` uses, for each node in
    /// `nodes`. Other cached entries for those nodes are dropped.
    pub fn refresh_contention(&mut self, topo: &TopologyGraphs, nodes: &[usize]) -> Result<()> {
        for &n in nodes {
            let profile = self.contention_profile(topo, n)?;
            let stale: Vec<_> = self.contention.range((n, 0)..=(n, u16::MAX)).map(|(k, _)| *k).collect();
            for k in stale {
                self.contention.remove(&k);
            }
            for c in self.node_channels(n) {
                self.contention.insert((n, c), profile[c as usize]);
            }
        }
        Ok(())
    }

    pub fn cached_contention(&self, node: usize, c: u16) -> u32 {
        self.contention.get(&(node, c)).copied().unwrap_or(0)
    }

    /// `ceil(factor × mean cached contention)` over the node's channels.
    pub fn overload_threshold(&self, node: usize, factor: f64) -> u32 {
        let chans = self.node_channels(node);
        if chans.is_empty() {
            return u32::MAX;
        }
        let total: u32 = chans.iter().map(|&c| self.cached_contention(node, c)).sum();
        (factor * f64::from(total) / chans.len() as f64).ceil().max(1.0) as u32
    }

    /// Least-contended channel in the two-hop range of `node`; lowest index on ties.
    pub fn least_contended(&self, topo: &TopologyGraphs, node: usize) -> Result<u16> {
        let profile = self.contention_profile(topo, node)?;
        Ok(argmin_u32(&profile) as u16)
    }

    /// The `k` least-contended channels of `node`, ascending by contention
    /// then index.
    pub fn least_contended_k(&self, topo: &TopologyGraphs, node: usize, k: usize) -> Result<Vec<u16>> {
        let profile = self.contention_profile(topo, node)?;
        let mut idx: Vec<u16> = (0..self.channel_count).collect();
        idx.sort_by_key(|&c| (profile[c as usize], c));
        idx.truncate(k);
        Ok(idx)
    }
}

fn argmin_u32(v: &[u32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Number of links on `c` with an endpoint in the two-hop range of `node`.
pub fn contention_count(table: &ChannelTable, topo: &TopologyGraphs, node: usize, c: u16) -> Result<u32> {
    table.check_channel(c)?;
    Ok(table.contention_profile(topo, node)?[c as usize])
}

/// The node's most contended channel if it exceeds `threshold`; ties go to the
/// lowest index. Reads only the cached contention.
pub fn detect_overload(table: &ChannelTable, node: usize, threshold: u32) -> Option<u16> {
    let mut best: Option<(u16, u32)> = None;
    for c in table.node_channels(node) {
        let k = table.cached_contention(node, c);
        if k > threshold && best.is_none_or(|(_, b)| k > b) {
            best = Some((c, k));
        }
    }
    best.map(|(c, _)| c)
}

/// Moving `link` off the overloaded channel onto `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub link: LinkId,
    pub from: u16,
    pub to: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Highest cooperative rate.
    #[default]
    MaxRate,
    /// Lowest load; the branch taken when the node's load is under the
    /// receiver threshold.
    MinLoad,
}

/// Candidates for `node`: each of its links on `overloaded` paired with each
/// of the `max_targets` least-contended other channels.
pub fn enumerate_candidates(
    table: &ChannelTable,
    topo: &TopologyGraphs,
    node: usize,
    overloaded: u16,
    max_targets: usize,
) -> Result<Vec<Candidate>> {
    let targets: Vec<u16> = table
        .least_contended_k(topo, node, max_targets + 1)?
        .into_iter()
        .filter(|&c| c != overloaded)
        .take(max_targets)
        .collect();
    let mut out = Vec::new();
    for link in table.incident_links(node) {
        if table.channel_of(link) == Some(overloaded) {
            out.extend(targets.iter().map(|&to| Candidate { link, from: overloaded, to }));
        }
    }
    Ok(out)
}

/// A candidate is feasible when it moves a link off `overloaded` that counts
/// toward `node`'s contention there, and the target stays strictly less
/// contended than the source channel after the move.
pub fn is_feasible(
    profile: &[u32],
    table: &ChannelTable,
    overloaded: u16,
    cand: &Candidate,
) -> bool {
    cand.from == overloaded
        && cand.to != overloaded
        && (cand.to as usize) < profile.len()
        && table.channel_of(cand.link) == Some(overloaded)
        && profile[cand.to as usize] + 1 < profile[overloaded as usize]
}

/// Index into `candidates` of the chosen adjustment, or `None` when none is
/// feasible. `rates` and `loads` are parallel to `candidates`; ties go to the
/// lowest index.
pub fn select_candidate(
    table: &ChannelTable,
    topo: &TopologyGraphs,
    node: usize,
    overloaded: u16,
    candidates: &[Candidate],
    rates: &[f64],
    loads: &[f64],
    rule: SelectionRule,
) -> Result<Option<usize>> {
    if rates.len() != candidates.len() || loads.len() != candidates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} candidates, {} rates, {} loads",
            candidates.len(),
            rates.len(),
            loads.len()
        )));
    }
    let profile = table.contention_profile(topo, node)?;
    let mut best: Option<usize> = None;
    for (i, cand) in candidates.iter().enumerate() {
        if !is_feasible(&profile, table, overloaded, cand) {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = match rule {
                    SelectionRule::MaxRate => rates[i] > rates[b],
                    SelectionRule::MinLoad => loads[i] < loads[b],
                };
                Some(if better { i } else { b })
            }
        };
    }
    Ok(best)
}

/// Gives `node`'s link to `peer` the channel `peer` already uses most (lowest
/// index on ties), falling back to the least-contended channel around `node`.
/// The link is recorded in the channel-assignment graph.
pub fn assign_from_neighbor(
    table: &mut ChannelTable,
    topo: &mut TopologyGraphs,
    node: usize,
    peer: Option<usize>,
) -> Result<u16> {
    let inherited = peer.and_then(|p| {
        let link = LinkId::new(node, p);
        if let Some(c) = table.channel_of(link) {
            return Some(c);
        }
        let mut counts: BTreeMap<u16, u32> = BTreeMap::new();
        for l in table.incident_links(p) {
            if let Some(c) = table.channel_of(l) {
                *counts.entry(c).or_default() += 1;
            }
        }
        let max = counts.values().copied().max()?;
        counts.into_iter().find(|&(_, n)| n == max).map(|(c, _)| c)
    });
    let c = match inherited {
        Some(c) => c,
        None => table.least_contended(topo, node)?,
    };
    if let Some(p) = peer {
        table.assign(LinkId::new(node, p), c)?;
        topo.assign_link(node, p);
    }
    Ok(c)
}

/// Multicast request-to-send with an ordered candidate list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtsFrame {
    pub sender: usize,
    /// Highest priority first.
    pub receiver_list: Vec<usize>,
    /// Candidate count advertised in the frame.
    pub n_s: usize,
    pub payload: u64,
}

impl RtsFrame {
    pub fn new(sender: usize, receiver_list: Vec<usize>, payload: u64) -> Result<Self> {
        let f = Self { sender, n_s: receiver_list.len(), receiver_list, payload };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.receiver_list.is_empty() {
            return Err(invalid("receiver_list", "must not be empty"));
        }
        let uniq: BTreeSet<_> = self.receiver_list.iter().collect();
        if uniq.len() != self.receiver_list.len() {
            return Err(invalid("receiver_list", "duplicate receivers"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MacOutcome {
    /// Receiver that answered CTS first, with its position in the list.
    Winner { receiver: usize, rank: usize },
    Failure,
}

/// Resolves one RTS: candidates are tried in list order and the first whose
/// quality reaches `quality_floor` and whose success draw passes replies CTS;
/// everyone below it yields.
pub fn mac_exchange<R: Rng + ?Sized>(
    rts: &RtsFrame,
    channel_quality: &[f64],
    quality_floor: f64,
    success_prob: f64,
    rng: &mut R,
) -> Result<MacOutcome> {
    rts.validate()?;
    if channel_quality.len() != rts.receiver_list.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} qualities for {} receivers",
            channel_quality.len(),
            rts.receiver_list.len()
        )));
    }
    if !(0.0..=1.0).contains(&success_prob) {
        return Err(invalid("success_prob", format!("{success_prob} is not in [0, 1]")));
    }
    for (rank, (&r, &q)) in rts.receiver_list.iter().zip(channel_quality).enumerate() {
        if q >= quality_floor && rng.random::<f64>() < success_prob {
            return Ok(MacOutcome::Winner { receiver: r, rank });
        }
    }
    Ok(MacOutcome::Failure)
}

/// Reorders a receiver list after a failed exchange. Each entry gets the key
/// `W(i) + Prand`, where `W(i)` is its normalized load weight and `Prand` is
/// uniform in `[0, 1)` scaled by the list length; lower keys go first.
pub fn recover_priority<R: Rng + ?Sized>(list: &[usize], weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = list.len().max(1) as f64;
    let total: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut keyed: Vec<(f64, usize, usize)> = list
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let w = weights.get(i).copied().unwrap_or(0.0) / total;
            (w + rng.random::<f64>() / n, i, r)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::topology::Graph;

    fn line(n: usize) -> TopologyGraphs {
        let mut t = TopologyGraphs::new(Graph::new(n));
        for i in 1..n {
            t.assign_link(i - 1, i);
        }
        t
    }

    #[test]
    fn contention_basics() {
        let topo = line(6);
        let mut t = ChannelTable::new(8);
        assert_eq!(contention_count(&t, &topo, 2, 3).unwrap(), 0);
        t.assign(LinkId::new(2, 3), 3).unwrap();
        assert_eq!(contention_count(&t, &topo, 2, 3).unwrap(), 1);
        t.assign(LinkId::new(4, 5), 3).unwrap();
        // 5 is three hops from 2 but 4 is two hops away.
        assert_eq!(contention_count(&t, &topo, 2, 3).unwrap(), 2);
        assert_eq!(contention_count(&t, &topo, 0, 3).unwrap(), 1);
        assert!(matches!(contention_count(&t, &topo, 2, 8), Err(Error::UnknownChannel(8))));
        assert!(t.assign(LinkId::new(0, 1), 9).is_err());
    }

    #[test]
    fn load_tracks_assignment() {
        let mut t = ChannelTable::new(4);
        let l = LinkId::new(1, 0);
        t.add_flow(l);
        t.add_flow(l);
        t.assign(l, 2).unwrap();
        assert_eq!(t.load(2), 2);
        t.assign(l, 1).unwrap();
        assert_eq!((t.load(1), t.load(2)), (2, 0));
        t.remove_flow(l);
        assert_eq!(t.load(1), 1);
        assert!(t.check_invariants());
        t.unassign(l);
        assert_eq!(t.load(1), 0);
        assert!(t.check_invariants());
    }

    #[test]
    fn overload_detection() {
        let mut topo = TopologyGraphs::new(Graph::new(8));
        for leaf in 1..8 {
            topo.assign_link(0, leaf);
        }
        let mut t = ChannelTable::new(4);
        assert_eq!(detect_overload(&t, 0, 1), None);
        for leaf in 1..4 {
            t.assign(LinkId::new(0, leaf), 2).unwrap();
        }
        for leaf in 4..7 {
            t.assign(LinkId::new(0, leaf), 1).unwrap();
        }
        t.assign(LinkId::new(0, 7), 3).unwrap();
        t.refresh_contention(&topo, &[0]).unwrap();
        assert_eq!(detect_overload(&t, 0, 2), Some(1));
        assert_eq!(detect_overload(&t, 0, 3), None);
        assert_eq!(t.overload_threshold(0, 1.5), 4);
    }

    #[test]
    fn candidate_selection() {
        let mut topo = TopologyGraphs::new(Graph::new(6));
        for leaf in 1..6 {
            topo.assign_link(0, leaf);
        }
        let mut t = ChannelTable::new(4);
        for leaf in 1..5 {
            t.assign(LinkId::new(0, leaf), 0).unwrap();
        }
        t.assign(LinkId::new(0, 5), 1).unwrap();
        let cands = enumerate_candidates(&t, &topo, 0, 0, 4).unwrap();
        assert_eq!(cands.len(), 4 * 3);
        let n = cands.len();
        let rates: Vec<f64> = (0..n).map(|i| (i * 7 % 5) as f64).collect();
        let loads = vec![0.0; n];
        let pick = select_candidate(&t, &topo, 0, 0, &cands, &rates, &loads, SelectionRule::MaxRate)
            .unwrap()
            .unwrap();
        assert_eq!(rates[pick], 4.0);
        let none = select_candidate(&t, &topo, 0, 0, &[], &[], &[], SelectionRule::MaxRate).unwrap();
        assert_eq!(none, None);
        // Balanced table: no move strictly improves.
        let mut even = ChannelTable::new(2);
        even.assign(LinkId::new(0, 1), 0).unwrap();
        even.assign(LinkId::new(0, 2), 1).unwrap();
        let c = [Candidate { link: LinkId::new(0, 1), from: 0, to: 1 }];
        assert_eq!(
            select_candidate(&even, &topo, 0, 0, &c, &[1.0], &[0.0], SelectionRule::MaxRate).unwrap(),
            None
        );
    }

    #[test]
    fn neighbor_assignment() {
        let mut topo = line(4);
        let mut t = ChannelTable::new(16);
        t.assign(LinkId::new(2, 3), 7).unwrap();
        assert_eq!(assign_from_neighbor(&mut t, &mut topo, 1, Some(2)).unwrap(), 7);
        assert_eq!(t.channel_of(LinkId::new(1, 2)), Some(7));
        let fresh = assign_from_neighbor(&mut t, &mut topo, 0, None).unwrap();
        assert_eq!(fresh, 0);
        assert!(topo.hierarchy_holds());
    }

    #[test]
    fn mac_priority() {
        let rts = RtsFrame::new(0, vec![5, 6, 7], 1).unwrap();
        let mut r = rng::stream(1, 0);
        for _ in 0..100 {
            let out = mac_exchange(&rts, &[1.0; 3], 0.5, 1.0, &mut r).unwrap();
            assert_eq!(out, MacOutcome::Winner { receiver: 5, rank: 0 });
        }
        let out = mac_exchange(&rts, &[0.1; 3], 0.5, 1.0, &mut r).unwrap();
        assert_eq!(out, MacOutcome::Failure);
        let out = mac_exchange(&rts, &[0.1, 0.9, 0.9], 0.5, 1.0, &mut r).unwrap();
        assert_eq!(out, MacOutcome::Winner { receiver: 6, rank: 1 });
        assert!(RtsFrame::new(0, vec![], 0).is_err());
        assert!(RtsFrame::new(0, vec![1, 1], 0).is_err());
    }

    #[test]
    fn priority_recovery_is_a_permutation() {
        let mut r = rng::stream(3, 0);
        let mut out = recover_priority(&[4, 9, 2], &[0.5, 0.1, 0.4], &mut r);
        out.sort();
        assert_eq!(out, vec![2, 4, 9]);
    }
}
