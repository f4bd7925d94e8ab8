//! Adjustment negotiation: preparation broadcast, request, reply and
//! notification phases with timers, triple-sent control packets, per-area
//! exclusiveness and route-change tunneling.
//!
//! The [`Negotiator`] is a pure state machine. Every handler returns the
//! deliveries, timers and retries it wants scheduled; the caller owns the
//! clock. [`LocalDriver`] is a minimal event loop for running sessions on
//! their own.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel_mac::LinkId;
use crate::error::{invalid, Result};
use crate::topology::{two_hop_neighborhood, TopologyGraphs};

pub type SessionId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Prepared,
    Requested,
    Replied,
    Notifying,
    Committed,
    Aborted,
}

impl Phase {
    pub fn is_active(&self) -> bool {
        matches!(
            self,
            Phase::Prepared | Phase::Requested | Phase::Replied | Phase::Notifying
        )
    }

    pub fn is_final(&self) -> bool {
        matches!(self, Phase::Committed | Phase::Aborted)
    }

    /// Allowed single-step transitions.
    pub fn can_move_to(&self, next: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, next),
            (Idle, Prepared)
                | (Prepared, Requested)
                | (Prepared, Committed)
                | (Requested, Replied)
                | (Requested, Aborted)
                | (Replied, Notifying)
                | (Notifying, Committed)
                | (Notifying, Aborted)
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Prepared => "prepared",
            Phase::Requested => "requested",
            Phase::Replied => "replied",
            Phase::Notifying => "notifying",
            Phase::Committed => "committed",
            Phase::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    PrepBroadcast,
    AdjustRequest,
    AdjustReply,
    AdjustNotification,
    AdjustInfoBroadcast,
    RouteUpdate,
    RouteAccept,
}

impl MessageKind {
    /// Request, reply and notification are sent three times back to back.
    pub fn triple_sent(&self) -> bool {
        matches!(
            self,
            MessageKind::AdjustRequest | MessageKind::AdjustReply | MessageKind::AdjustNotification
        )
    }

    pub fn copies(&self) -> u8 {
        if self.triple_sent() {
            3
        } else {
            1
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::PrepBroadcast => "prep_broadcast",
            MessageKind::AdjustRequest => "adjust_request",
            MessageKind::AdjustReply => "adjust_reply",
            MessageKind::AdjustNotification => "adjust_notification",
            MessageKind::AdjustInfoBroadcast => "adjust_info_broadcast",
            MessageKind::RouteUpdate => "route_update",
            MessageKind::RouteAccept => "route_accept",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One change an adjustment makes at a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Delta {
    Channel { link: LinkId, from: Option<u16>, to: u16 },
    Power { node: usize, from: f64, to: f64 },
    Route { node: usize, flow: usize, from: Vec<usize>, to: Vec<usize> },
}

impl Delta {
    fn nodes(&self) -> Vec<usize> {
        match self {
            Delta::Channel { link, .. } => vec![link.0, link.1],
            Delta::Power { node, .. } | Delta::Route { node, .. } => vec![*node],
        }
    }
}

/// The adjustment information of every affected node.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Proposal {
    pub deltas: Vec<Delta>,
}

impl Proposal {
    pub fn affected_nodes(&self) -> BTreeSet<usize> {
        self.deltas.iter().flat_map(Delta::nodes).collect()
    }
}

/// Receiver of committed adjustments. `apply` must install the whole
/// proposal; it is called exactly once per committed session.
pub trait AdjustmentTarget {
    fn apply(&mut self, proposal: &Proposal);
}

/// Plain record of channels, powers and routes, usable as a target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdjustmentState {
    pub channels: BTreeMap<LinkId, u16>,
    pub powers: BTreeMap<usize, f64>,
    pub routes: BTreeMap<usize, Vec<usize>>,
}

impl AdjustmentTarget for AdjustmentState {
    fn apply(&mut self, proposal: &Proposal) {
        for d in &proposal.deltas {
            match d {
                Delta::Channel { link, to, .. } => {
                    self.channels.insert(*link, *to);
                }
                Delta::Power { node, to, .. } => {
                    self.powers.insert(*node, *to);
                }
                Delta::Route { flow, to, .. } => {
                    self.routes.insert(*flow, to.clone());
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Empty,
    Proposal(Proposal),
    Decision(bool),
    Flow(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub kind: MessageKind,
    pub session_id: SessionId,
    pub sender: usize,
    pub receiver: usize,
    pub payload: Payload,
}

/// Decides whether a physical copy of a message is lost.
pub trait LossModel {
    fn lost(&mut self, msg: &ProtocolMessage, copy: u8) -> bool;
}

/// No message is ever lost.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoLoss;

impl LossModel for NoLoss {
    fn lost(&mut self, _: &ProtocolMessage, _: u8) -> bool {
        false
    }
}

/// Independent loss of every physical copy with probability `p`.
#[derive(Debug, Clone)]
pub struct BernoulliLoss {
    pub p: f64,
    rng: ChaCha8Rng,
}

impl BernoulliLoss {
    pub fn new(p: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("loss_p", format!("{p} is not in [0, 1]")));
        }
        Ok(Self { p, rng })
    }
}

impl LossModel for BernoulliLoss {
    fn lost(&mut self, _: &ProtocolMessage, _: u8) -> bool {
        self.rng.random::<f64>() < self.p
    }
}

/// Loss decided by a caller-supplied rule, for enumerating message fates.
pub struct ScriptedLoss<F: FnMut(&ProtocolMessage, u8) -> bool>(pub F);

impl<F: FnMut(&ProtocolMessage, u8) -> bool> LossModel for ScriptedLoss<F> {
    fn lost(&mut self, msg: &ProtocolMessage, copy: u8) -> bool {
        (self.0)(msg, copy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub copies_sent: u8,
    pub copies_survived: u8,
    /// Index of the first surviving copy.
    pub first_copy: Option<u8>,
}

impl Delivery {
    pub fn delivered(&self) -> bool {
        self.first_copy.is_some()
    }
}

/// Transmits a message three times, each copy lost independently with
/// probability `link_loss_p`; logical delivery needs one surviving copy.
pub fn send_reliable<R: Rng + ?Sized>(link_loss_p: f64, rng: &mut R) -> Result<Delivery> {
    if !(0.0..=1.0).contains(&link_loss_p) {
        return Err(invalid("link_loss_p", format!("{link_loss_p} is not in [0, 1]")));
    }
    let mut d = Delivery { copies_sent: 3, copies_survived: 0, first_copy: None };
    for copy in 0..3 {
        if rng.random::<f64>() >= link_loss_p {
            d.copies_survived += 1;
            d.first_copy.get_or_insert(copy);
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Propagation plus processing delay of one copy over one hop, s.
    pub base_delay: f64,
    pub reply_timer_factor: f64,
    pub notify_timer_factor: f64,
    /// Total attempts per adjustment, including the first.
    pub max_attempts: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            base_delay: 0.01,
            reply_timer_factor: 3.0,
            notify_timer_factor: 1.0,
            max_attempts: 3,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_delay > 0.0 && self.base_delay.is_finite()) {
            return Err(invalid("base_delay", format!("{} must be > 0", self.base_delay)));
        }
        // The notification timer must cover the last copy's arrival.
        if !(self.notify_timer_factor >= 1.0) {
            return Err(invalid("notify_timer_factor", "must be >= 1"));
        }
        if !(self.reply_timer_factor >= 2.0) {
            return Err(invalid("reply_timer_factor", "must be >= 2"));
        }
        if self.max_attempts == 0 {
            return Err(invalid("max_attempts", "must be >= 1"));
        }
        Ok(())
    }

    /// Spacing between the copies of a triple-sent packet.
    pub fn copy_gap(&self) -> f64 {
        self.base_delay / 4.0
    }

    /// Arrival time of the last copy after the first is sent.
    pub fn max_one_hop_delay(&self) -> f64 {
        self.base_delay + 2.0 * self.copy_gap()
    }

    pub fn reply_timeout(&self) -> f64 {
        self.reply_timer_factor * self.max_one_hop_delay()
    }

    pub fn notify_timeout(&self) -> f64 {
        self.notify_timer_factor * self.max_one_hop_delay()
    }

    /// Wait before attempt `attempt + 1` after attempt `attempt` aborted.
    pub fn backoff(&self, attempt: u32) -> f64 {
        self.reply_timeout() * f64::from(1u32 << (attempt.saturating_sub(1)).min(16))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimerKind {
    Reply,
    Notify,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationSession {
    pub session_id: SessionId,
    pub initiator: usize,
    pub participators: BTreeSet<usize>,
    pub onlookers: BTreeSet<usize>,
    pub phase: Phase,
    pub reply_timer: Option<f64>,
    pub notify_timer: Option<f64>,
    pub proposal: Proposal,
    pub replies: BTreeMap<usize, bool>,
    /// Participators that logically received the request.
    pub requested: BTreeSet<usize>,
    /// Participators that logically received the notification.
    pub notified: BTreeSet<usize>,
    pub attempt: u32,
}

impl NegotiationSession {
    /// Every node whose interference area the session locks.
    pub fn area(&self) -> BTreeSet<usize> {
        let mut a = self.participators.clone();
        a.insert(self.initiator);
        a.extend(self.onlookers.iter().copied());
        a
    }
}

/// A request to (re)start an adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRequest {
    pub initiator: usize,
    pub proposal: Proposal,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scheduled {
    Deliver { at: f64, msg: ProtocolMessage, copy: u8 },
    Timer { at: f64, session: SessionId, timer: TimerKind },
    Retry { at: f64, request: SessionRequest },
}

impl Scheduled {
    pub fn at(&self) -> f64 {
        match self {
            Scheduled::Deliver { at, .. } | Scheduled::Timer { at, .. } | Scheduled::Retry { at, .. } => *at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initiation {
    /// The initiator's area overlaps an active session.
    Refused,
    Started(SessionId),
    /// No participators: applied on the spot.
    Committed(SessionId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub time: f64,
    pub session: SessionId,
    pub node: usize,
    pub event: String,
    pub before: Phase,
    pub after: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProtocolStats {
    pub started: u64,
    pub refused: u64,
    pub committed: u64,
    pub aborted: u64,
    pub physical_messages: u64,
    pub logical_deliveries: u64,
    pub duplicates: u64,
}

/// Coordinator for all negotiation sessions of one network.
#[derive(Debug, Clone, Default)]
pub struct Negotiator {
    pub cfg: ProtocolConfig,
    sessions: BTreeMap<SessionId, NegotiationSession>,
    /// Node → active session whose area contains it.
    locks: BTreeMap<usize, SessionId>,
    /// Logical receipts: (receiver, session, kind, sender).
    seen: BTreeSet<(usize, SessionId, MessageKind, usize)>,
    next_id: SessionId,
    trace_enabled: bool,
    trace: Vec<TraceEntry>,
    pub stats: ProtocolStats,
}

impl Negotiator {
    pub fn new(cfg: ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, ..Default::default() })
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace_enabled = on;
        self
    }

    pub fn session(&self, id: SessionId) -> Option<&NegotiationSession> {
        self.sessions.get(&id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &NegotiationSession> {
        self.sessions.values()
    }

    pub fn active_sessions(&self) -> impl Iterator<Item = &NegotiationSession> {
        self.sessions.values().filter(|s| s.phase.is_active())
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// Drops finished sessions and their receipts.
    pub fn prune(&mut self) {
        let done: BTreeSet<SessionId> = self
            .sessions
            .iter()
            .filter(|(_, s)| s.phase.is_final())
            .map(|(&id, _)| id)
            .collect();
        self.sessions.retain(|id, _| !done.contains(id));
        self.seen.retain(|(_, s, _, _)| !done.contains(s));
    }

    pub fn is_locked(&self, node: usize) -> bool {
        self.locks.contains_key(&node)
    }

    /// True when no two active sessions share a node of their areas.
    pub fn check_exclusiveness(&self) -> bool {
        let mut owner: BTreeMap<usize, SessionId> = BTreeMap::new();
        for s in self.active_sessions() {
            for n in s.area() {
                if owner.insert(n, s.session_id).is_some() {
                    return false;
                }
            }
        }
        true
    }

    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "sim_time,session_id,node,event,phase_before,phase_after")?;
        for e in &self.trace {
            writeln!(
                w,
                "{:.6},{},{},{},{},{}",
                e.time,
                e.session,
                e.node,
                e.event,
                e.before.as_str(),
                e.after.as_str()
            )?;
        }
        Ok(())
    }

    fn log(&mut self, time: f64, session: SessionId, node: usize, event: impl Into<String>, before: Phase, after: Phase) {
        if self.trace_enabled {
            self.trace.push(TraceEntry { time, session, node, event: event.into(), before, after });
        }
    }

    fn set_phase(&mut self, now: f64, id: SessionId, node: usize, event: &str, next: Phase) {
        let s = self.sessions.get_mut(&id).expect("session exists");
        let before = s.phase;
        assert!(
            before.can_move_to(next),
            "illegal transition {} -> {}",
            before.as_str(),
            next.as_str()
        );
        s.phase = next;
        if next.is_final() {
            for n in s.area() {
                if self.locks.get(&n) == Some(&id) {
                    self.locks.remove(&n);
                }
            }
        }
        self.log(now, id, node, event, before, next);
    }

    /// Physically transmits `msg`; returns a delivery per surviving copy.
    fn transmit(&mut self, now: f64, msg: ProtocolMessage, loss: &mut dyn LossModel) -> Vec<Scheduled> {
        let mut out = Vec::new();
        for copy in 0..msg.kind.copies() {
            self.stats.physical_messages += 1;
            if !loss.lost(&msg, copy) {
                let at = now + (self.cfg.base_delay + f64::from(copy) * self.cfg.copy_gap());
                out.push(Scheduled::Deliver { at, msg: msg.clone(), copy });
            }
        }
        out
    }

    /// Starts an adjustment: locks the area, broadcasts the preparation
    /// packet, sends the request and arms the reply timer.
    pub fn initiate(
        &mut self,
        now: f64,
        request: SessionRequest,
        topo: &TopologyGraphs,
        loss: &mut dyn LossModel,
        target: &mut dyn AdjustmentTarget,
    ) -> Result<(Initiation, Vec<Scheduled>)> {
        let SessionRequest { initiator, proposal, attempt } = request;
        let mut participators = proposal.affected_nodes();
        participators.remove(&initiator);
        let mut onlookers = BTreeSet::new();
        for &n in participators.iter().chain(std::iter::once(&initiator)) {
            onlookers.extend(two_hop_neighborhood(topo, n)?);
        }
        onlookers.remove(&initiator);
        for p in &participators {
            onlookers.remove(p);
        }

        let id = self.next_id;
        let session = NegotiationSession {
            session_id: id,
            initiator,
            participators,
            onlookers,
            phase: Phase::Idle,
            reply_timer: None,
            notify_timer: None,
            proposal,
            replies: BTreeMap::new(),
            requested: BTreeSet::new(),
            notified: BTreeSet::new(),
            attempt,
        };
        let area = session.area();
        if area.iter().any(|n| self.locks.contains_key(n)) {
            self.stats.refused += 1;
            self.log(now, id, initiator, "refused", Phase::Idle, Phase::Idle);
            return Ok((Initiation::Refused, Vec::new()));
        }
        self.next_id += 1;
        self.stats.started += 1;
        for &n in &area {
            self.locks.insert(n, id);
        }
        let participators = session.participators.clone();
        let onlookers = session.onlookers.clone();
        let proposal = session.proposal.clone();
        self.sessions.insert(id, session);
        self.set_phase(now, id, initiator, "prep_broadcast", Phase::Prepared);

        if participators.is_empty() {
            target.apply(&proposal);
            self.stats.committed += 1;
            self.set_phase(now, id, initiator, "local_commit", Phase::Committed);
            return Ok((Initiation::Committed(id), Vec::new()));
        }

        let mut out = Vec::new();
        for &r in participators.iter().chain(onlookers.iter()) {
            let msg = ProtocolMessage {
                kind: MessageKind::PrepBroadcast,
                session_id: id,
                sender: initiator,
                receiver: r,
                payload: Payload::Empty,
            };
            out.extend(self.transmit(now, msg, loss));
        }
        // Requests go out after the preparation broadcast has had time to land.
        let t_req = now + self.cfg.base_delay;
        for &r in &participators {
            let msg = ProtocolMessage {
                kind: MessageKind::AdjustRequest,
                session_id: id,
                sender: initiator,
                receiver: r,
                payload: Payload::Proposal(proposal.clone()),
            };
            out.extend(self.transmit(t_req, msg, loss));
        }
        let deadline = t_req + self.cfg.reply_timeout();
        self.sessions.get_mut(&id).unwrap().reply_timer = Some(deadline);
        self.set_phase(t_req, id, initiator, "adjust_request", Phase::Requested);
        out.push(Scheduled::Timer { at: deadline, session: id, timer: TimerKind::Reply });
        Ok((Initiation::Started(id), out))
    }

    /// Handles the arrival of one physical copy. Duplicates are dropped by
    /// `(session, kind, sender)` at each receiver.
    pub fn deliver(
        &mut self,
        now: f64,
        msg: &ProtocolMessage,
        decide: &mut dyn FnMut(usize, &Proposal) -> bool,
        loss: &mut dyn LossModel,
    ) -> Vec<Scheduled> {
        let key = (msg.receiver, msg.session_id, msg.kind, msg.sender);
        if !self.seen.insert(key) {
            self.stats.duplicates += 1;
            return Vec::new();
        }
        self.stats.logical_deliveries += 1;
        let Some(s) = self.sessions.get(&msg.session_id) else { return Vec::new() };
        let phase = s.phase;
        self.log(now, msg.session_id, msg.receiver, format!("recv_{}", msg.kind), phase, phase);
        match msg.kind {
            MessageKind::AdjustRequest => {
                if phase != Phase::Requested {
                    return Vec::new();
                }
                let s = self.sessions.get_mut(&msg.session_id).unwrap();
                s.requested.insert(msg.receiver);
                let agree = decide(msg.receiver, &s.proposal);
                let reply = ProtocolMessage {
                    kind: MessageKind::AdjustReply,
                    session_id: msg.session_id,
                    sender: msg.receiver,
                    receiver: msg.sender,
                    payload: Payload::Decision(agree),
                };
                self.transmit(now, reply, loss)
            }
            MessageKind::AdjustReply => {
                let Payload::Decision(agree) = msg.payload else { return Vec::new() };
                self.on_reply(now, msg.session_id, msg.sender, agree, loss)
            }
            MessageKind::AdjustNotification => {
                if phase == Phase::Notifying {
                    self.sessions
                        .get_mut(&msg.session_id)
                        .unwrap()
                        .notified
                        .insert(msg.receiver);
                }
                Vec::new()
            }
            _ => Vec::new(),
        }
    }

    /// Records a participator's decision. Once every reply is in and all
    /// agree, the notification goes out; any refusal aborts the session.
    pub fn on_reply(
        &mut self,
        now: f64,
        id: SessionId,
        from: usize,
        agree: bool,
        loss: &mut dyn LossModel,
    ) -> Vec<Scheduled> {
        let Some(s) = self.sessions.get_mut(&id) else { return Vec::new() };
        if s.phase != Phase::Requested {
            return Vec::new();
        }
        if !s.participators.contains(&from) {
            log::warn!("session {id}: ignoring reply from non-participator {from}");
            return Vec::new();
        }
        s.replies.entry(from).or_insert(agree);
        let initiator = s.initiator;
        if !agree {
            self.stats.aborted += 1;
            self.set_phase(now, id, initiator, "disagree", Phase::Aborted);
            return Vec::new();
        }
        if s.replies.len() < s.participators.len() || !s.replies.values().all(|&a| a) {
            return Vec::new();
        }
        let participators = s.participators.clone();
        let deadline = now + self.cfg.notify_timeout();
        s.notify_timer = Some(deadline);
        self.set_phase(now, id, initiator, "all_agree", Phase::Replied);
        let mut out = Vec::new();
        for &r in &participators {
            let msg = ProtocolMessage {
                kind: MessageKind::AdjustNotification,
                session_id: id,
                sender: initiator,
                receiver: r,
                payload: Payload::Empty,
            };
            out.extend(self.transmit(now, msg, loss));
        }
        self.set_phase(now, id, initiator, "adjust_notification", Phase::Notifying);
        out.push(Scheduled::Timer { at: deadline, session: id, timer: TimerKind::Notify });
        out
    }

    /// Timer expiry. A reply timeout with replies missing aborts; a
    /// notification timeout commits when every participator holds the
    /// notification and aborts otherwise. Stale timers are ignored.
    pub fn on_timer(
        &mut self,
        now: f64,
        id: SessionId,
        timer: TimerKind,
        target: &mut dyn AdjustmentTarget,
        loss: &mut dyn LossModel,
    ) -> Vec<Scheduled> {
        let Some(s) = self.sessions.get(&id) else { return Vec::new() };
        let initiator = s.initiator;
        let mut out = Vec::new();
        let lost_path = match (timer, s.phase) {
            (TimerKind::Reply, Phase::Requested) => {
                self.stats.aborted += 1;
                self.set_phase(now, id, initiator, "reply_timeout", Phase::Aborted);
                true
            }
            (TimerKind::Notify, Phase::Notifying) => {
                if s.notified.len() == s.participators.len() {
                    let proposal = s.proposal.clone();
                    let announcers: Vec<usize> =
                        std::iter::once(initiator).chain(s.participators.iter().copied()).collect();
                    let onlookers: Vec<usize> = s.onlookers.iter().copied().collect();
                    target.apply(&proposal);
                    self.stats.committed += 1;
                    self.set_phase(now, id, initiator, "notify_expiry", Phase::Committed);
                    for &a in &announcers {
                        for &o in &onlookers {
                            let msg = ProtocolMessage {
                                kind: MessageKind::AdjustInfoBroadcast,
                                session_id: id,
                                sender: a,
                                receiver: o,
                                payload: Payload::Empty,
                            };
                            out.extend(self.transmit(now, msg, loss));
                        }
                    }
                    false
                } else {
                    self.stats.aborted += 1;
                    self.set_phase(now, id, initiator, "notify_incomplete", Phase::Aborted);
                    true
                }
            }
            _ => false,
        };
        if lost_path {
            let s = &self.sessions[&id];
            if s.attempt < self.cfg.max_attempts {
                out.push(Scheduled::Retry {
                    at: now + self.cfg.backoff(s.attempt),
                    request: SessionRequest {
                        initiator,
                        proposal: s.proposal.clone(),
                        attempt: s.attempt + 1,
                    },
                });
            }
        }
        out
    }
}

/// Tracks route-change records and tunnels stale packets until every
/// affected source has acknowledged the new route.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RouteUpdates {
    /// node → (flow → source) still awaiting a route accept.
    records: BTreeMap<usize, BTreeMap<usize, usize>>,
    pub tunneled: u64,
    pub updates_sent: u64,
    pub accepts_received: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RouteOutcome {
    pub tunneled: bool,
    pub update_sent: bool,
    pub accepted: bool,
    /// The node's record was removed after this exchange.
    pub cleared: bool,
}

impl RouteUpdates {
    /// Records that `flows` (flow, source) now take a new route past `node`.
    pub fn register_change(&mut self, node: usize, flows: impl IntoIterator<Item = (usize, usize)>) {
        let rec = self.records.entry(node).or_default();
        rec.extend(flows);
        if rec.is_empty() {
            self.records.remove(&node);
        }
    }

    pub fn has_record(&self, node: usize) -> bool {
        self.records.contains_key(&node)
    }

    pub fn pending(&self, node: usize) -> usize {
        self.records.get(&node).map_or(0, BTreeMap::len)
    }

    pub fn nodes_with_records(&self) -> Vec<usize> {
        self.records.keys().copied().collect()
    }

    /// A packet of `flow` arrived at `node` on an obsolete path. It is
    /// tunneled onto the current route and a route update goes to the
    /// source, whose accept retires that flow from the record.
    pub fn route_update(&mut self, node: usize, flow: usize, loss: &mut dyn LossModel) -> RouteOutcome {
        let Some(rec) = self.records.get_mut(&node) else { return RouteOutcome::default() };
        let Some(&source) = rec.get(&flow) else {
            // Flow already acknowledged; the packet still takes the new route.
            self.tunneled += 1;
            return RouteOutcome { tunneled: true, ..Default::default() };
        };
        self.tunneled += 1;
        self.updates_sent += 1;
        let update = ProtocolMessage {
            kind: MessageKind::RouteUpdate,
            session_id: 0,
            sender: node,
            receiver: source,
            payload: Payload::Flow(flow),
        };
        let mut out = RouteOutcome { tunneled: true, update_sent: true, ..Default::default() };
        if loss.lost(&update, 0) {
            return out;
        }
        let accept = ProtocolMessage {
            kind: MessageKind::RouteAccept,
            session_id: 0,
            sender: source,
            receiver: node,
            payload: Payload::Flow(flow),
        };
        if loss.lost(&accept, 0) {
            return out;
        }
        self.accepts_received += 1;
        out.accepted = true;
        rec.remove(&flow);
        if rec.is_empty() {
            self.records.remove(&node);
            out.cleared = true;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum DriverEvent {
    Deliver(ProtocolMessage, u8),
    Timer(SessionId, TimerKind),
    Retry(SessionRequest),
}

impl DriverEvent {
    fn rank(&self) -> u8 {
        match self {
            DriverEvent::Deliver(..) => 0,
            DriverEvent::Timer(..) => 1,
            DriverEvent::Retry(..) => 2,
        }
    }
}

#[derive(Debug, Clone)]
struct Queued {
    at: f64,
    seq: u64,
    ev: DriverEvent,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Reversed for a min-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then(other.ev.rank().cmp(&self.ev.rank()))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Stand-alone event loop around a [`Negotiator`].
pub struct LocalDriver<'a> {
    pub negotiator: Negotiator,
    pub topo: &'a TopologyGraphs,
    queue: BinaryHeap<Queued>,
    seq: u64,
    pub now: f64,
    /// Exclusiveness checked after every event.
    pub exclusiveness_violations: u64,
}

impl<'a> LocalDriver<'a> {
    pub fn new(negotiator: Negotiator, topo: &'a TopologyGraphs) -> Self {
        Self {
            negotiator,
            topo,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            exclusiveness_violations: 0,
        }
    }

    fn push(&mut self, items: Vec<Scheduled>) {
        for s in items {
            let (at, ev) = match s {
                Scheduled::Deliver { at, msg, copy } => (at, DriverEvent::Deliver(msg, copy)),
                Scheduled::Timer { at, session, timer } => (at, DriverEvent::Timer(session, timer)),
                Scheduled::Retry { at, request } => (at, DriverEvent::Retry(request)),
            };
            self.seq += 1;
            self.queue.push(Queued { at, seq: self.seq, ev });
        }
    }

    pub fn start(
        &mut self,
        request: SessionRequest,
        loss: &mut dyn LossModel,
        target: &mut dyn AdjustmentTarget,
    ) -> Result<Initiation> {
        let (init, out) = self.negotiator.initiate(self.now, request, self.topo, loss, target)?;
        self.push(out);
        Ok(init)
    }

    /// Processes events until the queue drains. Retries are followed when
    /// `follow_retries` is set.
    pub fn run(
        &mut self,
        decide: &mut dyn FnMut(usize, &Proposal) -> bool,
        loss: &mut dyn LossModel,
        target: &mut dyn AdjustmentTarget,
        follow_retries: bool,
    ) -> Result<()> {
        while let Some(q) = self.queue.pop() {
            self.now = q.at;
            let out = match q.ev {
                DriverEvent::Deliver(msg, _) => self.negotiator.deliver(self.now, &msg, decide, loss),
                DriverEvent::Timer(id, t) => self.negotiator.on_timer(self.now, id, t, target, loss),
                DriverEvent::Retry(req) => {
                    if follow_retries {
                        let (init, out) =
                            self.negotiator.initiate(self.now, req.clone(), self.topo, loss, target)?;
                        if init == Initiation::Refused && req.attempt < self.negotiator.cfg.max_attempts {
                            let at = self.now + self.negotiator.cfg.backoff(req.attempt);
                            vec![Scheduled::Retry {
                                at,
                                request: SessionRequest { attempt: req.attempt + 1, ..req },
                            }]
                        } else {
                            out
                        }
                    } else {
                        Vec::new()
                    }
                }
            };
            self.push(out);
            if !self.negotiator.check_exclusiveness() {
                self.exclusiveness_violations += 1;
            }
        }
        Ok(())
    }
}
