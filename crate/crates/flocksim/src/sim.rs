//! The discrete-event loop: introductions, wandering, placement attempts,
//! message accounting, phase tracking and steady-state detection.
//!
//! One processed event advances the clock by one tick. Pending actions are
//! served in order of (enqueue time, DO id, insertion order). A new DO is
//! introduced whenever its slot in the `intro_interval` schedule comes due,
//! or earlier if nothing else is pending.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{finalize_links, introduce_do, wander_step, FriendshipGraph, UswParams, WanderOutcome, WanderState};
use crate::ledger::{MessageKind, MessageLedger, Outbox, Phase};
use crate::model::{DoId, Family, Host, HostBand, HostId, PreservationStatus, SimConfig};
use crate::preservation::{
    announce_new_host, attempt_at_host, attempt_placement, can_evolve, copies_to_attempt, AttemptReport,
    PlacementReason, PlacementRequest,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Wander(DoId),
    Place(DoId, PlacementReason),
    Offer(DoId, HostId),
}

impl Action {
    fn owner(self) -> DoId {
        match self {
            Action::Wander(d) | Action::Place(d, _) | Action::Offer(d, _) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    time: u64,
    do_id: DoId,
    seq: u64,
    action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminator {
    SteadyState,
    MaxEvents,
}

/// Mutable state of a run.
#[derive(Debug, Clone)]
pub struct World {
    pub config: SimConfig,
    pub graph: FriendshipGraph,
    pub families: Vec<Family>,
    pub hosts: Vec<Host>,
    pub wanderers: Vec<WanderState>,
    pub introduced: u32,
}

impl World {
    pub fn new(config: SimConfig) -> Self {
        let hosts = (0..config.h_max).map(|i| Host::new(HostId(i + 1), config.host_capacity)).collect();
        World {
            config,
            graph: FriendshipGraph::new(),
            families: Vec::new(),
            hosts,
            wanderers: Vec::new(),
            introduced: 0,
        }
    }

    pub fn family(&self, id: DoId) -> &Family {
        &self.families[id.index()]
    }

    pub fn status_counts(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for f in &self.families {
            counts[f.status().value() as usize - 1] += 1;
        }
        counts
    }

    pub fn band_counts(&self) -> [u64; 6] {
        let mut counts = [0u64; 6];
        for h in &self.hosts {
            let i = HostBand::ALL.iter().position(|b| *b == h.band()).unwrap();
            counts[i] += 1;
        }
        counts
    }

    pub fn discovered_hosts(&self) -> usize {
        self.hosts.iter().filter(|h| h.discovered).count()
    }

    /// Discovered hosts with at least one free foreign slot.
    pub fn hosts_with_unused_capacity(&self) -> usize {
        self.hosts.iter().filter(|h| h.discovered && !h.is_full()).count()
    }

    pub fn zero_copy_fraction(&self) -> f64 {
        if self.families.is_empty() {
            return 0.0;
        }
        let zero = self.families.iter().filter(|f| f.copies.is_empty()).count();
        zero as f64 / self.families.len() as f64
    }
}

/// Growth until every DO is introduced and linked; maintenance afterwards.
pub fn phase_of(world: &World) -> Phase {
    if world.introduced < world.config.n_max || !world.wanderers.is_empty() {
        Phase::Growth
    } else {
        Phase::Maintenance
    }
}

/// Steady when nothing is pending and no family below r_max has a host that
/// would take one more copy.
pub fn detect_steady_state(world: &World, pending_actions: usize) -> bool {
    if pending_actions > 0 {
        return false;
    }
    !world.families.iter().any(|f| can_evolve(f, &world.families, &world.hosts, &world.graph))
}

/// State sampled at the end of each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub t: u64,
    pub phase: Phase,
    pub dos: u32,
    pub discovered_hosts: u32,
    pub effectiveness: f64,
    pub cumulative_sent: u64,
    pub cumulative_received: u64,
    pub status_counts: [u64; 4],
    pub band_counts: [u64; 6],
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: SimConfig,
    pub seed: u64,
    pub terminator: Terminator,
    pub final_t: u64,
    pub steady_state_t: Option<u64>,
    /// First time at which every DO was introduced and linked.
    pub growth_end_t: Option<u64>,
    pub series: Vec<BinRecord>,
    pub ledger: MessageLedger,
    pub world: World,
    pub sacrifices: u64,
}

impl RunResult {
    pub fn final_effectiveness(&self) -> f64 {
        crate::analysis::effectiveness(&self.world).unwrap_or(0.0)
    }

    pub fn total_messages(&self) -> u64 {
        self.ledger.total().sent
    }
}

/// Counters kept by the invariant checker.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SacrificeAudit {
    pub donor_not_above_min: u64,
    pub donor_lost_last_replica: u64,
}

/// A run in progress.
pub struct Simulation {
    world: World,
    params: UswParams,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<Pending>>,
    seq: u64,
    t: u64,
    ledger: MessageLedger,
    series: Vec<BinRecord>,
    growth_end_t: Option<u64>,
    steady_state_t: Option<u64>,
    terminator: Option<Terminator>,
    sacrifices: u64,
    audit: SacrificeAudit,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let params =
            UswParams { link_probability: config.link_probability, extra_link_fraction: config.extra_link_fraction };
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let ledger = MessageLedger::new(config.bin_size);
        Ok(Simulation {
            world: World::new(config),
            params,
            rng,
            queue: BinaryHeap::new(),
            seq: 0,
            t: 0,
            ledger,
            series: Vec::new(),
            growth_end_t: None,
            steady_state_t: None,
            terminator: None,
            sacrifices: 0,
            audit: SacrificeAudit::default(),
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn ledger(&self) -> &MessageLedger {
        &self.ledger
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Sacrifices applied so far.
    pub fn sacrifices(&self) -> u64 {
        self.sacrifices
    }

    pub fn audit(&self) -> SacrificeAudit {
        self.audit
    }

    pub fn terminator(&self) -> Option<Terminator> {
        self.terminator
    }

    fn enqueue(&mut self, action: Action) {
        self.seq += 1;
        let p = Pending { time: self.t, do_id: action.owner(), seq: self.seq, action };
        self.queue.push(Reverse(p));
    }

    fn intro_due(&self) -> bool {
        let cfg = &self.world.config;
        self.world.introduced < cfg.n_max
            && (self.queue.is_empty() || self.t >= self.world.introduced as u64 * cfg.intro_interval)
    }

    /// Processes one event. Returns false once the run has terminated.
    pub fn step(&mut self) -> Result<bool> {
        if self.terminator.is_some() {
            return Ok(false);
        }
        if self.t >= self.world.config.max_events {
            self.finish_with(Terminator::MaxEvents);
            return Ok(false);
        }
        if !self.intro_due() && self.queue.is_empty() {
            if detect_steady_state(&self.world, 0) {
                self.steady_state_t = Some(self.t);
                self.finish_with(Terminator::SteadyState);
                return Ok(false);
            }
            self.retry_round();
        }

        let phase = phase_of(&self.world);
        let mut out = Outbox::new(self.t);
        if self.intro_due() {
            self.introduce()?;
        } else {
            let Reverse(p) = self.queue.pop().expect("queue is nonempty");
            match p.action {
                Action::Wander(d) => self.wander(d, &mut out)?,
                Action::Place(d, reason) => self.place(d, reason, &mut out)?,
                Action::Offer(d, host) => self.offer(d, host, &mut out)?,
            }
        }
        for m in &out.messages {
            self.ledger.record(m, phase);
        }
        self.t += 1;
        if self.growth_end_t.is_none() && phase_of(&self.world) == Phase::Maintenance {
            self.growth_end_t = Some(self.t);
        }
        if self.t.is_multiple_of(self.world.config.bin_size) {
            self.sample();
        }
        Ok(true)
    }

    /// Queues one attempt for every family that could still place a copy.
    fn retry_round(&mut self) {
        let ready: Vec<DoId> = self
            .world
            .families
            .iter()
            .filter(|f| can_evolve(f, &self.world.families, &self.world.hosts, &self.world.graph))
            .map(|f| f.id())
            .collect();
        for d in ready {
            self.enqueue(Action::Place(d, PlacementReason::Opportunistic));
        }
    }

    fn introduce(&mut self) -> Result<()> {
        let w = &mut self.world;
        let (id, host, state) = introduce_do(&mut w.graph, &mut w.hosts, w.introduced, w.config.n_max, &mut self.rng)?;
        w.introduced += 1;
        w.families.push(Family::new(id, host, w.config.r_min, w.config.r_max));
        if !state.connected {
            w.wanderers.push(state);
            self.enqueue(Action::Wander(id));
        }
        Ok(())
    }

    fn wander(&mut self, d: DoId, out: &mut Outbox) -> Result<()> {
        let pos = self
            .world
            .wanderers
            .iter()
            .position(|s| s.do_id == d)
            .ok_or_else(|| Error::Invariant(format!("{d} is not wandering")))?;
        let w = &mut self.world;
        let state = &mut w.wanderers[pos];
        let visited = state.current;
        let outcome = wander_step(state, &mut w.graph, &self.params, &mut self.rng)?;
        out.send(MessageKind::Contact, d, visited);
        out.send(MessageKind::ContactReply, visited, d);
        match outcome {
            WanderOutcome::Moved(_) => self.enqueue(Action::Wander(d)),
            WanderOutcome::Linked(_) => {
                let state = w.wanderers.remove(pos);
                let edges = finalize_links(&state, &mut w.graph, &self.params, &mut self.rng)?;
                let mut first_timers = Vec::new();
                for (a, b) in edges {
                    out.send(MessageKind::LinkRequest, a, b);
                    out.send(MessageKind::LinkAck, b, a);
                    if !w.families[b.index()].first_connection_done && w.graph.degree(b) == 1 {
                        first_timers.push(b);
                    }
                }
                self.enqueue(Action::Place(d, PlacementReason::FirstConnection));
                for b in first_timers {
                    self.enqueue(Action::Place(b, PlacementReason::FirstConnection));
                }
            }
        }
        Ok(())
    }

    fn offer(&mut self, d: DoId, host: HostId, out: &mut Outbox) -> Result<()> {
        let w = &mut self.world;
        let fam = w.family(d);
        let desired = copies_to_attempt(w.config.policy, fam.copy_count(), fam.r_min, fam.r_max, false);
        let request = PlacementRequest {
            family: d,
            desired_count: desired,
            reason: PlacementReason::Opportunistic,
            target: Some(host),
        };
        if request.desired_count == 0 {
            return Ok(());
        }
        let report = attempt_at_host(&mut w.families, &mut w.hosts, d, host, out)?;
        self.settle(d, report, out)
    }

    fn place(&mut self, d: DoId, reason: PlacementReason, out: &mut Outbox) -> Result<()> {
        let w = &mut self.world;
        let fam = &mut w.families[d.index()];
        let first = reason == PlacementReason::FirstConnection && !fam.first_connection_done;
        if reason == PlacementReason::FirstConnection {
            fam.first_connection_done = true;
        }
        let desired = copies_to_attempt(w.config.policy, fam.copy_count(), fam.r_min, fam.r_max, first);
        let request = PlacementRequest { family: d, desired_count: desired, reason, target: None };
        if request.desired_count == 0 {
            return Ok(());
        }
        let report = attempt_placement(&mut w.families, &mut w.hosts, &w.graph, d, request.desired_count, out)?;
        self.settle(d, report, out)
    }

    /// Audits sacrifices, announces newly used hosts and queues follow-ups.
    fn settle(&mut self, d: DoId, report: AttemptReport, out: &mut Outbox) -> Result<()> {
        let w = &mut self.world;
        for decision in &report.sacrifices {
            self.sacrifices += 1;
            let donor = &w.families[decision.donor.index()];
            if donor.copy_count() < donor.r_min {
                self.audit.donor_not_above_min += 1;
            }
            if donor.copies.is_empty() {
                self.audit.donor_lost_last_replica += 1;
            }
        }
        let mut wanting = Vec::new();
        for host in &report.placed {
            if w.families[d.index()].learn_host(*host) {
                for f in announce_new_host(&mut w.families, &w.graph, d, *host, out) {
                    wanting.push((f, *host));
                }
            }
        }
        for (f, host) in wanting {
            self.enqueue(Action::Offer(f, host));
        }
        for decision in report.sacrifices {
            self.enqueue(Action::Place(decision.donor, PlacementReason::Replenish));
        }
        Ok(())
    }

    fn sample(&mut self) {
        let total = self.ledger.total();
        let record = BinRecord {
            t: self.t,
            phase: phase_of(&self.world),
            dos: self.world.introduced,
            discovered_hosts: self.world.discovered_hosts() as u32,
            effectiveness: crate::analysis::effectiveness(&self.world).unwrap_or(0.0),
            cumulative_sent: total.sent,
            cumulative_received: total.received,
            status_counts: self.world.status_counts(),
            band_counts: self.world.band_counts(),
        };
        self.series.push(record);
    }

    fn finish_with(&mut self, terminator: Terminator) {
        self.terminator = Some(terminator);
        if !self.t.is_multiple_of(self.world.config.bin_size) {
            self.sample();
        }
    }

    /// Checks the structural invariants of the current state.
    pub fn check_invariants(&self) -> Result<()> {
        check_world(&self.world)?;
        if self.ledger.sum_sent() != self.ledger.sum_received() {
            return Err(Error::Invariant("messages sent differ from messages received".into()));
        }
        if self.audit != SacrificeAudit::default() {
            return Err(Error::Invariant(format!("sacrifice audit failed: {:?}", self.audit)));
        }
        Ok(())
    }

    pub fn run_to_end(mut self) -> Result<RunResult> {
        while self.step()? {}
        Ok(self.into_result())
    }

    pub fn into_result(self) -> RunResult {
        let seed = self.world.config.seed;
        RunResult {
            config: self.world.config.clone(),
            seed,
            terminator: self.terminator.unwrap_or(Terminator::MaxEvents),
            final_t: self.t,
            steady_state_t: self.steady_state_t,
            growth_end_t: self.growth_end_t,
            series: self.series,
            ledger: self.ledger,
            world: self.world,
            sacrifices: self.sacrifices,
        }
    }
}

/// (n,h)-uniqueness, copy limits and slot bookkeeping.
pub fn check_world(world: &World) -> Result<()> {
    let fail = |m: String| Err(Error::Invariant(m));
    let mut slots_from_families = 0usize;
    for f in &world.families {
        if f.copy_count() > f.r_max {
            return fail(format!("{} holds {} copies above r_max", f.id(), f.copy_count()));
        }
        let mut hosts: Vec<HostId> = f.copies.iter().map(|c| c.host_id).collect();
        hosts.push(f.parent.host_id);
        hosts.sort();
        if hosts.windows(2).any(|w| w[0] == w[1]) {
            return fail(format!("{} has two replicas on one host", f.id()));
        }
        for c in &f.copies {
            if c.copy_index == 0 {
                return fail(format!("{} has a copy with index 0", f.id()));
            }
            if !world.hosts[c.host_id.index()].foreign_slots.contains(c) {
                return fail(format!("{} copy missing from {}", f.id(), c.host_id));
            }
        }
        slots_from_families += f.copies.len();
    }
    let mut slots_on_hosts = 0usize;
    for h in &world.hosts {
        if h.used() > h.capacity {
            return fail(format!("{} over capacity", h.id));
        }
        let mut fams: Vec<DoId> = h.foreign_slots.iter().map(|r| r.do_id).collect();
        fams.sort();
        if fams.windows(2).any(|w| w[0] == w[1]) {
            return fail(format!("{} holds two replicas of one family", h.id));
        }
        slots_on_hosts += h.foreign_slots.len();
    }
    if slots_on_hosts != slots_from_families {
        return fail(format!("slot count {slots_on_hosts} differs from copy count {slots_from_families}"));
    }
    Ok(())
}

/// Runs a configuration to steady state or `max_events`.
pub fn run(config: SimConfig) -> Result<RunResult> {
    Simulation::new(config)?.run_to_end()
}

/// Per-family status used in summaries.
pub fn status_histogram(world: &World) -> Vec<(PreservationStatus, u64)> {
    PreservationStatus::ALL.iter().copied().zip(world.status_counts()).collect()
}
