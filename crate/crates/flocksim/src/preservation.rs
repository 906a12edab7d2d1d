//! Replication policies and the three flocking rules: collision avoidance
//! (one replica per family per host), velocity matching (sacrifice) and flock
//! centering (host announcements).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FriendshipGraph;
use crate::ledger::{MessageKind, Outbox};
use crate::model::{DoId, Family, Host, HostId, PolicyKind, ReplicaRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlacementReason {
    FirstConnection,
    Opportunistic,
    Replenish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlacementRequest {
    pub family: DoId,
    pub desired_count: u32,
    pub reason: PlacementReason,
    /// Set for attempts triggered by an announcement: the announced host.
    pub target: Option<HostId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SacrificeDecision {
    pub donor: DoId,
    pub victim_host: HostId,
    pub beneficiary: DoId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaceOutcome {
    Placed { copy_index: u32 },
    Denied,
}

/// How many copies a family tries to make at one opportunity.
pub fn copies_to_attempt(policy: PolicyKind, current_c: u32, r_min: u32, r_max: u32, first_connection: bool) -> u32 {
    let room = r_max.saturating_sub(current_c);
    let least = room.min(1);
    if !first_connection {
        return least;
    }
    match policy {
        PolicyKind::LeastAggressive => least,
        PolicyKind::ModeratelyAggressive => r_min.saturating_sub(current_c).min(room),
        PolicyKind::MostAggressive => room,
    }
}

/// Hosts a family may place on: its announced hosts plus its friends' local
/// hosts, minus hosts it already occupies, ordered by free slots (descending)
/// then id. Full hosts stay at the tail.
pub fn candidate_hosts(family: &Family, families: &[Family], hosts: &[Host], graph: &FriendshipGraph) -> Vec<HostId> {
    let mut ids: Vec<HostId> = family.known_hosts.clone();
    ids.extend(graph.friends(family.id()).iter().map(|f| families[f.index()].parent.host_id));
    ids.sort();
    ids.dedup();
    ids.retain(|h| !family.occupies(*h));
    ids.sort_by_key(|h| (std::cmp::Reverse(hosts[h.index()].free()), *h));
    ids
}

/// Sends a copy request to `host` and stores the copy if a slot is free.
pub fn place_copy(
    families: &mut [Family],
    hosts: &mut [Host],
    family: DoId,
    host: HostId,
    out: &mut Outbox,
) -> Result<PlaceOutcome> {
    let fam = &families[family.index()];
    if fam.occupies(host) {
        return Err(Error::Precondition(format!("{family} already occupies {host}")));
    }
    if fam.copy_count() >= fam.r_max {
        return Err(Error::Precondition(format!("{family} is already at r_max")));
    }
    let h = &mut hosts[host.index()];
    out.send(MessageKind::CopyRequest, family, host);
    if h.is_full() {
        out.send(MessageKind::CopyDeny, host, family);
        return Ok(PlaceOutcome::Denied);
    }
    let fam = &mut families[family.index()];
    let replica = ReplicaRef { do_id: family, copy_index: fam.next_copy_index(), host_id: host };
    fam.copies.push(replica);
    h.foreign_slots.push(replica);
    h.discovered = true;
    out.send(MessageKind::CopyAck, host, family);
    Ok(PlaceOutcome::Placed { copy_index: replica.copy_index })
}

/// True if `family` may give up one copy for another family.
pub fn can_donate(family: &Family) -> bool {
    let c = family.copy_count();
    c > family.r_min && c >= 2
}

/// Chooses the resident of a full host that gives up its slot: the family
/// with the most copies above its r_min, ties to the lowest id.
pub fn try_sacrifice(
    families: &[Family],
    hosts: &[Host],
    beneficiary: DoId,
    host: HostId,
) -> Result<Option<SacrificeDecision>> {
    let h = &hosts[host.index()];
    if !h.is_full() {
        return Err(Error::Precondition(format!("{host} is not full")));
    }
    let ben = &families[beneficiary.index()];
    if ben.copy_count() >= ben.r_min {
        return Err(Error::Precondition(format!("{beneficiary} is not below r_min")));
    }
    let donor = h
        .foreign_slots
        .iter()
        .map(|r| &families[r.do_id.index()])
        .filter(|f| can_donate(f))
        .min_by_key(|f| (std::cmp::Reverse(f.copy_count()), f.id()));
    Ok(donor.map(|d| SacrificeDecision { donor: d.id(), victim_host: host, beneficiary }))
}

/// Moves the donor's slot to the beneficiary. The host answers the request
/// and directs the donor to drop its copy.
pub fn apply_sacrifice(
    families: &mut [Family],
    hosts: &mut [Host],
    decision: &SacrificeDecision,
    out: &mut Outbox,
) -> Result<u32> {
    let host = decision.victim_host;
    let h = &mut hosts[host.index()];
    let donor = &mut families[decision.donor.index()];
    if !can_donate(donor) {
        return Err(Error::Invariant(format!("{} may not donate", decision.donor)));
    }
    let pos = donor
        .copies
        .iter()
        .position(|r| r.host_id == decision.victim_host)
        .ok_or_else(|| Error::Invariant(format!("{} holds no copy on {}", decision.donor, decision.victim_host)))?;
    donor.copies.remove(pos);
    h.foreign_slots.retain(|r| r.do_id != decision.donor);

    let ben = &mut families[decision.beneficiary.index()];
    let replica =
        ReplicaRef { do_id: decision.beneficiary, copy_index: ben.next_copy_index(), host_id: decision.victim_host };
    ben.copies.push(replica);
    h.foreign_slots.push(replica);

    out.send(MessageKind::CopyRequest, decision.beneficiary, host);
    out.send(MessageKind::CopyAck, host, decision.beneficiary);
    out.send(MessageKind::SacrificeDirective, host, decision.donor);
    Ok(replica.copy_index)
}

/// Tells every friend about `host`. Friends record it; those below r_max
/// are returned so the caller can queue an opportunistic attempt for each.
pub fn announce_new_host(
    families: &mut [Family],
    graph: &FriendshipGraph,
    family: DoId,
    host: HostId,
    out: &mut Outbox,
) -> Vec<DoId> {
    let mut wanting = Vec::new();
    for &friend in graph.friends(family) {
        out.send(MessageKind::HostAnnounce, family, friend);
        let f = &mut families[friend.index()];
        f.learn_host(host);
        if f.copy_count() < f.r_max && !f.occupies(host) {
            wanting.push(friend);
        }
    }
    wanting
}

/// Outcome of one placement attempt.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttemptReport {
    pub placed: Vec<HostId>,
    pub sacrifices: Vec<SacrificeDecision>,
    pub denied: u32,
}

/// Works through the family's candidate hosts until `desired` copies are
/// placed or the list is exhausted. Full hosts are only asked while the
/// family is below r_min, since only then can a sacrifice be arranged.
pub fn attempt_placement(
    families: &mut [Family],
    hosts: &mut [Host],
    graph: &FriendshipGraph,
    family: DoId,
    desired: u32,
    out: &mut Outbox,
) -> Result<AttemptReport> {
    let mut report = AttemptReport::default();
    if desired == 0 {
        return Ok(report);
    }
    let candidates = candidate_hosts(&families[family.index()], families, hosts, graph);
    for host in candidates {
        if report.placed.len() as u32 >= desired {
            break;
        }
        let fam = &families[family.index()];
        if fam.copy_count() >= fam.r_max {
            break;
        }
        let below_min = fam.copy_count() < fam.r_min;
        if hosts[host.index()].is_full() {
            if !below_min {
                continue;
            }
            match try_sacrifice(families, hosts, family, host)? {
                Some(decision) => {
                    apply_sacrifice(families, hosts, &decision, out)?;
                    report.placed.push(host);
                    report.sacrifices.push(decision);
                }
                None => {
                    place_copy(families, hosts, family, host, out)?;
                    report.denied += 1;
                }
            }
            continue;
        }
        match place_copy(families, hosts, family, host, out)? {
            PlaceOutcome::Placed { .. } => report.placed.push(host),
            PlaceOutcome::Denied => report.denied += 1,
        }
    }
    Ok(report)
}

/// One copy at a specific announced host. Skipped without messages when
/// the family already occupies it, is at r_max, or the host is full and
/// the family is not below r_min.
pub fn attempt_at_host(
    families: &mut [Family],
    hosts: &mut [Host],
    family: DoId,
    host: HostId,
    out: &mut Outbox,
) -> Result<AttemptReport> {
    let mut report = AttemptReport::default();
    let fam = &families[family.index()];
    if fam.occupies(host) || fam.copy_count() >= fam.r_max {
        return Ok(report);
    }
    let below_min = fam.copy_count() < fam.r_min;
    if hosts[host.index()].is_full() {
        if !below_min {
            return Ok(report);
        }
        match try_sacrifice(families, hosts, family, host)? {
            Some(decision) => {
                apply_sacrifice(families, hosts, &decision, out)?;
                report.placed.push(host);
                report.sacrifices.push(decision);
            }
            None => {
                place_copy(families, hosts, family, host, out)?;
                report.denied += 1;
            }
        }
        return Ok(report);
    }
    match place_copy(families, hosts, family, host, out)? {
        PlaceOutcome::Placed { .. } => report.placed.push(host),
        PlaceOutcome::Denied => report.denied += 1,
    }
    Ok(report)
}

/// True if some candidate host would take a copy from this family, either
/// into a free slot or through a sacrifice.
pub fn can_evolve(family: &Family, families: &[Family], hosts: &[Host], graph: &FriendshipGraph) -> bool {
    if family.copy_count() >= family.r_max {
        return false;
    }
    let below_min = family.copy_count() < family.r_min;
    candidate_hosts(family, families, hosts, graph).into_iter().any(|h| {
        let host = &hosts[h.index()];
        if !host.is_full() {
            return true;
        }
        below_min && host.foreign_slots.iter().any(|r| can_donate(&families[r.do_id.index()]))
    })
}
