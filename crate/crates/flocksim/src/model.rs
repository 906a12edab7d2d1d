//! Domain types, run configuration and the pure classification functions
//! shared by the rest of the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sequence number of a digital object, 1-based in introduction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DoId(pub u32);

impl DoId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        DoId(i as u32 + 1)
    }
}

impl fmt::Display for DoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DO{}", self.0)
    }
}

/// Sequence number of a host, 1-based and at most `h_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HostId(pub u32);

impl HostId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        HostId(i as u32 + 1)
    }
}

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}", self.0)
    }
}

/// One replica of a family. `copy_index == 0` is the parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReplicaRef {
    pub do_id: DoId,
    pub copy_index: u32,
    pub host_id: HostId,
}

/// A parent DO together with its preservation copies.
///
/// Friendship is held by the graph; see [`crate::graph::FriendshipGraph::friends`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    pub parent: ReplicaRef,
    pub copies: Vec<ReplicaRef>,
    pub r_min: u32,
    pub r_max: u32,
    /// Hosts learned from announcements, in ascending id order.
    pub known_hosts: Vec<HostId>,
    /// Set once the family has made its first-connection placement request.
    pub first_connection_done: bool,
}

impl Family {
    pub fn new(do_id: DoId, host_id: HostId, r_min: u32, r_max: u32) -> Self {
        Family {
            parent: ReplicaRef { do_id, copy_index: 0, host_id },
            copies: Vec::new(),
            r_min,
            r_max,
            known_hosts: Vec::new(),
            first_connection_done: false,
        }
    }

    pub fn id(&self) -> DoId {
        self.parent.do_id
    }

    pub fn copy_count(&self) -> u32 {
        self.copies.len() as u32
    }

    /// True if the parent or any copy lives on `host`.
    pub fn occupies(&self, host: HostId) -> bool {
        self.parent.host_id == host || self.copies.iter().any(|c| c.host_id == host)
    }

    pub fn knows_host(&self, host: HostId) -> bool {
        self.known_hosts.binary_search(&host).is_ok()
    }

    /// Returns true if the host was new to this family.
    pub fn learn_host(&mut self, host: HostId) -> bool {
        match self.known_hosts.binary_search(&host) {
            Ok(_) => false,
            Err(pos) => {
                self.known_hosts.insert(pos, host);
                true
            }
        }
    }

    /// Smallest positive copy index not currently in use.
    pub fn next_copy_index(&self) -> u32 {
        (1..).find(|i| self.copies.iter().all(|c| c.copy_index != *i)).unwrap()
    }

    pub fn status(&self) -> PreservationStatus {
        status_of(self.copy_count(), self.r_min, self.r_max).expect("family copy count exceeds r_max")
    }
}

/// Storage node. Local DOs are unbounded; foreign replicas are capped at
/// `capacity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Host {
    pub id: HostId,
    pub local_dos: Vec<DoId>,
    pub foreign_slots: Vec<ReplicaRef>,
    pub capacity: u32,
    pub discovered: bool,
}

impl Host {
    pub fn new(id: HostId, capacity: u32) -> Self {
        Host { id, local_dos: Vec::new(), foreign_slots: Vec::new(), capacity, discovered: false }
    }

    pub fn used(&self) -> u32 {
        self.foreign_slots.len() as u32
    }

    pub fn free(&self) -> u32 {
        self.capacity - self.used()
    }

    pub fn is_full(&self) -> bool {
        self.used() >= self.capacity
    }

    pub fn holds_family(&self, do_id: DoId) -> bool {
        self.foreign_slots.iter().any(|r| r.do_id == do_id)
    }

    pub fn band(&self) -> HostBand {
        host_band(self.used(), self.capacity, self.discovered, self.used() > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "least")]
    LeastAggressive,
    #[serde(rename = "moderate")]
    ModeratelyAggressive,
    #[serde(rename = "most")]
    MostAggressive,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] =
        [PolicyKind::LeastAggressive, PolicyKind::ModeratelyAggressive, PolicyKind::MostAggressive];

    pub fn short_name(self) -> &'static str {
        match self {
            PolicyKind::LeastAggressive => "least",
            PolicyKind::ModeratelyAggressive => "moderate",
            PolicyKind::MostAggressive => "most",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "least" => Ok(PolicyKind::LeastAggressive),
            "moderate" => Ok(PolicyKind::ModeratelyAggressive),
            "most" => Ok(PolicyKind::MostAggressive),
            other => Err(Error::InvalidConfig(format!("unknown policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PreservationStatus {
    NoneMade,
    Partial,
    AtMin,
    AtMax,
}

impl PreservationStatus {
    pub const ALL: [PreservationStatus; 4] = [
        PreservationStatus::NoneMade,
        PreservationStatus::Partial,
        PreservationStatus::AtMin,
        PreservationStatus::AtMax,
    ];

    pub fn value(self) -> u32 {
        match self {
            PreservationStatus::NoneMade => 1,
            PreservationStatus::Partial => 2,
            PreservationStatus::AtMin => 3,
            PreservationStatus::AtMax => 4,
        }
    }

    pub fn color(self) -> &'static str {
        match self {
            PreservationStatus::NoneMade => "red",
            PreservationStatus::Partial => "yellow",
            PreservationStatus::AtMin => "green",
            PreservationStatus::AtMax => "blue",
        }
    }
}

/// Preservation status band for a family holding `c` copies.
pub fn status_of(c: u32, r_min: u32, r_max: u32) -> Result<PreservationStatus> {
    if r_min > r_max {
        return Err(Error::InvalidConfig(format!("r_min {r_min} exceeds r_max {r_max}")));
    }
    if c > r_max {
        return Err(Error::Invariant(format!("copy count {c} exceeds r_max {r_max}")));
    }
    Ok(if c == r_max {
        PreservationStatus::AtMax
    } else if c >= r_min {
        PreservationStatus::AtMin
    } else if c == 0 {
        PreservationStatus::NoneMade
    } else {
        PreservationStatus::Partial
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HostBand {
    Grey,
    White,
    Red,
    Yellow,
    Green,
    Blue,
}

impl HostBand {
    pub const ALL: [HostBand; 6] =
        [HostBand::Grey, HostBand::White, HostBand::Red, HostBand::Yellow, HostBand::Green, HostBand::Blue];

    pub fn color(self) -> &'static str {
        match self {
            HostBand::Grey => "grey",
            HostBand::White => "white",
            HostBand::Red => "red",
            HostBand::Yellow => "yellow",
            HostBand::Green => "green",
            HostBand::Blue => "blue",
        }
    }

    /// Rank used for monotonicity checks; grey and white both sit below red.
    pub fn rank(self) -> u32 {
        match self {
            HostBand::Grey => 0,
            HostBand::White => 1,
            HostBand::Red => 2,
            HostBand::Yellow => 3,
            HostBand::Green => 4,
            HostBand::Blue => 5,
        }
    }
}

/// Display band of a host from its foreign-slot usage.
pub fn host_band(used: u32, capacity: u32, discovered: bool, hosting_any: bool) -> HostBand {
    if !discovered {
        return HostBand::Grey;
    }
    if used == 0 || !hosting_any {
        return HostBand::White;
    }
    // Integer comparisons avoid rounding at the quarter boundaries.
    let four_used = 4 * used as u64;
    let cap = capacity as u64;
    if four_used < cap {
        HostBand::Red
    } else if four_used < 2 * cap {
        HostBand::Yellow
    } else if four_used < 3 * cap {
        HostBand::Green
    } else {
        HostBand::Blue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NamedCondition {
    Famine,
    BoundaryLow,
    Straddle,
    BoundaryHigh,
    Feast,
}

impl fmt::Display for NamedCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NamedCondition::Famine => "Famine",
            NamedCondition::BoundaryLow => "BoundaryLow",
            NamedCondition::Straddle => "Straddle",
            NamedCondition::BoundaryHigh => "BoundaryHigh",
            NamedCondition::Feast => "Feast",
        };
        f.write_str(s)
    }
}

/// Capacity regime of a configuration, comparing total foreign capacity
/// against total copy demand.
pub fn classify_condition(config: &SimConfig) -> NamedCondition {
    let d_min = config.n_max as u64 * config.r_min as u64;
    let d_max = config.n_max as u64 * config.r_max as u64;
    let c = config.h_max as u64 * config.host_capacity as u64;
    if c < d_min {
        NamedCondition::Famine
    } else if c == d_min {
        NamedCondition::BoundaryLow
    } else if c < d_max {
        NamedCondition::Straddle
    } else if c <= 2 * d_max {
        NamedCondition::BoundaryHigh
    } else {
        NamedCondition::Feast
    }
}

/// Full parameterization of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_max: u32,
    pub h_max: u32,
    pub r_min: u32,
    pub r_max: u32,
    pub host_capacity: u32,
    pub policy: PolicyKind,
    pub seed: u64,
    pub bin_size: u64,
    pub intro_interval: u64,
    pub link_probability: f64,
    pub extra_link_fraction: f64,
    pub max_events: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_max: 500,
            h_max: 1000,
            r_min: 3,
            r_max: 5,
            host_capacity: 5,
            policy: PolicyKind::LeastAggressive,
            seed: 1,
            bin_size: 100,
            intro_interval: 7,
            link_probability: 0.5,
            extra_link_fraction: 0.33,
            max_events: 5_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_max < 1 {
            return bad("n_max must be at least 1".into());
        }
        if self.h_max < 1 {
            return bad("h_max must be at least 1".into());
        }
        if self.r_min > self.r_max {
            return bad(format!("r_min {} exceeds r_max {}", self.r_min, self.r_max));
        }
        if self.bin_size < 1 {
            return bad("bin_size must be at least 1".into());
        }
        if self.intro_interval < 1 {
            return bad("intro_interval must be at least 1".into());
        }
        if !(self.link_probability > 0.0 && self.link_probability <= 1.0) {
            return bad(format!("link_probability {} outside (0, 1]", self.link_probability));
        }
        if !(0.0..=1.0).contains(&self.extra_link_fraction) {
            return bad(format!("extra_link_fraction {} outside [0, 1]", self.extra_link_fraction));
        }
        Ok(())
    }
}
