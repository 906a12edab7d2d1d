//! Message records and the per-DO / system-wide message ledger.

use serde::{Deserialize, Serialize};

use crate::model::{DoId, HostId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Contact,
    ContactReply,
    LinkRequest,
    LinkAck,
    CopyRequest,
    CopyAck,
    CopyDeny,
    SacrificeDirective,
    HostAnnounce,
}

/// Sender or recipient of a message. Copy requests are answered by the host
/// itself rather than by any DO living there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    Do(DoId),
    Host(HostId),
}

impl From<DoId> for Party {
    fn from(d: DoId) -> Self {
        Party::Do(d)
    }
}

impl From<HostId> for Party {
    fn from(h: HostId) -> Self {
        Party::Host(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub from: Party,
    pub to: Party,
    pub t_sent: u64,
}

/// Messages produced while processing one event, stamped with its time.
#[derive(Debug, Clone, Default)]
pub struct Outbox {
    pub t: u64,
    pub messages: Vec<Message>,
}

impl Outbox {
    pub fn new(t: u64) -> Self {
        Outbox { t, messages: Vec::new() }
    }

    pub fn send(&mut self, kind: MessageKind, from: impl Into<Party>, to: impl Into<Party>) {
        let (from, to) = (from.into(), to.into());
        debug_assert_ne!(from, to, "{kind:?} addressed to its sender");
        self.messages.push(Message { kind, from, to, t_sent: self.t });
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Growth,
    Maintenance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub sent: u64,
    pub received: u64,
}

/// Send/receive counters, per DO and system-wide, binned by event time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLedger {
    pub bin_size: u64,
    per_do: Vec<Tally>,
    per_do_sent_bins: Vec<Vec<u64>>,
    per_do_received_bins: Vec<Vec<u64>>,
    system_bins: Vec<u64>,
    /// Messages sent and received by hosts, all hosts together.
    pub hosts: Tally,
    pub growth: Tally,
    pub maintenance: Tally,
}

fn bump(bins: &mut Vec<u64>, bin: usize) {
    if bins.len() <= bin {
        bins.resize(bin + 1, 0);
    }
    bins[bin] += 1;
}

impl MessageLedger {
    pub fn new(bin_size: u64) -> Self {
        MessageLedger {
            bin_size,
            per_do: Vec::new(),
            per_do_sent_bins: Vec::new(),
            per_do_received_bins: Vec::new(),
            system_bins: Vec::new(),
            hosts: Tally::default(),
            growth: Tally::default(),
            maintenance: Tally::default(),
        }
    }

    pub fn bin_of(&self, t: u64) -> usize {
        (t / self.bin_size) as usize
    }

    fn ensure(&mut self, id: DoId) {
        let need = id.index() + 1;
        if self.per_do.len() < need {
            self.per_do.resize(need, Tally::default());
            self.per_do_sent_bins.resize_with(need, Vec::new);
            self.per_do_received_bins.resize_with(need, Vec::new);
        }
    }

    pub fn record(&mut self, message: &Message, phase: Phase) {
        let bin = self.bin_of(message.t_sent);
        match message.from {
            Party::Do(d) => {
                self.ensure(d);
                self.per_do[d.index()].sent += 1;
                bump(&mut self.per_do_sent_bins[d.index()], bin);
            }
            Party::Host(_) => self.hosts.sent += 1,
        }
        match message.to {
            Party::Do(d) => {
                self.ensure(d);
                self.per_do[d.index()].received += 1;
                bump(&mut self.per_do_received_bins[d.index()], bin);
            }
            Party::Host(_) => self.hosts.received += 1,
        }
        bump(&mut self.system_bins, bin);
        let tally = match phase {
            Phase::Growth => &mut self.growth,
            Phase::Maintenance => &mut self.maintenance,
        };
        tally.sent += 1;
        tally.received += 1;
    }

    pub fn total(&self) -> Tally {
        Tally {
            sent: self.growth.sent + self.maintenance.sent,
            received: self.growth.received + self.maintenance.received,
        }
    }

    pub fn do_totals(&self, id: DoId) -> Tally {
        self.per_do.get(id.index()).copied().unwrap_or_default()
    }

    /// Sent counts of one DO per bin; trailing empty bins are omitted.
    pub fn do_sent_bins(&self, id: DoId) -> &[u64] {
        self.per_do_sent_bins.get(id.index()).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn do_received_bins(&self, id: DoId) -> &[u64] {
        self.per_do_received_bins.get(id.index()).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// System-wide messages per bin (each message counted once).
    pub fn system_bins(&self) -> &[u64] {
        &self.system_bins
    }

    /// Sent counts summed over every party.
    pub fn sum_sent(&self) -> u64 {
        self.per_do.iter().map(|t| t.sent).sum::<u64>() + self.hosts.sent
    }

    /// Received counts summed over every party.
    pub fn sum_received(&self) -> u64 {
        self.per_do.iter().map(|t| t.received).sum::<u64>() + self.hosts.received
    }
}

/// Records every message of an event.
pub fn record_message(ledger: &mut MessageLedger, message: &Message, phase: Phase) {
    ledger.record(message, phase);
}
