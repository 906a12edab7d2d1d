//! Deterministic discrete-event simulator of self-preserving digital objects.
//!
//! Digital objects (DOs) join a friendship graph grown by an unsupervised
//! small-world process, then replicate themselves onto capacity-limited hosts
//! they learn about through their friends. Three policies decide how many
//! copies a DO makes at its first opportunity; afterwards all make one copy
//! per opportunity.
//!
//! ```
//! use flocksim::{run, PolicyKind, SimConfig};
//!
//! let config = SimConfig { n_max: 40, h_max: 80, policy: PolicyKind::MostAggressive, ..SimConfig::default() };
//! let result = run(config).unwrap();
//! assert!(result.steady_state_t.is_some());
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod graph;
pub mod ledger;
pub mod model;
pub mod preservation;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    classify_condition, host_band, status_of, DoId, Family, Host, HostBand, HostId, NamedCondition, PolicyKind,
    PreservationStatus, ReplicaRef, SimConfig,
};
pub use sim::{run, RunResult, Simulation, Terminator, World};
