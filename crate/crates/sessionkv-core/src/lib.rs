//! Consistency workbench for replicated key-value stores.
//!
//! The crate is organised around a seven-method (plus two initializers)
//! protocol interface shared by every store definition:
//!
//! * [`kernel`] — domain types, the protocol method table, histories and
//!   their external projection.
//! * [`semantics`] — the nondeterministic operational semantics: world
//!   construction, transition enumeration, seeded random runs and bounded
//!   exhaustive exploration.
//! * [`protocols`] — the twelve protocol definitions (relaxed baseline,
//!   session-guarantee specs and references, causal variants) plus the
//!   vector-clock / dependency-set algebra and the pluggable store backends.
//! * [`refinement`] — bounded trace-inclusion and convergence checking and
//!   the hierarchy runner.
//!
//! The crate is `no_std` (with `alloc`); everything IO-flavoured lives in
//! the companion `sessionkv` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod data;
pub mod kernel;
pub mod protocols;
pub mod refinement;
pub mod semantics;

pub use kernel::{
    Application, ClientId, EventLabel, History, Key, OpId, ReplicaId, Statement, Timestamp,
    TopicLabel, Value,
};
pub use protocols::{ProtocolDefinition, ProtocolName, StoreBackend};
