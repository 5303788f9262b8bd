//! Coordination-free query evaluation over relational transducer networks.
//!
//! The crate bundles a Datalog⁻ engine, brute-force checkers for monotonicity
//! and its weakened forms, distribution models N0–N3 with their partitioning
//! policies, three broadcast transducer protocols, and a deterministic,
//! seeded network simulator.

pub mod datalog;
pub mod monocheck;
pub mod netmodel;
pub mod relcore;
pub mod scenario;
pub mod simulator;
pub mod transducer;

pub use datalog::{builtin, eval_query, parse_program, Program, ProgramClass, Query, QueryError};
pub use relcore::{adom, Constant, Fact, Instance, RelSymbol, Schema};
