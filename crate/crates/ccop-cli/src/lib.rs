//! Operator surface for the cardinality-constrained solver: instance
//! documents, seeded generators, machine-readable traces, and the
//! subcommand implementations behind the `ccop` binary.

pub mod cmd;
pub mod generate;
pub mod instance;
pub mod trace;
