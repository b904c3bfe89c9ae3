//! Sound worst-case end-to-end latency bounds for multi-rate cause-effect
//! task chains on multi-core fixed-priority-preemptive systems.
//!
//! The pipeline encodes all feasible schedules of a task set as a constraint
//! system over per-instance timing variables (activation, start, paused time,
//! finish) and maximizes the chain latency with branch-and-bound over integer
//! interval domains. A discrete-event simulator plus brute-force enumeration
//! serves as the verification oracle at desk scale.
//!
//! Modules follow the analysis pipeline:
//!
//! - [`model`]: task/system/chain types and input validation
//! - [`horizon`]: relevant-task closure, analysis window, instance counts
//! - [`encoding`]: translation into the constraint system
//! - [`engine`]: interval propagation and parallel branch-and-bound
//! - [`analysis`]: full / relaxed / decomposed analysis modes
//! - [`oracle`]: FPPS simulator and brute-force latency enumeration
//! - [`synth`]: seeded synthetic task-set generation

pub mod analysis;
pub mod encoding;
pub mod engine;
pub mod horizon;
pub mod model;
pub mod oracle;
pub mod synth;
