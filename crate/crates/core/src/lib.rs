//! Discrete-time MILP scheduling of straight multiproduct pipelines with
//! multiple input nodes, dual-purpose nodes and depots.

pub mod builtin;
pub mod error;
pub mod instance;
pub mod milp;
pub mod oracle;
pub mod schedule;
pub mod solver;

pub use builtin::{builtin_instance, BuiltinName};
pub use instance::{load_instance, serialize_instance, validate_instance, PipelineInstance};
