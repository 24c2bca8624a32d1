//! Situational-context knowledge graphs built from personal data streams.

pub mod context;
pub mod ingest;
pub mod manifest;
pub mod pipeline;
pub mod populate;
pub mod report;
pub mod schema;
pub mod sequence;
pub mod store;
pub mod su;
pub mod synth;
pub mod time;
pub mod value;

pub use context::{classify_context, classify_event, validate_context, ContextClass, ContextInstance, EventClass};
pub use ingest::{parse_records, window_assign, StreamDescriptor, StreamRecord, WindowGroup, WindowSpec};
pub use manifest::RunManifest;
pub use pipeline::{run, RunOptions, RunSummary};
pub use populate::{build_contexts, resolve_entity, EntityRegistry, MappingRule, Populator};
pub use report::{Code, Finding, ValidationReport};
pub use schema::{parse_schema, EtgSchema};
pub use sequence::{build_sequence, detect_habits, select, ContextPredicate, Habit, HabitParams, LifeSequence};
pub use store::ContextStore;
pub use time::Timestamp;
