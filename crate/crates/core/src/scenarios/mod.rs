//! The published experiments as scenario specifications, and the scenario file
//! format.

pub mod builtin;
pub mod format;
pub mod spec;

pub use builtin::{builtin, builtin_names, builtin_text, BUILTINS};
pub use format::{build_spec, parse_scenario, parse_with_overrides, serialize_scenario, Entries};
pub use spec::{OrdinarySpec, ScenarioKind, ScenarioSpec, SolverSpec, TaggedSpec};
