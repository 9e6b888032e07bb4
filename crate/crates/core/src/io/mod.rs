//! Scenario files, snapshot persistence and the run driver.

mod kb;
mod run;
mod scenario;
pub mod snapshot;

pub use kb::{Failure, KnowledgeBase, Manifest, RunSummary, SnapshotEntry, MANIFEST_FILE};
pub use run::{run_simulation, run_table};
pub use scenario::{
    load_scenario, Generator, InitialState, Neighbors, Physics, Run, Scenario, GHOST_ATTRIBUTE,
};
