//! Ground-truth ecosystem simulator: pages, posts, accrual curves and removals.

mod curve;
mod scenario;
mod split;
mod world;

pub use curve::{cumulative_at, AccrualCurve, LONG_RUN_HORIZON};
pub use scenario::{DelayParams, EngagementParams, PostingWindow, ScenarioConfig, ScenarioMode};
pub use split::split_counts;
pub use world::{
    assign_removals, generate_world, read_ground_truth, write_ground_truth, PostRecord,
    RemovalCause, RemovalEvent, World,
};
