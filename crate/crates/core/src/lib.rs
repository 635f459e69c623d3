//! Ground-truth simulator of a page/post ecosystem with periodic observation
//! crawls, and the analysis pipeline that infers removals from those crawls
//! and estimates how much engagement each removal prevented.

pub mod crawl;
pub mod error;
pub mod inference;
mod meta;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod time;
pub mod validation;

pub use error::{Error, Result};
pub use meta::RunMeta;

pub const TOOL_NAME: &str = "takedown";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
