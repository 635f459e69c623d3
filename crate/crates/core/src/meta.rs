use serde::{Deserialize, Serialize};

/// Provenance stamped on every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub seed: u64,
}

impl RunMeta {
    pub fn new(seed: u64) -> Self {
        Self {
            tool: crate::TOOL_NAME.to_string(),
            version: crate::VERSION.to_string(),
            seed,
        }
    }

    /// Text of the leading `#` line in CSV outputs.
    pub fn preamble(&self) -> String {
        format!("{} {} seed={}", self.tool, self.version, self.seed)
    }
}
