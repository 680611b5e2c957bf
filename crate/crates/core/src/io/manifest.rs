use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = "mpdetect";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance of one CLI run, recorded as a comment line in every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub output: Option<String>,
    /// SHA-256 over the argument vector and the bytes of every input file.
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        argv: &[String],
        inputs: &[(String, Vec<u8>)],
        output: Option<String>,
        seed: Option<u64>,
    ) -> Self {
        let mut hasher = Sha256::new();
        for arg in argv {
            hasher.update((arg.len() as u64).to_le_bytes());
            hasher.update(arg.as_bytes());
        }
        for (_, bytes) in inputs {
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        }
        Self {
            tool_version: TOOL_VERSION.to_string(),
            subcommand: subcommand.to_string(),
            inputs: inputs.iter().map(|(p, _)| p.clone()).collect(),
            output,
            config_hash: hex::encode(hasher.finalize()),
            seed,
        }
    }

    /// Single `#`-prefixed line, without a trailing newline.
    pub fn comment_line(&self) -> String {
        let mut line = format!(
            "# {TOOL_NAME} {} subcommand={} config_sha256={}",
            self.tool_version, self.subcommand, self.config_hash
        );
        if let Some(seed) = self.seed {
            line.push_str(&format!(" seed={seed}"));
        }
        for input in &self.inputs {
            line.push_str(&format!(" input={input}"));
        }
        if let Some(out) = &self.output {
            line.push_str(&format!(" output={out}"));
        }
        line
    }
}
