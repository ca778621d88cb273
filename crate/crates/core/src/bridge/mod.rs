//! Out-of-process predictors.
//!
//! The host starts the adapter as a child process and exchanges newline-delimited JSON
//! messages over its stdin and stdout. See `docs/protocol.md` for the message reference.

mod protocol;
mod session;

use std::time::Duration;

pub use protocol::{
    decode_prediction, DecodeError, Message, WireAgent, WireAgentPrediction, WireGrid, WireMixture,
    WirePoint, WirePrediction, WireScenario, PROTOCOL_VERSION,
};
pub use session::{Direction, ExternalPredictor};

use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("cannot start adapter: {0}")]
    Spawn(#[source] std::io::Error),
    #[error("no response during {stage} within {seconds} s; adapter killed")]
    Timeout { stage: &'static str, seconds: f64 },
    #[error("{detail}{}", if stderr.is_empty() { String::new() } else { format!("; stderr:\n{stderr}") })]
    ChildExited { detail: String, stderr: String },
    #[error("malformed message '{line}': {source}")]
    Json {
        line: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported protocol version {0} (expected {PROTOCOL_VERSION})")]
    Version(u32),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("adapter reported an error: {0}")]
    Adapter(String),
    #[error("invalid prediction: {0}")]
    Invalid(#[from] DecodeError),
    #[error("adapter is no longer running")]
    Dead,
    #[error("request {id}: {source}")]
    Request {
        id: u64,
        #[source]
        source: Box<BridgeError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeOptions {
    /// Per-request limit.
    pub timeout: Duration,
    pub handshake_timeout: Duration,
    pub record_transcript: bool,
}

impl BridgeError {
    /// The error without the request wrapper.
    pub fn root(&self) -> &BridgeError {
        match self {
            BridgeError::Request { source, .. } => source.root(),
            other => other,
        }
    }
}

impl Default for BridgeOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(10),
            handshake_timeout: Duration::from_secs(10),
            record_transcript: false,
        }
    }
}

/// Outcome of [`protocol_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub name: Option<String>,
    pub capabilities: Vec<String>,
    /// Representation returned for each probe scenario.
    pub representations: Vec<String>,
}

/// Handshakes with `command`, sends every probe scenario, validates the answers and shuts
/// the adapter down.
pub fn protocol_check(
    command: &str,
    options: BridgeOptions,
    probes: &[Scenario],
) -> Result<ProtocolReport, BridgeError> {
    let mut adapter = ExternalPredictor::spawn(command, options)?;
    let mut representations = Vec::new();
    for s in probes {
        let p = adapter.request(s)?;
        let kinds: std::collections::BTreeSet<&str> = p.agents.values().map(|a| a.kind()).collect();
        representations.push(kinds.into_iter().collect::<Vec<_>>().join("+"));
    }
    let report = ProtocolReport {
        name: adapter.name().map(str::to_string),
        capabilities: adapter.capabilities().to_vec(),
        representations,
    };
    adapter.shutdown()?;
    Ok(report)
}
