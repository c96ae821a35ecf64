//! Topic-based message bus: envelopes, framing, the two-dialect bridge,
//! latency injection and joint command rate limiting.
//!
//! Payloads are JSON values. Dialect B is the canonical naming used inside
//! the framework; dialect A is the foreign naming that only exists on the
//! far side of the bridge (see [`bridge`]).

pub mod bridge;
pub mod codec;
mod hub;
pub mod latency;
pub mod rate_limit;
pub mod schema;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use bridge::{bridge_translate, standard_rules, BridgeRule, Conversion, FieldMap};
pub use codec::{decode_frame, encode_frame, Decoded, FrameReader, MAX_FRAME_LEN};
pub use hub::{Hub, Subscription};
pub use latency::{LatencyConfig, LatencyQueue};
pub use rate_limit::rate_limit_joint_cmd;

pub const RAW_INPUT: &str = "/raw_input";
pub const TARGET_POSE: &str = "/target_pose";
pub const JOINT_STATES: &str = "/joint_states";
pub const GRIPPER_CMD: &str = "/gripper_cmd";
pub const WORLD_STATE: &str = "/world_state";
pub const EVENTS: &str = "/events";
pub const HANDSHAKE: &str = "/handshake";

pub const TOPICS: [&str; 7] = [
    RAW_INPUT,
    TARGET_POSE,
    JOINT_STATES,
    GRIPPER_CMD,
    WORLD_STATE,
    EVENTS,
    HANDSHAKE,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dialect {
    A,
    B,
}

impl Dialect {
    pub fn other(self) -> Self {
        match self {
            Dialect::A => Dialect::B,
            Dialect::B => Dialect::A,
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::A => "A",
            Dialect::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub topic: String,
    pub dialect: Dialect,
    /// Name of the publishing endpoint; sequence numbers are per
    /// (publisher, topic).
    pub publisher: String,
    pub seq: u64,
    pub timestamp: f64,
    pub payload: Value,
}

impl Envelope {
    /// Dialect-B envelope around a typed payload.
    pub fn new<T: Serialize>(
        topic: &str,
        publisher: &str,
        seq: u64,
        timestamp: f64,
        payload: &T,
    ) -> Self {
        Self {
            topic: topic.to_string(),
            dialect: Dialect::B,
            publisher: publisher.to_string(),
            seq,
            timestamp,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BusError {
    #[error("truncated frame: {0}")]
    Truncated(String),
    #[error("frame declares {declared} payload bytes but {actual} follow")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("frame length {0} exceeds the limit")]
    FrameTooLarge(usize),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unknown topic schema '{0}'")]
    UnknownTopic(String),
    #[error("payload on {topic} fails its schema: {message}")]
    Schema { topic: String, message: String },
    #[error("no bridge rule for topic '{0}'")]
    MissingRule(String),
    #[error("field '{field}' on {topic} has no bridge mapping")]
    UnmappedField { topic: String, field: String },
    #[error("bridge rule for {topic} is not a bijection: '{field}' appears twice")]
    NotBijective { topic: String, field: String },
    #[error("sequence {seq} from {publisher} on {topic} does not follow {last}")]
    SequenceRegression {
        publisher: String,
        topic: String,
        seq: u64,
        last: u64,
    },
    #[error("dt must be > 0, got {0}")]
    NonPositiveDt(f64),
    #[error("joint vectors differ in length: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid latency config: {0}")]
    Latency(String),
}

/// Per-(publisher, topic) sequence counter for outgoing envelopes.
#[derive(Debug, Default, Clone)]
pub struct SeqCounter {
    next: std::collections::HashMap<String, u64>,
}

impl SeqCounter {
    pub fn next(&mut self, topic: &str) -> u64 {
        let n = self.next.entry(topic.to_string()).or_insert(0);
        *n += 1;
        *n
    }
}
