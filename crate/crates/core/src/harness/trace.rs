use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::consensus::{Message, NodeId, Route};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Sign,
    Forward,
    Verify,
    Record,
    ConsistencyCheck,
    Retry,
    Decision,
    ForgeryAttempt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub depth: usize,
    pub route: Route,
    pub actor: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterpart: Option<NodeId>,
    /// SHA-256 of the message involved, lowercase hex.
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
}

/// Appends events with consecutive sequence numbers.
#[derive(Debug, Default)]
pub(crate) struct TraceLog {
    events: Vec<TraceEvent>,
}

impl TraceLog {
    pub(crate) fn push(
        &mut self,
        kind: EventKind,
        route: &Route,
        actor: NodeId,
        counterpart: Option<NodeId>,
        message: &Message,
        verdict: Option<bool>,
    ) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            seq,
            kind,
            depth: route.depth(),
            route: route.clone(),
            actor,
            counterpart,
            digest: message.digest_hex(),
            verdict,
        });
    }

    pub(crate) fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }

    pub(crate) fn from_events(events: Vec<TraceEvent>) -> Self {
        Self { events }
    }
}

/// Writes one JSON object per line, in sequence order.
pub fn emit_trace<W: Write>(events: &[TraceEvent], mut sink: W) -> io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut sink, event)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}
