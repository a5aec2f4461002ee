//! Deterministic simulation driver: scenario loading, key provisioning,
//! the broadcast and gathering phases, and run reports.

mod config;
mod keys;
pub mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{load_scenario, ConfigError, ScenarioConfig, DEFAULT_P, DEFAULT_RETRY_BOUND};
pub use keys::SeededKeys;
pub use trace::{emit_trace, EventKind, TraceEvent};

use crate::consensus::{
    run_broadcast_phase, run_gathering_phase, BroadcastList, GatheringList, Message, NodeId, Outcome, Route,
    SignatureRecord,
};
use trace::TraceLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ComplexityError {
    #[error("complexity needs 1 <= f <= n - 2, got n = {n}, f = {f}")]
    OutOfRange { n: usize, f: usize },
    #[error("complexity overflows 64 bits for n = {n}, f = {f}")]
    Overflow { n: usize, f: usize },
}

/// Number of QDS instances a retry-free run needs:
/// `sum_{m=0}^{f-1} P(n-1, 2+m)`, where `P(a, b) = a! / (a-b)!`.
pub fn complexity(n: usize, f: usize) -> Result<u64, ComplexityError> {
    if f < 1 || n < 2 || f > n - 2 {
        return Err(ComplexityError::OutOfRange { n, f });
    }
    let overflow = ComplexityError::Overflow { n, f };
    let a = (n - 1) as u64;
    let mut total = 0u64;
    for m in 0..f as u64 {
        let mut term = 1u64;
        for i in 0..m + 2 {
            term = term.checked_mul(a - i).ok_or(overflow)?;
        }
        total = total.checked_add(term).ok_or(overflow)?;
    }
    Ok(total)
}

/// Knobs that are not part of a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Accept every signature without checking it. Breaks the protocol on
    /// purpose; only meant for checking that audits notice.
    pub skip_verification: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeOutput {
    pub node: NodeId,
    pub honest: bool,
    pub initial_primary: bool,
    /// `None` when the run aborted.
    pub output: Option<Message>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub verdict: Outcome,
    pub outputs: Vec<NodeOutput>,
    pub qds_invocations: u64,
    /// Retry-free instance count for `(n, f)`, when defined.
    pub complexity: Option<u64>,
    pub retries: u64,
    pub forgery_attempts: u64,
    pub broadcast_lists: Vec<BroadcastList>,
    pub gathering_lists: Vec<GatheringList>,
    pub signatures: Vec<SignatureRecord>,
    pub trace: Vec<TraceEvent>,
}

impl RunReport {
    pub fn output_of(&self, node: NodeId) -> Option<&Message> {
        self.outputs.iter().find(|o| o.node == node)?.output.as_ref()
    }

    pub fn broadcast_list(&self, owner: NodeId, route: &Route) -> Option<&BroadcastList> {
        self.broadcast_lists.iter().find(|l| l.owner == owner && &l.route == route)
    }

    pub fn gathering_list(&self, owner: NodeId, route: &Route) -> Option<&GatheringList> {
        self.gathering_lists.iter().find(|l| l.owner == owner && &l.route == route)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn trace_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        emit_trace(&self.trace, &mut out).expect("writing to memory");
        out
    }
}

pub fn run(config: &ScenarioConfig) -> Result<RunReport, ConfigError> {
    run_with_options(config, &RunOptions::default())
}

/// Broadcasting, then gathering at every node from its own lists.
pub fn run_with_options(config: &ScenarioConfig, options: &RunOptions) -> Result<RunReport, ConfigError> {
    config.validate()?;
    let mut keys = SeededKeys::new(config.seed, config.p, config.retry_bound);
    let record = run_broadcast_phase(config, &mut keys, options).expect("validated configs have valid rounds");

    let root = Route::root(config.initial_primary);
    let mut log = TraceLog::from_events(record.trace);
    let mut outputs = Vec::with_capacity(config.n);
    let mut gathering_lists = Vec::new();
    let empty = Default::default();
    for node in config.players() {
        let initial_primary = node == config.initial_primary;
        let output = if !record.outcome.is_completed() {
            None
        } else if initial_primary {
            Some(config.honest_message.clone())
        } else {
            let lists = record.lists.get(&node).unwrap_or(&empty);
            let gathered = run_gathering_phase(node, lists, &root, config.f, &config.tie_order)
                .expect("completed runs leave every backup a full record");
            gathering_lists.extend(gathered.lists);
            Some(gathered.decision)
        };
        if let Some(decision) = &output {
            log.push(EventKind::Decision, &root, node, None, decision, None);
        }
        outputs.push(NodeOutput { node, honest: config.is_honest(node), initial_primary, output });
    }

    let broadcast_lists = record.lists.into_values().flat_map(|by_route| by_route.into_values()).collect();
    Ok(RunReport {
        config: config.clone(),
        verdict: record.outcome,
        outputs,
        qds_invocations: record.qds_invocations,
        complexity: complexity(config.n, config.f).ok(),
        retries: record.retries,
        forgery_attempts: record.forgery_attempts,
        broadcast_lists,
        gathering_lists,
        signatures: record.signatures,
        trace: log.into_events(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complexity_examples() {
        assert_eq!(complexity(3, 1), Ok(2));
        assert_eq!(complexity(5, 2), Ok(36));
        assert_eq!(complexity(7, 3), Ok(510));
        assert!(complexity(3, 2).is_err());
        assert!(complexity(3, 0).is_err());
    }
}
