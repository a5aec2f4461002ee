use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::Strategy;
use crate::consensus::{Message, NodeId, Route, TieOrder};

pub const DEFAULT_RETRY_BOUND: usize = 8;
pub const DEFAULT_P: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }
}

/// Declarative description of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub f: usize,
    #[serde(default)]
    pub initial_primary: NodeId,
    #[serde(default)]
    pub dishonest: BTreeSet<NodeId>,
    pub honest_message: Message,
    /// Behaviour of dishonest nodes; a dishonest node without an entry
    /// behaves honestly.
    #[serde(default)]
    pub strategies: BTreeMap<NodeId, Strategy>,
    #[serde(default)]
    pub tie_order: TieOrder,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_retry_bound")]
    pub retry_bound: usize,
}

fn default_p() -> usize {
    DEFAULT_P
}

fn default_retry_bound() -> usize {
    DEFAULT_RETRY_BOUND
}

impl ScenarioConfig {
    /// An all-honest scenario with default parameters.
    pub fn honest(n: usize, f: usize, message: Message) -> Self {
        Self {
            n,
            f,
            initial_primary: NodeId(0),
            dishonest: BTreeSet::new(),
            honest_message: message,
            strategies: BTreeMap::new(),
            tie_order: TieOrder::Lexicographic,
            seed: 0,
            p: DEFAULT_P,
            retry_bound: DEFAULT_RETRY_BOUND,
        }
    }

    pub fn is_honest(&self, node: NodeId) -> bool {
        !self.dishonest.contains(&node)
    }

    pub fn players(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n).map(NodeId)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 {
            return Err(ConfigError::invalid("n", format!("need at least 2 players, got {}", self.n)));
        }
        if self.f < 1 || self.f > self.n - 1 {
            return Err(ConfigError::invalid("f", format!("f out of range: need 1 <= f <= {}, got {}", self.n - 1, self.f)));
        }
        if self.initial_primary.0 >= self.n {
            return Err(ConfigError::invalid("initial_primary", format!("node {} is not a player", self.initial_primary)));
        }
        if self.p < 2 {
            return Err(ConfigError::invalid("p", format!("security parameter must be at least 2, got {}", self.p)));
        }
        if self.honest_message.is_empty() {
            return Err(ConfigError::invalid("honest_message", "messages must be non-empty"));
        }
        if let TieOrder::Ranking(ranking) = &self.tie_order {
            let distinct: BTreeSet<&Message> = ranking.iter().collect();
            if distinct.len() != ranking.len() {
                return Err(ConfigError::invalid("tie_order", "ranking lists a message twice"));
            }
        }
        for node in &self.dishonest {
            if node.0 >= self.n {
                return Err(ConfigError::invalid("dishonest", format!("node {node} is not a player")));
            }
        }
        for (node, strategy) in &self.strategies {
            let path = format!("strategies.{node}");
            if !self.dishonest.contains(node) {
                return Err(ConfigError::invalid(path, "strategy given for a node not listed as dishonest"));
            }
            for (route, table) in &strategy.primary_table {
                let path = format!("{path}.primary_table.{route}");
                let backups = self.check_route(route, &path)?;
                if route.primary() != *node {
                    return Err(ConfigError::invalid(path, format!("node {node} is not the primary of this round")));
                }
                for (forwarder, message) in table {
                    if !backups.contains(forwarder) {
                        return Err(ConfigError::invalid(format!("{path}.{forwarder}"), "not a backup of this round"));
                    }
                    check_message(message, &format!("{path}.{forwarder}"))?;
                }
            }
            for (route, table) in &strategy.forward_table {
                let path = format!("{path}.forward_table.{route}");
                let backups = self.check_route(route, &path)?;
                if !backups.contains(node) {
                    return Err(ConfigError::invalid(path, format!("node {node} is not a backup of this round")));
                }
                for (verifier, message) in table {
                    if verifier == node || !backups.contains(verifier) {
                        return Err(ConfigError::invalid(format!("{path}.{verifier}"), "not a verifier of this round"));
                    }
                    check_message(message, &format!("{path}.{verifier}"))?;
                }
            }
        }
        Ok(())
    }

    /// Backups of the round named by `route`, if the round exists.
    fn check_route(&self, route: &Route, path: &str) -> Result<Vec<NodeId>, ConfigError> {
        if route.nodes().first() != Some(&self.initial_primary) {
            return Err(ConfigError::invalid(path, "route must start at the initial primary"));
        }
        if route.depth() > self.f {
            return Err(ConfigError::invalid(path, format!("route deeper than f = {}", self.f)));
        }
        if let Some(bad) = route.nodes().iter().find(|id| id.0 >= self.n) {
            return Err(ConfigError::invalid(path, format!("node {bad} is not a player")));
        }
        Ok(self.players().filter(|id| !route.contains(*id)).collect())
    }
}

fn check_message(message: &Message, path: &str) -> Result<(), ConfigError> {
    if message.is_empty() {
        return Err(ConfigError::invalid(path, "messages must be non-empty"));
    }
    Ok(())
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
