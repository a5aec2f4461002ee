//! Dishonest-node behaviour.
//!
//! Strategies are tables of message substitutions. A dishonest primary may
//! send each forwarder a different message; a dishonest forwarder may try to
//! relay something other than what it was given. Whether that works is not
//! up to the strategy: the engine signs and verifies every transfer for real,
//! so a substituted message only gets through when a dishonest primary
//! actually co-signs it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::consensus::{Message, NodeId, Route, TieOrder};
use crate::harness::ScenarioConfig;
use crate::qds::Signature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    #[default]
    Honest,
    /// Per-forwarder messages as primary; relays faithfully.
    Equivocate,
    /// Both tables; co-signs substitutions for dishonest forwarders.
    Collude,
    /// Same powers as `Collude`, for tables produced by search.
    CustomTable,
}

impl StrategyKind {
    fn uses_forward_table(self) -> bool {
        matches!(self, StrategyKind::Collude | StrategyKind::CustomTable)
    }

    fn co_signs(self) -> bool {
        matches!(self, StrategyKind::Collude | StrategyKind::CustomTable)
    }
}

/// `primary_table[route][forwarder]` is what the node sends as primary of
/// `route` to that forwarder; `forward_table[route][verifier]` is what it
/// relays as forwarder in `route` to that verifier. Missing entries fall back
/// to honest behaviour.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategy {
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub primary_table: BTreeMap<Route, BTreeMap<NodeId, Message>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub forward_table: BTreeMap<Route, BTreeMap<NodeId, Message>>,
    /// Keep sending the table message when asked to resend instead of
    /// falling back to the consistent one.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stubborn: bool,
}

impl Strategy {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn equivocate(route: Route, table: impl IntoIterator<Item = (NodeId, Message)>) -> Self {
        let mut strategy = Self { kind: StrategyKind::Equivocate, ..Self::default() };
        strategy.primary_table.insert(route, table.into_iter().collect());
        strategy
    }

    pub fn collude() -> Self {
        Self { kind: StrategyKind::Collude, ..Self::default() }
    }

    pub fn with_primary_entry(mut self, route: Route, forwarder: NodeId, message: Message) -> Self {
        self.primary_table.entry(route).or_default().insert(forwarder, message);
        self
    }

    pub fn with_forward_entry(mut self, route: Route, verifier: NodeId, message: Message) -> Self {
        self.forward_table.entry(route).or_default().insert(verifier, message);
        self
    }

    pub fn primary_entry(&self, route: &Route, forwarder: NodeId) -> Option<&Message> {
        self.primary_table.get(route)?.get(&forwarder)
    }

    pub fn forward_entry(&self, route: &Route, verifier: NodeId) -> Option<&Message> {
        if !self.kind.uses_forward_table() {
            return None;
        }
        self.forward_table.get(route)?.get(&verifier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Primary,
    Forwarder,
    Verifier,
}

/// What a node knows when it has to act in one QDS instance.
#[derive(Debug, Clone)]
pub struct AttackContext<'a> {
    pub route: &'a Route,
    pub depth: usize,
    pub role: Role,
    pub primary: NodeId,
    pub forwarder: NodeId,
    pub verifier: Option<NodeId>,
    /// 0 on the first try, incremented on every resend.
    pub attempt: usize,
    /// What an honest node in this role would send.
    pub consistent_message: &'a Message,
    /// Signed pairs the acting node has actually received in this instance.
    pub signed_messages_available: &'a [(Message, Signature)],
}

/// The message a primary hands to the forwarder of the current instance.
///
/// Honest: the consistent message. Dishonest: the table entry on the first
/// try (on every try when stubborn), otherwise the consistent message.
pub fn decide_primary_message(strategy: Option<&Strategy>, ctx: &AttackContext<'_>) -> Message {
    let Some(strategy) = strategy.filter(|s| s.kind != StrategyKind::Honest) else {
        return ctx.consistent_message.clone();
    };
    if ctx.attempt > 0 && !strategy.stubborn {
        return ctx.consistent_message.clone();
    }
    strategy
        .primary_entry(ctx.route, ctx.forwarder)
        .cloned()
        .unwrap_or_else(|| ctx.consistent_message.clone())
}

/// The message a colluding primary signs in place of its own for one
/// instance, if both ends of the instance are willing.
pub fn co_signed_message(
    primary: Option<&Strategy>,
    forwarder: Option<&Strategy>,
    ctx: &AttackContext<'_>,
) -> Option<Message> {
    let (primary, forwarder) = (primary?, forwarder?);
    if !primary.kind.co_signs() || ctx.attempt > 0 {
        return None;
    }
    forwarder.forward_entry(ctx.route, ctx.verifier?).cloned()
}

/// What a forwarder relays to the verifier, with the signature it attaches.
///
/// Honest forwarders relay the first pair they received. A dishonest
/// forwarder with a forward-table entry relays that message; when it holds
/// no signature for it, it reuses the one it has, which the verifier will
/// reject. On resends everyone relays faithfully.
pub fn decide_forwarded_message(strategy: Option<&Strategy>, ctx: &AttackContext<'_>) -> (Message, Signature) {
    let (received, sig) = ctx
        .signed_messages_available
        .first()
        .cloned()
        .expect("a forwarder always holds the pair it received");
    let desired = strategy
        .filter(|_| ctx.attempt == 0)
        .zip(ctx.verifier)
        .and_then(|(s, v)| s.forward_entry(ctx.route, v));
    match desired {
        None => (received, sig),
        Some(message) => ctx
            .signed_messages_available
            .iter()
            .find(|(m, _)| m == message)
            .cloned()
            .unwrap_or((message.clone(), sig)),
    }
}

/// The n = 2f attack: honest initial primary 0, dishonest lieutenants
/// `f..2f-1`. Dishonest primaries of inner rounds co-sign the attack message
/// for their dishonest forwarders, who relay it to every honest verifier.
/// The honest primary sends whichever of `m1`/`m2` loses ties under `order`.
pub fn scripted_attack_n_eq_2f(f: usize, order: TieOrder) -> ScenarioConfig {
    assert!(f >= 2, "the scripted attack needs f >= 2");
    let n = 2 * f;
    let (m1, m2) = (Message::from("m1"), Message::from("m2"));
    let (honest_message, attack) = match order.compare(&m1, &m2) {
        std::cmp::Ordering::Greater => (m1, m2),
        _ => (m2, m1),
    };
    let initial = NodeId(0);
    let dishonest: Vec<NodeId> = (f..n).map(NodeId).collect();
    let is_dishonest = |id: NodeId| dishonest.contains(&id);

    let mut strategies: BTreeMap<NodeId, Strategy> = dishonest.iter().map(|&id| (id, Strategy::collude())).collect();
    let rounds = crate::consensus::enumerate_rounds(n, f, initial).expect("valid parameters");
    for round in rounds.iter().filter(|r| r.depth() >= 2 && is_dishonest(r.primary)) {
        for &forwarder in round.backups.iter().filter(|&&b| is_dishonest(b)) {
            let strategy = strategies.get_mut(&forwarder).expect("dishonest node has a strategy");
            for &verifier in round.backups.iter().filter(|&&v| v != forwarder && !is_dishonest(v)) {
                strategy.forward_table.entry(round.route.clone()).or_default().insert(verifier, attack.clone());
            }
        }
        let strategy = strategies.get_mut(&round.primary).expect("dishonest node has a strategy");
        for &forwarder in round.backups.iter().filter(|&&b| is_dishonest(b)) {
            strategy.primary_table.entry(round.route.clone()).or_default().insert(forwarder, attack.clone());
        }
    }

    ScenarioConfig {
        n,
        f,
        initial_primary: initial,
        dishonest: dishonest.iter().copied().collect(),
        honest_message,
        strategies,
        tie_order: order,
        seed: 2024,
        p: 64,
        retry_bound: crate::harness::DEFAULT_RETRY_BOUND,
    }
}
