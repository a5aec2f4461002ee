//! Protocol state: multicast rounds, broadcasting lists and the gathering
//! recursion that turns a node's lists into its final decision.
//!
//! A multicast round is named by its route, the ordered chain of primaries
//! that relayed the message to it. The round at route `[S]` is the initial
//! round; every backup `R` of a round at route `z` becomes the primary of the
//! child round `z > R`. Rounds stop at depth `f`.

mod broadcast;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use broadcast::{run_broadcast_phase, BroadcastRecord, Outcome, QdsService, SignatureRecord, SignerMaterial};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("majority of an empty list")]
    EmptyMajority,
    #[error("invalid parameters: n = {n}, f = {f} (need n >= 2 and 1 <= f <= n - 1)")]
    InvalidParameters { n: usize, f: usize },
    #[error("initial primary {0} is not a player")]
    UnknownPrimary(NodeId),
    #[error("node {node} has no complete broadcasting list for route {route}")]
    IncompleteRecord { node: NodeId, route: Route },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Delivery chain of a multicast round, starting at the initial primary.
/// Textual form joins node indices with `>`, e.g. `0>2>3`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Route(Vec<NodeId>);

impl Route {
    pub fn root(initial_primary: NodeId) -> Self {
        Self(vec![initial_primary])
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// The primary of the round this route names.
    pub fn primary(&self) -> NodeId {
        *self.0.last().expect("routes are never empty")
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.0.contains(&node)
    }

    pub fn child(&self, next: NodeId) -> Route {
        let mut nodes = self.0.clone();
        nodes.push(next);
        Route(nodes)
    }

    /// Route of the round in which this round's primary acted as forwarder.
    pub fn parent(&self) -> Option<Route> {
        (self.0.len() > 1).then(|| Route(self.0[..self.0.len() - 1].to_vec()))
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(">"))
    }
}

impl FromStr for Route {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let nodes = s
            .split('>')
            .map(|part| part.trim().parse::<usize>().map(NodeId).map_err(|_| format!("bad route segment {part:?} in {s:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = nodes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != nodes.len() {
            return Err(format!("route {s:?} repeats a node"));
        }
        Ok(Route(nodes))
    }
}

impl Serialize for Route {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Route {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// An opaque byte-string message of arbitrary length.
///
/// Serializes as a JSON string when the bytes are UTF-8, otherwise as
/// `{"hex": "..."}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Message(Vec<u8>);

impl Message {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Self(bytes.into())
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// SHA-256 of the message bytes, lowercase hex.
    pub fn digest_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(&self.0))
    }
}

impl From<&str> for Message {
    fn from(text: &str) -> Self {
        Self(text.as_bytes().to_vec())
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(text) => f.write_str(text),
            Err(_) => write!(f, "0x{}", hex::encode(&self.0)),
        }
    }
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Message({self})")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MessageRepr {
    Text(String),
    Hex {
        hex: String,
    },
}

impl Serialize for Message {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match std::str::from_utf8(&self.0) {
            Ok(text) => MessageRepr::Text(text.to_string()),
            Err(_) => MessageRepr::Hex { hex: hex::encode(&self.0) },
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Message {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match MessageRepr::deserialize(deserializer)? {
            MessageRepr::Text(text) => Ok(Self(text.into_bytes())),
            MessageRepr::Hex { hex } => hex::decode(hex.as_bytes())
                .map(Self)
                .map_err(|e| serde::de::Error::custom(format!("bad hex message: {e}"))),
        }
    }
}

/// Deterministic preference among equally frequent messages.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TieOrder {
    /// Smallest byte string wins.
    #[default]
    Lexicographic,
    /// Listed messages win in list order; unlisted ones rank after every
    /// listed one, lexicographically among themselves.
    Ranking(Vec<Message>),
}

impl TieOrder {
    /// `Less` means `a` is preferred over `b`.
    pub fn compare(&self, a: &Message, b: &Message) -> Ordering {
        match self {
            TieOrder::Lexicographic => a.cmp(b),
            TieOrder::Ranking(ranking) => {
                let rank = |m: &Message| ranking.iter().position(|r| r == m).unwrap_or(usize::MAX);
                rank(a).cmp(&rank(b)).then_with(|| a.cmp(b))
            }
        }
    }

    pub fn preferring(first: &Message) -> Self {
        TieOrder::Ranking(vec![first.clone()])
    }
}

impl Serialize for TieOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            TieOrder::Lexicographic => serializer.serialize_str("lexicographic"),
            TieOrder::Ranking(ranking) => ranking.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for TieOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Named(String),
            Ranking(Vec<Message>),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Named(name) if name == "lexicographic" => Ok(TieOrder::Lexicographic),
            Repr::Named(name) => Err(serde::de::Error::custom(format!(
                "unknown tie order {name:?}, expected \"lexicographic\" or a ranking list"
            ))),
            Repr::Ranking(ranking) => Ok(TieOrder::Ranking(ranking)),
        }
    }
}

/// Most frequent element; ties go to the candidate `order` prefers.
pub fn majority(elements: &[Message], order: &TieOrder) -> Result<Message, ProtocolError> {
    let mut counts: HashMap<&Message, usize> = HashMap::new();
    for m in elements {
        *counts.entry(m).or_default() += 1;
    }
    counts
        .into_iter()
        .min_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| order.compare(a, b)))
        .map(|(m, _)| m.clone())
        .ok_or(ProtocolError::EmptyMajority)
}

/// Consistency between the messages one player delivered in two adjacent
/// rounds: byte equality.
pub fn check_consistency(previous: &Message, current: &Message) -> bool {
    previous == current
}

/// One multicast round in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSpec {
    pub route: Route,
    pub primary: NodeId,
    /// Ascending.
    pub backups: Vec<NodeId>,
}

impl RoundSpec {
    pub fn depth(&self) -> usize {
        self.route.depth()
    }
}

/// All rounds of a run: depth-first, children in ascending backup order.
pub fn enumerate_rounds(n: usize, f: usize, initial_primary: NodeId) -> Result<Vec<RoundSpec>, ProtocolError> {
    if n < 2 || f < 1 || f > n - 1 {
        return Err(ProtocolError::InvalidParameters { n, f });
    }
    if initial_primary.0 >= n {
        return Err(ProtocolError::UnknownPrimary(initial_primary));
    }
    fn visit(route: Route, n: usize, f: usize, out: &mut Vec<RoundSpec>) {
        let backups: Vec<NodeId> = (0..n).map(NodeId).filter(|id| !route.contains(*id)).collect();
        out.push(RoundSpec { route: route.clone(), primary: route.primary(), backups: backups.clone() });
        if route.depth() < f {
            for b in backups {
                visit(route.child(b), n, f, out);
            }
        }
    }
    let mut rounds = Vec::new();
    visit(Route::root(initial_primary), n, f, &mut rounds);
    Ok(rounds)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastEntry {
    pub source: NodeId,
    pub message: Message,
}

/// Messages one backup recorded in one multicast round: the one it accepted
/// from the primary as forwarder (`source == owner`) and one from each other
/// backup's forwarder turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastList {
    pub owner: NodeId,
    pub route: Route,
    pub entries: Vec<BroadcastEntry>,
}

impl BroadcastList {
    pub fn new(owner: NodeId, route: Route) -> Self {
        Self { owner, route, entries: Vec::new() }
    }

    pub fn from_source(&self, source: NodeId) -> Option<&Message> {
        self.entries.iter().find(|e| e.source == source).map(|e| &e.message)
    }

    /// The message the owner accepted from the primary as forwarder.
    pub fn own(&self) -> Option<&Message> {
        self.from_source(self.owner)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatheringList {
    pub owner: NodeId,
    pub route: Route,
    pub elements: Vec<Message>,
}

/// Result of one node's gathering phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gathered {
    pub decision: Message,
    /// Depth-first in the same order as [`enumerate_rounds`].
    pub lists: Vec<GatheringList>,
}

/// Runs the gathering recursion for `node` from its own broadcasting lists.
///
/// `lists` maps each route in which `node` is a backup to its list there. At
/// depth `f` the gathering list is the broadcasting list; above it, the
/// element for backup `R_j` is the majority of the child list at `z > R_j`,
/// except the node's own slot, which holds the message it forwarded.
pub fn run_gathering_phase(
    node: NodeId,
    lists: &BTreeMap<Route, BroadcastList>,
    root: &Route,
    f: usize,
    order: &TieOrder,
) -> Result<Gathered, ProtocolError> {
    fn gather(
        node: NodeId,
        route: &Route,
        lists: &BTreeMap<Route, BroadcastList>,
        f: usize,
        order: &TieOrder,
        out: &mut Vec<GatheringList>,
    ) -> Result<Message, ProtocolError> {
        let incomplete = || ProtocolError::IncompleteRecord { node, route: route.clone() };
        let list = lists.get(route).ok_or_else(incomplete)?;
        let mut entries: Vec<&BroadcastEntry> = list.entries.iter().collect();
        entries.sort_by_key(|e| e.source);
        if entries.is_empty() || list.own().is_none() {
            return Err(incomplete());
        }
        let slot = out.len();
        out.push(GatheringList { owner: node, route: route.clone(), elements: Vec::new() });
        let elements = if route.depth() >= f {
            entries.iter().map(|e| e.message.clone()).collect()
        } else {
            let mut elements = Vec::with_capacity(entries.len());
            for entry in &entries {
                if entry.source == node {
                    elements.push(entry.message.clone());
                } else {
                    elements.push(gather(node, &route.child(entry.source), lists, f, order, out)?);
                }
            }
            elements
        };
        let decision = majority(&elements, order)?;
        out[slot].elements = elements;
        Ok(decision)
    }

    let mut out = Vec::new();
    let decision = gather(node, root, lists, f, order, &mut out)?;
    Ok(Gathered { decision, lists: out })
}
