use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_consistency, enumerate_rounds, BroadcastEntry, BroadcastList, Message, NodeId, ProtocolError, Route, RoundSpec};
use crate::adversary::{
    co_signed_message, decide_forwarded_message, decide_primary_message, AttackContext, Role, Strategy, StrategyKind,
};
use crate::harness::trace::{EventKind, TraceEvent, TraceLog};
use crate::harness::{RunOptions, ScenarioConfig};
use crate::qds::{self, Signature, ThreePartyKeys};

/// Keys and signing randomness for one QDS instance.
pub struct SignerMaterial {
    pub keys: ThreePartyKeys,
    pub signing_rng: ChaCha8Rng,
}

/// Supplies a fresh key bundle for every QDS instance the engine runs.
pub trait QdsService {
    /// Called before each forwarder turn with the number of instances the
    /// turn needs when nothing is resent.
    fn begin_turn(&mut self, route: &Route, forwarder: NodeId, scheduled: usize);

    /// `None` when the turn's supply is used up.
    fn bundle(&mut self, route: &Route, forwarder: NodeId, verifier: NodeId, attempt: usize) -> Option<SignerMaterial>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    /// A transfer was still failing after the retry bound.
    AbortedLiveness { route: Route, forwarder: NodeId, verifier: Option<NodeId> },
    /// A forwarder turn ran out of key bundles.
    AbortedKeys { route: Route, forwarder: NodeId },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }
}

/// One signing operation and what became of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureRecord {
    pub route: Route,
    pub signer: NodeId,
    pub forwarder: NodeId,
    pub verifier: NodeId,
    pub attempt: usize,
    pub signed: Message,
    pub signature: Signature,
    /// What the forwarder handed the verifier.
    pub forwarded: Message,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct BroadcastRecord {
    /// `lists[node][route]`.
    pub lists: BTreeMap<NodeId, BTreeMap<Route, BroadcastList>>,
    pub signatures: Vec<SignatureRecord>,
    pub trace: Vec<TraceEvent>,
    pub qds_invocations: u64,
    pub retries: u64,
    pub forgery_attempts: u64,
    pub outcome: Outcome,
}

/// Runs every multicast round in canonical order: rounds depth-first as
/// listed by [`enumerate_rounds`], forwarder turns in ascending id, and
/// within a turn one QDS instance per verifier in ascending id.
pub fn run_broadcast_phase(
    config: &ScenarioConfig,
    qds: &mut dyn QdsService,
    options: &RunOptions,
) -> Result<BroadcastRecord, ProtocolError> {
    let rounds = enumerate_rounds(config.n, config.f, config.initial_primary)?;
    let mut engine = Engine {
        config,
        qds,
        options,
        lists: BTreeMap::new(),
        log: TraceLog::default(),
        signatures: Vec::new(),
        qds_invocations: 0,
        retries: 0,
        forgery_attempts: 0,
    };
    let mut outcome = Outcome::Completed;
    'rounds: for round in &rounds {
        for &forwarder in &round.backups {
            if let Err(abort) = engine.forwarder_turn(round, forwarder) {
                outcome = abort;
                break 'rounds;
            }
        }
    }
    Ok(BroadcastRecord {
        lists: engine.lists,
        signatures: engine.signatures,
        trace: engine.log.into_events(),
        qds_invocations: engine.qds_invocations,
        retries: engine.retries,
        forgery_attempts: engine.forgery_attempts,
        outcome,
    })
}

struct Engine<'a> {
    config: &'a ScenarioConfig,
    qds: &'a mut dyn QdsService,
    options: &'a RunOptions,
    lists: BTreeMap<NodeId, BTreeMap<Route, BroadcastList>>,
    log: TraceLog,
    signatures: Vec<SignatureRecord>,
    qds_invocations: u64,
    retries: u64,
    forgery_attempts: u64,
}

impl Engine<'_> {
    /// The strategy a node actually follows; `None` means honest behaviour.
    fn strategy(&self, node: NodeId) -> Option<&Strategy> {
        if self.config.dishonest.contains(&node) {
            self.config.strategies.get(&node).filter(|s| s.kind != StrategyKind::Honest)
        } else {
            None
        }
    }

    /// Honest, or labelled dishonest but without a deviating strategy.
    fn is_honest(&self, node: NodeId) -> bool {
        self.strategy(node).is_none()
    }

    fn parent_entry(&self, node: NodeId, route: &Route, source: NodeId) -> Option<&Message> {
        let parent = route.parent()?;
        self.lists.get(&node)?.get(&parent)?.from_source(source)
    }

    /// What an honest primary of `round` would send to `forwarder`: the
    /// initial message at depth 1, otherwise what it accepted as forwarder
    /// in the parent round. A dishonest primary facing an honest forwarder
    /// is held to what that forwarder got from it in the parent round.
    fn consistent_message(&self, round: &RoundSpec, forwarder: NodeId) -> Message {
        let primary = round.primary;
        if round.depth() == 1 {
            return self.config.honest_message.clone();
        }
        let holder = if self.is_honest(primary) || !self.is_honest(forwarder) { primary } else { forwarder };
        self.parent_entry(holder, &round.route, primary)
            .cloned()
            .expect("parent round completed before its children")
    }

    fn record(&mut self, owner: NodeId, route: &Route, source: NodeId, message: Message) {
        self.lists
            .entry(owner)
            .or_default()
            .entry(route.clone())
            .or_insert_with(|| BroadcastList::new(owner, route.clone()))
            .entries
            .push(BroadcastEntry { source, message });
    }

    fn verify(&self, message: &Message, sig: &Signature, keys: &qds::CombinedKeys) -> bool {
        self.options.skip_verification || qds::verify(message.bytes(), sig, keys)
    }

    fn forwarder_turn(&mut self, round: &RoundSpec, forwarder: NodeId) -> Result<(), Outcome> {
        let route = &round.route;
        let primary = round.primary;
        let verifiers: Vec<NodeId> = round.backups.iter().copied().filter(|&v| v != forwarder).collect();
        let consistent = self.consistent_message(round, forwarder);
        let forwarder_honest = self.is_honest(forwarder);
        // what an honest forwarder holds the primary to
        let mut expectation: Option<Message> = if forwarder_honest && round.depth() > 1 {
            self.parent_entry(forwarder, route, primary).cloned()
        } else {
            None
        };
        let primary_strategy = self.strategy(primary).cloned();
        let forwarder_strategy = self.strategy(forwarder).cloned();
        let mut turn_retries = 0usize;
        let mut own_recorded = false;
        let liveness = |verifier| Outcome::AbortedLiveness { route: route.clone(), forwarder, verifier };

        self.qds.begin_turn(route, forwarder, verifiers.len());

        if verifiers.is_empty() {
            // a lone backup: nothing to relay, so the message is handed over
            // without a signature
            for attempt in 0.. {
                if attempt > self.config.retry_bound {
                    return Err(liveness(None));
                }
                let ctx = AttackContext {
                    route,
                    depth: round.depth(),
                    role: Role::Primary,
                    primary,
                    forwarder,
                    verifier: None,
                    attempt: turn_retries,
                    consistent_message: &consistent,
                    signed_messages_available: &[],
                };
                let message = decide_primary_message(primary_strategy.as_ref(), &ctx);
                if let Some(expected) = &expectation {
                    let ok = check_consistency(expected, &message);
                    self.log.push(EventKind::ConsistencyCheck, route, forwarder, Some(primary), &message, Some(ok));
                    if !ok {
                        self.retries += 1;
                        turn_retries += 1;
                        self.log.push(EventKind::Retry, route, forwarder, Some(primary), &message, None);
                        continue;
                    }
                }
                self.log.push(EventKind::Record, route, forwarder, Some(primary), &message, None);
                self.record(forwarder, route, forwarder, message);
                return Ok(());
            }
            unreachable!("attempt loop exits through return");
        }

        for &verifier in &verifiers {
            let mut attempt = 0usize;
            loop {
                if attempt > self.config.retry_bound {
                    return Err(liveness(Some(verifier)));
                }
                let material = self
                    .qds
                    .bundle(route, forwarder, verifier, attempt)
                    .ok_or_else(|| Outcome::AbortedKeys { route: route.clone(), forwarder })?;
                let SignerMaterial { mut keys, mut signing_rng } = material;
                let combined = keys.combined();

                let mut ctx = AttackContext {
                    route,
                    depth: round.depth(),
                    role: Role::Primary,
                    primary,
                    forwarder,
                    verifier: Some(verifier),
                    attempt: turn_retries,
                    consistent_message: &consistent,
                    signed_messages_available: &[],
                };
                let intended = decide_primary_message(primary_strategy.as_ref(), &ctx);
                ctx.attempt = attempt;
                let signed = co_signed_message(primary_strategy.as_ref(), forwarder_strategy.as_ref(), &ctx)
                    .unwrap_or_else(|| intended.clone());
                let sig = qds::sign(signed.bytes(), &mut keys, &mut signing_rng)
                    .expect("fresh bundle and non-empty message");
                self.qds_invocations += 1;
                self.log.push(EventKind::Sign, route, primary, Some(forwarder), &signed, None);

                if forwarder_honest {
                    if let Some(expected) = &expectation {
                        let ok = check_consistency(expected, &signed);
                        self.log.push(EventKind::ConsistencyCheck, route, forwarder, Some(primary), &signed, Some(ok));
                        if !ok {
                            self.retries += 1;
                            turn_retries += 1;
                            attempt += 1;
                            self.log.push(EventKind::Retry, route, forwarder, Some(primary), &signed, None);
                            continue;
                        }
                    }
                }

                let available = [(signed.clone(), sig.clone())];
                let forward_ctx = AttackContext { role: Role::Forwarder, signed_messages_available: &available, ..ctx };
                let (forwarded, forwarded_sig) = decide_forwarded_message(forwarder_strategy.as_ref(), &forward_ctx);
                if forwarded != signed {
                    self.forgery_attempts += 1;
                    self.log.push(EventKind::ForgeryAttempt, route, forwarder, Some(verifier), &forwarded, None);
                }
                self.log.push(EventKind::Forward, route, forwarder, Some(verifier), &forwarded, None);

                let forwarder_ok = self.verify(&signed, &sig, &combined);
                self.log.push(EventKind::Verify, route, forwarder, Some(primary), &signed, Some(forwarder_ok));
                let verifier_ok = self.verify(&forwarded, &forwarded_sig, &combined);
                self.log.push(EventKind::Verify, route, verifier, Some(forwarder), &forwarded, Some(verifier_ok));
                let accepted = forwarder_ok && verifier_ok;
                self.signatures.push(SignatureRecord {
                    route: route.clone(),
                    signer: primary,
                    forwarder,
                    verifier,
                    attempt,
                    signed: signed.clone(),
                    signature: sig,
                    forwarded: forwarded.clone(),
                    accepted,
                });
                if !accepted {
                    self.retries += 1;
                    attempt += 1;
                    self.log.push(EventKind::Retry, route, verifier, Some(forwarder), &forwarded, None);
                    continue;
                }

                if !own_recorded {
                    own_recorded = true;
                    self.log.push(EventKind::Record, route, forwarder, Some(primary), &intended, None);
                    self.record(forwarder, route, forwarder, intended.clone());
                    if forwarder_honest && expectation.is_none() {
                        expectation = Some(intended);
                    }
                }
                self.log.push(EventKind::Record, route, verifier, Some(forwarder), &forwarded, None);
                self.record(verifier, route, forwarder, forwarded);
                break;
            }
        }
        Ok(())
    }
}
