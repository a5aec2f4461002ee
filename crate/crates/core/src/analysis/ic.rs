use serde::{Deserialize, Serialize};

use crate::consensus::{enumerate_rounds, Message, NodeId, Route};
use crate::harness::{RunReport, ScenarioConfig};

/// Status of one interactive-consistency condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Holds,
    Violated,
    /// IC2 under a dishonest initial primary.
    NotApplicable,
    /// The run aborted, so no outputs exist.
    Indeterminate,
}

impl Condition {
    fn from_bool(holds: bool) -> Self {
        if holds {
            Condition::Holds
        } else {
            Condition::Violated
        }
    }

    pub fn is_violated(self) -> bool {
        self == Condition::Violated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub node: NodeId,
    pub output: Message,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcVerdict {
    /// All honest lieutenants output the same message.
    pub ic1: Condition,
    /// With an honest initial primary, they output its message.
    pub ic2: Condition,
    /// Every honest lieutenant's output when either condition is violated.
    pub witnesses: Vec<Witness>,
}

impl IcVerdict {
    pub fn is_violation(&self) -> bool {
        self.ic1.is_violated() || self.ic2.is_violated()
    }
}

pub fn check_ic(report: &RunReport, config: &ScenarioConfig) -> IcVerdict {
    if !report.verdict.is_completed() {
        return IcVerdict { ic1: Condition::Indeterminate, ic2: Condition::Indeterminate, witnesses: Vec::new() };
    }
    let lieutenants: Vec<Witness> = report
        .outputs
        .iter()
        .filter(|o| config.is_honest(o.node) && o.node != config.initial_primary)
        .map(|o| Witness { node: o.node, output: o.output.clone().expect("completed runs decide everywhere") })
        .collect();
    let ic1 = Condition::from_bool(lieutenants.windows(2).all(|w| w[0].output == w[1].output));
    let ic2 = if config.is_honest(config.initial_primary) {
        Condition::from_bool(lieutenants.iter().all(|w| w.output == config.honest_message))
    } else {
        Condition::NotApplicable
    };
    let witnesses = if ic1.is_violated() || ic2.is_violated() { lieutenants } else { Vec::new() };
    IcVerdict { ic1, ic2, witnesses }
}

/// An honest backup that took away a different message from a dishonest
/// backup's round than the honest primary above it multicast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lemma1Violation {
    /// Round with the honest primary.
    pub round: Route,
    pub dishonest_backup: NodeId,
    pub honest_backup: NodeId,
    pub expected: Message,
    pub found: Message,
}

/// For every round A with an honest primary, every dishonest backup B of A
/// and every honest backup C of the child round A>B: the message C accepted
/// as forwarder in A>B must equal what A's primary multicast in A. That is
/// the message C goes on to multicast as primary one level further down.
///
/// Rounds whose lists are missing (aborted runs) are skipped.
pub fn audit_lemma1(report: &RunReport) -> Vec<Lemma1Violation> {
    let config = &report.config;
    let Ok(rounds) = enumerate_rounds(config.n, config.f, config.initial_primary) else {
        return Vec::new();
    };
    let mut violations = Vec::new();
    for round in rounds.iter().filter(|r| r.depth() < config.f && config.is_honest(r.primary)) {
        let expected = match round.route.parent() {
            None => Some(&config.honest_message),
            Some(parent) => report.broadcast_list(round.primary, &parent).and_then(|l| l.own()),
        };
        let Some(expected) = expected else { continue };
        for &b in round.backups.iter().filter(|&&b| !config.is_honest(b)) {
            let child = round.route.child(b);
            for &c in round.backups.iter().filter(|&&c| c != b && config.is_honest(c)) {
                let Some(found) = report.broadcast_list(c, &child).and_then(|l| l.own()) else { continue };
                if found != expected {
                    violations.push(Lemma1Violation {
                        round: round.route.clone(),
                        dishonest_backup: b,
                        honest_backup: c,
                        expected: expected.clone(),
                        found: found.clone(),
                    });
                }
            }
        }
    }
    violations
}

/// An accepted transfer whose relayed message is not the one its signer
/// signed in that instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsignedDelivery {
    pub route: Route,
    pub signer: NodeId,
    pub forwarder: NodeId,
    pub verifier: NodeId,
    pub signed: Message,
    pub forwarded: Message,
}

/// Checks the signature ledger: everything an honest verifier accepted was
/// signed by the round's primary, so dishonest forwarders can only pass on
/// what an honest primary signed or a dishonest primary co-signed.
pub fn audit_collusion_locality(report: &RunReport) -> Vec<UnsignedDelivery> {
    report
        .signatures
        .iter()
        .filter(|r| r.accepted && report.config.is_honest(r.verifier) && r.forwarded != r.signed)
        .map(|r| UnsignedDelivery {
            route: r.route.clone(),
            signer: r.signer,
            forwarder: r.forwarder,
            verifier: r.verifier,
            signed: r.signed.clone(),
            forwarded: r.forwarded.clone(),
        })
        .collect()
}
