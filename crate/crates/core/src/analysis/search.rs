use std::collections::{BTreeMap, BTreeSet};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ic::{audit_lemma1, check_ic, Condition, IcVerdict};
use crate::adversary::{scripted_attack_n_eq_2f, Strategy, StrategyKind};
use crate::consensus::{enumerate_rounds, Message, NodeId, Route, RoundSpec, TieOrder};
use crate::harness::{run, ScenarioConfig, DEFAULT_RETRY_BOUND};

/// Security parameter used for searched scenarios.
pub const SEARCH_P: usize = 64;
/// How many violating configs a report keeps in full.
pub const KEPT_VIOLATIONS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("invalid parameters: n = {n}, f = {f}")]
    InvalidParameters { n: usize, f: usize },
    #[error("the alphabet needs at least one distinct, non-empty message")]
    BadAlphabet,
}

/// Which scenario generators the search draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchFamily {
    /// Custom substitution tables over the alphabet for every corruption set
    /// of size at most f.
    pub tables: bool,
    /// The scripted n = 2f attack, evaluated first when n = 2f.
    pub scripted_attack: bool,
}

impl Default for SearchFamily {
    fn default() -> Self {
        Self { tables: true, scripted_attack: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Position in the search order.
    pub index: u64,
    pub config: ScenarioConfig,
    pub verdict: IcVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorstCaseReport {
    pub n: usize,
    pub f: usize,
    pub alphabet: Vec<Message>,
    pub seed: u64,
    pub budget: u64,
    /// Table assignments in the search space; `None` when it overflows.
    pub space_size: Option<u128>,
    pub explored: u64,
    pub exhaustive: bool,
    /// The space was larger than the budget, so it was sampled.
    pub budget_exhausted: bool,
    pub aborted: u64,
    /// Lemma 1 audit failures summed over every evaluated run.
    pub lemma1_violations: u64,
    pub violation_count: u64,
    /// The first few violations in search order.
    pub violations: Vec<Violation>,
    /// The most severe violation found, earliest first on ties.
    pub worst: Option<Violation>,
}

impl WorstCaseReport {
    pub fn found_violation(&self) -> bool {
        self.violation_count > 0
    }
}

/// One cell of a dishonest node's tables.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Point {
    Primary { node: NodeId, route: Route, forwarder: NodeId },
    Forward { node: NodeId, route: Route, verifier: NodeId },
}

struct Corruption {
    dishonest: BTreeSet<NodeId>,
    points: Vec<Point>,
    /// `|alphabet| * (|alphabet| + 1)^points`, saturating.
    size: u128,
}

fn decision_points(rounds: &[RoundSpec], dishonest: &BTreeSet<NodeId>) -> Vec<Point> {
    let mut points = Vec::new();
    for round in rounds {
        if dishonest.contains(&round.primary) {
            for &forwarder in &round.backups {
                points.push(Point::Primary { node: round.primary, route: round.route.clone(), forwarder });
            }
        }
        for &node in round.backups.iter().filter(|b| dishonest.contains(b)) {
            for &verifier in round.backups.iter().filter(|&&v| v != node) {
                points.push(Point::Forward { node, route: round.route.clone(), verifier });
            }
        }
    }
    points
}

/// Corruption sets of size at most `f`, smallest first, lexicographic
/// within a size.
fn corruption_sets(n: usize, f: usize) -> Vec<BTreeSet<NodeId>> {
    fn extend(start: usize, n: usize, size: usize, current: &mut Vec<NodeId>, out: &mut Vec<BTreeSet<NodeId>>) {
        if current.len() == size {
            out.push(current.iter().copied().collect());
            return;
        }
        for id in start..n {
            current.push(NodeId(id));
            extend(id + 1, n, size, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    for size in 0..=f {
        extend(0, n, size, &mut Vec::new(), &mut out);
    }
    out
}

fn build_config(
    n: usize,
    f: usize,
    honest_message: Message,
    corruption: &Corruption,
    choices: &[Option<Message>],
    seed: u64,
) -> ScenarioConfig {
    let mut strategies: BTreeMap<NodeId, Strategy> = corruption
        .dishonest
        .iter()
        .map(|&id| (id, Strategy { kind: StrategyKind::CustomTable, ..Strategy::default() }))
        .collect();
    for (point, choice) in corruption.points.iter().zip(choices) {
        let Some(message) = choice else { continue };
        match point {
            Point::Primary { node, route, forwarder } => {
                let s = strategies.get_mut(node).expect("point of a dishonest node");
                s.primary_table.entry(route.clone()).or_default().insert(*forwarder, message.clone());
            }
            Point::Forward { node, route, verifier } => {
                let s = strategies.get_mut(node).expect("point of a dishonest node");
                s.forward_table.entry(route.clone()).or_default().insert(*verifier, message.clone());
            }
        }
    }
    ScenarioConfig {
        n,
        f,
        initial_primary: NodeId(0),
        dishonest: corruption.dishonest.clone(),
        honest_message,
        strategies,
        tie_order: TieOrder::Lexicographic,
        seed,
        p: SEARCH_P,
        retry_bound: DEFAULT_RETRY_BOUND,
    }
}

enum Verdict {
    Clean,
    Aborted,
    Violated(IcVerdict),
}

struct Evaluation {
    verdict: Verdict,
    lemma1_violations: u64,
}

fn evaluate(config: &ScenarioConfig) -> Evaluation {
    let report = run(config).expect("generated scenarios are valid");
    let ic = check_ic(&report, config);
    let verdict = if ic.ic1 == Condition::Indeterminate {
        Verdict::Aborted
    } else if ic.is_violation() {
        Verdict::Violated(ic)
    } else {
        Verdict::Clean
    };
    Evaluation { verdict, lemma1_violations: audit_lemma1(&report).len() as u64 }
}

fn severity(verdict: &IcVerdict) -> usize {
    usize::from(verdict.ic1.is_violated()) + usize::from(verdict.ic2.is_violated())
}

struct Space {
    n: usize,
    f: usize,
    alphabet: Vec<Message>,
    corruptions: Vec<Corruption>,
    total: Option<u128>,
}

impl Space {
    fn new(n: usize, f: usize, alphabet: Vec<Message>) -> Result<Self, SearchError> {
        let rounds = enumerate_rounds(n, f, NodeId(0)).map_err(|_| SearchError::InvalidParameters { n, f })?;
        let radix = alphabet.len() as u128 + 1;
        let corruptions: Vec<Corruption> = corruption_sets(n, f)
            .into_iter()
            .map(|dishonest| {
                let points = decision_points(&rounds, &dishonest);
                let size = u32::try_from(points.len())
                    .ok()
                    .and_then(|k| radix.checked_pow(k))
                    .and_then(|s| s.checked_mul(alphabet.len() as u128))
                    .unwrap_or(u128::MAX);
                Corruption { dishonest, points, size }
            })
            .collect();
        let total = corruptions.iter().try_fold(0u128, |acc, c| {
            if c.size == u128::MAX {
                None
            } else {
                acc.checked_add(c.size)
            }
        });
        Ok(Self { n, f, alphabet, corruptions, total })
    }

    fn choice(&self, digit: u128) -> Option<Message> {
        (digit > 0).then(|| self.alphabet[digit as usize - 1].clone())
    }

    /// The `index`-th assignment in enumeration order.
    fn nth(&self, mut index: u128, seed: u64) -> ScenarioConfig {
        let corruption = self
            .corruptions
            .iter()
            .find(|c| {
                if index < c.size {
                    true
                } else {
                    index -= c.size;
                    false
                }
            })
            .expect("index inside the space");
        let k = self.alphabet.len() as u128;
        let honest = self.alphabet[(index % k) as usize].clone();
        index /= k;
        let choices: Vec<Option<Message>> = (0..corruption.points.len())
            .map(|_| {
                let digit = index % (k + 1);
                index /= k + 1;
                self.choice(digit)
            })
            .collect();
        build_config(self.n, self.f, honest, corruption, &choices, seed)
    }

    /// A uniformly chosen corruption set, then uniform table cells.
    fn sample(&self, rng: &mut ChaCha8Rng, seed: u64) -> ScenarioConfig {
        let corruption = &self.corruptions[rng.random_range(0..self.corruptions.len())];
        let honest = self.alphabet[rng.random_range(0..self.alphabet.len())].clone();
        let choices: Vec<Option<Message>> = (0..corruption.points.len())
            .map(|_| self.choice(rng.random_range(0..=self.alphabet.len() as u128)))
            .collect();
        build_config(self.n, self.f, honest, corruption, &choices, seed)
    }
}

/// Per-candidate randomness: stream `index` of a generator keyed by `seed`.
fn candidate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs adversarial scenarios from `family` and reports interactive
/// consistency violations.
///
/// The table space covers every corruption set of size at most `f` (the
/// initial primary is node 0), every honest message in `alphabet` and, for
/// each table cell, either a message from `alphabet` or honest behaviour.
/// It is enumerated when it fits in `budget`, otherwise `budget` points are
/// drawn from it with per-candidate streams of `seed`. Results do not
/// depend on how many threads evaluate them.
pub fn strategy_search(
    n: usize,
    f: usize,
    alphabet: &[Message],
    family: SearchFamily,
    budget: u64,
    seed: u64,
) -> Result<WorstCaseReport, SearchError> {
    let distinct: BTreeSet<&Message> = alphabet.iter().collect();
    if alphabet.is_empty() || distinct.len() != alphabet.len() || alphabet.iter().any(Message::is_empty) {
        return Err(SearchError::BadAlphabet);
    }
    let space = Space::new(n, f, alphabet.to_vec())?;

    let mut scripted = Vec::new();
    if family.scripted_attack && n == 2 * f && f >= 2 {
        scripted.push(scripted_attack_n_eq_2f(f, TieOrder::preferring(&Message::from("m2"))));
    }
    let remaining = budget.saturating_sub(scripted.len() as u64);
    let (table_count, exhaustive) = match (family.tables, space.total) {
        (false, _) => (0, true),
        (true, Some(total)) if total <= remaining as u128 => (total as u64, true),
        (true, _) => (remaining, false),
    };

    let offset = scripted.len() as u64;
    let evaluations: Vec<(u64, Option<ScenarioConfig>, Evaluation)> = scripted
        .into_iter()
        .enumerate()
        .map(|(i, config)| {
            let evaluation = evaluate(&config);
            (i as u64, Some(config), evaluation)
        })
        .chain(
            (0..table_count)
                .into_par_iter()
                .map(|i| {
                    let mut rng = candidate_rng(seed, i);
                    let run_seed: u64 = rng.random();
                    let config = if exhaustive { space.nth(i as u128, run_seed) } else { space.sample(&mut rng, run_seed) };
                    let evaluation = evaluate(&config);
                    // Only violating configs are kept; they are cheap to rebuild.
                    let keep = matches!(evaluation.verdict, Verdict::Violated(_)).then_some(config);
                    (offset + i, keep, evaluation)
                })
                .collect::<Vec<_>>(),
        )
        .collect();

    let mut report = WorstCaseReport {
        n,
        f,
        alphabet: alphabet.to_vec(),
        seed,
        budget,
        space_size: space.total,
        explored: evaluations.len() as u64,
        exhaustive,
        budget_exhausted: !exhaustive,
        aborted: 0,
        lemma1_violations: 0,
        violation_count: 0,
        violations: Vec::new(),
        worst: None,
    };
    for (index, config, evaluation) in evaluations {
        report.lemma1_violations += evaluation.lemma1_violations;
        match evaluation.verdict {
            Verdict::Clean => {}
            Verdict::Aborted => report.aborted += 1,
            Verdict::Violated(verdict) => {
                report.violation_count += 1;
                let violation = Violation { index, config: config.expect("violations keep their config"), verdict };
                if report.worst.as_ref().is_none_or(|w| severity(&violation.verdict) > severity(&w.verdict)) {
                    report.worst = Some(violation.clone());
                }
                if report.violations.len() < KEPT_VIOLATIONS {
                    report.violations.push(violation);
                }
            }
        }
    }
    Ok(report)
}
