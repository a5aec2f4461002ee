mod common;

use common::{scenario, SHIPPED_SCENARIOS};
use qba_core::adversary::{scripted_attack_n_eq_2f, Strategy, StrategyKind};
use qba_core::consensus::{majority, Outcome};
use qba_core::harness::{run_with_options, ConfigError, EventKind, RunOptions};
use qba_core::{complexity, load_scenario, run, Message, NodeId, Route, ScenarioConfig, TieOrder};

fn m(s: &str) -> Message {
    Message::from(s)
}

fn route(s: &str) -> Route {
    s.parse().unwrap()
}

fn honest_lieutenant_outputs(report: &qba_core::RunReport) -> Vec<Message> {
    report
        .outputs
        .iter()
        .filter(|o| o.honest && !o.initial_primary)
        .map(|o| o.output.clone().unwrap())
        .collect()
}

#[test]
fn three_players_honest() {
    let config = scenario("fig6a");
    let report = run(&config).unwrap();
    assert_eq!(report.verdict, Outcome::Completed);
    for node in 0..3 {
        assert_eq!(report.output_of(NodeId(node)), Some(&m("m1")));
    }
    assert_eq!(report.qds_invocations, 2);
    assert_eq!(report.complexity, Some(2));
    assert_eq!(report.retries, 0);
}

#[test]
fn three_players_equivocating_primary() {
    let config = scenario("fig6b");
    let report = run(&config).unwrap();
    let delta = majority(&[m("m1"), m("m2")], &config.tie_order).unwrap();
    assert_eq!(honest_lieutenant_outputs(&report), vec![delta.clone(), delta]);
    // Each lieutenant's list holds what it got directly and what the other relayed.
    let list = report.broadcast_list(NodeId(1), &route("0")).unwrap();
    assert_eq!(list.from_source(NodeId(1)), Some(&m("m1")));
    assert_eq!(list.from_source(NodeId(2)), Some(&m("m2")));
}

#[test]
fn five_players_honest() {
    let config = scenario("fig6c-d");
    let report = run(&config).unwrap();
    assert_eq!(honest_lieutenant_outputs(&report), vec![m("m1"); 4]);
    assert_eq!(report.qds_invocations, 36);
    assert_eq!(report.complexity, Some(36));
}

#[test]
fn five_players_colluding_primary_and_lieutenant() {
    let config = scenario("fig6e-f");
    let report = run(&config).unwrap();
    let order = &config.tie_order;
    let delta1 = majority(&[m("m4_1"), m("m4_2"), m("m4_3")], order).unwrap();
    let delta2 = majority(&[m("m1"), m("m2"), m("m3"), delta1], order).unwrap();
    assert_eq!(honest_lieutenant_outputs(&report), vec![delta2; 3]);
    // Node 4's substitutions were co-signed by node 0, so they arrived.
    let list = report.broadcast_list(NodeId(1), &route("0")).unwrap();
    assert_eq!(list.from_source(NodeId(4)), Some(&m("m4_1")));
    assert_eq!(report.forgery_attempts, 0);
}

#[test]
fn retry_free_runs_match_the_complexity_formula() {
    for (n, f) in [(3, 1), (4, 1), (4, 2), (5, 1), (5, 2), (5, 3), (6, 2), (7, 3)] {
        let report = run(&ScenarioConfig { p: 32, ..ScenarioConfig::honest(n, f, m("m1")) }).unwrap();
        assert_eq!(report.retries, 0);
        assert_eq!(Some(report.qds_invocations), complexity(n, f).ok(), "n = {n}, f = {f}");
    }
}

#[test]
fn shipped_scenarios_are_deterministic() {
    for name in SHIPPED_SCENARIOS {
        let config = scenario(name);
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.to_json(), b.to_json(), "{name}");
        assert_eq!(a.trace_jsonl(), b.trace_jsonl(), "{name}");
    }
}

#[test]
fn seeds_change_signatures_but_not_decisions() {
    let config = scenario("fig6c-d");
    let a = run(&config).unwrap();
    let b = run(&ScenarioConfig { seed: config.seed + 1, ..config.clone() }).unwrap();
    assert_ne!(a.signatures, b.signatures);
    assert_eq!(a.outputs, b.outputs);
}

#[test]
fn explicit_honest_strategies_change_nothing() {
    let base = ScenarioConfig { seed: 9, ..ScenarioConfig::honest(5, 2, m("m1")) };
    let plain = run(&base).unwrap();
    let dishonest = [NodeId(1), NodeId(3)].into_iter().collect();
    let strategies = [(NodeId(1), Strategy::honest())].into_iter().collect();
    let labelled = run(&ScenarioConfig { dishonest, strategies, ..base.clone() }).unwrap();
    assert_eq!(plain.trace, labelled.trace);
    assert_eq!(plain.signatures, labelled.signatures);
    assert_eq!(plain.broadcast_lists, labelled.broadcast_lists);
    assert_eq!(
        plain.outputs.iter().map(|o| &o.output).collect::<Vec<_>>(),
        labelled.outputs.iter().map(|o| &o.output).collect::<Vec<_>>()
    );
}

#[test]
fn inconsistent_inner_primary_is_pulled_back_by_retries() {
    // Node 2 is primary of round 0>2 and first tells forwarder 1 "m2",
    // although it received "m1" in the root round.
    let mut config = ScenarioConfig { seed: 3, ..ScenarioConfig::honest(5, 2, m("m1")) };
    config.dishonest.insert(NodeId(2));
    config.strategies.insert(NodeId(2), Strategy::equivocate(route("0>2"), [(NodeId(1), m("m2"))]));
    let report = run(&config).unwrap();
    assert_eq!(report.verdict, Outcome::Completed);
    assert!(report.retries >= 1);
    assert_eq!(report.qds_invocations, 36 + report.retries);
    assert_eq!(report.broadcast_list(NodeId(1), &route("0>2")).unwrap().own(), Some(&m("m1")));
    let checks: Vec<_> = report
        .trace
        .iter()
        .filter(|e| e.kind == EventKind::ConsistencyCheck && e.route == route("0>2") && e.actor == NodeId(1))
        .collect();
    assert_eq!(checks.first().unwrap().verdict, Some(false));
    assert_eq!(checks.last().unwrap().verdict, Some(true));
    assert!(honest_lieutenant_outputs(&report).iter().all(|o| o == &m("m1")));
}

#[test]
fn forwarder_cannot_relay_what_an_honest_primary_never_signed() {
    let mut config = ScenarioConfig { seed: 4, ..ScenarioConfig::honest(5, 2, m("m1")) };
    config.dishonest.insert(NodeId(3));
    config.strategies.insert(
        NodeId(3),
        Strategy { kind: StrategyKind::Collude, ..Strategy::default() }
            .with_forward_entry(route("0"), NodeId(1), m("evil"))
            .with_forward_entry(route("0"), NodeId(2), m("evil")),
    );
    let report = run(&config).unwrap();
    assert_eq!(report.verdict, Outcome::Completed);
    assert_eq!(report.forgery_attempts, 2);
    assert_eq!(report.trace.iter().filter(|e| e.kind == EventKind::ForgeryAttempt).count(), 2);
    for verifier in [1, 2] {
        let list = report.broadcast_list(NodeId(verifier), &route("0")).unwrap();
        assert_eq!(list.from_source(NodeId(3)), Some(&m("m1")));
    }
    assert!(report.signatures.iter().filter(|s| s.accepted).all(|s| s.forwarded == s.signed));
    assert!(honest_lieutenant_outputs(&report).iter().all(|o| o == &m("m1")));
}

#[test]
fn stubborn_primary_exhausts_liveness() {
    let mut config = ScenarioConfig { seed: 5, retry_bound: 3, ..ScenarioConfig::honest(5, 2, m("m1")) };
    config.dishonest.insert(NodeId(2));
    let strategy = Strategy { stubborn: true, ..Strategy::equivocate(route("0>2"), [(NodeId(1), m("m2"))]) };
    config.strategies.insert(NodeId(2), strategy);
    let report = run(&config).unwrap();
    assert_eq!(
        report.verdict,
        Outcome::AbortedLiveness { route: route("0>2"), forwarder: NodeId(1), verifier: Some(NodeId(3)) }
    );
    assert!(report.outputs.iter().all(|o| o.output.is_none()));
}

#[test]
fn repeated_forgeries_exhaust_the_key_pool() {
    // Three verifiers, each needing a resend, against a pool of 3 + 1.
    let mut config = ScenarioConfig { seed: 6, retry_bound: 1, ..ScenarioConfig::honest(5, 1, m("m1")) };
    config.dishonest.insert(NodeId(1));
    let mut strategy = Strategy { kind: StrategyKind::Collude, ..Strategy::default() };
    for v in 2..5 {
        strategy = strategy.with_forward_entry(route("0"), NodeId(v), m("evil"));
    }
    config.strategies.insert(NodeId(1), strategy);
    let report = run(&config).unwrap();
    assert_eq!(report.verdict, Outcome::AbortedKeys { route: route("0"), forwarder: NodeId(1) });
}

#[test]
fn scripted_attack_breaks_two_f_players() {
    for f in [2, 3] {
        let config = scripted_attack_n_eq_2f(f, TieOrder::preferring(&m("m2")));
        let report = run(&config).unwrap();
        assert_eq!(report.output_of(NodeId(0)), Some(&m("m1")));
        let lieutenants = honest_lieutenant_outputs(&report);
        assert!(lieutenants.contains(&m("m2")), "f = {f}: {lieutenants:?}");
    }
    // With the labels' preference swapped the attack swaps them too.
    let config = scripted_attack_n_eq_2f(2, TieOrder::Lexicographic);
    assert_eq!(config.honest_message, m("m2"));
    let report = run(&config).unwrap();
    assert!(honest_lieutenant_outputs(&report).contains(&m("m1")));
}

#[test]
fn shipped_attack_fixture_is_the_generated_one() {
    assert_eq!(scenario("attack-n4f2"), scripted_attack_n_eq_2f(2, TieOrder::preferring(&m("m2"))));
}

#[test]
fn trace_is_ordered_and_complete() {
    let report = run(&scenario("fig6a")).unwrap();
    for (i, event) in report.trace.iter().enumerate() {
        assert_eq!(event.seq, i as u64);
        assert_eq!(event.depth, event.route.depth());
    }
    let kinds: Vec<EventKind> = report.trace.iter().map(|e| e.kind).collect();
    assert_eq!(kinds.iter().filter(|&&k| k == EventKind::Sign).count(), 2);
    assert_eq!(kinds.iter().filter(|&&k| k == EventKind::Decision).count(), 3);
    let text = String::from_utf8(report.trace_jsonl()).unwrap();
    assert_eq!(text.lines().count(), report.trace.len());
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(value["digest"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn reports_round_trip_through_json() {
    let report = run(&scenario("fig6e-f")).unwrap();
    let back: qba_core::RunReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn verification_switch_lets_forgeries_through() {
    let mut config = ScenarioConfig { seed: 7, ..ScenarioConfig::honest(3, 1, m("m1")) };
    config.dishonest.insert(NodeId(1));
    config.strategies.insert(
        NodeId(1),
        Strategy { kind: StrategyKind::Collude, ..Strategy::default() }.with_forward_entry(route("0"), NodeId(2), m("evil")),
    );
    let checked = run(&config).unwrap();
    assert_eq!(checked.broadcast_list(NodeId(2), &route("0")).unwrap().from_source(NodeId(1)), Some(&m("m1")));
    let unchecked = run_with_options(&config, &RunOptions { skip_verification: true }).unwrap();
    assert_eq!(unchecked.broadcast_list(NodeId(2), &route("0")).unwrap().from_source(NodeId(1)), Some(&m("evil")));
}

#[test]
fn config_errors_name_the_offending_field() {
    let err = |text: &str| match load_scenario(text) {
        Err(ConfigError::Invalid { path, .. }) => path,
        other => panic!("{other:?}"),
    };
    assert_eq!(err(r#"{"n": 3, "f": 3, "honest_message": "m1"}"#), "f");
    assert_eq!(err(r#"{"n": 3, "f": 1, "honest_message": ""}"#), "honest_message");
    assert_eq!(err(r#"{"n": 3, "f": 1, "honest_message": "m1", "dishonest": [7]}"#), "dishonest");
    assert_eq!(
        err(r#"{"n": 3, "f": 1, "honest_message": "m1", "dishonest": [0],
                "strategies": {"0": {"kind": "equivocate", "primary_table": {"0": {"0": "m2"}}}}}"#),
        "strategies.0.primary_table.0.0"
    );
    assert_eq!(
        err(r#"{"n": 3, "f": 1, "honest_message": "m1", "strategies": {"1": {"kind": "collude"}}}"#),
        "strategies.1"
    );
    assert!(matches!(load_scenario(r#"{"n": 3, "f": 1, "honest_message": "m1", "extra": 1}"#), Err(ConfigError::Parse(_))));
    assert!(matches!(load_scenario("not json"), Err(ConfigError::Parse(_))));
}
