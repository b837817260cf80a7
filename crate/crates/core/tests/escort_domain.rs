use planverify_core::checker::verify;
use planverify_core::formats::parse_rules;
use planverify_core::par::Execution;
use planverify_core::plan::{scenario_p2_first, scenario_solution, EscortDomain};
use planverify_core::sweep::{verify_sequences, SequenceOutcome, SequenceSpace};
use planverify_oracle::escort::{self, Outcome};

const RULES: &str = include_str!("../../../fixtures/scenario_rules.toml");

#[test]
fn alphabets_coincide() {
    let d = EscortDomain::default();
    let core: Vec<String> = d
        .action_alphabet()
        .iter()
        .map(ToString::to_string)
        .collect();
    let oracle: Vec<String> = escort::alphabet().iter().map(escort::describe).collect();
    assert_eq!(core, oracle);
}

#[test]
fn short_sequences_agree_with_brute_force() {
    let d = EscortDomain::default();
    let rules = parse_rules(RULES).unwrap();
    let space = SequenceSpace::for_domain(&d, 5);
    assert_eq!(space.count(), escort::count_up_to(5));
    let got = verify_sequences(Execution::default(), &d, &space, &rules, 0).unwrap();
    for (k, outcome) in got.iter().enumerate() {
        let expected = match escort::judge(&escort::decode(k as u64)) {
            Outcome::Inapplicable => SequenceOutcome::Inapplicable,
            Outcome::Valid => SequenceOutcome::Valid,
            Outcome::Invalid => SequenceOutcome::Invalid,
        };
        assert_eq!(*outcome, expected, "sequence {k}");
    }
    assert!(got.iter().all(|o| *o != SequenceOutcome::Valid));
}

#[test]
fn scenario_plans() {
    let d = EscortDomain::default();
    let rules = parse_rules(RULES).unwrap();
    let ok = verify(
        &d.derive_trace(&d.plan(scenario_solution())).unwrap(),
        &rules,
        1,
    )
    .unwrap();
    assert!(ok.plan_valid);
    let bad = verify(
        &d.derive_trace(&d.plan(scenario_p2_first())).unwrap(),
        &rules,
        1,
    )
    .unwrap();
    assert!(!bad.plan_valid);
    let violated: Vec<&str> = bad
        .hard_violations()
        .map(|r| r.constraint_id.as_str())
        .collect();
    assert_eq!(violated, vec!["R4"]);
    assert_eq!(
        bad.result("R4").unwrap().verdict.unwrap().violation_index,
        Some(1)
    );
}
