use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use planverify_core::formats::parse_rules;
use planverify_core::par::Execution;
use planverify_core::plan::{scenario_p2_first, EscortDomain};
use planverify_core::sweep::{invalid_fraction, verify_sequences, SequenceSpace};

const RULES: &str = include_str!("../../../fixtures/scenario_rules.toml");

fn strategies() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn enumerate_sequences(c: &mut Criterion) {
    let domain = EscortDomain::default();
    let rules = parse_rules(RULES).expect("fixture parses");
    let space = SequenceSpace::for_domain(&domain, 5);
    let mut group = c.benchmark_group("enumerate_len5");
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| verify_sequences(exec, &domain, &space, &rules, 0).expect("valid rules"))
        });
    }
    group.finish();
}

fn seed_sweep(c: &mut Criterion) {
    let domain = EscortDomain::default();
    let mut rules = parse_rules(RULES).expect("fixture parses");
    rules[3].strictness = planverify_core::StrictnessWeight::new(0.5).expect("in range");
    let trace = domain
        .derive_trace(&domain.plan(scenario_p2_first()))
        .expect("applicable");
    let mut group = c.benchmark_group("seed_sweep_10k");
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| invalid_fraction(exec, &trace, &rules, 0..10_000).expect("valid rules"))
        });
    }
    group.finish();
}

criterion_group!(benches, enumerate_sequences, seed_sweep);
criterion_main!(benches);
