//! Sequential versus rayon-backed execution of the hot loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmoney::codes::search_applicable_code_with;
use qmoney::gf2::{random_subspace, DEFAULT_MAX_ENUM_DIM};
use qmoney::labx::{attack_note, registry_for, AttackStrategy};
use qmoney::oracles::{MaskOracle, MembershipPredicate, PredicateKind};
use qmoney::statesim::{hadamard_all_with, DenseState};
use qmoney::{BitVec, Exec, Seed};
use std::hint::black_box;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn min_distance(c: &mut Criterion) {
    let mut g = c.benchmark_group("min_distance");
    let s = random_subspace(40, 20, Seed(7)).unwrap();
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::new(name, "n40_k20"), |b| {
            b.iter(|| black_box(s.min_distance_with(exec, DEFAULT_MAX_ENUM_DIM).unwrap()))
        });
    }
    g.finish();
}

fn hadamard(c: &mut Criterion) {
    let mut g = c.benchmark_group("hadamard_all");
    let st = DenseState::random(18, Seed(3)).unwrap();
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::new(name, "n18"), |b| {
            b.iter(|| black_box(hadamard_all_with(exec, &st)))
        });
    }
    g.finish();
}

fn search(c: &mut Criterion) {
    let mut g = c.benchmark_group("code_search");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::new(name, "n12_q1"), |b| {
            b.iter(|| black_box(search_applicable_code_with(exec, 12, 1, Seed(11), 10_000).unwrap()))
        });
    }
    g.finish();
}

fn predicate_mask(c: &mut Criterion) {
    let mut g = c.benchmark_group("predicate_mask");
    let spec = search_applicable_code_with(Exec::default(), 16, 1, Seed(5), 10_000).unwrap();
    let pred = MembershipPredicate::new(&spec, PredicateKind::SubsetPrimal).unwrap();
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::new(name, "n16"), |b| {
            b.iter(|| black_box(MaskOracle::from_oracle(&pred, exec)))
        });
    }
    g.finish();
}

fn attack_trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("attack_trials");
    g.sample_size(10);
    let spec = qmoney::reference::code_spec(1).unwrap();
    let reg = registry_for(&spec, Seed(1)).unwrap();
    let note = reg.mint_direct(&BitVec::zeros(6)).unwrap();
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::new(name, "measure_and_copy_1000"), |b| {
            b.iter(|| {
                black_box(attack_note(exec, &reg, &note, AttackStrategy::MeasureAndCopy, 1000, Seed(2)).unwrap())
            })
        });
    }
    g.finish();
}

criterion_group!(benches, min_distance, hadamard, search, predicate_mask, attack_trials);
criterion_main!(benches);
