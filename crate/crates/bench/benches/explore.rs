use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use resilex_bench::fixture;
use resilex_core::catalog::TechniqueCatalog;
use resilex_core::eval::{evaluate, ProtectionPlan};
use resilex_core::explore::{enumerate_combinations, selective_protect, RuleSet, Strategy, Target};
use resilex_core::parity::{enforce_min_spacing, group_optimized};
use resilex_core::sim::{builtin, Injector, SampleOptions, SimConfig};
use std::hint::black_box;

fn bench_evaluate(c: &mut Criterion) {
    let cat = TechniqueCatalog::default();
    let mut g = c.benchmark_group("evaluate");
    for n in [250, 1250] {
        let (d, p) = fixture(n, 1);
        let mut plan = ProtectionPlan::empty();
        for f in d.flip_flops.iter().step_by(3) {
            plan.per_ff.insert(f.id, "LEAP-DICE".into());
        }
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| evaluate(&p, black_box(&plan), &cat, &d).unwrap())
        });
    }
    g.finish();
}

fn bench_selective(c: &mut Criterion) {
    let cat = TechniqueCatalog::default();
    let (d, p) = fixture(1250, 2);
    let mut g = c.benchmark_group("selective");
    g.sample_size(20);
    for s in ["leap-dice", "eds+ir", "h1+flush"] {
        let strategy: Strategy = s.parse().unwrap();
        g.bench_function(s, |b| {
            b.iter(|| selective_protect(&p, &d, &cat, Target::sdc(50.0), &strategy, Default::default()).unwrap())
        });
    }
    g.finish();
}

fn bench_enumerate(c: &mut Criterion) {
    let cat = TechniqueCatalog::default();
    let rules = RuleSet::default_rules();
    c.bench_function("enumerate", |b| b.iter(|| enumerate_combinations(&cat, black_box(&rules)).unwrap()));
}

fn bench_parity(c: &mut Criterion) {
    let (d, _) = fixture(1250, 3);
    let spec = TechniqueCatalog::default().parity;
    c.bench_function("parity_repair_1250", |b| {
        b.iter(|| enforce_min_spacing(group_optimized(&d.flip_flops, &spec), &d.flip_flops).unwrap())
    });
}

fn bench_campaign(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let p = builtin("sort").unwrap();
    let inj = Injector::new(&p, &cfg).unwrap();
    let table = inj.outcome_table(&cfg).unwrap();
    let mut g = c.benchmark_group("campaign");
    g.sample_size(10);
    g.bench_function("outcome_table_sort", |b| b.iter(|| inj.outcome_table(&cfg).unwrap()));
    g.bench_function("table_sample_100k", |b| b.iter(|| table.sample(100_000, 7, &SampleOptions::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_evaluate, bench_selective, bench_enumerate, bench_parity, bench_campaign);
criterion_main!(benches);
