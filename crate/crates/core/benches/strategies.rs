use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use zql_core::plan::{build_dag, Engine, PlanDag, Strategy};
use zql_core::store::{AttributeCatalog, ColumnTable};
use zql_core::workload::{
    airline_table, benchmark_queries, chain_query, chain_table, ChainBenchSpec,
};
use zql_core::zql::{parse_query, validate};

fn plan(text: &str, t: &ColumnTable) -> PlanDag {
    let q = parse_query(text).unwrap();
    build_dag(&validate(&q, &AttributeCatalog::from_table(t)).unwrap()).unwrap()
}

/// Thread pool against the sequential loop on independent chains.
fn parallel_vs_sequential(c: &mut Criterion) {
    let spec = ChainBenchSpec {
        n_chains: 4,
        process_loops: 2,
        ..Default::default()
    };
    let t = chain_table(&spec, 200_000, 1);
    let dag = plan(&chain_query(&spec), &t);
    let mut g = c.benchmark_group("execution");
    for (label, on) in [("parallel", true), ("sequential", false)] {
        let engine = Engine::new(&t).with_parallelism(on);
        g.bench_function(label, |b| {
            b.iter(|| black_box(engine.run(&dag, Strategy::Parallel).unwrap()))
        });
    }
    g.finish();
}

fn strategies(c: &mut Criterion) {
    let t = airline_table(200_000, 2);
    let mut g = c.benchmark_group("strategies");
    g.sample_size(20);
    for (name, text, _, _) in benchmark_queries() {
        let dag = plan(text, &t);
        for s in Strategy::ALL {
            let engine = Engine::new(&t);
            g.bench_with_input(BenchmarkId::new(s.to_string(), name), &dag, |b, d| {
                b.iter(|| black_box(engine.run(d, s).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, parallel_vs_sequential, strategies);
criterion_main!(benches);
