use std::collections::{BTreeMap, BTreeSet};

use zql_core::plan::*;
use zql_core::store::{
    AggFn, AggregateRequest, AttributeCatalog, Cardinalities, Column, ColumnKind, ColumnTable,
    DimensionKind, Predicate,
};
use zql_core::workload::*;
use zql_core::zql::{parse_query, validate};

fn dag(text: &str, t: &ColumnTable) -> PlanDag {
    let q = parse_query(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let v =
        validate(&q, &AttributeCatalog::from_table(t)).unwrap_or_else(|e| panic!("{e}\n{text}"));
    build_dag(&v).unwrap()
}

fn doc(name: &str) -> String {
    doc_queries().into_iter().find(|q| q.0 == name).unwrap().1
}

fn run_all(d: &PlanDag, t: &ColumnTable) -> Vec<(ResultSet, ExecutionTrace)> {
    Strategy::ALL
        .iter()
        .map(|&s| {
            Engine::new(t)
                .run(d, s)
                .unwrap_or_else(|e| panic!("{s}: {e}"))
        })
        .collect()
}

fn small_sales() -> ColumnTable {
    sales_table(20, 20_000, 4)
}

#[test]
fn real2_dag_matches_the_published_plan() {
    let t = small_sales();
    let d = dag(&doc("real2"), &t);
    let got: BTreeSet<(String, String)> = d.edge_names().into_iter().collect();
    let want: BTreeSet<(String, String)> = [
        ("f1", "p1"),
        ("f2", "p2"),
        ("p1", "f3"),
        ("p2", "f3"),
        ("p1", "f4"),
        ("p2", "f4"),
        ("f3", "p3"),
        ("f4", "p4"),
        ("p3", "f5"),
        ("p4", "f5"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    assert_eq!(got, want);
    assert_eq!(d.cnodes().count(), 5);
    assert_eq!(d.pnodes().count(), 4);
    assert!(d.to_dot().starts_with("digraph"));
}

#[test]
fn single_row_query_is_one_node() {
    let t = small_sales();
    let d = dag(&doc("overview"), &t);
    assert_eq!(d.nodes.len(), 1);
    assert!(d.edges().is_empty());
}

fn reaches(d: &PlanDag, from: usize, to: usize, skip: (usize, usize)) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if seen.insert(n) {
            stack.extend(
                d.edges()
                    .into_iter()
                    .filter(|&e| e.0 == n && e != skip)
                    .map(|e| e.1),
            );
        }
    }
    false
}

/// Transitive reduction of the DAG's edges.
fn reduced_edges(d: &PlanDag) -> Vec<(usize, usize)> {
    d.edges()
        .into_iter()
        .filter(|&e| !reaches(d, e.0, e.1, e))
        .collect()
}

#[test]
fn chain_query_is_a_path() {
    for len in 1..=6 {
        let spec = ChainBenchSpec {
            chain_length: len,
            ..Default::default()
        };
        let t = chain_table(&spec, 2000, 1);
        let d = dag(&chain_query(&spec), &t);
        assert_eq!(d.cnodes().count(), len);
        assert_eq!(d.pnodes().count(), len - 1);
        // Path after dropping edges implied by longer paths.
        let edges = reduced_edges(&d);
        assert_eq!(edges.len(), 2 * (len - 1));
        for n in 0..d.nodes.len() {
            assert!(edges.iter().filter(|e| e.0 == n).count() <= 1);
            assert!(edges.iter().filter(|e| e.1 == n).count() <= 1);
        }
    }
}

#[test]
fn benchmark_request_counts() {
    let t = airline_table(20_000, 2);
    for (name, text, noopt, fused) in benchmark_queries() {
        let d = dag(text, &t);
        let runs = run_all(&d, &t);
        assert_eq!(runs[0].1.backend_requests(), noopt, "{name} noopt");
        assert_eq!(
            runs[0].1.phases(),
            noopt,
            "{name} noopt runs one request per phase"
        );
        assert_eq!(runs[3].1.backend_requests(), fused, "{name} smartfuse");
        for r in &runs[1..] {
            assert!(r.0 == runs[0].0, "{name} {}", r.1.strategy);
        }
    }
}

#[test]
fn strategies_agree_on_documentation_queries() {
    let t = small_sales();
    for (name, text) in doc_queries() {
        let d = dag(&text, &t);
        let runs = run_all(&d, &t);
        assert!(!runs[0].0.outputs.is_empty(), "{name}");
        for r in &runs[1..] {
            assert!(
                r.0 == runs[0].0,
                "{name}: {} differs from noopt",
                r.1.strategy
            );
        }
    }
}

#[test]
fn strategies_agree_on_random_queries_and_counts_are_monotone() {
    let t = small_sales();
    for seed in 0..40 {
        let text = random_query(seed, 20, 4);
        let d = dag(&text, &t);
        let runs = run_all(&d, &t);
        for r in &runs[1..] {
            assert!(
                r.0 == runs[0].0,
                "seed {seed}: {} differs\n{text}",
                r.1.strategy
            );
        }
        let n = |i: usize| runs[i].1.backend_requests();
        let nodes = |i: usize| {
            runs[i]
                .1
                .records
                .iter()
                .flat_map(|r| r.nodes.clone())
                .collect::<BTreeSet<_>>()
        };
        // Speculation may fetch rows whose resolved domain turns out empty; No-Opt never fetches those.
        let speculative_only = nodes(2).difference(&nodes(0)).count();
        assert_eq!(n(1), n(0), "seed {seed}");
        assert!(runs[1].1.phases() <= runs[0].1.phases(), "seed {seed}");
        assert!(n(2) <= n(0) + speculative_only, "seed {seed}");
        assert!(n(3) <= n(2), "seed {seed}");
        assert_eq!(
            runs[2].1.logical_requests(),
            runs[3].1.logical_requests(),
            "seed {seed}"
        );
    }
}

#[test]
fn nodes_run_after_their_parents() {
    let t = small_sales();
    let mut texts: Vec<String> = doc_queries().into_iter().map(|q| q.1).collect();
    texts.extend((0..10).map(|s| random_query(s, 20, 4)));
    for text in texts {
        let d = dag(&text, &t);
        for (_, tr) in run_all(&d, &t) {
            for n in &d.nodes {
                let s = tr.step_of(&n.name).expect("every node completes");
                for &p in &n.parents {
                    assert!(
                        tr.step_of(&d.nodes[p].name).unwrap() < s,
                        "{} before parent {}",
                        n.name,
                        d.nodes[p].name
                    );
                }
            }
        }
    }
}

#[test]
fn real2_superset_groups_by_all_ancestor_dimensions() {
    let t = small_sales();
    let d = dag(&doc("real2"), &t);
    let sup: BTreeMap<String, Vec<AggregateRequest>> = Engine::new(&t)
        .speculative_supersets(&d)
        .unwrap()
        .into_iter()
        .collect();
    let f3 = &sup["f3"];
    assert_eq!(f3.len(), 1);
    let dims: BTreeSet<&str> = f3[0].group_dims.iter().map(String::as_str).collect();
    assert_eq!(dims, BTreeSet::from(["product", "location", "category"]));
    assert_eq!(f3[0].filter, Predicate::always());
    assert_eq!(f3[0].x_attr, "year");
}

#[test]
fn static_rows_are_not_widened() {
    let t = small_sales();
    let d = dag(&doc("proc1"), &t);
    let sup = Engine::new(&t).speculative_supersets(&d).unwrap();
    assert!(sup.iter().all(|(row, _)| row == "f3"), "{sup:?}");
}

#[test]
fn smartfuse_respects_the_group_by_cap() {
    let cost = CostModel::default();
    let air = airline_table(20_000, 2);
    let sales = small_sales();
    let mut cases: Vec<(String, &ColumnTable)> = benchmark_queries()
        .into_iter()
        .map(|q| (q.1.to_string(), &air))
        .collect();
    cases.extend(doc_queries().into_iter().map(|q| (q.1, &sales)));
    cases.extend((0..20).map(|s| (random_query(s, 20, 4), &sales)));
    for (text, t) in cases {
        let (_, tr) = Engine::new(t)
            .run(&dag(&text, t), Strategy::SmartFuse)
            .unwrap();
        for r in tr.records.iter().filter(|r| r.requests > 1) {
            assert!(r.group_values <= cost.max_groupby, "{r:?}");
        }
    }
}

#[test]
fn lower_cap_splits_combined_requests() {
    let t = airline_table(20_000, 2);
    let cost = CostModel {
        max_groupby: 2_000,
        ..CostModel::default()
    };
    for (name, text, _, fused) in benchmark_queries() {
        let d = dag(text, &t);
        let (base, _) = Engine::new(&t).run(&d, Strategy::NoOpt).unwrap();
        let (res, tr) = Engine::new(&t)
            .with_cost_model(cost)
            .run(&d, Strategy::SmartFuse)
            .unwrap();
        assert!(res == base, "{name}");
        assert!(tr.backend_requests() > fused, "{name}");
        for r in tr.records.iter().filter(|r| r.requests > 1) {
            assert!(r.group_values <= 2_000, "{name}: {r:?}");
        }
    }
}

#[test]
fn disjoint_large_requests_are_never_merged() {
    let n = 60_000;
    let t = ColumnTable::new(
        "wide",
        vec![
            Column::numeric(
                "x",
                ColumnKind::Dimension(DimensionKind::Ordinal),
                vec![1.0; n],
            ),
            Column::categorical("a", (0..n).map(|i| format!("a{i}"))),
            Column::categorical("b", (0..n).map(|i| format!("b{}", (i * 7919) % n))),
            Column::numeric("m", ColumnKind::Measure, (0..n).map(|i| i as f64)),
        ],
    )
    .unwrap();
    let text = "Name | X | Y | Z\n*f1 | 'x' | 'm' | 'a'.*\n*f2 | 'x' | 'm' | 'b'.*\n";
    let (_, tr) = Engine::new(&t)
        .run(&dag(text, &t), Strategy::SmartFuse)
        .unwrap();
    assert_eq!(tr.backend_requests(), 2);
    assert!(tr
        .records
        .iter()
        .all(|r| r.requests == 1 && r.group_values == n as u64));
}

#[test]
fn speculation_falls_back_when_the_superset_is_too_large() {
    let t = small_sales();
    let d = dag(&doc("real2"), &t);
    let cost = CostModel {
        max_groupby: 50,
        ..CostModel::default()
    };
    let (base, _) = Engine::new(&t).run(&d, Strategy::NoOpt).unwrap();
    for s in [Strategy::Speculate, Strategy::SmartFuse] {
        let (res, tr) = Engine::new(&t).with_cost_model(cost).run(&d, s).unwrap();
        assert!(res == base, "{s}");
        assert!(
            tr.fallbacks.contains(&"f3".to_string()),
            "{s}: {:?}",
            tr.fallbacks
        );
    }
}

#[test]
fn sequential_and_parallel_execution_agree() {
    let t = small_sales();
    for (name, text) in doc_queries() {
        let d = dag(&text, &t);
        for s in Strategy::ALL {
            let a = Engine::new(&t).run(&d, s).unwrap();
            let b = Engine::new(&t).with_parallelism(false).run(&d, s).unwrap();
            assert!(a.0 == b.0, "{name} {s}");
            assert_eq!(a.1.records, b.1.records, "{name} {s}");
        }
    }
}

#[test]
fn chain_family_predicted_costs_are_ordered() {
    for (len, chains, loops) in [
        (1, 1, 1),
        (3, 1, 1),
        (5, 1, 1),
        (5, 3, 1),
        (4, 2, 2),
        (8, 1, 1),
    ] {
        let spec = ChainBenchSpec {
            chain_length: len,
            n_chains: chains,
            process_loops: loops,
            ..Default::default()
        };
        let t = chain_table(&spec, 10_000, 5);
        let runs = run_all(&dag(&chain_query(&spec), &t), &t);
        let cost = |i: usize| runs[i].1.predicted_ms();
        assert!(cost(3) <= cost(1) + 1e-9, "{spec:?}");
        assert!(cost(1) <= cost(0) + 1e-9, "{spec:?}");
    }
}

struct Cards(BTreeMap<&'static str, u64>);

impl Cardinalities for Cards {
    fn distinct_count(&self, attr: &str) -> u64 {
        self.0.get(attr).copied().unwrap_or(1)
    }
}

fn req(x: &str, dims: &[&str]) -> AggregateRequest {
    AggregateRequest::new(x, vec![("m", AggFn::Sum)]).group_by(dims)
}

#[test]
fn cost_arithmetic() {
    let m = CostModel::default();
    let phase = |cards: &[u64]| Phase {
        groups: cards
            .iter()
            .map(|&c| CombinedGroup {
                members: vec![0],
                cardinality: c,
            })
            .collect(),
    };
    let one = BatchPlan {
        phases: vec![phase(&[10_000])],
    };
    assert_eq!(predict_cost(&one, &m), 1635.0 + 908.0 + 1.22 * 100.0);
    assert_eq!(predict_cost(&BatchPlan::default(), &m), 0.0);
    let six = BatchPlan {
        phases: (0..6).map(|_| phase(&[1000])).collect(),
    };
    assert!((predict_cost(&six, &m) - 15331.2).abs() < 1e-9);
    let wide = BatchPlan {
        phases: vec![phase(&[1000, 2000, 500])],
    };
    assert!((predict_cost(&wide, &m) - (1635.0 + 3.0 * 908.0 + 1.22 * 35.0)).abs() < 1e-9);
}

#[test]
fn efgv_formula() {
    let c = Cards(BTreeMap::from([
        ("product", 100),
        ("year", 10),
        ("location", 50),
        ("a", 3),
        ("b", 4),
        ("z", 1),
    ]));
    assert_eq!(
        efgv(
            &req("year", &["product"]),
            &req("year", &["product", "location"]),
            &c
        ),
        50
    );
    assert_eq!(
        efgv(
            &req("year", &["product", "location"]),
            &req("year", &["product"]),
            &c
        ),
        1
    );
    assert_eq!(efgv(&req("z", &[]), &req("z", &["a", "b"]), &c), 12);
}

/// Every partition of `0..n` into blocks.
fn partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in partitions(n - 1) {
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i].push(n - 1);
            out.push(q);
        }
        let mut q = p;
        q.push(vec![n - 1]);
        out.push(q);
    }
    out
}

/// Optimal single-phase combination by exhaustive search.
fn optimal_cost(reqs: &[AggregateRequest], m: &CostModel, c: &Cards) -> f64 {
    partitions(reqs.len())
        .into_iter()
        .filter_map(|p| {
            let cards: Vec<u64> = p
                .iter()
                .map(|b| combined_cardinality(&b.iter().map(|&i| &reqs[i]).collect::<Vec<_>>(), c))
                .collect();
            let ok = p
                .iter()
                .zip(&cards)
                .all(|(b, &k)| b.len() == 1 || k <= m.max_groupby);
            ok.then(|| m.phase_ms(&cards))
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn heuristic_combination_against_exhaustive_search() {
    use rand::{Rng, SeedableRng};
    assert_eq!(partitions(4).len(), 15);
    let attrs = ["a", "b", "c", "d", "e"];
    let c = Cards(BTreeMap::from([
        ("x", 12),
        ("a", 10),
        ("b", 40),
        ("c", 300),
        ("d", 5),
        ("e", 2000),
    ]));
    let m = CostModel::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut exact = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let reqs: Vec<AggregateRequest> = (0..n)
            .map(|_| {
                let dims: Vec<&str> = attrs
                    .iter()
                    .copied()
                    .filter(|_| rng.gen_bool(0.35))
                    .collect();
                req("x", &dims)
            })
            .collect();
        let phase = combine_phase(&reqs, &m, &c);
        let mut seen: Vec<usize> = phase
            .groups
            .iter()
            .flat_map(|g| g.members.clone())
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        for g in &phase.groups {
            let members: Vec<&AggregateRequest> = g.members.iter().map(|&i| &reqs[i]).collect();
            assert_eq!(g.cardinality, combined_cardinality(&members, &c));
            assert!(g.members.len() == 1 || g.cardinality <= m.max_groupby);
        }
        let got = predict_cost(
            &BatchPlan {
                phases: vec![phase],
            },
            &m,
        );
        let best = optimal_cost(&reqs, &m, &c);
        assert!(got >= best - 1e-9);
        let alone = m.phase_ms(
            &reqs
                .iter()
                .map(|r| request_cardinality(r, &c))
                .collect::<Vec<_>>(),
        );
        assert!(
            got <= alone + 1e-9,
            "combination never costs more than no combination"
        );
        if (got - best).abs() < 1e-9 {
            exact += 1;
        }
    }
    assert!(exact >= 150, "heuristic optimal on {exact} of 200");
}

#[test]
fn identical_requests_merge_into_one_group() {
    let c = Cards(BTreeMap::from([("x", 1), ("product", 10)]));
    let p = combine_phase(
        &[req("x", &["product"]), req("x", &["product"])],
        &CostModel::default(),
        &c,
    );
    assert_eq!(
        p.groups,
        vec![CombinedGroup {
            members: vec![0, 1],
            cardinality: 10
        }]
    );
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
    }
    assert_eq!(
        "Smart-Fuse".parse::<Strategy>().unwrap(),
        Strategy::SmartFuse
    );
    assert!("fast".parse::<Strategy>().is_err());
}
