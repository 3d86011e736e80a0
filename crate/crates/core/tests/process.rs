//! Process evaluation checked against a brute-force evaluator that reads the
//! relation directly, plus primitive, limiter and cache-blocking properties.

use proptest::prelude::*;
use zql_core::plan::{build_dag, Engine, Strategy};
use zql_core::process::*;
use zql_core::store::{AttributeCatalog, Column, ColumnKind, ColumnTable, DimensionKind};
use zql_core::workload::{doc_queries, sales_table};
use zql_core::zql::{parse_query, validate, ArgOpt, Limiter};
use zql_core::Value;

mod common;

use common::*;

#[test]
fn trend_filter_matches_brute_force() {
    common::trend_filter_matches_brute_force();
}

#[test]
fn pairwise_top_k_matches_brute_force() {
    common::pairwise_top_k_matches_brute_force();
}

#[test]
fn similarity_search_matches_brute_force() {
    common::similarity_search_matches_brute_force();
}

#[test]
fn outlier_double_loop_matches_brute_force() {
    common::outlier_double_loop_matches_brute_force();
}

#[test]
fn two_processes_in_one_row() {
    common::two_processes_in_one_row();
}

#[test]
fn filtered_month_query_matches_brute_force() {
    common::filtered_month_query_matches_brute_force();
}

#[test]
fn joint_variables_match_brute_force() {
    common::joint_variables_match_brute_force();
}

#[test]
fn order_derivation_sorts_by_trend() {
    common::order_derivation_sorts_by_trend();
}

#[test]
fn real2_matches_brute_force() {
    common::real2_matches_brute_force();
}

/// Five products: three share one flat series, two share a high one.
fn clustered() -> ColumnTable {
    let mut year = vec![];
    let mut product = vec![];
    let mut sales = vec![];
    for (p, base) in [
        ("a", 10.0),
        ("b", 10.0),
        ("c", 10.0),
        ("d", 500.0),
        ("e", 500.0),
    ] {
        for y in 0..5 {
            year.push(2000.0 + y as f64);
            product.push(p);
            sales.push(base + y as f64);
        }
    }
    ColumnTable::new(
        "clusters",
        vec![
            Column::numeric("year", ColumnKind::Dimension(DimensionKind::Ordinal), year),
            Column::categorical("product", product),
            Column::numeric("sales", ColumnKind::Measure, sales),
        ],
    )
    .unwrap()
}

fn representatives(k: usize) -> Vec<Value> {
    let t = clustered();
    let text = format!(
        "Name | X | Y | Z | Process\nf1 | 'year' | 'sales' | v1 <-- 'product'.* | v2 <-- R({k}, v1, f1)\n*f2 | 'year' | 'sales' | v2 |\n"
    );
    bound(&run(&text, &t), "f2", "product")
}

#[test]
fn representatives_cover_each_cluster() {
    let low = ["a", "b", "c"].map(Value::str);
    let got = representatives(2);
    assert_eq!(got.len(), 2);
    assert_eq!(got.iter().filter(|v| low.contains(v)).count(), 1, "{got:?}");
    assert_eq!(
        representatives(5),
        ["a", "b", "c", "d", "e"].map(Value::str).to_vec()
    );
}

#[test]
fn single_representative_of_identical_series_is_the_first() {
    let d = vec![vec![0.0; 4]; 4];
    assert_eq!(k_medoids(&d, 1), vec![0]);
}

#[test]
fn medoids_match_exhaustive_search_on_small_inputs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let n = rng.gen_range(2..=7);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
            .collect();
        let d: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| {
                pts.iter()
                    .map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
                    .collect()
            })
            .collect();
        let cost = |m: &[usize]| -> f64 {
            (0..n)
                .map(|i| m.iter().map(|&j| d[i][j]).fold(f64::INFINITY, f64::min))
                .sum()
        };
        let k = rng.gen_range(1..=n);
        let got = k_medoids(&d, k);
        assert_eq!(got.len(), k);
        // Swap search ends in a local optimum: no single exchange improves it.
        for s in 0..k {
            for o in (0..n).filter(|o| !got.contains(o)) {
                let mut t = got.clone();
                t[s] = o;
                assert!(cost(&t) >= cost(&got) - 1e-9);
            }
        }
        if k == 1 {
            let best = (0..n).map(|i| cost(&[i])).fold(f64::INFINITY, f64::min);
            assert!((cost(&got) - best).abs() < 1e-9);
        }
    }
}

// ---- primitives ----

fn viz(ys: &[f64]) -> UnitViz {
    UnitViz::from_ys("s", ys)
}

fn keyed(points: &[(f64, f64)]) -> UnitViz {
    UnitViz::new(
        CellSpec::new("x", "y"),
        points.iter().map(|&(x, y)| (Value::Num(x), y)).collect(),
    )
}

#[test]
fn slope_examples() {
    assert!((t_slope(&viz(&[0.0, 2.0, 4.0, 6.0])).unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(t_slope(&viz(&[7.0; 5])).unwrap(), 0.0);
    let s = [1.0, 3.0, 2.0, 4.0];
    let pts: Vec<(Value, f64)> = s.iter().map(|&y| (Value::Num(0.0), y)).collect();
    assert!((t_slope(&viz(&s)).unwrap() - slope(&pts)).abs() < 1e-12);
    assert!(matches!(
        t_slope(&viz(&[1.0])),
        Err(PrimitiveError::SeriesTooShort(1))
    ));
}

#[test]
fn distance_examples() {
    let a = keyed(&[(1.0, 0.0), (2.0, 0.0)]);
    let b = keyed(&[(1.0, 3.0), (2.0, 4.0)]);
    assert_eq!(d_euclidean(&a, &b).unwrap(), 5.0);
    assert_eq!(d_euclidean(&b, &a).unwrap(), 5.0);
    assert_eq!(d_euclidean(&b, &b).unwrap(), 0.0);
    let c = keyed(&[(2.0, 1.0), (3.0, 1.0)]);
    assert!(matches!(
        d_euclidean(&a, &c),
        Err(PrimitiveError::InsufficientOverlap(1))
    ));
    // Only shared keys count.
    let d = keyed(&[(0.0, 100.0), (1.0, 3.0), (2.0, 4.0), (9.0, -1.0)]);
    assert_eq!(d_euclidean(&a, &d).unwrap(), 5.0);
}

#[test]
fn registry_selection() {
    let mut r = Registry::new();
    assert!(r.select_trend("slope").is_ok());
    assert!(r.select_distance("euclidean").is_ok());
    assert!(r.select_distance("emd").is_err());
    assert_eq!(r.trend(&viz(&[0.0, 1.0, 2.0])).unwrap(), 1.0);
}

#[test]
fn limiter_examples() {
    let s = [3.0, 5.0, 4.0];
    assert_eq!(
        apply_limiter(&s, ArgOpt::Max, Some(&Limiter::K(Some(2)))).unwrap(),
        vec![1, 2]
    );
    assert_eq!(
        apply_limiter(
            &s,
            ArgOpt::Min,
            Some(&Limiter::Threshold(zql_core::store::CmpOp::Lt, 4.0))
        )
        .unwrap(),
        vec![0]
    );
    assert_eq!(
        apply_limiter(&s, ArgOpt::Max, Some(&Limiter::K(Some(7)))).unwrap(),
        vec![1, 2, 0]
    );
}

proptest! {
    #[test]
    fn distance_is_a_metric_on_shared_keys(
        a in prop::collection::vec(-1e3f64..1e3, 2..12),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = a.len();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let (va, vb, vc) = (viz(&a), viz(&b), viz(&c));
        let ab = d_euclidean(&va, &vb).unwrap();
        prop_assert_eq!(ab, d_euclidean(&vb, &va).unwrap());
        prop_assert_eq!(d_euclidean(&va, &va).unwrap(), 0.0);
        prop_assert!(d_euclidean(&va, &vc).unwrap() <= ab + d_euclidean(&vb, &vc).unwrap() + 1e-9);
        let brute: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        prop_assert!((ab - brute).abs() <= 1e-9 * brute.max(1.0));
    }

    #[test]
    fn slope_ignores_order_preserving_relabeling(
        ys in prop::collection::vec(-1e3f64..1e3, 2..15),
        gaps in prop::collection::vec(1u32..50, 15),
    ) {
        let plain = t_slope(&viz(&ys)).unwrap();
        let mut x = 0u32;
        let pts: Vec<(Value, f64)> = ys
            .iter()
            .zip(&gaps)
            .map(|(&y, &g)| {
                x += g;
                (Value::str(&format!("k{x:06}")), y)
            })
            .collect();
        let relabeled = t_slope(&UnitViz::new(CellSpec::new("x", "y"), pts)).unwrap();
        prop_assert_eq!(plain.signum(), relabeled.signum());
        prop_assert!((plain - relabeled).abs() < 1e-9);
    }

    #[test]
    fn exact_linear_slope(a in -1e3f64..1e3, b in -50f64..50.0, n in 2usize..40) {
        let ys: Vec<f64> = (0..n).map(|i| a + b * i as f64).collect();
        prop_assert!((t_slope(&viz(&ys)).unwrap() - b).abs() < 1e-9);
    }

    #[test]
    fn top_k_is_a_prefix_of_top_k_plus_one(scores in prop::collection::vec(-10i32..10, 1..30), k in 0usize..30) {
        let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
        for opt in [ArgOpt::Max, ArgOpt::Min, ArgOpt::Any] {
            let a = apply_limiter(&s, opt, Some(&Limiter::K(Some(k)))).unwrap();
            let b = apply_limiter(&s, opt, Some(&Limiter::K(Some(k + 1)))).unwrap();
            prop_assert_eq!(&a[..], &b[..a.len()]);
        }
    }
}

// ---- cache-aware evaluation ----

#[test]
fn blocked_evaluation_equals_naive_for_every_block_size() {
    let p = pairwise(300);
    let reg = Registry::new();
    let env = ProcessEnv {
        collections: &p.colls,
        groups: &p.groups,
        registry: &reg,
    };
    assert!(is_tileable(&p.decl));
    let naive = eval_process(&p.decl, env).unwrap();
    let cell = cell_bytes(&p.decl, &env);
    let (_, plain) = eval_process_instrumented(&p.decl, env, cell).unwrap();
    for cells in [1, 2, 4, 10, 32, 64, 100, 200, 500, 5000] {
        let (out, stats) = cache_aware_eval(&p.decl, env, cells * cell).unwrap();
        assert_eq!(out, naive, "budget of {cells} cells");
        assert_eq!(stats.primitive_calls, plain.primitive_calls);
    }
}

#[test]
fn blocked_evaluation_loads_fewer_regions_on_a_thousand_cells() {
    let p = pairwise(1000);
    let reg = Registry::new();
    let env = ProcessEnv {
        collections: &p.colls,
        groups: &p.groups,
        registry: &reg,
    };
    let cell = cell_bytes(&p.decl, &env);
    let mut strictly_lower = false;
    for cells in [32, 200, 1000] {
        let (out, stats) = cache_aware_eval(&p.decl, env, cells * cell).unwrap();
        let (plain_out, plain) = eval_process_instrumented(&p.decl, env, cells * cell).unwrap();
        assert_eq!(out, plain_out);
        assert!(
            stats.region_loads <= plain.region_loads,
            "budget of {cells} cells"
        );
        strictly_lower |= stats.region_loads < plain.region_loads;
    }
    assert!(strictly_lower);
}

#[test]
fn budget_covering_everything_loads_each_cell_once() {
    let p = pairwise(50);
    let reg = Registry::new();
    let env = ProcessEnv {
        collections: &p.colls,
        groups: &p.groups,
        registry: &reg,
    };
    let huge = 1 << 30;
    let (a, sa) = cache_aware_eval(&p.decl, env, huge).unwrap();
    let (b, sb) = eval_process_instrumented(&p.decl, env, huge).unwrap();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert_eq!(sa.region_loads, 100);
}

#[test]
fn engine_results_are_unchanged_by_cache_aware_mode() {
    let t = sales_table(15, 15 * 8 * 10 * 12, 8);
    for (name, text) in doc_queries() {
        let q = parse_query(&text).unwrap();
        let dag = build_dag(&validate(&q, &AttributeCatalog::from_table(&t)).unwrap()).unwrap();
        let (base, _) = Engine::new(&t).run(&dag, Strategy::NoOpt).unwrap();
        for bytes in [256, 4096, 1 << 20] {
            let (res, _) = Engine::new(&t)
                .with_cache_aware(Some(bytes))
                .run(&dag, Strategy::SmartFuse)
                .unwrap();
            assert!(res == base, "{name} at {bytes} bytes");
        }
    }
}
