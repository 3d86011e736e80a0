use std::sync::Arc;

use proptest::prelude::*;
use zql_core::plan::Strategy;
use zql_core::process::Registry;
use zql_core::store::{sample_sales, CmpOp, Column, ColumnKind, ColumnTable, DimensionKind};
use zql_core::vea::bag;
use zql_core::vea::*;
use zql_core::{Selector, Value};

fn s(v: &str) -> Selector {
    Selector::Val(Value::str(v))
}

fn n(v: f64) -> Selector {
    Selector::Val(Value::Num(v))
}

/// Relation with ordinal `x`, dimension `id` and measures `m0`, `m1`.
fn lines(series: &[(&str, Vec<f64>, Vec<f64>)]) -> ColumnTable {
    let (mut x, mut id, mut m0, mut m1) = (vec![], vec![], vec![], vec![]);
    for (name, a, b) in series {
        for (i, (ya, yb)) in a.iter().zip(b).enumerate() {
            x.push(i as f64);
            id.push(name.to_string());
            m0.push(*ya);
            m1.push(*yb);
        }
    }
    ColumnTable::new(
        "lines",
        vec![
            Column::numeric("x", ColumnKind::Dimension(DimensionKind::Ordinal), x),
            Column::categorical("id", id),
            Column::numeric("m0", ColumnKind::Measure, m0),
            Column::numeric("m1", ColumnKind::Measure, m1),
        ],
    )
    .unwrap()
}

fn src(y: &str, id: &str) -> VisualSource {
    VisualSource::new(
        "x",
        y,
        vec![Selector::Star, s(id), Selector::Star, Selector::Star],
    )
}

fn group(t: &ColumnTable, sources: Vec<VisualSource>) -> VisualGroup {
    VisualGroup::new(VisualGroup::attrs_of(t), sources).unwrap()
}

// --- ordered bag oracles, written from the recursive definitions ---

fn rec_select(r: &[u8], p: &dyn Fn(u8) -> bool) -> Vec<u8> {
    match r.split_first() {
        None => vec![],
        Some((&h, rest)) => {
            let mut out = if p(h) { vec![h] } else { vec![] };
            out.extend(rec_select(rest, p));
            out
        }
    }
}

fn rec_diff(r: &[u8], s: &[u8]) -> Vec<u8> {
    match r.split_first() {
        None => vec![],
        Some((&h, rest)) => {
            let mut out = if s.contains(&h) { vec![] } else { vec![h] };
            out.extend(rec_diff(rest, s));
            out
        }
    }
}

fn rec_dedup(r: &[u8]) -> Vec<u8> {
    match r.split_first() {
        None => vec![],
        Some((&h, rest)) => {
            let mut out = vec![h];
            out.extend(rec_dedup(&rec_diff(rest, &[h])));
            out
        }
    }
}

fn rec_cross(r: &[u8], s: &[u8]) -> Vec<(u8, u8)> {
    match r.split_first() {
        None => vec![],
        Some((&h, rest)) => {
            let mut out: Vec<(u8, u8)> = s.iter().map(|&b| (h, b)).collect();
            out.extend(rec_cross(rest, s));
            out
        }
    }
}

proptest! {
    #[test]
    fn bag_ops_match_recursive_definitions(r in prop::collection::vec(0u8..6, 0..12), s in prop::collection::vec(0u8..6, 0..8)) {
        let p = |x: u8| x.is_multiple_of(2);
        prop_assert_eq!(bag::select(&r, |&x| p(x)), rec_select(&r, &p));
        prop_assert_eq!(bag::diff(&r, &s), rec_diff(&r, &s));
        prop_assert_eq!(bag::dedup(&r), rec_dedup(&r));
        prop_assert_eq!(bag::intersect(&r, &s), rec_select(&r, &|x| s.contains(&x)));
        let mut u = r.clone();
        u.extend(&s);
        prop_assert_eq!(bag::union(&r, &s), u);
        let rr: Vec<Vec<u8>> = r.iter().map(|&x| vec![x]).collect();
        let ss: Vec<Vec<u8>> = s.iter().map(|&x| vec![x]).collect();
        let got: Vec<(u8, u8)> = bag::cross(&rr, &ss).into_iter().map(|t| (t[0], t[1])).collect();
        prop_assert_eq!(got, rec_cross(&r, &s));
    }

    #[test]
    fn dedup_idempotent_and_limits_compose(seed in 0u64..40, k1 in 0usize..8, k2 in 0usize..8) {
        let t = random_relation(seed);
        let reg = Registry::new();
        let apps = operator_applications(Context::new(&t, &reg), seed);
        let g = apps.iter().find(|a| a.op.name() == "dedup").unwrap().v.clone();
        let once = dedup_v(&g);
        prop_assert_eq!(dedup_v(&once), once);
        let a = limit_v(&limit_v(&g, Limit::First(k1)).unwrap(), Limit::First(k2)).unwrap();
        prop_assert_eq!(a, limit_v(&g, Limit::First(k1.min(k2))).unwrap());
    }

    #[test]
    fn selection_distributes_over_union(seed in 0u64..40) {
        let t = random_relation(seed);
        let reg = Registry::new();
        let apps = operator_applications(Context::new(&t, &reg), seed);
        let u = apps.iter().find(|a| a.op.name() == "union").unwrap();
        let (g1, g2) = (&u.v, u.u.as_ref().unwrap());
        for a in apps.iter().filter(|a| a.op.name() == "sel") {
            let Operator::Select(theta) = &a.op else { unreachable!() };
            let lhs = sel_v(&union_v(g1, g2).unwrap(), theta, false).unwrap();
            let rhs = union_v(&sel_v(g1, theta, false).unwrap(), &sel_v(g2, theta, false).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}

#[test]
fn bag_examples() {
    assert_eq!(bag::dedup(&['a', 'b', 'a', 'c']), vec!['a', 'b', 'c']);
    assert_eq!(bag::diff(&['a', 'b'], &[]), vec!['a', 'b']);
    assert!(matches!(
        bag::index(&[1, 2], 3),
        Err(VeaError::IndexOutOfRange { index: 3, len: 2 })
    ));
}

#[test]
fn universe_selection_on_sample() {
    let t = sample_sales();
    let theta = Theta::eq(Attr::X, s("year"))
        .and(Theta::eq(Attr::Y, s("sales")))
        .and(Theta::ne(Attr::A("product".into()), Selector::Star))
        .and(Theta::eq(Attr::A("location".into()), s("US")));
    let g = select_universe(&t, &theta, false, 1_000_000).unwrap();
    // Oracle: every distinct product value, sorted, read straight from the column.
    let mut expected: Vec<String> = t
        .column("product")
        .unwrap()
        .values
        .iter()
        .map(|v| v.to_string())
        .collect();
    expected.sort();
    expected.dedup();
    let got: Vec<String> = g
        .sources
        .iter()
        .map(|s| s.selectors[2].to_string())
        .collect();
    assert_eq!(got, expected);
    for src in &g.sources {
        assert_eq!((src.x.as_str(), src.y.as_str()), ("year", "sales"));
        assert_eq!(src.selectors[3], s("US"));
        for (i, sel) in src.selectors.iter().enumerate() {
            if i != 2 && i != 3 {
                assert_eq!(*sel, Selector::Star);
            }
        }
    }
}

#[test]
fn selection_rules() {
    let t = sample_sales();
    let attrs = VisualGroup::attrs_of(&t);
    let star = vec![Selector::Star; attrs.len()];
    let g = VisualGroup::new(
        attrs.clone(),
        vec![
            VisualSource::new("year", "sales", star.clone()),
            VisualSource::new("month", "profit", star),
        ],
    )
    .unwrap();
    assert_eq!(sel_v(&g, &Theta::True, false).unwrap(), g);
    let no_star_x = sel_v(&g, &Theta::eq(Attr::X, Selector::Star), false).unwrap();
    assert!(no_star_x.is_empty());
    assert!(matches!(
        sel_v(&g, &Theta::eq(Attr::X, Selector::Star), true),
        Err(VeaError::UndefinedSelection(_))
    ));
    let lt = Theta::Atom {
        attr: Attr::A("year".into()),
        op: CmpOp::Lt,
        value: n(2016.0),
    };
    assert!(matches!(
        sel_v(&g, &lt, false),
        Err(VeaError::IllegalOperator(_))
    ));
    assert!(matches!(
        sel_v(
            &g,
            &Theta::eq(Attr::A("nope".into()), Selector::Star),
            false
        ),
        Err(VeaError::UnknownAttribute(_))
    ));
}

fn closed_form_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let sx: f64 = (0..ys.len()).map(|i| i as f64).sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = ys.iter().enumerate().map(|(i, y)| i as f64 * y).sum();
    let sxx: f64 = (0..ys.len()).map(|i| (i * i) as f64).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn sort_by_slope() {
    let series = [
        ("c", vec![1.0, 3.0, 5.0, 7.0], vec![0.0; 4]),
        ("a", vec![9.0, 8.0, 7.0, 6.0], vec![0.0; 4]),
        ("b", vec![4.0, 4.0, 4.0, 4.0], vec![0.0; 4]),
    ];
    let t = lines(&series);
    let reg = Registry::new();
    let g = group(&t, vec![src("m0", "c"), src("m0", "a"), src("m0", "b")]);
    let mut oracle: Vec<(f64, &str)> = series
        .iter()
        .map(|(id, ys, _)| (closed_form_slope(ys), *id))
        .collect();
    oracle.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(
        oracle.iter().map(|o| o.0).collect::<Vec<_>>(),
        vec![-1.0, 0.0, 2.0]
    );
    let sorted = sort_v(Context::new(&t, &reg), &g, &Functional::Identity).unwrap();
    let ids: Vec<String> = sorted
        .sources
        .iter()
        .map(|s| s.selectors[1].to_string())
        .collect();
    assert_eq!(
        ids,
        oracle.iter().map(|o| o.1.to_string()).collect::<Vec<_>>()
    );
    let desc = sort_v(Context::new(&t, &reg), &g, &Functional::Negate).unwrap();
    assert_eq!(desc.sources[0], src("m0", "c"));
    let custom = Functional::Custom(Arc::new(|v: f64| v.abs()));
    let by_abs = sort_v(Context::new(&t, &reg), &g, &custom).unwrap();
    assert_eq!(
        by_abs.sources,
        vec![src("m0", "b"), src("m0", "a"), src("m0", "c")]
    );
}

#[test]
fn limit_and_binary_identities() {
    let t = random_relation(3);
    let reg = Registry::new();
    let apps = operator_applications(Context::new(&t, &reg), 3);
    let g = apps[0].v.clone();
    assert_eq!(limit_v(&g, Limit::First(g.len())).unwrap(), g);
    assert!(diff_v(&g, &g).unwrap().is_empty());
    assert_eq!(union_v(&g, &g).unwrap().len(), 2 * g.len());
    assert!(matches!(
        limit_v(&g, Limit::Range(1, g.len() as i64 + 1)),
        Err(VeaError::IndexOutOfRange { .. })
    ));
}

#[test]
fn swap_examples() {
    let t = lines(&[
        ("a", vec![1.0, 2.0], vec![3.0, 4.0]),
        ("b", vec![5.0, 6.0], vec![7.0, 8.0]),
    ]);
    let v = group(&t, vec![src("m0", "a"), src("m0", "b")]);
    let u = group(&t, vec![src("m1", "a")]);
    let swapped = swap_v(&v, &u, &Attr::Y).unwrap();
    assert_eq!(swapped.sources, vec![src("m1", "a"), src("m1", "b")]);

    let w = group(&t, vec![src("m0", "a"), src("m1", "b"), src("m1", "a")]);
    let crossed = swap_v(&w, &w, &Attr::A("id".into())).unwrap();
    assert_eq!(crossed.len(), w.len() * w.len());
    assert_eq!(
        crossed.sources[..3],
        [src("m0", "a"), src("m0", "b"), src("m0", "a")]
    );
    assert!(matches!(
        swap_v(&w, &w, &Attr::A("zz".into())),
        Err(VeaError::UnknownAttribute(_))
    ));
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn distance_orders() {
    let series = [
        ("a", vec![0.0, 0.0], vec![3.0, 4.0]),
        ("b", vec![0.0, 0.0], vec![1.0, 0.0]),
        ("c", vec![0.0, 0.0], vec![3.0, 0.0]),
    ];
    let t = lines(&series);
    let reg = Registry::new();
    let ctx = Context::new(&t, &reg);
    let dists: Vec<f64> = series.iter().map(|(_, a, b)| euclid(a, b)).collect();
    assert_eq!(dists, vec![5.0, 1.0, 3.0]);
    let v = group(&t, vec![src("m0", "a"), src("m0", "b"), src("m0", "c")]);
    let u = group(&t, vec![src("m1", "c"), src("m1", "a"), src("m1", "b")]);
    let on = [Attr::A("id".into())];
    let out = dist_v(ctx, &v, &u, &on, &Functional::Identity).unwrap();
    assert_eq!(
        out.sources,
        vec![src("m0", "b"), src("m0", "c"), src("m0", "a")]
    );

    let dup = group(
        &t,
        vec![
            src("m1", "a"),
            src("m0", "a"),
            src("m1", "b"),
            src("m1", "c"),
        ],
    );
    assert!(matches!(
        dist_v(ctx, &v, &dup, &on, &Functional::Identity),
        Err(VeaError::UndefinedMatch(_))
    ));

    let reference = group(&t, vec![src("m0", "c")]);
    let cand = group(&t, vec![src("m1", "a"), src("m0", "c"), src("m1", "b")]);
    let found = find_v(ctx, &cand, &reference, &Functional::Identity).unwrap();
    assert_eq!(found.sources[0], src("m0", "c"));
    let two = group(&t, vec![src("m0", "a"), src("m0", "b")]);
    assert!(matches!(
        find_v(ctx, &cand, &two, &Functional::Identity),
        Err(VeaError::NonSingletonReference(2))
    ));
}

#[test]
fn materialization_sums() {
    let t = sample_sales();
    let attrs = VisualGroup::attrs_of(&t);
    let mut sel = vec![Selector::Star; attrs.len()];
    sel[2] = s("chair");
    let v = materialize(&t, &attrs, &VisualSource::new("month", "sales", sel)).unwrap();
    // chair rows: (month 4, 623000), (month 3, 789000), (month 4, 130000)
    assert_eq!(
        v.points,
        vec![(Value::Num(3.0), 789000.0), (Value::Num(4.0), 753000.0)]
    );
}

#[test]
fn completeness_examples() {
    let t = sample_sales();
    let reg = Registry::new();
    let ctx = Context::new(&t, &reg);
    let attrs = VisualGroup::attrs_of(&t);
    let mk = |x: &str, y: &str, product: Selector| {
        let mut sel = vec![Selector::Star; attrs.len()];
        sel[2] = product;
        VisualSource::new(x, y, sel)
    };
    let v = VisualGroup::new(
        attrs.clone(),
        vec![
            mk("month", "sales", s("chair")),
            mk("month", "profit", Selector::Star),
            mk("month", "sales", s("chair")),
        ],
    )
    .unwrap();
    let u = VisualGroup::new(attrs.clone(), vec![mk("month", "profit", s("table"))]).unwrap();
    for app in [
        Application::unary(Operator::Limit(Limit::Range(2, 3)), v.clone()),
        Application::unary(Operator::Dedup, v.clone()),
        Application::binary(Operator::Union, v.clone(), u.clone()),
    ] {
        let out = completeness_check(ctx, &app, Strategy::SmartFuse);
        assert!(
            out.passed,
            "{}: {}\n{}",
            out.operator, out.detail, out.query
        );
    }
    let (text, _) = to_zql(&Application::unary(
        Operator::Limit(Limit::Range(2, 3)),
        v.clone(),
    ))
    .unwrap();
    assert!(text.contains("[2:3]"), "{text}");
    let (text, _) = to_zql(&Application::binary(Operator::Union, v, u)).unwrap();
    assert!(
        text.lines()
            .any(|l| l.starts_with('*') && l.contains(" + ")),
        "{text}"
    );
}

#[test]
fn completeness_on_sample_and_random_relations() {
    let mut tables = vec![sample_sales()];
    tables.extend((0..20).map(random_relation));
    let reg = Registry::new();
    let reports = completeness_suite(&tables, &reg, 7, Strategy::NoOpt);
    assert_eq!(reports.len(), OPERATORS.len());
    for r in &reports {
        let first = r
            .failures
            .first()
            .map(|f| format!("{}\n{}", f.detail, f.query))
            .unwrap_or_default();
        assert!(
            r.passed(),
            "{}: {} of {} failed\n{first}",
            r.operator,
            r.failures.len(),
            r.checked
        );
        assert!(
            r.checked >= tables.len(),
            "{} checked only {} applications",
            r.operator,
            r.checked
        );
    }
}

#[test]
fn random_relations_are_small() {
    for seed in 0..30 {
        let t = random_relation(seed);
        let dims: Vec<_> = t.dimensions().collect();
        assert!((2..=3).contains(&dims.len()));
        assert!(dims.iter().all(|c| c.distinct().len() <= 5));
        assert!((1..=2).contains(&t.measures().count()));
    }
}
