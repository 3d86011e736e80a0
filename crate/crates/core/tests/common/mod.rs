//! Brute-force oracle and fixtures shared by the process and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use zql_core::plan::{build_dag, Engine, Strategy};
use zql_core::process::*;
use zql_core::store::{AttributeCatalog, Column, ColumnKind, ColumnTable, DimensionKind};
use zql_core::workload::{doc_queries, sales_table};
use zql_core::zql::{parse_query, validate, validate_with, ProcessDecl};
use zql_core::Value;

// ---- brute-force oracle ----

pub fn col<'a>(t: &'a ColumnTable, name: &str) -> &'a [Value] {
    &t.columns().iter().find(|c| c.name == name).unwrap().values
}

/// SUM(y) per x over rows whose attributes fall in the given sets, ascending x.
pub fn series(
    t: &ColumnTable,
    x: &str,
    y: &str,
    filters: &[(&str, &[Value])],
) -> Vec<(Value, f64)> {
    let xs = col(t, x);
    let ys = col(t, y);
    let mut out: BTreeMap<Value, f64> = BTreeMap::new();
    'rows: for r in 0..t.rows() {
        for (a, vals) in filters {
            if !vals.contains(&col(t, a)[r]) {
                continue 'rows;
            }
        }
        *out.entry(xs[r].clone()).or_insert(0.0) += ys[r].as_f64().unwrap();
    }
    out.into_iter().collect()
}

pub fn one(v: &Value) -> Vec<Value> {
    vec![v.clone()]
}

/// Closed-form least squares on positions 0..n-1.
pub fn slope(s: &[(Value, f64)]) -> f64 {
    let n = s.len() as f64;
    let (mut sx, mut sy, mut sxy, mut sxx) = (0.0, 0.0, 0.0, 0.0);
    for (i, (_, y)) in s.iter().enumerate() {
        let x = i as f64;
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

pub fn dist(a: &[(Value, f64)], b: &[(Value, f64)]) -> f64 {
    let bm: BTreeMap<&Value, f64> = b.iter().map(|(x, y)| (x, *y)).collect();
    a.iter()
        .filter_map(|(x, y)| bm.get(x).map(|z| (y - z).powi(2)))
        .sum::<f64>()
        .sqrt()
}

/// Indices sorted by score, descending for max, stable.
pub fn rank(scores: &[f64], max: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        if max {
            scores[b].total_cmp(&scores[a])
        } else {
            scores[a].total_cmp(&scores[b])
        }
    });
    idx
}

pub fn pick(domain: &[Value], idx: impl IntoIterator<Item = usize>) -> Vec<Value> {
    idx.into_iter().map(|i| domain[i].clone()).collect()
}

pub fn distinct(t: &ColumnTable, a: &str) -> Vec<Value> {
    col(t, a)
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

// ---- engine side ----

pub fn run(text: &str, t: &ColumnTable) -> zql_core::plan::ResultSet {
    let q = parse_query(text).unwrap();
    let v = validate(&q, &AttributeCatalog::from_table(t)).unwrap();
    let dag = build_dag(&v).unwrap();
    let (res, _) = Engine::new(t).run(&dag, Strategy::NoOpt).unwrap();
    for s in [Strategy::Parallel, Strategy::SmartFuse] {
        assert!(Engine::new(t).run(&dag, s).unwrap().0 == res, "{s}");
    }
    res
}

pub fn doc(name: &str) -> String {
    doc_queries().into_iter().find(|q| q.0 == name).unwrap().1
}

/// Binding of `attr` in every cell of an output collection.
pub fn bound(res: &zql_core::plan::ResultSet, name: &str, attr: &str) -> Vec<Value> {
    res.get(name)
        .unwrap()
        .cells
        .iter()
        .map(|c| c.bindings()[attr].clone())
        .collect()
}

/// 12 products with every product, location, year and month present once.
pub fn table() -> ColumnTable {
    sales_table(12, 12 * 8 * 10 * 12, 21)
}

pub fn trend_filter_matches_brute_force() {
    let t = table();
    let res = run(&doc("trend"), &t);
    let products = distinct(&t, "product");
    let want: Vec<Value> = products
        .iter()
        .filter(|p| slope(&series(&t, "year", "sales", &[("product", &one(p))])) < 0.0)
        .cloned()
        .collect();
    assert!(!want.is_empty() && want.len() < products.len());
    assert_eq!(bound(&res, "f2", "product"), want);
    for (cell, p) in res.get("f2").unwrap().cells.iter().zip(&want) {
        assert_eq!(
            cell.points,
            series(&t, "year", "sales", &[("product", &one(p))])
        );
    }
}

pub fn pairwise_top_k_matches_brute_force() {
    let t = table();
    let res = run(&doc("proc1"), &t);
    let products = distinct(&t, "product");
    let scores: Vec<f64> = products
        .iter()
        .map(|p| {
            let f = [("product", &one(p)[..])];
            dist(
                &series(&t, "year", "profit", &f),
                &series(&t, "year", "sales", &f),
            )
        })
        .collect();
    let want = pick(&products, rank(&scores, true).into_iter().take(10));
    assert_eq!(bound(&res, "f3", "product"), want);
}

pub fn similarity_search_matches_brute_force() {
    let t = table();
    let res = run(&doc("similarity"), &t);
    let chair = Value::str("chair");
    let target = series(&t, "year", "sales", &[("product", &one(&chair))]);
    let others: Vec<Value> = distinct(&t, "product")
        .into_iter()
        .filter(|p| *p != chair)
        .collect();
    let scores: Vec<f64> = others
        .iter()
        .map(|p| {
            dist(
                &target,
                &series(&t, "year", "sales", &[("product", &one(p))]),
            )
        })
        .collect();
    let want = pick(&others, rank(&scores, false).into_iter().take(10));
    assert_eq!(bound(&res, "f3", "product"), want);
}

pub fn outlier_double_loop_matches_brute_force() {
    let t = table();
    let res = run(&doc("outlier"), &t);
    let products = distinct(&t, "product");
    let s: Vec<_> = products
        .iter()
        .map(|p| series(&t, "year", "sales", &[("product", &one(p))]))
        .collect();
    let scores: Vec<f64> = s
        .iter()
        .map(|a| s.iter().map(|b| dist(a, b)).sum())
        .collect();
    let want = pick(&products, rank(&scores, true).into_iter().take(10));
    assert_eq!(bound(&res, "f3", "product"), want);
}

pub fn two_processes_in_one_row() {
    let t = table();
    let res = run(&doc("two-processes"), &t);
    let products = distinct(&t, "product");
    let chair = series(
        &t,
        "year",
        "sales",
        &[("product", &one(&Value::str("chair")))],
    );
    let scores: Vec<f64> = products
        .iter()
        .map(|p| {
            dist(
                &chair,
                &series(&t, "year", "sales", &[("product", &one(p))]),
            )
        })
        .collect();
    assert_eq!(
        bound(&res, "f3", "product"),
        pick(&products, rank(&scores, true).into_iter().take(1))
    );
    assert_eq!(
        bound(&res, "f4", "product"),
        pick(&products, rank(&scores, false).into_iter().take(1))
    );
}

pub fn filtered_month_query_matches_brute_force() {
    let t = table();
    let res = run(&doc("month-2015"), &t);
    let y2015 = [Value::Num(2015.0)];
    let products = distinct(&t, "product");
    let scores: Vec<f64> = products
        .iter()
        .map(|p| {
            let f = [("product", &one(p)[..]), ("year", &y2015[..])];
            dist(
                &series(&t, "month", "profit", &f),
                &series(&t, "month", "sales", &f),
            )
        })
        .collect();
    let top = pick(&products, rank(&scores, true).into_iter().take(10));
    let out = res.get("f3").unwrap();
    // Y varies slowest, then the product.
    let mut want = Vec::new();
    for y in ["sales", "profit"] {
        for p in &top {
            want.push((
                y.to_string(),
                p.clone(),
                series(&t, "month", y, &[("product", &one(p)), ("year", &y2015)]),
            ));
        }
    }
    let got: Vec<_> = out
        .cells
        .iter()
        .map(|c| {
            (
                c.y_attr().to_string(),
                c.bindings()["product"].clone(),
                c.points.clone(),
            )
        })
        .collect();
    assert_eq!(got, want);
}

pub fn joint_variables_match_brute_force() {
    let t = table();
    let res = run(&doc("scatter-pairs"), &t);
    let outer: Vec<(&str, Value)> = ["sales", "profit"]
        .iter()
        .flat_map(|y| ["US", "UK"].map(|l| (*y, Value::str(l))))
        .collect();
    let inner: Vec<(&str, Value)> = ["sales", "profit"]
        .iter()
        .flat_map(|y| ["DE", "FR"].map(|l| (*y, Value::str(l))))
        .collect();
    let s = |(y, l): &(&str, Value)| series(&t, "year", y, &[("location", &one(l))]);
    let scores: Vec<f64> = outer
        .iter()
        .map(|a| inner.iter().map(|b| dist(&s(a), &s(b))).sum())
        .collect();
    let best = &outer[rank(&scores, true)[0]];
    let cells = &res.get("f3").unwrap().cells;
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].y_attr(), best.0);
    assert_eq!(cells[0].bindings()["location"], best.1);
}

pub fn order_derivation_sorts_by_trend() {
    let t = table();
    let res = run(&doc("order"), &t);
    let products = distinct(&t, "product");
    let scores: Vec<f64> = products
        .iter()
        .map(|p| slope(&series(&t, "year", "sales", &[("product", &one(p))])))
        .collect();
    assert_eq!(
        bound(&res, "f2", "product"),
        pick(&products, rank(&scores, false))
    );
}

pub fn real2_matches_brute_force() {
    let t = table();
    let res = run(&doc("real2"), &t);
    let neg = |attr: &str, y: &str| -> Vec<Value> {
        distinct(&t, attr)
            .into_iter()
            .filter(|v| slope(&series(&t, "year", y, &[(attr, &one(v))])) < 0.0)
            .collect()
    };
    let v2 = neg("location", "sales");
    let v4 = neg("category", "profit");
    assert!(
        !v2.is_empty() && !v4.is_empty(),
        "fixture must exercise the filters"
    );
    let rising = |y: &str| -> Vec<Value> {
        distinct(&t, "product")
            .into_iter()
            .filter(|p| {
                let s = series(
                    &t,
                    "year",
                    y,
                    &[("product", &one(p)), ("location", &v2), ("category", &v4)],
                );
                s.len() >= 2 && slope(&s) > 0.0
            })
            .collect()
    };
    let v6 = rising("profit");
    let v7 = rising("sales");
    let both: Vec<Value> = v6.iter().filter(|p| v7.contains(p)).cloned().collect();
    let mut want = Vec::new();
    for y in ["profit", "sales"] {
        for p in &both {
            want.push((
                y.to_string(),
                p.clone(),
                series(&t, "year", y, &[("product", &one(p))]),
            ));
        }
    }
    let got: Vec<_> = res
        .get("f5")
        .unwrap()
        .cells
        .iter()
        .map(|c| {
            (
                c.y_attr().to_string(),
                c.bindings()["product"].clone(),
                c.points.clone(),
            )
        })
        .collect();
    assert_eq!(got, want);
}

// ---- cache-aware fixture ----

pub struct Pairwise {
    pub decl: ProcessDecl,
    pub groups: Groups,
    pub colls: std::collections::HashMap<String, VisCollection>,
}

/// `argmax_v1[k=10] sum_v2 D(f1, f2)` over `n` synthetic series per side.
pub fn pairwise(n: usize) -> Pairwise {
    let text = "Name | X | Y | Z | Process\n\
                f1 | 'x' | 'y' | v1 <-- 'p'.* |\n\
                f2 | 'x' | 'y' | v2 <-- 'p'.* | v3 <-- argmax_v1[k=10] sum_v2 D(f1,f2)\n\
                *f3 | 'x' | 'y' | v3 |\n";
    let t = ColumnTable::new(
        "p",
        vec![
            Column::numeric("x", ColumnKind::Dimension(DimensionKind::Ordinal), [0.0]),
            Column::categorical("p", ["a"]),
            Column::numeric("y", ColumnKind::Measure, [0.0]),
        ],
    )
    .unwrap();
    let q = parse_query(text).unwrap();
    validate_with(&q, &AttributeCatalog::from_table(&t), &Default::default()).unwrap();
    let decl = q.rows[1].process[0].clone();
    let mut groups = Groups::new();
    let names: Vec<Vec<zql_core::Selector>> = (0..n)
        .map(|i| vec![zql_core::Selector::Val(Value::str(&format!("p{i:04}")))])
        .collect();
    let g1 = groups.add(Group {
        vars: vec!["v1".into()],
        tuples: names.clone(),
    });
    let g2 = groups.add(Group {
        vars: vec!["v2".into()],
        tuples: names,
    });
    let cells = |salt: u64| -> Vec<UnitViz> {
        (0..n)
            .map(|i| {
                let ys: Vec<f64> = (0..8)
                    .map(|j| ((i as u64 * 31 + j * 17 + salt) % 97) as f64)
                    .collect();
                UnitViz::from_ys("s", &ys)
            })
            .collect()
    };
    let mut colls = std::collections::HashMap::new();
    colls.insert("f1".to_string(), VisCollection::over(g1, cells(1)));
    colls.insert("f2".to_string(), VisCollection::over(g2, cells(2)));
    Pairwise {
        decl,
        groups,
        colls,
    }
}
