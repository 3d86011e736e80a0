//! Grouping cells into backend requests and slicing results back into cells.

use std::collections::BTreeSet;

use crate::process::CellSpec;
use crate::store::{
    AggregateRequest, Atom, Binning, Cardinalities, CmpOp, ColumnTable, GroupedResult, Predicate,
};
use crate::value::Value;

/// Cells sharing a key are served by one request.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct FetchKey {
    pub x_attr: String,
    pub binning: Binning,
    pub dims: Vec<String>,
    pub atoms: Vec<Atom>,
}

fn column_order(table: &ColumnTable, a: &str) -> (usize, String) {
    (
        table
            .resolve(a)
            .ok()
            .and_then(|c| c.first().copied())
            .unwrap_or(usize::MAX),
        a.to_string(),
    )
}

/// Request key of a cell. With `widen`, IN filters on those attributes
/// become group dimensions instead.
pub(crate) fn fetch_key(
    spec: &CellSpec,
    widen: Option<&BTreeSet<String>>,
    table: &ColumnTable,
) -> FetchKey {
    let mut dims: Vec<String> = spec
        .bindings
        .keys()
        .filter(|a| **a != spec.x_attr)
        .cloned()
        .collect();
    let mut atoms: Vec<Atom> = spec.filter.disjuncts.concat();
    if let Some(w) = widen {
        atoms.retain(|a| !(matches!(a, Atom::In { .. }) && w.contains(a.attr())));
        for a in w {
            if !dims.contains(a) {
                dims.push(a.clone());
            }
        }
    }
    if let Some(v) = spec.bindings.get(&spec.x_attr) {
        atoms.push(Atom::Cmp {
            attr: spec.x_attr.clone(),
            op: CmpOp::Eq,
            value: v.clone(),
        });
    }
    dims.sort_by_key(|d| column_order(table, d));
    FetchKey {
        x_attr: spec.x_attr.clone(),
        binning: spec.x_binning,
        dims,
        atoms,
    }
}

/// One request covering `cells`, all of which map to `key`.
pub(crate) fn build_request(
    key: &FetchKey,
    cells: &[&CellSpec],
    table: &ColumnTable,
) -> AggregateRequest {
    let mut y_terms = Vec::new();
    for c in cells {
        let t = (c.y_attr.clone(), c.agg);
        if !y_terms.contains(&t) {
            y_terms.push(t);
        }
    }
    let mut conj = key.atoms.clone();
    for d in &key.dims {
        let vals: Option<BTreeSet<&Value>> = cells.iter().map(|c| c.bindings.get(d)).collect();
        if let Some(vals) = vals {
            if (vals.len() as u64) < table.distinct_count(d) {
                conj.push(Atom::In {
                    attr: d.clone(),
                    values: vals.into_iter().cloned().collect(),
                });
            }
        }
    }
    AggregateRequest {
        x_attr: key.x_attr.clone(),
        y_terms,
        group_dims: key.dims.clone(),
        filter: Predicate {
            disjuncts: vec![conj],
        },
        x_binning: key.binning,
    }
}

enum Cond<'a> {
    Eq(&'a Value),
    In(&'a [Value]),
}

/// Series of `spec` sliced out of a result whose dimensions cover its bindings.
pub(crate) fn serve(spec: &CellSpec, result: &GroupedResult) -> Option<Vec<(Value, f64)>> {
    let yi = result
        .y_terms
        .iter()
        .position(|(y, f)| *y == spec.y_attr && *f == spec.agg)?;
    let mut conds: Vec<(usize, Cond)> = Vec::new();
    for (a, v) in &spec.bindings {
        if *a != spec.x_attr {
            conds.push((result.dim_index(a)?, Cond::Eq(v)));
        }
    }
    for conj in &spec.filter.disjuncts {
        for atom in conj {
            if let Atom::In { attr, values } = atom {
                if let Some(i) = result.dim_index(attr) {
                    conds.push((i, Cond::In(values)));
                }
            }
        }
    }
    let direct =
        conds.len() == result.group_dims.len() && conds.iter().all(|c| matches!(c.1, Cond::Eq(_)));
    if direct {
        let mut key = vec![Value::Num(0.0); result.group_dims.len()];
        for (i, c) in &conds {
            if let Cond::Eq(v) = c {
                key[*i] = (*v).clone();
            }
        }
        return Some(result.series(&key).map_or_else(Vec::new, |s| {
            s.into_iter().map(|(x, ys)| (x, ys[yi])).collect()
        }));
    }
    let states = result.rollup(|k| {
        conds.iter().all(|(i, c)| match c {
            Cond::Eq(v) => k[*i] == **v,
            Cond::In(vs) => vs.contains(&k[*i]),
        })
    });
    Some(
        states
            .into_iter()
            .map(|(x, st)| (x, st[yi].finish(spec.agg)))
            .collect(),
    )
}
