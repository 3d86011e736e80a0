//! Superset prefetch for rows whose domains depend on process results.

use std::collections::{BTreeMap, HashMap};

use super::cost::{request_cardinality, CostModel};
use super::fetch::{build_request, fetch_key, FetchKey};
use super::realize::{Realizer, RowSpec};
use crate::process::{Group, Groups};
use crate::store::{AggregateRequest, ColumnTable};
use crate::value::Selector;
use crate::zql::{ProcessDecl, ValidatedQuery};

/// Superset domain of every process output: all candidates of its loop.
fn widen_process(q: &ValidatedQuery, decl: &ProcessDecl, groups: &mut Groups) {
    let (outputs, tuples) = match decl {
        ProcessDecl::Opt {
            outputs, opt_vars, ..
        } => {
            let mut gids = Vec::new();
            let mut pos = Vec::new();
            for v in opt_vars {
                let Some((g, p)) = groups.lookup(v) else {
                    return;
                };
                let k = gids.iter().position(|x| *x == g).unwrap_or_else(|| {
                    gids.push(g);
                    gids.len() - 1
                });
                pos.push((k, p));
            }
            let lens: Vec<usize> = gids.iter().map(|g| groups.get(*g).len()).collect();
            let total: usize = lens.iter().product();
            let mut out: Vec<Vec<Selector>> = Vec::new();
            let mut idx = vec![0; gids.len()];
            for n in 0..total {
                let mut rem = n;
                for k in (0..gids.len()).rev() {
                    idx[k] = rem % lens[k];
                    rem /= lens[k];
                }
                let t: Vec<Selector> = pos
                    .iter()
                    .map(|&(k, p)| groups.get(gids[k]).tuples[idx[k]][p].clone())
                    .collect();
                if !out.contains(&t) {
                    out.push(t);
                }
            }
            (outputs.clone(), out)
        }
        ProcessDecl::Represent { output, var, .. } => {
            let Some(vals) = groups.distinct_values(var) else {
                return;
            };
            (
                vec![output.clone()],
                vals.into_iter().map(|v| vec![v]).collect(),
            )
        }
    };
    if let Some(info) = q.var(&outputs[0]) {
        groups.insert(
            info.joint,
            Group {
                vars: outputs,
                tuples,
            },
        );
    }
}

/// Superset requests of each prefetchable dynamic row, and rows left to run normally.
pub(crate) struct SupersetPlan {
    pub requests: BTreeMap<usize, Vec<(FetchKey, AggregateRequest)>>,
    pub specs: HashMap<usize, RowSpec>,
    pub fallbacks: Vec<(usize, String)>,
}

/// Groups cells by key and builds one request per key, in first-appearance order.
pub(crate) fn row_requests(
    spec: &RowSpec,
    widen: bool,
    table: &ColumnTable,
) -> Vec<(FetchKey, AggregateRequest)> {
    let mut keys: Vec<(FetchKey, Vec<usize>)> = Vec::new();
    for (i, c) in spec.cells.iter().enumerate() {
        if spec.sources[i] != super::realize::Source::Fetch {
            continue;
        }
        let k = fetch_key(c, widen.then_some(&spec.dyn_in), table);
        match keys.iter_mut().find(|(kk, _)| *kk == k) {
            Some((_, v)) => v.push(i),
            None => keys.push((k, vec![i])),
        }
    }
    keys.into_iter()
        .map(|(k, idx)| {
            let cells: Vec<_> = idx.iter().map(|&i| &*spec.cells[i]).collect();
            let r = build_request(&k, &cells, table);
            (k, r)
        })
        .collect()
}

pub(crate) fn plan_supersets(
    q: &ValidatedQuery,
    table: &ColumnTable,
    base: &Groups,
    static_specs: &[Option<RowSpec>],
    model: &CostModel,
) -> SupersetPlan {
    let mut groups = base.clone();
    let rz = Realizer {
        q,
        table,
        superset: true,
    };
    let mut plan = SupersetPlan {
        requests: BTreeMap::new(),
        specs: HashMap::new(),
        fallbacks: Vec::new(),
    };
    for (r, info) in q.rows.iter().enumerate() {
        if static_specs[r].is_none() {
            if info.derived {
                let refetch = q.query.rows[r].z.iter().any(|z| {
                    matches!(
                        &z.kind,
                        crate::zql::ZKind::Pair {
                            value: crate::zql::ZValue::Cmp(..) | crate::zql::ZValue::In(_),
                            ..
                        }
                    )
                });
                if refetch {
                    plan.fallbacks
                        .push((r, "derived row over process results re-fetches".into()));
                }
            } else {
                match rz.row(r, &mut groups) {
                    Ok(spec) => {
                        let reqs = row_requests(&spec, true, table);
                        let over = reqs
                            .iter()
                            .map(|(_, q)| request_cardinality(q, table))
                            .max()
                            .unwrap_or(0);
                        if over > model.max_groupby {
                            plan.fallbacks.push((
                                r,
                                format!("superset of {over} group values exceeds the cap"),
                            ));
                        } else if spec.cells.iter().any(|c| spec.dyn_in.contains(&c.x_attr)) {
                            plan.fallbacks
                                .push((r, "IN filter on the x attribute".into()));
                        } else {
                            plan.requests.insert(r, reqs);
                            plan.specs.insert(r, spec);
                        }
                    }
                    Err(e) => plan.fallbacks.push((r, e.to_string())),
                }
            }
        }
        for decl in &q.query.rows[r].process {
            widen_process(q, decl, &mut groups);
        }
    }
    plan
}
