//! Fitted cost model, group-by cardinality estimates, and query combination.

use std::collections::BTreeMap;

use crate::store::{AggregateRequest, Atom, Binning, Cardinalities, CmpOp};

/// Linear latency model per phase, plus the group-by cap used by combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub fixed_ms: f64,
    pub per_query_ms: f64,
    pub per_100_group_values_ms: f64,
    pub max_groupby: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            fixed_ms: 1635.0,
            per_query_ms: 908.0,
            per_100_group_values_ms: 1.22,
            max_groupby: 100_000,
        }
    }
}

impl CostModel {
    /// Group values one extra request is worth: merging pays off while the
    /// merged cardinality grows by less than this.
    pub fn alpha(&self) -> f64 {
        self.per_query_ms / (self.per_100_group_values_ms / 100.0)
    }

    /// Predicted latency of one phase.
    pub fn phase_ms(&self, cardinalities: &[u64]) -> f64 {
        if cardinalities.is_empty() {
            return 0.0;
        }
        let gv: f64 = cardinalities.iter().map(|&c| c as f64).sum();
        self.fixed_ms
            + self.per_query_ms * cardinalities.len() as f64
            + self.per_100_group_values_ms * gv / 100.0
    }
}

/// Requests merged into one backend call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinedGroup {
    /// Indices into the phase's request list, ascending.
    pub members: Vec<usize>,
    /// Estimated group-by values of the combined call.
    pub cardinality: u64,
}

/// Requests submitted together.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Phase {
    pub groups: Vec<CombinedGroup>,
}

/// Ordered phases of backend calls.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchPlan {
    pub phases: Vec<Phase>,
}

/// Sum of predicted phase latencies.
pub fn predict_cost(plan: &BatchPlan, model: &CostModel) -> f64 {
    plan.phases
        .iter()
        .map(|p| model.phase_ms(&p.groups.iter().map(|g| g.cardinality).collect::<Vec<_>>()))
        .sum()
}

/// Upper bound on the values an attribute takes under `req`'s filter.
fn capped(req: &AggregateRequest, attr: &str, base: u64) -> u64 {
    let [conj] = req.filter.disjuncts.as_slice() else {
        return base;
    };
    conj.iter().fold(base, |n, a| match a {
        Atom::Cmp {
            attr: a,
            op: CmpOp::Eq,
            ..
        } if a == attr => n.min(1),
        Atom::In { attr: a, values } if a == attr => n.min(values.len() as u64),
        _ => n,
    })
}

/// Estimated distinct count of every group-by slot: the (binned) x key and each dimension.
pub fn slot_counts(req: &AggregateRequest, cards: &dyn Cardinalities) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    let xd = cards.distinct_count(&req.x_attr).max(1);
    let x = match req.x_binning {
        Binning::Count(n) => xd.min(n as u64),
        _ => xd,
    };
    out.insert(req.x_key(), capped(req, &req.x_attr, x).max(1));
    for d in &req.group_dims {
        let n = capped(req, d, cards.distinct_count(d).max(1)).max(1);
        out.insert(d.clone(), n);
    }
    out
}

fn product(slots: &BTreeMap<String, u64>) -> u64 {
    slots.values().fold(1u64, |a, &b| a.saturating_mul(b))
}

fn union(a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>) -> BTreeMap<String, u64> {
    let mut out = a.clone();
    for (k, &v) in b {
        let e = out.entry(k.clone()).or_insert(v);
        *e = (*e).max(v);
    }
    out
}

/// Estimated group-by values of a single request.
pub fn request_cardinality(req: &AggregateRequest, cards: &dyn Cardinalities) -> u64 {
    product(&slot_counts(req, cards))
}

/// Estimated group-by values when `reqs` run as one combined call.
pub fn combined_cardinality(reqs: &[&AggregateRequest], cards: &dyn Cardinalities) -> u64 {
    let slots = reqs.iter().fold(BTreeMap::new(), |acc, r| {
        union(&acc, &slot_counts(r, cards))
    });
    product(&slots)
}

/// Effective increase in group-by values when `q_prime` joins `q`.
pub fn efgv(q: &AggregateRequest, q_prime: &AggregateRequest, cards: &dyn Cardinalities) -> u64 {
    let have = slot_counts(q, cards);
    slot_counts(q_prime, cards)
        .into_iter()
        .filter(|(g, _)| !have.contains_key(g))
        .fold(1u64, |a, (_, n)| a.saturating_mul(n))
}

/// Greedy agglomerative combination of one phase's requests.
pub fn combine_phase(
    requests: &[AggregateRequest],
    model: &CostModel,
    cards: &dyn Cardinalities,
) -> Phase {
    let mut clusters: Vec<(Vec<usize>, BTreeMap<String, u64>)> = requests
        .iter()
        .enumerate()
        .map(|(i, r)| (vec![i], slot_counts(r, cards)))
        .collect();
    let per_value = model.per_100_group_values_ms / 100.0;
    loop {
        let mut best: Option<(usize, usize, f64, BTreeMap<String, u64>)> = None;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let merged = union(&clusters[i].1, &clusters[j].1);
                let m = product(&merged);
                if m > model.max_groupby {
                    continue;
                }
                let (ci, cj) = (product(&clusters[i].1), product(&clusters[j].1));
                let delta = -model.per_query_ms + per_value * (m as f64 - ci as f64 - cj as f64);
                if best.as_ref().is_none_or(|b| delta < b.2) {
                    best = Some((i, j, delta, merged));
                }
            }
        }
        match best {
            Some((i, j, delta, merged)) if delta < 0.0 => {
                let (mj, _) = clusters.remove(j);
                clusters[i].0.extend(mj);
                clusters[i].0.sort_unstable();
                clusters[i].1 = merged;
            }
            _ => break,
        }
    }
    Phase {
        groups: clusters
            .into_iter()
            .map(|(members, s)| CombinedGroup {
                members,
                cardinality: product(&s),
            })
            .collect(),
    }
}

/// Every request in its own group.
pub fn singleton_phase(requests: &[AggregateRequest], cards: &dyn Cardinalities) -> Phase {
    Phase {
        groups: requests
            .iter()
            .enumerate()
            .map(|(i, r)| CombinedGroup {
                members: vec![i],
                cardinality: request_cardinality(r, cards),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::AggFn;
    use std::collections::HashMap;

    fn cards(pairs: &[(&str, u64)]) -> HashMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn req(x: &str, dims: &[&str]) -> AggregateRequest {
        AggregateRequest::new(x, vec![("sales", AggFn::Sum)]).group_by(dims)
    }

    #[test]
    fn one_phase_arithmetic() {
        let plan = BatchPlan {
            phases: vec![Phase {
                groups: vec![CombinedGroup {
                    members: vec![0],
                    cardinality: 10_000,
                }],
            }],
        };
        assert!((predict_cost(&plan, &CostModel::default()) - 2665.0).abs() < 1e-9);
        assert_eq!(
            predict_cost(&BatchPlan::default(), &CostModel::default()),
            0.0
        );
    }

    #[test]
    fn efgv_examples() {
        let c = cards(&[
            ("product", 100),
            ("year", 10),
            ("location", 50),
            ("a", 3),
            ("b", 4),
            ("x", 1),
        ]);
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
        assert_eq!(efgv(&req("x", &[]), &req("x", &["a", "b"]), &c), 12);
    }

    #[test]
    fn filter_caps_slot() {
        let c = cards(&[("year", 10), ("product", 100)]);
        let r = req("year", &["product"]).filter(crate::store::Predicate::atom(Atom::In {
            attr: "product".into(),
            values: vec!["a".into(), "b".into()],
        }));
        assert_eq!(request_cardinality(&r, &c), 20);
    }

    #[test]
    fn shared_dims_merge() {
        let c = cards(&[("year", 1), ("product", 10)]);
        let p = combine_phase(
            &[req("year", &["product"]), req("year", &["product"])],
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
    fn cap_refuses() {
        let c = cards(&[("x", 1), ("a", 60_000), ("b", 70_000)]);
        let p = combine_phase(
            &[req("x", &["a"]), req("x", &["b"])],
            &CostModel::default(),
            &c,
        );
        assert_eq!(p.groups.len(), 2);
    }

    #[test]
    fn single_request() {
        let c = cards(&[("x", 5)]);
        let p = combine_phase(&[req("x", &[])], &CostModel::default(), &c);
        assert_eq!(
            p.groups,
            vec![CombinedGroup {
                members: vec![0],
                cardinality: 5
            }]
        );
    }
}
