use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::store::{AggFn, Binning, Predicate};
use crate::value::{Selector, Value};
use crate::zql::VizType;

/// Identity of one visualization: what to fetch and how to draw it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellSpec {
    pub x_attr: String,
    pub y_attr: String,
    pub bindings: BTreeMap<String, Value>,
    pub filter: Predicate,
    pub agg: AggFn,
    pub x_binning: Binning,
    pub vtype: VizType,
}

impl CellSpec {
    pub fn new(x: &str, y: &str) -> Self {
        CellSpec {
            x_attr: x.to_string(),
            y_attr: y.to_string(),
            bindings: BTreeMap::new(),
            filter: Predicate::always(),
            agg: AggFn::Sum,
            x_binning: Binning::None,
            vtype: VizType::Bar,
        }
    }

    pub fn bind(mut self, attr: &str, v: impl Into<Value>) -> Self {
        self.bindings.insert(attr.to_string(), v.into());
        self
    }
}

/// Data of one visualization.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitViz {
    pub spec: Arc<CellSpec>,
    pub points: Vec<(Value, f64)>,
}

impl UnitViz {
    pub fn new(spec: CellSpec, points: Vec<(Value, f64)>) -> Self {
        UnitViz {
            spec: Arc::new(spec),
            points,
        }
    }

    /// Spec-only cell, before data is fetched.
    pub fn placeholder(spec: Arc<CellSpec>) -> Self {
        UnitViz {
            spec,
            points: Vec::new(),
        }
    }

    /// Synthetic cell over positions 0..n, used by tests and benches.
    pub fn from_ys(label: &str, ys: &[f64]) -> Self {
        let spec = CellSpec::new("x", "y").bind("id", label);
        UnitViz::new(
            spec,
            ys.iter()
                .enumerate()
                .map(|(i, &y)| (Value::Num(i as f64), y))
                .collect(),
        )
    }

    pub fn x_attr(&self) -> &str {
        &self.spec.x_attr
    }

    pub fn y_attr(&self) -> &str {
        &self.spec.y_attr
    }

    pub fn bindings(&self) -> &BTreeMap<String, Value> {
        &self.spec.bindings
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Rough in-memory footprint, used by the cache model.
    pub fn approx_bytes(&self) -> usize {
        64 + 24 * self.points.len()
    }
}

pub type GroupId = usize;

/// Jointly iterated variables and their value tuples, in iteration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub vars: Vec<String>,
    pub tuples: Vec<Vec<Selector>>,
}

impl Group {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn position(&self, var: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == var)
    }
}

/// Registry of all iteration groups of a running query.
#[derive(Clone, Debug, Default)]
pub struct Groups {
    groups: Vec<Group>,
    by_var: HashMap<String, (GroupId, usize)>,
}

impl Groups {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, group: Group) -> GroupId {
        let id = self.groups.len();
        for (i, v) in group.vars.iter().enumerate() {
            self.by_var.insert(v.clone(), (id, i));
        }
        self.groups.push(group);
        id
    }

    /// Places `group` at a fixed id, growing the registry with empty slots as needed.
    pub fn insert(&mut self, id: GroupId, group: Group) {
        if self.groups.len() <= id {
            self.groups.resize(
                id + 1,
                Group {
                    vars: Vec::new(),
                    tuples: Vec::new(),
                },
            );
        }
        for (i, v) in group.vars.iter().enumerate() {
            self.by_var.insert(v.clone(), (id, i));
        }
        self.groups[id] = group;
    }

    /// Adds a group without registering its variables.
    pub fn add_anonymous(&mut self, tuples: Vec<Vec<Selector>>) -> GroupId {
        self.groups.push(Group {
            vars: Vec::new(),
            tuples,
        });
        self.groups.len() - 1
    }

    pub fn get(&self, id: GroupId) -> &Group {
        &self.groups[id]
    }

    pub fn lookup(&self, var: &str) -> Option<(GroupId, usize)> {
        self.by_var.get(var).copied()
    }

    pub fn contains(&self, var: &str) -> bool {
        self.by_var.contains_key(var)
    }

    /// Value of `var` at position `idx` of its group.
    pub fn value(&self, var: &str, idx: usize) -> Option<&Selector> {
        let (g, p) = self.lookup(var)?;
        self.groups[g].tuples.get(idx).map(|t| &t[p])
    }

    /// Distinct values of `var` in first-appearance order.
    pub fn distinct_values(&self, var: &str) -> Option<Vec<Selector>> {
        let (g, p) = self.lookup(var)?;
        let mut out: Vec<Selector> = Vec::new();
        for t in &self.groups[g].tuples {
            if !out.contains(&t[p]) {
                out.push(t[p].clone());
            }
        }
        Some(out)
    }
}

/// One dimension of a collection.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    /// `None` for positional (non-iterable) axes.
    pub group: Option<GroupId>,
    pub len: usize,
}

/// N-dimensional array of visualizations, row-major over `axes`.
#[derive(Clone, Debug, PartialEq)]
pub struct VisCollection {
    pub axes: Vec<Axis>,
    pub cells: Vec<UnitViz>,
}

impl VisCollection {
    pub fn new(axes: Vec<Axis>, cells: Vec<UnitViz>) -> Self {
        debug_assert_eq!(axes.iter().map(|a| a.len).product::<usize>(), cells.len());
        VisCollection { axes, cells }
    }

    /// A flat list with one positional axis.
    pub fn flat(cells: Vec<UnitViz>) -> Self {
        VisCollection {
            axes: vec![Axis {
                group: None,
                len: cells.len(),
            }],
            cells,
        }
    }

    /// A one-dimensional collection iterated by `group`.
    pub fn over(group: GroupId, cells: Vec<UnitViz>) -> Self {
        VisCollection {
            axes: vec![Axis {
                group: Some(group),
                len: cells.len(),
            }],
            cells,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (i, a)| acc * a.len + i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_index() {
        let cells = (0..6)
            .map(|i| UnitViz::from_ys(&i.to_string(), &[i as f64]))
            .collect();
        let c = VisCollection::new(
            vec![
                Axis {
                    group: Some(0),
                    len: 2,
                },
                Axis {
                    group: Some(1),
                    len: 3,
                },
            ],
            cells,
        );
        assert_eq!(c.flat_index(&[1, 2]), 5);
        assert_eq!(c.cells[c.flat_index(&[1, 0])].points[0].1, 3.0);
    }

    #[test]
    fn distinct_values_keep_first_order() {
        let mut g = Groups::new();
        let v = |s: &str| Selector::Val(Value::str(s));
        g.add(Group {
            vars: vec!["a".into()],
            tuples: vec![vec![v("q")], vec![v("p")], vec![v("q")]],
        });
        assert_eq!(g.distinct_values("a").unwrap(), vec![v("q"), v("p")]);
    }
}
