//! Turns rows into cell specs: axis enumeration, bound groups, derived collections.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use super::PlanError;
use crate::process::{Axis, CellSpec, Group, GroupId, Groups};
use crate::store::{Atom, ColumnTable, Predicate, CROSS};
use crate::value::{Selector, Value};
use crate::zql::{
    AxisKind, Literal, NameExpr, SetExpr, ValidatedQuery, VarRole, VizCell, VizType, YTransform,
    ZKind, ZValue,
};

/// Cell specs of a row with the source of each cell's data.
type Cells = Vec<(Arc<CellSpec>, Source)>;

/// Where a cell's data comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Source {
    Fetch,
    Copy { row: usize, idx: usize },
}

/// Cell layout of one row, before data.
#[derive(Clone, Debug)]
pub(crate) struct RowSpec {
    pub axes: Vec<Axis>,
    pub cells: Vec<Arc<CellSpec>>,
    pub sources: Vec<Source>,
    /// Attributes constrained by `[? IN v]` with a process-derived `v`.
    pub dyn_in: BTreeSet<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Col {
    X,
    Y,
    Z,
}

enum Dom<'s> {
    Names(Col),
    Values(&'s str),
}

#[derive(Clone, Debug)]
enum Slot {
    X(usize),
    Y(usize),
    Attr(String, usize),
    Pair { name: usize, value: usize },
}

struct AxisB {
    group: Option<GroupId>,
    key: (u32, usize),
    tuples: Vec<Vec<Selector>>,
    slots: Vec<Slot>,
}

fn lit_value(l: &Literal) -> Value {
    match l {
        Literal::Str(s) => Value::str(s),
        Literal::Num(n) => Value::Num(*n),
    }
}

fn sel_name(s: &Selector) -> Option<String> {
    match s {
        Selector::Val(Value::Str(s)) => Some(s.to_string()),
        Selector::Val(v) => Some(v.to_string()),
        Selector::Star => None,
    }
}

fn push_unique(out: &mut Vec<Selector>, v: Selector) {
    if !out.contains(&v) {
        out.push(v);
    }
}

/// Realization context. In superset mode set operations over process-derived
/// variables widen instead of narrowing, and dynamic IN filters are dropped.
pub(crate) struct Realizer<'a> {
    pub q: &'a ValidatedQuery,
    pub table: &'a ColumnTable,
    pub superset: bool,
}

impl Realizer<'_> {
    fn dynamic(&self, e: &SetExpr) -> bool {
        let mut vs = Vec::new();
        e.vars(&mut vs);
        vs.iter().any(|v| self.q.var(v).is_some_and(|i| i.dynamic))
    }

    fn lit(&self, dom: &Dom, l: &Literal) -> Selector {
        match dom {
            Dom::Names(_) => Selector::Val(Value::str(&lit_value(l).to_string())),
            Dom::Values(a) => Selector::Val(self.table.coerce(a, &lit_value(l))),
        }
    }

    fn var_values(&self, v: &str, groups: &Groups) -> Result<Vec<Selector>, PlanError> {
        groups
            .distinct_values(v)
            .ok_or_else(|| PlanError::UnboundedDomain(v.to_string()))
    }

    fn eval_set(
        &self,
        e: &SetExpr,
        dom: &Dom,
        groups: &Groups,
    ) -> Result<Vec<Selector>, PlanError> {
        let name = |s: &String| Selector::Val(Value::str(s));
        Ok(match e {
            SetExpr::All => match dom {
                Dom::Names(Col::X) => self.q.catalog.x_eligible.iter().map(name).collect(),
                Dom::Names(Col::Y) => self.q.catalog.y_eligible.iter().map(name).collect(),
                Dom::Names(Col::Z) => self.q.catalog.attributes.iter().map(name).collect(),
                Dom::Values(a) => self
                    .table
                    .distinct(a)
                    .map_err(|e| PlanError::Malformed(e.to_string()))?
                    .into_iter()
                    .map(Selector::Val)
                    .collect(),
            },
            SetExpr::Single(l) => vec![self.lit(dom, l)],
            SetExpr::Set(ls) => {
                let mut out = Vec::new();
                for l in ls {
                    push_unique(&mut out, self.lit(dom, l));
                }
                out
            }
            SetExpr::Var(v) => self.var_values(v, groups)?,
            SetExpr::Diff(a, b) => {
                let a = self.eval_set(a, dom, groups)?;
                if self.superset && self.dynamic(b) {
                    a
                } else {
                    let b = self.eval_set(b, dom, groups)?;
                    a.into_iter().filter(|v| !b.contains(v)).collect()
                }
            }
            SetExpr::Union(a, b) => self.union(a, b, dom, groups)?,
            SetExpr::Plus(a, b) => {
                let mut vs = Vec::new();
                e.vars(&mut vs);
                if vs.is_empty() {
                    return Err(PlanError::NotSupported(
                        "table-algebra `+` composition".into(),
                    ));
                }
                self.union(a, b, dom, groups)?
            }
            SetExpr::Intersect(a, b) => {
                let a = self.eval_set(a, dom, groups)?;
                let b = self.eval_set(b, dom, groups)?;
                a.into_iter().filter(|v| b.contains(v)).collect()
            }
            SetExpr::Cross(a, b) => match dom {
                Dom::Names(Col::Y) | Dom::Values(_) => {
                    return Err(PlanError::NotSupported("`×` outside the X column".into()))
                }
                Dom::Names(_) => {
                    let a = self.eval_set(a, dom, groups)?;
                    let b = self.eval_set(b, dom, groups)?;
                    let mut out = Vec::new();
                    for x in a.iter().filter_map(sel_name) {
                        for y in b.iter().filter_map(sel_name) {
                            push_unique(
                                &mut out,
                                Selector::Val(Value::str(&format!("{x}{CROSS}{y}"))),
                            );
                        }
                    }
                    out
                }
            },
            SetExpr::Div(..) => {
                return Err(PlanError::NotSupported(
                    "table-algebra `/` composition".into(),
                ))
            }
        })
    }

    fn union(
        &self,
        a: &SetExpr,
        b: &SetExpr,
        dom: &Dom,
        groups: &Groups,
    ) -> Result<Vec<Selector>, PlanError> {
        let mut out = self.eval_set(a, dom, groups)?;
        for v in self.eval_set(b, dom, groups)? {
            push_unique(&mut out, v);
        }
        Ok(out)
    }

    fn where_values(
        &self,
        attr: &str,
        op: crate::store::CmpOp,
        l: &Literal,
    ) -> Result<Vec<Selector>, PlanError> {
        let bound = self.table.coerce(attr, &lit_value(l));
        Ok(self
            .table
            .distinct(attr)
            .map_err(|e| PlanError::Malformed(e.to_string()))?
            .into_iter()
            .filter(|v| op.holds(v, &bound))
            .map(Selector::Val)
            .collect())
    }

    fn joint(&self, var: &str) -> Result<GroupId, PlanError> {
        self.q
            .var(var)
            .map(|v| v.joint)
            .ok_or_else(|| PlanError::Internal(format!("unvalidated variable `{var}`")))
    }

    /// Slot a variable fills when referenced in column `col`.
    fn var_slot(&self, v: &str, col: Col, groups: &Groups) -> Result<(GroupId, Slot), PlanError> {
        let (g, p) = groups
            .lookup(v)
            .ok_or_else(|| PlanError::UnboundedDomain(v.to_string()))?;
        let info = self
            .q
            .var(v)
            .ok_or_else(|| PlanError::Internal(format!("unvalidated variable `{v}`")))?;
        let slot = match col {
            Col::X => Slot::X(p),
            Col::Y => Slot::Y(p),
            Col::Z => match &info.role {
                VarRole::Attr(a) => Slot::Attr(a.clone(), p),
                VarRole::AttrValue(_) => {
                    let group = groups.get(g);
                    let name = group
                        .vars
                        .iter()
                        .position(|w| self.q.var(w).is_some_and(|i| i.role == VarRole::AttrName))
                        .ok_or_else(|| {
                            PlanError::Malformed(format!("`{v}` has no attribute variable"))
                        })?;
                    Slot::Pair { name, value: p }
                }
                VarRole::AttrName => {
                    return Err(PlanError::NotSupported(format!(
                        "attribute variable `{v}` used without its values"
                    )))
                }
                VarRole::X | VarRole::Y => {
                    return Err(PlanError::Malformed(format!(
                        "axis variable `{v}` used in a Z column"
                    )))
                }
            },
        };
        Ok((g, slot))
    }

    fn role_attr(&self, e: &SetExpr) -> Result<String, PlanError> {
        let mut vs = Vec::new();
        e.vars(&mut vs);
        let mut attr: Option<String> = None;
        for v in &vs {
            match self.q.var(v).map(|i| &i.role) {
                Some(VarRole::Attr(a)) if attr.as_ref().is_none_or(|b| b == a) => {
                    attr = Some(a.clone())
                }
                _ => {
                    return Err(PlanError::NotSupported(format!(
                        "Z expression over `{}`",
                        vs.join(", ")
                    )))
                }
            }
        }
        attr.ok_or_else(|| PlanError::Malformed("Z expression needs a variable".into()))
    }

    fn axis_bind(
        &self,
        col: Col,
        v: &str,
        e: &SetExpr,
        groups: &Groups,
    ) -> Result<(GroupId, Group), PlanError> {
        let vals = self.eval_set(e, &Dom::Names(col), groups)?;
        Ok((
            self.joint(v)?,
            Group {
                vars: vec![v.to_string()],
                tuples: vals.into_iter().map(|s| vec![s]).collect(),
            },
        ))
    }

    fn z_bind(&self, z: &ZKind, groups: &Groups) -> Result<Option<(GroupId, Group)>, PlanError> {
        Ok(Some(match z {
            ZKind::Bind { var, attr, value } => {
                let vals = match value {
                    ZValue::Lit(l) => vec![Selector::Val(self.table.coerce(attr, &lit_value(l)))],
                    ZValue::Set(e) => self.eval_set(e, &Dom::Values(attr), groups)?,
                    ZValue::Where(op, l) => self.where_values(attr, *op, l)?,
                    _ => {
                        return Err(PlanError::Malformed(format!(
                            "cannot bind `{var}` to a predicate"
                        )))
                    }
                };
                (
                    self.joint(var)?,
                    Group {
                        vars: vec![var.clone()],
                        tuples: vals.into_iter().map(|s| vec![s]).collect(),
                    },
                )
            }
            ZKind::AttrValueBind {
                attr_var,
                value_var,
                attrs,
            } => {
                let names = self.eval_set(attrs, &Dom::Names(Col::Z), groups)?;
                let mut tuples = Vec::new();
                for n in names.iter().filter_map(sel_name) {
                    for v in self
                        .table
                        .distinct(&n)
                        .map_err(|e| PlanError::Malformed(e.to_string()))?
                    {
                        tuples.push(vec![Selector::Val(Value::str(&n)), Selector::Val(v)]);
                    }
                }
                (
                    self.joint(attr_var)?,
                    Group {
                        vars: vec![attr_var.clone(), value_var.clone()],
                        tuples,
                    },
                )
            }
            _ => return Ok(None),
        }))
    }

    /// Registers the groups a row binds over static domains, without realizing the row.
    pub fn static_binds(&self, r: usize, groups: &mut Groups) -> Result<(), PlanError> {
        let row = &self.q.query.rows[r];
        let is_static = |v: &str| self.q.var(v).is_some_and(|i| !i.dynamic);
        for (col, cell) in [(Col::X, &row.x), (Col::Y, &row.y)] {
            if let AxisKind::Bind(v, e) = &cell.kind {
                if is_static(v) {
                    let (g, group) = self.axis_bind(col, v, e, groups)?;
                    groups.insert(g, group);
                }
            }
        }
        for z in &row.z {
            let var = match &z.kind {
                ZKind::Bind { var, value, .. } if *value != ZValue::Derived => var,
                ZKind::AttrValueBind { attr_var, .. } => attr_var,
                _ => continue,
            };
            if is_static(var) {
                if let Some((g, group)) = self.z_bind(&z.kind, groups)? {
                    groups.insert(g, group);
                }
            }
        }
        Ok(())
    }

    /// Realizes a non-derived row, registering the groups it binds.
    pub fn row(&self, r: usize, groups: &mut Groups) -> Result<RowSpec, PlanError> {
        let row = &self.q.query.rows[r];
        let mut axes: Vec<AxisB> = Vec::new();
        let mut cx: Option<String> = None;
        let mut cy: Option<String> = None;
        let mut cbind: Vec<(String, Value)> = Vec::new();
        let mut atoms: Vec<Atom> = Vec::new();
        let mut dyn_in = BTreeSet::new();

        fn add_ref(
            axes: &mut Vec<AxisB>,
            groups: &Groups,
            g: GroupId,
            slot: Slot,
            key: (u32, usize),
        ) {
            if let Some(a) = axes.iter_mut().find(|a| a.group == Some(g)) {
                a.slots.push(slot);
                a.key = a.key.min(key);
            } else {
                axes.push(AxisB {
                    group: Some(g),
                    key,
                    tuples: groups.get(g).tuples.clone(),
                    slots: vec![slot],
                });
            }
        }
        fn anon(axes: &mut Vec<AxisB>, values: Vec<Selector>, slot: Slot, key: (u32, usize)) {
            axes.push(AxisB {
                group: None,
                key,
                tuples: values.into_iter().map(|v| vec![v]).collect(),
                slots: vec![slot],
            });
        }

        for (col, cell, pos) in [(Col::X, &row.x, 0usize), (Col::Y, &row.y, 1)] {
            let key = (cell.annot.priority.unwrap_or(u32::MAX), pos);
            let slot0 = if col == Col::X {
                Slot::X(0)
            } else {
                Slot::Y(0)
            };
            match &cell.kind {
                AxisKind::Expr(SetExpr::Single(l)) => {
                    let name = lit_value(l).to_string();
                    if col == Col::X {
                        cx = Some(name)
                    } else {
                        cy = Some(name)
                    }
                }
                AxisKind::Expr(SetExpr::Var(v)) => {
                    let (g, slot) = self.var_slot(v, col, groups)?;
                    add_ref(&mut axes, groups, g, slot, key);
                }
                AxisKind::Expr(e) => {
                    let vals = self.eval_set(e, &Dom::Names(col), groups)?;
                    anon(&mut axes, vals, slot0, key);
                }
                AxisKind::Bind(v, e) => {
                    let (g, group) = self.axis_bind(col, v, e, groups)?;
                    groups.insert(g, group);
                    add_ref(&mut axes, groups, g, slot0, key);
                }
                AxisKind::Empty | AxisKind::DerivedBind(_) => {
                    return Err(PlanError::Malformed(format!(
                        "row `{}` lacks a {} attribute",
                        row.name.var,
                        if col == Col::X { "X" } else { "Y" }
                    )))
                }
            }
        }

        for (zi, z) in row.z.iter().enumerate() {
            let key = (z.annot.priority.unwrap_or(u32::MAX), 2 + zi);
            match &z.kind {
                ZKind::Empty => {}
                ZKind::Pair { attr, value } => match value {
                    ZValue::Lit(l) => {
                        cbind.push((attr.clone(), self.table.coerce(attr, &lit_value(l))))
                    }
                    ZValue::Set(SetExpr::Var(v)) => {
                        let (g, p) = groups
                            .lookup(v)
                            .ok_or_else(|| PlanError::UnboundedDomain(v.clone()))?;
                        add_ref(&mut axes, groups, g, Slot::Attr(attr.clone(), p), key);
                    }
                    ZValue::Set(e) => {
                        let vals = self.eval_set(e, &Dom::Values(attr), groups)?;
                        anon(&mut axes, vals, Slot::Attr(attr.clone(), 0), key);
                    }
                    ZValue::Cmp(op, l) => atoms.push(Atom::Cmp {
                        attr: attr.clone(),
                        op: *op,
                        value: self.table.coerce(attr, &lit_value(l)),
                    }),
                    ZValue::In(e) => self.in_atom(attr, e, groups, &mut atoms, &mut dyn_in)?,
                    ZValue::Where(op, l) => {
                        let vals = self.where_values(attr, *op, l)?;
                        anon(&mut axes, vals, Slot::Attr(attr.clone(), 0), key);
                    }
                    ZValue::Derived => {
                        return Err(PlanError::Malformed("`_` outside a derived row".into()))
                    }
                },
                ZKind::Expr(SetExpr::Var(v)) => {
                    let (g, slot) = self.var_slot(v, Col::Z, groups)?;
                    add_ref(&mut axes, groups, g, slot, key);
                }
                ZKind::Expr(e) => {
                    let attr = self.role_attr(e)?;
                    let vals = self.eval_set(e, &Dom::Values(&attr), groups)?;
                    anon(&mut axes, vals, Slot::Attr(attr, 0), key);
                }
                ZKind::Bind { attr, .. } => {
                    let (g, group) = self.z_bind(&z.kind, groups)?.expect("bind cell");
                    groups.insert(g, group);
                    add_ref(&mut axes, groups, g, Slot::Attr(attr.clone(), 0), key);
                }
                ZKind::AttrValueBind { .. } => {
                    let (g, group) = self.z_bind(&z.kind, groups)?.expect("bind cell");
                    groups.insert(g, group);
                    add_ref(&mut axes, groups, g, Slot::Pair { name: 0, value: 1 }, key);
                }
            }
        }

        let (vtype, agg, binning) = match &row.viz {
            VizCell::Auto => (
                VizType::Bar,
                crate::store::AggFn::Sum,
                crate::store::Binning::None,
            ),
            VizCell::Spec(s) => {
                if s.vtype == VizType::Bin2d || matches!(s.y, Some(YTransform::Bin(_))) {
                    return Err(PlanError::NotSupported("bin2d visualizations".into()));
                }
                (s.vtype, s.agg(), s.x_binning())
            }
            VizCell::Set(_) => {
                return Err(PlanError::NotSupported(
                    "collections of visualization types".into(),
                ))
            }
        };

        axes.sort_by_key(|a| a.key);
        let lens: Vec<usize> = axes.iter().map(|a| a.tuples.len()).collect();
        let total: usize = lens.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for n in 0..total {
            let mut rem = n;
            for k in (0..axes.len()).rev() {
                idx[k] = rem % lens[k];
                rem /= lens[k];
            }
            let (mut x, mut y) = (cx.clone(), cy.clone());
            let mut bindings: BTreeMap<String, Value> = BTreeMap::new();
            let mut conflicts: Vec<String> = Vec::new();
            let mut bind = |attr: &str, s: &Selector| {
                if let Selector::Val(v) = s {
                    let v = self.table.coerce(attr, v);
                    match bindings.get(attr) {
                        Some(old) if *old != v => conflicts.push(attr.to_string()),
                        Some(_) => {}
                        None => {
                            bindings.insert(attr.to_string(), v);
                        }
                    }
                }
            };
            for (a, v) in &cbind {
                bind(a, &Selector::Val(v.clone()));
            }
            for (ax, &i) in axes.iter().zip(&idx) {
                let t = &ax.tuples[i];
                for s in &ax.slots {
                    match s {
                        Slot::X(p) => x = sel_name(&t[*p]),
                        Slot::Y(p) => y = sel_name(&t[*p]),
                        Slot::Attr(a, p) => bind(a, &t[*p]),
                        Slot::Pair { name, value } => {
                            if let Some(a) = sel_name(&t[*name]) {
                                bind(&a, &t[*value]);
                            }
                        }
                    }
                }
            }
            let (Some(x), Some(y)) = (x, y) else {
                return Err(PlanError::Malformed(format!(
                    "row `{}` has a cell without X or Y",
                    row.name.var
                )));
            };
            let mut conj = atoms.clone();
            conflicts.dedup();
            conj.extend(conflicts.into_iter().map(|attr| Atom::In {
                attr,
                values: Vec::new(),
            }));
            cells.push(Arc::new(CellSpec {
                x_attr: x,
                y_attr: y,
                bindings,
                filter: Predicate {
                    disjuncts: vec![conj],
                },
                agg,
                x_binning: binning,
                vtype,
            }));
        }
        let axes = axes
            .iter()
            .map(|a| Axis {
                group: a.group,
                len: a.tuples.len(),
            })
            .collect();
        let sources = vec![Source::Fetch; cells.len()];
        Ok(RowSpec {
            axes,
            cells,
            sources,
            dyn_in,
        })
    }

    fn in_atom(
        &self,
        attr: &str,
        e: &SetExpr,
        groups: &Groups,
        atoms: &mut Vec<Atom>,
        dyn_in: &mut BTreeSet<String>,
    ) -> Result<(), PlanError> {
        let dynamic = self.dynamic(e);
        if dynamic {
            dyn_in.insert(attr.to_string());
            if self.superset {
                return Ok(());
            }
        }
        let mut values: Vec<Value> = self
            .eval_set(e, &Dom::Values(attr), groups)?
            .into_iter()
            .filter_map(|s| s.value().map(|v| self.table.coerce(attr, v)))
            .collect();
        values.sort();
        values.dedup();
        atoms.push(Atom::In {
            attr: attr.to_string(),
            values,
        });
        Ok(())
    }

    fn operand_cells(&self, e: &NameExpr, specs: &[Option<RowSpec>]) -> Result<Cells, PlanError> {
        Ok(match e {
            NameExpr::Ref(n) => {
                let r = self
                    .q
                    .name_row(n)
                    .ok_or_else(|| PlanError::Internal(format!("unknown collection `{n}`")))?;
                let s = specs[r]
                    .as_ref()
                    .ok_or_else(|| PlanError::Internal(format!("`{n}` is not realized")))?;
                s.cells
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), Source::Copy { row: r, idx: i }))
                    .collect()
            }
            NameExpr::Concat(a, b) => {
                let mut out = self.operand_cells(a, specs)?;
                out.extend(self.operand_cells(b, specs)?);
                out
            }
            NameExpr::Diff(a, b) => {
                let b: HashSet<Arc<CellSpec>> = self
                    .operand_cells(b, specs)?
                    .into_iter()
                    .map(|c| c.0)
                    .collect();
                self.operand_cells(a, specs)?
                    .into_iter()
                    .filter(|c| !b.contains(&c.0))
                    .collect()
            }
            NameExpr::Intersect(a, b) => {
                let b: HashSet<Arc<CellSpec>> = self
                    .operand_cells(b, specs)?
                    .into_iter()
                    .map(|c| c.0)
                    .collect();
                self.operand_cells(a, specs)?
                    .into_iter()
                    .filter(|c| b.contains(&c.0))
                    .collect()
            }
            NameExpr::Index(a, i) => {
                let cells = self.operand_cells(a, specs)?;
                let len = cells.len();
                if *i < 1 || *i as usize > len {
                    return Err(PlanError::IndexOutOfRange { index: *i, len });
                }
                vec![cells[*i as usize - 1].clone()]
            }
            NameExpr::Slice(a, lo, hi) => {
                let cells = self.operand_cells(a, specs)?;
                let lo = lo.unwrap_or(1).max(1) as usize;
                let hi = hi.map_or(cells.len(), |h| (h.max(0) as usize).min(cells.len()));
                if lo > hi {
                    Vec::new()
                } else {
                    cells[lo - 1..hi].to_vec()
                }
            }
            NameExpr::Uniq(a) => dedup(self.operand_cells(a, specs)?),
            NameExpr::Order(a) => self.operand_cells(a, specs)?,
        })
    }

    /// Realizes a derived row from its realized operands.
    pub fn derived(
        &self,
        r: usize,
        groups: &mut Groups,
        specs: &[Option<RowSpec>],
    ) -> Result<RowSpec, PlanError> {
        let row = &self.q.query.rows[r];
        let deriv = row
            .name
            .derivation
            .as_ref()
            .ok_or_else(|| PlanError::Internal("row is not derived".into()))?;
        let mut cells = self.operand_cells(deriv, specs)?;
        if matches!(deriv, NameExpr::Ref(_)) {
            cells = dedup(cells);
        }
        let mut aligned: Option<GroupId> = None;
        if deriv.is_order() {
            let (c, a) = self.reorder(r, cells, groups)?;
            cells = c;
            aligned = a;
        }

        let mut extra: Vec<Atom> = Vec::new();
        let mut dyn_in = BTreeSet::new();
        for z in &row.z {
            if let ZKind::Pair { attr, value } = &z.kind {
                match value {
                    ZValue::Lit(l) => {
                        let v = self.table.coerce(attr, &lit_value(l));
                        cells.retain(|c| c.0.bindings.get(attr) == Some(&v));
                        aligned = None;
                    }
                    ZValue::Cmp(op, l) => extra.push(Atom::Cmp {
                        attr: attr.clone(),
                        op: *op,
                        value: self.table.coerce(attr, &lit_value(l)),
                    }),
                    ZValue::In(e) => self.in_atom(attr, e, groups, &mut extra, &mut dyn_in)?,
                    _ => {
                        return Err(PlanError::Malformed(
                            "derived rows accept only literal or predicate Z constraints".into(),
                        ))
                    }
                }
            }
        }
        if !extra.is_empty() || !dyn_in.is_empty() {
            for c in cells.iter_mut() {
                let mut spec = (*c.0).clone();
                for conj in spec.filter.disjuncts.iter_mut() {
                    conj.extend(extra.iter().cloned());
                }
                *c = (Arc::new(spec), Source::Fetch);
            }
        }

        let mut binds: Vec<(String, Col, Option<String>)> = Vec::new();
        for (col, a) in [(Col::X, &row.x), (Col::Y, &row.y)] {
            if let AxisKind::DerivedBind(v) = &a.kind {
                binds.push((v.clone(), col, None));
            }
        }
        for z in &row.z {
            if let ZKind::Bind {
                var,
                attr,
                value: ZValue::Derived,
            } = &z.kind
            {
                binds.push((var.clone(), Col::Z, Some(attr.clone())));
            }
        }
        let axes = if let Some((first, _, _)) = binds.first() {
            let g = self.joint(first)?;
            let tuples = cells
                .iter()
                .map(|(c, _)| {
                    binds
                        .iter()
                        .map(|(_, col, attr)| match (col, attr) {
                            (Col::X, _) => Selector::Val(Value::str(&c.x_attr)),
                            (Col::Y, _) => Selector::Val(Value::str(&c.y_attr)),
                            (_, Some(a)) => c
                                .bindings
                                .get(a)
                                .cloned()
                                .map_or(Selector::Star, Selector::Val),
                            (Col::Z, None) => Selector::Star,
                        })
                        .collect()
                })
                .collect();
            groups.insert(
                g,
                Group {
                    vars: binds.iter().map(|b| b.0.clone()).collect(),
                    tuples,
                },
            );
            vec![Axis {
                group: Some(g),
                len: cells.len(),
            }]
        } else {
            vec![Axis {
                group: aligned,
                len: cells.len(),
            }]
        };
        let (cells, sources) = cells.into_iter().unzip();
        Ok(RowSpec {
            axes,
            cells,
            sources,
            dyn_in,
        })
    }

    /// Orders cells by the tuples of the `-->` variables' groups.
    fn reorder(
        &self,
        r: usize,
        cells: Cells,
        groups: &Groups,
    ) -> Result<(Cells, Option<GroupId>), PlanError> {
        let row = &self.q.query.rows[r];
        let mut axes: Vec<AxisB> = Vec::new();
        let mut add = |g: GroupId, slot: Slot, key: (u32, usize)| {
            if let Some(a) = axes.iter_mut().find(|a| a.group == Some(g)) {
                a.slots.push(slot);
                a.key = a.key.min(key);
            } else {
                axes.push(AxisB {
                    group: Some(g),
                    key,
                    tuples: groups.get(g).tuples.clone(),
                    slots: vec![slot],
                });
            }
        };
        for (col, a, pos) in [(Col::X, &row.x, 0usize), (Col::Y, &row.y, 1)] {
            if let (AxisKind::Expr(SetExpr::Var(v)), true) = (&a.kind, a.annot.reorder) {
                let (g, s) = self.var_slot(v, col, groups)?;
                add(g, s, (a.annot.priority.unwrap_or(u32::MAX), pos));
            }
        }
        for (zi, z) in row.z.iter().enumerate() {
            if let (ZKind::Expr(SetExpr::Var(v)), true) = (&z.kind, z.annot.reorder) {
                let (g, s) = self.var_slot(v, Col::Z, groups)?;
                add(g, s, (z.annot.priority.unwrap_or(u32::MAX), 2 + zi));
            }
        }
        if axes.is_empty() {
            return Ok((cells, None));
        }
        axes.sort_by_key(|a| a.key);
        let lens: Vec<usize> = axes.iter().map(|a| a.tuples.len()).collect();
        let total: usize = lens.iter().product();
        let matches = |c: &CellSpec, slots: &[Slot], t: &[Selector]| -> bool {
            let bound = |a: &str, s: &Selector| match s {
                Selector::Star => !c.bindings.contains_key(a),
                Selector::Val(v) => c.bindings.get(a) == Some(&self.table.coerce(a, v)),
            };
            slots.iter().all(|s| match s {
                Slot::X(p) => sel_name(&t[*p]).as_deref() == Some(c.x_attr.as_str()),
                Slot::Y(p) => sel_name(&t[*p]).as_deref() == Some(c.y_attr.as_str()),
                Slot::Attr(a, p) => bound(a, &t[*p]),
                Slot::Pair { name, value } => {
                    sel_name(&t[*name]).is_some_and(|a| bound(&a, &t[*value]))
                }
            })
        };
        let mut out = Vec::new();
        let mut one_each = true;
        let mut idx = vec![0usize; axes.len()];
        for n in 0..total {
            let mut rem = n;
            for k in (0..axes.len()).rev() {
                idx[k] = rem % lens[k];
                rem /= lens[k];
            }
            let mut hits = 0;
            for c in &cells {
                if axes
                    .iter()
                    .zip(&idx)
                    .all(|(ax, &i)| matches(&c.0, &ax.slots, &ax.tuples[i]))
                {
                    out.push(c.clone());
                    hits += 1;
                }
            }
            one_each &= hits == 1;
        }
        let aligned = if axes.len() == 1 && one_each {
            axes[0].group
        } else {
            None
        };
        Ok((out, aligned))
    }
}

fn dedup(cells: Cells) -> Cells {
    let mut seen = HashSet::new();
    cells
        .into_iter()
        .filter(|c| seen.insert(c.0.clone()))
        .collect()
}
