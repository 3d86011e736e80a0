//! Completeness replay: every operator application is rewritten into the query
//! that expresses it, executed end to end, and compared with direct evaluation.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::group::{Attr, Theta, VisualGroup, VisualSource};
use super::ops::{self, Context, Functional, Limit};
use super::VeaError;
use crate::plan::{build_dag, Engine, Strategy};
use crate::store::{AttributeCatalog, CmpOp, Column, ColumnKind, ColumnTable, DimensionKind};
use crate::value::{Selector, Value};
use crate::zql::{parse_query, validate_with};

/// An operator with its non-group arguments.
#[derive(Clone, Debug)]
pub enum Operator {
    Select(Theta),
    Sort(Functional),
    Limit(Limit),
    Dedup,
    Union,
    Diff,
    Intersect,
    Swap(Attr),
    Dist(Vec<Attr>, Functional),
    Find(Functional),
}

/// Short operator names, in report order.
pub const OPERATORS: [&str; 10] = [
    "sel",
    "sort",
    "limit",
    "dedup",
    "union",
    "diff",
    "intersect",
    "swap",
    "dist",
    "find",
];

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::Select(_) => "sel",
            Operator::Sort(_) => "sort",
            Operator::Limit(_) => "limit",
            Operator::Dedup => "dedup",
            Operator::Union => "union",
            Operator::Diff => "diff",
            Operator::Intersect => "intersect",
            Operator::Swap(_) => "swap",
            Operator::Dist(..) => "dist",
            Operator::Find(_) => "find",
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(
            self,
            Operator::Union
                | Operator::Diff
                | Operator::Intersect
                | Operator::Swap(_)
                | Operator::Dist(..)
                | Operator::Find(_)
        )
    }
}

#[derive(Clone, Debug)]
pub struct Application {
    pub op: Operator,
    pub v: VisualGroup,
    pub u: Option<VisualGroup>,
}

impl Application {
    pub fn unary(op: Operator, v: VisualGroup) -> Self {
        Application { op, v, u: None }
    }

    pub fn binary(op: Operator, v: VisualGroup, u: VisualGroup) -> Self {
        Application { op, v, u: Some(u) }
    }

    fn u(&self) -> Result<&VisualGroup, VeaError> {
        self.u.as_ref().ok_or_else(|| {
            VeaError::Malformed(format!("`{}` needs a second group", self.op.name()))
        })
    }
}

/// Direct evaluation.
pub fn evaluate(ctx: Context<'_>, app: &Application) -> Result<VisualGroup, VeaError> {
    let v = &app.v;
    match &app.op {
        Operator::Select(theta) => ops::sel_v(v, theta, false),
        Operator::Sort(f) => ops::sort_v(ctx, v, f),
        Operator::Limit(l) => ops::limit_v(v, *l),
        Operator::Dedup => Ok(ops::dedup_v(v)),
        Operator::Union => ops::union_v(v, app.u()?),
        Operator::Diff => ops::diff_v(v, app.u()?),
        Operator::Intersect => ops::intersect_v(v, app.u()?),
        Operator::Swap(a) => ops::swap_v(v, app.u()?, a),
        Operator::Dist(on, f) => ops::dist_v(ctx, v, app.u()?, on, f),
        Operator::Find(f) => ops::find_v(ctx, v, app.u()?, f),
    }
}

fn lit(v: &Value) -> String {
    match v {
        Value::Num(n) => format!("{n}"),
        Value::Str(s) => format!("'{s}'"),
    }
}

fn argopt(f: &Functional) -> Result<&'static str, VeaError> {
    match f {
        Functional::Identity => Ok("argmin"),
        Functional::Negate => Ok("argmax"),
        Functional::Custom(_) => Err(VeaError::NotExpressible(
            "custom functionals have no query form".into(),
        )),
    }
}

/// Query text under construction. Z column `j` always constrains attribute `j`.
struct Writer {
    attrs: Vec<String>,
    rows: Vec<(String, String)>,
    names: usize,
    vars: usize,
}

impl Writer {
    fn new(attrs: &[String]) -> Self {
        Writer {
            attrs: attrs.to_vec(),
            rows: Vec::new(),
            names: 0,
            vars: 0,
        }
    }

    fn name(&mut self) -> String {
        self.names += 1;
        format!("f{}", self.names)
    }

    fn var(&mut self, prefix: &str) -> String {
        self.vars += 1;
        format!("{prefix}{}", self.vars)
    }

    fn k(&self) -> usize {
        self.attrs.len()
    }

    /// Appends a row; `derivation` is the right-hand side of a derived name.
    fn row(
        &mut self,
        derivation: Option<&str>,
        x: &str,
        y: &str,
        z: &[String],
        process: &str,
    ) -> String {
        let name = self.name();
        let head = match derivation {
            Some(d) => format!("{name} <-- {d}"),
            None => name.clone(),
        };
        let mut line = format!("{head} | {x} | {y}");
        for c in z {
            let _ = write!(line, " | {c}");
        }
        let _ = write!(line, " | {process}");
        self.rows.push((name.clone(), line));
        name
    }

    fn mark_output(&mut self, name: &str) {
        if let Some(r) = self.rows.iter_mut().find(|r| r.0 == name) {
            r.1.insert(0, '*');
        }
    }

    fn text(&self) -> String {
        let mut q = String::from("Name | X | Y");
        for j in 0..self.k() {
            if j == 0 {
                q.push_str(" | Z");
            } else {
                let _ = write!(q, " | Z{}", j + 1);
            }
        }
        q.push_str(" | Process\n");
        for (_, line) in &self.rows {
            q.push_str(line);
            q.push('\n');
        }
        q
    }

    /// One row per source, then their concatenation.
    fn group(&mut self, g: &VisualGroup) -> Result<String, VeaError> {
        if g.is_empty() {
            return Err(VeaError::NotExpressible(
                "an empty operand has no collection".into(),
            ));
        }
        let mut names = Vec::with_capacity(g.len());
        for s in &g.sources {
            let z: Vec<String> = self
                .attrs
                .iter()
                .zip(&s.selectors)
                .map(|(a, sel)| match sel {
                    Selector::Star => String::new(),
                    Selector::Val(v) => format!("'{a}'.{}", lit(v)),
                })
                .collect();
            names.push(self.row(None, &format!("'{}'", s.x), &format!("'{}'", s.y), &z, ""));
        }
        if names.len() == 1 {
            return Ok(names.pop().expect("one row"));
        }
        let k = self.k();
        Ok(self.row(
            Some(&names.join(" + ")),
            "",
            "",
            &vec![String::new(); k],
            "",
        ))
    }

    /// Derived row over `src` binding X, Y and the listed attributes with `_`.
    fn bind(&mut self, src: &str, x: bool, y: bool, attrs: &[bool]) -> (String, Binds) {
        let xv = x.then(|| self.var("x"));
        let yv = y.then(|| self.var("y"));
        let zv: Vec<Option<String>> = attrs.iter().map(|&b| b.then(|| self.var("v"))).collect();
        let z: Vec<String> = zv
            .iter()
            .zip(&self.attrs)
            .map(|(v, a)| {
                v.as_ref()
                    .map_or(String::new(), |v| format!("{v} <-- '{a}'._"))
            })
            .collect();
        let xc = xv.as_ref().map_or(String::new(), |v| format!("{v} <-- _"));
        let yc = yv.as_ref().map_or(String::new(), |v| format!("{v} <-- _"));
        (
            self.row(Some(src), &xc, &yc, &z, ""),
            Binds {
                x: xv,
                y: yv,
                z: zv,
            },
        )
    }

    /// Collection whose intersection with `v` keeps the sources satisfying `theta`.
    fn filter(&mut self, v: &str, g: &VisualGroup, theta: &Theta) -> Result<String, VeaError> {
        let k = self.k();
        let blank = vec![String::new(); k];
        match theta {
            Theta::True => Ok(v.to_string()),
            Theta::And(a, b) | Theta::Or(a, b) => {
                let fa = self.filter(v, g, a)?;
                let fb = self.filter(v, g, b)?;
                let op = if matches!(theta, Theta::And(..)) {
                    "^"
                } else {
                    "+"
                };
                Ok(self.row(Some(&format!("{fa} {op} {fb}")), "", "", &blank, ""))
            }
            Theta::Atom { attr, op, value } => {
                let eq = match op {
                    CmpOp::Eq => true,
                    CmpOp::Ne => false,
                    other => return Err(VeaError::IllegalOperator(other.symbol().to_string())),
                };
                match (attr, value) {
                    (Attr::X | Attr::Y, Selector::Star) => {
                        if eq {
                            Ok(self.row(Some(&format!("{v} - {v}")), "", "", &blank, ""))
                        } else {
                            Ok(v.to_string())
                        }
                    }
                    (Attr::X, Selector::Val(b)) => {
                        let (_, bs) = self.bind(v, !eq, true, &vec![true; k]);
                        let x = if eq {
                            lit(b)
                        } else {
                            let nx = self.var("x");
                            format!(
                                "{nx} <-- {} - {{{}}}",
                                bs.x.as_ref().expect("bound"),
                                lit(b)
                            )
                        };
                        let z = bs.z_cells();
                        Ok(self.row(None, &x, bs.y.as_ref().expect("bound"), &z, ""))
                    }
                    (Attr::Y, Selector::Val(b)) => {
                        let (_, bs) = self.bind(v, true, !eq, &vec![true; k]);
                        let y = if eq {
                            lit(b)
                        } else {
                            let ny = self.var("y");
                            format!(
                                "{ny} <-- {} - {{{}}}",
                                bs.y.as_ref().expect("bound"),
                                lit(b)
                            )
                        };
                        let z = bs.z_cells();
                        Ok(self.row(None, bs.x.as_ref().expect("bound"), &y, &z, ""))
                    }
                    (Attr::A(a), value) => {
                        let j = g.attr_index(a)?;
                        let keep_j = !eq && *value != Selector::Star;
                        let mut which = vec![true; k];
                        which[j] = keep_j;
                        let (_, bs) = self.bind(v, true, true, &which);
                        let mut z = bs.z_cells();
                        z[j] = match (eq, value) {
                            (true, Selector::Star) => String::new(),
                            (true, Selector::Val(b)) => format!("'{a}'.{}", lit(b)),
                            (false, Selector::Star) => {
                                let u = self.var("u");
                                format!("{u} <-- '{a}'.*")
                            }
                            (false, Selector::Val(b)) => {
                                let u = self.var("u");
                                format!(
                                    "{u} <-- '{a}'.({} - {{{}}})",
                                    bs.z[j].as_ref().expect("bound"),
                                    lit(b)
                                )
                            }
                        };
                        Ok(self.row(
                            None,
                            bs.x.as_ref().expect("bound"),
                            bs.y.as_ref().expect("bound"),
                            &z,
                            "",
                        ))
                    }
                }
            }
        }
    }
}

struct Binds {
    x: Option<String>,
    y: Option<String>,
    z: Vec<Option<String>>,
}

impl Binds {
    fn all(&self) -> Vec<String> {
        self.x
            .iter()
            .chain(self.y.iter())
            .chain(self.z.iter().flatten())
            .cloned()
            .collect()
    }

    fn z_cells(&self) -> Vec<String> {
        self.z
            .iter()
            .map(|v| v.clone().unwrap_or_default())
            .collect()
    }
}

/// The query expressing `app` and the name of its output row.
pub fn to_zql(app: &Application) -> Result<(String, String), VeaError> {
    let mut w = Writer::new(&app.v.attrs);
    let k = w.k();
    let blank = vec![String::new(); k];
    let fv = w.group(&app.v)?;
    let fu = match &app.u {
        Some(u) if app.op.is_binary() => Some(w.group(u)?),
        _ => None,
    };
    let fu_name = || {
        fu.clone()
            .ok_or_else(|| VeaError::Malformed(format!("`{}` needs a second group", app.op.name())))
    };
    let out = match &app.op {
        Operator::Select(Theta::True) => fv.clone(),
        Operator::Select(theta) => {
            let filt = w.filter(&fv, &app.v, theta)?;
            w.row(Some(&format!("{fv} ^ {filt}")), "", "", &blank, "")
        }
        Operator::Sort(f) => {
            let opt = argopt(f)?;
            let (f2, bs) = w.bind(&fv, true, true, &vec![true; k]);
            let outs: Vec<String> = bs.all().iter().map(|_| w.var("o")).collect();
            let process = format!(
                "{} <-- {opt}_{{{}}}[k=inf] T({f2})",
                outs.join(", "),
                bs.all().join(",")
            );
            w.rows.last_mut().expect("row").1.push_str(&process);
            w.row(None, &outs[0], &outs[1], &outs[2..], "")
        }
        Operator::Limit(l) => {
            let expr = match *l {
                Limit::First(0) => format!("{fv} - {fv}"),
                Limit::First(n) => format!("{fv}[1:{}]", n.min(app.v.len())),
                Limit::Range(a, b) => format!("{fv}[{a}:{b}]"),
            };
            w.row(Some(&expr), "", "", &blank, "")
        }
        Operator::Dedup => w.row(Some(&fv), "", "", &blank, ""),
        Operator::Union => w.row(Some(&format!("{fv} + {}", fu_name()?)), "", "", &blank, ""),
        Operator::Diff => w.row(Some(&format!("{fv} - {}", fu_name()?)), "", "", &blank, ""),
        Operator::Intersect => w.row(Some(&format!("{fv} ^ {}", fu_name()?)), "", "", &blank, ""),
        Operator::Swap(attr) => {
            let fu = fu_name()?;
            let j = match attr {
                Attr::A(a) => Some(app.v.attr_index(a)?),
                _ => None,
            };
            let mut which = vec![true; k];
            if let Some(j) = j {
                which[j] = false;
            }
            let (_, bv) = w.bind(&fv, *attr != Attr::X, *attr != Attr::Y, &which);
            let mut only = vec![false; k];
            if let Some(j) = j {
                only[j] = true;
            }
            let (_, bu) = w.bind(&fu, *attr == Attr::X, *attr == Attr::Y, &only);
            let sup = |v: &Option<String>, n: u8| v.as_ref().map(|v| format!("{v}^{n}"));
            let x = sup(&bv.x, 1).or_else(|| sup(&bu.x, 2)).expect("x bound");
            let y = sup(&bv.y, 1).or_else(|| sup(&bu.y, 2)).expect("y bound");
            let z: Vec<String> = (0..k)
                .map(|i| {
                    sup(&bv.z[i], 1)
                        .or_else(|| sup(&bu.z[i], 2))
                        .expect("attribute bound")
                })
                .collect();
            w.row(None, &x, &y, &z, "")
        }
        Operator::Dist(on, f) => {
            let fu = fu_name()?;
            let opt = argopt(f)?;
            let mut which = vec![false; k];
            for a in on {
                match a {
                    Attr::A(a) => which[app.v.attr_index(a)?] = true,
                    other => return Err(VeaError::NotExpressible(format!("matching on {other}"))),
                }
            }
            let (f3, b3) = w.bind(&fv, false, false, &which);
            let vars: Vec<String> = b3.z.iter().flatten().cloned().collect();
            let outs: Vec<String> = vars.iter().map(|_| w.var("u")).collect();
            let reorder: Vec<String> =
                b3.z.iter()
                    .map(|v| v.as_ref().map_or(String::new(), |v| format!("{v} -->")))
                    .collect();
            let f4_name = format!("f{}", w.names + 1);
            let process = format!(
                "{} <-- {opt}_{{{}}}[k=inf] D({f3}, {f4_name})",
                outs.join(", "),
                vars.join(",")
            );
            w.row(Some(&format!("{fu}.order")), "", "", &reorder, &process);
            let mut it = outs.iter();
            let z: Vec<String> =
                b3.z.iter()
                    .map(|v| {
                        if v.is_some() {
                            format!("{} -->", it.next().expect("output var"))
                        } else {
                            String::new()
                        }
                    })
                    .collect();
            w.row(Some(&format!("{fv}.order")), "", "", &z, "")
        }
        Operator::Find(f) => {
            let fu = fu_name()?;
            let opt = argopt(f)?;
            let (f3, bs) = w.bind(&fv, true, true, &vec![true; k]);
            let outs: Vec<String> = bs.all().iter().map(|_| w.var("o")).collect();
            let process = format!(
                "{} <-- {opt}_{{{}}}[k=inf] D({f3}, {fu})",
                outs.join(", "),
                bs.all().join(",")
            );
            w.rows.last_mut().expect("row").1.push_str(&process);
            w.row(None, &outs[0], &outs[1], &outs[2..], "")
        }
    };
    w.mark_output(&out);
    Ok((w.text(), out))
}

/// Runs the expressing query and reads its output back as a visual group.
pub fn via_zql(
    ctx: Context<'_>,
    app: &Application,
    strategy: Strategy,
) -> Result<(VisualGroup, String), VeaError> {
    let (text, out) = to_zql(app)?;
    let q = parse_query(&text).map_err(|e| VeaError::Query(format!("{e}\n{text}")))?;
    let v = validate_with(
        &q,
        &AttributeCatalog::from_table(ctx.table),
        &ctx.registry.plug_names(),
    )
    .map_err(|e| VeaError::Query(format!("{e}\n{text}")))?;
    let dag = build_dag(&v).map_err(|e| VeaError::Query(format!("{e}\n{text}")))?;
    let (res, _) = Engine::new(ctx.table)
        .with_registry(ctx.registry.clone())
        .run(&dag, strategy)
        .map_err(|e| VeaError::Query(format!("{e}\n{text}")))?;
    let coll = res
        .get(&out)
        .ok_or_else(|| VeaError::Query(format!("no output `{out}`\n{text}")))?;
    let sources = coll
        .cells
        .iter()
        .map(|c| {
            let sel = app
                .v
                .attrs
                .iter()
                .map(|a| {
                    c.bindings()
                        .get(a)
                        .cloned()
                        .map_or(Selector::Star, Selector::Val)
                })
                .collect();
            VisualSource::new(c.x_attr(), c.y_attr(), sel)
        })
        .collect();
    Ok((VisualGroup::new(app.v.attrs.clone(), sources)?, text))
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub operator: &'static str,
    pub passed: bool,
    pub detail: String,
    pub query: String,
}

/// Compares direct evaluation with the expressing query, reporting the first mismatch.
pub fn completeness_check(ctx: Context<'_>, app: &Application, strategy: Strategy) -> CheckOutcome {
    let operator = app.op.name();
    let fail = |detail: String, query: String| CheckOutcome {
        operator,
        passed: false,
        detail,
        query,
    };
    let direct = match evaluate(ctx, app) {
        Ok(g) => g,
        Err(e) => return fail(format!("direct evaluation failed: {e}"), String::new()),
    };
    let (got, query) = match via_zql(ctx, app, strategy) {
        Ok(r) => r,
        Err(e) => return fail(format!("query evaluation failed: {e}"), String::new()),
    };
    if let Some(i) =
        (0..direct.len().max(got.len())).find(|&i| direct.sources.get(i) != got.sources.get(i))
    {
        let show = |s: Option<&VisualSource>| {
            s.map_or("nothing".to_string(), |s| format!("{:?}", s.tuple()))
        };
        return fail(
            format!(
                "position {}: expected {}, query gave {}",
                i + 1,
                show(direct.sources.get(i)),
                show(got.sources.get(i))
            ),
            query,
        );
    }
    CheckOutcome {
        operator,
        passed: true,
        detail: format!("{} sources", direct.len()),
        query,
    }
}

/// Small relation: an ordinal `d0`, up to two categorical dimensions and up to two measures.
pub fn random_relation(seed: u64) -> ColumnTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dims = rng.gen_range(2..=3);
    let n_measures = rng.gen_range(1..=2);
    let sizes: Vec<usize> = (0..n_dims)
        .map(|i| rng.gen_range(if i == 0 { 3 } else { 2 }..=5))
        .collect();
    let mut rows: Vec<Vec<usize>> = vec![vec![]];
    for &n in &sizes {
        rows = rows
            .into_iter()
            .flat_map(|r| (0..n).map(move |v| [r.clone(), vec![v]].concat()))
            .collect();
    }
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for r in rows {
        if rng.gen_bool(0.85) {
            if rng.gen_bool(0.2) {
                kept.push(r.clone());
            }
            kept.push(r);
        }
    }
    if kept.is_empty() {
        kept.push(vec![0; n_dims]);
    }
    let mut cols = vec![Column::numeric(
        "d0",
        ColumnKind::Dimension(DimensionKind::Ordinal),
        kept.iter().map(|r| (r[0] + 1) as f64),
    )];
    for d in 1..n_dims {
        cols.push(Column::categorical(
            format!("d{d}"),
            kept.iter().map(|r| format!("c{d}{}", r[d])),
        ));
    }
    for m in 0..n_measures {
        let vals: Vec<f64> = kept.iter().map(|_| rng.gen_range(1..=50) as f64).collect();
        cols.push(Column::numeric(format!("m{m}"), ColumnKind::Measure, vals));
    }
    ColumnTable::new(format!("rel{seed}"), cols).expect("generated relation is well formed")
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    table: &'a ColumnTable,
    attrs: std::sync::Arc<[String]>,
    dims: Vec<String>,
    measures: Vec<String>,
    ordinal: String,
}

impl<'a> Gen<'a> {
    fn new(table: &'a ColumnTable, seed: u64) -> Self {
        let dims: Vec<String> = table.dimensions().map(|c| c.name.clone()).collect();
        let ordinal = table
            .dimensions()
            .filter(|c| c.kind.is_numeric())
            .map(|c| (c.distinct().len(), c.name.clone()))
            .max()
            .map(|p| p.1)
            .unwrap_or_else(|| dims[0].clone());
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            table,
            attrs: VisualGroup::attrs_of(table),
            measures: table.measures().map(|c| c.name.clone()).collect(),
            dims,
            ordinal,
        }
    }

    fn values(&self, a: &str) -> Vec<Value> {
        self.table.distinct(a).unwrap_or_default()
    }

    /// A source; `data` keeps the x attribute ordinal and measures unconstrained.
    fn source(&mut self, data: bool) -> VisualSource {
        let x = if data {
            self.ordinal.clone()
        } else {
            self.dims.choose(&mut self.rng).expect("dimension").clone()
        };
        let y = self
            .measures
            .choose(&mut self.rng)
            .expect("measure")
            .clone();
        let attrs = self.attrs.clone();
        let sel = attrs
            .iter()
            .map(|a| {
                let measure = self.measures.contains(a);
                let p = if *a == x || (measure && data) {
                    0.0
                } else if measure {
                    0.15
                } else {
                    0.5
                };
                if self.rng.gen_bool(p) {
                    Selector::Val(self.values(a).choose(&mut self.rng).expect("value").clone())
                } else {
                    Selector::Star
                }
            })
            .collect();
        VisualSource {
            x,
            y,
            selectors: sel,
        }
    }

    fn group(&mut self, n: usize, data: bool, distinct: bool) -> VisualGroup {
        let mut out: Vec<VisualSource> = Vec::new();
        let mut tries = 0;
        while out.len() < n && tries < n * 20 {
            tries += 1;
            let s = self.source(data);
            if distinct && out.contains(&s) {
                continue;
            }
            out.push(s);
        }
        VisualGroup {
            attrs: self.attrs.clone(),
            sources: out,
        }
    }

    fn with_dups(&mut self, g: &VisualGroup) -> VisualGroup {
        let mut s = g.sources.clone();
        for _ in 0..self.rng.gen_range(1..=3) {
            let pick = s.choose(&mut self.rng).expect("non-empty").clone();
            let at = self.rng.gen_range(0..=s.len());
            s.insert(at, pick);
        }
        g.with_sources(s)
    }

    /// A group sharing some sources with `g`.
    fn overlapping(&mut self, g: &VisualGroup) -> VisualGroup {
        let mut s: Vec<VisualSource> = g
            .sources
            .choose_multiple(&mut self.rng, g.len().div_ceil(2))
            .cloned()
            .collect();
        let extra = self.rng.gen_range(1..=3);
        s.extend(self.group(extra, false, false).sources);
        s.shuffle(&mut self.rng);
        g.with_sources(s)
    }

    fn value_of(&mut self, a: &str) -> Selector {
        Selector::Val(self.values(a).choose(&mut self.rng).expect("value").clone())
    }

    fn thetas(&mut self, g: &VisualGroup) -> Vec<Theta> {
        let s = g.sources.choose(&mut self.rng).expect("non-empty").clone();
        let dim = self.dims.choose(&mut self.rng).expect("dimension").clone();
        let other = self.dims.choose(&mut self.rng).expect("dimension").clone();
        let y = self
            .measures
            .choose(&mut self.rng)
            .expect("measure")
            .clone();
        let name = |a: &str| Selector::Val(Value::str(a));
        let present = |a: &str| {
            let j = g.attr_index(a).expect("attribute");
            g.sources
                .iter()
                .find_map(|s| s.selectors[j].value().cloned())
                .map(Selector::Val)
        };
        let v_eq = present(&dim).unwrap_or_else(|| self.value_of(&dim));
        let v_ne = present(&other).unwrap_or_else(|| self.value_of(&other));
        vec![
            Theta::True,
            Theta::eq(Attr::X, name(&s.x)),
            Theta::eq(Attr::Y, name(&y)),
            Theta::ne(Attr::X, name(&s.x)),
            Theta::ne(Attr::Y, name(&y)),
            Theta::eq(Attr::A(dim.clone()), v_eq.clone()),
            Theta::ne(Attr::A(other.clone()), v_ne.clone()),
            Theta::eq(Attr::A(other.clone()), Selector::Star),
            Theta::ne(Attr::A(dim.clone()), Selector::Star),
            Theta::eq(Attr::X, Selector::Star),
            Theta::ne(Attr::Y, Selector::Star),
            Theta::eq(Attr::A(dim.clone()), v_eq.clone())
                .and(Theta::ne(Attr::Y, name(&y)))
                .or(Theta::eq(Attr::X, name(&s.x))),
            Theta::ne(Attr::A(other), Selector::Star)
                .and(Theta::eq(Attr::A(dim), v_eq).or(Theta::ne(Attr::X, name(&s.x)))),
        ]
    }

    /// Groups for `dist`: `V` and `U` each hold one source per key on `on`.
    fn keyed(&mut self) -> Option<(VisualGroup, VisualGroup, Vec<Attr>)> {
        let cands: Vec<String> = self
            .dims
            .iter()
            .filter(|d| **d != self.ordinal)
            .cloned()
            .collect();
        if cands.is_empty() {
            return None;
        }
        let n_on = self.rng.gen_range(1..=cands.len().min(2));
        let on: Vec<String> = cands
            .choose_multiple(&mut self.rng, n_on)
            .cloned()
            .collect();
        let mut keys: Vec<Vec<Selector>> = vec![vec![]];
        for a in &on {
            let vals: Vec<Selector> = std::iter::once(Selector::Star)
                .chain(self.values(a).into_iter().map(Selector::Val))
                .collect();
            keys = keys
                .into_iter()
                .flat_map(|k| {
                    vals.iter()
                        .map(move |v| [k.clone(), vec![v.clone()]].concat())
                })
                .collect();
        }
        keys.shuffle(&mut self.rng);
        keys.truncate(self.rng.gen_range(2..=5).min(keys.len()));
        let mk = |gen: &mut Self, k: &[Selector]| {
            let mut s = gen.source(true);
            for (a, v) in on.iter().zip(k) {
                let j = gen.attrs.iter().position(|x| x == a).expect("attribute");
                s.selectors[j] = v.clone();
            }
            s
        };
        let v: Vec<VisualSource> = keys.iter().map(|k| mk(self, k)).collect();
        let mut u_keys = keys.clone();
        u_keys.shuffle(&mut self.rng);
        let u: Vec<VisualSource> = u_keys.iter().map(|k| mk(self, k)).collect();
        let g = VisualGroup {
            attrs: self.attrs.clone(),
            sources: v,
        };
        let ug = g.with_sources(u);
        Some((g, ug, on.into_iter().map(Attr::A).collect()))
    }
}

/// Operator applications over `table`, grouped by operator name.
pub fn operator_applications(ctx: Context<'_>, seed: u64) -> Vec<Application> {
    let mut g = Gen::new(ctx.table, seed);
    let mut apps = Vec::new();
    let n = |g: &mut Gen| g.rng.gen_range(2..=6);

    let k = n(&mut g);
    let v = g.group(k, false, false);
    for theta in g.thetas(&v) {
        apps.push(Application::unary(Operator::Select(theta), v.clone()));
    }

    // Data-reading operators need sources with enough points.
    let ok = |a: &Application| evaluate(ctx, a).is_ok();
    for f in [Functional::Identity, Functional::Negate] {
        for _ in 0..50 {
            let k = n(&mut g);
            let a = Application::unary(Operator::Sort(f.clone()), g.group(k, true, true));
            if a.v.len() >= 2 && ok(&a) {
                apps.push(a);
                break;
            }
        }
    }

    let k = n(&mut g);
    let v = g.group(k, false, false);
    let a = g.rng.gen_range(1..=v.len() as i64);
    let b = g.rng.gen_range(a..=v.len() as i64);
    apps.push(Application::unary(
        Operator::Limit(Limit::Range(a, b)),
        v.clone(),
    ));
    let first = g.rng.gen_range(1..=v.len() + 1);
    apps.push(Application::unary(
        Operator::Limit(Limit::First(first)),
        v.clone(),
    ));

    let base = g.group(k, false, false);
    apps.push(Application::unary(Operator::Dedup, g.with_dups(&base)));

    for op in [Operator::Union, Operator::Diff, Operator::Intersect] {
        let k = n(&mut g);
        let v = g.group(k, false, false);
        let v = if g.rng.gen_bool(0.5) {
            g.with_dups(&v)
        } else {
            v
        };
        let u = g.overlapping(&v);
        apps.push(Application::binary(op, v, u));
    }

    let mut swap_attrs = vec![Attr::X, Attr::Y];
    swap_attrs.extend(g.dims.clone().into_iter().map(Attr::A));
    for attr in swap_attrs {
        let k = n(&mut g);
        let v = g.group(k, false, true);
        let ku = g.rng.gen_range(1..=3);
        let u = g.group(ku, false, true);
        apps.push(Application::binary(Operator::Swap(attr), v, u));
    }

    for f in [Functional::Identity, Functional::Negate] {
        for _ in 0..50 {
            if let Some((v, u, on)) = g.keyed() {
                let a = Application::binary(Operator::Dist(on, f.clone()), v, u);
                if ok(&a) {
                    apps.push(a);
                    break;
                }
            }
        }
    }

    for f in [Functional::Identity, Functional::Negate] {
        for _ in 0..50 {
            let k = n(&mut g);
            let v = g.group(k, true, true);
            let u = g.group(1, true, true);
            let a = Application::binary(Operator::Find(f.clone()), v, u);
            if a.v.len() >= 2 && ok(&a) {
                apps.push(a);
                break;
            }
        }
    }
    apps
}

/// Pass/fail tally of one operator.
#[derive(Clone, Debug)]
pub struct OperatorReport {
    pub operator: &'static str,
    pub checked: usize,
    pub failures: Vec<CheckOutcome>,
}

impl OperatorReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failures.is_empty()
    }
}

/// Replays every operator on `tables`, returning one report per operator.
pub fn completeness_suite(
    tables: &[ColumnTable],
    registry: &crate::process::Registry,
    seed: u64,
    strategy: Strategy,
) -> Vec<OperatorReport> {
    let mut reports: Vec<OperatorReport> = OPERATORS
        .iter()
        .map(|&operator| OperatorReport {
            operator,
            checked: 0,
            failures: Vec::new(),
        })
        .collect();
    for (i, t) in tables.iter().enumerate() {
        let ctx = Context::new(t, registry);
        for app in operator_applications(ctx, seed.wrapping_add(i as u64)) {
            let out = completeness_check(ctx, &app, strategy);
            let r = reports
                .iter_mut()
                .find(|r| r.operator == out.operator)
                .expect("known operator");
            r.checked += 1;
            if !out.passed {
                r.failures.push(out);
            }
        }
    }
    reports
}
