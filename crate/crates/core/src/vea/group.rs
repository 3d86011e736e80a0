use std::fmt;
use std::sync::Arc;

use super::VeaError;
use crate::process::{CellSpec, UnitViz};
use crate::store::{execute, AggFn, AggregateRequest, CmpOp, ColumnKind, ColumnTable, Predicate};
use crate::value::{Selector, Value};

/// One visualization: axes plus a selector per relation attribute.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VisualSource {
    pub x: String,
    pub y: String,
    pub selectors: Vec<Selector>,
}

impl VisualSource {
    pub fn new(x: &str, y: &str, selectors: Vec<Selector>) -> Self {
        VisualSource {
            x: x.to_string(),
            y: y.to_string(),
            selectors,
        }
    }

    /// Flat tuple `(X, Y, A_1, ..., A_k)`.
    pub fn tuple(&self) -> Vec<Selector> {
        let mut t = Vec::with_capacity(self.selectors.len() + 2);
        t.push(Selector::Val(Value::str(&self.x)));
        t.push(Selector::Val(Value::str(&self.y)));
        t.extend(self.selectors.iter().cloned());
        t
    }

    pub fn from_tuple(t: &[Selector]) -> Result<Self, VeaError> {
        let name = |s: &Selector| match s {
            Selector::Val(Value::Str(a)) => Ok(a.to_string()),
            other => Err(VeaError::Malformed(format!(
                "axis slot holds `{other}`, expected an attribute name"
            ))),
        };
        if t.len() < 2 {
            return Err(VeaError::Malformed("tuple is missing its axes".into()));
        }
        Ok(VisualSource {
            x: name(&t[0])?,
            y: name(&t[1])?,
            selectors: t[2..].to_vec(),
        })
    }
}

/// Ordered bag of visual sources over a fixed attribute list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisualGroup {
    pub attrs: Arc<[String]>,
    pub sources: Vec<VisualSource>,
}

impl VisualGroup {
    pub fn new(attrs: Arc<[String]>, sources: Vec<VisualSource>) -> Result<Self, VeaError> {
        if let Some(s) = sources.iter().find(|s| s.selectors.len() != attrs.len()) {
            return Err(VeaError::ArityMismatch {
                expected: attrs.len() + 2,
                found: s.selectors.len() + 2,
            });
        }
        Ok(VisualGroup { attrs, sources })
    }

    pub fn empty(attrs: Arc<[String]>) -> Self {
        VisualGroup {
            attrs,
            sources: Vec::new(),
        }
    }

    /// Attribute list of every column of `table`.
    pub fn attrs_of(table: &ColumnTable) -> Arc<[String]> {
        table.columns().iter().map(|c| c.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn with_sources(&self, sources: Vec<VisualSource>) -> Self {
        VisualGroup {
            attrs: self.attrs.clone(),
            sources,
        }
    }

    pub fn attr_index(&self, attr: &str) -> Result<usize, VeaError> {
        self.attrs
            .iter()
            .position(|a| a == attr)
            .ok_or_else(|| VeaError::UnknownAttribute(attr.to_string()))
    }

    /// Tuple position of X, Y or an attribute.
    pub fn slot(&self, attr: &Attr) -> Result<usize, VeaError> {
        match attr {
            Attr::X => Ok(0),
            Attr::Y => Ok(1),
            Attr::A(a) => Ok(2 + self.attr_index(a)?),
        }
    }

    pub fn tuples(&self) -> Vec<Vec<Selector>> {
        self.sources.iter().map(VisualSource::tuple).collect()
    }

    pub fn from_tuples(&self, tuples: &[Vec<Selector>]) -> Result<Self, VeaError> {
        let sources = tuples
            .iter()
            .map(|t| VisualSource::from_tuple(t))
            .collect::<Result<_, _>>()?;
        VisualGroup::new(self.attrs.clone(), sources)
    }
}

impl fmt::Display for VisualGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X | Y")?;
        for a in self.attrs.iter() {
            write!(f, " | {a}")?;
        }
        writeln!(f)?;
        for s in &self.sources {
            write!(f, "{} | {}", s.x, s.y)?;
            for v in &s.selectors {
                write!(f, " | {v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// A column of the visual universe.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Attr {
    X,
    Y,
    A(String),
}

impl Attr {
    pub fn parse(s: &str) -> Attr {
        match s {
            "X" | "x" => Attr::X,
            "Y" | "y" => Attr::Y,
            a => Attr::A(a.to_string()),
        }
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attr::X => f.write_str("X"),
            Attr::Y => f.write_str("Y"),
            Attr::A(a) => f.write_str(a),
        }
    }
}

/// Selection condition: `=`/`!=` atoms joined by and/or.
#[derive(Clone, Debug, PartialEq)]
pub enum Theta {
    True,
    Atom {
        attr: Attr,
        op: CmpOp,
        value: Selector,
    },
    And(Box<Theta>, Box<Theta>),
    Or(Box<Theta>, Box<Theta>),
}

impl Theta {
    pub fn eq(attr: Attr, value: Selector) -> Theta {
        Theta::Atom {
            attr,
            op: CmpOp::Eq,
            value,
        }
    }

    pub fn ne(attr: Attr, value: Selector) -> Theta {
        Theta::Atom {
            attr,
            op: CmpOp::Ne,
            value,
        }
    }

    pub fn and(self, other: Theta) -> Theta {
        Theta::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Theta) -> Theta {
        Theta::Or(Box::new(self), Box::new(other))
    }

    /// Attributes mentioned by some atom.
    pub fn attrs(&self) -> Vec<&Attr> {
        match self {
            Theta::True => Vec::new(),
            Theta::Atom { attr, .. } => vec![attr],
            Theta::And(a, b) | Theta::Or(a, b) => {
                let mut v = a.attrs();
                v.extend(b.attrs());
                v
            }
        }
    }

    /// Rejects order comparisons, and in strict mode wildcard atoms on X or Y.
    pub fn check(&self, strict: bool) -> Result<(), VeaError> {
        match self {
            Theta::True => Ok(()),
            Theta::Atom { attr, op, value } => {
                if !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    return Err(VeaError::IllegalOperator(op.symbol().to_string()));
                }
                if strict && matches!(attr, Attr::X | Attr::Y) && *value == Selector::Star {
                    return Err(VeaError::UndefinedSelection(format!(
                        "{attr} {} *",
                        op.symbol()
                    )));
                }
                Ok(())
            }
            Theta::And(a, b) | Theta::Or(a, b) => {
                a.check(strict)?;
                b.check(strict)
            }
        }
    }

    /// Evaluates against a flat tuple `(X, Y, A_1, ..., A_k)`.
    pub fn holds(&self, g: &VisualGroup, t: &[Selector]) -> Result<bool, VeaError> {
        Ok(match self {
            Theta::True => true,
            Theta::Atom { attr, op, value } => {
                let s = &t[g.slot(attr)?];
                let same = s == value;
                if *op == CmpOp::Eq {
                    same
                } else {
                    !same
                }
            }
            Theta::And(a, b) => a.holds(g, t)? && b.holds(g, t)?,
            Theta::Or(a, b) => a.holds(g, t)? || b.holds(g, t)?,
        })
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::True => f.write_str("true"),
            Theta::Atom { attr, op, value } => write!(f, "{attr} {} {value}", op.symbol()),
            Theta::And(a, b) => write!(f, "({a} and {b})"),
            Theta::Or(a, b) => write!(f, "({a} or {b})"),
        }
    }
}

/// Data of a source: SUM of Y per X over the rows matching every non-wildcard selector.
pub fn materialize(
    table: &ColumnTable,
    attrs: &[String],
    s: &VisualSource,
) -> Result<UnitViz, VeaError> {
    let mut spec = CellSpec::new(&s.x, &s.y);
    let mut filter = Predicate::always();
    for (a, sel) in attrs.iter().zip(&s.selectors) {
        if let Selector::Val(v) = sel {
            let v = table.coerce(a, v);
            filter = filter.and(&Predicate::eq(a, v.clone()));
            spec.bindings.insert(a.clone(), v);
        }
    }
    spec.filter = filter.clone();
    let req = AggregateRequest::new(&s.x, vec![(&s.y, AggFn::Sum)]).filter(filter);
    let res = execute(table, &req)?;
    let points = res
        .series(&[])
        .unwrap_or_default()
        .into_iter()
        .map(|(x, ys)| (x, ys[0]))
        .collect();
    Ok(UnitViz::new(spec, points))
}

/// Sources of the visual universe satisfying `theta`, in enumeration order:
/// X over dimensions, Y over measures, then each attribute over `*` followed by
/// its distinct values. Attributes `theta` never mentions are fixed to `*`.
pub fn select_universe(
    table: &ColumnTable,
    theta: &Theta,
    strict: bool,
    cap: usize,
) -> Result<VisualGroup, VeaError> {
    theta.check(strict)?;
    let attrs = VisualGroup::attrs_of(table);
    let empty = VisualGroup::empty(attrs.clone());
    let mentioned = theta.attrs();
    for a in &mentioned {
        empty.slot(a)?;
    }
    let names = |kind: fn(&ColumnKind) -> bool| -> Vec<Selector> {
        table
            .columns()
            .iter()
            .filter(|c| kind(&c.kind))
            .map(|c| Selector::Val(Value::str(&c.name)))
            .collect()
    };
    let mut domains: Vec<Vec<Selector>> = vec![
        names(|k| matches!(k, ColumnKind::Dimension(_))),
        names(|k| matches!(k, ColumnKind::Measure)),
    ];
    for a in attrs.iter() {
        let mut d = vec![Selector::Star];
        if mentioned.iter().any(|m| **m == Attr::A(a.clone())) {
            d.extend(table.distinct(a)?.into_iter().map(Selector::Val));
        }
        domains.push(d);
    }
    let total = domains
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(d.len()));
    match total {
        Some(n) if n <= cap => {}
        _ => {
            return Err(VeaError::Unbounded(format!(
                "selection over the universe would enumerate more than {cap} sources"
            )))
        }
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; domains.len()];
    'outer: loop {
        let t: Vec<Selector> = idx
            .iter()
            .zip(&domains)
            .map(|(&i, d)| d[i].clone())
            .collect();
        if theta.holds(&empty, &t)? {
            out.push(VisualSource::from_tuple(&t)?);
        }
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    VisualGroup::new(attrs, out)
}
