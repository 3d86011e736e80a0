//! The nine operators over visual groups.

use std::fmt;
use std::sync::Arc;

use super::bag;
use super::group::{materialize, Attr, Theta, VisualGroup, VisualSource};
use super::VeaError;
use crate::process::{Registry, UnitViz};
use crate::store::ColumnTable;
use crate::value::Selector;

/// The outer function `F` applied to a primitive's score.
#[derive(Clone, Default)]
pub enum Functional {
    #[default]
    Identity,
    Negate,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Functional {
    pub fn apply(&self, v: f64) -> f64 {
        match self {
            Functional::Identity => v,
            Functional::Negate => -v,
            Functional::Custom(f) => f(v),
        }
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Identity => f.write_str("Identity"),
            Functional::Negate => f.write_str("Negate"),
            Functional::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Data source for the operators that read visualization data.
#[derive(Clone, Copy)]
pub struct Context<'a> {
    pub table: &'a ColumnTable,
    pub registry: &'a Registry,
}

impl<'a> Context<'a> {
    pub fn new(table: &'a ColumnTable, registry: &'a Registry) -> Self {
        Context { table, registry }
    }

    fn data(&self, g: &VisualGroup, s: &VisualSource) -> Result<UnitViz, VeaError> {
        materialize(self.table, &g.attrs, s)
    }
}

fn same_attrs(v: &VisualGroup, u: &VisualGroup) -> Result<(), VeaError> {
    if v.attrs != u.attrs {
        return Err(VeaError::ArityMismatch {
            expected: v.attrs.len() + 2,
            found: u.attrs.len() + 2,
        });
    }
    Ok(())
}

/// Stable ascending reorder by `scores`.
fn order_by(v: &VisualGroup, scores: Vec<f64>) -> VisualGroup {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    v.with_sources(idx.into_iter().map(|i| v.sources[i].clone()).collect())
}

/// Tuple-at-a-time selection.
pub fn sel_v(v: &VisualGroup, theta: &Theta, strict: bool) -> Result<VisualGroup, VeaError> {
    theta.check(strict)?;
    for a in theta.attrs() {
        v.slot(a)?;
    }
    let mut out = Vec::new();
    for s in &v.sources {
        if theta.holds(v, &s.tuple())? {
            out.push(s.clone());
        }
    }
    Ok(v.with_sources(out))
}

/// Stable ascending sort on `F(T(source))`.
pub fn sort_v(ctx: Context<'_>, v: &VisualGroup, f: &Functional) -> Result<VisualGroup, VeaError> {
    let scores = v
        .sources
        .iter()
        .map(|s| Ok(f.apply(ctx.registry.trend(&ctx.data(v, s)?)?)))
        .collect::<Result<Vec<_>, VeaError>>()?;
    Ok(order_by(v, scores))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    First(usize),
    /// 1-based inclusive range.
    Range(i64, i64),
}

pub fn limit_v(v: &VisualGroup, limit: Limit) -> Result<VisualGroup, VeaError> {
    let sources = match limit {
        Limit::First(k) => v.sources.iter().take(k).cloned().collect(),
        Limit::Range(a, b) => bag::slice(&v.sources, Some(a), Some(b))?,
    };
    Ok(v.with_sources(sources))
}

pub fn dedup_v(v: &VisualGroup) -> VisualGroup {
    v.with_sources(bag::dedup(&v.sources))
}

pub fn union_v(v: &VisualGroup, u: &VisualGroup) -> Result<VisualGroup, VeaError> {
    same_attrs(v, u)?;
    Ok(v.with_sources(bag::union(&v.sources, &u.sources)))
}

pub fn diff_v(v: &VisualGroup, u: &VisualGroup) -> Result<VisualGroup, VeaError> {
    same_attrs(v, u)?;
    Ok(v.with_sources(bag::diff(&v.sources, &u.sources)))
}

pub fn intersect_v(v: &VisualGroup, u: &VisualGroup) -> Result<VisualGroup, VeaError> {
    same_attrs(v, u)?;
    Ok(v.with_sources(bag::intersect(&v.sources, &u.sources)))
}

/// `π_{all but A}(V) × π_A(U)`, with `A` put back in its column.
pub fn swap_v(v: &VisualGroup, u: &VisualGroup, attr: &Attr) -> Result<VisualGroup, VeaError> {
    same_attrs(v, u)?;
    let a = v.slot(attr)?;
    let width = v.attrs.len() + 2;
    let rest: Vec<usize> = (0..width).filter(|&i| i != a).collect();
    let crossed = bag::cross(
        &bag::project(&v.tuples(), &rest),
        &bag::project(&u.tuples(), &[a]),
    );
    let tuples: Vec<Vec<Selector>> = crossed
        .into_iter()
        .map(|mut t| {
            let val = t.pop().expect("swapped column");
            t.insert(a, val);
            t
        })
        .collect();
    v.from_tuples(&tuples)
}

/// Reorders `V` by `F(D)` between sources of `V` and `U` that agree on `on`.
pub fn dist_v(
    ctx: Context<'_>,
    v: &VisualGroup,
    u: &VisualGroup,
    on: &[Attr],
    f: &Functional,
) -> Result<VisualGroup, VeaError> {
    same_attrs(v, u)?;
    let slots = on
        .iter()
        .map(|a| v.slot(a))
        .collect::<Result<Vec<_>, _>>()?;
    let key = |s: &VisualSource| -> Vec<Selector> {
        let t = s.tuple();
        slots.iter().map(|&i| t[i].clone()).collect()
    };
    let unique = |g: &VisualGroup, k: &[Selector], which: &str| -> Result<VisualSource, VeaError> {
        let mut hits = g.sources.iter().filter(|s| key(s) == k);
        match (hits.next(), hits.next()) {
            (Some(s), None) => Ok(s.clone()),
            (None, _) => Err(VeaError::UndefinedMatch(format!(
                "no source of {which} matches {}",
                show(k)
            ))),
            (Some(_), Some(_)) => Err(VeaError::UndefinedMatch(format!(
                "several sources of {which} match {}",
                show(k)
            ))),
        }
    };
    let mut scores = Vec::with_capacity(v.len());
    for s in &v.sources {
        let k = key(s);
        let a = unique(v, &k, "V")?;
        let b = unique(u, &k, "U")?;
        scores.push(
            f.apply(
                ctx.registry
                    .distance(&ctx.data(v, &a)?, &ctx.data(u, &b)?)?,
            ),
        );
    }
    Ok(order_by(v, scores))
}

/// Reorders `V` by `F(D)` to the single source of `U`.
pub fn find_v(
    ctx: Context<'_>,
    v: &VisualGroup,
    u: &VisualGroup,
    f: &Functional,
) -> Result<VisualGroup, VeaError> {
    same_attrs(v, u)?;
    if u.len() != 1 {
        return Err(VeaError::NonSingletonReference(u.len()));
    }
    let r = ctx.data(u, &u.sources[0])?;
    let scores = v
        .sources
        .iter()
        .map(|s| Ok(f.apply(ctx.registry.distance(&ctx.data(v, s)?, &r)?)))
        .collect::<Result<Vec<_>, VeaError>>()?;
    Ok(order_by(v, scores))
}

fn show(k: &[Selector]) -> String {
    let parts: Vec<String> = k.iter().map(|s| s.to_string()).collect();
    format!("({})", parts.join(", "))
}
