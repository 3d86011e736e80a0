//! SQL text for requests, in an ANSI SQL-92 subset.

use super::predicate::{sql_ident, Predicate};
use super::request::{AggregateRequest, Binning};
use super::table::CROSS;

fn x_expr(req: &AggregateRequest, relation: &str) -> String {
    let base = if req.x_attr.contains(CROSS) {
        req.x_attr
            .split(CROSS)
            .map(sql_ident)
            .collect::<Vec<_>>()
            .join(&format!(" || '{CROSS}' || "))
    } else {
        sql_ident(&req.x_attr)
    };
    match req.x_binning {
        Binning::None => base,
        Binning::Width(w) => format!("FLOOR({base} / {w}) * {w}"),
        Binning::Count(n) => {
            let rel = sql_ident(relation);
            format!("WIDTH_BUCKET({base}, (SELECT MIN({base}) FROM {rel}), (SELECT MAX({base}) FROM {rel}), {n})")
        }
    }
}

fn agg_expr(y: &str, f: crate::store::AggFn) -> String {
    let f = match f {
        crate::store::AggFn::Sum => "SUM",
        crate::store::AggFn::Avg => "AVG",
        crate::store::AggFn::Count => "COUNT",
        crate::store::AggFn::Max => "MAX",
        crate::store::AggFn::Min => "MIN",
    };
    format!("{f}({})", sql_ident(y))
}

/// `SELECT x, agg(y).. FROM relation WHERE .. GROUP BY x, dims ORDER BY x, dims`.
pub fn emit_sql(req: &AggregateRequest, relation: &str) -> String {
    let x = x_expr(req, relation);
    let mut select = vec![format!("{x} AS \"x\"")];
    for (y, f) in &req.y_terms {
        select.push(format!(
            "{} AS {}",
            agg_expr(y, *f),
            sql_ident(&format!("{}_{}", f.name(), y))
        ));
    }
    let dims: Vec<String> = req.group_dims.iter().map(|d| sql_ident(d)).collect();
    select.extend(dims.iter().cloned());
    let mut keys = vec![x];
    keys.extend(dims);
    let mut sql = format!("SELECT {} FROM {}", select.join(", "), sql_ident(relation));
    if !req.filter.is_always() {
        sql.push_str(&format!(" WHERE {}", req.filter.to_sql()));
    }
    sql.push_str(&format!(
        " GROUP BY {} ORDER BY {}",
        keys.join(", "),
        keys.join(", ")
    ));
    sql
}

/// One statement covering several requests: grouped on every request's
/// attributes plus a membership flag per request, filtered by the disjunction
/// of the request predicates.
pub fn emit_sql_combined(reqs: &[AggregateRequest], relation: &str) -> String {
    if let [r] = reqs {
        return emit_sql(r, relation);
    }
    let mut keys: Vec<String> = Vec::new();
    for r in reqs {
        let x = x_expr(r, relation);
        if !keys.contains(&x) {
            keys.push(x);
        }
        for d in &r.group_dims {
            let d = sql_ident(d);
            if !keys.contains(&d) {
                keys.push(d);
            }
        }
    }
    let mut select = keys.clone();
    for (i, r) in reqs.iter().enumerate() {
        let cond = if r.filter.is_always() {
            "TRUE".to_string()
        } else {
            r.filter.to_sql()
        };
        select.push(format!(
            "CASE WHEN {cond} THEN 1 ELSE 0 END AS \"c{}\"",
            i + 1
        ));
    }
    let mut aggs: Vec<String> = Vec::new();
    for r in reqs {
        for (y, f) in &r.y_terms {
            let a = agg_expr(y, *f);
            if !aggs.contains(&a) {
                aggs.push(a);
            }
        }
    }
    select.extend(aggs);
    let flags: Vec<String> = (1..=reqs.len()).map(|i| format!("\"c{i}\"")).collect();
    let mut group = keys.clone();
    group.extend(flags);
    let filter = reqs
        .iter()
        .fold(Predicate::never(), |acc, r| acc.or(&r.filter));
    let mut sql = format!("SELECT {} FROM {}", select.join(", "), sql_ident(relation));
    if !filter.is_always() {
        let conds: Vec<String> = reqs
            .iter()
            .map(|r| format!("({})", r.filter.to_sql()))
            .collect();
        sql.push_str(&format!(" WHERE {}", conds.join(" OR ")));
    }
    sql.push_str(&format!(
        " GROUP BY {} ORDER BY {}",
        group.join(", "),
        group.join(", ")
    ));
    sql
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::AggFn;

    fn us() -> AggregateRequest {
        AggregateRequest::new("year", vec![("sales", AggFn::Sum)])
            .group_by(&["product"])
            .filter(Predicate::eq("location", "US"))
    }

    #[test]
    fn single_request() {
        let s = emit_sql(&us(), "sales");
        assert!(s.contains("GROUP BY"));
        assert!(s.contains("ORDER BY"));
        assert!(s.contains("\"location\" = 'US'"));
        assert_eq!(s, emit_sql(&us(), "sales"));
    }

    #[test]
    fn combined_uses_or() {
        let b = AggregateRequest::new("year", vec![("sales", AggFn::Sum)])
            .group_by(&["product"])
            .filter(Predicate::eq("product", "chair"));
        let s = emit_sql_combined(&[us(), b], "sales");
        assert!(s.contains(" OR "));
        assert!(s.contains("\"c2\""));
    }

    #[test]
    fn count_binning() {
        let r = AggregateRequest::new("weight", vec![("sales", AggFn::Sum)])
            .binning(Binning::Count(20));
        assert!(emit_sql(&r, "t").contains("WIDTH_BUCKET(\"weight\""));
    }
}
