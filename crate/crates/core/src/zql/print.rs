//! Canonical text form of a parsed query.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;
use crate::store::Binning;

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) if s.contains('\'') => write!(f, "\"{s}\""),
            Literal::Str(s) => write!(f, "'{s}'"),
            Literal::Num(n) => write!(f, "{n}"),
        }
    }
}

fn list<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl SetExpr {
    fn is_atom(&self) -> bool {
        matches!(
            self,
            SetExpr::All | SetExpr::Single(_) | SetExpr::Set(_) | SetExpr::Var(_)
        )
    }

    fn fmt_operand(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.is_atom() {
            write!(f, "{self}")
        } else {
            write!(f, "({self})")
        }
    }
}

impl Display for SetExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let (a, op, b) = match self {
            SetExpr::All => return f.write_str("*"),
            SetExpr::Single(l) => return write!(f, "{l}"),
            SetExpr::Set(ls) => return write!(f, "{{{}}}", list(ls)),
            SetExpr::Var(v) => return f.write_str(v),
            SetExpr::Diff(a, b) => (a, "-", b),
            SetExpr::Union(a, b) => (a, "|", b),
            SetExpr::Intersect(a, b) => (a, "^", b),
            SetExpr::Cross(a, b) => (a, "×", b),
            SetExpr::Plus(a, b) => (a, "+", b),
            SetExpr::Div(a, b) => (a, "/", b),
        };
        a.fmt_operand(f)?;
        write!(f, " {op} ")?;
        b.fmt_operand(f)
    }
}

impl Display for Annot {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.priority {
            write!(f, "^{p}")?;
        }
        if self.reorder {
            f.write_str(" -->")?;
        }
        Ok(())
    }
}

impl Display for AxisCell {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.kind {
            AxisKind::Empty => return Ok(()),
            AxisKind::Expr(e) => write!(f, "{e}")?,
            AxisKind::Bind(v, e) => write!(f, "{v} <-- {e}")?,
            AxisKind::DerivedBind(v) => write!(f, "{v} <-- _")?,
        }
        write!(f, "{}", self.annot)
    }
}

impl Display for ZValue {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            ZValue::Lit(l) => write!(f, "{l}"),
            ZValue::Set(e @ (SetExpr::All | SetExpr::Set(_) | SetExpr::Var(_))) => write!(f, "{e}"),
            ZValue::Set(e) => write!(f, "({e})"),
            ZValue::Cmp(op, l) => write!(f, "[? {op} {l}]"),
            ZValue::In(e) => write!(f, "[? IN {e}]"),
            ZValue::Where(op, l) => write!(f, "{{? {op} {l}}}"),
            ZValue::Derived => f.write_str("_"),
        }
    }
}

fn attr_lit(a: &str) -> String {
    Literal::Str(a.to_string()).to_string()
}

impl Display for ZCell {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ZKind::Empty => return Ok(()),
            ZKind::Pair { attr, value } => write!(f, "{}.{value}", attr_lit(attr))?,
            ZKind::Expr(e) => write!(f, "{e}")?,
            ZKind::Bind { var, attr, value } => write!(f, "{var} <-- {}.{value}", attr_lit(attr))?,
            ZKind::AttrValueBind {
                attr_var,
                value_var,
                attrs,
            } => {
                write!(f, "{attr_var}.{value_var} <-- ")?;
                attrs.fmt_operand(f)?;
                f.write_str(".*")?;
            }
        }
        write!(f, "{}", self.annot)
    }
}

impl NameExpr {
    fn fmt_operand(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            NameExpr::Concat(..) | NameExpr::Diff(..) | NameExpr::Intersect(..) => {
                write!(f, "({self})")
            }
            _ => write!(f, "{self}"),
        }
    }
}

impl Display for NameExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            NameExpr::Ref(n) => f.write_str(n),
            NameExpr::Concat(a, b) | NameExpr::Diff(a, b) | NameExpr::Intersect(a, b) => {
                let op = match self {
                    NameExpr::Concat(..) => "+",
                    NameExpr::Diff(..) => "-",
                    _ => "^",
                };
                a.fmt_operand(f)?;
                write!(f, " {op} ")?;
                b.fmt_operand(f)
            }
            NameExpr::Index(a, i) => {
                a.fmt_operand(f)?;
                write!(f, "[{i}]")
            }
            NameExpr::Slice(a, lo, hi) => {
                a.fmt_operand(f)?;
                let s = |x: &Option<i64>| x.map(|v| v.to_string()).unwrap_or_default();
                write!(f, "[{}:{}]", s(lo), s(hi))
            }
            NameExpr::Uniq(a) => {
                a.fmt_operand(f)?;
                f.write_str(".uniq")
            }
            NameExpr::Order(a) => {
                a.fmt_operand(f)?;
                f.write_str(".order")
            }
        }
    }
}

impl Display for NameCell {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.output {
            f.write_str("*")?;
        }
        f.write_str(&self.var)?;
        if let Some(d) = &self.derivation {
            write!(f, " <-- {d}")?;
        }
        Ok(())
    }
}

fn binning(b: &Binning) -> Option<String> {
    match b {
        Binning::None => None,
        Binning::Width(w) => Some(format!("bin({w})")),
        Binning::Count(n) => Some(format!("nbin({n})")),
    }
}

impl Display for VizSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(self.vtype.name())?;
        let mut args = Vec::new();
        if let Some(b) = self.x.as_ref().and_then(binning) {
            args.push(format!("x={b}"));
        }
        match &self.y {
            Some(YTransform::Agg(a)) => args.push(format!("y=agg('{a}')")),
            Some(YTransform::Bin(b)) => {
                if let Some(b) = binning(b) {
                    args.push(format!("y={b}"))
                }
            }
            None => {}
        }
        if !args.is_empty() {
            write!(f, ".({})", args.join(", "))?;
        }
        Ok(())
    }
}

impl Display for VizCell {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            VizCell::Auto => Ok(()),
            VizCell::Spec(s) => write!(f, "{s}"),
            VizCell::Set(ss) => write!(f, "{{{}}}", list(ss)),
        }
    }
}

impl Display for Limiter {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Limiter::K(Some(n)) => write!(f, "[k={n}]"),
            Limiter::K(None) => f.write_str("[k=inf]"),
            Limiter::Threshold(op, t) => write!(f, "[t{op}{t}]"),
            Limiter::Percentile(p) => write!(f, "[p={p}]"),
        }
    }
}

fn subscript(vars: &[String]) -> String {
    if vars.len() == 1 {
        vars[0].clone()
    } else {
        format!("{{{}}}", vars.join(","))
    }
}

impl Expr {
    fn prec(&self) -> u8 {
        match self {
            Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => 1,
            Expr::Arith(..) => 2,
            Expr::Const(n) if *n < 0.0 => 0,
            _ => 3,
        }
    }

    fn fmt_prec(&self, f: &mut Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Reduce { op, vars, body } => {
                write!(f, "{}_{} ", op.name(), subscript(vars))?;
                body.fmt_prec(f, 3)
            }
            Expr::Arith(op, a, b) => {
                let p = self.prec();
                a.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, p + 1)
            }
            Expr::Neg(e) => {
                f.write_char('-')?;
                e.fmt_prec(f, 3)
            }
            Expr::Const(n) => write!(f, "{n}"),
            Expr::T(a) => write!(f, "T({a})"),
            Expr::D(a, b) => write!(f, "D({a}, {b})"),
            Expr::Plug(n, args) => write!(f, "{n}({})", args.join(", ")),
        }
    }
}

impl Display for ProcessDecl {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            ProcessDecl::Opt {
                outputs,
                argopt,
                opt_vars,
                limiter,
                body,
            } => {
                write!(
                    f,
                    "{} <-- {}_{}",
                    outputs.join(", "),
                    argopt.name(),
                    subscript(opt_vars)
                )?;
                if let Some(l) = limiter {
                    write!(f, "{l}")?;
                }
                write!(f, " {body}")
            }
            ProcessDecl::Represent {
                output,
                k,
                var,
                coll,
            } => write!(f, "{output} <-- R({k}, {var}, {coll})"),
        }
    }
}

impl ZqlRow {
    pub fn process_text(&self) -> String {
        match self.process.as_slice() {
            [] => String::new(),
            [p] => p.to_string(),
            ps => ps
                .iter()
                .map(|p| format!("({p})"))
                .collect::<Vec<_>>()
                .join(", "),
        }
    }
}

impl Display for ZqlQuery {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut header = vec!["Name".to_string(), "X".into(), "Y".into()];
        for i in 0..self.z_columns {
            header.push(if i == 0 {
                "Z".into()
            } else {
                format!("Z{}", i + 1)
            });
        }
        header.push("Viz".into());
        header.push("Process".into());
        writeln!(f, "{}", header.join(" | "))?;
        for r in &self.rows {
            let mut cells = vec![r.name.to_string(), r.x.to_string(), r.y.to_string()];
            cells.extend(r.z.iter().map(|z| z.to_string()));
            cells.push(r.viz.to_string());
            cells.push(r.process_text());
            writeln!(f, "{}", cells.join(" | ").trim_end())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_query;

    #[test]
    fn reprint_reparses() {
        let text = "Name | X | Y | Z | Z2 | Viz | Process\n\
            f1 | 'year' | y1 <-- {'sales','profit'} | v1 <-- 'product'.(* - 'chair') | 'weight'.[? < 10] | bar.(x=bin(2), y=agg('avg')) |\n\
            f2 | 'year' | y1 | v1 | 'location'.{? != 'US'} | | v2 <-- argmax_v1[k=3] sum_v1 (D(f1, f2) - -T(f1)) * 2\n\
            *f3 <-- (f1 + f2)[1:2].uniq | | | | | |\n\
            f4 | x1^2 <-- * | 'sales' | z1.v3 <-- (* - {'year'}).* | v2 ^ v1 | | (v4 <-- R(2, v1, f1)), (v5 <-- argany_{v1}[t>=0.5] T(f1))\n";
        let q = parse_query(text).unwrap();
        let printed = q.to_string();
        assert_eq!(parse_query(&printed).unwrap(), q, "{printed}");
    }
}
