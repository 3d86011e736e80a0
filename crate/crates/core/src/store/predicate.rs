use std::fmt;

use super::{ColumnTable, StoreError};
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn sql(self) -> &'static str {
        match self {
            CmpOp::Ne => "<>",
            other => other.symbol(),
        }
    }

    pub fn parse(s: &str) -> Option<CmpOp> {
        match s {
            "=" | "==" => Some(CmpOp::Eq),
            "!=" | "<>" | "≠" => Some(CmpOp::Ne),
            "<" => Some(CmpOp::Lt),
            "<=" | "≤" => Some(CmpOp::Le),
            ">" => Some(CmpOp::Gt),
            ">=" | "≥" => Some(CmpOp::Ge),
            _ => None,
        }
    }

    pub fn holds<T: PartialOrd + ?Sized>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Cmp {
        attr: String,
        op: CmpOp,
        value: Value,
    },
    In {
        attr: String,
        values: Vec<Value>,
    },
}

impl Atom {
    pub fn attr(&self) -> &str {
        match self {
            Atom::Cmp { attr, .. } | Atom::In { attr, .. } => attr,
        }
    }
}

/// Disjunction of conjunctions. `Predicate::always()` is a single empty conjunction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub disjuncts: Vec<Vec<Atom>>,
}

impl Default for Predicate {
    fn default() -> Self {
        Predicate::always()
    }
}

impl Predicate {
    pub fn always() -> Self {
        Predicate {
            disjuncts: vec![Vec::new()],
        }
    }

    pub fn never() -> Self {
        Predicate {
            disjuncts: Vec::new(),
        }
    }

    pub fn atom(a: Atom) -> Self {
        Predicate {
            disjuncts: vec![vec![a]],
        }
    }

    pub fn eq(attr: &str, value: impl Into<Value>) -> Self {
        Predicate::atom(Atom::Cmp {
            attr: attr.to_string(),
            op: CmpOp::Eq,
            value: value.into(),
        })
    }

    pub fn is_always(&self) -> bool {
        self.disjuncts.iter().any(Vec::is_empty)
    }

    pub fn and(&self, other: &Predicate) -> Predicate {
        let mut out = Vec::new();
        for a in &self.disjuncts {
            for b in &other.disjuncts {
                let mut c = a.clone();
                for atom in b {
                    if !c.contains(atom) {
                        c.push(atom.clone());
                    }
                }
                out.push(c);
            }
        }
        Predicate { disjuncts: out }
    }

    pub fn or(&self, other: &Predicate) -> Predicate {
        if self.is_always() || other.is_always() {
            return Predicate::always();
        }
        let mut out = self.disjuncts.clone();
        for d in &other.disjuncts {
            if !out.contains(d) {
                out.push(d.clone());
            }
        }
        Predicate { disjuncts: out }
    }

    pub fn attrs(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.disjuncts.iter().flatten().map(Atom::attr).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Compiles against a table for fast row evaluation.
    pub fn compile(&self, table: &ColumnTable) -> Result<CompiledPredicate, StoreError> {
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|conj| {
                conj.iter()
                    .map(|a| {
                        let cols = table.resolve(a.attr())?;
                        Ok(match a {
                            Atom::Cmp { attr, op, value } => CAtom::Cmp {
                                cols,
                                op: *op,
                                value: table.coerce(attr, value),
                            },
                            Atom::In { attr, values } => CAtom::In {
                                cols,
                                values: values.iter().map(|v| table.coerce(attr, v)).collect(),
                            },
                        })
                    })
                    .collect::<Result<Vec<_>, StoreError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledPredicate { disjuncts })
    }

    pub fn to_sql(&self) -> String {
        if self.is_always() {
            return "TRUE".into();
        }
        if self.disjuncts.is_empty() {
            return "FALSE".into();
        }
        let parts: Vec<String> = self
            .disjuncts
            .iter()
            .map(|c| {
                let atoms: Vec<String> = c.iter().map(atom_sql).collect();
                if atoms.len() == 1 {
                    atoms[0].clone()
                } else {
                    format!("({})", atoms.join(" AND "))
                }
            })
            .collect();
        parts.join(" OR ")
    }
}

pub(crate) fn sql_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

pub(crate) fn sql_literal(v: &Value) -> String {
    match v {
        Value::Num(n) => format!("{n}"),
        Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
    }
}

fn atom_sql(a: &Atom) -> String {
    match a {
        Atom::Cmp { attr, op, value } => {
            format!("{} {} {}", sql_ident(attr), op.sql(), sql_literal(value))
        }
        Atom::In { attr, values } if values.is_empty() => format!("{} IN (NULL)", sql_ident(attr)),
        Atom::In { attr, values } => {
            let vs: Vec<String> = values.iter().map(sql_literal).collect();
            format!("{} IN ({})", sql_ident(attr), vs.join(", "))
        }
    }
}

#[derive(Clone, Debug)]
enum CAtom {
    Cmp {
        cols: Vec<usize>,
        op: CmpOp,
        value: Value,
    },
    In {
        cols: Vec<usize>,
        values: Vec<Value>,
    },
}

#[derive(Clone, Debug)]
pub struct CompiledPredicate {
    disjuncts: Vec<Vec<CAtom>>,
}

impl CompiledPredicate {
    pub fn eval(&self, table: &ColumnTable, row: usize) -> bool {
        self.disjuncts.iter().any(|conj| {
            conj.iter().all(|a| match a {
                CAtom::Cmp { cols, op, value } => {
                    let v = table.value_at(cols, row);
                    op.holds(&v, value)
                }
                CAtom::In { cols, values } => {
                    let v = table.value_at(cols, row);
                    values.contains(&v)
                }
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn and_distributes() {
        let a = Predicate::eq("p", "chair").or(&Predicate::eq("p", "table"));
        let b = Predicate::eq("l", "US");
        assert_eq!(a.and(&b).disjuncts.len(), 2);
        assert!(Predicate::always().and(&b) == b);
    }

    #[test]
    fn sql_rendering() {
        let p = Predicate::eq("location", "US");
        assert_eq!(p.to_sql(), "\"location\" = 'US'");
        let q = p.or(&Predicate::eq("product", "chair"));
        assert!(q.to_sql().contains(" OR "));
    }
}
