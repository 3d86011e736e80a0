//! Scalar values shared by the store, the query language and the algebra.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// A single cell value. Numbers sort before strings.
#[derive(Clone, Debug)]
pub enum Value {
    Num(f64),
    Str(Arc<str>),
}

impl Value {
    pub fn str(s: &str) -> Self {
        Value::Str(Arc::from(s))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            Value::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            Value::Num(_) => None,
        }
    }

    fn norm_bits(n: f64) -> u64 {
        if n == 0.0 {
            0
        } else {
            n.to_bits()
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => Value::norm_bits(*a) == Value::norm_bits(*b),
            (Value::Str(a), Value::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Num(n) => {
                0u8.hash(state);
                Value::norm_bits(*n).hash(state);
            }
            Value::Str(s) => {
                1u8.hash(state);
                s.hash(state);
            }
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => {
                let a = if *a == 0.0 { 0.0 } else { *a };
                let b = if *b == 0.0 { 0.0 } else { *b };
                a.total_cmp(&b)
            }
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Num(_), Value::Str(_)) => Ordering::Less,
            (Value::Str(_), Value::Num(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => write!(f, "{n}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Num(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::str(s)
    }
}

/// A slot in a visual source or an axis tuple: either a concrete value or the wildcard.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Selector {
    Star,
    Val(Value),
}

impl Selector {
    pub fn value(&self) -> Option<&Value> {
        match self {
            Selector::Star => None,
            Selector::Val(v) => Some(v),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Star => f.write_str("*"),
            Selector::Val(v) => write!(f, "{v}"),
        }
    }
}

impl From<Value> for Selector {
    fn from(v: Value) -> Self {
        Selector::Val(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn zero_signs_collapse() {
        assert_eq!(Value::Num(0.0), Value::Num(-0.0));
        let set: HashSet<Value> = [Value::Num(0.0), Value::Num(-0.0)].into_iter().collect();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn numbers_before_strings() {
        let mut v = vec![Value::str("a"), Value::Num(3.0), Value::Num(-1.0)];
        v.sort();
        assert_eq!(v, vec![Value::Num(-1.0), Value::Num(3.0), Value::str("a")]);
    }

    #[test]
    fn display_integral_numbers() {
        assert_eq!(Value::Num(2016.0).to_string(), "2016");
        assert_eq!(Value::Num(1.5).to_string(), "1.5");
    }
}
