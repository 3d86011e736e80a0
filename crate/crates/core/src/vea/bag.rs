//! Ordered bags: sequences with duplicates where position matters.
//!
//! Indexing is 1-based and slices are inclusive on both ends.

use super::VeaError;

/// `r[i]`, 1-based.
pub fn index<T>(r: &[T], i: i64) -> Result<&T, VeaError> {
    if i < 1 || i as usize > r.len() {
        return Err(VeaError::IndexOutOfRange {
            index: i,
            len: r.len(),
        });
    }
    Ok(&r[i as usize - 1])
}

/// `r[a:b]`, both ends inclusive. `None` stands for 1 and `|r|` respectively.
pub fn slice<T: Clone>(r: &[T], a: Option<i64>, b: Option<i64>) -> Result<Vec<T>, VeaError> {
    let a = a.unwrap_or(1);
    let b = b.unwrap_or(r.len() as i64);
    if a > b {
        return Ok(Vec::new());
    }
    index(r, a)?;
    index(r, b)?;
    Ok(r[a as usize - 1..b as usize].to_vec())
}

/// Concatenation.
pub fn union<T: Clone>(r: &[T], s: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(r.len() + s.len());
    out.extend_from_slice(r);
    out.extend_from_slice(s);
    out
}

/// Every tuple of `r` that does not occur in `s`.
pub fn diff<T: Clone + PartialEq>(r: &[T], s: &[T]) -> Vec<T> {
    r.iter().filter(|t| !s.contains(t)).cloned().collect()
}

/// Every tuple of `r` that occurs in `s`.
pub fn intersect<T: Clone + PartialEq>(r: &[T], s: &[T]) -> Vec<T> {
    r.iter().filter(|t| s.contains(t)).cloned().collect()
}

/// First copy of each tuple, at the position where it first occurs.
pub fn dedup<T: Clone + PartialEq>(r: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for t in r {
        if !out.contains(t) {
            out.push(t.clone());
        }
    }
    out
}

pub fn select<T: Clone>(r: &[T], theta: impl Fn(&T) -> bool) -> Vec<T> {
    r.iter().filter(|t| theta(t)).cloned().collect()
}

/// Keeps the listed positions of every tuple, duplicates included.
pub fn project<T: Clone>(r: &[Vec<T>], cols: &[usize]) -> Vec<Vec<T>> {
    r.iter()
        .map(|t| cols.iter().map(|&c| t[c].clone()).collect())
        .collect()
}

/// Left-major cross product: all pairs with `r[1]` first, then `r[2]`, and so on.
pub fn cross<T: Clone>(r: &[Vec<T>], s: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(r.len() * s.len());
    for a in r {
        for b in s {
            out.push(a.iter().chain(b).cloned().collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_based_index() {
        let r = ['a', 'b', 'c'];
        assert_eq!(*index(&r, 1).unwrap(), 'a');
        assert_eq!(*index(&r, 3).unwrap(), 'c');
        assert!(matches!(
            index(&r, 0),
            Err(VeaError::IndexOutOfRange { index: 0, len: 3 })
        ));
        assert!(index(&r, 4).is_err());
    }

    #[test]
    fn inclusive_slice() {
        let r = [1, 2, 3, 4];
        assert_eq!(slice(&r, Some(2), Some(3)).unwrap(), vec![2, 3]);
        assert_eq!(slice(&r, None, Some(2)).unwrap(), vec![1, 2]);
        assert_eq!(slice(&r, Some(3), None).unwrap(), vec![3, 4]);
        assert!(slice(&r, Some(2), Some(5)).is_err());
    }

    #[test]
    fn dedup_keeps_first() {
        assert_eq!(dedup(&['a', 'b', 'a', 'c']), vec!['a', 'b', 'c']);
    }

    #[test]
    fn empty_difference() {
        assert_eq!(diff(&['a', 'b'], &[]), vec!['a', 'b']);
    }

    #[test]
    fn cross_order() {
        let r = vec![vec!["a"], vec!["b"]];
        let s = vec![vec!["1"], vec!["2"]];
        assert_eq!(
            cross(&r, &s),
            vec![
                vec!["a", "1"],
                vec!["a", "2"],
                vec!["b", "1"],
                vec!["b", "2"]
            ]
        );
    }
}
