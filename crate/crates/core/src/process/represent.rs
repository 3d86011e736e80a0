use super::eval::{Bound, Evaluator, Probe};
use super::ProcessError;
use crate::value::Selector;

/// k-medoids over a distance matrix: greedy build, then best-improvement swaps.
/// Returns medoid indices in ascending order.
pub fn k_medoids(dist: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = dist.len();
    if k == 0 || n == 0 {
        return Vec::new();
    }
    let cost = |med: &[usize]| -> f64 {
        (0..n)
            .map(|i| {
                med.iter()
                    .map(|&m| dist[i][m])
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };
    let first = (0..n)
        .min_by(|&a, &b| {
            dist[a]
                .iter()
                .sum::<f64>()
                .total_cmp(&dist[b].iter().sum::<f64>())
        })
        .unwrap_or(0);
    let mut med = vec![first];
    while med.len() < k.min(n) {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !med.contains(i)) {
            let d = med
                .iter()
                .map(|&m| dist[i][m])
                .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        med.push(best.expect("candidate exists").0);
    }
    let mut current = cost(&med);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..med.len() {
            for o in (0..n).filter(|o| !med.contains(o)) {
                let mut trial = med.clone();
                trial[slot] = o;
                let c = cost(&trial);
                if c < current && best.is_none_or(|(_, _, bc)| c < bc) {
                    best = Some((slot, o, c));
                }
            }
        }
        match best {
            Some((slot, o, c)) => {
                med[slot] = o;
                current = c;
            }
            None => break,
        }
    }
    med.sort_unstable();
    med
}

/// `k` representative values of `var`, judged by the distance between their cells in `coll`.
#[allow(clippy::needless_range_loop)]
pub(crate) fn r_representatives<P: Probe>(
    k: usize,
    var: &str,
    coll: &str,
    ev: &mut Evaluator<'_, P>,
) -> Result<Vec<Selector>, ProcessError> {
    let (g, p) = ev
        .env
        .groups
        .lookup(var)
        .ok_or_else(|| ProcessError::UnboundVariable(var.to_string()))?;
    let n = ev.env.groups.get(g).len();
    if k == 0 || k > n {
        return Err(ProcessError::BadK { k, n });
    }
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let a = ev.cell(coll, &vec![(g, i)] as &Bound)?;
            let b = ev.cell(coll, &vec![(g, j)] as &Bound)?;
            ev.calls += 1;
            let d = ev
                .env
                .registry
                .distance(a, b)
                .map_err(|source| ProcessError::Primitive {
                    at: format!("{var}[{i}], {var}[{j}]"),
                    source,
                })?;
            if !d.is_finite() {
                return Err(ProcessError::NonFiniteScore { index: i, score: d });
            }
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let group = ev.env.groups.get(g);
    Ok(k_medoids(&dist, k)
        .into_iter()
        .map(|i| group.tuples[i][p].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|a| points.iter().map(|b| (a - b).abs()).collect())
            .collect()
    }

    #[test]
    fn two_clusters() {
        let d = line(&[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]);
        assert_eq!(k_medoids(&d, 2), vec![1, 4]);
    }

    #[test]
    fn k_equals_n() {
        let d = line(&[0.0, 5.0, 9.0]);
        assert_eq!(k_medoids(&d, 3), vec![0, 1, 2]);
    }

    #[test]
    fn single_medoid_is_min_total() {
        let d = line(&[0.0, 1.0, 2.0, 3.0, 100.0]);
        assert_eq!(k_medoids(&d, 1), vec![2]);
    }
}
