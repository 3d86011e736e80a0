use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::viz::UnitViz;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrimitiveError {
    #[error("series has {0} points, at least 2 are needed")]
    SeriesTooShort(usize),
    #[error("series share {0} x values, at least 2 are needed")]
    InsufficientOverlap(usize),
    #[error("{0}")]
    Plug(String),
}

pub type TrendFn = Arc<dyn Fn(&UnitViz) -> Result<f64, PrimitiveError> + Send + Sync>;
pub type DistanceFn = Arc<dyn Fn(&UnitViz, &UnitViz) -> Result<f64, PrimitiveError> + Send + Sync>;
pub type PlugFn = Arc<dyn Fn(&[&UnitViz]) -> Result<f64, PrimitiveError> + Send + Sync>;

/// Least-squares slope of y against x position 0..n-1.
pub fn t_slope(v: &UnitViz) -> Result<f64, PrimitiveError> {
    let n = v.points.len();
    if n < 2 {
        return Err(PrimitiveError::SeriesTooShort(n));
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = v.points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, p) in v.points.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (p.1 - ym);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

/// Pairs of y values at x keys present in both series.
pub fn join_on_x(a: &UnitViz, b: &UnitViz) -> Vec<(f64, f64)> {
    joined(a, b).collect()
}

fn joined<'a>(a: &'a UnitViz, b: &'a UnitViz) -> impl Iterator<Item = (f64, f64)> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        while i < a.points.len() && j < b.points.len() {
            match a.points[i].0.cmp(&b.points[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let out = (a.points[i].1, b.points[j].1);
                    i += 1;
                    j += 1;
                    return Some(out);
                }
            }
        }
        None
    })
}

/// Euclidean distance over the x values both series share.
pub fn d_euclidean(a: &UnitViz, b: &UnitViz) -> Result<f64, PrimitiveError> {
    let (mut n, mut sq) = (0, 0.0);
    for (x, y) in joined(a, b) {
        n += 1;
        sq += (x - y) * (x - y);
    }
    if n < 2 {
        return Err(PrimitiveError::InsufficientOverlap(n));
    }
    Ok(sq.sqrt())
}

/// Rescales y values to zero mean and unit variance.
pub fn z_normalize(v: &UnitViz) -> UnitViz {
    let n = v.points.len() as f64;
    if n == 0.0 {
        return v.clone();
    }
    let m = v.points.iter().map(|p| p.1).sum::<f64>() / n;
    let sd = (v.points.iter().map(|p| (p.1 - m) * (p.1 - m)).sum::<f64>() / n).sqrt();
    let points = v
        .points
        .iter()
        .map(|(x, y)| (x.clone(), if sd > 0.0 { (y - m) / sd } else { 0.0 }))
        .collect();
    UnitViz {
        spec: v.spec.clone(),
        points,
    }
}

/// Named trend, distance and plug-in primitives, with the active T and D selections.
#[derive(Clone)]
pub struct Registry {
    trends: BTreeMap<String, TrendFn>,
    distances: BTreeMap<String, DistanceFn>,
    plugs: BTreeMap<String, PlugFn>,
    trend: String,
    distance: String,
    znormalize: bool,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("trend", &self.trend)
            .field("distance", &self.distance)
            .field("znormalize", &self.znormalize)
            .field("plugs", &self.plugs.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry {
            trends: BTreeMap::new(),
            distances: BTreeMap::new(),
            plugs: BTreeMap::new(),
            trend: "slope".into(),
            distance: "euclidean".into(),
            znormalize: false,
        };
        r.register_trend("slope", Arc::new(t_slope));
        r.register_distance("euclidean", Arc::new(d_euclidean));
        r
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown {kind} primitive `{name}` (available: {available})")]
pub struct UnknownPrimitive {
    pub kind: &'static str,
    pub name: String,
    pub available: String,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_trend(&mut self, name: &str, f: TrendFn) {
        self.trends.insert(name.to_string(), f);
    }

    pub fn register_distance(&mut self, name: &str, f: DistanceFn) {
        self.distances.insert(name.to_string(), f);
    }

    pub fn register_plug(&mut self, name: &str, f: PlugFn) {
        self.plugs.insert(name.to_string(), f);
    }

    pub fn select_trend(&mut self, name: &str) -> Result<(), UnknownPrimitive> {
        if !self.trends.contains_key(name) {
            return Err(UnknownPrimitive {
                kind: "trend",
                name: name.into(),
                available: self.trends.keys().cloned().collect::<Vec<_>>().join(", "),
            });
        }
        self.trend = name.to_string();
        Ok(())
    }

    pub fn select_distance(&mut self, name: &str) -> Result<(), UnknownPrimitive> {
        if !self.distances.contains_key(name) {
            return Err(UnknownPrimitive {
                kind: "distance",
                name: name.into(),
                available: self
                    .distances
                    .keys()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", "),
            });
        }
        self.distance = name.to_string();
        Ok(())
    }

    pub fn set_znormalize(&mut self, on: bool) {
        self.znormalize = on;
    }

    pub fn plug_names(&self) -> HashSet<String> {
        self.plugs.keys().cloned().collect()
    }

    pub fn trend(&self, v: &UnitViz) -> Result<f64, PrimitiveError> {
        (self.trends[&self.trend])(v)
    }

    pub fn distance(&self, a: &UnitViz, b: &UnitViz) -> Result<f64, PrimitiveError> {
        let f = &self.distances[&self.distance];
        if self.znormalize {
            f(&z_normalize(a), &z_normalize(b))
        } else {
            f(a, b)
        }
    }

    pub fn plug(&self, name: &str) -> Option<&PlugFn> {
        self.plugs.get(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_slope(ys: &[f64]) -> f64 {
        // slope = (n Σxy - Σx Σy) / (n Σx² - (Σx)²)
        let n = ys.len() as f64;
        let sx: f64 = (0..ys.len()).map(|i| i as f64).sum();
        let sy: f64 = ys.iter().sum();
        let sxy: f64 = ys.iter().enumerate().map(|(i, y)| i as f64 * y).sum();
        let sxx: f64 = (0..ys.len()).map(|i| (i * i) as f64).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn slope_linear() {
        assert!(
            (t_slope(&UnitViz::from_ys("a", &[0.0, 2.0, 4.0, 6.0])).unwrap() - 2.0).abs() < 1e-9
        );
        assert_eq!(
            t_slope(&UnitViz::from_ys("a", &[3.0, 3.0, 3.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn slope_matches_closed_form() {
        let ys = [1.0, 3.0, 2.0, 4.0];
        let s = t_slope(&UnitViz::from_ys("a", &ys)).unwrap();
        assert!((s - closed_form_slope(&ys)).abs() < 1e-12);
        assert!((s - 0.8).abs() < 1e-12);
    }

    #[test]
    fn slope_too_short() {
        assert_eq!(
            t_slope(&UnitViz::from_ys("a", &[1.0])),
            Err(PrimitiveError::SeriesTooShort(1))
        );
    }

    #[test]
    fn euclidean_cases() {
        let a = UnitViz::from_ys("a", &[0.0, 0.0]);
        let b = UnitViz::from_ys("b", &[3.0, 4.0]);
        assert_eq!(d_euclidean(&a, &b).unwrap(), 5.0);
        assert_eq!(d_euclidean(&b, &a).unwrap(), 5.0);
        assert_eq!(d_euclidean(&a, &a).unwrap(), 0.0);
        let c = UnitViz::from_ys("c", &[1.0]);
        assert_eq!(
            d_euclidean(&a, &c),
            Err(PrimitiveError::InsufficientOverlap(1))
        );
    }

    #[test]
    fn registry_selection() {
        let mut r = Registry::new();
        assert!(r.select_distance("emd").is_err());
        r.register_distance(
            "l1",
            Arc::new(|a, b| Ok(join_on_x(a, b).iter().map(|(x, y)| (x - y).abs()).sum())),
        );
        r.select_distance("l1").unwrap();
        let a = UnitViz::from_ys("a", &[0.0, 0.0]);
        let b = UnitViz::from_ys("b", &[3.0, 4.0]);
        assert_eq!(r.distance(&a, &b).unwrap(), 7.0);
    }

    #[test]
    fn znormalized_distance_ignores_scale() {
        let mut r = Registry::new();
        r.set_znormalize(true);
        let a = UnitViz::from_ys("a", &[1.0, 2.0, 3.0]);
        let b = UnitViz::from_ys("b", &[10.0, 20.0, 30.0]);
        assert!(r.distance(&a, &b).unwrap() < 1e-12);
    }
}
