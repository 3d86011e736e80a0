use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use super::agg::{AggFn, AggState};
use super::predicate::{CompiledPredicate, Predicate};
use super::table::{ColumnKind, ColumnTable};
use super::StoreError;
use crate::value::Value;

/// Bucketing applied to a numeric x attribute.
#[derive(Clone, Copy, Debug, Default)]
pub enum Binning {
    #[default]
    None,
    Width(f64),
    Count(usize),
}

impl PartialEq for Binning {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Binning::None, Binning::None) => true,
            (Binning::Width(a), Binning::Width(b)) => a.to_bits() == b.to_bits(),
            (Binning::Count(a), Binning::Count(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Binning {}

impl Hash for Binning {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Binning::None => 0u8.hash(state),
            Binning::Width(w) => {
                1u8.hash(state);
                w.to_bits().hash(state);
            }
            Binning::Count(n) => {
                2u8.hash(state);
                n.hash(state);
            }
        }
    }
}

impl Binning {
    /// Suffix distinguishing binned uses of the same attribute.
    pub fn tag(&self) -> String {
        match self {
            Binning::None => String::new(),
            Binning::Width(w) => format!("#bin({w})"),
            Binning::Count(n) => format!("#nbin({n})"),
        }
    }
}

/// A single group-by request against the backend.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AggregateRequest {
    pub x_attr: String,
    pub y_terms: Vec<(String, AggFn)>,
    pub group_dims: Vec<String>,
    pub filter: Predicate,
    pub x_binning: Binning,
}

impl AggregateRequest {
    pub fn new(x_attr: &str, y_terms: Vec<(&str, AggFn)>) -> Self {
        AggregateRequest {
            x_attr: x_attr.to_string(),
            y_terms: y_terms
                .into_iter()
                .map(|(a, f)| (a.to_string(), f))
                .collect(),
            group_dims: Vec::new(),
            filter: Predicate::always(),
            x_binning: Binning::None,
        }
    }

    pub fn group_by(mut self, dims: &[&str]) -> Self {
        self.group_dims = dims.iter().map(|d| d.to_string()).collect();
        self
    }

    pub fn filter(mut self, p: Predicate) -> Self {
        self.filter = p;
        self
    }

    pub fn binning(mut self, b: Binning) -> Self {
        self.x_binning = b;
        self
    }

    /// Key identifying the x attribute together with its binning.
    pub fn x_key(&self) -> String {
        format!("{}{}", self.x_attr, self.x_binning.tag())
    }

    pub fn validate(&self, table: &ColumnTable) -> Result<(), StoreError> {
        let xcols = table.resolve(&self.x_attr)?;
        if self.group_dims.contains(&self.x_attr) {
            return Err(StoreError::InvalidRequest(format!(
                "x attribute `{}` is also a group dimension",
                self.x_attr
            )));
        }
        if self.y_terms.is_empty() {
            return Err(StoreError::InvalidRequest("no y terms".into()));
        }
        for (y, f) in &self.y_terms {
            let c = table.column(y)?;
            if *f != AggFn::Count && !c.kind.is_numeric() {
                return Err(StoreError::InvalidRequest(format!(
                    "cannot aggregate categorical `{y}` with {f}"
                )));
            }
        }
        for d in &self.group_dims {
            table.resolve(d)?;
        }
        for a in self.filter.attrs() {
            table.resolve(a)?;
        }
        match self.x_binning {
            Binning::None => {}
            Binning::Width(w) if !(w > 0.0 && w.is_finite()) => {
                return Err(StoreError::InvalidRequest(format!(
                    "bin width {w} must be positive"
                )))
            }
            Binning::Count(0) => {
                return Err(StoreError::InvalidRequest(
                    "bin count must be positive".into(),
                ))
            }
            _ => {
                if xcols.len() != 1 || !table.columns()[xcols[0]].kind.is_numeric() {
                    return Err(StoreError::BinningOnCategorical(self.x_attr.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates the (possibly binned) x key of a row.
#[derive(Clone, Debug)]
pub(crate) struct XKey {
    cols: Vec<usize>,
    bin: BinSpec,
}

#[derive(Clone, Copy, Debug)]
enum BinSpec {
    None,
    Width(f64),
    Count { lo: f64, width: f64, n: usize },
}

impl XKey {
    pub(crate) fn new(
        table: &ColumnTable,
        attr: &str,
        binning: Binning,
    ) -> Result<XKey, StoreError> {
        let cols = table.resolve(attr)?;
        let bin = match binning {
            Binning::None => BinSpec::None,
            Binning::Width(w) => BinSpec::Width(w),
            Binning::Count(n) => {
                let c = &table.columns()[cols[0]];
                debug_assert!(c.kind.is_numeric() || c.kind == ColumnKind::Measure);
                let (lo, hi) = c.range().unwrap_or((0.0, 0.0));
                BinSpec::Count {
                    lo,
                    width: (hi - lo) / n as f64,
                    n,
                }
            }
        };
        Ok(XKey { cols, bin })
    }

    pub(crate) fn eval(&self, table: &ColumnTable, row: usize) -> Value {
        let v = table.value_at(&self.cols, row);
        match (self.bin, v.as_f64()) {
            (BinSpec::None, _) | (_, None) => v,
            (BinSpec::Width(w), Some(x)) => Value::Num((x / w).floor() * w),
            (BinSpec::Count { lo, width, n }, Some(x)) => {
                if width <= 0.0 {
                    return Value::Num(lo);
                }
                let k = (((x - lo) / width).floor() as usize).min(n - 1);
                Value::Num(lo + k as f64 * width)
            }
        }
    }
}

/// Aggregated result of one request: group key → x → state per y term.
#[derive(Clone, Debug)]
pub struct GroupedResult {
    pub group_dims: Vec<String>,
    pub y_terms: Vec<(String, AggFn)>,
    groups: BTreeMap<Vec<Value>, BTreeMap<Value, Vec<AggState>>>,
}

/// One finished series: (x, one value per y term).
pub type Series = Vec<(Value, Vec<f64>)>;

impl GroupedResult {
    fn empty(req: &AggregateRequest) -> Self {
        GroupedResult {
            group_dims: req.group_dims.clone(),
            y_terms: req.y_terms.clone(),
            groups: BTreeMap::new(),
        }
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Vec<Value>> {
        self.groups.keys()
    }

    pub fn series(&self, key: &[Value]) -> Option<Series> {
        self.groups.get(key).map(|s| self.finish(s))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Value>, Series)> + '_ {
        self.groups.iter().map(move |(k, s)| (k, self.finish(s)))
    }

    fn finish(&self, s: &BTreeMap<Value, Vec<AggState>>) -> Series {
        s.iter()
            .map(|(x, st)| {
                (
                    x.clone(),
                    st.iter()
                        .zip(&self.y_terms)
                        .map(|(st, (_, f))| st.finish(*f))
                        .collect(),
                )
            })
            .collect()
    }

    /// Merges every group whose key satisfies `keep` into a single series of states.
    pub fn rollup(&self, keep: impl Fn(&[Value]) -> bool) -> BTreeMap<Value, Vec<AggState>> {
        let mut out: BTreeMap<Value, Vec<AggState>> = BTreeMap::new();
        for (k, s) in &self.groups {
            if !keep(k) {
                continue;
            }
            for (x, st) in s {
                match out.get_mut(x) {
                    Some(acc) => acc.iter_mut().zip(st).for_each(|(a, b)| a.merge(b)),
                    None => {
                        out.insert(x.clone(), st.clone());
                    }
                }
            }
        }
        out
    }

    /// Index of a group dimension.
    pub fn dim_index(&self, dim: &str) -> Option<usize> {
        self.group_dims.iter().position(|d| d == dim)
    }
}

impl PartialEq for GroupedResult {
    fn eq(&self, other: &Self) -> bool {
        if self.group_dims != other.group_dims || self.y_terms != other.y_terms {
            return false;
        }
        type Bits = Vec<(Vec<Value>, Vec<(Value, Vec<u64>)>)>;
        let bits = |r: &GroupedResult| -> Bits {
            r.iter()
                .map(|(k, s)| {
                    (
                        k.clone(),
                        s.into_iter()
                            .map(|(x, ys)| (x, ys.iter().map(|y| y.to_bits()).collect()))
                            .collect(),
                    )
                })
                .collect()
        };
        bits(self) == bits(other)
    }
}

/// Executes one request with a full scan.
pub fn execute(table: &ColumnTable, req: &AggregateRequest) -> Result<GroupedResult, StoreError> {
    req.validate(table)?;
    let pred = req.filter.compile(table)?;
    let x = XKey::new(table, &req.x_attr, req.x_binning)?;
    let dims: Vec<Vec<usize>> = req
        .group_dims
        .iter()
        .map(|d| table.resolve(d))
        .collect::<Result<_, _>>()?;
    let ys = y_columns(table, &req.y_terms)?;
    let mut out = GroupedResult::empty(req);
    for row in 0..table.rows() {
        if !pred.eval(table, row) {
            continue;
        }
        let key: Vec<Value> = dims.iter().map(|c| table.value_at(c, row)).collect();
        let xv = x.eval(table, row);
        let states = out
            .groups
            .entry(key)
            .or_default()
            .entry(xv)
            .or_insert_with(|| vec![AggState::default(); ys.len()]);
        for (st, &c) in states.iter_mut().zip(&ys) {
            st.push(measure_at(table, c, row));
        }
    }
    Ok(out)
}

fn y_columns(table: &ColumnTable, terms: &[(String, AggFn)]) -> Result<Vec<usize>, StoreError> {
    terms
        .iter()
        .map(|(y, _)| {
            table
                .column_index(y)
                .ok_or_else(|| StoreError::UnknownAttribute(y.clone()))
        })
        .collect()
}

fn measure_at(table: &ColumnTable, col: usize, row: usize) -> f64 {
    table.columns()[col].values[row].as_f64().unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Slot {
    X(String, Binning),
    Dim(String),
}

/// Executes several requests with one scan grouped on the union of their
/// group attributes plus one membership flag per request, then re-aggregates
/// each request's groups from the shared states.
pub fn execute_combined(
    table: &ColumnTable,
    reqs: &[AggregateRequest],
) -> Result<Vec<GroupedResult>, StoreError> {
    if reqs.len() == 1 {
        return Ok(vec![execute(table, &reqs[0])?]);
    }
    for r in reqs {
        r.validate(table)?;
    }
    let mut slots: Vec<Slot> = Vec::new();
    let mut slot_of = |s: Slot| -> usize {
        match slots.iter().position(|t| *t == s) {
            Some(i) => i,
            None => {
                slots.push(s);
                slots.len() - 1
            }
        }
    };
    let mut req_x = Vec::new();
    let mut req_dims = Vec::new();
    for r in reqs {
        req_x.push(slot_of(Slot::X(r.x_attr.clone(), r.x_binning)));
        req_dims.push(
            r.group_dims
                .iter()
                .map(|d| slot_of(Slot::Dim(d.clone())))
                .collect::<Vec<_>>(),
        );
    }
    let mut y_attrs: Vec<String> = Vec::new();
    let req_ys: Vec<Vec<usize>> = reqs
        .iter()
        .map(|r| {
            r.y_terms
                .iter()
                .map(|(y, _)| match y_attrs.iter().position(|a| a == y) {
                    Some(i) => i,
                    None => {
                        y_attrs.push(y.clone());
                        y_attrs.len() - 1
                    }
                })
                .collect()
        })
        .collect();

    enum Eval {
        X(XKey),
        Dim(Vec<usize>),
    }
    let evals: Vec<Eval> = slots
        .iter()
        .map(|s| match s {
            Slot::X(a, b) => XKey::new(table, a, *b).map(Eval::X),
            Slot::Dim(d) => table.resolve(d).map(Eval::Dim),
        })
        .collect::<Result<_, _>>()?;
    let ycols: Vec<usize> = y_attrs
        .iter()
        .map(|y| table.column_index(y).expect("validated"))
        .collect();
    let preds: Vec<CompiledPredicate> = reqs
        .iter()
        .map(|r| r.filter.compile(table))
        .collect::<Result<_, _>>()?;

    let words = reqs.len().div_ceil(64);
    let mut shared: HashMap<(Vec<Value>, Vec<u64>), Vec<AggState>> = HashMap::new();
    for row in 0..table.rows() {
        let mut flags = vec![0u64; words];
        let mut any = false;
        for (i, p) in preds.iter().enumerate() {
            if p.eval(table, row) {
                flags[i / 64] |= 1 << (i % 64);
                any = true;
            }
        }
        if !any {
            continue;
        }
        let key: Vec<Value> = evals
            .iter()
            .map(|e| match e {
                Eval::X(x) => x.eval(table, row),
                Eval::Dim(c) => table.value_at(c, row),
            })
            .collect();
        let states = shared
            .entry((key, flags))
            .or_insert_with(|| vec![AggState::default(); ycols.len()]);
        for (st, &c) in states.iter_mut().zip(&ycols) {
            st.push(measure_at(table, c, row));
        }
    }

    let mut out: Vec<GroupedResult> = reqs.iter().map(GroupedResult::empty).collect();
    for ((key, flags), states) in &shared {
        for (i, res) in out.iter_mut().enumerate() {
            if flags[i / 64] & (1 << (i % 64)) == 0 {
                continue;
            }
            let gk: Vec<Value> = req_dims[i].iter().map(|&s| key[s].clone()).collect();
            let xv = key[req_x[i]].clone();
            let entry = res.groups.entry(gk).or_default();
            match entry.get_mut(&xv) {
                Some(acc) => {
                    for (a, &ys) in acc.iter_mut().zip(&req_ys[i]) {
                        a.merge(&states[ys]);
                    }
                }
                None => {
                    entry.insert(xv, req_ys[i].iter().map(|&ys| states[ys].clone()).collect());
                }
            }
        }
    }
    Ok(out)
}

/// Distinct keys over the union of the requests' group dimensions among rows
/// matching any request predicate.
pub fn combined_group_count(
    table: &ColumnTable,
    reqs: &[AggregateRequest],
) -> Result<usize, StoreError> {
    let mut dims: Vec<&str> = Vec::new();
    for r in reqs {
        for d in &r.group_dims {
            if !dims.contains(&d.as_str()) {
                dims.push(d);
            }
        }
    }
    let cols: Vec<Vec<usize>> = dims
        .iter()
        .map(|d| table.resolve(d))
        .collect::<Result<_, _>>()?;
    let preds: Vec<CompiledPredicate> = reqs
        .iter()
        .map(|r| r.filter.compile(table))
        .collect::<Result<_, _>>()?;
    let keys: std::collections::HashSet<Vec<Value>> = (0..table.rows())
        .filter(|&row| preds.iter().any(|p| p.eval(table, row)))
        .map(|row| cols.iter().map(|c| table.value_at(c, row)).collect())
        .collect();
    Ok(keys.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{sample_sales, Predicate};

    #[test]
    fn sum_by_product_in_us() {
        let t = sample_sales();
        let req = AggregateRequest::new("year", vec![("sales", AggFn::Sum)])
            .group_by(&["product"])
            .filter(Predicate::eq("location", "US"));
        let r = execute(&t, &req).unwrap();
        assert_eq!(r.group_count(), 2);
        assert_eq!(
            r.series(&[Value::str("chair")]).unwrap(),
            vec![(Value::Num(2016.0), vec![1412000.0])]
        );
        assert_eq!(
            r.series(&[Value::str("table")]).unwrap(),
            vec![(Value::Num(2016.0), vec![258000.0])]
        );
    }

    #[test]
    fn absent_product_is_empty() {
        let t = sample_sales();
        let req = AggregateRequest::new("year", vec![("sales", AggFn::Sum)])
            .group_by(&["product"])
            .filter(Predicate::eq("product", "stapler"));
        assert_eq!(execute(&t, &req).unwrap().group_count(), 0);
    }

    #[test]
    fn binning_on_categorical_rejected() {
        let t = sample_sales();
        let req = AggregateRequest::new("product", vec![("sales", AggFn::Sum)])
            .binning(Binning::Count(3));
        assert!(matches!(
            execute(&t, &req),
            Err(StoreError::BinningOnCategorical(_))
        ));
    }

    #[test]
    fn x_in_group_dims_rejected() {
        let t = sample_sales();
        let req = AggregateRequest::new("year", vec![("sales", AggFn::Sum)]).group_by(&["year"]);
        assert!(matches!(
            execute(&t, &req),
            Err(StoreError::InvalidRequest(_))
        ));
    }

    #[test]
    fn count_bins_put_max_in_last_bucket() {
        let t = sample_sales();
        let req = AggregateRequest::new("sales", vec![("profit", AggFn::Count)])
            .binning(Binning::Count(2));
        let r = execute(&t, &req).unwrap();
        let s = r.series(&[]).unwrap();
        let lo = 130000.0;
        let w = (789000.0 - lo) / 2.0;
        assert_eq!(
            s,
            vec![(Value::Num(lo), vec![2.0]), (Value::Num(lo + w), vec![2.0])]
        );
    }

    #[test]
    fn width_bins_use_left_edges() {
        let t = sample_sales();
        let req = AggregateRequest::new("month", vec![("sales", AggFn::Count)])
            .binning(Binning::Width(2.0));
        let s = execute(&t, &req).unwrap().series(&[]).unwrap();
        assert_eq!(
            s,
            vec![(Value::Num(2.0), vec![1.0]), (Value::Num(4.0), vec![3.0])]
        );
    }

    #[test]
    fn combined_pair_matches_separate() {
        let t = sample_sales();
        let a = AggregateRequest::new("year", vec![("sales", AggFn::Sum)])
            .group_by(&["product"])
            .filter(Predicate::eq("location", "US"));
        let b = AggregateRequest::new("year", vec![("sales", AggFn::Sum)])
            .group_by(&["product"])
            .filter(Predicate::eq("product", "chair"));
        let c = execute_combined(&t, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(c[0], execute(&t, &a).unwrap());
        assert_eq!(c[1], execute(&t, &b).unwrap());
        assert_eq!(
            c[1].series(&[Value::str("chair")]).unwrap()[0].1,
            vec![1542000.0]
        );
    }
}
