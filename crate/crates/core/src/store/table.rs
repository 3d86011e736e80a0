use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use super::StoreError;
use crate::value::Value;

/// Separator used for composite (crossed) attribute names and keys.
pub const CROSS: char = '×';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DimensionKind {
    Categorical,
    Ordinal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Dimension(DimensionKind),
    Measure,
}

impl ColumnKind {
    pub fn parse(s: &str) -> Option<ColumnKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "categorical" | "dimension" | "cat" => {
                Some(ColumnKind::Dimension(DimensionKind::Categorical))
            }
            "ordinal" | "ord" => Some(ColumnKind::Dimension(DimensionKind::Ordinal)),
            "measure" | "numeric" | "num" => Some(ColumnKind::Measure),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnKind::Dimension(DimensionKind::Categorical) => "categorical",
            ColumnKind::Dimension(DimensionKind::Ordinal) => "ordinal",
            ColumnKind::Measure => "measure",
        }
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, ColumnKind::Dimension(DimensionKind::Categorical))
    }
}

#[derive(Debug)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Value>,
    distinct: OnceLock<Vec<Value>>,
    range: OnceLock<Option<(f64, f64)>>,
}

impl Clone for Column {
    fn clone(&self) -> Self {
        Column::new(self.name.clone(), self.kind, self.values.clone())
    }
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind, values: Vec<Value>) -> Self {
        Column {
            name: name.into(),
            kind,
            values,
            distinct: OnceLock::new(),
            range: OnceLock::new(),
        }
    }

    pub fn numeric(
        name: impl Into<String>,
        kind: ColumnKind,
        values: impl IntoIterator<Item = f64>,
    ) -> Self {
        Column::new(name, kind, values.into_iter().map(Value::Num).collect())
    }

    pub fn categorical<S: AsRef<str>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        Column::new(
            name,
            ColumnKind::Dimension(DimensionKind::Categorical),
            values.into_iter().map(|s| Value::str(s.as_ref())).collect(),
        )
    }

    /// Sorted distinct values.
    pub fn distinct(&self) -> &[Value] {
        self.distinct.get_or_init(|| {
            let set: BTreeSet<&Value> = self.values.iter().collect();
            set.into_iter().cloned().collect()
        })
    }

    /// (min, max) of a numeric column, `None` when empty.
    pub fn range(&self) -> Option<(f64, f64)> {
        *self.range.get_or_init(|| {
            let mut it = self.values.iter().filter_map(Value::as_f64);
            let first = it.next()?;
            Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
        })
    }
}

/// Schema: ordered column declarations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schema {
    pub columns: Vec<(String, ColumnKind)>,
}

impl Schema {
    pub fn new(columns: Vec<(String, ColumnKind)>) -> Self {
        Schema { columns }
    }

    /// Parses `name:kind` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Schema, StoreError> {
        let mut columns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, kind) = line.split_once(':').ok_or_else(|| {
                StoreError::BadSchema(format!("line {}: expected name:kind", i + 1))
            })?;
            let kind = ColumnKind::parse(kind).ok_or_else(|| {
                StoreError::BadSchema(format!("line {}: unknown kind `{}`", i + 1, kind.trim()))
            })?;
            columns.push((name.trim().to_string(), kind));
        }
        Ok(Schema { columns })
    }

    /// `name:kind` lines, the inverse of [`Schema::parse`].
    pub fn to_text(&self) -> String {
        self.columns
            .iter()
            .map(|(n, k)| format!("{n}:{}\n", k.name()))
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Schema, StoreError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| StoreError::Io(e.to_string()))?;
        Schema::parse(&text)
    }
}

/// Immutable columnar relation.
#[derive(Clone, Debug)]
pub struct ColumnTable {
    name: String,
    columns: Vec<Column>,
    index: HashMap<String, usize>,
    rows: usize,
}

impl ColumnTable {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self, StoreError> {
        let rows = columns.first().map_or(0, |c| c.values.len());
        let mut index = HashMap::new();
        for (i, c) in columns.iter().enumerate() {
            if index.insert(c.name.clone(), i).is_some() {
                return Err(StoreError::DuplicateColumn(c.name.clone()));
            }
            if c.values.len() != rows {
                return Err(StoreError::LengthMismatch(c.name.clone()));
            }
            if c.name.contains(CROSS) {
                return Err(StoreError::BadSchema(format!(
                    "column name `{}` contains `{CROSS}`",
                    c.name
                )));
            }
            for (r, v) in c.values.iter().enumerate() {
                let ok = match (c.kind, v) {
                    (ColumnKind::Measure, Value::Num(n)) => n.is_finite(),
                    (ColumnKind::Dimension(DimensionKind::Ordinal), Value::Num(n)) => n.is_finite(),
                    (ColumnKind::Dimension(DimensionKind::Categorical), Value::Str(_)) => true,
                    _ => false,
                };
                if !ok {
                    return Err(StoreError::Parse {
                        row: r,
                        column: c.name.clone(),
                        value: v.to_string(),
                    });
                }
            }
        }
        Ok(ColumnTable {
            name: name.into(),
            columns,
            index,
            rows,
        })
    }

    /// Parses delimited text (comma or tab, detected from the header line).
    pub fn from_text(name: &str, text: &str, schema: &Schema) -> Result<Self, StoreError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| StoreError::SchemaMismatch("missing header".into()))?;
        let delim = if header.contains('\t') { '\t' } else { ',' };
        let names: Vec<String> = header
            .split(delim)
            .map(|s| unquote(s).to_string())
            .collect();
        let declared: Vec<&str> = schema.columns.iter().map(|(n, _)| n.as_str()).collect();
        if names.iter().map(String::as_str).collect::<Vec<_>>() != declared {
            return Err(StoreError::SchemaMismatch(format!(
                "header [{}] does not match schema [{}]",
                names.join(", "),
                declared.join(", ")
            )));
        }
        let mut data: Vec<Vec<Value>> = vec![Vec::new(); names.len()];
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(delim).map(unquote).collect();
            if fields.len() != names.len() {
                return Err(StoreError::Parse {
                    row,
                    column: String::new(),
                    value: format!("expected {} fields, found {}", names.len(), fields.len()),
                });
            }
            for (c, field) in fields.into_iter().enumerate() {
                let (cname, kind) = &schema.columns[c];
                let v = parse_field(field, *kind).ok_or_else(|| StoreError::Parse {
                    row,
                    column: cname.clone(),
                    value: field.to_string(),
                })?;
                data[c].push(v);
            }
        }
        let columns = schema
            .columns
            .iter()
            .zip(data)
            .map(|((n, k), vals)| Column::new(n.clone(), *k, vals))
            .collect();
        ColumnTable::new(name, columns)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> Schema {
        Schema::new(
            self.columns
                .iter()
                .map(|c| (c.name.clone(), c.kind))
                .collect(),
        )
    }

    /// Comma-separated text with a header row, readable by [`ColumnTable::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = self
            .columns
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join(",");
        out.push('\n');
        for r in 0..self.rows {
            let fields: Vec<String> = self
                .columns
                .iter()
                .map(|c| c.values[r].to_string())
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column, StoreError> {
        self.index
            .get(name)
            .map(|&i| &self.columns[i])
            .ok_or_else(|| StoreError::UnknownAttribute(name.to_string()))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.resolve(name).is_ok()
    }

    /// Resolves a plain or composite (`a×b`) attribute into column indices.
    pub fn resolve(&self, name: &str) -> Result<Vec<usize>, StoreError> {
        if let Some(&i) = self.index.get(name) {
            return Ok(vec![i]);
        }
        if name.contains(CROSS) {
            return name
                .split(CROSS)
                .map(|p| {
                    self.index
                        .get(p)
                        .copied()
                        .ok_or_else(|| StoreError::UnknownAttribute(name.to_string()))
                })
                .collect();
        }
        Err(StoreError::UnknownAttribute(name.to_string()))
    }

    /// Value of a plain or composite attribute at `row`.
    pub fn value_at(&self, cols: &[usize], row: usize) -> Value {
        if let [c] = cols {
            return self.columns[*c].values[row].clone();
        }
        let parts: Vec<String> = cols
            .iter()
            .map(|&c| self.columns[c].values[row].to_string())
            .collect();
        Value::str(&parts.join(&CROSS.to_string()))
    }

    pub fn dimensions(&self) -> impl Iterator<Item = &Column> {
        self.columns
            .iter()
            .filter(|c| matches!(c.kind, ColumnKind::Dimension(_)))
    }

    pub fn measures(&self) -> impl Iterator<Item = &Column> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Measure)
    }

    /// Coerces a literal to the attribute's value type.
    pub fn coerce(&self, attr: &str, v: &Value) -> Value {
        match self.column(attr) {
            Ok(c) if c.kind.is_numeric() => match v {
                Value::Str(s) => s
                    .trim()
                    .parse::<f64>()
                    .map(Value::Num)
                    .unwrap_or_else(|_| v.clone()),
                Value::Num(_) => v.clone(),
            },
            Ok(_) => match v {
                Value::Num(_) => Value::str(&v.to_string()),
                Value::Str(_) => v.clone(),
            },
            Err(_) => v.clone(),
        }
    }

    /// Distinct values of a plain or composite attribute, sorted.
    pub fn distinct(&self, attr: &str) -> Result<Vec<Value>, StoreError> {
        let cols = self.resolve(attr)?;
        if let [c] = cols.as_slice() {
            return Ok(self.columns[*c].distinct().to_vec());
        }
        let set: BTreeSet<Value> = (0..self.rows).map(|r| self.value_at(&cols, r)).collect();
        Ok(set.into_iter().collect())
    }

    /// Number of distinct value combinations of `dims` present in the data; 1 for no dims.
    pub fn groupby_cardinality(&self, dims: &[&str]) -> Result<usize, StoreError> {
        let cols: Vec<Vec<usize>> = dims
            .iter()
            .map(|d| self.resolve(d))
            .collect::<Result<_, _>>()?;
        if cols.is_empty() {
            return Ok(1);
        }
        if let [c] = cols.as_slice() {
            if let [c] = c.as_slice() {
                return Ok(self.columns[*c].distinct().len());
            }
        }
        let set: HashSet<Vec<Value>> = (0..self.rows)
            .map(|r| cols.iter().map(|c| self.value_at(c, r)).collect())
            .collect();
        Ok(set.len())
    }
}

/// Column loading from a file path.
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<ColumnTable, StoreError> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    ColumnTable::from_text(name, &text, schema)
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(s)
}

fn parse_field(field: &str, kind: ColumnKind) -> Option<Value> {
    match kind {
        ColumnKind::Dimension(DimensionKind::Categorical) => {
            (!field.is_empty() && !field.eq_ignore_ascii_case("null")).then(|| Value::str(field))
        }
        _ => field
            .parse::<f64>()
            .ok()
            .filter(|n| n.is_finite())
            .map(Value::Num),
    }
}

/// Attributes eligible for the x and y axes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeCatalog {
    pub attributes: Vec<String>,
    pub x_eligible: Vec<String>,
    pub y_eligible: Vec<String>,
}

impl AttributeCatalog {
    /// Default: every column may be an x axis, measures are the y axes.
    pub fn from_table(t: &ColumnTable) -> Self {
        AttributeCatalog {
            attributes: t.columns().iter().map(|c| c.name.clone()).collect(),
            x_eligible: t.columns().iter().map(|c| c.name.clone()).collect(),
            y_eligible: t.measures().map(|c| c.name.clone()).collect(),
        }
    }

    pub fn has(&self, attr: &str) -> bool {
        if attr.contains(CROSS) {
            return attr
                .split(CROSS)
                .all(|p| self.attributes.iter().any(|a| a == p));
        }
        self.attributes.iter().any(|a| a == attr)
    }
}

/// Distinct-count statistics used by the cost model.
pub trait Cardinalities {
    fn distinct_count(&self, attr: &str) -> u64;
}

impl Cardinalities for ColumnTable {
    fn distinct_count(&self, attr: &str) -> u64 {
        match self.resolve(attr) {
            Ok(cols) if cols.len() == 1 => self.columns[cols[0]].distinct().len() as u64,
            Ok(_) => self.distinct(attr).map_or(1, |d| d.len() as u64),
            Err(_) => 1,
        }
    }
}

impl Cardinalities for HashMap<String, u64> {
    fn distinct_count(&self, attr: &str) -> u64 {
        self.get(attr).copied().unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "year,month,product,location,sales,profit\n\
        2016,4,chair,US,623000,314000\n\
        2016,3,chair,US,789000,410000\n\
        2016,4,table,US,258000,169000\n\
        2016,4,chair,UK,130000,63000\n";

    fn schema() -> Schema {
        Schema::parse("year:ordinal\nmonth:ordinal\nproduct:categorical\nlocation:categorical\nsales:measure\nprofit:measure")
            .unwrap()
    }

    #[test]
    fn loads_sample() {
        let t = ColumnTable::from_text("sales", SAMPLE, &schema()).unwrap();
        assert_eq!(t.columns().len(), 6);
        assert_eq!(t.rows(), 4);
        assert_eq!(t.column("product").unwrap().values[2], Value::str("table"));
    }

    #[test]
    fn empty_data_section() {
        let t =
            ColumnTable::from_text("s", "year,month,product,location,sales,profit\n", &schema())
                .unwrap();
        assert_eq!(t.rows(), 0);
    }

    #[test]
    fn bad_measure_reports_row() {
        let text = SAMPLE.replace("258000", "abc");
        match ColumnTable::from_text("s", &text, &schema()) {
            Err(StoreError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "sales");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn null_measure_rejected() {
        let text = SAMPLE.replace("63000", "");
        assert!(matches!(
            ColumnTable::from_text("s", &text, &schema()),
            Err(StoreError::Parse { row: 3, .. })
        ));
    }

    #[test]
    fn header_mismatch() {
        let text = SAMPLE.replace("profit", "margin");
        assert!(matches!(
            ColumnTable::from_text("s", &text, &schema()),
            Err(StoreError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn tab_delimited() {
        let text = SAMPLE.replace(',', "\t");
        assert_eq!(
            ColumnTable::from_text("s", &text, &schema())
                .unwrap()
                .rows(),
            4
        );
    }

    #[test]
    fn cardinalities() {
        let t = ColumnTable::from_text("s", SAMPLE, &schema()).unwrap();
        assert_eq!(t.groupby_cardinality(&["product"]).unwrap(), 2);
        assert_eq!(t.groupby_cardinality(&[]).unwrap(), 1);
        assert_eq!(t.groupby_cardinality(&["product", "location"]).unwrap(), 3);
        assert!(t.groupby_cardinality(&["color"]).is_err());
    }

    #[test]
    fn composite_attribute() {
        let t = ColumnTable::from_text("s", SAMPLE, &schema()).unwrap();
        let d = t.distinct("product×location").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[0], Value::str("chair×UK"));
    }
}
