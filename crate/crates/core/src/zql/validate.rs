use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use super::ast::*;
use crate::store::AttributeCatalog;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("row {row} (line {line}), column {column}: undefined variable `{var}`")]
    UndefinedVariable {
        var: String,
        row: usize,
        line: usize,
        column: String,
    },
    #[error("row {row} (line {line}), column {column}: variable `{var}` is already bound")]
    DoubleBinding {
        var: String,
        row: usize,
        line: usize,
        column: String,
    },
    #[error("row {row} (line {line}): X and Y cannot be given on a derived row")]
    XYOnDerivedRow { row: usize, line: usize },
    #[error("row {row} (line {line}): column {column} is required")]
    MissingAxis {
        row: usize,
        line: usize,
        column: String,
    },
    #[error("row {row} (line {line}), column {column}: unknown attribute `{attr}`")]
    UnknownAttribute {
        attr: String,
        row: usize,
        line: usize,
        column: String,
    },
    #[error("row {row} (line {line}), column {column}: attribute `{attr}` is not eligible for this axis")]
    IneligibleAttribute {
        attr: String,
        row: usize,
        line: usize,
        column: String,
    },
    #[error(
        "row {row} (line {line}): process has {outputs} outputs for {opt_vars} optimized variables"
    )]
    ProcessArityMismatch {
        row: usize,
        line: usize,
        outputs: usize,
        opt_vars: usize,
    },
    #[error("row {row} (line {line}): unknown primitive `{name}`")]
    UnknownPrimitive {
        name: String,
        row: usize,
        line: usize,
    },
    #[error("row {row} (line {line}): `-->` is only allowed on rows derived with .order")]
    IllegalReorder { row: usize, line: usize },
    #[error("row {row} (line {line}): {what}")]
    Malformed {
        row: usize,
        line: usize,
        what: String,
    },
    #[error("query has no output row (mark one with `*`)")]
    NoOutput,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarRole {
    X,
    Y,
    /// Values of the given attribute.
    Attr(String),
    /// Attribute names iterated by a `z.v` pair.
    AttrName,
    /// Values of the attribute held by the paired attribute variable.
    AttrValue(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BindSite {
    Column { row: usize, column: ColumnRole },
    Process { row: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub site: BindSite,
    pub role: VarRole,
    /// Variables declared together (iterated jointly) share an id.
    pub joint: usize,
    /// Domain depends on a process result.
    pub dynamic: bool,
    /// Rows that mention the variable.
    pub uses: Vec<usize>,
}

impl VarInfo {
    pub fn row(&self) -> usize {
        match self.site {
            BindSite::Column { row, .. } | BindSite::Process { row, .. } => row,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowInfo {
    pub name: String,
    pub output: bool,
    pub derived: bool,
    pub dynamic: bool,
    /// Name variables of derivation operands.
    pub operands: Vec<String>,
    /// Axis variables referenced (not bound) in X/Y/Z cells.
    pub var_refs: Vec<String>,
}

/// A query whose variables are resolved and checked.
#[derive(Clone, Debug)]
pub struct ValidatedQuery {
    pub query: ZqlQuery,
    pub catalog: AttributeCatalog,
    pub vars: BTreeMap<String, VarInfo>,
    pub rows: Vec<RowInfo>,
    pub outputs: Vec<usize>,
}

impl ValidatedQuery {
    pub fn var(&self, v: &str) -> Option<&VarInfo> {
        self.vars.get(v)
    }

    pub fn name_row(&self, name: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.name == name)
    }

    /// Cell count of a row when it follows from literal sets alone.
    pub fn declared_size(&self, row: usize) -> Option<usize> {
        let r = &self.query.rows[row];
        let set_len = |e: &SetExpr| -> Option<usize> {
            match e {
                SetExpr::Single(_) => Some(1),
                SetExpr::Set(v) => Some(v.len()),
                _ => None,
            }
        };
        let axis = |a: &AxisCell| -> Option<usize> {
            match &a.kind {
                AxisKind::Expr(e) | AxisKind::Bind(_, e) => set_len(e),
                _ => None,
            }
        };
        let mut n = axis(&r.x)? * axis(&r.y)?;
        for z in &r.z {
            n *= match &z.kind {
                ZKind::Empty => 1,
                ZKind::Pair { value, .. } | ZKind::Bind { value, .. } => match value {
                    ZValue::Lit(_) | ZValue::Cmp(..) | ZValue::In(_) => 1,
                    ZValue::Set(e) => set_len(e)?,
                    _ => return None,
                },
                _ => return None,
            };
        }
        Some(n)
    }
}

struct Ctx<'a> {
    catalog: &'a AttributeCatalog,
    plugs: &'a HashSet<String>,
    vars: BTreeMap<String, VarInfo>,
    names: Vec<(String, bool)>,
    next_joint: usize,
}

fn col_name(c: ColumnRole) -> String {
    match c {
        ColumnRole::Name => "Name".into(),
        ColumnRole::X => "X".into(),
        ColumnRole::Y => "Y".into(),
        ColumnRole::Z(0) => "Z".into(),
        ColumnRole::Z(i) => format!("Z{}", i + 1),
        ColumnRole::Viz => "Viz".into(),
        ColumnRole::Process => "Process".into(),
    }
}

impl Ctx<'_> {
    fn joint(&mut self) -> usize {
        self.next_joint += 1;
        self.next_joint - 1
    }

    fn bind(
        &mut self,
        var: &str,
        site: BindSite,
        role: VarRole,
        joint: usize,
        dynamic: bool,
        line: usize,
    ) -> Result<(), ValidationError> {
        let (row, column) = match &site {
            BindSite::Column { row, column } => (*row, col_name(*column)),
            BindSite::Process { row, .. } => (*row, "Process".into()),
        };
        if self.vars.contains_key(var) || self.names.iter().any(|(n, _)| n == var) {
            return Err(ValidationError::DoubleBinding {
                var: var.into(),
                row: row + 1,
                line,
                column,
            });
        }
        self.vars.insert(
            var.to_string(),
            VarInfo {
                name: var.into(),
                site,
                role,
                joint,
                dynamic,
                uses: vec![row],
            },
        );
        Ok(())
    }

    fn use_var(
        &mut self,
        var: &str,
        row: usize,
        line: usize,
        column: ColumnRole,
    ) -> Result<bool, ValidationError> {
        match self.vars.get_mut(var) {
            Some(v) => {
                if !v.uses.contains(&row) {
                    v.uses.push(row);
                }
                Ok(v.dynamic)
            }
            None => Err(ValidationError::UndefinedVariable {
                var: var.into(),
                row: row + 1,
                line,
                column: col_name(column),
            }),
        }
    }

    fn check_attr(
        &self,
        attr: &str,
        row: usize,
        line: usize,
        column: ColumnRole,
    ) -> Result<(), ValidationError> {
        if self.catalog.has(attr) {
            Ok(())
        } else {
            Err(ValidationError::UnknownAttribute {
                attr: attr.into(),
                row: row + 1,
                line,
                column: col_name(column),
            })
        }
    }

    /// Checks a set expression; returns whether it depends on a dynamic variable.
    fn set_expr(
        &mut self,
        e: &SetExpr,
        row: usize,
        line: usize,
        col: ColumnRole,
        attrs: bool,
    ) -> Result<bool, ValidationError> {
        let mut vars = Vec::new();
        e.vars(&mut vars);
        let mut dynamic = false;
        for v in vars {
            dynamic |= self.use_var(&v, row, line, col)?;
        }
        if attrs {
            let mut lits = Vec::new();
            e.literals(&mut lits);
            for l in lits {
                let name = match &l {
                    Literal::Str(s) => s.clone(),
                    Literal::Num(n) => n.to_string(),
                };
                self.check_attr(&name, row, line, col)?;
                let ok = match col {
                    ColumnRole::X => {
                        self.catalog.x_eligible.contains(&name)
                            || name.contains(crate::store::CROSS)
                    }
                    ColumnRole::Y => self.catalog.y_eligible.contains(&name),
                    _ => true,
                };
                if !ok {
                    return Err(ValidationError::IneligibleAttribute {
                        attr: name,
                        row: row + 1,
                        line,
                        column: col_name(col),
                    });
                }
            }
        }
        Ok(dynamic)
    }
}

/// Validates with no plug-in primitives registered.
pub fn validate(
    q: &ZqlQuery,
    catalog: &AttributeCatalog,
) -> Result<ValidatedQuery, ValidationError> {
    validate_with(q, catalog, &HashSet::new())
}

/// Validates, accepting calls to the named plug-in primitives.
pub fn validate_with(
    q: &ZqlQuery,
    catalog: &AttributeCatalog,
    plugs: &HashSet<String>,
) -> Result<ValidatedQuery, ValidationError> {
    let mut cx = Ctx {
        catalog,
        plugs,
        vars: BTreeMap::new(),
        names: Vec::new(),
        next_joint: 0,
    };
    let mut rows = Vec::new();
    for (ri, row) in q.rows.iter().enumerate() {
        rows.push(validate_row(&mut cx, ri, row)?);
    }
    let outputs: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.output)
        .map(|(i, _)| i)
        .collect();
    if outputs.is_empty() {
        return Err(ValidationError::NoOutput);
    }
    Ok(ValidatedQuery {
        query: q.clone(),
        catalog: catalog.clone(),
        vars: cx.vars,
        rows,
        outputs,
    })
}

fn validate_row(cx: &mut Ctx, ri: usize, row: &ZqlRow) -> Result<RowInfo, ValidationError> {
    let line = row.span.line;
    let name = &row.name.var;
    let derived = row.name.derivation.is_some();
    let mut operands = Vec::new();
    let mut dynamic = false;
    if let Some(d) = &row.name.derivation {
        d.refs(&mut operands);
        for o in &operands {
            match cx.names.iter().find(|(n, _)| n == o) {
                Some((_, dy)) => dynamic |= *dy,
                None => {
                    return Err(ValidationError::UndefinedVariable {
                        var: o.clone(),
                        row: ri + 1,
                        line,
                        column: "Name".into(),
                    })
                }
            }
        }
    }
    let is_order = row.name.derivation.as_ref().is_some_and(NameExpr::is_order);
    let mut annots: Vec<&Annot> = vec![&row.x.annot, &row.y.annot];
    annots.extend(row.z.iter().map(|z| &z.annot));
    if !is_order && annots.iter().any(|a| a.reorder) {
        return Err(ValidationError::IllegalReorder { row: ri + 1, line });
    }

    let mut var_refs = Vec::new();
    let mut derived_joint: Option<usize> = None;
    let mut pending_binds: Vec<(String, ColumnRole, VarRole, Option<usize>)> = Vec::new();

    for (col, cell) in [(ColumnRole::X, &row.x), (ColumnRole::Y, &row.y)] {
        let role = if col == ColumnRole::X {
            VarRole::X
        } else {
            VarRole::Y
        };
        match &cell.kind {
            AxisKind::Empty => {
                if !derived {
                    return Err(ValidationError::MissingAxis {
                        row: ri + 1,
                        line,
                        column: col_name(col),
                    });
                }
            }
            AxisKind::Expr(e) => {
                if derived && !(matches!(e, SetExpr::Var(_)) && cell.annot.reorder) {
                    return Err(ValidationError::XYOnDerivedRow { row: ri + 1, line });
                }
                let mut vs = Vec::new();
                e.vars(&mut vs);
                var_refs.extend(vs);
                dynamic |= cx.set_expr(e, ri, line, col, true)?;
            }
            AxisKind::Bind(v, e) => {
                if derived {
                    return Err(ValidationError::XYOnDerivedRow { row: ri + 1, line });
                }
                let mut vs = Vec::new();
                e.vars(&mut vs);
                var_refs.extend(vs);
                let dy = cx.set_expr(e, ri, line, col, true)?;
                dynamic |= dy;
                let j = cx.joint();
                cx.bind(
                    v,
                    BindSite::Column {
                        row: ri,
                        column: col,
                    },
                    role,
                    j,
                    dy,
                    line,
                )?;
            }
            AxisKind::DerivedBind(v) => {
                if !derived {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: format!("`{v} <-- _` needs a derived row"),
                    });
                }
                let j = *derived_joint.get_or_insert_with(|| cx.joint());
                pending_binds.push((v.clone(), col, role, Some(j)));
            }
        }
    }

    for (zi, z) in row.z.iter().enumerate() {
        let col = ColumnRole::Z(zi);
        match &z.kind {
            ZKind::Empty => {}
            ZKind::Pair { attr, value } => {
                cx.check_attr(attr, ri, line, col)?;
                if derived && !matches!(value, ZValue::Lit(_) | ZValue::Cmp(..) | ZValue::In(_)) {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: "derived rows accept only literal or predicate Z constraints".into(),
                    });
                }
                dynamic |= z_value(cx, value, ri, line, col, &mut var_refs)?;
            }
            ZKind::Expr(e) => {
                let mut vs = Vec::new();
                e.vars(&mut vs);
                if vs.is_empty() {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: "Z cell needs an attribute".into(),
                    });
                }
                if derived && !(z.annot.reorder && matches!(e, SetExpr::Var(_))) {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: "derived rows reference variables only as `v -->`".into(),
                    });
                }
                var_refs.extend(vs);
                dynamic |= cx.set_expr(e, ri, line, col, false)?;
            }
            ZKind::Bind { var, attr, value } => {
                cx.check_attr(attr, ri, line, col)?;
                if *value == ZValue::Derived {
                    if !derived {
                        return Err(ValidationError::Malformed {
                            row: ri + 1,
                            line,
                            what: format!("`{var} <-- _` needs a derived row"),
                        });
                    }
                    let j = *derived_joint.get_or_insert_with(|| cx.joint());
                    pending_binds.push((var.clone(), col, VarRole::Attr(attr.clone()), Some(j)));
                    continue;
                }
                if derived {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: "derived rows cannot bind new collections".into(),
                    });
                }
                if matches!(value, ZValue::Cmp(..) | ZValue::In(_)) {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: "a predicate constraint cannot be bound".into(),
                    });
                }
                let dy = z_value(cx, value, ri, line, col, &mut var_refs)?;
                dynamic |= dy;
                let j = cx.joint();
                cx.bind(
                    var,
                    BindSite::Column {
                        row: ri,
                        column: col,
                    },
                    VarRole::Attr(attr.clone()),
                    j,
                    dy,
                    line,
                )?;
            }
            ZKind::AttrValueBind {
                attr_var,
                value_var,
                attrs,
            } => {
                if derived {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: "derived rows cannot bind new collections".into(),
                    });
                }
                let dy = cx.set_expr(attrs, ri, line, col, true)?;
                dynamic |= dy;
                let j = cx.joint();
                cx.bind(
                    attr_var,
                    BindSite::Column {
                        row: ri,
                        column: col,
                    },
                    VarRole::AttrName,
                    j,
                    dy,
                    line,
                )?;
                cx.bind(
                    value_var,
                    BindSite::Column {
                        row: ri,
                        column: col,
                    },
                    VarRole::AttrValue(attr_var.clone()),
                    j,
                    dy,
                    line,
                )?;
            }
        }
    }

    for (v, col, role, joint) in pending_binds {
        cx.bind(
            &v,
            BindSite::Column {
                row: ri,
                column: col,
            },
            role,
            joint.unwrap_or(0),
            dynamic,
            line,
        )?;
    }

    if let VizCell::Spec(s) = &row.viz {
        if s.vtype == VizType::Bin2d && (s.x.is_none() || !matches!(s.y, Some(YTransform::Bin(_))))
        {
            return Err(ValidationError::Malformed {
                row: ri + 1,
                line,
                what: "bin2d requires binning on both axes".into(),
            });
        }
    }
    if derived && row.viz != VizCell::Auto {
        return Err(ValidationError::Malformed {
            row: ri + 1,
            line,
            what: "derived rows inherit their visualization".into(),
        });
    }

    if cx.names.iter().any(|(n, _)| n == name) || cx.vars.contains_key(name) {
        return Err(ValidationError::DoubleBinding {
            var: name.clone(),
            row: ri + 1,
            line,
            column: "Name".into(),
        });
    }
    cx.names.push((name.clone(), dynamic));

    for (pi, p) in row.process.iter().enumerate() {
        validate_process(cx, ri, line, pi, p)?;
    }

    Ok(RowInfo {
        name: name.clone(),
        output: row.name.output,
        derived,
        dynamic,
        operands,
        var_refs,
    })
}

fn z_value(
    cx: &mut Ctx,
    value: &ZValue,
    ri: usize,
    line: usize,
    col: ColumnRole,
    refs: &mut Vec<String>,
) -> Result<bool, ValidationError> {
    match value {
        ZValue::Set(e) | ZValue::In(e) => {
            let mut vs = Vec::new();
            e.vars(&mut vs);
            refs.extend(vs);
            cx.set_expr(e, ri, line, col, false)
        }
        ZValue::Derived => Err(ValidationError::Malformed {
            row: ri + 1,
            line,
            what: "`_` must be bound to a variable".into(),
        }),
        _ => Ok(false),
    }
}

fn validate_process(
    cx: &mut Ctx,
    ri: usize,
    line: usize,
    pi: usize,
    p: &ProcessDecl,
) -> Result<(), ValidationError> {
    let undefined = |var: &str| ValidationError::UndefinedVariable {
        var: var.into(),
        row: ri + 1,
        line,
        column: "Process".into(),
    };
    for c in p.collections() {
        if !cx.names.iter().any(|(n, _)| *n == c) {
            return Err(undefined(&c));
        }
    }
    let loop_vars = p.loop_vars();
    for v in &loop_vars {
        cx.use_var(v, ri, line, ColumnRole::Process)?;
    }
    let site = BindSite::Process { row: ri, index: pi };
    let joint = cx.joint();
    match p {
        ProcessDecl::Opt {
            outputs,
            opt_vars,
            body,
            limiter,
            ..
        } => {
            if outputs.len() != opt_vars.len() {
                return Err(ValidationError::ProcessArityMismatch {
                    row: ri + 1,
                    line,
                    outputs: outputs.len(),
                    opt_vars: opt_vars.len(),
                });
            }
            let mut seen = HashSet::new();
            for v in &loop_vars {
                if !seen.insert(v) {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: format!("variable `{v}` iterated twice"),
                    });
                }
            }
            if let Some(Limiter::Percentile(pc)) = limiter {
                if !(*pc > 0.0 && *pc <= 100.0) {
                    return Err(ValidationError::Malformed {
                        row: ri + 1,
                        line,
                        what: format!("percentile {pc} outside (0, 100]"),
                    });
                }
            }
            let mut plugs = Vec::new();
            body.plugs(&mut plugs);
            for name in plugs {
                if !cx.plugs.contains(&name) {
                    return Err(ValidationError::UnknownPrimitive {
                        name,
                        row: ri + 1,
                        line,
                    });
                }
            }
            for (o, v) in outputs.iter().zip(opt_vars) {
                let role = cx.vars[v].role.clone();
                cx.bind(o, site.clone(), role, joint, true, line)?;
            }
        }
        ProcessDecl::Represent { output, k, var, .. } => {
            if *k == 0 {
                return Err(ValidationError::Malformed {
                    row: ri + 1,
                    line,
                    what: "R needs k >= 1".into(),
                });
            }
            let role = cx.vars[var].role.clone();
            cx.bind(output, site, role, joint, true, line)?;
        }
    }
    Ok(())
}
