use crate::store::{AggFn, Binning, CmpOp};

/// Position information kept for diagnostics; ignored by equality.
#[derive(Clone, Debug, Default)]
pub struct Span {
    pub line: usize,
    pub cells: Vec<String>,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Column roles of the query table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnRole {
    Name,
    X,
    Y,
    Z(usize),
    Viz,
    Process,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZqlQuery {
    pub z_columns: usize,
    pub rows: Vec<ZqlRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZqlRow {
    pub name: NameCell,
    pub x: AxisCell,
    pub y: AxisCell,
    pub z: Vec<ZCell>,
    pub viz: VizCell,
    pub process: Vec<ProcessDecl>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Str(String),
    Num(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NameCell {
    pub var: String,
    pub output: bool,
    pub derivation: Option<NameExpr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NameExpr {
    Ref(String),
    Concat(Box<NameExpr>, Box<NameExpr>),
    Diff(Box<NameExpr>, Box<NameExpr>),
    Intersect(Box<NameExpr>, Box<NameExpr>),
    Index(Box<NameExpr>, i64),
    Slice(Box<NameExpr>, Option<i64>, Option<i64>),
    Uniq(Box<NameExpr>),
    Order(Box<NameExpr>),
}

impl NameExpr {
    pub fn refs(&self, out: &mut Vec<String>) {
        match self {
            NameExpr::Ref(n) => out.push(n.clone()),
            NameExpr::Concat(a, b) | NameExpr::Diff(a, b) | NameExpr::Intersect(a, b) => {
                a.refs(out);
                b.refs(out);
            }
            NameExpr::Index(a, _)
            | NameExpr::Slice(a, _, _)
            | NameExpr::Uniq(a)
            | NameExpr::Order(a) => a.refs(out),
        }
    }

    pub fn is_order(&self) -> bool {
        matches!(self, NameExpr::Order(_))
    }
}

/// Set expressions over attribute names or attribute values.
#[derive(Clone, Debug, PartialEq)]
pub enum SetExpr {
    /// `*`
    All,
    /// A bare literal, e.g. `'year'`.
    Single(Literal),
    /// `{'a', 'b'}`
    Set(Vec<Literal>),
    Var(String),
    Diff(Box<SetExpr>, Box<SetExpr>),
    Union(Box<SetExpr>, Box<SetExpr>),
    Intersect(Box<SetExpr>, Box<SetExpr>),
    /// Table-algebra composition.
    Cross(Box<SetExpr>, Box<SetExpr>),
    Plus(Box<SetExpr>, Box<SetExpr>),
    Div(Box<SetExpr>, Box<SetExpr>),
}

impl SetExpr {
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            SetExpr::Var(v) => out.push(v.clone()),
            SetExpr::Diff(a, b)
            | SetExpr::Union(a, b)
            | SetExpr::Intersect(a, b)
            | SetExpr::Cross(a, b)
            | SetExpr::Plus(a, b)
            | SetExpr::Div(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            SetExpr::All | SetExpr::Single(_) | SetExpr::Set(_) => {}
        }
    }

    pub fn literals(&self, out: &mut Vec<Literal>) {
        match self {
            SetExpr::Single(l) => out.push(l.clone()),
            SetExpr::Set(ls) => out.extend(ls.iter().cloned()),
            SetExpr::Diff(a, b)
            | SetExpr::Union(a, b)
            | SetExpr::Intersect(a, b)
            | SetExpr::Cross(a, b)
            | SetExpr::Plus(a, b)
            | SetExpr::Div(a, b) => {
                a.literals(out);
                b.literals(out);
            }
            SetExpr::All | SetExpr::Var(_) => {}
        }
    }
}

/// Ordering annotations shared by X, Y and Z cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Annot {
    /// Cross-product priority superscript `^n`.
    pub priority: Option<u32>,
    /// `-->` reorder marker.
    pub reorder: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AxisKind {
    Empty,
    /// A literal attribute, an anonymous collection, or a reuse of a variable.
    Expr(SetExpr),
    Bind(String, SetExpr),
    /// `v <-- _`
    DerivedBind(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxisCell {
    pub kind: AxisKind,
    pub annot: Annot,
}

impl AxisCell {
    pub fn empty() -> Self {
        AxisCell {
            kind: AxisKind::Empty,
            annot: Annot::default(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kind == AxisKind::Empty
    }
}

/// Value half of an `'attr'.value` Z cell.
#[derive(Clone, Debug, PartialEq)]
pub enum ZValue {
    /// `'attr'.'chair'`
    Lit(Literal),
    /// `'attr'.*`, `'attr'.{..}`, `'attr'.(* - ..)`, `'attr'.v1`
    Set(SetExpr),
    /// `'attr'.[? op lit]`
    Cmp(CmpOp, Literal),
    /// `'attr'.[? IN v]` or `'attr'.[? IN {..}]`
    In(SetExpr),
    /// `'attr'.{? op lit}`: collection of the values satisfying the constraint.
    Where(CmpOp, Literal),
    /// `'attr'._`
    Derived,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ZKind {
    Empty,
    Pair {
        attr: String,
        value: ZValue,
    },
    /// Reuse of a variable or an anonymous expression over variables.
    Expr(SetExpr),
    Bind {
        var: String,
        attr: String,
        value: ZValue,
    },
    /// `z.v <-- attrs.*`: attribute and value iterate jointly.
    AttrValueBind {
        attr_var: String,
        value_var: String,
        attrs: SetExpr,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZCell {
    pub kind: ZKind,
    pub annot: Annot,
}

impl ZCell {
    pub fn empty() -> Self {
        ZCell {
            kind: ZKind::Empty,
            annot: Annot::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VizType {
    Bar,
    Point,
    Bin2d,
}

impl VizType {
    pub fn name(self) -> &'static str {
        match self {
            VizType::Bar => "bar",
            VizType::Point => "point",
            VizType::Bin2d => "bin2d",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum YTransform {
    Agg(AggFn),
    Bin(Binning),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VizSpec {
    pub vtype: VizType,
    pub x: Option<Binning>,
    pub y: Option<YTransform>,
}

impl VizSpec {
    pub fn agg(&self) -> AggFn {
        match self.y {
            Some(YTransform::Agg(f)) => f,
            _ => AggFn::Sum,
        }
    }

    pub fn x_binning(&self) -> Binning {
        self.x.unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum VizCell {
    Auto,
    Spec(VizSpec),
    Set(Vec<VizSpec>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArgOpt {
    Max,
    Min,
    Any,
}

impl ArgOpt {
    pub fn name(self) -> &'static str {
        match self {
            ArgOpt::Max => "argmax",
            ArgOpt::Min => "argmin",
            ArgOpt::Any => "argany",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Limiter {
    /// `k=n`; `None` is unbounded.
    K(Option<usize>),
    Threshold(CmpOp, f64),
    Percentile(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Max,
    Min,
    Sum,
    Prod,
}

impl ReduceOp {
    pub fn name(self) -> &'static str {
        match self {
            ReduceOp::Max => "max",
            ReduceOp::Min => "min",
            ReduceOp::Sum => "sum",
            ReduceOp::Prod => "prod",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> char {
        match self {
            ArithOp::Add => '+',
            ArithOp::Sub => '-',
            ArithOp::Mul => '*',
            ArithOp::Div => '/',
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
            ArithOp::Div => a / b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Reduce {
        op: ReduceOp,
        vars: Vec<String>,
        body: Box<Expr>,
    },
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Const(f64),
    T(String),
    D(String, String),
    Plug(String, Vec<String>),
}

impl Expr {
    /// Name variables referenced by primitives.
    pub fn collections(&self, out: &mut Vec<String>) {
        match self {
            Expr::Reduce { body, .. } | Expr::Neg(body) => body.collections(out),
            Expr::Arith(_, a, b) => {
                a.collections(out);
                b.collections(out);
            }
            Expr::Const(_) => {}
            Expr::T(f) => out.push(f.clone()),
            Expr::D(a, b) => {
                out.push(a.clone());
                out.push(b.clone());
            }
            Expr::Plug(_, args) => out.extend(args.iter().cloned()),
        }
    }

    pub fn reduce_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Reduce { vars, body, .. } => {
                out.extend(vars.iter().cloned());
                body.reduce_vars(out);
            }
            Expr::Neg(b) => b.reduce_vars(out),
            Expr::Arith(_, a, b) => {
                a.reduce_vars(out);
                b.reduce_vars(out);
            }
            _ => {}
        }
    }

    pub fn plugs(&self, out: &mut Vec<String>) {
        match self {
            Expr::Reduce { body, .. } | Expr::Neg(body) => body.plugs(out),
            Expr::Arith(_, a, b) => {
                a.plugs(out);
                b.plugs(out);
            }
            Expr::Plug(n, _) => out.push(n.clone()),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProcessDecl {
    Opt {
        outputs: Vec<String>,
        argopt: ArgOpt,
        opt_vars: Vec<String>,
        limiter: Option<Limiter>,
        body: Expr,
    },
    /// `v <-- R(k, var, f)`: k representative values of `var` in collection `f`.
    Represent {
        output: String,
        k: usize,
        var: String,
        coll: String,
    },
}

impl ProcessDecl {
    pub fn outputs(&self) -> Vec<String> {
        match self {
            ProcessDecl::Opt { outputs, .. } => outputs.clone(),
            ProcessDecl::Represent { output, .. } => vec![output.clone()],
        }
    }

    pub fn collections(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ProcessDecl::Opt { body, .. } => body.collections(&mut out),
            ProcessDecl::Represent { coll, .. } => out.push(coll.clone()),
        }
        out.dedup();
        out
    }

    /// Axis variables iterated by the process.
    pub fn loop_vars(&self) -> Vec<String> {
        match self {
            ProcessDecl::Opt { opt_vars, body, .. } => {
                let mut v = opt_vars.clone();
                body.reduce_vars(&mut v);
                v
            }
            ProcessDecl::Represent { var, .. } => vec![var.clone()],
        }
    }
}
