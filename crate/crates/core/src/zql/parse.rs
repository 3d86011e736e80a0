//! Parser for the pipe-delimited ZQL table format.

use super::ast::*;
use crate::store::{AggFn, Binning, CmpOp};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at line {line}, column {column}: expected {expected}, found {found}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LArrow,
    RArrow,
    Op(CmpOp),
    Sym(char),
    Under,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Num(n) => format!("number {n}"),
            Tok::LArrow => "`<--`".into(),
            Tok::RArrow => "`-->`".into(),
            Tok::Op(o) => format!("`{o}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::Under => "`_`".into(),
            Tok::End => "end of cell".into(),
        }
    }
}

struct Lexer;

impl Lexer {
    fn lex(text: &str, line: usize, base: usize) -> Result<Vec<(Tok, usize)>, SyntaxError> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        let err = |col: usize, found: String| SyntaxError {
            line,
            column: base + col + 1,
            expected: "a token".into(),
            found,
        };
        while i < chars.len() {
            let c = chars[i];
            let col = base + i + 1;
            let peek = |k: usize| chars.get(i + k).copied();
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '\'' || c == '"' {
                let mut j = i + 1;
                let mut s = String::new();
                while j < chars.len() && chars[j] != c {
                    s.push(chars[j]);
                    j += 1;
                }
                if j >= chars.len() {
                    return Err(SyntaxError {
                        line,
                        column: col,
                        expected: "closing quote".into(),
                        found: "end of cell".into(),
                    });
                }
                out.push((Tok::Str(s), col));
                i = j + 1;
                continue;
            }
            if c.is_ascii_digit()
                || (c == '.'
                    && peek(1).is_some_and(|d| d.is_ascii_digit())
                    && !matches!(
                        out.last(),
                        Some((
                            Tok::Str(_) | Tok::Ident(_) | Tok::Sym(')') | Tok::Sym('}'),
                            _
                        ))
                    ))
            {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    if chars[j] == '.' && !chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                        break;
                    }
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                let n = s.parse::<f64>().map_err(|_| err(i, s.clone()))?;
                out.push((Tok::Num(n), col));
                i = j;
                continue;
            }
            if c.is_alphabetic() {
                let mut j = i;
                while j < chars.len()
                    && (chars[j].is_alphanumeric() || chars[j] == '_')
                    && chars[j] != '×'
                {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                out.push((Tok::Ident(s), col));
                i = j;
                continue;
            }
            let (tok, len) = match c {
                '<' if peek(1) == Some('-') && peek(2) == Some('-') => (Tok::LArrow, 3),
                '<' if peek(1) == Some('=') => (Tok::Op(CmpOp::Le), 2),
                '<' if peek(1) == Some('>') => (Tok::Op(CmpOp::Ne), 2),
                '<' => (Tok::Op(CmpOp::Lt), 1),
                '>' if peek(1) == Some('=') => (Tok::Op(CmpOp::Ge), 2),
                '>' => (Tok::Op(CmpOp::Gt), 1),
                '!' if peek(1) == Some('=') => (Tok::Op(CmpOp::Ne), 2),
                '=' if peek(1) == Some('=') => (Tok::Op(CmpOp::Eq), 2),
                '-' if peek(1) == Some('-') && peek(2) == Some('>') => (Tok::RArrow, 3),
                '←' => (Tok::LArrow, 1),
                '→' => (Tok::RArrow, 1),
                '≤' => (Tok::Op(CmpOp::Le), 1),
                '≥' => (Tok::Op(CmpOp::Ge), 1),
                '≠' => (Tok::Op(CmpOp::Ne), 1),
                '∖' => (Tok::Sym('\\'), 1),
                '∞' => (Tok::Ident("inf".into()), 1),
                '_' if !peek(1).is_some_and(|d| d.is_alphanumeric()) => (Tok::Under, 1),
                '{' | '}' | '(' | ')' | '[' | ']' | ',' | '.' | '*' | '-' | '+' | '^' | '×'
                | '/' | '\\' | '?' | '=' | ':' | '|' => (Tok::Sym(c), 1),
                _ => return Err(err(i, format!("`{c}`"))),
            };
            out.push((tok, col));
            i += len;
        }
        out.push((Tok::End, base + chars.len() + 1));
        Ok(out)
    }
}

struct Cell {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Cell {
    fn new(text: &str, line: usize, base: usize) -> PResult<Cell> {
        Ok(Cell {
            toks: Lexer::lex(text, line, base)?,
            pos: 0,
            line,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> PResult<T> {
        let (t, col) = &self.toks[self.pos];
        Err(SyntaxError {
            line: self.line,
            column: *col,
            expected: expected.into(),
            found: t.describe(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.fail(what)
        }
    }

    fn sym(&mut self, c: char) -> bool {
        self.eat(&Tok::Sym(c))
    }

    fn expect_sym(&mut self, c: char) -> PResult<()> {
        self.expect(Tok::Sym(c), &format!("`{c}`"))
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    fn end(&self) -> PResult<()> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            self.fail("end of cell")
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let neg = self.sym('-');
        match self.peek().clone() {
            Tok::Num(n) => {
                self.next();
                Ok(if neg { -n } else { n })
            }
            _ => self.fail("a number"),
        }
    }

    fn integer(&mut self) -> PResult<i64> {
        let n = self.number()?;
        if n.fract() != 0.0 {
            self.pos -= 1;
            return self.fail("an integer");
        }
        Ok(n as i64)
    }

    fn literal(&mut self) -> PResult<Literal> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(Literal::Str(s))
            }
            Tok::Num(_) | Tok::Sym('-') => Ok(Literal::Num(self.number()?)),
            _ => self.fail("a literal"),
        }
    }

    fn annot(&mut self) -> PResult<Annot> {
        let mut a = Annot::default();
        if *self.peek() == Tok::Sym('^') && matches!(self.peek_at(1), Tok::Num(_)) {
            self.next();
            a.priority = Some(self.integer()? as u32);
        }
        if self.eat(&Tok::RArrow) {
            a.reorder = true;
        }
        Ok(a)
    }

    fn priority_prefix(&mut self) -> PResult<Option<u32>> {
        if *self.peek() == Tok::Sym('^') && matches!(self.peek_at(1), Tok::Num(_)) {
            self.next();
            return Ok(Some(self.integer()? as u32));
        }
        Ok(None)
    }

    // ---- set expressions ----

    fn set_expr(&mut self) -> PResult<SetExpr> {
        let mut lhs = self.set_product()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('^') if matches!(self.peek_at(1), Tok::Num(_)) => break,
                Tok::Sym(c @ ('-' | '\\' | '|' | '+' | '^')) => *c,
                _ => break,
            };
            self.next();
            let rhs = self.set_product()?;
            lhs = match op {
                '-' | '\\' => SetExpr::Diff(Box::new(lhs), Box::new(rhs)),
                '|' => SetExpr::Union(Box::new(lhs), Box::new(rhs)),
                '+' => SetExpr::Plus(Box::new(lhs), Box::new(rhs)),
                _ => SetExpr::Intersect(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn set_product(&mut self) -> PResult<SetExpr> {
        let mut lhs = self.set_atom()?;
        while let Tok::Sym(op @ ('×' | '/')) = *self.peek() {
            self.next();
            let rhs = self.set_atom()?;
            lhs = if op == '×' {
                SetExpr::Cross(Box::new(lhs), Box::new(rhs))
            } else {
                SetExpr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn set_atom(&mut self) -> PResult<SetExpr> {
        match self.peek().clone() {
            Tok::Sym('*') => {
                self.next();
                Ok(SetExpr::All)
            }
            Tok::Str(_) | Tok::Num(_) | Tok::Sym('-') => Ok(SetExpr::Single(self.literal()?)),
            Tok::Sym('{') => {
                self.next();
                Ok(SetExpr::Set(self.literal_list('}')?))
            }
            Tok::Ident(v) => {
                self.next();
                Ok(SetExpr::Var(v))
            }
            Tok::Sym('(') => {
                self.next();
                let e = self.set_expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            _ => self.fail("a collection expression"),
        }
    }

    fn literal_list(&mut self, close: char) -> PResult<Vec<Literal>> {
        let mut items = Vec::new();
        if self.sym(close) {
            return Ok(items);
        }
        loop {
            items.push(self.literal()?);
            if self.sym(close) {
                return Ok(items);
            }
            if !self.sym(',') {
                return self.fail(&format!("`,` or `{close}`"));
            }
        }
    }

    // ---- cells ----

    fn name_cell(&mut self) -> PResult<NameCell> {
        let output = self.sym('*');
        let var = self.ident("a name variable")?;
        let derivation = if self.eat(&Tok::LArrow) || self.sym('=') {
            Some(self.name_expr()?)
        } else {
            None
        };
        self.end()?;
        Ok(NameCell {
            var,
            output,
            derivation,
        })
    }

    fn name_expr(&mut self) -> PResult<NameExpr> {
        let mut lhs = self.name_term()?;
        while let Tok::Sym(op @ ('+' | '-' | '^' | '\\')) = *self.peek() {
            self.next();
            let rhs = self.name_term()?;
            lhs = match op {
                '+' => NameExpr::Concat(Box::new(lhs), Box::new(rhs)),
                '^' => NameExpr::Intersect(Box::new(lhs), Box::new(rhs)),
                _ => NameExpr::Diff(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn name_term(&mut self) -> PResult<NameExpr> {
        let mut e = if self.sym('(') {
            let e = self.name_expr()?;
            self.expect_sym(')')?;
            e
        } else if *self.peek() == Tok::Sym('[') {
            // `[f1[i]]` as written in some tables
            self.next();
            let e = self.name_expr()?;
            self.expect_sym(']')?;
            e
        } else {
            NameExpr::Ref(self.ident("a name variable")?)
        };
        loop {
            if self.sym('[') {
                let a = if matches!(self.peek(), Tok::Num(_) | Tok::Sym('-')) {
                    Some(self.integer()?)
                } else {
                    None
                };
                if self.sym(':') {
                    let b = if matches!(self.peek(), Tok::Num(_) | Tok::Sym('-')) {
                        Some(self.integer()?)
                    } else {
                        None
                    };
                    self.expect_sym(']')?;
                    e = NameExpr::Slice(Box::new(e), a, b);
                } else {
                    let Some(i) = a else {
                        return self.fail("an index");
                    };
                    self.expect_sym(']')?;
                    e = NameExpr::Index(Box::new(e), i);
                }
            } else if *self.peek() == Tok::Sym('.') {
                self.next();
                match self.ident("`uniq` or `order`")?.as_str() {
                    "uniq" => e = NameExpr::Uniq(Box::new(e)),
                    "order" => e = NameExpr::Order(Box::new(e)),
                    _ => {
                        self.pos -= 1;
                        return self.fail("`uniq` or `order`");
                    }
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn axis_cell(&mut self) -> PResult<AxisCell> {
        if *self.peek() == Tok::End {
            return Ok(AxisCell::empty());
        }
        if let (Tok::Ident(v), Tok::LArrow) = (self.peek().clone(), self.peek_at(1).clone()) {
            self.next();
            self.next();
            let kind = if self.eat(&Tok::Under) {
                AxisKind::DerivedBind(v)
            } else {
                AxisKind::Bind(v, self.set_expr()?)
            };
            let annot = self.annot()?;
            self.end()?;
            return Ok(AxisCell { kind, annot });
        }
        if let (Tok::Ident(v), Tok::Sym('^'), Tok::Num(_), Tok::LArrow) = (
            self.peek().clone(),
            self.peek_at(1).clone(),
            self.peek_at(2).clone(),
            self.peek_at(3).clone(),
        ) {
            self.next();
            let p = self.priority_prefix()?;
            self.next();
            let kind = if self.eat(&Tok::Under) {
                AxisKind::DerivedBind(v)
            } else {
                AxisKind::Bind(v, self.set_expr()?)
            };
            let mut annot = self.annot()?;
            annot.priority = annot.priority.or(p);
            self.end()?;
            return Ok(AxisCell { kind, annot });
        }
        let e = self.set_expr()?;
        let annot = self.annot()?;
        self.end()?;
        Ok(AxisCell {
            kind: AxisKind::Expr(e),
            annot,
        })
    }

    fn z_cell(&mut self) -> PResult<ZCell> {
        if *self.peek() == Tok::End {
            return Ok(ZCell::empty());
        }
        // z.v <-- attrs.*
        if let (Tok::Ident(a), Tok::Sym('.'), Tok::Ident(v), Tok::LArrow) = (
            self.peek().clone(),
            self.peek_at(1).clone(),
            self.peek_at(2).clone(),
            self.peek_at(3).clone(),
        ) {
            for _ in 0..4 {
                self.next();
            }
            let attrs = self.set_atom()?;
            self.expect_sym('.')?;
            self.expect_sym('*')?;
            let annot = self.annot()?;
            self.end()?;
            return Ok(ZCell {
                kind: ZKind::AttrValueBind {
                    attr_var: a,
                    value_var: v,
                    attrs,
                },
                annot,
            });
        }
        let mut prio = None;
        let bind = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Ident(v), Tok::LArrow) => {
                self.next();
                self.next();
                Some(v)
            }
            (Tok::Ident(v), Tok::Sym('^'))
                if matches!(self.peek_at(2), Tok::Num(_)) && *self.peek_at(3) == Tok::LArrow =>
            {
                self.next();
                prio = self.priority_prefix()?;
                self.next();
                Some(v)
            }
            _ => None,
        };
        if let (Tok::Str(attr), Tok::Sym('.')) = (self.peek().clone(), self.peek_at(1).clone()) {
            self.next();
            self.next();
            let value = self.z_value()?;
            let mut annot = self.annot()?;
            annot.priority = annot.priority.or(prio);
            self.end()?;
            let kind = match bind {
                Some(var) => ZKind::Bind { var, attr, value },
                None => ZKind::Pair { attr, value },
            };
            return Ok(ZCell { kind, annot });
        }
        if bind.is_some() {
            return self.fail("`'attribute'.values`");
        }
        let e = self.set_expr()?;
        let annot = self.annot()?;
        self.end()?;
        Ok(ZCell {
            kind: ZKind::Expr(e),
            annot,
        })
    }

    fn z_value(&mut self) -> PResult<ZValue> {
        match self.peek().clone() {
            Tok::Str(_) | Tok::Num(_) | Tok::Sym('-') => Ok(ZValue::Lit(self.literal()?)),
            Tok::Under => {
                self.next();
                Ok(ZValue::Derived)
            }
            Tok::Sym('[') => {
                self.next();
                self.expect_sym('?')?;
                let v = match self.peek().clone() {
                    Tok::Op(op) => {
                        self.next();
                        ZValue::Cmp(op, self.literal()?)
                    }
                    Tok::Sym('=') => {
                        self.next();
                        ZValue::Cmp(CmpOp::Eq, self.literal()?)
                    }
                    Tok::Ident(s) if s.eq_ignore_ascii_case("in") => {
                        self.next();
                        ZValue::In(self.set_expr()?)
                    }
                    _ => return self.fail("a comparison operator or IN"),
                };
                self.expect_sym(']')?;
                Ok(v)
            }
            Tok::Sym('{') if *self.peek_at(1) == Tok::Sym('?') => {
                self.next();
                self.next();
                let op = match self.next() {
                    Tok::Op(op) => op,
                    Tok::Sym('=') => CmpOp::Eq,
                    _ => {
                        self.pos -= 1;
                        return self.fail("a comparison operator");
                    }
                };
                let lit = self.literal()?;
                self.expect_sym('}')?;
                Ok(ZValue::Where(op, lit))
            }
            _ => Ok(ZValue::Set(self.set_atom_then_ops()?)),
        }
    }

    fn set_atom_then_ops(&mut self) -> PResult<SetExpr> {
        // after `'attr'.` only a single atom is taken so that trailing annotations stay unambiguous
        self.set_atom()
    }

    fn viz_cell(&mut self) -> PResult<VizCell> {
        if *self.peek() == Tok::End {
            return Ok(VizCell::Auto);
        }
        if self.sym('{') {
            let mut specs = vec![self.viz_spec()?];
            while self.sym(',') {
                specs.push(self.viz_spec()?);
            }
            self.expect_sym('}')?;
            self.end()?;
            return Ok(VizCell::Set(specs));
        }
        let s = self.viz_spec()?;
        self.end()?;
        Ok(VizCell::Spec(s))
    }

    fn viz_spec(&mut self) -> PResult<VizSpec> {
        let vtype = match self
            .ident("a visualization type")?
            .to_ascii_lowercase()
            .as_str()
        {
            "bar" => VizType::Bar,
            "point" | "scatter" | "scatterplot" => VizType::Point,
            "bin2d" | "heatmap" => VizType::Bin2d,
            _ => {
                self.pos -= 1;
                return self.fail("bar, point or bin2d");
            }
        };
        let mut spec = VizSpec {
            vtype,
            x: None,
            y: None,
        };
        if !(*self.peek() == Tok::Sym('.') && *self.peek_at(1) == Tok::Sym('(')) {
            return Ok(spec);
        }
        self.next();
        self.next();
        if self.sym(')') {
            return Ok(spec);
        }
        loop {
            let axis = self.ident("`x` or `y`")?;
            self.expect_sym('=')?;
            let f = self.ident("bin, nbin or agg")?;
            self.expect_sym('(')?;
            match (axis.as_str(), f.as_str()) {
                ("x" | "y", "bin") => {
                    let w = self.number()?;
                    let b = Binning::Width(w);
                    if axis == "x" {
                        spec.x = Some(b)
                    } else {
                        spec.y = Some(YTransform::Bin(b))
                    }
                }
                ("x" | "y", "nbin") => {
                    let n = self.integer()?;
                    let b = Binning::Count(n.max(0) as usize);
                    if axis == "x" {
                        spec.x = Some(b)
                    } else {
                        spec.y = Some(YTransform::Bin(b))
                    }
                }
                ("y", "agg") => {
                    let name = match self.next() {
                        Tok::Str(s) | Tok::Ident(s) => s,
                        _ => {
                            self.pos -= 1;
                            return self.fail("an aggregate name");
                        }
                    };
                    match AggFn::parse(&name) {
                        Some(a) => spec.y = Some(YTransform::Agg(a)),
                        None => {
                            self.pos -= 1;
                            return self.fail("sum, avg, count, max or min");
                        }
                    }
                }
                _ => {
                    self.pos -= 1;
                    return self.fail("x=bin(..), x=nbin(..), y=agg(..)");
                }
            }
            self.expect_sym(')')?;
            if self.sym(')') {
                return Ok(spec);
            }
            self.expect_sym(',')?;
        }
    }

    fn process_cell(&mut self) -> PResult<Vec<ProcessDecl>> {
        if *self.peek() == Tok::End {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        if *self.peek() == Tok::Sym('(') {
            loop {
                self.expect_sym('(')?;
                out.push(self.process_decl()?);
                self.expect_sym(')')?;
                if !self.sym(',') {
                    break;
                }
            }
        } else {
            out.push(self.process_decl()?);
        }
        self.end()?;
        Ok(out)
    }

    fn process_decl(&mut self) -> PResult<ProcessDecl> {
        let mut outputs = vec![self.ident("an output variable")?];
        while self.sym(',') {
            outputs.push(self.ident("an output variable")?);
        }
        self.expect(Tok::LArrow, "`<--`")?;
        let head = self.ident("argmax, argmin, argany or R")?;
        if head == "R" {
            self.expect_sym('(')?;
            let k = self.integer()?;
            self.expect_sym(',')?;
            let var = self.ident("an axis variable")?;
            self.expect_sym(',')?;
            let coll = self.ident("a name variable")?;
            self.expect_sym(')')?;
            if outputs.len() != 1 {
                return self.fail("a single output for R");
            }
            return Ok(ProcessDecl::Represent {
                output: outputs.remove(0),
                k: k.max(0) as usize,
                var,
                coll,
            });
        }
        let (prefix, rest) = head.split_once('_').unwrap_or((head.as_str(), ""));
        let argopt = match prefix {
            "argmax" => ArgOpt::Max,
            "argmin" => ArgOpt::Min,
            "argany" => ArgOpt::Any,
            _ => {
                self.pos -= 1;
                return self.fail("argmax, argmin, argany or R");
            }
        };
        let opt_vars = self.subscript(rest)?;
        let limiter = if self.sym('[') {
            let l = self.limiter()?;
            self.expect_sym(']')?;
            Some(l)
        } else {
            None
        };
        let body = self.expr()?;
        Ok(ProcessDecl::Opt {
            outputs,
            argopt,
            opt_vars,
            limiter,
            body,
        })
    }

    fn subscript(&mut self, rest: &str) -> PResult<Vec<String>> {
        if !rest.is_empty() {
            return Ok(vec![rest.to_string()]);
        }
        if self.eat(&Tok::Under) {
            // tolerate `argmax _ {..}` spacing
        }
        self.expect_sym('{')?;
        let mut vars = vec![self.ident("an axis variable")?];
        while self.sym(',') {
            vars.push(self.ident("an axis variable")?);
        }
        self.expect_sym('}')?;
        Ok(vars)
    }

    fn limiter(&mut self) -> PResult<Limiter> {
        let kind = self.ident("k, t or p")?;
        match kind.as_str() {
            "k" => {
                self.expect_sym('=')?;
                if let Tok::Ident(s) = self.peek().clone() {
                    if s == "inf" {
                        self.next();
                        return Ok(Limiter::K(None));
                    }
                }
                let n = self.integer()?;
                Ok(Limiter::K(Some(n.max(0) as usize)))
            }
            "t" => {
                let op = match self.next() {
                    Tok::Op(op) => op,
                    Tok::Sym('=') => CmpOp::Eq,
                    _ => {
                        self.pos -= 1;
                        return self.fail("a comparison operator");
                    }
                };
                Ok(Limiter::Threshold(op, self.number()?))
            }
            "p" => {
                self.expect_sym('=')?;
                Ok(Limiter::Percentile(self.number()?))
            }
            _ => {
                self.pos -= 1;
                self.fail("k, t or p")
            }
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => ArithOp::Add,
                Tok::Sym('-') => ArithOp::Sub,
                _ => break,
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*' | '×') => ArithOp::Mul,
                Tok::Sym('/') => ArithOp::Div,
                _ => break,
            };
            self.next();
            let rhs = self.factor()?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Sym('-') => {
                self.next();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::Num(n) => {
                self.next();
                Ok(Expr::Const(n))
            }
            Tok::Sym('(') => {
                self.next();
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.next();
                let (prefix, rest) = name.split_once('_').unwrap_or((name.as_str(), ""));
                let reduce = match prefix {
                    "sum" => Some(ReduceOp::Sum),
                    "prod" => Some(ReduceOp::Prod),
                    "max" => Some(ReduceOp::Max),
                    "min" => Some(ReduceOp::Min),
                    _ => None,
                };
                if let Some(op) = reduce.filter(|_| name.contains('_')) {
                    let vars = self.subscript(rest)?;
                    let body = self.factor()?;
                    return Ok(Expr::Reduce {
                        op,
                        vars,
                        body: Box::new(body),
                    });
                }
                self.expect_sym('(')?;
                let mut args = Vec::new();
                if !self.sym(')') {
                    args.push(self.ident("a name variable")?);
                    while self.sym(',') {
                        args.push(self.ident("a name variable")?);
                    }
                    self.expect_sym(')')?;
                }
                match (name.as_str(), args.len()) {
                    ("T", 1) => Ok(Expr::T(args.remove(0))),
                    ("D", 2) => Ok(Expr::D(args.remove(0), args.remove(0))),
                    ("T" | "D", _) => {
                        self.pos -= 1;
                        self.fail(if name == "T" {
                            "one argument for T"
                        } else {
                            "two arguments for D"
                        })
                    }
                    _ => Ok(Expr::Plug(name, args)),
                }
            }
            _ => self.fail("a process expression"),
        }
    }
}

/// Splits a row on `|` outside quotes, returning (start column, text) per cell.
fn split_cells(line: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let mut quote: Option<char> = None;
    for (i, c) in line.chars().enumerate() {
        match (quote, c) {
            (None, '\'' | '"') => {
                quote = Some(c);
                cur.push(c);
            }
            (Some(q), _) if c == q => {
                quote = None;
                cur.push(c);
            }
            (None, '|') => {
                out.push((start, std::mem::take(&mut cur)));
                start = i + 1;
            }
            _ => cur.push(c),
        }
    }
    out.push((start, cur));
    out
}

fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), _) if c == q => quote = None,
            (None, '#') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn column_role(name: &str, z: &mut usize) -> Option<ColumnRole> {
    let n = name.trim().to_ascii_lowercase();
    match n.as_str() {
        "name" => Some(ColumnRole::Name),
        "x" => Some(ColumnRole::X),
        "y" => Some(ColumnRole::Y),
        "viz" => Some(ColumnRole::Viz),
        "process" => Some(ColumnRole::Process),
        _ if n.starts_with('z') && n[1..].chars().all(|c| c.is_ascii_digit()) => {
            *z += 1;
            Some(ColumnRole::Z(*z - 1))
        }
        _ => None,
    }
}

/// Parses a complete query text.
pub fn parse_query(text: &str) -> Result<ZqlQuery, SyntaxError> {
    let mut roles: Option<Vec<ColumnRole>> = None;
    let mut z_columns = 0;
    let mut rows = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = split_cells(line);
        if cells.len() > 1 && cells[0].1.trim().is_empty() && line.trim_start().starts_with('|') {
            cells.remove(0);
        }
        let Some(roles) = roles.as_ref() else {
            let mut z = 0;
            let mut rs = Vec::new();
            for (col, c) in &cells {
                if c.trim().is_empty() && rs.len() == cells.len() - 1 {
                    continue;
                }
                match column_role(c, &mut z) {
                    Some(r) => rs.push(r),
                    None => {
                        return Err(SyntaxError {
                            line: line_no,
                            column: col + 1,
                            expected: "a column header (Name, X, Y, Z.., Viz, Process)".into(),
                            found: format!("`{}`", c.trim()),
                        })
                    }
                }
            }
            if rs.first() != Some(&ColumnRole::Name) {
                return Err(SyntaxError {
                    line: line_no,
                    column: 1,
                    expected: "`Name` as the first column".into(),
                    found: format!("`{}`", cells[0].1.trim()),
                });
            }
            z_columns = z;
            roles = Some(rs);
            continue;
        };
        if cells.len() == roles.len() + 1 && cells.last().is_some_and(|c| c.1.trim().is_empty()) {
            cells.pop();
        }
        if cells.len() > roles.len() {
            return Err(SyntaxError {
                line: line_no,
                column: cells[roles.len()].0 + 1,
                expected: format!("at most {} cells", roles.len()),
                found: format!("{} cells", cells.len()),
            });
        }
        let mut row = ZqlRow {
            name: NameCell {
                var: String::new(),
                output: false,
                derivation: None,
            },
            x: AxisCell::empty(),
            y: AxisCell::empty(),
            z: vec![ZCell::empty(); z_columns],
            viz: VizCell::Auto,
            process: Vec::new(),
            span: Span {
                line: line_no,
                cells: cells.iter().map(|c| c.1.trim().to_string()).collect(),
            },
        };
        for (i, role) in roles.iter().enumerate() {
            let (start, text) = cells
                .get(i)
                .cloned()
                .unwrap_or((line.chars().count(), String::new()));
            let mut p = Cell::new(&text, line_no, start)?;
            match role {
                ColumnRole::Name => row.name = p.name_cell()?,
                ColumnRole::X => row.x = p.axis_cell()?,
                ColumnRole::Y => row.y = p.axis_cell()?,
                ColumnRole::Z(k) => row.z[*k] = p.z_cell()?,
                ColumnRole::Viz => row.viz = p.viz_cell()?,
                ColumnRole::Process => row.process = p.process_cell()?,
            }
        }
        rows.push(row);
    }
    if roles.is_none() {
        return Err(SyntaxError {
            line: 1,
            column: 1,
            expected: "a header row".into(),
            found: "end of input".into(),
        });
    }
    Ok(ZqlQuery { z_columns, rows })
}
