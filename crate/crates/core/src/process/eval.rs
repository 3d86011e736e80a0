//! Nested-loop interpreter for process declarations.

use std::collections::HashMap;

use super::primitives::Registry;
use super::represent::r_representatives;
use super::viz::{GroupId, Groups, UnitViz, VisCollection};
use super::ProcessError;
use crate::value::Selector;
use crate::zql::{ArgOpt, Expr, Limiter, ProcessDecl, ReduceOp};

/// Inputs of a process evaluation.
#[derive(Clone, Copy)]
pub struct ProcessEnv<'a> {
    pub collections: &'a HashMap<String, VisCollection>,
    pub groups: &'a Groups,
    pub registry: &'a Registry,
}

/// Selected tuples of the output variables, in limiter order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessOutput {
    pub vars: Vec<String>,
    pub tuples: Vec<Vec<Selector>>,
}

/// Counters reported by instrumented evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub primitive_calls: u64,
    pub region_loads: u64,
}

/// Observes every cell access.
pub(crate) trait Probe {
    fn touch(&mut self, coll: usize, idx: usize);
}

pub(crate) struct NoProbe;

impl Probe for NoProbe {
    fn touch(&mut self, _: usize, _: usize) {}
}

/// Least-recently-used cache of cells; counts loads on misses.
pub(crate) struct LruProbe {
    capacity: usize,
    slot: HashMap<(usize, usize), usize>,
    nodes: Vec<LruNode>,
    head: usize,
    tail: usize,
    pub loads: u64,
}

struct LruNode {
    key: (usize, usize),
    prev: usize,
    next: usize,
}

const NIL: usize = usize::MAX;

impl LruProbe {
    pub(crate) fn new(capacity: usize) -> Self {
        LruProbe {
            capacity: capacity.max(1),
            slot: HashMap::new(),
            nodes: Vec::new(),
            head: NIL,
            tail: NIL,
            loads: 0,
        }
    }

    fn unlink(&mut self, i: usize) {
        let (p, n) = (self.nodes[i].prev, self.nodes[i].next);
        if p == NIL {
            self.head = n
        } else {
            self.nodes[p].next = n
        }
        if n == NIL {
            self.tail = p
        } else {
            self.nodes[n].prev = p
        }
    }

    fn push_front(&mut self, i: usize) {
        self.nodes[i].prev = NIL;
        self.nodes[i].next = self.head;
        if self.head != NIL {
            self.nodes[self.head].prev = i;
        }
        self.head = i;
        if self.tail == NIL {
            self.tail = i;
        }
    }
}

impl Probe for LruProbe {
    fn touch(&mut self, coll: usize, idx: usize) {
        let key = (coll, idx);
        if let Some(&i) = self.slot.get(&key) {
            if self.head != i {
                self.unlink(i);
                self.push_front(i);
            }
            return;
        }
        self.loads += 1;
        let i = if self.nodes.len() < self.capacity {
            self.nodes.push(LruNode {
                key,
                prev: NIL,
                next: NIL,
            });
            self.nodes.len() - 1
        } else {
            let victim = self.tail;
            self.unlink(victim);
            self.slot.remove(&self.nodes[victim].key);
            self.nodes[victim].key = key;
            victim
        };
        self.slot.insert(key, i);
        self.push_front(i);
    }
}

/// Loop bindings: group → position.
pub(crate) type Bound = Vec<(GroupId, usize)>;

pub(crate) struct Evaluator<'a, P> {
    pub env: ProcessEnv<'a>,
    pub probe: P,
    pub calls: u64,
    coll_ids: HashMap<String, usize>,
}

impl<'a, P: Probe> Evaluator<'a, P> {
    pub(crate) fn new(env: ProcessEnv<'a>, probe: P) -> Self {
        Evaluator {
            env,
            probe,
            calls: 0,
            coll_ids: HashMap::new(),
        }
    }

    fn collection(&self, name: &str) -> Result<&'a VisCollection, ProcessError> {
        self.env
            .collections
            .get(name)
            .ok_or_else(|| ProcessError::UnknownCollection(name.to_string()))
    }

    /// The cell of `name` selected by the current loop bindings.
    pub(crate) fn cell(&mut self, name: &str, bound: &Bound) -> Result<&'a UnitViz, ProcessError> {
        let coll = self.collection(name)?;
        let mut flat = 0;
        for axis in &coll.axes {
            let pos = match axis.group.and_then(|g| bound.iter().find(|(b, _)| *b == g)) {
                Some((_, i)) => *i,
                None if axis.len == 1 => 0,
                None => {
                    let vars = axis
                        .group
                        .map(|g| self.env.groups.get(g).vars.join(","))
                        .unwrap_or_default();
                    return Err(ProcessError::MisalignedAxes {
                        collection: name.to_string(),
                        detail: format!(
                            "axis [{vars}] of length {} is not iterated by the process",
                            axis.len
                        ),
                    });
                }
            };
            if pos >= axis.len {
                return Err(ProcessError::MisalignedAxes {
                    collection: name.to_string(),
                    detail: format!("position {pos} outside axis of length {}", axis.len),
                });
            }
            flat = flat * axis.len + pos;
        }
        let id = match self.coll_ids.get(name) {
            Some(&id) => id,
            None => {
                let n = self.coll_ids.len();
                self.coll_ids.insert(name.to_string(), n);
                n
            }
        };
        self.probe.touch(id, flat);
        Ok(&coll.cells[flat])
    }

    /// Groups iterated by `vars`, in first-appearance order.
    pub(crate) fn loop_groups(&self, vars: &[String]) -> Result<Vec<GroupId>, ProcessError> {
        let mut out = Vec::new();
        for v in vars {
            let (g, _) = self
                .env
                .groups
                .lookup(v)
                .ok_or_else(|| ProcessError::UnboundVariable(v.clone()))?;
            if !out.contains(&g) {
                out.push(g);
            }
        }
        Ok(out)
    }

    fn has_data(&self, c: &UnitViz, bound: &Bound) -> Result<(), ProcessError> {
        if c.points.is_empty() {
            return Err(ProcessError::NoData(format!("{bound:?}")));
        }
        Ok(())
    }

    fn located<T>(
        &self,
        r: Result<T, super::primitives::PrimitiveError>,
        bound: &Bound,
    ) -> Result<T, ProcessError> {
        r.map_err(|source| ProcessError::Primitive {
            at: format!("{bound:?}"),
            source,
        })
    }

    pub(crate) fn eval(&mut self, e: &Expr, bound: &mut Bound) -> Result<f64, ProcessError> {
        match e {
            Expr::Const(c) => Ok(*c),
            Expr::Neg(a) => Ok(-self.eval(a, bound)?),
            Expr::Arith(op, a, b) => {
                let x = self.eval(a, bound)?;
                let y = self.eval(b, bound)?;
                Ok(op.apply(x, y))
            }
            Expr::T(f) => {
                let c = self.cell(f, bound)?;
                self.has_data(c, bound)?;
                self.calls += 1;
                let r = self.env.registry.trend(c);
                self.located(r, bound)
            }
            Expr::D(f, g) => {
                let a = self.cell(f, bound)?;
                let b = self.cell(g, bound)?;
                self.has_data(a, bound)?;
                self.has_data(b, bound)?;
                self.calls += 1;
                let r = self.env.registry.distance(a, b);
                self.located(r, bound)
            }
            Expr::Plug(name, args) => {
                let f = self
                    .env
                    .registry
                    .plug(name)
                    .ok_or_else(|| ProcessError::UnknownPrimitive(name.clone()))?
                    .clone();
                let mut cells = Vec::with_capacity(args.len());
                for a in args {
                    let c = self.cell(a, bound)?;
                    self.has_data(c, bound)?;
                    cells.push(c);
                }
                self.calls += 1;
                let r = f(&cells);
                self.located(r, bound)
            }
            Expr::Reduce { op, vars, body } => {
                let groups = self.loop_groups(vars)?;
                for g in &groups {
                    if bound.iter().any(|(b, _)| b == g) {
                        return Err(ProcessError::LoopConflict(vars.join(",")));
                    }
                }
                let lens: Vec<usize> = groups
                    .iter()
                    .map(|&g| self.env.groups.get(g).len())
                    .collect();
                let mut acc = Fold::new(*op);
                let depth = bound.len();
                let mut idx = Product::new(&lens);
                while let Some(cur) = idx.advance() {
                    bound.truncate(depth);
                    bound.extend(groups.iter().copied().zip(cur.iter().copied()));
                    let v = self.eval(body, bound)?;
                    acc.push(v);
                }
                bound.truncate(depth);
                acc.finish()
                    .ok_or_else(|| ProcessError::EmptyReduce(vars.join(",")))
            }
        }
    }
}

/// Running reduction.
pub(crate) struct Fold {
    op: ReduceOp,
    acc: Option<f64>,
}

impl Fold {
    pub(crate) fn new(op: ReduceOp) -> Self {
        let acc = match op {
            ReduceOp::Sum => Some(0.0),
            ReduceOp::Prod => Some(1.0),
            ReduceOp::Max | ReduceOp::Min => None,
        };
        Fold { op, acc }
    }

    pub(crate) fn push(&mut self, v: f64) {
        self.acc = Some(match (self.op, self.acc) {
            (_, None) => v,
            (ReduceOp::Sum, Some(a)) => a + v,
            (ReduceOp::Prod, Some(a)) => a * v,
            (ReduceOp::Max, Some(a)) => a.max(v),
            (ReduceOp::Min, Some(a)) => a.min(v),
        });
    }

    pub(crate) fn finish(&self) -> Option<f64> {
        self.acc
    }
}

/// Row-major enumeration of index tuples.
pub(crate) struct Product {
    lens: Vec<usize>,
    cur: Vec<usize>,
    started: bool,
    done: bool,
}

impl Product {
    pub(crate) fn new(lens: &[usize]) -> Self {
        Product {
            lens: lens.to_vec(),
            cur: vec![0; lens.len()],
            started: false,
            done: lens.contains(&0),
        }
    }
}

impl Product {
    /// Next index tuple without allocating.
    pub(crate) fn advance(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if self.started {
            self.step();
            if self.done {
                return None;
            }
        }
        self.started = true;
        Some(&self.cur)
    }

    fn step(&mut self) {
        let mut k = self.lens.len();
        loop {
            if k == 0 {
                self.done = true;
                return;
            }
            k -= 1;
            self.cur[k] += 1;
            if self.cur[k] < self.lens[k] {
                return;
            }
            self.cur[k] = 0;
        }
    }
}

impl Iterator for Product {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        self.advance().map(<[usize]>::to_vec)
    }
}

/// Orders and truncates scored candidates. Returns candidate indices.
pub fn apply_limiter(
    scores: &[f64],
    argopt: ArgOpt,
    limiter: Option<&Limiter>,
) -> Result<Vec<usize>, ProcessError> {
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ProcessError::NonFiniteScore {
            index: i,
            score: scores[i],
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    match argopt {
        ArgOpt::Max => idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a])),
        ArgOpt::Min => idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b])),
        ArgOpt::Any => {}
    }
    Ok(match limiter {
        None | Some(Limiter::K(None)) => idx,
        Some(Limiter::K(Some(n))) => {
            idx.truncate(*n);
            idx
        }
        Some(Limiter::Threshold(op, t)) => idx
            .into_iter()
            .filter(|&i| op.holds(&scores[i], t))
            .collect(),
        Some(Limiter::Percentile(p)) => {
            let n = (p * scores.len() as f64 / 100.0).ceil() as usize;
            idx.truncate(n);
            idx
        }
    })
}

/// Output tuple of one optimization iteration.
pub(crate) fn output_tuple(
    groups: &Groups,
    opt_vars: &[String],
    loop_groups: &[GroupId],
    idx: &[usize],
) -> Vec<Selector> {
    opt_vars
        .iter()
        .map(|v| {
            let (g, p) = groups.lookup(v).expect("loop variable is bound");
            let k = loop_groups
                .iter()
                .position(|&x| x == g)
                .expect("group iterated");
            groups.get(g).tuples[idx[k]][p].clone()
        })
        .collect()
}

pub(crate) fn run_naive<P: Probe>(
    decl: &ProcessDecl,
    ev: &mut Evaluator<'_, P>,
) -> Result<ProcessOutput, ProcessError> {
    match decl {
        ProcessDecl::Represent {
            output,
            k,
            var,
            coll,
        } => {
            let reps = r_representatives(*k, var, coll, ev)?;
            Ok(ProcessOutput {
                vars: vec![output.clone()],
                tuples: reps.into_iter().map(|s| vec![s]).collect(),
            })
        }
        ProcessDecl::Opt {
            outputs,
            argopt,
            opt_vars,
            limiter,
            body,
        } => {
            let groups = ev.loop_groups(opt_vars)?;
            let lens: Vec<usize> = groups.iter().map(|&g| ev.env.groups.get(g).len()).collect();
            let mut iters = Vec::new();
            let mut scores = Vec::new();
            for idx in Product::new(&lens) {
                let mut bound: Bound = groups.iter().copied().zip(idx.iter().copied()).collect();
                match ev.eval(body, &mut bound) {
                    Ok(s) => scores.push(s),
                    Err(ProcessError::NoData(_)) => continue,
                    Err(e) => return Err(e),
                }
                iters.push(idx);
            }
            let chosen = apply_limiter(&scores, *argopt, limiter.as_ref())?;
            let tuples = chosen
                .into_iter()
                .map(|i| output_tuple(ev.env.groups, opt_vars, &groups, &iters[i]))
                .collect();
            Ok(ProcessOutput {
                vars: outputs.clone(),
                tuples,
            })
        }
    }
}

/// Evaluates a process in plain nested-loop order.
pub fn eval_process(
    decl: &ProcessDecl,
    env: ProcessEnv<'_>,
) -> Result<ProcessOutput, ProcessError> {
    run_naive(decl, &mut Evaluator::new(env, NoProbe))
}

/// Naive evaluation with cell accesses replayed through an LRU cache of `cache_bytes`.
pub fn eval_process_instrumented(
    decl: &ProcessDecl,
    env: ProcessEnv<'_>,
    cache_bytes: usize,
) -> Result<(ProcessOutput, EvalStats), ProcessError> {
    let cap = cache_bytes / super::blocked::cell_bytes(decl, &env).max(1);
    let mut ev = Evaluator::new(env, LruProbe::new(cap));
    let out = run_naive(decl, &mut ev)?;
    Ok((
        out,
        EvalStats {
            primitive_calls: ev.calls,
            region_loads: ev.probe.loads,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::CmpOp;

    #[test]
    fn limiter_examples() {
        let s = [3.0, 5.0, 4.0];
        assert_eq!(
            apply_limiter(&s, ArgOpt::Max, Some(&Limiter::K(Some(2)))).unwrap(),
            vec![1, 2]
        );
        assert_eq!(
            apply_limiter(&s, ArgOpt::Min, Some(&Limiter::Threshold(CmpOp::Lt, 4.0))).unwrap(),
            vec![0]
        );
        assert_eq!(
            apply_limiter(&s, ArgOpt::Max, Some(&Limiter::K(Some(9)))).unwrap(),
            vec![1, 2, 0]
        );
        assert_eq!(
            apply_limiter(&s, ArgOpt::Any, Some(&Limiter::K(Some(2)))).unwrap(),
            vec![0, 1]
        );
        assert_eq!(
            apply_limiter(&s, ArgOpt::Any, Some(&Limiter::Threshold(CmpOp::Gt, 3.5))).unwrap(),
            vec![1, 2]
        );
    }

    #[test]
    fn percentile_rounds_up() {
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(
            apply_limiter(&s, ArgOpt::Max, Some(&Limiter::Percentile(25.0))).unwrap(),
            vec![9, 8, 7]
        );
    }

    #[test]
    fn ties_keep_domain_order() {
        let s = [1.0, 2.0, 2.0, 1.0];
        assert_eq!(
            apply_limiter(&s, ArgOpt::Max, None).unwrap(),
            vec![1, 2, 0, 3]
        );
        assert_eq!(
            apply_limiter(&s, ArgOpt::Min, None).unwrap(),
            vec![0, 3, 1, 2]
        );
    }

    #[test]
    fn non_finite_rejected() {
        assert!(apply_limiter(&[1.0, f64::NAN], ArgOpt::Max, None).is_err());
    }

    #[test]
    fn product_order() {
        let v: Vec<Vec<usize>> = Product::new(&[2, 2]).collect();
        assert_eq!(v, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(Product::new(&[]).count(), 1);
        assert_eq!(Product::new(&[3, 0]).count(), 0);
    }

    #[test]
    fn lru_counts_misses() {
        let mut p = LruProbe::new(2);
        for k in [0, 1, 0, 2, 1, 0] {
            p.touch(0, k);
        }
        // 0 1 hit0 2(evict 1) 1(evict 0) 0(evict 2)
        assert_eq!(p.loads, 5);
    }
}
