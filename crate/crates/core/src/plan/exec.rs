use std::collections::HashMap;
use std::sync::Arc;

use super::cost::{combine_phase, singleton_phase, CostModel};
use super::dag::{NodeKind, PlanDag};
use super::fetch::{fetch_key, serve, FetchKey};
use super::realize::{Realizer, RowSpec, Source};
use super::speculate::{plan_supersets, row_requests};
use super::trace::{ExecutionTrace, NodeStep};
use super::{par_map, PlanError, Strategy};
use crate::process::{
    cache_aware_eval, eval_process, Group, Groups, ProcessEnv, ProcessOutput, Registry, UnitViz,
    VisCollection,
};
use crate::store::{self, AggregateRequest, ColumnTable, GroupedResult, StoreError};

/// Executes group-by requests.
pub trait Backend: Sync {
    fn execute(&self, req: &AggregateRequest) -> Result<GroupedResult, StoreError>;
    fn execute_combined(&self, reqs: &[AggregateRequest])
        -> Result<Vec<GroupedResult>, StoreError>;
}

impl Backend for ColumnTable {
    fn execute(&self, req: &AggregateRequest) -> Result<GroupedResult, StoreError> {
        store::execute(self, req)
    }

    fn execute_combined(
        &self,
        reqs: &[AggregateRequest],
    ) -> Result<Vec<GroupedResult>, StoreError> {
        store::execute_combined(self, reqs)
    }
}

/// Materialized collection of one output row.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputCollection {
    pub name: String,
    pub row: usize,
    pub collection: VisCollection,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultSet {
    pub outputs: Vec<OutputCollection>,
}

impl ResultSet {
    pub fn get(&self, name: &str) -> Option<&VisCollection> {
        self.outputs
            .iter()
            .find(|o| o.name == name)
            .map(|o| &o.collection)
    }
}

/// Query executor over a table and a backend.
pub struct Engine<'a> {
    table: &'a ColumnTable,
    backend: &'a dyn Backend,
    registry: Registry,
    cost: CostModel,
    cache_bytes: Option<usize>,
    parallel: bool,
}

impl<'a> Engine<'a> {
    pub fn new(table: &'a ColumnTable) -> Self {
        Engine {
            table,
            backend: table,
            registry: Registry::default(),
            cost: CostModel::default(),
            cache_bytes: None,
            parallel: true,
        }
    }

    pub fn with_backend(mut self, backend: &'a dyn Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_registry(mut self, registry: Registry) -> Self {
        self.registry = registry;
        self
    }

    pub fn with_cost_model(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    /// Evaluates processes with tiled loops under the given cache budget.
    pub fn with_cache_aware(mut self, bytes: Option<usize>) -> Self {
        self.cache_bytes = bytes;
        self
    }

    /// Runs phases and independent processes on the thread pool (when built with `parallel`).
    pub fn with_parallelism(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn run(
        &self,
        dag: &PlanDag,
        strategy: Strategy,
    ) -> Result<(ResultSet, ExecutionTrace), PlanError> {
        let n = dag.query.rows.len();
        let mut run = Run {
            eng: self,
            dag,
            strategy,
            groups: Groups::new(),
            specs: vec![None; n],
            colls: HashMap::new(),
            fetched: vec![Vec::new(); n],
            trace: ExecutionTrace::new(strategy),
            phase: 0,
        };
        run.execute()?;
        let outputs = dag
            .query
            .outputs
            .iter()
            .map(|&r| {
                let name = dag.query.rows[r].name.clone();
                let collection = run.colls[&name].clone();
                OutputCollection {
                    name,
                    row: r,
                    collection,
                }
            })
            .collect();
        Ok((ResultSet { outputs }, run.trace))
    }

    /// Superset requests the speculative strategies would issue per dynamic row.
    pub fn speculative_supersets(
        &self,
        dag: &PlanDag,
    ) -> Result<Vec<(String, Vec<AggregateRequest>)>, PlanError> {
        let q = &dag.query;
        let mut groups = Groups::new();
        let mut specs: Vec<Option<RowSpec>> = vec![None; q.rows.len()];
        prepass(q, self.table, &mut groups, &mut specs)?;
        let plan = plan_supersets(q, self.table, &groups, &specs, &self.cost);
        Ok(plan
            .requests
            .into_iter()
            .map(|(r, reqs)| {
                (
                    q.rows[r].name.clone(),
                    reqs.into_iter().map(|x| x.1).collect(),
                )
            })
            .collect())
    }
}

/// Runs `dag` on `table` with default primitives and cost model.
pub fn run(
    dag: &PlanDag,
    strategy: Strategy,
    backend: &dyn Backend,
    table: &ColumnTable,
) -> Result<(ResultSet, ExecutionTrace), PlanError> {
    Engine::new(table).with_backend(backend).run(dag, strategy)
}

fn at(node: &str) -> impl Fn(PlanError) -> PlanError + '_ {
    move |e| match e {
        e @ (PlanError::Store { .. } | PlanError::Process { .. } | PlanError::InNode { .. }) => e,
        e => PlanError::InNode {
            node: node.to_string(),
            source: Box::new(e),
        },
    }
}

/// Realizes every row that does not depend on a process result.
fn prepass(
    q: &crate::zql::ValidatedQuery,
    table: &ColumnTable,
    groups: &mut Groups,
    specs: &mut [Option<RowSpec>],
) -> Result<(), PlanError> {
    let rz = Realizer {
        q,
        table,
        superset: false,
    };
    for (r, info) in q.rows.iter().enumerate() {
        if info.dynamic {
            if !info.derived {
                rz.static_binds(r, groups).map_err(at(&info.name))?;
            }
            continue;
        }
        let spec = if info.derived {
            rz.derived(r, groups, specs)
        } else {
            rz.row(r, groups)
        };
        specs[r] = Some(spec.map_err(at(&info.name))?);
    }
    Ok(())
}

#[derive(Clone)]
struct Fetched {
    key: FetchKey,
    result: Arc<GroupedResult>,
}

struct Pending {
    row: usize,
    key: FetchKey,
    req: AggregateRequest,
}

struct Run<'e, 'a> {
    eng: &'e Engine<'a>,
    dag: &'e PlanDag,
    strategy: Strategy,
    groups: Groups,
    specs: Vec<Option<RowSpec>>,
    colls: HashMap<String, VisCollection>,
    fetched: Vec<Vec<Fetched>>,
    trace: ExecutionTrace,
    phase: usize,
}

impl Run<'_, '_> {
    fn execute(&mut self) -> Result<(), PlanError> {
        let q = &self.dag.query;
        prepass(q, self.eng.table, &mut self.groups, &mut self.specs)?;
        if matches!(self.strategy, Strategy::Speculate | Strategy::SmartFuse) {
            self.prefetch()?;
        }
        let nodes = &self.dag.nodes;
        let mut done = vec![false; nodes.len()];
        let mut step = 0;
        while done.iter().any(|d| !d) {
            let ready: Vec<usize> = (0..nodes.len())
                .filter(|&i| !done[i] && nodes[i].parents.iter().all(|&p| done[p]))
                .collect();
            if ready.is_empty() {
                return Err(PlanError::Internal("no runnable node".into()));
            }
            let wave = if self.strategy == Strategy::NoOpt {
                vec![ready[0]]
            } else {
                ready
            };
            self.run_wave(&wave)?;
            for &i in &wave {
                done[i] = true;
                self.trace.steps.push(NodeStep {
                    node: nodes[i].name.clone(),
                    step,
                });
            }
            step += 1;
        }
        Ok(())
    }

    fn prefetch(&mut self) -> Result<(), PlanError> {
        let q = &self.dag.query;
        let table = self.eng.table;
        let plan = plan_supersets(q, table, &self.groups, &self.specs, &self.eng.cost);
        let mut pending = Vec::new();
        for r in 0..q.rows.len() {
            if let Some(spec) = &self.specs[r] {
                pending.extend(
                    row_requests(spec, false, table)
                        .into_iter()
                        .map(|(key, req)| Pending { row: r, key, req }),
                );
            } else if let Some(reqs) = plan.requests.get(&r) {
                pending.extend(
                    reqs.iter()
                        .cloned()
                        .map(|(key, req)| Pending { row: r, key, req }),
                );
            }
        }
        self.trace.fallbacks = plan
            .fallbacks
            .iter()
            .map(|(r, _)| q.rows[*r].name.clone())
            .collect();
        self.submit(pending)
    }

    fn run_wave(&mut self, wave: &[usize]) -> Result<(), PlanError> {
        let q = &self.dag.query;
        let table = self.eng.table;
        let mut crow = Vec::new();
        let mut pnodes = Vec::new();
        for &i in wave {
            match self.dag.nodes[i].kind {
                NodeKind::Collection { row } => crow.push(row),
                NodeKind::Process { row, index } => pnodes.push((i, row, index)),
            }
        }
        let rz = Realizer {
            q,
            table,
            superset: false,
        };
        let mut pending = Vec::new();
        for &r in &crow {
            if self.specs[r].is_none() {
                let spec = if q.rows[r].derived {
                    rz.derived(r, &mut self.groups, &self.specs)
                } else {
                    rz.row(r, &mut self.groups)
                };
                self.specs[r] = Some(spec.map_err(at(&q.rows[r].name))?);
            }
            pending.extend(self.missing(r));
        }
        if self.strategy == Strategy::NoOpt {
            for p in pending {
                self.submit(vec![p])?;
            }
        } else {
            self.submit(pending)?;
        }
        for &r in &crow {
            let c = self.materialize(r)?;
            self.colls.insert(q.rows[r].name.clone(), c);
        }

        let env = ProcessEnv {
            collections: &self.colls,
            groups: &self.groups,
            registry: &self.eng.registry,
        };
        let cache = self.eng.cache_bytes;
        let outs: Vec<Result<ProcessOutput, PlanError>> =
            par_map(self.eng.parallel, &pnodes, |&(id, row, index)| {
                let decl = &q.query.rows[row].process[index];
                let out = match cache {
                    Some(b) => cache_aware_eval(decl, env, b).map(|o| o.0),
                    None => eval_process(decl, env),
                };
                out.map_err(|source| PlanError::Process {
                    node: self.dag.nodes[id].name.clone(),
                    source,
                })
            });
        for out in outs {
            let out = out?;
            let joint = q
                .var(&out.vars[0])
                .ok_or_else(|| {
                    PlanError::Internal(format!("unvalidated output `{}`", out.vars[0]))
                })?
                .joint;
            self.groups.insert(
                joint,
                Group {
                    vars: out.vars,
                    tuples: out.tuples,
                },
            );
        }
        Ok(())
    }

    fn lookup(&self, r: usize, spec: &RowSpec, i: usize) -> Option<&Fetched> {
        let table = self.eng.table;
        let plain = fetch_key(&spec.cells[i], None, table);
        let have = &self.fetched[r];
        have.iter().find(|f| f.key == plain).or_else(|| {
            let wide = fetch_key(&spec.cells[i], Some(&spec.dyn_in), table);
            have.iter().find(|f| f.key == wide)
        })
    }

    /// Requests still needed to materialize row `r`.
    fn missing(&self, r: usize) -> Vec<Pending> {
        let spec = self.specs[r].as_ref().expect("realized");
        let reqs = row_requests(spec, false, self.eng.table);
        reqs.into_iter()
            .filter(|(key, _)| {
                spec.cells
                    .iter()
                    .enumerate()
                    .filter(|(i, c)| {
                        spec.sources[*i] == Source::Fetch
                            && fetch_key(c, None, self.eng.table) == *key
                    })
                    .any(|(i, _)| self.lookup(r, spec, i).is_none())
            })
            .map(|(key, req)| Pending { row: r, key, req })
            .collect()
    }

    fn submit(&mut self, pending: Vec<Pending>) -> Result<(), PlanError> {
        if pending.is_empty() {
            return Ok(());
        }
        let table = self.eng.table;
        let reqs: Vec<AggregateRequest> = pending.iter().map(|p| p.req.clone()).collect();
        let phase = match self.strategy {
            Strategy::SmartFuse => combine_phase(&reqs, &self.eng.cost, table),
            _ => singleton_phase(&reqs, table),
        };
        let backend = self.eng.backend;
        let results: Vec<Result<Vec<GroupedResult>, StoreError>> =
            par_map(self.eng.parallel, &phase.groups, |g| {
                if g.members.len() == 1 {
                    backend.execute(&reqs[g.members[0]]).map(|r| vec![r])
                } else {
                    let batch: Vec<AggregateRequest> =
                        g.members.iter().map(|&m| reqs[m].clone()).collect();
                    backend.execute_combined(&batch)
                }
            });
        let q = &self.dag.query;
        let mut records = Vec::new();
        let mut pending: Vec<Option<Pending>> = pending.into_iter().map(Some).collect();
        for (g, res) in phase.groups.iter().zip(results) {
            let first = pending[g.members[0]].as_ref().map_or(0, |p| p.row);
            let res = res.map_err(|source| PlanError::Store {
                node: q.rows[first].name.clone(),
                source,
            })?;
            let mut nodes: Vec<String> = Vec::new();
            for (&m, result) in g.members.iter().zip(res) {
                let p = pending[m]
                    .take()
                    .expect("each request belongs to one group");
                let name = q.rows[p.row].name.clone();
                if !nodes.contains(&name) {
                    nodes.push(name);
                }
                self.fetched[p.row].push(Fetched {
                    key: p.key,
                    result: Arc::new(result),
                });
            }
            records.push((nodes, g.members.len(), g.cardinality));
        }
        self.trace.push_phase(self.phase, records, &self.eng.cost);
        self.phase += 1;
        Ok(())
    }

    fn materialize(&self, r: usize) -> Result<VisCollection, PlanError> {
        let q = &self.dag.query;
        let spec = self.specs[r].as_ref().expect("realized");
        let mut cells = Vec::with_capacity(spec.cells.len());
        for (i, c) in spec.cells.iter().enumerate() {
            let points = match spec.sources[i] {
                Source::Copy { row, idx } => {
                    self.colls[&q.rows[row].name].cells[idx].points.clone()
                }
                Source::Fetch => {
                    let f = self.lookup(r, spec, i).ok_or_else(|| {
                        PlanError::Internal(format!(
                            "no data fetched for a cell of `{}`",
                            q.rows[r].name
                        ))
                    })?;
                    serve(c, &f.result).ok_or_else(|| {
                        PlanError::Internal(format!(
                            "fetched result cannot serve a cell of `{}`",
                            q.rows[r].name
                        ))
                    })?
                }
            };
            cells.push(UnitViz {
                spec: c.clone(),
                points,
            });
        }
        Ok(VisCollection::new(spec.axes.clone(), cells))
    }
}
