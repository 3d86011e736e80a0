use std::collections::BTreeSet;
use std::fmt::Write;

use super::PlanError;
use crate::zql::{AxisKind, BindSite, SetExpr, ValidatedQuery, ZKind, ZValue, ZqlRow};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Materializes the collection of a row.
    Collection { row: usize },
    /// Evaluates the `index`-th process of a row.
    Process { row: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanNode {
    pub id: usize,
    pub name: String,
    pub kind: NodeKind,
    pub parents: Vec<usize>,
}

/// Collection and process nodes with their dependencies.
#[derive(Clone, Debug)]
pub struct PlanDag {
    pub query: ValidatedQuery,
    pub nodes: Vec<PlanNode>,
}

/// Variables a row reads, bound elsewhere or in the row itself.
pub(crate) fn row_var_uses(row: &ZqlRow) -> Vec<String> {
    let mut out = Vec::new();
    let mut set = |e: &SetExpr| e.vars(&mut out);
    for a in [&row.x, &row.y] {
        match &a.kind {
            AxisKind::Expr(e) | AxisKind::Bind(_, e) => set(e),
            AxisKind::Empty | AxisKind::DerivedBind(_) => {}
        }
    }
    for z in &row.z {
        match &z.kind {
            ZKind::Expr(e) | ZKind::AttrValueBind { attrs: e, .. } => set(e),
            ZKind::Pair { value, .. } | ZKind::Bind { value, .. } => {
                if let ZValue::Set(e) | ZValue::In(e) = value {
                    set(e)
                }
            }
            ZKind::Empty => {}
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|v| seen.insert(v.clone()));
    out
}

impl PlanDag {
    pub fn cnode(&self, row: usize) -> usize {
        self.nodes
            .iter()
            .position(|n| n.kind == NodeKind::Collection { row })
            .expect("every row has a c-node")
    }

    pub fn pnode(&self, row: usize, index: usize) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.kind == NodeKind::Process { row, index })
    }

    pub fn cnodes(&self) -> impl Iterator<Item = &PlanNode> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Collection { .. }))
    }

    pub fn pnodes(&self) -> impl Iterator<Item = &PlanNode> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Process { .. }))
    }

    /// All (parent, child) pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .flat_map(|n| n.parents.iter().map(move |&p| (p, n.id)))
            .collect()
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges()
            .into_iter()
            .map(|(a, b)| (self.nodes[a].name.clone(), self.nodes[b].name.clone()))
            .collect()
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph plan {\n  rankdir=TB;\n");
        for n in &self.nodes {
            let shape = match n.kind {
                NodeKind::Collection { .. } => "box",
                NodeKind::Process { .. } => "ellipse",
            };
            let _ = writeln!(s, "  n{} [label=\"{}\", shape={}];", n.id, n.name, shape);
        }
        for (a, b) in self.edges() {
            let _ = writeln!(s, "  n{a} -> n{b};");
        }
        s.push_str("}\n");
        s
    }

    fn check_acyclic(&self) -> Result<(), PlanError> {
        let mut indeg: Vec<usize> = self.nodes.iter().map(|n| n.parents.len()).collect();
        let mut ready: Vec<usize> = (0..self.nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for n in &self.nodes {
                if n.parents.contains(&i) {
                    indeg[n.id] -= n.parents.iter().filter(|&&p| p == i).count();
                    if indeg[n.id] == 0 {
                        ready.push(n.id);
                    }
                }
            }
        }
        if seen == self.nodes.len() {
            return Ok(());
        }
        let stuck: Vec<String> = (0..self.nodes.len())
            .filter(|&i| indeg[i] > 0)
            .map(|i| self.nodes[i].name.clone())
            .collect();
        Err(PlanError::CycleDetected(stuck.join(", ")))
    }
}

/// One c-node per row, one p-node per process declaration, with edges from
/// producers of process-derived variables and from operand collections.
pub fn build_dag(q: &ValidatedQuery) -> Result<PlanDag, PlanError> {
    let mut nodes = Vec::new();
    for (r, row) in q.query.rows.iter().enumerate() {
        nodes.push(PlanNode {
            id: nodes.len(),
            name: q.rows[r].name.clone(),
            kind: NodeKind::Collection { row: r },
            parents: vec![],
        });
        let n = row.process.len();
        for i in 0..n {
            let name = if n == 1 {
                format!("p{}", r + 1)
            } else {
                format!("p{}.{}", r + 1, i + 1)
            };
            nodes.push(PlanNode {
                id: nodes.len(),
                name,
                kind: NodeKind::Process { row: r, index: i },
                parents: vec![],
            });
        }
    }
    let find = |kind: NodeKind| nodes.iter().position(|n: &PlanNode| n.kind == kind);
    let producer = |var: &str, own_row: usize| -> Option<usize> {
        let info = q.var(var)?;
        match info.site {
            BindSite::Process { row, index } => find(NodeKind::Process { row, index }),
            BindSite::Column { row, .. } if row != own_row && info.dynamic => {
                find(NodeKind::Collection { row })
            }
            BindSite::Column { .. } => None,
        }
    };
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (id, node) in nodes.iter().enumerate() {
        let p = &mut parents[id];
        match node.kind {
            NodeKind::Collection { row } => {
                for o in &q.rows[row].operands {
                    let r = q
                        .name_row(o)
                        .ok_or_else(|| PlanError::Internal(format!("unknown operand `{o}`")))?;
                    p.extend(find(NodeKind::Collection { row: r }));
                }
                for v in row_var_uses(&q.query.rows[row]) {
                    p.extend(producer(&v, row));
                }
            }
            NodeKind::Process { row, index } => {
                let decl = &q.query.rows[row].process[index];
                for c in decl.collections() {
                    let r = q
                        .name_row(&c)
                        .ok_or_else(|| PlanError::Internal(format!("unknown collection `{c}`")))?;
                    p.extend(find(NodeKind::Collection { row: r }));
                }
                for v in decl.loop_vars() {
                    if let Some(x) = producer(&v, usize::MAX) {
                        if x != id {
                            p.push(x);
                        }
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        p.retain(|x| seen.insert(*x));
        p.sort_unstable();
    }
    for (n, p) in nodes.iter_mut().zip(parents) {
        n.parents = p;
    }
    let dag = PlanDag {
        query: q.clone(),
        nodes,
    };
    dag.check_acyclic()?;
    Ok(dag)
}
