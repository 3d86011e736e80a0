use std::fmt::Write;

use super::cost::{BatchPlan, CombinedGroup, CostModel, Phase};
use super::Strategy;

/// One backend call.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub phase: usize,
    /// C-nodes whose requests the call serves.
    pub nodes: Vec<String>,
    /// Logical requests merged into the call.
    pub requests: usize,
    /// Estimated group-by values.
    pub group_values: u64,
    /// This call's share of the predicted phase latency.
    pub predicted_ms: f64,
}

/// Completion of a DAG node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeStep {
    pub node: String,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionTrace {
    pub strategy: Strategy,
    pub records: Vec<TraceRecord>,
    pub steps: Vec<NodeStep>,
    /// Rows that could not be prefetched speculatively.
    pub fallbacks: Vec<String>,
}

impl ExecutionTrace {
    pub fn new(strategy: Strategy) -> Self {
        ExecutionTrace {
            strategy,
            records: Vec::new(),
            steps: Vec::new(),
            fallbacks: Vec::new(),
        }
    }

    pub(crate) fn push_phase(
        &mut self,
        phase: usize,
        groups: Vec<(Vec<String>, usize, u64)>,
        model: &CostModel,
    ) {
        for (i, (nodes, requests, gv)) in groups.into_iter().enumerate() {
            let fixed = if i == 0 { model.fixed_ms } else { 0.0 };
            let predicted_ms =
                fixed + model.per_query_ms + model.per_100_group_values_ms * gv as f64 / 100.0;
            self.records.push(TraceRecord {
                phase,
                nodes,
                requests,
                group_values: gv,
                predicted_ms,
            });
        }
    }

    /// Backend calls issued.
    pub fn backend_requests(&self) -> usize {
        self.records.len()
    }

    /// Requests before combination.
    pub fn logical_requests(&self) -> usize {
        self.records.iter().map(|r| r.requests).sum()
    }

    /// Phases that issued at least one call.
    pub fn phases(&self) -> usize {
        let mut p: Vec<usize> = self.records.iter().map(|r| r.phase).collect();
        p.dedup();
        p.len()
    }

    pub fn max_group_values(&self) -> u64 {
        self.records
            .iter()
            .map(|r| r.group_values)
            .max()
            .unwrap_or(0)
    }

    pub fn predicted_ms(&self) -> f64 {
        self.records.iter().map(|r| r.predicted_ms).sum()
    }

    pub fn step_of(&self, node: &str) -> Option<usize> {
        self.steps.iter().find(|s| s.node == node).map(|s| s.step)
    }

    /// The calls regrouped as a batch plan.
    pub fn batch_plan(&self) -> BatchPlan {
        let mut plan = BatchPlan::default();
        let mut last = None;
        for r in &self.records {
            if last != Some(r.phase) {
                plan.phases.push(Phase::default());
                last = Some(r.phase);
            }
            let members = (0..r.requests).collect();
            plan.phases
                .last_mut()
                .expect("pushed")
                .groups
                .push(CombinedGroup {
                    members,
                    cardinality: r.group_values,
                });
        }
        plan
    }

    /// `phase, node, requests, group_values, predicted_ms`, one line per call.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = writeln!(
                s,
                "{}, {}, {}, {}, {:.3}",
                r.phase,
                r.nodes.join("+"),
                r.requests,
                r.group_values,
                r.predicted_ms
            );
        }
        s
    }
}
