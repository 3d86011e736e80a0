use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::store::{Column, ColumnKind, ColumnTable, DimensionKind};

/// Shape of a synthetic chain benchmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainBenchSpec {
    /// Visualizations per collection (distinct values of `d0`).
    pub n_visualizations: usize,
    /// C-nodes per chain.
    pub chain_length: usize,
    pub n_chains: usize,
    /// 1: trend filter per row; 2: summed distance to a reference collection.
    pub process_loops: usize,
    /// Fraction of values each process keeps.
    pub selectivity: f64,
}

impl Default for ChainBenchSpec {
    fn default() -> Self {
        ChainBenchSpec {
            n_visualizations: 100,
            chain_length: 5,
            n_chains: 1,
            process_loops: 1,
            selectivity: 0.5,
        }
    }
}

impl ChainBenchSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_visualizations == 0 || self.chain_length == 0 || self.n_chains == 0 {
            return Err("visualizations, chain length and chain count must be at least 1".into());
        }
        if !(1..=2).contains(&self.process_loops) {
            return Err(format!(
                "process loops must be 1 or 2, got {}",
                self.process_loops
            ));
        }
        if !(self.selectivity > 0.0 && self.selectivity <= 1.0) {
            return Err(format!(
                "selectivity must be in (0, 1], got {}",
                self.selectivity
            ));
        }
        Ok(())
    }
}

pub const CHAIN_X: usize = 10;
pub const CHAIN_REF: usize = 4;

/// Table with ordinal `x`, dimensions `d0` (the visualized values) and `d1`,
/// and one measure `m{c}` per chain.
pub fn chain_table(spec: &ChainBenchSpec, rows: usize, seed: u64) -> ColumnTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_visualizations;
    let slopes: Vec<Vec<f64>> = (0..spec.n_chains)
        .map(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    let rows = rows.max(n * CHAIN_X);
    let mut x = Vec::with_capacity(rows);
    let mut d0 = Vec::with_capacity(rows);
    let mut d1 = Vec::with_capacity(rows);
    let mut ms: Vec<Vec<f64>> = vec![Vec::with_capacity(rows); spec.n_chains];
    for i in 0..rows {
        let v = i % n;
        let xi = (i / n) % CHAIN_X;
        x.push(xi as f64);
        d0.push(format!("g{v:04}"));
        d1.push(format!("r{}", (i / (n * CHAIN_X)) % CHAIN_REF));
        for (c, m) in ms.iter_mut().enumerate() {
            m.push((100.0 + slopes[c][v] * xi as f64 + rng.gen_range(-1.0..1.0)).round());
        }
    }
    let mut cols = vec![
        Column::numeric("x", ColumnKind::Dimension(DimensionKind::Ordinal), x),
        Column::categorical("d0", d0),
        Column::categorical("d1", d1),
    ];
    for (c, m) in ms.into_iter().enumerate() {
        cols.push(Column::numeric(format!("m{c}"), ColumnKind::Measure, m));
    }
    ColumnTable::new("chain", cols).expect("generated relation is well formed")
}

/// Chain query: each row's collection is restricted to the values its
/// predecessor's process selected; the last row of each chain is an output.
pub fn chain_query(spec: &ChainBenchSpec) -> String {
    let pct = spec.selectivity * 100.0;
    let mut q = String::from("Name | X | Y | Z | Process\n");
    let mut f = 0;
    let mut v = 0;
    for c in 0..spec.n_chains {
        let y = format!("m{c}");
        let reference = (spec.process_loops == 2).then(|| {
            f += 1;
            v += 1;
            let _ = writeln!(q, "r{f} | 'x' | '{y}' | w{v} <-- 'd1'.* |");
            (format!("r{f}"), format!("w{v}"))
        });
        v += 1;
        let mut var = format!("v{v}");
        for i in 0..spec.chain_length {
            f += 1;
            let last = i + 1 == spec.chain_length;
            let z = if i == 0 {
                format!("{var} <-- 'd0'.*")
            } else {
                var.clone()
            };
            let star = if last { "*" } else { "" };
            let process = if last {
                String::new()
            } else {
                v += 1;
                let body = match &reference {
                    Some((r, w)) => format!("sum_{w} D(f{f}, {r})"),
                    None => format!("T(f{f})"),
                };
                format!("v{v} <-- argmax_{var}[p={pct}] {body}")
            };
            let _ = writeln!(q, "{star}f{f} | 'x' | '{y}' | {z} | {process}");
            var = format!("v{v}");
        }
    }
    q
}
