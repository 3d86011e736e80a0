use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use zql_core::plan::{build_dag, CostModel, Engine, ExecutionTrace, PlanDag, ResultSet, Strategy};
use zql_core::process::{default_cache_bytes, Registry, VisCollection};
use zql_core::store::{load_table, sample_sales, AttributeCatalog, ColumnTable, Schema};
use zql_core::vea::{completeness_suite, random_relation, OPERATORS};
use zql_core::workload::{
    airline_table, benchmark_queries, chain_query, chain_table, doc_queries, sales_table,
    ChainBenchSpec,
};
use zql_core::zql::{parse_query, validate_with};

#[derive(Parser)]
#[command(name = "zql", version, about = "Run ZQL visual exploration queries")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a query file against a dataset.
    Run(RunArgs),
    /// Run the synthetic chain benchmark or the realistic query suite.
    Bench(BenchArgs),
    /// Replay every algebra operator as a query and compare.
    Completeness(CompletenessArgs),
    /// Write a synthetic dataset, its schema and matching queries.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct CostArgs {
    #[arg(long)]
    cost_fixed_ms: Option<f64>,
    #[arg(long)]
    cost_per_query_ms: Option<f64>,
    #[arg(long = "cost-per-100gv-ms")]
    cost_per_100gv_ms: Option<f64>,
    #[arg(long)]
    max_groupby: Option<u64>,
}

impl CostArgs {
    fn model(&self) -> CostModel {
        let mut m = CostModel::default();
        if let Some(v) = self.cost_fixed_ms {
            m.fixed_ms = v;
        }
        if let Some(v) = self.cost_per_query_ms {
            m.per_query_ms = v;
        }
        if let Some(v) = self.cost_per_100gv_ms {
            m.per_100_group_values_ms = v;
        }
        if let Some(v) = self.max_groupby {
            m.max_groupby = v;
        }
        m
    }
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated data file; the built-in four-row sample when omitted.
    #[arg(long, requires = "schema")]
    data: Option<PathBuf>,
    /// `name:kind` schema file.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    query: PathBuf,
    /// Repeat to run several strategies; results go to one subdirectory each.
    #[arg(long, default_value = "smartfuse")]
    strategy: Vec<Strategy>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "slope")]
    trend: String,
    #[arg(long, default_value = "euclidean")]
    distance: String,
    #[command(flatten)]
    cost: CostArgs,
    /// Write the plan DAG in DOT format.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Write the execution trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Tile process loops to the cache budget from ZQL_L3_BYTES.
    #[arg(long)]
    cache_aware: bool,
    /// Run phases on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Chain,
    Realistic,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "chain")]
    suite: Suite,
    #[arg(long, default_value_t = 100)]
    n_visualizations: usize,
    #[arg(long, default_value_t = 5)]
    chain_length: usize,
    #[arg(long, default_value_t = 1)]
    n_chains: usize,
    #[arg(long, default_value_t = 1)]
    process_loops: usize,
    #[arg(long, default_value_t = 0.5)]
    selectivity: f64,
    #[arg(long, default_value_t = 100_000)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Strategies to run; all four when omitted.
    #[arg(long)]
    strategy: Vec<Strategy>,
    #[command(flatten)]
    cost: CostArgs,
}

#[derive(Args)]
struct CompletenessArgs {
    /// Random relations checked besides the sample relation.
    #[arg(long, default_value_t = 20)]
    relations: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "noopt")]
    strategy: Strategy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dataset {
    Sample,
    Sales,
    Airline,
    Chain,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "sales")]
    kind: Dataset,
    #[arg(long, default_value_t = 100_000)]
    rows: usize,
    /// Products in the sales dataset.
    #[arg(long, default_value_t = 100)]
    products: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    n_visualizations: usize,
    #[arg(long, default_value_t = 5)]
    chain_length: usize,
    #[arg(long, default_value_t = 1)]
    n_chains: usize,
    #[arg(long, default_value_t = 1)]
    process_loops: usize,
    #[arg(long, default_value_t = 0.5)]
    selectivity: f64,
}

/// Error tagged with the stage that produced it.
struct Failure {
    stage: &'static str,
    code: u8,
    message: String,
}

impl Failure {
    fn new(stage: &'static str, code: u8, e: impl std::fmt::Display) -> Self {
        Failure {
            stage,
            code,
            message: e.to_string(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure {
            stage: "io",
            code: 1,
            message: format!("{e:#}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => cmd_run(&a),
        Cmd::Bench(a) => cmd_bench(&a).map_err(Failure::from),
        Cmd::Completeness(a) => cmd_completeness(&a),
        Cmd::Gen(a) => cmd_gen(&a).map_err(Failure::from),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.stage, f.message);
            ExitCode::from(f.code)
        }
    }
}

fn registry(trend: &str, distance: &str) -> Result<Registry, Failure> {
    let mut r = Registry::new();
    r.select_trend(trend)
        .map_err(|e| Failure::new("config", 1, e))?;
    r.select_distance(distance)
        .map_err(|e| Failure::new("config", 1, e))?;
    Ok(r)
}

fn compile(text: &str, table: &ColumnTable, reg: &Registry) -> Result<PlanDag, Failure> {
    let q = parse_query(text).map_err(|e| Failure::new("parse", 2, e))?;
    let v = validate_with(&q, &AttributeCatalog::from_table(table), &reg.plug_names())
        .map_err(|e| Failure::new("validate", 2, e))?;
    build_dag(&v).map_err(|e| Failure::new("plan", 1, e))
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let table = match (&a.data, &a.schema) {
        (Some(d), Some(s)) => {
            let schema = Schema::load(s).map_err(|e| Failure::new("load", 1, e))?;
            load_table(d, &schema).map_err(|e| Failure::new("load", 1, e))?
        }
        _ => sample_sales(),
    };
    let text = fs::read_to_string(&a.query)
        .with_context(|| format!("reading {}", a.query.display()))
        .map_err(Failure::from)?;
    let reg = registry(&a.trend, &a.distance)?;
    let dag = compile(&text, &table, &reg)?;
    if let Some(p) = &a.dot {
        write(p, &dag.to_dot())?;
    }
    let cache = a.cache_aware.then(default_cache_bytes);
    let engine = Engine::new(&table)
        .with_registry(reg)
        .with_cost_model(a.cost.model())
        .with_cache_aware(cache)
        .with_parallelism(!a.sequential);
    let mut strategies = a.strategy.clone();
    strategies.dedup();
    let nested = strategies.len() > 1;
    let mut traces = String::new();
    for &s in &strategies {
        let start = Instant::now();
        let (res, trace) = engine
            .run(&dag, s)
            .map_err(|e| Failure::new("execute", 1, e))?;
        let elapsed = start.elapsed();
        let dir = if nested {
            a.out.join(s.name())
        } else {
            a.out.clone()
        };
        write_results(&dir, &res)?;
        println!(
            "{s}: {} outputs, {} requests in {} phases, predicted {:.1} ms, measured {:.3} ms",
            res.outputs.len(),
            trace.backend_requests(),
            trace.phases(),
            trace.predicted_ms(),
            elapsed.as_secs_f64() * 1e3
        );
        let _ = writeln!(traces, "# {s}\n{}", trace_text(&trace));
    }
    if let Some(p) = &a.trace {
        write(p, &traces)?;
    }
    Ok(())
}

fn trace_text(t: &ExecutionTrace) -> String {
    let mut s = String::from("phase, node, requests, group_values, predicted_ms\n");
    s.push_str(&t.to_lines());
    for f in &t.fallbacks {
        let _ = writeln!(s, "fallback: {f}");
    }
    s
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_results(dir: &Path, res: &ResultSet) -> Result<(), Failure> {
    for o in &res.outputs {
        write(
            &dir.join(format!("{}.csv", o.name)),
            &collection_csv(&o.collection),
        )?;
    }
    Ok(())
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line per point: `x_attr, y_attr, bound attributes..., x, y`. A cell
/// without points gets one line with empty `x` and `y`.
fn collection_csv(c: &VisCollection) -> String {
    let attrs: BTreeSet<&str> = c
        .cells
        .iter()
        .flat_map(|v| v.bindings().keys().map(String::as_str))
        .collect();
    let mut out = String::from("x_attr,y_attr");
    for a in &attrs {
        out.push(',');
        out.push_str(&field(a));
    }
    out.push_str(",x,y\n");
    for cell in &c.cells {
        let mut key = format!("{},{}", field(cell.x_attr()), field(cell.y_attr()));
        for a in &attrs {
            key.push(',');
            if let Some(v) = cell.bindings().get(*a) {
                key.push_str(&field(&v.to_string()));
            }
        }
        if cell.points.is_empty() {
            let _ = writeln!(out, "{key},,");
        }
        for (x, y) in &cell.points {
            let _ = writeln!(out, "{key},{},{y}", field(&x.to_string()));
        }
    }
    out
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let strategies = if a.strategy.is_empty() {
        Strategy::ALL.to_vec()
    } else {
        a.strategy.clone()
    };
    let cost = a.cost.model();
    let mut jobs: Vec<(String, ColumnTable, String)> = Vec::new();
    match a.suite {
        Suite::Chain => {
            let spec = ChainBenchSpec {
                n_visualizations: a.n_visualizations,
                chain_length: a.chain_length,
                n_chains: a.n_chains,
                process_loops: a.process_loops,
                selectivity: a.selectivity,
            };
            if let Err(e) = spec.validate() {
                bail!("infeasible benchmark spec: {e}");
            }
            jobs.push((
                "chain".into(),
                chain_table(&spec, a.rows, a.seed),
                chain_query(&spec),
            ));
        }
        Suite::Realistic => {
            let t = airline_table(a.rows, a.seed);
            for (name, q, _, _) in benchmark_queries() {
                jobs.push((name.into(), t.clone(), q.into()));
            }
        }
    }
    println!(
        "{:<10} {:<10} {:>9} {:>7} {:>10} {:>14} {:>12}",
        "query", "strategy", "requests", "phases", "max gv", "predicted ms", "measured ms"
    );
    for (name, table, text) in &jobs {
        let reg = Registry::new();
        let dag = compile(text, table, &reg)
            .map_err(|f| anyhow::anyhow!("{}: {}", f.stage, f.message))?;
        let engine = Engine::new(table).with_cost_model(cost);
        for &s in &strategies {
            let start = Instant::now();
            let (_, trace) = engine
                .run(&dag, s)
                .with_context(|| format!("{name} under {s}"))?;
            println!(
                "{:<10} {:<10} {:>9} {:>7} {:>10} {:>14.1} {:>12.3}",
                name,
                s.name(),
                trace.backend_requests(),
                trace.phases(),
                trace.max_group_values(),
                trace.predicted_ms(),
                start.elapsed().as_secs_f64() * 1e3
            );
        }
    }
    Ok(())
}

fn cmd_completeness(a: &CompletenessArgs) -> Result<(), Failure> {
    let mut tables = vec![sample_sales()];
    tables.extend((0..a.relations).map(|i| random_relation(a.seed.wrapping_add(i))));
    let reports = completeness_suite(&tables, &Registry::new(), a.seed, a.strategy);
    println!(
        "{:<10} {:>8} {:>9}  result",
        "operator", "checked", "failures"
    );
    let mut ok = true;
    for r in &reports {
        ok &= r.passed();
        println!(
            "{:<10} {:>8} {:>9}  {}",
            r.operator,
            r.checked,
            r.failures.len(),
            if r.passed() { "pass" } else { "FAIL" }
        );
        if let Some(f) = r.failures.first() {
            println!("  first failure: {}", f.detail);
        }
    }
    debug_assert_eq!(reports.len(), OPERATORS.len());
    if ok {
        Ok(())
    } else {
        Err(Failure::new(
            "check",
            1,
            "some operator constructions disagree with direct evaluation",
        ))
    }
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (table, queries): (ColumnTable, Vec<(String, String)>) = match a.kind {
        Dataset::Sample => (
            sample_sales(),
            vec![("overview".into(), doc_queries()[0].1.clone())],
        ),
        Dataset::Sales => (
            sales_table(a.products, a.rows, a.seed),
            doc_queries()
                .into_iter()
                .map(|(n, q)| (n.to_string(), q))
                .collect(),
        ),
        Dataset::Airline => (
            airline_table(a.rows, a.seed),
            benchmark_queries()
                .into_iter()
                .map(|(n, q, _, _)| (n.to_string(), q.to_string()))
                .collect(),
        ),
        Dataset::Chain => {
            let spec = ChainBenchSpec {
                n_visualizations: a.n_visualizations,
                chain_length: a.chain_length,
                n_chains: a.n_chains,
                process_loops: a.process_loops,
                selectivity: a.selectivity,
            };
            if let Err(e) = spec.validate() {
                bail!("infeasible benchmark spec: {e}");
            }
            (
                chain_table(&spec, a.rows, a.seed),
                vec![("chain".into(), chain_query(&spec))],
            )
        }
    };
    fs::write(a.out.join("data.csv"), table.to_text())?;
    fs::write(a.out.join("schema.txt"), table.schema().to_text())?;
    for (name, q) in &queries {
        fs::write(a.out.join(format!("{name}.zql")), q)?;
    }
    println!(
        "wrote {} rows and {} queries to {}",
        table.rows(),
        queries.len(),
        a.out.display()
    );
    Ok(())
}
