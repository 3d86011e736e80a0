//! Cache-aware evaluation of pairwise processes.
//!
//! A process of the form `argopt_{v1} reduce_{v2} leaf(v1, v2)` touches every
//! (v1, v2) pair. Walking the pairs tile by tile keeps a working set of two
//! tiles resident, so each cell is reloaded once per tile instead of once per
//! outer iteration. Accumulators fold in the same order as the naive loop, so
//! scores are bit-identical.

use super::eval::{
    apply_limiter, output_tuple, run_naive, Bound, EvalStats, Evaluator, Fold, LruProbe,
    ProcessEnv, ProcessOutput,
};
use super::ProcessError;
use crate::zql::{Expr, ProcessDecl};

/// Default cache budget when `ZQL_L3_BYTES` is unset.
pub const DEFAULT_CACHE_BYTES: usize = 8 << 20;

/// Cache budget from `ZQL_L3_BYTES`, or the default.
pub fn default_cache_bytes() -> usize {
    std::env::var("ZQL_L3_BYTES")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&b| b > 0)
        .unwrap_or(DEFAULT_CACHE_BYTES)
}

/// Largest cell footprint among the collections `decl` reads.
pub fn cell_bytes(decl: &ProcessDecl, env: &ProcessEnv<'_>) -> usize {
    decl.collections()
        .iter()
        .filter_map(|c| env.collections.get(c))
        .flat_map(|c| c.cells.iter().map(|v| v.approx_bytes()))
        .max()
        .unwrap_or(64)
}

fn has_reduce(e: &Expr) -> bool {
    match e {
        Expr::Reduce { .. } => true,
        Expr::Arith(_, a, b) => has_reduce(a) || has_reduce(b),
        Expr::Neg(a) => has_reduce(a),
        _ => false,
    }
}

/// Whether `decl` matches the tiled pattern.
pub fn is_tileable(decl: &ProcessDecl) -> bool {
    match decl {
        ProcessDecl::Opt {
            body: Expr::Reduce { body, .. },
            ..
        } => !has_reduce(body),
        _ => false,
    }
}

/// Evaluates `decl` with tiled loops when it matches the pairwise pattern, naively otherwise.
pub fn cache_aware_eval(
    decl: &ProcessDecl,
    env: ProcessEnv<'_>,
    cache_bytes: usize,
) -> Result<(ProcessOutput, EvalStats), ProcessError> {
    let capacity = (cache_bytes / cell_bytes(decl, &env).max(1)).max(1);
    let mut ev = Evaluator::new(env, LruProbe::new(capacity));
    let out = match decl {
        ProcessDecl::Opt {
            outputs,
            argopt,
            opt_vars,
            limiter,
            body:
                Expr::Reduce {
                    op,
                    vars,
                    body: leaf,
                },
        } if !has_reduce(leaf) => {
            let outer = ev.loop_groups(opt_vars)?;
            let inner = ev.loop_groups(vars)?;
            if outer.len() != 1 || inner.len() != 1 {
                run_naive(decl, &mut ev)?
            } else {
                let (gi, gj) = (outer[0], inner[0]);
                if gi == gj {
                    return Err(ProcessError::LoopConflict(vars.join(",")));
                }
                let ni = ev.env.groups.get(gi).len();
                let nj = ev.env.groups.get(gj).len();
                let b = (capacity / 2).max(1);
                let mut acc: Vec<Fold> = (0..ni).map(|_| Fold::new(*op)).collect();
                let mut dropped = vec![false; ni];
                for ib in (0..ni).step_by(b) {
                    for jb in (0..nj).step_by(b) {
                        for i in ib..(ib + b).min(ni) {
                            for j in jb..(jb + b).min(nj) {
                                if dropped[i] {
                                    continue;
                                }
                                let mut bound: Bound = vec![(gi, i), (gj, j)];
                                match ev.eval(leaf, &mut bound) {
                                    Ok(v) => acc[i].push(v),
                                    Err(ProcessError::NoData(_)) => dropped[i] = true,
                                    Err(e) => return Err(e),
                                }
                            }
                        }
                    }
                }
                let alive: Vec<usize> = (0..ni).filter(|&i| !dropped[i]).collect();
                let scores = alive
                    .iter()
                    .map(|&i| {
                        acc[i]
                            .finish()
                            .ok_or_else(|| ProcessError::EmptyReduce(vars.join(",")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let chosen = apply_limiter(&scores, *argopt, limiter.as_ref())?;
                let tuples = chosen
                    .into_iter()
                    .map(|i| output_tuple(ev.env.groups, opt_vars, &outer, &[alive[i]]))
                    .collect();
                ProcessOutput {
                    vars: outputs.clone(),
                    tuples,
                }
            }
        }
        _ => run_naive(decl, &mut ev)?,
    };
    Ok((
        out,
        EvalStats {
            primitive_calls: ev.calls,
            region_loads: ev.probe.loads,
        },
    ))
}
